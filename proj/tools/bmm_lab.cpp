// Copyright 2026 The bmm-lab Authors.
// SPDX-License-Identifier: Apache-2.0

// bmm-lab <gen-data|train|sweep|plot> [flags]

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "bmm/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Multimodal mixup experiments on synthetic two-modality data", "bmm-lab"};
  app.require_subcommand(1);

  std::string config, data, out;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> jobs;

  auto* gen = app.add_subcommand("gen-data", "Generate train/test MMDS files and print probe accuracies");
  gen->add_option("--config", config, "Experiment config file")->required();
  gen->add_option("--out", out, "Output directory (train.mmds, test.mmds)")->required();

  std::string checkpoint;
  auto* tr = app.add_subcommand("train", "Train one model and write the per-epoch metrics CSV");
  tr->add_option("--config", config, "Experiment config file")->required();
  tr->add_option("--data", data, "Directory holding train.mmds and test.mmds")->required();
  tr->add_option("--out", out, "Metrics CSV path")->required();
  tr->add_option("--seed", seed, "Overrides [train] seed");
  tr->add_option("--checkpoint", checkpoint, "Also write the final parameters (MMCK)");

  std::string axis;
  std::vector<std::string> values;
  std::size_t seeds = 3;
  auto* sw = app.add_subcommand("sweep", "Run a hyperparameter sweep over several seeds");
  sw->add_option("--config", config, "Experiment config file")->required();
  sw->add_option("--data", data, "Data directory; generated from [data] when omitted");
  sw->add_option("--axis", axis, "lambda|alpha|warmup|mode")->required();
  sw->add_option("--values", values, "Comma-separated axis values")->delimiter(',')->required();
  sw->add_option("--seeds", seeds, "Seeds per value");
  sw->add_option("--seed", seed, "First seed (overrides [train] seed)");
  sw->add_option("--jobs", jobs, "Worker threads (BMM_LAB_THREADS overrides)");
  sw->add_option("--out", out, "Summary CSV path")->required();

  std::vector<std::string> inputs;
  std::vector<std::string> columns;
  auto* pl = app.add_subcommand("plot", "Render metrics CSVs as an SVG line chart");
  pl->add_option("inputs", inputs, "Metrics CSV files")->required();
  pl->add_option("--out", out, "SVG output path")->required();
  pl->add_option("--columns", columns, "Comma-separated metric columns")->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return bmm::cli::kConfig;
  }

  if (gen->parsed()) return bmm::cli::gen_data(config, out, std::cout, std::cerr);
  if (tr->parsed()) {
    bmm::cli::TrainArgs a{config, data, out, seed, std::nullopt};
    if (!checkpoint.empty()) a.checkpoint = checkpoint;
    return bmm::cli::train(a, std::cout, std::cerr);
  }
  if (sw->parsed()) {
    bmm::cli::SweepArgs a;
    a.config = config;
    if (!data.empty()) a.data = data;
    a.axis = axis;
    a.values = values;
    a.seeds = seeds;
    a.seed = seed;
    a.jobs = jobs;
    a.out = out;
    return bmm::cli::sweep(a, std::cout, std::cerr);
  }
  bmm::cli::PlotArgs a;
  a.inputs.assign(inputs.begin(), inputs.end());
  a.out = out;
  if (!columns.empty()) a.columns = columns;
  return bmm::cli::plot(a, std::cout, std::cerr);
}
