// Copyright 2026 The bmm-lab Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <optional>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include "bmm/config.hpp"
#include "bmm/csv.hpp"
#include "bmm/data.hpp"
#include "bmm/error.hpp"
#include "bmm/plot.hpp"
#include "bmm/probe.hpp"
#include "bmm/train.hpp"

namespace bmm::cli {

/// Stable exit-code contract.
enum ExitCode : int {
  kOk = 0,
  kConfig = 2,
  kIo = 3,
  kNumeric = 4,
};

/// Runs `fn`, mapping library errors onto exit codes and reporting them on `err`.
inline int guarded(std::ostream& err, const std::function<int()>& fn) {
  try {
    return fn();
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const RangeError& e) {
    err << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const FormatError& e) {
    err << "format error: " << e.what() << '\n';
    return kIo;
  } catch (const IoError& e) {
    err << "io error: " << e.what() << '\n';
    return kIo;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "io error: " << e.what() << '\n';
    return kIo;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << '\n';
    return kNumeric;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kConfig;
  }
}

/// Worker count: BMM_LAB_THREADS wins over --jobs, which wins over the core count.
inline std::size_t resolve_jobs(std::optional<std::size_t> flag) {
  if (const char* env = std::getenv("BMM_LAB_THREADS"); env != nullptr && *env != '\0') {
    const std::string text(env);
    std::size_t v = 0;
    const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
    if (res.ec != std::errc() || res.ptr != text.data() + text.size() || v == 0) {
      throw ConfigError("BMM_LAB_THREADS", "expected a positive integer, got '" + text + "'");
    }
    return v;
  }
  if (flag) {
    if (*flag == 0) throw ConfigError("jobs", "must be >= 1");
    return *flag;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

// ---------------------------------------------------------------------------
// gen-data
// ---------------------------------------------------------------------------

inline int gen_data(const std::filesystem::path& config, const std::filesystem::path& out_dir, std::ostream& out,
                    std::ostream& err) {
  return guarded(err, [&] {
    const ExperimentConfig cfg = load_config(config);
    const SplitDataset data = generate_synthetic(cfg.data);
    std::filesystem::create_directories(out_dir);
    write_dataset(data.train, train_file(out_dir));
    write_dataset(data.test, test_file(out_dir));
    const ProbeReport probe = probe_modalities(data);
    out << "wrote " << train_file(out_dir).string() << " (" << data.train.size() << " samples) and "
        << test_file(out_dir).string() << " (" << data.test.size() << " samples)\n";
    out << "probe_acc_audio=" << format_real(probe.audio) << " probe_acc_video=" << format_real(probe.video)
        << '\n';
    return kOk;
  });
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

struct TrainArgs {
  std::filesystem::path config;
  std::filesystem::path data;
  std::filesystem::path out;
  std::optional<std::uint64_t> seed;
  std::optional<std::filesystem::path> checkpoint;
};

inline std::string summary_line(const RunResult& r) {
  return "final_test_acc_multi=" + format_real(r.final_test_acc_multi) +
         " best_test_acc_multi=" + format_real(r.best_test_acc_multi) + " at_epoch=" + std::to_string(r.best_epoch);
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open " + path.string() + " for writing");
  f << text;
  if (!f) throw IoError("write failed for " + path.string());
}

inline int train(const TrainArgs& args, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    ExperimentConfig cfg = load_config(args.config);
    if (args.seed) cfg.train.seed = *args.seed;
    const RunResult r = run_experiment(cfg.train, args.data);
    write_text(args.out, metrics_csv(r.log));
    if (args.checkpoint) write_checkpoint(r.params, *args.checkpoint);
    out << summary_line(r) << '\n';
    return kOk;
  });
}

// ---------------------------------------------------------------------------
// sweep
// ---------------------------------------------------------------------------

struct SweepArgs {
  std::filesystem::path config;
  std::optional<std::filesystem::path> data;
  std::string axis;
  std::vector<std::string> values;
  std::size_t seeds = 3;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> jobs;
  std::filesystem::path out;
};

inline constexpr const char* kSweepHeader = "axis_value,seed,final_test_acc_multi,best_test_acc_multi";

/// Config for one sweep point. Throws ConfigError when the axis does not
/// apply to the configured mode or the value is invalid.
inline TrainConfig sweep_point(const TrainConfig& base, const std::string& axis, const std::string& value) {
  TrainConfig cfg = base;
  const MixupMode mode = base.mixup.mode;
  if (axis == "lambda") {
    if (mode != MixupMode::kMM) throw ConfigError("axis", "lambda sweep requires mode=mm");
    cfg.mixup.fixed_lambda = detail::parse_real_key("values", value);
  } else if (axis == "alpha") {
    if (mode != MixupMode::kBMM) throw ConfigError("axis", "alpha sweep requires mode=bmm");
    cfg.mixup.alpha = detail::parse_real_key("values", value);
  } else if (axis == "warmup") {
    if (mode == MixupMode::kNone) throw ConfigError("axis", "warmup sweep requires mode=mm or mode=bmm");
    cfg.mixup.warmup_epochs = detail::parse_count_key("values", value);
  } else if (axis == "mode") {
    cfg.mixup.mode = parse_mode(value, "values");
  } else {
    throw ConfigError("axis", "expected lambda|alpha|warmup|mode, got '" + axis + "'");
  }
  try {
    cfg.validate();
  } catch (const ConfigError& e) {
    throw ConfigError("values", "value '" + value + "' rejected (" + e.what() + ")");
  }
  return cfg;
}

struct SweepRow {
  std::string value;
  std::uint64_t seed = 0;
  double final_acc = 0.0;
  double best_acc = 0.0;
};

/// Runs every (value, seed) pair on up to `jobs` threads. Rows come back in
/// value-major, seed-minor order regardless of completion order.
inline std::vector<SweepRow> run_sweep(const TrainConfig& base, const std::string& axis,
                                       const std::vector<std::string>& values, std::size_t seeds,
                                       const Dataset& train, const Dataset& test, std::size_t jobs) {
  if (values.empty()) throw ConfigError("values", "empty value list");
  if (seeds < 1) throw ConfigError("seeds", "must be >= 1");
  std::vector<TrainConfig> points;
  for (const auto& v : values) points.push_back(sweep_point(base, axis, v));

  const std::size_t total = values.size() * seeds;
  std::vector<SweepRow> rows(total);
  std::vector<std::exception_ptr> failures(total);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k = next++; k < total; k = next++) {
      const std::size_t vi = k / seeds, si = k % seeds;
      TrainConfig cfg = points[vi];
      cfg.seed = base.seed + si;
      try {
        const RunResult r = run_experiment(cfg, train, test);
        rows[k] = {values[vi], cfg.seed, r.final_test_acc_multi, r.best_test_acc_multi};
      } catch (...) {
        failures[k] = std::current_exception();
      }
    }
  };
  {
    std::vector<std::jthread> pool;
    for (std::size_t t = 1; t < std::min(jobs, total); ++t) pool.emplace_back(worker);
    worker();
  }
  for (auto& f : failures) {
    if (f) std::rethrow_exception(f);
  }
  return rows;
}

inline std::string sweep_csv(const std::vector<SweepRow>& rows, std::size_t seeds) {
  std::string csv = std::string(kSweepHeader) + "\n";
  for (std::size_t start = 0; start < rows.size(); start += seeds) {
    double sf = 0.0, sb = 0.0;
    for (std::size_t k = start; k < start + seeds; ++k) {
      const auto& r = rows[k];
      csv += r.value + "," + std::to_string(r.seed) + "," + format_real(r.final_acc) + "," +
             format_real(r.best_acc) + "\n";
      sf += r.final_acc;
      sb += r.best_acc;
    }
    const double n = static_cast<double>(seeds);
    csv += rows[start].value + ",mean," + format_real(sf / n) + "," + format_real(sb / n) + "\n";
  }
  return csv;
}

inline int sweep(const SweepArgs& args, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    ExperimentConfig cfg = load_config(args.config);
    if (args.seed) cfg.train.seed = *args.seed;
    if (args.values.empty()) throw ConfigError("values", "empty value list");
    // Validate every point before any training starts.
    for (const auto& v : args.values) sweep_point(cfg.train, args.axis, v);
    const std::size_t jobs = resolve_jobs(args.jobs);

    SplitDataset data;
    if (args.data) {
      data.train = read_dataset(train_file(*args.data));
      data.test = read_dataset(test_file(*args.data));
    } else {
      data = generate_synthetic(cfg.data);
    }
    const auto rows = run_sweep(cfg.train, args.axis, args.values, args.seeds, data.train, data.test, jobs);
    const std::string csv = sweep_csv(rows, args.seeds);
    write_text(args.out, csv);
    out << csv;
    return kOk;
  });
}

// ---------------------------------------------------------------------------
// plot
// ---------------------------------------------------------------------------

struct PlotArgs {
  std::vector<std::filesystem::path> inputs;
  std::filesystem::path out;
  std::vector<std::string> columns = {"train_acc_multi", "test_acc_multi"};
};

inline std::vector<Series> collect_series(const PlotArgs& args) {
  if (args.inputs.empty()) throw ConfigError("inputs", "no CSV files given");
  if (args.columns.empty()) throw ConfigError("columns", "no columns selected");
  for (const auto& c : args.columns) {
    if (std::find(kMetricColumns.begin(), kMetricColumns.end(), c) == kMetricColumns.end() && c != "train_loss") {
      throw ConfigError("columns", "unknown metrics column '" + c + "'");
    }
  }
  std::vector<Series> series;
  for (const auto& path : args.inputs) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    const auto rows = parse_metrics_csv(in, path.string());
    for (const auto& c : args.columns) {
      Series s;
      s.label = args.inputs.size() > 1 ? path.filename().string() + ":" + c : c;
      for (const auto& r : rows) s.points.emplace_back(static_cast<double>(r.epoch), metric_value(r, c));
      series.push_back(std::move(s));
    }
  }
  return series;
}

inline int plot(const PlotArgs& args, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const auto series = collect_series(args);
    write_text(args.out, render_svg(series, "training curves"));
    out << "wrote " << args.out.string() << " (" << series.size() << " series)\n";
    return kOk;
  });
}

}  // namespace bmm::cli
