// Copyright 2026 The bmm-lab Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <array>
#include <cstdio>
#include <string>
#include <vector>

#include "bmm/csv.hpp"
#include "bmm/error.hpp"
#include "bmm/train.hpp"

namespace bmm {

/// One polyline: (epoch, value) points plus a legend label.
struct Series {
  std::string label;
  std::vector<std::pair<double, double>> points;
};

inline constexpr std::array<const char*, 8> kMetricColumns = {
    "train_acc_multi", "train_acc_a", "train_acc_v", "test_acc_multi",
    "test_acc_a",      "test_acc_v",  "rho_v",       "lambda_applied"};

inline double metric_value(const EpochMetrics& m, const std::string& column) {
  if (column == "train_acc_multi") return m.train_acc_multi;
  if (column == "train_acc_a") return m.train_acc_a;
  if (column == "train_acc_v") return m.train_acc_v;
  if (column == "test_acc_multi") return m.test_acc_multi;
  if (column == "test_acc_a") return m.test_acc_a;
  if (column == "test_acc_v") return m.test_acc_v;
  if (column == "rho_v") return m.rho_v;
  if (column == "lambda_applied") return m.lambda_applied;
  if (column == "train_loss") return m.train_loss;
  throw ConfigError("columns", "unknown metrics column '" + column + "'");
}

inline std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out += c;
    }
  }
  return out;
}

/// Static SVG line chart, epoch on x. The y range is [0, 1] unless a value
/// falls outside it, in which case it widens to cover the data.
inline std::string render_svg(const std::vector<Series>& series, const std::string& title) {
  constexpr double kW = 720, kH = 420, kLeft = 60, kRight = 200, kTop = 40, kBottom = 50;
  constexpr std::array<const char*, 8> kColors = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                                  "#9467bd", "#8c564b", "#e377c2", "#17becf"};
  double x_max = 1.0, y_min = 0.0, y_max = 1.0;
  for (const auto& s : series) {
    for (const auto& [x, y] : s.points) {
      x_max = std::max(x_max, x);
      y_min = std::min(y_min, y);
      y_max = std::max(y_max, y);
    }
  }
  const double pw = kW - kLeft - kRight, ph = kH - kTop - kBottom;
  auto sx = [&](double x) { return kLeft + pw * x / x_max; };
  auto sy = [&](double y) { return kTop + ph * (1.0 - (y - y_min) / (y_max - y_min)); };
  auto num = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return std::string(buf);
  };

  std::string svg;
  svg += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(kW) + "\" height=\"" + num(kH) +
         "\" viewBox=\"0 0 " + num(kW) + " " + num(kH) + "\">\n";
  svg += "<rect x=\"0\" y=\"0\" width=\"" + num(kW) + "\" height=\"" + num(kH) + "\" fill=\"white\"/>\n";
  svg += "<text x=\"" + num(kLeft) + "\" y=\"24\" font-family=\"sans-serif\" font-size=\"14\">" +
         xml_escape(title) + "</text>\n";
  svg += "<g stroke=\"#ccc\" stroke-width=\"1\">\n";
  for (int k = 0; k <= 4; ++k) {
    const double y = y_min + (y_max - y_min) * k / 4.0;
    svg += "<line x1=\"" + num(kLeft) + "\" y1=\"" + num(sy(y)) + "\" x2=\"" + num(kLeft + pw) + "\" y2=\"" +
           num(sy(y)) + "\"/>\n";
  }
  svg += "</g>\n";
  svg += "<g font-family=\"sans-serif\" font-size=\"11\">\n";
  for (int k = 0; k <= 4; ++k) {
    const double y = y_min + (y_max - y_min) * k / 4.0;
    svg += "<text x=\"" + num(kLeft - 8) + "\" y=\"" + num(sy(y) + 4) + "\" text-anchor=\"end\">" + num(y) +
           "</text>\n";
    const double x = x_max * k / 4.0;
    svg += "<text x=\"" + num(sx(x)) + "\" y=\"" + num(kTop + ph + 18) + "\" text-anchor=\"middle\">" +
           num(x) + "</text>\n";
  }
  svg += "<text x=\"" + num(kLeft + pw / 2) + "\" y=\"" + num(kH - 12) +
         "\" text-anchor=\"middle\">epoch</text>\n";
  svg += "</g>\n";
  svg += "<rect x=\"" + num(kLeft) + "\" y=\"" + num(kTop) + "\" width=\"" + num(pw) + "\" height=\"" + num(ph) +
         "\" fill=\"none\" stroke=\"black\"/>\n";

  for (std::size_t i = 0; i < series.size(); ++i) {
    const auto& s = series[i];
    const char* color = kColors[i % kColors.size()];
    svg += "<polyline fill=\"none\" stroke=\"" + std::string(color) + "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t p = 0; p < s.points.size(); ++p) {
      if (p) svg += ' ';
      svg += num(sx(s.points[p].first)) + "," + num(sy(s.points[p].second));
    }
    svg += "\"/>\n";
    const double ly = kTop + 14.0 * static_cast<double>(i);
    svg += "<line x1=\"" + num(kLeft + pw + 10) + "\" y1=\"" + num(ly) + "\" x2=\"" + num(kLeft + pw + 30) +
           "\" y2=\"" + num(ly) + "\" stroke=\"" + color + "\" stroke-width=\"2\"/>\n";
    svg += "<text x=\"" + num(kLeft + pw + 34) + "\" y=\"" + num(ly + 4) +
           "\" font-family=\"sans-serif\" font-size=\"10\">" + xml_escape(s.label) + "</text>\n";
  }
  svg += "</svg>\n";
  return svg;
}

}  // namespace bmm
