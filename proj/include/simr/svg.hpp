#pragma once

// Minimal SVG charts built from path and text elements.

#include <string>
#include <vector>

#include "simr/diagnostics.hpp"

namespace simr::svg {

struct Series {
  std::string label;
  std::vector<double> x, y;
};

/// Log-log line chart; non-positive points are dropped.
std::string loglog_plot(const std::string& title, const std::string& xlabel, const std::string& ylabel,
                        const std::vector<Series>& series);

struct Box {
  std::string label;
  AggregateStats stats;
  std::vector<double> values;
};

/// Box-and-whisker chart (whiskers at the most extreme values inside 1.5 IQR).
std::string box_plot(const std::string& title, const std::string& ylabel, const std::vector<Box>& boxes);

}  // namespace simr::svg
