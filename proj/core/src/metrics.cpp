#include "edp/metrics.hpp"

#include <algorithm>

#include "edp/errors.hpp"

namespace edp {

double oms_metric(std::span<const double> history) {
  if (history.empty()) throw ParameterError("oms_metric: empty history");
  return *std::max_element(history.begin(), history.end());
}

double rat_metric(std::span<const double> history, int window) {
  if (history.empty()) throw ParameterError("rat_metric: empty history");
  if (window < 1) throw ParameterError("rat_metric: window must be >= 1");
  const std::size_t n = std::min(history.size(), static_cast<std::size_t>(window));
  double sum = 0.0;
  for (std::size_t i = history.size() - n; i < history.size(); ++i) {
    sum += history[i];
  }
  return sum / static_cast<double>(n);
}

}  // namespace edp
