#ifndef EDP_METRICS_HPP_
#define EDP_METRICS_HPP_

#include <span>

namespace edp {

// Best score over the whole history.
double oms_metric(std::span<const double> history);

// Mean of the last min(window, size) scores.
double rat_metric(std::span<const double> history, int window = 10);

}  // namespace edp

#endif  // EDP_METRICS_HPP_
