#pragma once

#include <functional>
#include <vector>

#include "groupface/graph.hpp"
#include "groupface/tensor.hpp"

namespace groupface {

/// Builds a scalar loss on the given graph from the current parameter values.
using ScalarFunction = std::function<Tensor(Graph&)>;

struct GradientCheckReport {
  double max_relative_error = 0.0;
  std::size_t worst_param = 0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

/// Default denominator floor for relative errors: |a - n| / max(|a|, |n|, floor).
inline constexpr double kGradientCheckFloor = 1e-6;

/// Rounding noise of a central difference of a function of size |value|:
/// eps * max(1, |value|) / h. Gradients below noise / tol cannot be resolved
/// to relative tolerance tol, so that is the honest floor for such a check.
double finite_difference_noise(double value, double h);

/// Compares reverse-mode gradients of f with central differences
/// (f(p + h) - f(p - h)) / 2h over every component of every parameter.
/// Parameter values are restored afterwards; their gradient buffers hold the
/// analytic gradient on return.
GradientCheckReport gradient_check_report(const ScalarFunction& f, std::vector<Tensor> params, double h = 1e-5,
                                          double floor = kGradientCheckFloor);

double gradient_check(const ScalarFunction& f, std::vector<Tensor> params, double h = 1e-5);

}  // namespace groupface
