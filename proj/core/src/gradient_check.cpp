#include "groupface/gradient_check.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace groupface {

namespace {

double evaluate(const ScalarFunction& f) {
  Graph g;
  const double value = f(g).item();
  if (!std::isfinite(value)) throw std::domain_error("gradient_check: function value is not finite");
  return value;
}

}  // namespace

double finite_difference_noise(double value, double h) {
  return std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(value)) / h;
}

GradientCheckReport gradient_check_report(const ScalarFunction& f, std::vector<Tensor> params, double h,
                                          double floor) {
  if (!(h > 0.0)) throw std::invalid_argument("gradient_check: step must be positive");
  if (!(floor > 0.0)) throw std::invalid_argument("gradient_check: floor must be positive");

  for (auto& p : params) p.zero_grad();
  {
    Graph g;
    Tensor loss = f(g);
    if (!std::isfinite(loss.item())) throw std::domain_error("gradient_check: function value is not finite");
    g.backward(loss);
  }

  GradientCheckReport report;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    auto values = params[pi].data();
    auto analytic = std::as_const(params[pi]).grad();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      values[i] = saved + h;
      const double plus = evaluate(f);
      values[i] = saved - h;
      const double minus = evaluate(f);
      values[i] = saved;

      const double numeric = (plus - minus) / (2.0 * h);
      const double scale = std::max({std::abs(analytic[i]), std::abs(numeric), floor});
      const double err = std::abs(analytic[i] - numeric) / scale;
      if (err > report.max_relative_error) {
        report = {err, pi, i, analytic[i], numeric};
      }
    }
  }
  return report;
}

double gradient_check(const ScalarFunction& f, std::vector<Tensor> params, double h) {
  return gradient_check_report(f, std::move(params), h).max_relative_error;
}

}  // namespace groupface
