#include "siddm/grad_check.hpp"

#include <algorithm>
#include <cmath>

#include "siddm/error.hpp"

namespace siddm {

namespace {

double evaluate(const LossBuilder& f) {
  Graph g;
  return f(g).value().item();
}

}  // namespace

GradCheckReport grad_check(const LossBuilder& f, std::span<Tensor* const> points,
                           double h, double tol) {
  require(h > 0.0, "grad_check: step must be positive");

  std::vector<std::vector<double>> analytic;
  {
    Graph g;
    Var loss = f(g);
    g.backward(loss);
    for (Tensor* p : points) analytic.push_back(p->grad());
  }

  GradCheckReport report;
  for (std::size_t k = 0; k < points.size(); ++k) {
    Tensor& p = *points[k];
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double saved = p[i];
      auto central = [&](double step) {
        p[i] = saved + step;
        const double up = evaluate(f);
        p[i] = saved - step;
        const double down = evaluate(f);
        p[i] = saved;
        return (up - down) / (2.0 * step);
      };
      // Richardson step cancels the h^2 term, which otherwise exceeds tight
      // tolerances on small gradients of curved losses.
      const double numeric = (4.0 * central(0.5 * h) - central(h)) / 3.0;
      const double exact = analytic[k].empty() ? 0.0 : analytic[k][i];
      if (!std::isfinite(numeric) || !std::isfinite(exact)) {
        fail(ErrorKind::NonFinite, "grad_check: non-finite gradient at element " +
                                       std::to_string(i));
      }
      const double abs_err = std::abs(exact - numeric);
      const double magnitude = std::max(std::abs(exact), std::abs(numeric));
      const double err = magnitude < 1e-8 ? abs_err : abs_err / magnitude;
      report.max_abs_err = std::max(report.max_abs_err, abs_err);
      report.max_rel_err = std::max(report.max_rel_err, err);
      ++report.checked;
    }
  }
  report.pass = report.max_rel_err <= tol;
  return report;
}

}  // namespace siddm
