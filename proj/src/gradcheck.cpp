#include "awm/gradcheck.hpp"

#include <cmath>

#include "awm/rng.hpp"

namespace awm {

GradcheckReport gradcheck(const ForwardFn& f, const VjpFn& vjp, std::span<const double> point,
                          double h, double tol, const BoundaryFn& boundary) {
  GradcheckReport report;
  const int n = static_cast<int>(point.size());
  std::vector<double> x(point.begin(), point.end());

  const std::vector<double> y0 = f(x);
  const int m = static_cast<int>(y0.size());
  for (double v : y0) {
    if (!std::isfinite(v)) {
      report.pass = false;
      report.note = "non-finite forward evaluation at base point";
      return report;
    }
  }

  // analytic Jacobian rows via unit upstream seeds
  std::vector<std::vector<double>> analytic(static_cast<std::size_t>(m));
  std::vector<double> seed(static_cast<std::size_t>(m), 0.0);
  for (int j = 0; j < m; ++j) {
    seed[static_cast<std::size_t>(j)] = 1.0;
    analytic[static_cast<std::size_t>(j)] = vjp(x, seed);
    seed[static_cast<std::size_t>(j)] = 0.0;
  }

  for (int i = 0; i < n; ++i) {
    const double saved = x[static_cast<std::size_t>(i)];
    x[static_cast<std::size_t>(i)] = saved + h;
    const std::vector<double> yp = f(x);
    x[static_cast<std::size_t>(i)] = saved - h;
    const std::vector<double> ym = f(x);
    x[static_cast<std::size_t>(i)] = saved;
    const bool on_boundary = boundary && boundary(i);

    for (int j = 0; j < m; ++j) {
      GradcheckEntry e;
      e.input = i;
      e.output = j;
      e.analytic = analytic[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)];
      e.finite = std::isfinite(yp[static_cast<std::size_t>(j)]) &&
                 std::isfinite(ym[static_cast<std::size_t>(j)]);
      if (!e.finite) {
        report.pass = false;
        report.failures.push_back(e);
        continue;
      }
      e.numeric =
          (yp[static_cast<std::size_t>(j)] - ym[static_cast<std::size_t>(j)]) / (2.0 * h);
      e.rel_err = std::abs(e.analytic - e.numeric) / std::max(1.0, std::abs(e.numeric));
      e.boundary = on_boundary;
      if (e.boundary) {
        ++report.excluded;
        continue;
      }
      ++report.checked;
      report.max_rel_err = std::max(report.max_rel_err, e.rel_err);
      if (e.rel_err > tol) {
        report.pass = false;
        report.failures.push_back(e);
      }
    }
  }
  return report;
}

GradcheckReport gradcheck_directional(const ScalarFn& f, const GradFn& grad,
                                      std::span<const double> point, double h, double tol,
                                      int directions, std::uint64_t seed) {
  GradcheckReport report;
  const int n = static_cast<int>(point.size());
  const std::vector<double> g = grad(point);
  Rng rng(seed);

  std::vector<double> u(static_cast<std::size_t>(n));
  std::vector<double> xp(point.begin(), point.end());
  std::vector<double> xm(point.begin(), point.end());
  for (int d = 0; d < directions; ++d) {
    double norm = 0.0;
    for (int i = 0; i < n; ++i) {
      u[static_cast<std::size_t>(i)] = rng.normal();
      norm += u[static_cast<std::size_t>(i)] * u[static_cast<std::size_t>(i)];
    }
    norm = std::sqrt(norm);
    double analytic = 0.0;
    for (int i = 0; i < n; ++i) {
      u[static_cast<std::size_t>(i)] /= norm;
      xp[static_cast<std::size_t>(i)] = point[static_cast<std::size_t>(i)] + h * u[static_cast<std::size_t>(i)];
      xm[static_cast<std::size_t>(i)] = point[static_cast<std::size_t>(i)] - h * u[static_cast<std::size_t>(i)];
      analytic += g[static_cast<std::size_t>(i)] * u[static_cast<std::size_t>(i)];
    }
    const double fp = f(xp);
    const double fm = f(xm);
    GradcheckEntry e;
    e.input = d;
    e.finite = std::isfinite(fp) && std::isfinite(fm);
    if (!e.finite) {
      report.pass = false;
      report.failures.push_back(e);
      continue;
    }
    e.analytic = analytic;
    e.numeric = (fp - fm) / (2.0 * h);
    e.rel_err = std::abs(e.analytic - e.numeric) / std::max(1.0, std::abs(e.numeric));
    ++report.checked;
    report.max_rel_err = std::max(report.max_rel_err, e.rel_err);
    if (e.rel_err > tol) {
      report.pass = false;
      report.failures.push_back(e);
    }
  }
  return report;
}

}  // namespace awm
