#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

namespace awm {

// Numeric verification of hand-written VJPs against central finite
// differences. Relative error per coordinate is
// |analytic - numeric| / max(1, |numeric|).
struct GradcheckEntry {
  int input = 0;
  int output = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_err = 0.0;
  bool boundary = false;  // branch-boundary coordinate, excluded from pass/fail
  bool finite = true;
};

struct GradcheckReport {
  bool pass = true;
  double max_rel_err = 0.0;  // over checked (non-boundary) coordinates
  int checked = 0;
  int excluded = 0;
  std::vector<GradcheckEntry> failures;
  std::string note;
};

using ForwardFn = std::function<std::vector<double>(std::span<const double>)>;
// (point, upstream) -> adjoint of the inputs
using VjpFn =
    std::function<std::vector<double>(std::span<const double>, std::span<const double>)>;
// marks input coordinates sitting on a branch boundary at this point
using BoundaryFn = std::function<bool(int)>;

GradcheckReport gradcheck(const ForwardFn& f, const VjpFn& vjp, std::span<const double> point,
                          double h, double tol, const BoundaryFn& boundary = nullptr);

// Directional variant for high-dimensional inputs: compares grad^T u with
// the central difference of a scalar program along random unit directions.
using ScalarFn = std::function<double(std::span<const double>)>;
using GradFn = std::function<std::vector<double>(std::span<const double>)>;

GradcheckReport gradcheck_directional(const ScalarFn& f, const GradFn& grad,
                                      std::span<const double> point, double h, double tol,
                                      int directions, std::uint64_t seed);

}  // namespace awm
