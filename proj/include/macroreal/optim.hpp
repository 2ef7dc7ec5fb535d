#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace macroreal::optim {

using Objective = std::function<double(std::span<const double>)>;

struct SimplexOptions {
  std::size_t max_evaluations = 20000;
  double f_tolerance = 1e-12;  // spread of simplex values
  double x_tolerance = 1e-10;  // simplex diameter
  double initial_step = 0.1;
};

struct SimplexResult {
  std::vector<double> x;
  double value = 0.0;
  std::size_t evaluations = 0;
  bool converged = false;
};

// Minimizes f with the adaptive Nelder-Mead simplex (Gao & Han coefficients).
// Non-finite objective values are treated as +inf.
SimplexResult nelder_mead(const Objective& f, std::span<const double> start,
                          const SimplexOptions& options = {});

// Bisection for a sign change of f on [lo, hi], to an absolute width of tol.
double bisect(const std::function<double(double)>& f, double lo, double hi,
              double tol);

}  // namespace macroreal::optim
