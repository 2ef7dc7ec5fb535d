#include "macroreal/optim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <boost/math/tools/roots.hpp>

#include "macroreal/error.hpp"

namespace macroreal::optim {

namespace {

double safe_eval(const Objective& f, std::span<const double> x) {
  const double v = f(x);
  return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
}

}  // namespace

SimplexResult nelder_mead(const Objective& f, std::span<const double> start,
                          const SimplexOptions& options) {
  const std::size_t n = start.size();
  require(n > 0, "nelder_mead: empty start vector");
  const double dim = static_cast<double>(n);
  const double reflect = 1.0;
  const double expand = 1.0 + 2.0 / dim;
  const double contract = 0.75 - 0.5 / dim;
  const double shrink = 1.0 - 1.0 / dim;

  std::vector<std::vector<double>> simplex(n + 1, std::vector<double>(start.begin(), start.end()));
  for (std::size_t i = 0; i < n; ++i) {
    const double step = start[i] != 0.0 ? options.initial_step * std::abs(start[i])
                                         : options.initial_step;
    simplex[i + 1][i] += step;
  }
  std::vector<double> values(n + 1);
  SimplexResult result;
  for (std::size_t i = 0; i <= n; ++i) values[i] = safe_eval(f, simplex[i]);
  result.evaluations = n + 1;

  std::vector<std::size_t> order(n + 1);
  std::vector<double> centroid(n), trial(n), trial2(n);

  auto point_along = [&](double coeff, std::vector<double>& out) {
    const auto& worst = simplex[order[n]];
    for (std::size_t j = 0; j < n; ++j) out[j] = centroid[j] + coeff * (centroid[j] - worst[j]);
  };

  while (result.evaluations < options.max_evaluations) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });

    const double best = values[order[0]];
    const double worst = values[order[n]];
    double diameter = 0.0;
    for (std::size_t i = 1; i <= n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        diameter = std::max(diameter, std::abs(simplex[order[i]][j] - simplex[order[0]][j]));
      }
    }
    if (std::isfinite(worst) && worst - best <= options.f_tolerance &&
        diameter <= options.x_tolerance) {
      result.converged = true;
      break;
    }
    if (diameter <= options.x_tolerance * 1e-3) {
      result.converged = std::isfinite(best);
      break;
    }

    std::fill(centroid.begin(), centroid.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) centroid[j] += simplex[order[i]][j] / dim;
    }

    point_along(reflect, trial);
    const double f_reflect = safe_eval(f, trial);
    ++result.evaluations;
    const double second_worst = values[order[n - 1]];

    if (f_reflect < best) {
      point_along(expand, trial2);
      const double f_expand = safe_eval(f, trial2);
      ++result.evaluations;
      if (f_expand < f_reflect) {
        simplex[order[n]] = trial2;
        values[order[n]] = f_expand;
      } else {
        simplex[order[n]] = trial;
        values[order[n]] = f_reflect;
      }
      continue;
    }
    if (f_reflect < second_worst) {
      simplex[order[n]] = trial;
      values[order[n]] = f_reflect;
      continue;
    }

    const bool outside = f_reflect < worst;
    point_along(outside ? contract : -contract, trial2);
    const double f_contract = safe_eval(f, trial2);
    ++result.evaluations;
    if (f_contract < (outside ? f_reflect : worst)) {
      simplex[order[n]] = trial2;
      values[order[n]] = f_contract;
      continue;
    }

    const auto& anchor = simplex[order[0]];
    for (std::size_t i = 1; i <= n; ++i) {
      auto& vertex = simplex[order[i]];
      for (std::size_t j = 0; j < n; ++j) vertex[j] = anchor[j] + shrink * (vertex[j] - anchor[j]);
      values[order[i]] = safe_eval(f, vertex);
    }
    result.evaluations += n;
  }

  const auto best_it = std::min_element(values.begin(), values.end());
  result.x = simplex[static_cast<std::size_t>(best_it - values.begin())];
  result.value = *best_it;
  return result;
}

double bisect(const std::function<double(double)>& f, double lo, double hi, double tol) {
  require(lo < hi, "bisect: empty bracket");
  const double f_lo = f(lo);
  const double f_hi = f(hi);
  require(f_lo * f_hi <= 0.0, "bisect: no sign change in bracket");
  if (f_lo == 0.0) return lo;
  if (f_hi == 0.0) return hi;
  auto done = [tol](double a, double b) { return std::abs(b - a) <= tol; };
  const auto [a, b] = boost::math::tools::bisect(f, lo, hi, done);
  return 0.5 * (a + b);
}

}  // namespace macroreal::optim
