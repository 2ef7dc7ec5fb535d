#include "macroreal/multiphoton.hpp"

#include <cmath>
#include <limits>
#include <optional>
#include <random>
#include <vector>

#include "macroreal/error.hpp"
#include "macroreal/optim.hpp"
#include "macroreal/parallel.hpp"
#include "macroreal/seeding.hpp"

namespace macroreal::multiphoton {

namespace {

using Path = std::array<int, 3>;  // outcomes at t1, t2, t3

// Trajectory of each photon given the t1 blocker; nullopt when the photon
// sits in the blocked arm.
std::optional<Path> photon_path(int photon, Block t1) {
  if (photon == 1) {
    if (t1 == Block::None) return Path{1, 1, 1};
    if (t1 == Block::Minus) return Path{1, 1, -1};
    return std::nullopt;
  }
  if (t1 == Block::None) return Path{-1, -1, -1};
  if (t1 == Block::Plus) return Path{-1, -1, 1};
  return std::nullopt;
}

bool blocked_at(Block b, int outcome) {
  return (b == Block::Plus && outcome == 1) || (b == Block::Minus && outcome == -1);
}

}  // namespace

ProbabilitySet two_photon_joint_probs() {
  RunCounts counts;
  for (std::size_t slot = 0; slot < kSubRuns.size(); ++slot) {
    const BlockerConfig& b = kSubRuns[slot].blockers;
    ChannelCounts c;
    for (int photon : {1, 2}) {
      const auto path = photon_path(photon, b.t1);
      if (!path || blocked_at(b.t2, (*path)[1])) continue;
      ((*path)[2] == 1 ? c.plus : c.minus) += 1.0;
    }
    counts.sub_runs[slot] = c;
  }
  return assemble_probabilities(counts);
}

ModifiedBounds modified_bounds(double gamma) {
  require(std::isfinite(gamma) && gamma >= 0.0 && gamma < 1.0, "gamma must lie in [0,1)");
  // gamma * algebraic maximum + (1 - gamma) * macrorealist bound
  return {gamma * 3.0 + (1.0 - gamma) * 1.0, gamma * 0.5 + (1.0 - gamma) * 0.0};
}

void GammaFitParams::validate() const {
  auto unit = [](double x) { return std::isfinite(x) && x >= 0.0 && x <= 1.0; };
  require(unit(alpha_sq), "alpha_sq must lie in [0,1]");
  for (double t : t_ratios) require(unit(t), "transmissions must lie in [0,1]");
  require(std::isfinite(eta1) && eta1 > 0.0 && eta1 <= 1.0, "eta1 must lie in (0,1]");
  require(std::isfinite(eta2) && eta2 > 0.0 && eta2 <= 1.0, "eta2 must lie in (0,1]");
  require(std::isfinite(n_events) && n_events > 0.0, "N must be positive");
  require(std::isfinite(gamma) && gamma >= 0.0 && gamma < 1.0, "gamma must lie in [0,1)");
}

std::array<double, 12> CountVector12::flat() const {
  std::array<double, 12> out{};
  for (std::size_t s = 0; s < 4; ++s) {
    out[3 * s] = sets[s].c1;
    out[3 * s + 1] = sets[s].c2;
    out[3 * s + 2] = sets[s].c12;
  }
  return out;
}

namespace {

// One blocker set. `split` is the input share of the open arm, `port_in` the
// first-splitter ratio into it, d1/d2 the output ratios towards each detector.
SetCounts set_counts(double n1, double n2, double split, double other_split, double port_in,
                     double port_other, double d1_ratio, double d2_ratio, double eta1,
                     double eta2) {
  const double split_sq = split * split;
  const double cross = split_sq * 2 * port_in * port_other + 2 * split * other_split * port_in;
  const double pair_weight = split_sq * port_in * port_in;
  SetCounts c;
  c.c1 = n1 * split * port_in * d1_ratio * eta1 +
         n2 * pair_weight * (d1_ratio * d1_ratio * eta1 * (2 - eta1) + 2 * d2_ratio * d1_ratio * eta1) +
         n2 * cross * d1_ratio * eta1;
  c.c2 = n1 * split * port_in * d2_ratio * eta2 +
         n2 * pair_weight * (d2_ratio * d2_ratio * eta2 * (2 - eta2) + 2 * d2_ratio * d1_ratio * eta2) +
         n2 * cross * d2_ratio * eta2;
  c.c12 = 2 * n2 * pair_weight * d2_ratio * d1_ratio * eta1 * eta2;
  return c;
}

}  // namespace

CountVector12 predicted_counts(const GammaFitParams& p) {
  p.validate();
  const double n1 = (1 - p.gamma) * p.n_events;
  const double n2 = p.gamma * p.n_events;
  const double a2 = p.alpha_sq, b2 = 1 - p.alpha_sq;
  const auto& t = p.t_ratios;
  const double r1 = 1 - t[0], r2 = 1 - t[1], r3 = 1 - t[2], r4 = 1 - t[3];

  CountVector12 out;
  out.sets[0] = set_counts(n1, n2, a2, b2, t[0], r1, r2, t[1], p.eta1, p.eta2);
  out.sets[1] = set_counts(n1, n2, a2, b2, r1, t[0], t[2], r3, p.eta1, p.eta2);
  out.sets[2] = set_counts(n1, n2, b2, a2, r4, t[3], r2, t[1], p.eta1, p.eta2);
  out.sets[3] = set_counts(n1, n2, b2, a2, t[3], r4, t[2], r3, p.eta1, p.eta2);
  return out;
}

double chi_squared(const CountVector12& observed, const CountVector12& predicted) {
  const auto obs = observed.flat();
  const auto pred = predicted.flat();
  double chi2 = 0.0;
  for (std::size_t i = 0; i < obs.size(); ++i) {
    if (!(pred[i] > 0.0)) fail(ErrorKind::Undefined, "chi-squared: predicted cell is not positive");
    const double diff = obs[i] - pred[i];
    chi2 += diff * diff / pred[i];
  }
  return chi2;
}

namespace {

constexpr std::size_t kParams = 9;

// Unconstrained coordinates u map into the box through sin^2; N is placed
// on a log scale.
GammaFitParams decode(std::span<const double> u, const FitBox& box) {
  std::array<double, kParams> x{};
  for (std::size_t i = 0; i < kParams; ++i) {
    const double s = std::sin(u[i]);
    const double frac = s * s;
    if (i == 8) {
      const double lo = std::log(box.lo[i]), hi = std::log(box.hi[i]);
      x[i] = std::exp(lo + (hi - lo) * frac);
    } else {
      x[i] = box.lo[i] + (box.hi[i] - box.lo[i]) * frac;
    }
  }
  GammaFitParams p;
  p.alpha_sq = x[0];
  p.t_ratios = {x[1], x[2], x[3], x[4]};
  p.eta1 = x[5];
  p.eta2 = x[6];
  p.gamma = x[7];
  p.n_events = x[8];
  return p;
}

// Chi-squared for the fit: a cell with zero prediction and zero observation
// contributes nothing, any other non-positive prediction is infeasible.
double fit_objective(const std::array<double, 12>& obs, const GammaFitParams& p) {
  const auto pred = predicted_counts(p).flat();
  double chi2 = 0.0;
  for (std::size_t i = 0; i < obs.size(); ++i) {
    if (!(pred[i] > 0.0)) {
      if (obs[i] == 0.0) continue;
      return std::numeric_limits<double>::infinity();
    }
    const double diff = obs[i] - pred[i];
    chi2 += diff * diff / pred[i];
  }
  return chi2;
}

}  // namespace

FitResult fit_gamma(const CountVector12& observed, const FitOptions& options) {
  const auto obs = observed.flat();
  for (double v : obs) require(std::isfinite(v) && v >= 0.0, "observed counts must be nonnegative");
  for (std::size_t i = 0; i < kParams; ++i) {
    require(options.box.lo[i] <= options.box.hi[i], "fit box bounds are inverted");
  }
  require(options.box.lo[8] > 0.0, "fit box: N lower bound must be positive");
  require(options.restarts >= 1, "fit needs at least one restart");

  auto objective = [&](std::span<const double> u) {
    return fit_objective(obs, decode(u, options.box));
  };

  optim::SimplexOptions simplex;
  simplex.max_evaluations = 20000;
  simplex.initial_step = 0.2;
  simplex.f_tolerance = 1e-10;
  simplex.x_tolerance = 1e-9;

  std::vector<optim::SimplexResult> runs(options.restarts);
  parallel_for(options.restarts, resolve_threads(options.threads), [&](std::size_t k) {
    std::mt19937_64 rng(derive_seed(options.seed, {k}));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<double> u(kParams);
    for (double& x : u) x = std::asin(std::sqrt(unit(rng)));
    auto r = optim::nelder_mead(objective, u, simplex);
    // Restarting the simplex around its own optimum escapes collapsed simplices.
    for (int polish = 0; polish < 3; ++polish) {
      auto again = optim::nelder_mead(objective, r.x, simplex);
      const bool stalled = again.value >= r.value - 1e-9 * (1.0 + std::abs(r.value));
      again.evaluations += r.evaluations;
      r = again;
      if (stalled) break;
    }
    runs[k] = r;
  });

  std::size_t best = 0;
  for (std::size_t k = 1; k < runs.size(); ++k) {
    if (runs[k].value < runs[best].value) best = k;
  }
  FitResult result;
  result.params = decode(runs[best].x, options.box);
  result.chi2 = runs[best].value;
  result.converged = runs[best].converged && std::isfinite(runs[best].value);
  result.restarts = options.restarts;
  return result;
}

}  // namespace macroreal::multiphoton
