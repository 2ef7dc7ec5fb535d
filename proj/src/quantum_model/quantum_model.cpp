#include "macroreal/quantum_model.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <random>
#include <vector>

#include "macroreal/error.hpp"
#include "macroreal/optim.hpp"
#include "macroreal/parallel.hpp"

namespace macroreal::quantum {

namespace {

using cplx = std::complex<double>;
constexpr cplx kI{0.0, 1.0};

bool in_unit(double x) { return std::isfinite(x) && x >= 0.0 && x <= 1.0; }

// |A + B|^2 with the cross term scaled by the visibility.
double partially_coherent(cplx a, cplx b, double v) {
  return std::norm(a) + std::norm(b) + 2.0 * v * std::real(a * std::conj(b));
}

struct Shorthand {
  double a, b, c, d;  // interference amplitudes of the four output terms
};

Shorthand shorthand(const SetupParams& p) {
  const double t1 = p.transmission(1), t2 = p.transmission(2), t3 = p.transmission(3),
               t4 = p.transmission(4);
  const double r1 = 1 - t1, r2 = 1 - t2, r3 = 1 - t3, r4 = 1 - t4;
  return {std::sqrt(t1 * t2 * r1 * r3), std::sqrt(t1 * r1 * r2 * t3), std::sqrt(t2 * t4 * r3 * r4),
          std::sqrt(r2 * r4 * t3 * t4)};
}

}  // namespace

void SetupParams::validate() const {
  require(in_unit(alpha_sq), "setup.alpha_sq must lie in [0,1]");
  for (std::size_t i = 0; i < t_ratios.size(); ++i) {
    require(in_unit(t_ratios[i]), "setup.t[" + std::to_string(i) + "] must lie in [0,1]");
  }
  require(std::isfinite(visibility) && visibility >= -1.0 && visibility <= 1.0,
          "setup.visibility must lie in [-1,1]");
}

SetupParams nominal_setup() { return {0.5, {0.80, 0.79, 0.82, 0.82}, 1.0}; }
SetupParams ideal_setup() { return {0.5, {0.75, 0.75, 0.75, 0.75}, 1.0}; }

ArmOutputs arm_outputs(const SetupParams& params, int t1_arm, Block t2_block) {
  require(t1_arm == 1 || t1_arm == -1, "arm_outputs: t1 arm must be +1 or -1");
  // Port 1 feeds the +1 arm by transmission, port 4 feeds it by reflection.
  cplx inner_plus, inner_minus;
  if (t1_arm == 1) {
    inner_plus = std::sqrt(params.transmission(1));
    inner_minus = kI * std::sqrt(params.reflection(1));
  } else {
    inner_plus = kI * std::sqrt(params.reflection(4));
    inner_minus = std::sqrt(params.transmission(4));
  }

  ArmOutputs out;
  if (t2_block == Block::Plus) {
    out.lost = std::norm(inner_plus);
    inner_plus = 0.0;
  } else if (t2_block == Block::Minus) {
    out.lost = std::norm(inner_minus);
    inner_minus = 0.0;
  }

  const double v = params.visibility;
  out.plus = partially_coherent(inner_plus * std::sqrt(params.transmission(2)),
                                inner_minus * kI * std::sqrt(params.reflection(3)), v);
  out.minus = partially_coherent(inner_plus * kI * std::sqrt(params.reflection(2)),
                                 inner_minus * std::sqrt(params.transmission(3)), v);
  return out;
}

DetectionProbs detection_probs(const SetupParams& params, const BlockerConfig& blockers) {
  params.validate();
  DetectionProbs probs;
  for (int arm : {1, -1}) {
    const double weight = arm == 1 ? params.alpha_sq : params.beta_sq();
    const Block blocked_here = arm == 1 ? Block::Plus : Block::Minus;
    if (blockers.t1 == blocked_here) {
      probs.p_lost += weight;
      continue;
    }
    const ArmOutputs o = arm_outputs(params, arm, blockers.t2);
    probs.p_plus += weight * o.plus;
    probs.p_minus += weight * o.minus;
    probs.p_lost += weight * o.lost;
  }
  return probs;
}

namespace {

RunCounts weights_for_run(const SetupParams& params, int run) {
  RunCounts counts;
  for (std::size_t slot = 0; slot < kSubRuns.size(); ++slot) {
    if (run != 0 && kSubRuns[slot].run != run) continue;
    const DetectionProbs p = detection_probs(params, kSubRuns[slot].blockers);
    counts.sub_runs[slot] = ChannelCounts{p.p_plus, p.p_minus};
  }
  return counts;
}

}  // namespace

RunCounts protocol_weights(const SetupParams& params) { return weights_for_run(params, 0); }

JointProbTable joint_probs_two_time(const SetupParams& params, TimePair pair) {
  switch (pair) {
    case TimePair::T2T3: return *assemble_probabilities(weights_for_run(params, 1)).p23;
    case TimePair::T1T3: return *assemble_probabilities(weights_for_run(params, 2)).p13;
    case TimePair::T1T2: return *assemble_probabilities(weights_for_run(params, 3)).p12;
  }
  fail(ErrorKind::InvalidArgument, "joint_probs_two_time: unknown time pair");
}

JointProbTable joint_probs_three_time(const SetupParams& params) {
  return *assemble_probabilities(weights_for_run(params, 3)).p123;
}

JointProbTable single_time_probs(const SetupParams& params) {
  return *assemble_probabilities(weights_for_run(params, 4)).p3;
}

double qm_lgi(const SetupParams& params) {
  params.validate();
  const auto [a, b, c, d] = shorthand(params);
  const double v = params.visibility;
  const double r1 = params.reflection(1), r2 = params.reflection(2), r3 = params.reflection(3),
               r4 = params.reflection(4);
  const double t1 = params.transmission(1), t2 = params.transmission(2),
               t3 = params.transmission(3), t4 = params.transmission(4);
  return params.alpha_sq * (r1 * (t3 - 3 * r3) + t1 + 2 * a * v + 2 * b * v) +
         params.beta_sq() * (r4 * (t2 - 3 * r2) + t4 + 2 * c * v + 2 * d * v);
}

double qm_wlgi(const SetupParams& params) {
  params.validate();
  const double c = shorthand(params).c;
  return 2 * params.beta_sq() * c * params.visibility -
         params.alpha_sq * params.reflection(1) * params.reflection(3) -
         params.beta_sq() * params.reflection(2) * params.reflection(4);
}

NsitValues qm_nsit(const SetupParams& params) {
  params.validate();
  const auto s = shorthand(params);
  const double v = params.visibility;
  return {.nsit12 = 0.0,
          .nsit23 = std::abs(2 * params.alpha_sq * s.a * v - 2 * params.beta_sq() * s.c * v),
          .nsit13 = 0.0};
}

double alpha_sq_for_angle_error(double nominal_alpha_sq, double delta_deg) {
  require(in_unit(nominal_alpha_sq), "alpha_sq must lie in [0,1]");
  const double angle0 = 0.5 * std::asin(std::sqrt(nominal_alpha_sq));
  const double delta = delta_deg * std::numbers::pi / 180.0;
  const double s = std::sin(2.0 * (angle0 + delta));
  return s * s;
}

namespace {

std::vector<double> grid(double lo, double hi) {
  if (hi <= lo) return {lo};
  std::vector<double> g(kRangeGridPoints);
  for (int i = 0; i < kRangeGridPoints; ++i) {
    g[static_cast<std::size_t>(i)] = lo + (hi - lo) * i / (kRangeGridPoints - 1);
  }
  g.back() = hi;
  return g;
}

struct Extremes {
  double lgi_lo = std::numeric_limits<double>::infinity();
  double lgi_hi = -std::numeric_limits<double>::infinity();
  double wlgi_lo = std::numeric_limits<double>::infinity();
  double wlgi_hi = -std::numeric_limits<double>::infinity();
  double nsit_lo = std::numeric_limits<double>::infinity();
  double nsit_hi = -std::numeric_limits<double>::infinity();

  void merge(const Extremes& o) {
    lgi_lo = std::min(lgi_lo, o.lgi_lo);
    lgi_hi = std::max(lgi_hi, o.lgi_hi);
    wlgi_lo = std::min(wlgi_lo, o.wlgi_lo);
    wlgi_hi = std::max(wlgi_hi, o.wlgi_hi);
    nsit_lo = std::min(nsit_lo, o.nsit_lo);
    nsit_hi = std::max(nsit_hi, o.nsit_hi);
  }
};

}  // namespace

RangeResult qm_range(const SetupParams& params, const Tolerances& tol, unsigned threads) {
  params.validate();
  const bool finite = std::isfinite(tol.hwp_angle_deg) && std::isfinite(tol.t_abs) &&
                      std::isfinite(tol.v_lo) && std::isfinite(tol.v_hi);
  if (!finite || tol.hwp_angle_deg < 0 || tol.t_abs < 0 || tol.v_lo > tol.v_hi ||
      tol.v_lo < -1.0 || tol.v_hi > 1.0) {
    fail(ErrorKind::InvalidArgument, "qm_range: empty or invalid tolerance box");
  }

  std::vector<double> alphas;
  for (double delta : grid(-tol.hwp_angle_deg, tol.hwp_angle_deg)) {
    alphas.push_back(alpha_sq_for_angle_error(params.alpha_sq, delta));
  }
  std::array<std::vector<double>, 4> ts;
  for (std::size_t i = 0; i < 4; ++i) {
    const double t = params.t_ratios[i];
    ts[i] = grid(std::max(0.0, t - tol.t_abs), std::min(1.0, t + tol.t_abs));
  }
  const std::vector<double> vs = grid(tol.v_lo, tol.v_hi);

  std::vector<Extremes> partial(ts[0].size());
  parallel_for(ts[0].size(), threads, [&](std::size_t i1) {
    Extremes e;
    const double t1 = ts[0][i1], r1 = 1 - t1;
    for (double t2 : ts[1]) {
      const double r2 = 1 - t2;
      for (double t3 : ts[2]) {
        const double r3 = 1 - t3;
        for (double t4 : ts[3]) {
          const double r4 = 1 - t4;
          const double a = std::sqrt(t1 * t2 * r1 * r3), b = std::sqrt(t1 * r1 * r2 * t3);
          const double c = std::sqrt(t2 * t4 * r3 * r4), d = std::sqrt(r2 * r4 * t3 * t4);
          const double lgi_plus_arm = r1 * (t3 - 3 * r3) + t1;
          const double lgi_minus_arm = r4 * (t2 - 3 * r2) + t4;
          for (double alpha_sq : alphas) {
            const double beta_sq = 1 - alpha_sq;
            for (double v : vs) {
              const double lgi = alpha_sq * (lgi_plus_arm + 2 * (a + b) * v) +
                                 beta_sq * (lgi_minus_arm + 2 * (c + d) * v);
              const double wlgi = 2 * beta_sq * c * v - alpha_sq * r1 * r3 - beta_sq * r2 * r4;
              const double nsit = std::abs(2 * alpha_sq * a * v - 2 * beta_sq * c * v);
              e.lgi_lo = std::min(e.lgi_lo, lgi);
              e.lgi_hi = std::max(e.lgi_hi, lgi);
              e.wlgi_lo = std::min(e.wlgi_lo, wlgi);
              e.wlgi_hi = std::max(e.wlgi_hi, wlgi);
              e.nsit_lo = std::min(e.nsit_lo, nsit);
              e.nsit_hi = std::max(e.nsit_hi, nsit);
            }
          }
        }
      }
    }
    partial[i1] = e;
  });

  Extremes all;
  for (const auto& e : partial) all.merge(e);
  return {{all.lgi_lo, all.lgi_hi}, {all.wlgi_lo, all.wlgi_hi}, {all.nsit_lo, all.nsit_hi}};
}

double generic_lgi(double theta2, double t2, double t3) {
  const double r2 = 1 - t2, r3 = 1 - t3;
  return 1 - 4 * r2 * r3 + 4 * std::cos(theta2) * std::sqrt(t2 * t3 * r2 * r3);
}

double generic_wlgi(double theta1, double theta2, double t1, double t2, double t3) {
  const double r1 = 1 - t1, r2 = 1 - t2, r3 = 1 - t3;
  return 2 * std::cos(theta2) * r1 * std::sqrt(t2 * t3 * r2 * r3) -
         2 * std::cos(theta1) * r3 * std::sqrt(t1 * t2 * r1 * r2) - r2 * r3;
}

namespace {

double unit_from(double u) {
  const double s = std::sin(u);
  return s * s;
}

double wrap_angle(double theta) { return std::atan2(std::sin(theta), std::cos(theta)); }

// Best of several simplex runs from seeded random starts; maximizes f.
optim::SimplexResult multistart_max(const optim::Objective& f, std::size_t dim, std::size_t starts,
                                    std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> angle(-std::numbers::pi, std::numbers::pi);
  optim::SimplexOptions opts;
  opts.initial_step = 0.3;
  opts.f_tolerance = 1e-15;
  opts.x_tolerance = 1e-11;
  auto negated = [&f](std::span<const double> x) { return -f(x); };
  optim::SimplexResult best;
  best.value = std::numeric_limits<double>::infinity();
  for (std::size_t s = 0; s < starts; ++s) {
    std::vector<double> x0(dim);
    for (double& x : x0) x = angle(rng);
    auto r = optim::nelder_mead(negated, x0, opts);
    r = optim::nelder_mead(negated, r.x, opts);
    if (r.value < best.value) best = r;
  }
  best.value = -best.value;
  return best;
}

}  // namespace

IdealMaxima ideal_maxima() {
  IdealMaxima out;
  {
    auto f = [](std::span<const double> x) {
      return generic_lgi(x[0], unit_from(x[1]), unit_from(x[2]));
    };
    const auto r = multistart_max(f, 3, 24, 0x1A2B3C4DULL);
    out.lgi = {r.value, wrap_angle(r.x[0]), unit_from(r.x[1]), unit_from(r.x[2])};
  }
  {
    auto f = [](std::span<const double> x) {
      return generic_wlgi(x[0], x[1], unit_from(x[2]), unit_from(x[3]), unit_from(x[4]));
    };
    const auto r = multistart_max(f, 5, 48, 0x5E6F7081ULL);
    out.wlgi = {r.value,          wrap_angle(r.x[0]), wrap_angle(r.x[1]),
                unit_from(r.x[2]), unit_from(r.x[3]), unit_from(r.x[4])};
  }
  return out;
}

}  // namespace macroreal::quantum
