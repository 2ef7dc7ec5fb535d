#include <gtest/gtest.h>

#include <array>
#include <cmath>
#include <complex>
#include <numbers>
#include <random>

#include "macroreal/error.hpp"
#include "macroreal/quantum_model.hpp"

namespace mr = macroreal;
namespace q = macroreal::quantum;

namespace {

using cplx = std::complex<double>;
using Vec2 = std::array<cplx, 2>;
using Mat2 = std::array<std::array<cplx, 2>, 2>;

// Density-matrix oracle. Inner modes are (arm +1, arm -1) inside the loop.
// Entry splitters act on the photon's first-interferometer arm; the exit
// matrix maps inner modes onto the (PLUS, MINUS) detectors with the same
// reflection phase i on every reflected path.
Vec2 inner_state(const q::SetupParams& p, int t1_arm) {
  const cplx i{0, 1};
  if (t1_arm == 1) return {std::sqrt(p.transmission(1)), i * std::sqrt(p.reflection(1))};
  return {i * std::sqrt(p.reflection(4)), std::sqrt(p.transmission(4))};
}

Mat2 exit_matrix(const q::SetupParams& p) {
  const cplx i{0, 1};
  return {{{std::sqrt(p.transmission(2)), i * std::sqrt(p.reflection(3))},
           {i * std::sqrt(p.reflection(2)), std::sqrt(p.transmission(3))}}};
}

q::DetectionProbs oracle_detection(const q::SetupParams& p, mr::BlockerConfig blockers) {
  q::DetectionProbs out;
  const Mat2 m = exit_matrix(p);
  for (int arm : {1, -1}) {
    const double weight = arm == 1 ? p.alpha_sq : 1 - p.alpha_sq;
    const bool blocked_t1 = (arm == 1 && blockers.t1 == mr::Block::Plus) ||
                            (arm == -1 && blockers.t1 == mr::Block::Minus);
    if (blocked_t1) {
      out.p_lost += weight;
      continue;
    }
    Vec2 psi = inner_state(p, arm);
    if (blockers.t2 == mr::Block::Plus) {
      out.p_lost += weight * std::norm(psi[0]);
      psi[0] = 0;
    } else if (blockers.t2 == mr::Block::Minus) {
      out.p_lost += weight * std::norm(psi[1]);
      psi[1] = 0;
    }
    Mat2 rho{};
    for (int r = 0; r < 2; ++r) {
      for (int c = 0; c < 2; ++c) {
        rho[r][c] = psi[r] * std::conj(psi[c]) * (r == c ? 1.0 : p.visibility);
      }
    }
    std::array<double, 2> det{};
    for (int k = 0; k < 2; ++k) {
      cplx acc = 0;
      for (int r = 0; r < 2; ++r) {
        for (int c = 0; c < 2; ++c) acc += m[k][r] * rho[r][c] * std::conj(m[k][c]);
      }
      det[k] = acc.real();
    }
    out.p_plus += weight * det[0];
    out.p_minus += weight * det[1];
  }
  return out;
}

q::SetupParams random_params(std::mt19937_64& rng, bool symmetric_t) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> t(0.05, 0.95);
  q::SetupParams p;
  p.alpha_sq = unit(rng);
  const double shared = t(rng);
  for (double& x : p.t_ratios) x = symmetric_t ? shared : t(rng);
  p.visibility = unit(rng);
  return p;
}

mr::InequalityPoint assembled(const q::SetupParams& p) {
  return mr::evaluate_point(mr::assemble_probabilities(q::protocol_weights(p)));
}

const q::SetupParams kNominal = q::nominal_setup();
const q::SetupParams kIdeal = q::ideal_setup();

}  // namespace

TEST(DetectionProbs, MatchesDensityMatrixOracleForEveryBlockerPair) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const auto p = random_params(rng, false);
    for (const auto& sr : mr::kSubRuns) {
      const auto got = q::detection_probs(p, sr.blockers);
      const auto want = oracle_detection(p, sr.blockers);
      EXPECT_NEAR(got.p_plus, want.p_plus, 1e-12);
      EXPECT_NEAR(got.p_minus, want.p_minus, 1e-12);
      EXPECT_NEAR(got.p_lost, want.p_lost, 1e-12);
    }
  }
}

TEST(DetectionProbs, IdealUnblockedDetectsEverything) {
  const auto d = q::detection_probs(kIdeal, {});
  EXPECT_NEAR(d.p_plus + d.p_minus, 1.0, 1e-12);
  EXPECT_EQ(d.p_lost, 0.0);
}

TEST(DetectionProbs, BlockedMinusArmMatchesOracle) {
  const auto d = q::detection_probs(kIdeal, {mr::Block::Minus, mr::Block::None});
  const auto o = oracle_detection(kIdeal, {mr::Block::Minus, mr::Block::None});
  EXPECT_NEAR(d.p_plus, o.p_plus, 1e-14);
  EXPECT_NEAR(d.p_minus, o.p_minus, 1e-14);
  EXPECT_NEAR(d.p_lost, 0.5, 1e-14);
}

TEST(DetectionProbs, NominalPlusRateDiffersFromRunOneMarginal) {
  const auto d = q::detection_probs(kNominal, {});
  const auto p23 = q::joint_probs_two_time(kNominal, q::TimePair::T2T3);
  EXPECT_NEAR(std::abs(d.p_plus - (p23(1, 1) + p23(-1, 1))), 0.006, 5e-4);
}

TEST(DetectionProbs, EntriesInUnitIntervalAndConservedForSymmetricSplitters) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 500; ++trial) {
    const auto p = random_params(rng, true);
    for (const auto& sr : mr::kSubRuns) {
      const auto d = q::detection_probs(p, sr.blockers);
      for (double x : {d.p_plus, d.p_minus, d.p_lost}) {
        EXPECT_GE(x, -1e-15);
        EXPECT_LE(x, 1.0 + 1e-15);
      }
      EXPECT_NEAR(d.p_plus + d.p_minus + d.p_lost, 1.0, 1e-12);
    }
  }
}

// Unequal splitter ratios let the interference terms of the two exit ports
// differ, so the unblocked output weight departs from one.
TEST(DetectionProbs, ConservedForAnySplitters) {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 200; ++trial) {
    const auto p = random_params(rng, false);
    for (const auto& sr : mr::kSubRuns) {
      const auto d = q::detection_probs(p, sr.blockers);
      EXPECT_NEAR(d.p_plus + d.p_minus + d.p_lost, 1.0, 1e-12) << "sub-run " << sr.label();
    }
  }
}

TEST(DetectionProbs, BlockerRunsConserveWeight) {
  std::mt19937_64 rng(14);
  for (int trial = 0; trial < 200; ++trial) {
    const auto p = random_params(rng, false);
    const auto w = q::protocol_weights(p);
    std::array<double, 5> run_total{};
    for (std::size_t s = 0; s < mr::kSubRuns.size(); ++s) {
      run_total[static_cast<std::size_t>(mr::kSubRuns[s].run)] += w.sub_runs[s]->plus + w.sub_runs[s]->minus;
    }
    for (int run = 1; run <= 4; ++run) EXPECT_NEAR(run_total[static_cast<std::size_t>(run)], 1.0, 1e-12) << "run " << run;
  }
}

TEST(DetectionProbs, TimeTwoBlockerRunsConserveWeightForAnySplitters) {
  std::mt19937_64 rng(15);
  for (int trial = 0; trial < 200; ++trial) {
    const auto w = q::protocol_weights(random_params(rng, false));
    double run1 = 0, run3 = 0;
    for (std::size_t s = 0; s < mr::kSubRuns.size(); ++s) {
      const double total = w.sub_runs[s]->plus + w.sub_runs[s]->minus;
      if (mr::kSubRuns[s].run == 1) run1 += total;
      if (mr::kSubRuns[s].run == 3) run3 += total;
    }
    EXPECT_NEAR(run1, 1.0, 1e-12);
    EXPECT_NEAR(run3, 1.0, 1e-12);
  }
}

TEST(JointProbs, IdealFirstPairByHand) {
  const auto t = q::joint_probs_two_time(kIdeal, q::TimePair::T1T2);
  EXPECT_NEAR(t(1, 1), 0.375, 1e-12);
  EXPECT_NEAR(t(1, -1), 0.125, 1e-12);
  EXPECT_NEAR(t(-1, 1), 0.125, 1e-12);
  EXPECT_NEAR(t(-1, -1), 0.375, 1e-12);
}

TEST(JointProbs, EveryTableNormalized) {
  std::mt19937_64 rng(16);
  for (int trial = 0; trial < 200; ++trial) {
    const auto p = random_params(rng, false);
    for (auto pair : {q::TimePair::T1T2, q::TimePair::T2T3, q::TimePair::T1T3}) {
      EXPECT_NEAR(q::joint_probs_two_time(p, pair).sum(), 1.0, 1e-9);
    }
    EXPECT_NEAR(q::joint_probs_three_time(p).sum(), 1.0, 1e-9);
    EXPECT_NEAR(q::single_time_probs(p).sum(), 1.0, 1e-9);
  }
}

TEST(JointProbs, FirstPairIsMarginalOfThreeTimeTable) {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 100; ++trial) {
    const auto p = random_params(rng, false);
    const auto t3 = q::joint_probs_three_time(p);
    const auto t2 = q::joint_probs_two_time(p, q::TimePair::T1T2);
    for (int a : {1, -1}) {
      for (int b : {1, -1}) EXPECT_EQ(t2(a, b), t3(a, b, 1) + t3(a, b, -1));
    }
  }
}

TEST(JointProbs, NominalAssembledWlgi) {
  EXPECT_NEAR(assembled(kNominal).wlgi, 0.11, 5e-3);
}

// The +1 arm alone with fully destructive interference at both exits leaves
// runs 2 and 4 without a single detection.
TEST(JointProbs, DegenerateRunIsUndefined) {
  q::SetupParams p{1.0, {0.5, 1.0, 0.0, 0.5}, 1.0};
  const auto d = q::detection_probs(p, {});
  EXPECT_NEAR(d.p_plus + d.p_minus, 0.0, 1e-15);
  try {
    (void)q::joint_probs_two_time(p, q::TimePair::T1T3);
    FAIL() << "expected an error";
  } catch (const mr::Error& e) {
    EXPECT_EQ(e.kind(), mr::ErrorKind::Undefined);
  }
  EXPECT_NO_THROW((void)q::joint_probs_two_time(p, q::TimePair::T2T3));
}

TEST(ClosedForms, IdealValues) {
  EXPECT_NEAR(q::qm_lgi(kIdeal), 1.5, 1e-12);
  EXPECT_NEAR(q::qm_wlgi(kIdeal), 0.125, 1e-12);
  auto dark = kIdeal;
  dark.visibility = 0.0;
  EXPECT_NEAR(q::qm_lgi(dark), 0.75, 1e-12);
}

TEST(ClosedForms, NominalValues) {
  EXPECT_NEAR(q::qm_lgi(kNominal), 1.47, 5e-3);
  EXPECT_NEAR(q::qm_wlgi(kNominal), 0.11, 5e-3);
  const auto n = q::qm_nsit(kNominal);
  EXPECT_EQ(n.nsit12, 0.0);
  EXPECT_EQ(n.nsit13, 0.0);
  EXPECT_NEAR(n.nsit23, 0.006, 5e-4);
}

TEST(ClosedForms, NsitExamples) {
  auto p = kIdeal;
  p.t_ratios = {0.6, 0.6, 0.6, 0.6};
  for (double v : {0.0, 0.3, 1.0}) {
    p.visibility = v;
    EXPECT_NEAR(q::qm_nsit(p).nsit23, 0.0, 1e-15);
  }
  auto single_arm = kIdeal;
  single_arm.alpha_sq = 1.0;
  EXPECT_NEAR(q::qm_nsit(single_arm).nsit23, 0.375, 1e-12);
}

TEST(ClosedForms, WlgiWithoutInterferenceIsNeverViolated) {
  std::mt19937_64 rng(18);
  for (int trial = 0; trial < 200; ++trial) {
    auto p = random_params(rng, false);
    p.alpha_sq = 0.5;
    p.visibility = 0.0;
    const double want = -(0.5 * p.reflection(1) * p.reflection(3) + 0.5 * p.reflection(2) * p.reflection(4));
    EXPECT_NEAR(q::qm_wlgi(p), want, 1e-14);
    EXPECT_LE(q::qm_wlgi(p), 0.0);
  }
}

TEST(ClosedForms, AffineInVisibility) {
  std::mt19937_64 rng(19);
  for (int trial = 0; trial < 200; ++trial) {
    auto p = random_params(rng, false);
    auto at = [&](double v) {
      p.visibility = v;
      return std::array<double, 2>{q::qm_lgi(p), q::qm_wlgi(p)};
    };
    const auto lo = at(0.0), mid = at(0.37), hi = at(1.0);
    for (int k = 0; k < 2; ++k) EXPECT_NEAR(mid[k], lo[k] + 0.37 * (hi[k] - lo[k]), 1e-12);
  }
}

TEST(ClosedForms, SymmetricSetupMatchesGenericCircuit) {
  EXPECT_NEAR(q::qm_lgi(kIdeal), q::generic_lgi(0.0, 0.75, 0.75), 1e-12);
}

TEST(ClosedForms, AgreeWithAssemblyForSymmetricSplitters) {
  std::mt19937_64 rng(20);
  for (int trial = 0; trial < 300; ++trial) {
    const auto p = random_params(rng, true);
    const auto a = assembled(p);
    const auto n = q::qm_nsit(p);
    EXPECT_NEAR(q::qm_lgi(p), a.lgi, 1e-9);
    EXPECT_NEAR(q::qm_wlgi(p), a.wlgi, 1e-9);
    EXPECT_NEAR(n.nsit12, a.nsit12, 1e-9);
    EXPECT_NEAR(n.nsit23, a.nsit23, 1e-9);
    EXPECT_NEAR(n.nsit13, a.nsit13, 1e-9);
  }
}

// Required to hold for every parameter set; fails once the unblocked output
// weight is not one (unequal splitters), because the experiment normalizes
// each run by its own total.
TEST(ClosedForms, AgreeWithAssemblyForAnySplitters) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 300; ++trial) {
    const auto p = random_params(rng, false);
    const auto a = assembled(p);
    const auto n = q::qm_nsit(p);
    EXPECT_NEAR(q::qm_lgi(p), a.lgi, 1e-9);
    EXPECT_NEAR(q::qm_wlgi(p), a.wlgi, 1e-9);
    EXPECT_NEAR(n.nsit12, a.nsit12, 1e-9);
    EXPECT_NEAR(n.nsit23, a.nsit23, 1e-9);
    EXPECT_NEAR(n.nsit13, a.nsit13, 1e-9);
  }
}

TEST(ClosedForms, RejectInvalidParameters) {
  auto p = kIdeal;
  p.alpha_sq = 1.2;
  EXPECT_THROW((void)q::qm_lgi(p), mr::Error);
  p = kIdeal;
  p.t_ratios[2] = -0.1;
  EXPECT_THROW((void)q::detection_probs(p, {}), mr::Error);
}

TEST(Range, HalfWavePlateErrorMapsOntoSplitInterval) {
  EXPECT_NEAR(q::alpha_sq_for_angle_error(0.5, -1.0), 0.4651, 1e-4);
  EXPECT_NEAR(q::alpha_sq_for_angle_error(0.5, 1.0), 0.5349, 1e-4);
  EXPECT_NEAR(q::alpha_sq_for_angle_error(0.5, 0.0), 0.5, 1e-15);
}

TEST(Range, ZeroWidthBoxIsThePointValue) {
  const auto r = q::qm_range(kNominal, {0.0, 0.0, 1.0, 1.0});
  EXPECT_NEAR(r.lgi.lo, q::qm_lgi(kNominal), 1e-14);
  EXPECT_NEAR(r.lgi.hi, q::qm_lgi(kNominal), 1e-14);
  EXPECT_NEAR(r.wlgi.lo, q::qm_wlgi(kNominal), 1e-14);
  EXPECT_NEAR(r.wlgi.hi, q::qm_wlgi(kNominal), 1e-14);
  EXPECT_NEAR(r.nsit23.lo, q::qm_nsit(kNominal).nsit23, 1e-14);
  EXPECT_NEAR(r.nsit23.hi, q::qm_nsit(kNominal).nsit23, 1e-14);
}

TEST(Range, ContainsCornerEvaluations) {
  const q::Tolerances tol{1.0, 0.02, 0.7, 0.85};
  const auto r = q::qm_range(kNominal, tol);
  std::mt19937_64 rng(22);
  std::uniform_int_distribution<int> corner(0, 1);
  for (int trial = 0; trial < 200; ++trial) {
    q::SetupParams p = kNominal;
    p.alpha_sq = q::alpha_sq_for_angle_error(0.5, corner(rng) ? 1.0 : -1.0);
    for (double& t : p.t_ratios) t += corner(rng) ? 0.02 : -0.02;
    p.visibility = corner(rng) ? 0.85 : 0.7;
    EXPECT_GE(q::qm_lgi(p), r.lgi.lo - 1e-12);
    EXPECT_LE(q::qm_lgi(p), r.lgi.hi + 1e-12);
    EXPECT_GE(q::qm_wlgi(p), r.wlgi.lo - 1e-12);
    EXPECT_LE(q::qm_wlgi(p), r.wlgi.hi + 1e-12);
  }
  EXPECT_LE(r.lgi.lo, r.lgi.hi);
  EXPECT_GE(r.nsit23.lo, 0.0);
}

TEST(Range, ThreadCountDoesNotChangeResult) {
  const q::Tolerances tol{1.0, 0.02, 0.7, 0.85};
  const auto a = q::qm_range(kNominal, tol, 1);
  const auto b = q::qm_range(kNominal, tol, 4);
  EXPECT_EQ(a.lgi.lo, b.lgi.lo);
  EXPECT_EQ(a.lgi.hi, b.lgi.hi);
  EXPECT_EQ(a.wlgi.hi, b.wlgi.hi);
  EXPECT_EQ(a.nsit23.hi, b.nsit23.hi);
}

TEST(Range, EmptyBoxRejected) {
  EXPECT_THROW((void)q::qm_range(kNominal, {1.0, 0.02, 0.9, 0.8}), mr::Error);
  EXPECT_THROW((void)q::qm_range(kNominal, {-1.0, 0.02, 0.7, 0.8}), mr::Error);
}

TEST(GenericCircuit, HandValues) {
  EXPECT_NEAR(q::generic_lgi(0.0, 0.5, 0.5), 1.0, 1e-15);
  EXPECT_NEAR(q::generic_lgi(0.0, 0.75, 0.75), 1.5, 1e-15);
  EXPECT_NEAR(q::generic_wlgi(std::numbers::pi, 0.0, 0.1524, 0.6952, 0.4833), 0.4034, 5e-4);
}

TEST(GenericCircuit, IdealMaxima) {
  const auto m = q::ideal_maxima();
  EXPECT_NEAR(m.lgi.value, 1.5, 1e-9);
  EXPECT_NEAR(std::cos(m.lgi.theta2), 1.0, 1e-6);
  EXPECT_NEAR(m.lgi.t2, 0.75, 1e-4);
  EXPECT_NEAR(m.lgi.t3, 0.75, 1e-4);
  EXPECT_NEAR(m.wlgi.value, 0.4034, 5e-4);
  EXPECT_NEAR(m.wlgi.t1, 0.1524, 2e-3);
  EXPECT_NEAR(m.wlgi.t2, 0.6952, 2e-3);
  EXPECT_NEAR(m.wlgi.t3, 0.4833, 2e-3);
  EXPECT_NEAR(std::cos(m.wlgi.theta1), -1.0, 1e-6);
  EXPECT_NEAR(std::cos(m.wlgi.theta2), 1.0, 1e-6);
  // Oracle: no grid point beats the optimum.
  double grid_best = -1;
  for (int i = 1; i < 100; ++i) {
    for (int j = 1; j < 100; ++j) {
      for (int k = 1; k < 100; ++k) {
        grid_best = std::max(grid_best, q::generic_wlgi(std::numbers::pi, 0.0, i / 100.0, j / 100.0, k / 100.0));
      }
    }
  }
  EXPECT_GE(m.wlgi.value, grid_best - 1e-12);
  EXPECT_NEAR(m.wlgi.value, grid_best, 2e-3);
}
