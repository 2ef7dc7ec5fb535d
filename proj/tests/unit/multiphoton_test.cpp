#include <gtest/gtest.h>

#include <array>
#include <cmath>
#include <random>

#include "macroreal/commands.hpp"
#include "macroreal/error.hpp"
#include "macroreal/multiphoton.hpp"
#include "test_support.hpp"

namespace mr = macroreal;
namespace mp = macroreal::multiphoton;

namespace {

// Enumeration oracle. Each photon picks a first arm and an inner arm; only
// the route named by the blocker set stays open. An open photon reaches
// detector 1 or 2 by the exit ratio and clicks with that detector's
// efficiency; a detector counts once however many photons it absorbs.
mp::CountVector12 oracle_counts(const mp::GammaFitParams& p) {
  const auto& t = p.t_ratios;
  auto arm_prob = [&](int arm) { return arm == 1 ? p.alpha_sq : 1 - p.alpha_sq; };
  auto inner_prob = [&](int arm, int inner) {
    if (arm == 1) return inner == 1 ? t[0] : 1 - t[0];
    return inner == 1 ? 1 - t[3] : t[3];
  };
  auto to_d1 = [&](int inner) { return inner == 1 ? 1 - t[1] : t[2]; };

  mp::CountVector12 out;
  const std::array<std::array<int, 2>, 4> open{{{1, 1}, {1, -1}, {-1, 1}, {-1, -1}}};
  for (std::size_t s = 0; s < 4; ++s) {
    const auto [arm, inner] = open[s];
    const double reach = arm_prob(arm) * inner_prob(arm, inner);
    // Photon fates: 0 lost, 1 at detector 1, 2 at detector 2.
    const std::array<double, 3> fate{1 - reach, reach * to_d1(inner), reach * (1 - to_d1(inner))};
    const std::array<double, 3> eff{0.0, p.eta1, p.eta2};

    const double n1 = (1 - p.gamma) * p.n_events, n2 = p.gamma * p.n_events;
    double c1 = n1 * fate[1] * p.eta1, c2 = n1 * fate[2] * p.eta2, c12 = 0;
    for (int f1 = 0; f1 < 3; ++f1) {
      for (int f2 = 0; f2 < 3; ++f2) {
        const double w = fate[static_cast<std::size_t>(f1)] * fate[static_cast<std::size_t>(f2)];
        // Sum over both photons' detection outcomes.
        for (int k1 = 0; k1 < 2; ++k1) {
          for (int k2 = 0; k2 < 2; ++k2) {
            const double e1 = eff[static_cast<std::size_t>(f1)], e2 = eff[static_cast<std::size_t>(f2)];
            const double pk = (k1 ? e1 : 1 - e1) * (k2 ? e2 : 1 - e2);
            const bool d1 = (k1 && f1 == 1) || (k2 && f2 == 1);
            const bool d2 = (k1 && f1 == 2) || (k2 && f2 == 2);
            c1 += n2 * w * pk * d1;
            c2 += n2 * w * pk * d2;
            c12 += n2 * w * pk * (d1 && d2);
          }
        }
      }
    }
    out.sets[s] = {c1, c2, c12};
  }
  return out;
}

mp::GammaFitParams random_params(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const mp::FitBox box;
  auto in_box = [&](std::size_t i) { return box.lo[i] + (box.hi[i] - box.lo[i]) * u(rng); };
  mp::GammaFitParams p;
  p.alpha_sq = in_box(0);
  p.t_ratios = {in_box(1), in_box(2), in_box(3), in_box(4)};
  p.eta1 = in_box(5);
  p.eta2 = in_box(6);
  p.gamma = in_box(7);
  p.n_events = std::exp(std::log(box.lo[8]) + (std::log(box.hi[8]) - std::log(box.lo[8])) * u(rng));
  return p;
}

mp::GammaFitParams reference_fit_params(double n_events) {
  mp::GammaFitParams p;
  p.alpha_sq = 0.48;
  p.t_ratios = {0.74, 0.77, 0.81, 0.65};
  p.eta1 = 0.56;
  p.eta2 = 0.64;
  p.gamma = 0.0023;
  p.n_events = n_events;
  return p;
}

mp::CountVector12 measured_counts() {
  return mr::commands::read_counts_csv(mr::testing::data_dir() / "measured_gamma_counts.csv");
}

}  // namespace

TEST(TwoPhotonModel, TablesMatchDeterministicAssignment) {
  const auto t = mp::two_photon_joint_probs();
  EXPECT_EQ((*t.p23)(1, 1), 0.5);
  EXPECT_EQ((*t.p23)(-1, -1), 0.5);
  EXPECT_EQ((*t.p23)(1, -1), 0.0);
  EXPECT_EQ((*t.p23)(-1, 1), 0.0);
  EXPECT_EQ((*t.p13)(1, -1), 0.5);
  EXPECT_EQ((*t.p13)(-1, 1), 0.5);
  EXPECT_EQ((*t.p13)(1, 1), 0.0);
  EXPECT_EQ((*t.p13)(-1, -1), 0.0);
  EXPECT_EQ((*t.p12)(1, 1), 0.5);
  EXPECT_EQ((*t.p12)(-1, -1), 0.5);
  EXPECT_EQ((*t.p12)(1, -1), 0.0);
  EXPECT_EQ((*t.p12)(-1, 1), 0.0);
}

TEST(TwoPhotonModel, TablesNormalizedAndSwapSymmetric) {
  const auto t = mp::two_photon_joint_probs();
  for (const auto* table : {&*t.p23, &*t.p13, &*t.p12}) {
    EXPECT_EQ(table->sum(), 1.0);
    EXPECT_EQ((*table)(1, 1), (*table)(-1, -1));
    EXPECT_EQ((*table)(1, -1), (*table)(-1, 1));
  }
  EXPECT_EQ(t.p123->sum(), 1.0);
  EXPECT_EQ(t.p3->sum(), 1.0);
}

TEST(TwoPhotonModel, ReachesAlgebraicMaxima) {
  const auto v = mr::evaluate_point(mp::two_photon_joint_probs());
  EXPECT_EQ(v.lgi, 3.0);
  EXPECT_EQ(v.wlgi, 0.5);
}

TEST(ModifiedBounds, Examples) {
  const auto b = mp::modified_bounds(0.0023);
  EXPECT_NEAR(b.lgi, 1.0046, 1e-12);
  EXPECT_NEAR(b.wlgi, 0.00115, 1e-12);
  EXPECT_EQ(mp::modified_bounds(0.0).lgi, 1.0);
  EXPECT_EQ(mp::modified_bounds(0.0).wlgi, 0.0);
  EXPECT_NEAR(mp::modified_bounds(0.5).lgi, 2.0, 1e-15);
  EXPECT_NEAR(mp::modified_bounds(0.5).wlgi, 0.25, 1e-15);
  EXPECT_THROW((void)mp::modified_bounds(1.0), mr::Error);
  EXPECT_THROW((void)mp::modified_bounds(-0.1), mr::Error);
}

TEST(ModifiedBounds, AffineAndIncreasing) {
  const auto b0 = mp::modified_bounds(0.0), b1 = mp::modified_bounds(0.9);
  double prev_l = -1, prev_w = -1;
  for (int k = 0; k <= 90; ++k) {
    const double g = k / 100.0;
    const auto b = mp::modified_bounds(g);
    EXPECT_NEAR(b.lgi, b0.lgi + (b1.lgi - b0.lgi) * g / 0.9, 1e-12);
    EXPECT_NEAR(b.wlgi, b0.wlgi + (b1.wlgi - b0.wlgi) * g / 0.9, 1e-12);
    EXPECT_GT(b.lgi, prev_l);
    EXPECT_GT(b.wlgi, prev_w);
    prev_l = b.lgi;
    prev_w = b.wlgi;
  }
}

TEST(PredictedCounts, MatchesEnumerationOracle) {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 200; ++trial) {
    const auto p = random_params(rng);
    const auto got = mp::predicted_counts(p).flat();
    const auto want = oracle_counts(p).flat();
    for (std::size_t i = 0; i < 12; ++i) EXPECT_NEAR(got[i], want[i], 1e-9 * (1 + want[i])) << i;
  }
}

TEST(PredictedCounts, CoincidencesNeverExceedSingles) {
  std::mt19937_64 rng(32);
  for (int trial = 0; trial < 500; ++trial) {
    for (const auto& s : mp::predicted_counts(random_params(rng)).sets) {
      EXPECT_LE(s.c12, std::min(s.c1, s.c2));
    }
  }
}

TEST(PredictedCounts, NoPairsNoCoincidences) {
  auto p = reference_fit_params(1e5);
  p.gamma = 0.0;
  for (const auto& s : mp::predicted_counts(p).sets) EXPECT_EQ(s.c12, 0.0);
}

TEST(PredictedCounts, DeterministicRouting) {
  mp::GammaFitParams p;
  p.alpha_sq = 1.0;
  p.t_ratios = {1.0, 0.0, 0.5, 0.5};
  p.eta1 = p.eta2 = 1.0;
  p.gamma = 0.0;
  p.n_events = 1000.0;
  const auto c = mp::predicted_counts(p);
  EXPECT_EQ(c.sets[0].c1, 1000.0);
  EXPECT_EQ(c.sets[0].c2, 0.0);
  EXPECT_EQ(c.sets[0].c12, 0.0);
}

TEST(PredictedCounts, RejectsInvalidParameters) {
  auto p = reference_fit_params(1e5);
  p.eta1 = 0.0;
  EXPECT_THROW((void)mp::predicted_counts(p), mr::Error);
  p = reference_fit_params(-1.0);
  EXPECT_THROW((void)mp::predicted_counts(p), mr::Error);
}

TEST(ChiSquared, Definitional) {
  const auto pred = mp::predicted_counts(reference_fit_params(1e5));
  EXPECT_EQ(mp::chi_squared(pred, pred), 0.0);
  auto obs = pred;
  obs.sets[2].c2 += std::sqrt(pred.sets[2].c2);
  EXPECT_NEAR(mp::chi_squared(obs, pred), 1.0, 1e-12);
}

TEST(ChiSquared, ZeroPredictionIsUndefined) {
  auto p = reference_fit_params(1e5);
  p.gamma = 0.0;
  const auto pred = mp::predicted_counts(p);
  try {
    (void)mp::chi_squared(pred, pred);
    FAIL() << "expected an error";
  } catch (const mr::Error& e) {
    EXPECT_EQ(e.kind(), mr::ErrorKind::Undefined);
  }
}

// Printed fit parameters with the best free scale N.
TEST(ChiSquared, ReferenceFitParametersReproduceReportedValue) {
  const auto obs = measured_counts();
  double best = std::numeric_limits<double>::infinity();
  for (int k = 0; k <= 4000; ++k) {
    const double n = std::exp(std::log(1e4) + (std::log(1e7) - std::log(1e4)) * k / 4000.0);
    best = std::min(best, mp::chi_squared(obs, mp::predicted_counts(reference_fit_params(n))));
  }
  EXPECT_NEAR(best, 7.2, 0.5);
}

TEST(FitGamma, ReachesTheGlobalMinimumOnNoiselessData) {
  std::mt19937_64 rng(33);
  for (int trial = 0; trial < 3; ++trial) {
    const auto truth = random_params(rng);
    mp::FitOptions o;
    o.restarts = 20;
    const auto fit = mp::fit_gamma(mp::predicted_counts(truth), o);
    EXPECT_LT(fit.chi2, 1e-6);
    EXPECT_TRUE(fit.converged);
    EXPECT_TRUE(fit.params.gamma >= o.box.lo[7] && fit.params.gamma <= o.box.hi[7]);
  }
}

// Nine parameters against twelve cells that only constrain combinations of
// them: many parameter sets reach chi-squared zero, with different gamma.
TEST(FitGamma, RoundTripRecoversGamma) {
  std::mt19937_64 rng(34);
  for (int trial = 0; trial < 20; ++trial) {
    const auto truth = random_params(rng);
    const auto fit = mp::fit_gamma(mp::predicted_counts(truth));
    EXPECT_NEAR(fit.params.gamma, truth.gamma, 1e-3) << "draw " << trial;
  }
}

TEST(FitGamma, NoPairsFitsZeroGamma) {
  auto truth = reference_fit_params(2e5);
  truth.gamma = 0.0;
  const auto fit = mp::fit_gamma(mp::predicted_counts(truth));
  EXPECT_LE(fit.params.gamma, 1e-4);
}

TEST(FitGamma, DeterministicAcrossThreadCounts) {
  mp::FitOptions o;
  o.restarts = 8;
  const auto obs = measured_counts();
  const auto a = mp::fit_gamma(obs, o);
  o.threads = 3;
  const auto b = mp::fit_gamma(obs, o);
  EXPECT_EQ(a.chi2, b.chi2);
  EXPECT_EQ(a.params.gamma, b.params.gamma);
}

TEST(FitGamma, RejectsNegativeCounts) {
  auto obs = measured_counts();
  obs.sets[1].c1 = -1;
  EXPECT_THROW((void)mp::fit_gamma(obs), mr::Error);
}
