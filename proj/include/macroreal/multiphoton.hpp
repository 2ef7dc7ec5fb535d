#pragma once

#include <array>
#include <cstdint>
#include <string_view>

#include "macroreal/protocol.hpp"

namespace macroreal::multiphoton {

// Joint tables of the deterministic two-photon realist model, measured
// through the same blocker protocol as single photons.
ProbabilitySet two_photon_joint_probs();

struct ModifiedBounds {
  double lgi = 1.0;
  double wlgi = 0.0;
};

// Macrorealist bounds when a fraction gamma of events carries two photons.
ModifiedBounds modified_bounds(double gamma);

struct GammaFitParams {
  double alpha_sq = 0.5;
  std::array<double, 4> t_ratios{0.75, 0.75, 0.75, 0.75};
  double eta1 = 1.0;
  double eta2 = 1.0;
  double n_events = 1e5;  // N; single events (1-gamma)N, pairs gamma*N
  double gamma = 0.0;

  void validate() const;
};

// Singles at both output detectors and their coincidences, for one pair of
// blocker positions.
struct SetCounts {
  double c1 = 0.0;
  double c2 = 0.0;
  double c12 = 0.0;
};

// Sets in order (+,+), (+,-), (-,+), (-,-).
inline constexpr std::array<std::string_view, 4> kSetLabels{"++", "+-", "-+", "--"};

struct CountVector12 {
  std::array<SetCounts, 4> sets{};

  [[nodiscard]] std::array<double, 12> flat() const;
};

CountVector12 predicted_counts(const GammaFitParams& p);

// Pearson chi-squared. Throws Undefined when a predicted cell is not positive.
double chi_squared(const CountVector12& observed, const CountVector12& predicted);

// Box for the nine fit parameters, in GammaFitParams field order.
struct FitBox {
  std::array<double, 9> lo{0.3, 0.5, 0.5, 0.5, 0.5, 0.3, 0.3, 0.0, 1e4};
  std::array<double, 9> hi{0.7, 0.95, 0.95, 0.95, 0.95, 0.9, 0.9, 0.05, 1e7};
};

struct FitOptions {
  std::size_t restarts = 50;
  std::uint64_t seed = 0xC0FFEEULL;
  unsigned threads = 1;
  FitBox box;
};

struct FitResult {
  GammaFitParams params;
  double chi2 = 0.0;
  bool converged = false;
  std::size_t restarts = 0;
};

FitResult fit_gamma(const CountVector12& observed, const FitOptions& options = {});

}  // namespace macroreal::multiphoton
