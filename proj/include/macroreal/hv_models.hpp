#pragma once

#include <array>
#include <cstdint>
#include <optional>

namespace macroreal::hv {

// Subspace blocks of the hidden-variable model, in storage order.
enum class Subspace : std::uint8_t { Q, P, S, A, B, C, D };
inline constexpr std::size_t kBlocks = 7;
inline constexpr std::size_t kOutcomes = 8;  // (q1,q2,q3) triples, +++ first, --- last
inline constexpr std::size_t kWeights = kBlocks * kOutcomes;

// Outcome triple for triple index 1..8 (+ is +1).
std::array<int, 3> outcome_triple(int index);

struct HVWeights {
  std::array<double, kWeights> values{};

  // index is 1-based, matching the outcome triple numbering.
  [[nodiscard]] double& at(Subspace s, int index);
  [[nodiscard]] double at(Subspace s, int index) const;
  [[nodiscard]] double block_sum(Subspace s) const;
  [[nodiscard]] double total() const;

  // Detection-efficiency sums p+a+b+d, q+a+c+d, s+b+c+d.
  [[nodiscard]] std::array<double, 3> efficiency_sums() const;

  // Nonnegativity, total <= 1 and all three efficiency sums equal eta.
  [[nodiscard]] bool feasible(double eta, double tol = 1e-9) const;
};

// Detector-only setup expressions. Throw Degenerate on a zero denominator.
double lgi_detectors_value(const HVWeights& w);
double wlgi_detectors_value(const HVWeights& w);

enum class Inequality { LGI, WLGI };

// Closed-form detector-only macrorealist bounds.
double closed_form_bound(Inequality which, double eta);

struct BoundCertificate {
  Inequality inequality = Inequality::LGI;
  double eta = 1.0;
  double bound = 0.0;
  HVWeights witness;
  double formula_value = 0.0;
  // The optimizer found a feasible point above the closed form.
  bool exceeds_formula = false;
};

struct SearchOptions {
  std::size_t random_starts = 96;
  std::uint64_t seed = 0x5EEDULL;
  unsigned threads = 1;
  std::size_t evaluation_budget = 200000;  // per start
  // Restrict the search to a set of weight slots (index = block*8 + i-1).
  std::optional<std::array<bool, kWeights>> support;
};

BoundCertificate maximize_lgi_detectors(double eta, const SearchOptions& options = {});
BoundCertificate maximize_wlgi_detectors(double eta, const SearchOptions& options = {});

// Efficiency at which the detector-only bound drops to the ideal quantum
// maximum (1.5 for LGI, 0.4034 for WLGI), by bisection to 1e-7.
double critical_efficiency(Inequality which);

// Blocker setup: only photons reaching the final detectors count, so the
// efficiency cancels and the bound is the deterministic-vertex maximum.
BoundCertificate blocker_setup_bound(Inequality which, double eta);

}  // namespace macroreal::hv
