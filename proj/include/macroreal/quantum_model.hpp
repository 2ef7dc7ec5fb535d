#pragma once

#include <array>

#include "macroreal/protocol.hpp"

namespace macroreal::quantum {

// Optical circuit: input split, per-port beamsplitter transmissions, Sagnac
// visibility v = cos(theta2).
struct SetupParams {
  double alpha_sq = 0.5;
  std::array<double, 4> t_ratios{0.75, 0.75, 0.75, 0.75};
  double visibility = 1.0;

  [[nodiscard]] double beta_sq() const { return 1.0 - alpha_sq; }
  [[nodiscard]] double transmission(int port) const { return t_ratios.at(static_cast<std::size_t>(port - 1)); }
  [[nodiscard]] double reflection(int port) const { return 1.0 - transmission(port); }

  // Throws InvalidArgument when a field is out of range.
  void validate() const;
};

// Nominal measured ratios.
SetupParams nominal_setup();
// All ports 0.75, balanced input, perfect visibility.
SetupParams ideal_setup();

struct DetectionProbs {
  double p_plus = 0.0;
  double p_minus = 0.0;
  double p_lost = 0.0;  // absorbed by a blocker
};

// Output weights of a photon that took the given first-interferometer arm
// (+1 or -1), for a given blocker at t2. `lost` is the blocked share.
struct ArmOutputs {
  double plus = 0.0;
  double minus = 0.0;
  double lost = 0.0;
};
ArmOutputs arm_outputs(const SetupParams& params, int t1_arm, Block t2_block);

DetectionProbs detection_probs(const SetupParams& params, const BlockerConfig& blockers);

// Detected weights for every sub-run of the protocol.
RunCounts protocol_weights(const SetupParams& params);

enum class TimePair { T1T2, T2T3, T1T3 };

// Joint probabilities as the experiment forms them: raw sub-run weights
// normalized per run; (t1,t2) via the three-time table.
JointProbTable joint_probs_two_time(const SetupParams& params, TimePair pair);
JointProbTable joint_probs_three_time(const SetupParams& params);
JointProbTable single_time_probs(const SetupParams& params);

// Closed forms.
double qm_lgi(const SetupParams& params);
double qm_wlgi(const SetupParams& params);

struct NsitValues {
  double nsit12 = 0.0;
  double nsit23 = 0.0;
  double nsit13 = 0.0;
};
NsitValues qm_nsit(const SetupParams& params);

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

struct Tolerances {
  double hwp_angle_deg = 1.0;  // half-wave-plate setting error
  double t_abs = 0.02;         // absolute error on each transmission
  double v_lo = 1.0;
  double v_hi = 1.0;
};

struct RangeResult {
  Interval lgi;
  Interval wlgi;
  Interval nsit23;
};

inline constexpr int kRangeGridPoints = 21;

// alpha^2 after a half-wave-plate error of delta_deg around the setting that
// produces `nominal_alpha_sq`: sin^2(2(angle0 + delta)).
double alpha_sq_for_angle_error(double nominal_alpha_sq, double delta_deg);

// Min/max over a 21-point-per-axis grid of the tolerance box.
RangeResult qm_range(const SetupParams& params, const Tolerances& tol, unsigned threads = 1);

// Generic two-interferometer circuit, used for the ideal maxima.
double generic_lgi(double theta2, double t2, double t3);
double generic_wlgi(double theta1, double theta2, double t1, double t2, double t3);

struct LgiArgmax {
  double value = 0.0;
  double theta2 = 0.0;
  double t2 = 0.0;
  double t3 = 0.0;
};
struct WlgiArgmax {
  double value = 0.0;
  double theta1 = 0.0;
  double theta2 = 0.0;
  double t1 = 0.0;
  double t2 = 0.0;
  double t3 = 0.0;
};
struct IdealMaxima {
  LgiArgmax lgi;
  WlgiArgmax wlgi;
};

IdealMaxima ideal_maxima();

}  // namespace macroreal::quantum
