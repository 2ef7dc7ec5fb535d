#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "macroreal/experiment_sim.hpp"
#include "macroreal/protocol.hpp"

namespace macroreal::analysis {

// Counts of time differences t_b - t_a; bin k covers
// [origin + k*bin_width, origin + (k+1)*bin_width).
struct CoincidenceHistogram {
  std::int64_t bin_width = 100;
  std::int64_t origin = 0;
  std::vector<std::uint64_t> counts;

  [[nodiscard]] std::int64_t bin_start(std::size_t k) const {
    return origin + static_cast<std::int64_t>(k) * bin_width;
  }
  [[nodiscard]] std::int64_t end() const { return bin_start(counts.size()); }
};

// Differences in [lo, hi) are binned; (hi - lo) must be a multiple of
// bin_width with at least three bins. Two-pointer sweep over sorted streams.
CoincidenceHistogram histogram(std::span<const std::int64_t> a, std::span<const std::int64_t> b,
                               std::int64_t bin_width, std::int64_t lo, std::int64_t hi);

// Bin-aligned coincidence window [start, end) on the time difference.
struct WindowSelection {
  std::int64_t start = 0;
  std::int64_t end = 0;
  double flatline_mean = 0.0;  // accidental counts per bin
  std::int64_t bin_width = 100;
  std::string policy = "FWHM";

  [[nodiscard]] std::int64_t width_bins() const { return (end - start) / bin_width; }
};

// FWHM window around the highest bin. Throws NoPeak when the maximum is
// below flatline + 5 sqrt(flatline + 1).
WindowSelection select_window(const CoincidenceHistogram& h);

// Mean of the bins further than three window widths from the window centre.
// Falls back to the median bin when no such bins exist.
double flatline_mean(const CoincidenceHistogram& h, const WindowSelection& w);

struct CoincidenceCount {
  double raw = 0.0;
  double background = 0.0;
  double corrected = 0.0;
  bool clamped = false;
};

// Raw pairs inside the window minus the flatline background, clamped at 0.
CoincidenceCount count_in_window(std::span<const std::int64_t> a, std::span<const std::int64_t> b,
                                 const WindowSelection& w);
double corrected_coincidences(std::span<const std::int64_t> a, std::span<const std::int64_t> b,
                              const WindowSelection& w);
CoincidenceCount count_in_window(const CoincidenceHistogram& h, const WindowSelection& w,
                                 double flatline);

// Corrected coincidences of every iteration of every sub-run.
struct IterationCounts {
  std::array<std::vector<ChannelCounts>, 9> sub_runs;
  // Window per sub-run and channel (plus, minus); empty when no peak was found.
  std::array<std::array<std::optional<WindowSelection>, 2>, 9> windows;
  std::vector<std::string> warnings;

  [[nodiscard]] RunCounts mean_counts() const;
  [[nodiscard]] std::size_t min_iterations() const;
};

struct HistogramOptions {
  std::int64_t bin_width = 100;
  std::int64_t delay_center = 100000;  // expected herald-to-signal delay
  std::int64_t half_range = 50000;
};

// Streams of one acquisition, by sub-run slot and iteration.
struct StreamSource {
  std::array<std::size_t, 9> iterations{};
  std::function<sim::SubRunStreams(std::size_t slot, std::size_t iteration)> load;
};

StreamSource stream_source(const sim::ExperimentDataset& dataset);

// Each channel gets one window, taken from its histogram summed over every
// sub-run that shows a peak, so all sub-runs share the same acceptance. A
// sub-run without a peak in a channel counts zero there. The flatline is
// estimated per iteration.
IterationCounts count_coincidences(const StreamSource& source, const HistogramOptions& options,
                                   unsigned threads = 1);

// Run-normalized tables from the iteration-averaged counts.
ProbabilitySet joint_probs_from_runs(const IterationCounts& counts);

// Point values of every inequality term.
InequalityPoint evaluate_inequalities(const ProbabilitySet& tables);

struct BootstrapResult {
  std::size_t iterations = 0;  // I
  std::size_t resamples = 0;   // K
  double mean = 0.0;
  double sd = 0.0;
  std::optional<double> sd_over_mean;  // empty when the mean is zero
};

// K means of I draws with replacement. Resamples are split into fixed chunks
// with derived seeds, so the result does not depend on the thread count.
BootstrapResult bootstrap_sdm(std::span<const double> samples, std::size_t iterations,
                              std::size_t resamples, std::uint64_t seed = 0xB007ULL,
                              unsigned threads = 1);

// Cross-combination spreads. Every run's statistic is evaluated on one
// iteration per sub-run; the spread is taken over all such combinations.
struct ErrorOptions {
  std::size_t exhaustive_limit = 200000;  // enumerate when the combination count is at most this
  std::size_t sampled_draws = 1000000;
  std::uint64_t seed = 0xE5505ULL;
  bool force_sampling = false;
  unsigned threads = 1;
};

struct RunSpread {
  double correlation = 0.0;  // sd of <Q Q> for two-time runs
  double wlgi_term = 0.0;    // sd of the run's P(-,+) entering WLGI
  std::size_t combinations = 0;  // full cross product, even when sampled
  bool sampled = false;
};

struct ErrorDistributions {
  RunSpread run12;  // run 3
  RunSpread run23;  // run 1
  RunSpread run13;  // run 2
  double lgi_delta = 0.0;
  double wlgi_delta = 0.0;
  double nsit12_delta = 0.0;
  double nsit23_delta = 0.0;
  double nsit13_delta = 0.0;
};

ErrorDistributions error_distributions(const IterationCounts& counts,
                                       const ErrorOptions& options = {});

// Inequality terms of a single iteration of every sub-run, for plotting.
struct IterationPoint {
  std::size_t iteration = 0;
  InequalityPoint point;
};
std::vector<IterationPoint> per_iteration_points(const IterationCounts& counts);

struct Estimate {
  double mean = 0.0;
  std::optional<double> delta;
};

struct ResultReport {
  Estimate lgi;
  Estimate wlgi;
  Estimate nsit12;
  Estimate nsit23;
  Estimate nsit13;
  Estimate q12;
  Estimate q23;
  Estimate q13;
  ProbabilitySet tables;
  std::optional<ErrorDistributions> errors;
  std::array<std::size_t, 9> iterations{};
  std::vector<std::string> warnings;
};

// Point values from the averaged counts; spreads when every sub-run has at
// least two iterations.
ResultReport build_report(const IterationCounts& counts, const ErrorOptions& options = {});

}  // namespace macroreal::analysis
