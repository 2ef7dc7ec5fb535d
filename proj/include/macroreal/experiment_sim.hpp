#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "macroreal/protocol.hpp"
#include "macroreal/quantum_model.hpp"

namespace macroreal::sim {

enum class Channel : std::uint8_t { Herald, Plus, Minus };

char channel_code(Channel c);  // H, P, M

// Integer picosecond click times of one detector, strictly increasing.
struct TimestampStream {
  Channel channel = Channel::Herald;
  std::vector<std::int64_t> times;
};

struct SubRunStreams {
  TimestampStream herald{Channel::Herald, {}};
  TimestampStream plus{Channel::Plus, {}};
  TimestampStream minus{Channel::Minus, {}};
};

inline constexpr double kPicosPerSecond = 1e12;

struct SourceConfig {
  double pair_rate = 5e4;  // pairs per second
  double duration = 1.0;   // seconds per iteration
  double gamma = 0.0;
  double eta_herald = 0.8;
  double eta1 = 0.56;  // PLUS detector
  double eta2 = 0.64;  // MINUS detector
  double dark_rate_h = 300.0;
  double dark_rate_p = 200.0;
  double dark_rate_m = 200.0;
  double jitter_sigma = 400.0;   // ps
  double base_delay = 1e5;       // ps, herald to signal
  double arm_delay_tau = 20.0;   // ps, extra delay of the -1 arm at t1
  std::uint64_t seed = 1;

  void validate() const;
  [[nodiscard]] std::int64_t duration_ps() const;
};

// Normalizes circuit output weights into click probabilities. Output weights
// of unequal-ratio splitters can add up above one once interference is on;
// dividing every sub-run by the same constant keeps each run's proportions.
double output_scale(const quantum::SetupParams& setup);

// One acquisition of one blocker configuration. The random stream is seeded
// from src.seed.
SubRunStreams generate_sub_run(const SourceConfig& src, const quantum::SetupParams& setup,
                               const BlockerConfig& blockers);

struct ProtocolOptions {
  std::size_t interference_iterations = 300;      // runs without a t2 blocker
  std::size_t non_interference_iterations = 150;  // runs with a t2 blocker
  // Per-iteration visibility drawn uniformly from this range.
  std::optional<quantum::Interval> visibility_jitter;
};

// Iterations of every sub-run. Streams are regenerated on demand from stored
// per-iteration seeds, so a dataset costs no memory until read.
class ExperimentDataset {
 public:
  ExperimentDataset(SourceConfig src, quantum::SetupParams setup, ProtocolOptions options);

  [[nodiscard]] const SourceConfig& source() const { return src_; }
  [[nodiscard]] const quantum::SetupParams& setup() const { return setup_; }
  [[nodiscard]] const ProtocolOptions& options() const { return options_; }

  [[nodiscard]] std::size_t iterations(std::size_t slot) const;
  [[nodiscard]] std::uint64_t seed(std::size_t slot, std::size_t iteration) const;
  [[nodiscard]] double visibility(std::size_t slot, std::size_t iteration) const;
  [[nodiscard]] SubRunStreams generate(std::size_t slot, std::size_t iteration) const;

 private:
  SourceConfig src_;
  quantum::SetupParams setup_;
  ProtocolOptions options_;
  double scale_;
};

ExperimentDataset run_protocol(const SourceConfig& src, const quantum::SetupParams& setup,
                               const ProtocolOptions& options = {});

// channel,time_ps rows merged in time order.
void write_timestamp_csv(const std::filesystem::path& path, const SubRunStreams& streams);
SubRunStreams read_timestamp_csv(const std::filesystem::path& path);

}  // namespace macroreal::sim
