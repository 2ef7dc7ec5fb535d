#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace macroreal {

// Blocker position at one time step.
enum class Block : std::uint8_t { None, Plus, Minus };

struct BlockerConfig {
  Block t1 = Block::None;
  Block t2 = Block::None;
  friend bool operator==(const BlockerConfig&, const BlockerConfig&) = default;
};

std::string to_string(Block b);

// A sub-run of the four-run negative-result protocol. Blocking one arm infers
// the opposite outcome at that time; the detectors at t3 give the last one.
struct SubRun {
  int run;    // 1..4
  int index;  // 1-based within the run
  BlockerConfig blockers;
  [[nodiscard]] std::string label() const;  // "2.1"
};

// Run 1: t2 blockers; run 2: t1 blockers; run 3: both; run 4: none.
inline constexpr std::array<SubRun, 9> kSubRuns{{
    {1, 1, {Block::None, Block::Minus}},
    {1, 2, {Block::None, Block::Plus}},
    {2, 1, {Block::Minus, Block::None}},
    {2, 2, {Block::Plus, Block::None}},
    {3, 1, {Block::Minus, Block::Minus}},
    {3, 2, {Block::Minus, Block::Plus}},
    {3, 3, {Block::Plus, Block::Minus}},
    {3, 4, {Block::Plus, Block::Plus}},
    {4, 1, {Block::None, Block::None}},
}};

// Position of a sub-run in kSubRuns, from its label.
std::size_t sub_run_slot(const std::string& label);

// Outcome inferred from a blocker: blocking +1 means the photon took -1.
int inferred_outcome(Block b);

// Probabilities over outcome tuples at an ordered set of times.
// Index convention: the first time is the most significant bit, outcome -1
// sets the bit, so for two times the order is (+,+), (+,-), (-,+), (-,-).
class JointProbTable {
 public:
  struct Source {
    BlockerConfig blockers;
    double raw_weight;  // detected weight of that sub-run before normalization
  };
  struct Entry {
    std::vector<int> outcome;
    double probability;
  };

  JointProbTable(std::vector<int> times, std::vector<double> probabilities,
                 std::vector<Source> provenance = {});

  [[nodiscard]] std::size_t order() const { return times_.size(); }
  [[nodiscard]] std::span<const int> times() const { return times_; }
  [[nodiscard]] std::span<const double> probabilities() const { return probs_; }
  [[nodiscard]] std::span<const Source> provenance() const { return provenance_; }

  [[nodiscard]] double at(std::span<const int> outcome) const;
  [[nodiscard]] double operator()(int q1) const;
  [[nodiscard]] double operator()(int q1, int q2) const;
  [[nodiscard]] double operator()(int q1, int q2, int q3) const;

  [[nodiscard]] double sum() const;
  [[nodiscard]] std::vector<Entry> entries() const;

  // Sums out the last time.
  [[nodiscard]] JointProbTable marginalize_last() const;

  // <Q Q> for a two-time table.
  [[nodiscard]] double correlation() const;

 private:
  std::vector<int> times_;
  std::vector<double> probs_;
  std::vector<Source> provenance_;
};

// Detected weight at each output detector for one sub-run.
struct ChannelCounts {
  double plus = 0.0;
  double minus = 0.0;
};

// One entry per kSubRuns slot; runs may be missing.
struct RunCounts {
  std::array<std::optional<ChannelCounts>, 9> sub_runs;
};

struct ProbabilitySet {
  std::optional<JointProbTable> p23;   // run 1
  std::optional<JointProbTable> p13;   // run 2
  std::optional<JointProbTable> p123;  // run 3
  std::optional<JointProbTable> p12;   // run 3 marginalized over t3
  std::optional<JointProbTable> p3;    // run 4
};

// Normalizes each complete run by its total. Throws Undefined on a zero total.
ProbabilitySet assemble_probabilities(const RunCounts& counts);

struct InequalityPoint {
  double q12 = 0.0;
  double q23 = 0.0;
  double q13 = 0.0;
  double lgi = 0.0;
  double wlgi = 0.0;
  double nsit12 = 0.0;
  double nsit23 = 0.0;
  double nsit13 = 0.0;
};

// LGI, WLGI and the three no-signalling-in-time gaps from a full table set.
// Throws InvalidArgument naming the missing run.
InequalityPoint evaluate_point(const ProbabilitySet& tables);

}  // namespace macroreal
