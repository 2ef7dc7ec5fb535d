#include "macroreal/protocol.hpp"

#include <cmath>
#include <numeric>

#include "macroreal/error.hpp"

namespace macroreal {

std::string to_string(Block b) {
  switch (b) {
    case Block::None: return "none";
    case Block::Plus: return "plus";
    case Block::Minus: return "minus";
  }
  return "none";
}

std::string SubRun::label() const { return std::to_string(run) + "." + std::to_string(index); }

std::size_t sub_run_slot(const std::string& label) {
  for (std::size_t i = 0; i < kSubRuns.size(); ++i) {
    if (kSubRuns[i].label() == label) return i;
  }
  fail(ErrorKind::InvalidArgument, "unknown sub-run label '" + label + "'");
}

int inferred_outcome(Block b) {
  require(b != Block::None, "inferred_outcome: no blocker");
  return b == Block::Plus ? -1 : +1;
}

namespace {

std::size_t index_of(std::span<const int> outcome) {
  std::size_t idx = 0;
  for (int q : outcome) {
    require(q == 1 || q == -1, "outcome values must be +1 or -1");
    idx = (idx << 1U) | (q == -1 ? 1U : 0U);
  }
  return idx;
}

}  // namespace

JointProbTable::JointProbTable(std::vector<int> times, std::vector<double> probabilities,
                               std::vector<Source> provenance)
    : times_(std::move(times)), probs_(std::move(probabilities)), provenance_(std::move(provenance)) {
  require(!times_.empty() && times_.size() <= 3, "JointProbTable: order must be 1, 2 or 3");
  require(probs_.size() == (std::size_t{1} << times_.size()),
          "JointProbTable: entry count does not match order");
}

double JointProbTable::at(std::span<const int> outcome) const {
  require(outcome.size() == order(), "JointProbTable: outcome arity mismatch");
  return probs_[index_of(outcome)];
}

double JointProbTable::operator()(int q1) const {
  const std::array<int, 1> o{q1};
  return at(o);
}
double JointProbTable::operator()(int q1, int q2) const {
  const std::array<int, 2> o{q1, q2};
  return at(o);
}
double JointProbTable::operator()(int q1, int q2, int q3) const {
  const std::array<int, 3> o{q1, q2, q3};
  return at(o);
}

double JointProbTable::sum() const { return std::accumulate(probs_.begin(), probs_.end(), 0.0); }

std::vector<JointProbTable::Entry> JointProbTable::entries() const {
  std::vector<Entry> out;
  out.reserve(probs_.size());
  const std::size_t n = order();
  for (std::size_t idx = 0; idx < probs_.size(); ++idx) {
    std::vector<int> outcome(n);
    for (std::size_t k = 0; k < n; ++k) {
      const std::size_t bit = (idx >> (n - 1 - k)) & 1U;
      outcome[k] = bit != 0U ? -1 : 1;
    }
    out.push_back({std::move(outcome), probs_[idx]});
  }
  return out;
}

JointProbTable JointProbTable::marginalize_last() const {
  require(order() >= 2, "marginalize_last: needs at least two times");
  std::vector<double> reduced(probs_.size() / 2, 0.0);
  for (std::size_t idx = 0; idx < probs_.size(); ++idx) reduced[idx >> 1U] += probs_[idx];
  return {std::vector<int>(times_.begin(), times_.end() - 1), std::move(reduced), provenance_};
}

double JointProbTable::correlation() const {
  require(order() == 2, "correlation: needs a two-time table");
  return probs_[0] - probs_[1] - probs_[2] + probs_[3];
}

namespace {

struct RunShape {
  int run;
  std::vector<int> times;
};

std::optional<JointProbTable> assemble_run(const RunCounts& counts, const RunShape& shape) {
  std::vector<double> raw(std::size_t{1} << shape.times.size(), 0.0);
  std::vector<JointProbTable::Source> provenance;
  double total = 0.0;
  for (std::size_t slot = 0; slot < kSubRuns.size(); ++slot) {
    const SubRun& sr = kSubRuns[slot];
    if (sr.run != shape.run) continue;
    if (!counts.sub_runs[slot]) return std::nullopt;
    const ChannelCounts& c = *counts.sub_runs[slot];
    require(std::isfinite(c.plus) && std::isfinite(c.minus) && c.plus >= 0.0 && c.minus >= 0.0,
            "sub-run " + sr.label() + ": counts must be finite and nonnegative");

    std::vector<int> prefix;
    if (sr.blockers.t1 != Block::None) prefix.push_back(inferred_outcome(sr.blockers.t1));
    if (sr.blockers.t2 != Block::None) prefix.push_back(inferred_outcome(sr.blockers.t2));
    for (int q3 : {1, -1}) {
      std::vector<int> outcome = prefix;
      outcome.push_back(q3);
      raw[index_of(outcome)] += q3 == 1 ? c.plus : c.minus;
    }
    provenance.push_back({sr.blockers, c.plus + c.minus});
    total += c.plus + c.minus;
  }
  if (!(total > 0.0)) {
    fail(ErrorKind::Undefined,
         "run " + std::to_string(shape.run) + " has zero total weight; probabilities undefined");
  }
  for (double& p : raw) p /= total;
  return JointProbTable(shape.times, std::move(raw), std::move(provenance));
}

}  // namespace

ProbabilitySet assemble_probabilities(const RunCounts& counts) {
  ProbabilitySet set;
  set.p23 = assemble_run(counts, {1, {2, 3}});
  set.p13 = assemble_run(counts, {2, {1, 3}});
  set.p123 = assemble_run(counts, {3, {1, 2, 3}});
  if (set.p123) set.p12 = set.p123->marginalize_last();
  set.p3 = assemble_run(counts, {4, {3}});
  return set;
}

InequalityPoint evaluate_point(const ProbabilitySet& tables) {
  auto need = [](const std::optional<JointProbTable>& t, const char* what) -> const JointProbTable& {
    if (!t) fail(ErrorKind::InvalidArgument, std::string("missing ") + what);
    return *t;
  };
  const auto& p23 = need(tables.p23, "run 1 (t2,t3 table)");
  const auto& p13 = need(tables.p13, "run 2 (t1,t3 table)");
  const auto& p12 = need(tables.p12, "run 3 (t1,t2 table)");
  const auto& p3 = need(tables.p3, "run 4 (t3 table)");

  InequalityPoint v;
  v.q12 = p12.correlation();
  v.q23 = p23.correlation();
  v.q13 = p13.correlation();
  v.lgi = v.q12 + v.q23 - v.q13;
  v.wlgi = p13(-1, 1) - p12(-1, 1) - p23(-1, 1);
  v.nsit12 = std::abs(p23(1, 1) + p23(1, -1) - p12(1, 1) - p12(-1, 1));
  v.nsit23 = std::abs(p3(1) - p23(1, 1) - p23(-1, 1));
  v.nsit13 = std::abs(p3(1) - p13(1, 1) - p13(-1, 1));
  return v;
}

}  // namespace macroreal
