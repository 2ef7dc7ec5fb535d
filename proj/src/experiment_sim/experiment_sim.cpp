#include "macroreal/experiment_sim.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <random>
#include <string>

#include "macroreal/error.hpp"
#include "macroreal/seeding.hpp"

namespace macroreal::sim {

char channel_code(Channel c) {
  switch (c) {
    case Channel::Herald: return 'H';
    case Channel::Plus: return 'P';
    case Channel::Minus: return 'M';
  }
  return '?';
}

void SourceConfig::validate() const {
  auto nonneg = [](double x) { return std::isfinite(x) && x >= 0.0; };
  auto efficiency = [](double x) { return std::isfinite(x) && x > 0.0 && x <= 1.0; };
  require(nonneg(pair_rate), "source.pair_rate must be >= 0");
  require(std::isfinite(duration) && duration > 0.0, "source.duration must be > 0");
  require(duration * kPicosPerSecond < 9e18, "source.duration is too long for picosecond timestamps");
  require(std::isfinite(gamma) && gamma >= 0.0 && gamma < 1.0, "source.gamma must lie in [0,1)");
  require(efficiency(eta_herald), "source.eta_herald must lie in (0,1]");
  require(efficiency(eta1), "source.eta1 must lie in (0,1]");
  require(efficiency(eta2), "source.eta2 must lie in (0,1]");
  require(nonneg(dark_rate_h) && nonneg(dark_rate_p) && nonneg(dark_rate_m),
          "source dark rates must be >= 0");
  require(nonneg(jitter_sigma), "source.jitter_sigma must be >= 0");
  require(nonneg(base_delay), "source.base_delay must be >= 0");
  require(nonneg(arm_delay_tau), "source.arm_delay_tau must be >= 0");
}

std::int64_t SourceConfig::duration_ps() const {
  return static_cast<std::int64_t>(std::llround(duration * kPicosPerSecond));
}

double output_scale(const quantum::SetupParams& setup) {
  quantum::SetupParams coherent = setup;
  coherent.visibility = 1.0;
  double scale = 1.0;
  for (int arm : {1, -1}) {
    for (Block b : {Block::None, Block::Plus, Block::Minus}) {
      const auto o = quantum::arm_outputs(coherent, arm, b);
      scale = std::max(scale, o.plus + o.minus + o.lost);
    }
  }
  return scale;
}

namespace {

void add_dark_counts(std::mt19937_64& rng, double rate, double duration_s, std::int64_t span_ps,
                     std::vector<std::int64_t>& out) {
  if (rate <= 0.0) return;
  std::poisson_distribution<std::int64_t> count(rate * duration_s);
  std::uniform_int_distribution<std::int64_t> when(0, span_ps - 1);
  const std::int64_t n = count(rng);
  for (std::int64_t k = 0; k < n; ++k) out.push_back(when(rng));
}

void finish(std::vector<std::int64_t>& times) {
  std::sort(times.begin(), times.end());
  times.erase(std::unique(times.begin(), times.end()), times.end());
}

SubRunStreams generate_scaled(const SourceConfig& src, const quantum::SetupParams& setup,
                              const BlockerConfig& blockers, double scale) {
  src.validate();
  setup.validate();
  std::mt19937_64 rng(src.seed);
  const std::int64_t span = src.duration_ps();

  // Click probabilities per t1 arm, after the t2 blocker and the scale.
  struct ArmClick {
    bool open;
    double plus;
    double minus;
  };
  std::array<ArmClick, 2> arms{};
  for (int k = 0; k < 2; ++k) {
    const int arm = k == 0 ? 1 : -1;
    const Block here = arm == 1 ? Block::Plus : Block::Minus;
    if (blockers.t1 == here) continue;
    const auto o = quantum::arm_outputs(setup, arm, blockers.t2);
    arms[k] = {true, o.plus / scale * src.eta1, o.minus / scale * src.eta2};
  }

  SubRunStreams out;
  std::poisson_distribution<std::int64_t> pair_count(src.pair_rate * src.duration);
  std::uniform_int_distribution<std::int64_t> pair_time(0, span - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> jitter(0.0, src.jitter_sigma);

  const std::int64_t n_pairs = src.pair_rate > 0.0 ? pair_count(rng) : 0;
  for (std::int64_t n = 0; n < n_pairs; ++n) {
    const std::int64_t t = pair_time(rng);
    if (unit(rng) < src.eta_herald) out.herald.times.push_back(t);
    const int photons = unit(rng) < src.gamma ? 2 : 1;
    for (int p = 0; p < photons; ++p) {
      const int k = unit(rng) < setup.alpha_sq ? 0 : 1;
      const ArmClick& arm = arms[k];
      if (!arm.open) continue;
      const double u = unit(rng);
      std::vector<std::int64_t>* target = nullptr;
      if (u < arm.plus) {
        target = &out.plus.times;
      } else if (u < arm.plus + arm.minus) {
        target = &out.minus.times;
      } else {
        continue;
      }
      double click = static_cast<double>(t) + src.base_delay + (k == 1 ? src.arm_delay_tau : 0.0);
      if (src.jitter_sigma > 0.0) click += jitter(rng);
      const auto ps = static_cast<std::int64_t>(std::llround(click));
      if (ps >= 0 && ps < span) target->push_back(ps);
    }
  }

  add_dark_counts(rng, src.dark_rate_h, src.duration, span, out.herald.times);
  add_dark_counts(rng, src.dark_rate_p, src.duration, span, out.plus.times);
  add_dark_counts(rng, src.dark_rate_m, src.duration, span, out.minus.times);
  finish(out.herald.times);
  finish(out.plus.times);
  finish(out.minus.times);
  return out;
}

bool has_t2_blocker(std::size_t slot) { return kSubRuns.at(slot).blockers.t2 != Block::None; }

}  // namespace

SubRunStreams generate_sub_run(const SourceConfig& src, const quantum::SetupParams& setup,
                               const BlockerConfig& blockers) {
  return generate_scaled(src, setup, blockers, output_scale(setup));
}

ExperimentDataset::ExperimentDataset(SourceConfig src, quantum::SetupParams setup,
                                     ProtocolOptions options)
    : src_(src), setup_(setup), options_(options) {
  src_.validate();
  setup_.validate();
  require(options_.interference_iterations >= 1 && options_.non_interference_iterations >= 1,
          "iteration counts must be >= 1");
  if (options_.visibility_jitter) {
    const auto& v = *options_.visibility_jitter;
    require(std::isfinite(v.lo) && std::isfinite(v.hi) && v.lo >= 0.0 && v.lo <= v.hi && v.hi <= 1.0,
            "visibility jitter must satisfy 0 <= lo <= hi <= 1");
  }
  scale_ = output_scale(setup_);
}

std::size_t ExperimentDataset::iterations(std::size_t slot) const {
  return has_t2_blocker(slot) ? options_.non_interference_iterations
                              : options_.interference_iterations;
}

std::uint64_t ExperimentDataset::seed(std::size_t slot, std::size_t iteration) const {
  const SubRun& s = kSubRuns.at(slot);
  return derive_seed(src_.seed, {static_cast<std::uint64_t>(s.run),
                                 static_cast<std::uint64_t>(s.index), iteration});
}

double ExperimentDataset::visibility(std::size_t slot, std::size_t iteration) const {
  if (!options_.visibility_jitter) return setup_.visibility;
  const auto& v = *options_.visibility_jitter;
  std::mt19937_64 rng(derive_seed(seed(slot, iteration), {0x7669ULL}));
  return std::uniform_real_distribution<double>(v.lo, v.hi)(rng);
}

SubRunStreams ExperimentDataset::generate(std::size_t slot, std::size_t iteration) const {
  require(iteration < iterations(slot), "iteration index out of range");
  SourceConfig src = src_;
  src.seed = seed(slot, iteration);
  quantum::SetupParams setup = setup_;
  setup.visibility = visibility(slot, iteration);
  return generate_scaled(src, setup, kSubRuns.at(slot).blockers, scale_);
}

ExperimentDataset run_protocol(const SourceConfig& src, const quantum::SetupParams& setup,
                               const ProtocolOptions& options) {
  return ExperimentDataset(src, setup, options);
}

void write_timestamp_csv(const std::filesystem::path& path, const SubRunStreams& streams) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::Io, "cannot write " + path.string());
  out << "channel,time_ps\n";
  // Three-way merge; ties are written in H, P, M order.
  std::array<const TimestampStream*, 3> src{&streams.herald, &streams.plus, &streams.minus};
  std::array<std::size_t, 3> pos{};
  std::string line;
  for (;;) {
    int pick = -1;
    for (int k = 0; k < 3; ++k) {
      if (pos[k] >= src[k]->times.size()) continue;
      if (pick < 0 || src[k]->times[pos[k]] < src[pick]->times[pos[pick]]) pick = k;
    }
    if (pick < 0) break;
    out << channel_code(src[pick]->channel) << ',' << src[pick]->times[pos[pick]] << '\n';
    ++pos[pick];
  }
  if (!out) fail(ErrorKind::Io, "write failed for " + path.string());
}

SubRunStreams read_timestamp_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot read " + path.string());
  std::string line;
  if (!std::getline(in, line)) fail(ErrorKind::Config, path.string() + ": empty timestamp file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "channel,time_ps") {
    fail(ErrorKind::Config, path.string() + ": expected header 'channel,time_ps'");
  }
  SubRunStreams out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto where = path.string() + ":" + std::to_string(line_no);
    if (line.size() < 3 || line[1] != ',') fail(ErrorKind::Config, where + ": malformed row");
    std::int64_t t = 0;
    const char* first = line.data() + 2;
    const char* last = line.data() + line.size();
    auto [ptr, ec] = std::from_chars(first, last, t);
    if (ec != std::errc() || ptr != last || t < 0) {
      fail(ErrorKind::Config, where + ": time_ps must be a nonnegative integer");
    }
    switch (line[0]) {
      case 'H': out.herald.times.push_back(t); break;
      case 'P': out.plus.times.push_back(t); break;
      case 'M': out.minus.times.push_back(t); break;
      default: fail(ErrorKind::Config, where + ": channel must be H, P or M");
    }
  }
  for (auto* s : {&out.herald, &out.plus, &out.minus}) {
    if (!std::is_sorted(s->times.begin(), s->times.end())) {
      std::sort(s->times.begin(), s->times.end());
    }
    s->times.erase(std::unique(s->times.begin(), s->times.end()), s->times.end());
  }
  return out;
}

}  // namespace macroreal::sim
