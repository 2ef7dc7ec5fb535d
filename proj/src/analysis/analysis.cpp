#include "macroreal/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "macroreal/error.hpp"
#include "macroreal/parallel.hpp"
#include "macroreal/seeding.hpp"

namespace macroreal::analysis {

CoincidenceHistogram histogram(std::span<const std::int64_t> a, std::span<const std::int64_t> b,
                               std::int64_t bin_width, std::int64_t lo, std::int64_t hi) {
  require(bin_width > 0, "histogram: bin width must be positive");
  require(hi > lo && (hi - lo) % bin_width == 0, "histogram: range must be a whole number of bins");
  const auto n_bins = static_cast<std::size_t>((hi - lo) / bin_width);
  require(n_bins >= 3, "histogram: at least three bins are required");
  require(std::is_sorted(a.begin(), a.end()) && std::is_sorted(b.begin(), b.end()),
          "histogram: streams must be sorted");

  CoincidenceHistogram h{bin_width, lo, std::vector<std::uint64_t>(n_bins, 0)};
  std::size_t first = 0;
  for (const std::int64_t ta : a) {
    while (first < b.size() && b[first] - ta < lo) ++first;
    for (std::size_t j = first; j < b.size() && b[j] - ta < hi; ++j) {
      ++h.counts[static_cast<std::size_t>((b[j] - ta - lo) / bin_width)];
    }
  }
  return h;
}

namespace {

double median_bin(const CoincidenceHistogram& h) {
  std::vector<std::uint64_t> sorted = h.counts;
  const auto mid = sorted.begin() + static_cast<std::ptrdiff_t>(sorted.size() / 2);
  std::nth_element(sorted.begin(), mid, sorted.end());
  return static_cast<double>(*mid);
}

// Contiguous bins around `peak` at or above the flatline-corrected half maximum.
WindowSelection half_max_window(const CoincidenceHistogram& h, std::size_t peak, double flat) {
  const double top = static_cast<double>(h.counts[peak]);
  const double half = flat + (top - flat) / 2.0;
  std::size_t left = peak;
  while (left > 0 && static_cast<double>(h.counts[left - 1]) >= half) --left;
  std::size_t right = peak + 1;
  while (right < h.counts.size() && static_cast<double>(h.counts[right]) >= half) ++right;
  WindowSelection w;
  w.start = h.bin_start(left);
  w.end = h.bin_start(right);
  w.bin_width = h.bin_width;
  w.flatline_mean = flat;
  return w;
}

bool detectable(double top, double flat) { return top >= flat + 5.0 * std::sqrt(flat + 1.0); }

}  // namespace

double flatline_mean(const CoincidenceHistogram& h, const WindowSelection& w) {
  const double centre = 0.5 * static_cast<double>(w.start + w.end);
  const double reach = 3.0 * static_cast<double>(w.end - w.start);
  double sum = 0.0;
  std::size_t used = 0;
  for (std::size_t k = 0; k < h.counts.size(); ++k) {
    const double mid = static_cast<double>(h.bin_start(k)) + 0.5 * static_cast<double>(h.bin_width);
    if (std::abs(mid - centre) > reach) {
      sum += static_cast<double>(h.counts[k]);
      ++used;
    }
  }
  return used > 0 ? sum / static_cast<double>(used) : median_bin(h);
}

WindowSelection select_window(const CoincidenceHistogram& h) {
  require(h.counts.size() >= 3, "select_window: histogram needs at least three bins");
  const auto peak = static_cast<std::size_t>(
      std::max_element(h.counts.begin(), h.counts.end()) - h.counts.begin());
  const double top = static_cast<double>(h.counts[peak]);

  double flat = median_bin(h);
  if (!detectable(top, flat)) fail(ErrorKind::NoPeak, "no coincidence peak above the flatline");
  WindowSelection w = half_max_window(h, peak, flat);
  flat = flatline_mean(h, w);
  if (!detectable(top, flat)) fail(ErrorKind::NoPeak, "no coincidence peak above the flatline");
  w = half_max_window(h, peak, flat);
  w.flatline_mean = flatline_mean(h, w);
  return w;
}

namespace {

CoincidenceCount subtract(double raw, double flat, const WindowSelection& w) {
  CoincidenceCount c;
  c.raw = raw;
  c.background = flat * static_cast<double>(w.width_bins());
  c.corrected = raw - c.background;
  if (c.corrected < 0.0) {
    c.corrected = 0.0;
    c.clamped = true;
  }
  return c;
}

}  // namespace

CoincidenceCount count_in_window(std::span<const std::int64_t> a, std::span<const std::int64_t> b,
                                 const WindowSelection& w) {
  require(w.start < w.end && w.bin_width > 0, "window must have start < end");
  std::uint64_t raw = 0;
  std::size_t first = 0;
  for (const std::int64_t ta : a) {
    while (first < b.size() && b[first] - ta < w.start) ++first;
    for (std::size_t j = first; j < b.size() && b[j] - ta < w.end; ++j) ++raw;
  }
  return subtract(static_cast<double>(raw), w.flatline_mean, w);
}

double corrected_coincidences(std::span<const std::int64_t> a, std::span<const std::int64_t> b,
                              const WindowSelection& w) {
  return count_in_window(a, b, w).corrected;
}

CoincidenceCount count_in_window(const CoincidenceHistogram& h, const WindowSelection& w,
                                 double flatline) {
  require(w.bin_width == h.bin_width && (w.start - h.origin) % h.bin_width == 0,
          "window is not aligned with the histogram bins");
  double raw = 0.0;
  for (std::size_t k = 0; k < h.counts.size(); ++k) {
    const std::int64_t s = h.bin_start(k);
    if (s >= w.start && s < w.end) raw += static_cast<double>(h.counts[k]);
  }
  return subtract(raw, flatline, w);
}

RunCounts IterationCounts::mean_counts() const {
  RunCounts out;
  for (std::size_t slot = 0; slot < sub_runs.size(); ++slot) {
    const auto& its = sub_runs[slot];
    if (its.empty()) continue;
    ChannelCounts m;
    for (const auto& c : its) {
      m.plus += c.plus;
      m.minus += c.minus;
    }
    m.plus /= static_cast<double>(its.size());
    m.minus /= static_cast<double>(its.size());
    out.sub_runs[slot] = m;
  }
  return out;
}

std::size_t IterationCounts::min_iterations() const {
  std::size_t n = sub_runs[0].size();
  for (const auto& its : sub_runs) n = std::min(n, its.size());
  return n;
}

StreamSource stream_source(const sim::ExperimentDataset& dataset) {
  StreamSource s;
  for (std::size_t slot = 0; slot < s.iterations.size(); ++slot) {
    s.iterations[slot] = dataset.iterations(slot);
  }
  s.load = [&dataset](std::size_t slot, std::size_t it) { return dataset.generate(slot, it); };
  return s;
}

IterationCounts count_coincidences(const StreamSource& source, const HistogramOptions& options,
                                   unsigned threads) {
  require(static_cast<bool>(source.load), "stream source has no loader");
  require(options.half_range > 0, "histogram half range must be positive");
  const std::int64_t lo = options.delay_center - options.half_range;
  const std::int64_t hi = options.delay_center + options.half_range;

  struct Task {
    std::size_t slot;
    std::size_t iteration;
  };
  std::vector<Task> tasks;
  for (std::size_t slot = 0; slot < source.iterations.size(); ++slot) {
    for (std::size_t it = 0; it < source.iterations[slot]; ++it) tasks.push_back({slot, it});
  }

  // [task][channel]
  std::vector<std::array<CoincidenceHistogram, 2>> hists(tasks.size());
  parallel_for(tasks.size(), resolve_threads(threads), [&](std::size_t k) {
    const auto streams = source.load(tasks[k].slot, tasks[k].iteration);
    hists[k][0] = histogram(streams.herald.times, streams.plus.times, options.bin_width, lo, hi);
    hists[k][1] = histogram(streams.herald.times, streams.minus.times, options.bin_width, lo, hi);
  });

  IterationCounts out;
  std::array<std::optional<CoincidenceHistogram>, 2> channel_total;
  std::size_t k = 0;
  for (std::size_t slot = 0; slot < source.iterations.size(); ++slot) {
    const std::size_t n = source.iterations[slot];
    for (std::size_t ch = 0; ch < 2 && n > 0; ++ch) {
      CoincidenceHistogram total = hists[k][ch];
      for (std::size_t it = 1; it < n; ++it) {
        const auto& c = hists[k + it][ch].counts;
        std::transform(total.counts.begin(), total.counts.end(), c.begin(), total.counts.begin(),
                       std::plus<>());
      }
      try {
        out.windows[slot][ch] = select_window(total);
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::NoPeak) throw;
        out.warnings.push_back("sub-run " + kSubRuns[slot].label() + (ch == 0 ? " plus" : " minus") +
                               ": no coincidence peak, counted as zero");
        continue;
      }
      auto& grand = channel_total[ch];
      if (!grand) {
        grand = std::move(total);
      } else {
        std::transform(grand->counts.begin(), grand->counts.end(), total.counts.begin(), grand->counts.begin(),
                       std::plus<>());
      }
    }
    k += n;
  }
  for (std::size_t ch = 0; ch < 2; ++ch) {
    if (!channel_total[ch]) continue;
    const WindowSelection shared = select_window(*channel_total[ch]);
    for (auto& w : out.windows) {
      if (w[ch]) w[ch] = shared;
    }
  }

  k = 0;
  for (std::size_t slot = 0; slot < source.iterations.size(); ++slot) {
    const std::size_t n = source.iterations[slot];
    std::size_t clamped = 0;
    out.sub_runs[slot].resize(n);
    for (std::size_t it = 0; it < n; ++it) {
      ChannelCounts& c = out.sub_runs[slot][it];
      for (std::size_t ch = 0; ch < 2; ++ch) {
        const auto& w = out.windows[slot][ch];
        if (!w) continue;
        const auto& h = hists[k + it][ch];
        const auto count = count_in_window(h, *w, flatline_mean(h, *w));
        if (count.clamped) ++clamped;
        (ch == 0 ? c.plus : c.minus) = count.corrected;
      }
    }
    if (clamped > 0) {
      out.warnings.push_back("sub-run " + kSubRuns[slot].label() + ": " + std::to_string(clamped) +
                             " negative corrected counts clamped to zero");
    }
    k += n;
  }
  return out;
}

ProbabilitySet joint_probs_from_runs(const IterationCounts& counts) {
  return assemble_probabilities(counts.mean_counts());
}

InequalityPoint evaluate_inequalities(const ProbabilitySet& tables) { return evaluate_point(tables); }

BootstrapResult bootstrap_sdm(std::span<const double> samples, std::size_t iterations,
                              std::size_t resamples, std::uint64_t seed, unsigned threads) {
  require(iterations >= 1 && iterations <= samples.size(),
          "bootstrap: need 1 <= I <= number of samples");
  require(resamples >= 1, "bootstrap: K must be >= 1");

  constexpr std::size_t kChunk = 1024;
  std::vector<double> means(resamples);
  const std::size_t chunks = (resamples + kChunk - 1) / kChunk;
  parallel_for(chunks, resolve_threads(threads), [&](std::size_t c) {
    std::mt19937_64 rng(derive_seed(seed, {c}));
    std::uniform_int_distribution<std::size_t> pick(0, samples.size() - 1);
    const std::size_t end = std::min(resamples, (c + 1) * kChunk);
    for (std::size_t r = c * kChunk; r < end; ++r) {
      double sum = 0.0;
      for (std::size_t i = 0; i < iterations; ++i) sum += samples[pick(rng)];
      means[r] = sum / static_cast<double>(iterations);
    }
  });

  BootstrapResult out;
  out.iterations = iterations;
  out.resamples = resamples;
  out.mean = std::accumulate(means.begin(), means.end(), 0.0) / static_cast<double>(resamples);
  if (resamples > 1) {
    double ss = 0.0;
    for (double m : means) ss += (m - out.mean) * (m - out.mean);
    out.sd = std::sqrt(ss / static_cast<double>(resamples - 1));
  }
  if (out.mean != 0.0) out.sd_over_mean = out.sd / std::abs(out.mean);
  return out;
}

namespace {

// Statistics of one run evaluated on one iteration per sub-run, ordered
// correlation, WLGI probability, then the NSIT terms.
constexpr std::size_t kStats = 4;
using Stats = std::array<double, kStats>;

double total_of(std::span<const ChannelCounts> c) {
  double t = 0.0;
  for (const auto& x : c) t += x.plus + x.minus;
  if (!(t > 0.0)) fail(ErrorKind::Undefined, "run total is zero; probabilities undefined");
  return t;
}

// run 1: <Q2Q3>, P23(-,+), P23(+,+)+P23(+,-), P23(+,+)+P23(-,+)
Stats run1_stats(std::span<const ChannelCounts> c) {
  const double t = total_of(c);
  return {(c[0].plus - c[0].minus - c[1].plus + c[1].minus) / t, c[1].plus / t,
          (c[0].plus + c[0].minus) / t, (c[0].plus + c[1].plus) / t};
}

// run 2: <Q1Q3>, P13(-,+), P13(+,+)+P13(-,+)
Stats run2_stats(std::span<const ChannelCounts> c) {
  const double t = total_of(c);
  return {(c[0].plus - c[0].minus - c[1].plus + c[1].minus) / t, c[1].plus / t,
          (c[0].plus + c[1].plus) / t, 0.0};
}

// run 3 marginalized over t3: <Q1Q2>, P12(-,+), P12(+,+)+P12(-,+)
Stats run3_stats(std::span<const ChannelCounts> c) {
  const double t = total_of(c);
  std::array<double, 4> s{};
  for (std::size_t k = 0; k < 4; ++k) s[k] = c[k].plus + c[k].minus;
  return {(s[0] - s[1] - s[2] + s[3]) / t, s[2] / t, (s[0] + s[2]) / t, 0.0};
}

// run 4: P3(+)
Stats run4_stats(std::span<const ChannelCounts> c) {
  const double t = total_of(c);
  return {c[0].plus / t, 0.0, 0.0, 0.0};
}

struct Moments {
  double n = 0.0;
  Stats mean{};
  Stats m2{};

  void add(const Stats& x) {
    n += 1.0;
    for (std::size_t i = 0; i < kStats; ++i) {
      const double d = x[i] - mean[i];
      mean[i] += d / n;
      m2[i] += d * (x[i] - mean[i]);
    }
  }
  void merge(const Moments& o) {
    if (o.n == 0.0) return;
    const double total = n + o.n;
    for (std::size_t i = 0; i < kStats; ++i) {
      const double d = o.mean[i] - mean[i];
      mean[i] += d * o.n / total;
      m2[i] += o.m2[i] + d * d * n * o.n / total;
    }
    n = total;
  }
  [[nodiscard]] Stats sd() const {
    Stats out{};
    if (n > 0.0) {
      for (std::size_t i = 0; i < kStats; ++i) out[i] = std::sqrt(std::max(0.0, m2[i] / n));
    }
    return out;
  }
};

struct Spread {
  Stats sd{};
  std::size_t combinations = 0;
  bool sampled = false;
};

using StatFn = Stats (*)(std::span<const ChannelCounts>);

Spread combination_spread(const IterationCounts& counts, std::size_t first_slot,
                          std::size_t n_slots, StatFn fn, std::uint64_t run_id,
                          const ErrorOptions& options) {
  std::vector<std::size_t> sizes(n_slots);
  double product = 1.0;
  for (std::size_t k = 0; k < n_slots; ++k) {
    sizes[k] = counts.sub_runs[first_slot + k].size();
    require(sizes[k] >= 2, "error distributions need at least two iterations per sub-run");
    product *= static_cast<double>(sizes[k]);
  }
  const bool sample =
      options.force_sampling || product > static_cast<double>(options.exhaustive_limit);
  const std::size_t total =
      sample ? options.sampled_draws : static_cast<std::size_t>(product);
  require(total >= 1, "error distributions need at least one draw");

  constexpr std::size_t kChunk = 4096;
  const std::size_t chunks = (total + kChunk - 1) / kChunk;
  std::vector<Moments> partial(chunks);
  parallel_for(chunks, resolve_threads(options.threads), [&](std::size_t c) {
    std::mt19937_64 rng(derive_seed(options.seed, {run_id, c}));
    std::array<ChannelCounts, 4> pick{};
    const std::size_t end = std::min(total, (c + 1) * kChunk);
    for (std::size_t idx = c * kChunk; idx < end; ++idx) {
      std::size_t rest = idx;
      for (std::size_t k = 0; k < n_slots; ++k) {
        std::size_t it;
        if (sample) {
          it = std::uniform_int_distribution<std::size_t>(0, sizes[k] - 1)(rng);
        } else {
          it = rest % sizes[k];
          rest /= sizes[k];
        }
        pick[k] = counts.sub_runs[first_slot + k][it];
      }
      partial[c].add(fn(std::span<const ChannelCounts>(pick.data(), n_slots)));
    }
  });

  Moments all;
  for (const auto& m : partial) all.merge(m);
  return {all.sd(), static_cast<std::size_t>(product), sample};
}

}  // namespace

ErrorDistributions error_distributions(const IterationCounts& counts, const ErrorOptions& options) {
  const Spread r1 = combination_spread(counts, 0, 2, run1_stats, 1, options);
  const Spread r2 = combination_spread(counts, 2, 2, run2_stats, 2, options);
  const Spread r3 = combination_spread(counts, 4, 4, run3_stats, 3, options);
  const Spread r4 = combination_spread(counts, 8, 1, run4_stats, 4, options);

  ErrorDistributions e;
  e.run23 = {r1.sd[0], r1.sd[1], r1.combinations, r1.sampled};
  e.run13 = {r2.sd[0], r2.sd[1], r2.combinations, r2.sampled};
  e.run12 = {r3.sd[0], r3.sd[1], r3.combinations, r3.sampled};
  e.lgi_delta = e.run12.correlation + e.run23.correlation + e.run13.correlation;
  e.wlgi_delta = e.run12.wlgi_term + e.run23.wlgi_term + e.run13.wlgi_term;
  e.nsit12_delta = r1.sd[2] + r3.sd[2];
  e.nsit23_delta = r4.sd[0] + r1.sd[3];
  e.nsit13_delta = r4.sd[0] + r2.sd[2];
  return e;
}

std::vector<IterationPoint> per_iteration_points(const IterationCounts& counts) {
  std::vector<IterationPoint> out;
  const std::size_t n = counts.min_iterations();
  for (std::size_t it = 0; it < n; ++it) {
    RunCounts rc;
    for (std::size_t slot = 0; slot < rc.sub_runs.size(); ++slot) {
      rc.sub_runs[slot] = counts.sub_runs[slot][it];
    }
    try {
      out.push_back({it, evaluate_point(assemble_probabilities(rc))});
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::Undefined) throw;
    }
  }
  return out;
}

ResultReport build_report(const IterationCounts& counts, const ErrorOptions& options) {
  ResultReport r;
  r.tables = joint_probs_from_runs(counts);
  const InequalityPoint p = evaluate_inequalities(r.tables);
  r.lgi.mean = p.lgi;
  r.wlgi.mean = p.wlgi;
  r.nsit12.mean = p.nsit12;
  r.nsit23.mean = p.nsit23;
  r.nsit13.mean = p.nsit13;
  r.q12.mean = p.q12;
  r.q23.mean = p.q23;
  r.q13.mean = p.q13;
  for (std::size_t slot = 0; slot < r.iterations.size(); ++slot) {
    r.iterations[slot] = counts.sub_runs[slot].size();
  }
  r.warnings = counts.warnings;
  if (counts.min_iterations() >= 2) {
    const ErrorDistributions e = error_distributions(counts, options);
    r.errors = e;
    r.lgi.delta = e.lgi_delta;
    r.wlgi.delta = e.wlgi_delta;
    r.nsit12.delta = e.nsit12_delta;
    r.nsit23.delta = e.nsit23_delta;
    r.nsit13.delta = e.nsit13_delta;
    r.q12.delta = e.run12.correlation;
    r.q23.delta = e.run23.correlation;
    r.q13.delta = e.run13.correlation;
  } else {
    r.warnings.push_back("fewer than two iterations per sub-run: error ranges not computed");
  }
  return r;
}

}  // namespace macroreal::analysis
