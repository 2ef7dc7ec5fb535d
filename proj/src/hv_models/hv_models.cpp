#include "macroreal/hv_models.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <vector>

#include "macroreal/error.hpp"
#include "macroreal/optim.hpp"
#include "macroreal/parallel.hpp"
#include "macroreal/seeding.hpp"

namespace macroreal::hv {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

std::size_t slot(Subspace s, int index) {
  require(index >= 1 && index <= 8, "hidden-variable index must be 1..8");
  return static_cast<std::size_t>(s) * kOutcomes + static_cast<std::size_t>(index - 1);
}

void require_eta(double eta) {
  require(std::isfinite(eta) && eta > 0.0 && eta <= 1.0, "efficiency must lie in (0,1]");
}

// Numerators and denominators of the six run ratios.
struct Ratios {
  std::array<double, 6> num{};
  std::array<double, 6> den{};
  double wlgi_num_13 = 0.0;  // (-,+) at (t1,t3)
  double wlgi_num_12 = 0.0;  // (-,+) at (t1,t2)
  double wlgi_num_23 = 0.0;  // (-,+) at (t2,t3)
};

Ratios ratios(const HVWeights& w) {
  const auto& v = w.values;
  auto blk = [&](Subspace s, std::size_t i) { return v[static_cast<std::size_t>(s) * kOutcomes + i]; };
  std::array<double, 8> acdp{}, bcds{}, cp{}, bq{}, bs{}, ap{}, cs{}, aq{};
  double sum_a = 0, sum_b = 0, sum_c = 0, sum_d = 0;
  for (std::size_t i = 0; i < 8; ++i) {
    const double q = blk(Subspace::Q, i), p = blk(Subspace::P, i), s = blk(Subspace::S, i);
    const double a = blk(Subspace::A, i), b = blk(Subspace::B, i), c = blk(Subspace::C, i),
                 d = blk(Subspace::D, i);
    acdp[i] = a + c + d + p;
    bcds[i] = b + c + d + s;
    cp[i] = c + p;
    bq[i] = b + q;
    bs[i] = b + s;
    ap[i] = a + p;
    cs[i] = c + s;
    aq[i] = a + q;
    sum_a += a;
    sum_b += b;
    sum_c += c;
    sum_d += d;
  }
  auto sum = [](const std::array<double, 8>& x, std::initializer_list<std::size_t> idx) {
    double t = 0;
    for (std::size_t i : idx) t += x[i - 1];
    return t;
  };

  Ratios r;
  r.num[0] = sum(acdp, {1, 2}) - sum(acdp, {3, 4});
  r.den[0] = sum_a + sum_d + sum(cp, {1, 2, 3, 4}) + sum(bq, {5, 6, 7, 8});
  r.num[1] = sum(acdp, {7, 8}) - sum(acdp, {5, 6});
  r.den[1] = sum_a + sum_d + sum(cp, {5, 6, 7, 8}) + sum(bq, {1, 2, 3, 4});
  r.num[2] = sum(bcds, {1, 5}) - sum(bcds, {2, 6});
  r.den[2] = sum_c + sum_d + sum(bs, {1, 2, 5, 6}) + sum(ap, {3, 4, 7, 8});
  r.num[3] = sum(bcds, {4, 8}) - sum(bcds, {3, 7});
  r.den[3] = sum_c + sum_d + sum(bs, {3, 4, 7, 8}) + sum(ap, {1, 2, 5, 6});
  r.num[4] = sum(bcds, {1, 3}) - sum(bcds, {2, 4});
  r.den[4] = sum_b + sum_d + sum(cs, {1, 2, 3, 4}) + sum(aq, {5, 6, 7, 8});
  r.num[5] = sum(bcds, {6, 8}) - sum(bcds, {5, 7});
  r.den[5] = sum_b + sum_d + sum(cs, {5, 6, 7, 8}) + sum(aq, {1, 2, 3, 4});
  r.wlgi_num_13 = sum(bcds, {5, 7});
  r.wlgi_num_12 = sum(acdp, {5, 6});
  r.wlgi_num_23 = sum(bcds, {3, 7});
  return r;
}

// Objective values with -inf for an empty run.
double lgi_or_neginf(const HVWeights& w) {
  const Ratios r = ratios(w);
  for (double d : r.den) {
    if (!(d > 0.0)) return kNegInf;
  }
  return r.num[0] / r.den[0] + r.num[1] / r.den[1] + r.num[2] / r.den[2] + r.num[3] / r.den[3] -
         r.num[4] / r.den[4] - r.num[5] / r.den[5];
}

double wlgi_or_neginf(const HVWeights& w) {
  const Ratios r = ratios(w);
  const double d13 = r.den[5], d12 = r.den[1], d23 = r.den[3];
  if (!(d13 > 0.0) || !(d12 > 0.0) || !(d23 > 0.0)) return kNegInf;
  return r.wlgi_num_13 / d13 - r.wlgi_num_12 / d12 - r.wlgi_num_23 / d23;
}

}  // namespace

std::array<int, 3> outcome_triple(int index) {
  require(index >= 1 && index <= 8, "outcome index must be 1..8");
  const int bits = index - 1;
  return {(bits & 4) != 0 ? -1 : 1, (bits & 2) != 0 ? -1 : 1, (bits & 1) != 0 ? -1 : 1};
}

double& HVWeights::at(Subspace s, int index) { return values[slot(s, index)]; }
double HVWeights::at(Subspace s, int index) const { return values[slot(s, index)]; }

double HVWeights::block_sum(Subspace s) const {
  const auto begin = values.begin() + static_cast<std::ptrdiff_t>(static_cast<std::size_t>(s) * kOutcomes);
  return std::accumulate(begin, begin + static_cast<std::ptrdiff_t>(kOutcomes), 0.0);
}

double HVWeights::total() const { return std::accumulate(values.begin(), values.end(), 0.0); }

std::array<double, 3> HVWeights::efficiency_sums() const {
  const double q = block_sum(Subspace::Q), p = block_sum(Subspace::P), s = block_sum(Subspace::S);
  const double a = block_sum(Subspace::A), b = block_sum(Subspace::B), c = block_sum(Subspace::C),
               d = block_sum(Subspace::D);
  return {p + a + b + d, q + a + c + d, s + b + c + d};
}

bool HVWeights::feasible(double eta, double tol) const {
  for (double x : values) {
    if (!(x >= 0.0)) return false;
  }
  if (total() > 1.0 + tol) return false;
  for (double s : efficiency_sums()) {
    if (std::abs(s - eta) > tol) return false;
  }
  return true;
}

double lgi_detectors_value(const HVWeights& w) {
  const double v = lgi_or_neginf(w);
  if (v == kNegInf) fail(ErrorKind::Degenerate, "LGI expression has a zero denominator");
  return v;
}

double wlgi_detectors_value(const HVWeights& w) {
  const double v = wlgi_or_neginf(w);
  if (v == kNegInf) fail(ErrorKind::Degenerate, "WLGI expression has a zero denominator");
  return v;
}

double closed_form_bound(Inequality which, double eta) {
  require_eta(eta);
  if (which == Inequality::LGI) return eta < 2.0 / 3.0 ? 8.0 / 3.0 : 2.0 / eta - eta;
  return eta < 2.0 / 3.0 ? 1.0 : (1.0 - eta) / (2.0 * eta - 1.0);
}

namespace {

using Raw = std::array<double, kWeights>;

// Maps an unconstrained nonnegative vector onto the feasible set for eta:
// a, b, c, d are scaled so no efficiency sum exceeds eta, then the q, p and
// s blocks take the remainders, keeping their own shape.
class Projector {
 public:
  Projector(double eta, const std::optional<std::array<bool, kWeights>>& support)
      : eta_(eta) {
    allowed_.fill(true);
    if (support) allowed_ = *support;
  }

  [[nodiscard]] bool allowed(std::size_t k) const { return allowed_[k]; }

  bool operator()(const Raw& raw, HVWeights& out) const {
    Raw x{};
    for (std::size_t k = 0; k < kWeights; ++k) x[k] = allowed_[k] ? std::max(0.0, raw[k]) : 0.0;
    auto bsum = [&](Subspace s) {
      double t = 0;
      for (std::size_t i = 0; i < kOutcomes; ++i) t += x[static_cast<std::size_t>(s) * kOutcomes + i];
      return t;
    };
    const double a = bsum(Subspace::A), b = bsum(Subspace::B), c = bsum(Subspace::C),
                 d = bsum(Subspace::D);
    // Efficiency sums excluding the fill blocks: p-sum, q-sum, s-sum.
    const std::array<double, 3> partial{a + b + d, a + c + d, b + c + d};
    const std::array<Subspace, 3> fill{Subspace::P, Subspace::Q, Subspace::S};

    bool fill_missing = false;
    for (Subspace f : fill) fill_missing = fill_missing || !any_allowed(f);
    const double peak = *std::max_element(partial.begin(), partial.end());
    double scale = 1.0;
    if (peak > eta_ || (fill_missing && peak > 0.0)) scale = eta_ / peak;
    if (scale != 1.0) {
      for (Subspace s : {Subspace::A, Subspace::B, Subspace::C, Subspace::D}) {
        for (std::size_t i = 0; i < kOutcomes; ++i) x[static_cast<std::size_t>(s) * kOutcomes + i] *= scale;
      }
    }

    for (std::size_t f = 0; f < 3; ++f) {
      const double remainder = eta_ - partial[f] * scale;
      const std::size_t base = static_cast<std::size_t>(fill[f]) * kOutcomes;
      double shape = 0;
      for (std::size_t i = 0; i < kOutcomes; ++i) shape += x[base + i];
      if (remainder <= 1e-12 * eta_) {
        for (std::size_t i = 0; i < kOutcomes; ++i) x[base + i] = 0.0;
        continue;
      }
      if (shape > 0.0) {
        for (std::size_t i = 0; i < kOutcomes; ++i) x[base + i] *= remainder / shape;
        continue;
      }
      std::size_t slots = 0;
      for (std::size_t i = 0; i < kOutcomes; ++i) slots += allowed_[base + i] ? 1 : 0;
      if (slots == 0) return false;
      for (std::size_t i = 0; i < kOutcomes; ++i) {
        x[base + i] = allowed_[base + i] ? remainder / static_cast<double>(slots) : 0.0;
      }
    }

    out.values = x;
    return out.total() <= 1.0 + 1e-12;
  }

 private:
  [[nodiscard]] bool any_allowed(Subspace s) const {
    for (std::size_t i = 0; i < kOutcomes; ++i) {
      if (allowed_[static_cast<std::size_t>(s) * kOutcomes + i]) return true;
    }
    return false;
  }

  double eta_;
  std::array<bool, kWeights> allowed_{};
};

struct Candidate {
  double value = kNegInf;
  HVWeights weights;
};

using Evaluator = double (*)(const HVWeights&);

// Pattern search on the raw coordinates: single-coordinate steps, steps that
// zero a coordinate, and pairwise transfers, with step halving.
Candidate pattern_search(Raw x, const Projector& project, Evaluator objective,
                         std::size_t budget) {
  std::size_t evaluations = 0;
  auto value_of = [&](const Raw& r) {
    ++evaluations;
    HVWeights trial;
    if (!project(r, trial)) return kNegInf;
    return objective(trial);
  };
  double fx = value_of(x);
  if (fx == kNegInf) return {};

  std::vector<std::size_t> active;
  for (std::size_t k = 0; k < kWeights; ++k) {
    if (project.allowed(k)) active.push_back(k);
  }
  double scale = 0.0;
  for (double v : x) scale = std::max(scale, v);
  double h = std::max(0.25 * scale, 1e-3);

  while (h > 1e-11 && evaluations < budget) {
    bool improved = false;
    for (std::size_t k : active) {
      for (double step : {h, -h}) {
        Raw y = x;
        y[k] = std::max(0.0, x[k] + step);
        if (y[k] == x[k]) continue;
        const double fy = value_of(y);
        if (fy > fx + 1e-14) {
          x = y;
          fx = fy;
          improved = true;
          break;
        }
      }
      if (x[k] > 0.0 && x[k] <= 4 * h) {
        Raw y = x;
        y[k] = 0.0;
        const double fy = value_of(y);
        if (fy > fx + 1e-14) {
          x = y;
          fx = fy;
          improved = true;
        }
      }
    }
    if (!improved) {
      for (std::size_t i : active) {
        if (x[i] <= 0.0) continue;
        for (std::size_t j : active) {
          if (i == j) continue;
          Raw y = x;
          const double moved = std::min(h, x[i]);
          y[i] -= moved;
          y[j] += moved;
          const double fy = value_of(y);
          if (fy > fx + 1e-14) {
            x = y;
            fx = fy;
            improved = true;
            break;
          }
        }
      }
    }
    if (!improved) h *= 0.5;
  }
  Candidate best;
  project(x, best.weights);
  best.value = fx;
  return best;
}

std::vector<Raw> witness_seeds(Inequality which, double eta) {
  std::vector<Raw> seeds;
  auto put = [](Raw& r, Subspace s, int i, double v) { r[slot(s, i)] = v; };
  if (1.5 * eta <= 1.0) {
    Raw r{};
    put(r, Subspace::A, 7, eta / 2);
    put(r, Subspace::B, 5, eta / 2);
    put(r, Subspace::C, 1, eta / 2);
    seeds.push_back(r);
  }
  if (eta >= 2.0 / 3.0) {
    Raw r{};
    if (which == Inequality::LGI) {
      put(r, Subspace::A, 1, 1 - eta);
      put(r, Subspace::B, 4, 1 - eta);
    } else {
      put(r, Subspace::A, 7, 1 - eta);
      put(r, Subspace::B, 5, 1 - eta);
    }
    put(r, Subspace::C, 1, 1 - eta);
    put(r, Subspace::D, 1, 3 * eta - 2);
    seeds.push_back(r);
  }
  return seeds;
}

Raw random_sparse_start(double eta, const Projector& project, std::mt19937_64& rng) {
  std::vector<std::size_t> slots;
  for (std::size_t k = 0; k < kWeights; ++k) {
    if (project.allowed(k)) slots.push_back(k);
  }
  std::uniform_int_distribution<std::size_t> count(1, std::min<std::size_t>(6, slots.size()));
  std::uniform_int_distribution<std::size_t> pick(0, slots.size() - 1);
  std::uniform_real_distribution<double> amount(0.0, eta);
  for (int attempt = 0; attempt < 200; ++attempt) {
    Raw r{};
    const std::size_t n = count(rng);
    for (std::size_t j = 0; j < n; ++j) r[slots[pick(rng)]] += amount(rng);
    HVWeights w;
    if (project(r, w)) return r;
  }
  return Raw{};
}

BoundCertificate maximize(Inequality which, double eta, const SearchOptions& options) {
  require_eta(eta);
  const Projector project(eta, options.support);
  const Evaluator objective = which == Inequality::LGI ? &lgi_or_neginf : &wlgi_or_neginf;

  std::vector<Raw> starts;
  if (!options.support) starts = witness_seeds(which, eta);
  const std::size_t seeded = starts.size();
  starts.resize(seeded + options.random_starts);

  std::vector<Candidate> results(starts.size());
  parallel_for(starts.size(), resolve_threads(options.threads), [&](std::size_t k) {
    Raw start = starts[k];
    if (k >= seeded) {
      std::mt19937_64 rng(derive_seed(options.seed, {static_cast<std::uint64_t>(which), k}));
      start = random_sparse_start(eta, project, rng);
    }
    results[k] = pattern_search(start, project, objective, options.evaluation_budget);
  });

  std::size_t best = 0;
  for (std::size_t k = 1; k < results.size(); ++k) {
    if (results[k].value > results[best].value) best = k;
  }
  if (results.empty() || results[best].value == kNegInf) {
    fail(ErrorKind::NonConvergence, "hidden-variable search found no feasible point");
  }

  BoundCertificate cert;
  cert.inequality = which;
  cert.eta = eta;
  cert.bound = results[best].value;
  cert.witness = results[best].weights;
  cert.formula_value = closed_form_bound(which, eta);
  cert.exceeds_formula = cert.bound > cert.formula_value + 1e-4;
  return cert;
}

}  // namespace

BoundCertificate maximize_lgi_detectors(double eta, const SearchOptions& options) {
  return maximize(Inequality::LGI, eta, options);
}

BoundCertificate maximize_wlgi_detectors(double eta, const SearchOptions& options) {
  return maximize(Inequality::WLGI, eta, options);
}

double critical_efficiency(Inequality which) {
  if (which == Inequality::LGI) {
    return optim::bisect([](double eta) { return 2.0 / eta - eta - 1.5; }, 2.0 / 3.0, 1.0, 1e-7);
  }
  return optim::bisect([](double eta) { return (1.0 - eta) / (2.0 * eta - 1.0) - 0.4034; },
                       2.0 / 3.0, 1.0, 1e-7);
}

BoundCertificate blocker_setup_bound(Inequality which, double eta) {
  require_eta(eta);
  auto per_triple = [which](const std::array<int, 3>& q) {
    if (which == Inequality::LGI) return double(q[0] * q[1] + q[1] * q[2] - q[0] * q[2]);
    const double p13 = (q[0] == -1 && q[2] == 1) ? 1.0 : 0.0;
    const double p12 = (q[0] == -1 && q[1] == 1) ? 1.0 : 0.0;
    const double p23 = (q[1] == -1 && q[2] == 1) ? 1.0 : 0.0;
    return p13 - p12 - p23;
  };

  int best_index = 1;
  double best = -std::numeric_limits<double>::infinity();
  for (int i = 1; i <= 8; ++i) {
    const double v = per_triple(outcome_triple(i));
    if (v > best) {
      best = v;
      best_index = i;
    }
  }

  BoundCertificate cert;
  cert.inequality = which;
  cert.eta = eta;
  cert.witness.at(Subspace::D, best_index) = eta;
  // Detected-only normalization: the eta in weight and denominator cancels.
  cert.bound = (eta * best) / eta;
  cert.formula_value = which == Inequality::LGI ? 1.0 : 0.0;
  cert.exceeds_formula = cert.bound > cert.formula_value;
  return cert;
}

}  // namespace macroreal::hv
