#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "canonical.hpp"
#include "macroreal/commands.hpp"
#include "macroreal/error.hpp"

namespace macroreal::commands {

using nlohmann::json;

namespace {

[[noreturn]] void config_error(const std::string& path, const std::string& what) {
  fail(ErrorKind::Config, (path.empty() ? std::string("config") : path) + ": " + what);
}

// Walks one JSON object, consuming known keys and rejecting the rest.
class Section {
 public:
  Section(const json& node, std::string path) : node_(node), path_(std::move(path)) {
    if (!node_.is_object()) config_error(path_, "expected an object");
  }

  void number(const char* key, double& out) {
    if (const json* v = take(key)) {
      if (!v->is_number()) config_error(field(key), "expected a number");
      out = v->get<double>();
      if (!std::isfinite(out)) config_error(field(key), "must be finite");
    }
  }

  void count(const char* key, std::size_t& out) {
    if (const json* v = take(key)) {
      if (!v->is_number_unsigned()) config_error(field(key), "expected a nonnegative integer");
      out = v->get<std::size_t>();
    }
  }

  void integer(const char* key, std::int64_t& out) {
    if (const json* v = take(key)) {
      if (!v->is_number_integer()) config_error(field(key), "expected an integer");
      out = v->get<std::int64_t>();
    }
  }

  void seed(const char* key, std::uint64_t& out) {
    if (const json* v = take(key)) {
      if (!v->is_number_unsigned()) config_error(field(key), "expected an unsigned 64-bit integer");
      out = v->get<std::uint64_t>();
    }
  }

  void text(const char* key, std::string& out) {
    if (const json* v = take(key)) {
      if (!v->is_string()) config_error(field(key), "expected a string");
      out = v->get<std::string>();
    }
  }

  template <std::size_t N>
  void numbers(const char* key, std::array<double, N>& out) {
    if (const json* v = take(key)) {
      if (!v->is_array() || v->size() != N) {
        config_error(field(key), "expected an array of " + std::to_string(N) + " numbers");
      }
      for (std::size_t i = 0; i < N; ++i) {
        const json& e = (*v)[i];
        if (!e.is_number()) config_error(field(key) + "[" + std::to_string(i) + "]", "expected a number");
        out[i] = e.get<double>();
      }
    }
  }

  void number_list(const char* key, std::vector<double>& out) {
    if (const json* v = take(key)) {
      if (!v->is_array() || v->empty()) config_error(field(key), "expected a non-empty array of numbers");
      out.clear();
      for (std::size_t i = 0; i < v->size(); ++i) {
        const json& e = (*v)[i];
        if (!e.is_number()) config_error(field(key) + "[" + std::to_string(i) + "]", "expected a number");
        out.push_back(e.get<double>());
      }
    }
  }

  void interval(const char* key, std::optional<quantum::Interval>& out) {
    if (const json* v = take(key)) {
      if (v->is_null()) {
        out.reset();
        return;
      }
      if (!v->is_array() || v->size() != 2 || !(*v)[0].is_number() || !(*v)[1].is_number()) {
        config_error(field(key), "expected null or [lo, hi]");
      }
      out = quantum::Interval{(*v)[0].get<double>(), (*v)[1].get<double>()};
    }
  }

  std::optional<Section> child(const char* key) {
    if (const json* v = take(key)) return Section(*v, field(key));
    return std::nullopt;
  }

  void finish() const {
    for (const auto& item : node_.items()) {
      if (!seen_.contains(item.key())) config_error(field(item.key()), "unknown key");
    }
  }

  [[nodiscard]] std::string field(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

 private:
  const json* take(const char* key) {
    seen_.insert(key);
    auto it = node_.find(key);
    return it == node_.end() ? nullptr : &*it;
  }

  const json& node_;
  std::string path_;
  std::set<std::string> seen_;
};

constexpr const char* kBoxNames[9] = {"alpha_sq", "t1", "t2", "t3", "t4", "eta1", "eta2", "gamma", "n_events"};

void check(bool ok, const std::string& path, const std::string& what) {
  if (!ok) config_error(path, what);
}

// Reruns a module's own validation, reporting failures as config errors.
template <typename F>
void validated(const std::string& section, F&& f) {
  try {
    f();
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::InvalidArgument) throw;
    config_error(section, e.what());
  }
}

}  // namespace

void validate_config(const Config& c) {
  validated("setup", [&] { c.setup.validate(); });
  validated("source", [&] { c.source.validate(); });

  const auto& t = c.tolerance;
  check(t.hwp_angle_deg >= 0.0, "setup.tolerance.hwp_angle_deg", "must be >= 0");
  check(t.t_abs >= 0.0, "setup.tolerance.t_abs", "must be >= 0");
  check(t.v_lo >= 0.0 && t.v_lo <= t.v_hi && t.v_hi <= 1.0, "setup.tolerance",
        "visibility range must satisfy 0 <= v_lo <= v_hi <= 1");

  check(c.protocol.interference_iterations >= 1, "source.interference_iterations", "must be >= 1");
  check(c.protocol.non_interference_iterations >= 1, "source.non_interference_iterations",
        "must be >= 1");
  if (c.protocol.visibility_jitter) {
    const auto& v = *c.protocol.visibility_jitter;
    check(v.lo >= 0.0 && v.lo <= v.hi && v.hi <= 1.0, "source.visibility_jitter",
          "must satisfy 0 <= lo <= hi <= 1");
  }

  const auto& h = c.analysis.histogram;
  check(h.bin_width > 0, "analysis.bin_width_ps", "must be > 0");
  check(h.half_range > 0 && h.half_range % h.bin_width == 0, "analysis.half_range_ps",
        "must be a positive multiple of bin_width_ps");
  check(h.half_range / h.bin_width >= 2, "analysis.half_range_ps", "must span at least two bins");
  check(c.analysis.sampled_draws >= 1, "analysis.sampled_draws", "must be >= 1");
  check(c.analysis.bootstrap_resamples >= 1, "analysis.bootstrap_resamples", "must be >= 1");

  check(c.fit.restarts >= 1, "fit.restarts", "must be >= 1");
  for (std::size_t i = 0; i < 9; ++i) {
    check(c.fit.box.lo[i] <= c.fit.box.hi[i], std::string("fit.box.") + kBoxNames[i],
          "lower bound above upper bound");
  }
  check(c.fit.box.lo[8] > 0.0, "fit.box.n_events", "lower bound must be > 0");

  for (std::size_t i = 0; i < c.hv.etas.size(); ++i) {
    const double e = c.hv.etas[i];
    check(e > 0.0 && e <= 1.0, "hv.etas[" + std::to_string(i) + "]", "must lie in (0,1]");
  }
  check(c.hv.inequality == "lgi" || c.hv.inequality == "wlgi" || c.hv.inequality == "both",
        "hv.inequality", "must be lgi, wlgi or both");
  check(c.hv.random_starts >= 1, "hv.random_starts", "must be >= 1");
  check(c.hv.evaluation_budget >= 1, "hv.evaluation_budget", "must be >= 1");
}

namespace {

void read_box(Section& s, multiphoton::FitBox& box) {
  for (std::size_t i = 0; i < 9; ++i) {
    std::array<double, 2> range{box.lo[i], box.hi[i]};
    s.numbers(kBoxNames[i], range);
    box.lo[i] = range[0];
    box.hi[i] = range[1];
  }
  s.finish();
}

}  // namespace

Config parse_config(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    fail(ErrorKind::Config, std::string("config: invalid JSON: ") + e.what());
  }

  Config c;
  Section top(root, "");
  if (auto s = top.child("setup")) {
    s->number("alpha_sq", c.setup.alpha_sq);
    s->numbers("t_ratios", c.setup.t_ratios);
    s->number("visibility", c.setup.visibility);
    if (auto t = s->child("tolerance")) {
      t->number("hwp_angle_deg", c.tolerance.hwp_angle_deg);
      t->number("t_abs", c.tolerance.t_abs);
      t->number("v_lo", c.tolerance.v_lo);
      t->number("v_hi", c.tolerance.v_hi);
      t->finish();
    }
    s->finish();
  }
  if (auto s = top.child("source")) {
    auto& src = c.source;
    s->number("pair_rate", src.pair_rate);
    s->number("duration_s", src.duration);
    s->number("gamma", src.gamma);
    s->number("eta_herald", src.eta_herald);
    s->number("eta1", src.eta1);
    s->number("eta2", src.eta2);
    s->number("dark_rate_h", src.dark_rate_h);
    s->number("dark_rate_p", src.dark_rate_p);
    s->number("dark_rate_m", src.dark_rate_m);
    s->number("jitter_sigma_ps", src.jitter_sigma);
    s->number("base_delay_ps", src.base_delay);
    s->number("arm_delay_tau_ps", src.arm_delay_tau);
    s->seed("seed", src.seed);
    s->count("interference_iterations", c.protocol.interference_iterations);
    s->count("non_interference_iterations", c.protocol.non_interference_iterations);
    s->interval("visibility_jitter", c.protocol.visibility_jitter);
    s->finish();
  }
  if (auto s = top.child("analysis")) {
    auto& a = c.analysis;
    s->integer("bin_width_ps", a.histogram.bin_width);
    s->integer("delay_center_ps", a.histogram.delay_center);
    s->integer("half_range_ps", a.histogram.half_range);
    s->count("exhaustive_limit", a.exhaustive_limit);
    s->count("sampled_draws", a.sampled_draws);
    s->seed("error_seed", a.error_seed);
    s->count("bootstrap_resamples", a.bootstrap_resamples);
    s->seed("bootstrap_seed", a.bootstrap_seed);
    s->finish();
  }
  if (auto s = top.child("fit")) {
    s->count("restarts", c.fit.restarts);
    s->seed("seed", c.fit.seed);
    if (auto b = s->child("box")) read_box(*b, c.fit.box);
    s->finish();
  }
  if (auto s = top.child("hv")) {
    s->number_list("etas", c.hv.etas);
    s->text("inequality", c.hv.inequality);
    s->count("random_starts", c.hv.random_starts);
    s->count("evaluation_budget", c.hv.evaluation_budget);
    s->seed("seed", c.hv.seed);
    s->finish();
  }
  top.finish();
  validate_config(c);
  return c;
}

Config load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Config, "config: cannot read " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str());
}

double round6(double x) {
  if (!std::isfinite(x) || x == 0.0) return x == 0.0 ? 0.0 : x;
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return std::strtod(buf, nullptr);
}

std::string format6(double x) {
  if (x == 0.0) return "0";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

std::string config_to_json(const Config& c) {
  json j;
  j["setup"] = {{"alpha_sq", c.setup.alpha_sq},
                {"t_ratios", c.setup.t_ratios},
                {"visibility", c.setup.visibility},
                {"tolerance",
                 {{"hwp_angle_deg", c.tolerance.hwp_angle_deg},
                  {"t_abs", c.tolerance.t_abs},
                  {"v_lo", c.tolerance.v_lo},
                  {"v_hi", c.tolerance.v_hi}}}};
  const auto& s = c.source;
  j["source"] = {{"pair_rate", s.pair_rate},
                 {"duration_s", s.duration},
                 {"gamma", s.gamma},
                 {"eta_herald", s.eta_herald},
                 {"eta1", s.eta1},
                 {"eta2", s.eta2},
                 {"dark_rate_h", s.dark_rate_h},
                 {"dark_rate_p", s.dark_rate_p},
                 {"dark_rate_m", s.dark_rate_m},
                 {"jitter_sigma_ps", s.jitter_sigma},
                 {"base_delay_ps", s.base_delay},
                 {"arm_delay_tau_ps", s.arm_delay_tau},
                 {"seed", s.seed},
                 {"interference_iterations", c.protocol.interference_iterations},
                 {"non_interference_iterations", c.protocol.non_interference_iterations}};
  if (c.protocol.visibility_jitter) {
    j["source"]["visibility_jitter"] = {c.protocol.visibility_jitter->lo,
                                        c.protocol.visibility_jitter->hi};
  } else {
    j["source"]["visibility_jitter"] = nullptr;
  }
  const auto& a = c.analysis;
  j["analysis"] = {{"bin_width_ps", a.histogram.bin_width},
                   {"delay_center_ps", a.histogram.delay_center},
                   {"half_range_ps", a.histogram.half_range},
                   {"exhaustive_limit", a.exhaustive_limit},
                   {"sampled_draws", a.sampled_draws},
                   {"error_seed", a.error_seed},
                   {"bootstrap_resamples", a.bootstrap_resamples},
                   {"bootstrap_seed", a.bootstrap_seed}};
  json box = json::object();
  for (std::size_t i = 0; i < 9; ++i) box[kBoxNames[i]] = {c.fit.box.lo[i], c.fit.box.hi[i]};
  j["fit"] = {{"restarts", c.fit.restarts}, {"seed", c.fit.seed}, {"box", box}};
  j["hv"] = {{"etas", c.hv.etas},
             {"inequality", c.hv.inequality},
             {"random_starts", c.hv.random_starts},
             {"evaluation_budget", c.hv.evaluation_budget},
             {"seed", c.hv.seed}};
  return canonical_dump(j);
}

json canonical(const json& j) {
  if (j.is_number_float()) return round6(j.get<double>());
  if (j.is_array()) {
    json out = json::array();
    for (const auto& e : j) out.push_back(canonical(e));
    return out;
  }
  if (j.is_object()) {
    json out = json::object();
    for (const auto& item : j.items()) out[item.key()] = canonical(item.value());
    return out;
  }
  return j;
}

std::string canonical_dump(const json& j) { return canonical(j).dump(2) + "\n"; }

}  // namespace macroreal::commands
