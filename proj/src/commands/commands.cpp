#include "macroreal/commands.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "canonical.hpp"
#include "macroreal/error.hpp"
#include "macroreal/parallel.hpp"

namespace macroreal::commands {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

// ---- files ----

void prepare_out(const CommandOptions& options) {
  const fs::path& dir = options.out_dir;
  std::error_code ec;
  if (fs::exists(dir, ec)) {
    if (!fs::is_directory(dir, ec)) fail(ErrorKind::Config, dir.string() + " exists and is not a directory");
    if (!fs::is_empty(dir, ec) && !options.force) {
      fail(ErrorKind::Config, "output directory " + dir.string() + " is not empty (use --force)");
    }
  }
  fs::create_directories(dir, ec);
  if (ec) fail(ErrorKind::Io, "cannot create " + dir.string() + ": " + ec.message());
}

void write_text(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::Io, "cannot write " + path.string());
  out << content;
  if (!out) fail(ErrorKind::Io, "write failed for " + path.string());
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Config, "cannot read " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

json parse_json_file(const fs::path& path) {
  try {
    return json::parse(read_text(path));
  } catch (const json::parse_error& e) {
    fail(ErrorKind::Config, path.string() + ": invalid JSON: " + e.what());
  }
}

// Collects outputs and writes manifest.json after them.
class Manifest {
 public:
  Manifest(std::string command, const CommandOptions& options)
      : command_(std::move(command)), options_(options),
        started_(std::chrono::steady_clock::now()) {}

  void write(const std::string& relative, const std::string& content) {
    const fs::path path = options_.out_dir / relative;
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    write_text(path, content);
    add(relative);
  }
  void add(const std::string& relative) { outputs_.push_back(relative); }

  void finish(const json& config, std::optional<std::uint64_t> master_seed, json extra = json::object()) {
    json m = std::move(extra);
    m["command"] = command_;
    m["config"] = config;
    m["master_seed"] = master_seed ? json(*master_seed) : json(nullptr);
    m["versions"] = {{"macroreal", kVersion},
                     {"modules",
                      {{"quantum_model", kVersion},
                       {"hv_models", kVersion},
                       {"multiphoton", kVersion},
                       {"experiment_sim", kVersion},
                       {"analysis", kVersion},
                       {"cli", kVersion}}}};
    std::sort(outputs_.begin(), outputs_.end());
    m["outputs"] = outputs_;
    if (options_.timing) {
      m["wall_clock_seconds"] =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - started_).count();
    }
    write_text(options_.out_dir / "manifest.json", canonical_dump(m));
  }

 private:
  std::string command_;
  const CommandOptions& options_;
  std::chrono::steady_clock::time_point started_;
  std::vector<std::string> outputs_;
};

json config_json(const Config& c) { return json::parse(config_to_json(c)); }

// ---- csv ----

std::string trim(std::string s) {
  const auto not_space = [](unsigned char ch) { return !std::isspace(ch); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

std::vector<std::string> split_row(const std::string& line) {
  std::vector<std::string> cells;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) cells.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

double parse_number(const std::string& cell, const std::string& where) {
  double v = 0.0;
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (cell.empty() || ec != std::errc() || ptr != last || !std::isfinite(v)) {
    fail(ErrorKind::Config, where + ": '" + cell + "' is not a number");
  }
  return v;
}

struct CsvTable {
  std::map<std::string, std::size_t> columns;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_numbers;
};

CsvTable read_csv(const fs::path& path, const std::vector<std::string>& required) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Config, "cannot read " + path.string());
  CsvTable t;
  std::string line;
  if (!std::getline(in, line)) fail(ErrorKind::Config, path.string() + ": empty file");
  const auto header = split_row(trim(line));
  for (std::size_t i = 0; i < header.size(); ++i) t.columns[header[i]] = i;
  for (const auto& name : required) {
    if (!t.columns.contains(name)) fail(ErrorKind::Config, path.string() + ": missing column '" + name + "'");
  }
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty()) continue;
    auto cells = split_row(line);
    if (cells.size() != header.size()) {
      fail(ErrorKind::Config, path.string() + ":" + std::to_string(line_no) + ": expected " +
                                  std::to_string(header.size()) + " cells");
    }
    t.rows.push_back(std::move(cells));
    t.line_numbers.push_back(line_no);
  }
  return t;
}

std::string csv_line(const std::vector<std::string>& cells) {
  std::string out;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) out += ',';
    out += cells[i];
  }
  return out + "\n";
}

// ---- json pieces ----

std::string outcome_label(const std::vector<int>& outcome) {
  std::string s;
  for (int q : outcome) s += q == 1 ? '+' : '-';
  return s;
}

json table_json(const std::optional<JointProbTable>& t) {
  if (!t) return nullptr;
  json j = json::object();
  for (const auto& e : t->entries()) j[outcome_label(e.outcome)] = e.probability;
  return j;
}

json interval_json(const quantum::Interval& i) { return json::array({i.lo, i.hi}); }

json range_json(const quantum::RangeResult& r) {
  return {{"lgi", interval_json(r.lgi)}, {"wlgi", interval_json(r.wlgi)}, {"nsit23", interval_json(r.nsit23)}};
}

json estimate_json(const analysis::Estimate& e) {
  return {{"mean", e.mean}, {"delta", e.delta ? json(*e.delta) : json(nullptr)}};
}

const char* subspace_name(std::size_t b) {
  static constexpr const char* kNames[hv::kBlocks] = {"Q", "P", "S", "A", "B", "C", "D"};
  return kNames[b];
}

json witness_json(const hv::HVWeights& w) {
  json j = json::object();
  for (std::size_t b = 0; b < hv::kBlocks; ++b) {
    std::vector<double> block(hv::kOutcomes);
    for (std::size_t i = 0; i < hv::kOutcomes; ++i) block[i] = w.values[b * hv::kOutcomes + i];
    j[subspace_name(b)] = block;
  }
  return j;
}

json counts_json(const multiphoton::CountVector12& c) {
  json j = json::object();
  for (std::size_t s = 0; s < 4; ++s) {
    j[std::string(multiphoton::kSetLabels[s])] = {
        {"C1", c.sets[s].c1}, {"C2", c.sets[s].c2}, {"C12", c.sets[s].c12}};
  }
  return j;
}

const char* block_name(Block b) {
  switch (b) {
    case Block::None: return "none";
    case Block::Plus: return "plus";
    case Block::Minus: return "minus";
  }
  return "none";
}

std::string sub_run_dir(std::size_t slot) { return "subrun_" + kSubRuns[slot].label(); }

std::string iteration_file(std::size_t slot, std::size_t it) {
  char name[32];
  std::snprintf(name, sizeof name, "iter_%04zu.csv", it);
  return sub_run_dir(slot) + "/" + name;
}

}  // namespace

// ---- predict ----

std::string prediction_json(const Config& config) {
  const auto& p = config.setup;
  const auto nsit = quantum::qm_nsit(p);
  const unsigned threads = resolve_threads(config.threads);

  quantum::Tolerances coherent = config.tolerance;
  coherent.v_lo = coherent.v_hi = 1.0;

  json j;
  j["setup"] = {{"alpha_sq", p.alpha_sq}, {"t_ratios", p.t_ratios}, {"visibility", p.visibility}};
  j["point"] = {{"lgi", quantum::qm_lgi(p)},
                {"wlgi", quantum::qm_wlgi(p)},
                {"nsit12", nsit.nsit12},
                {"nsit23", nsit.nsit23},
                {"nsit13", nsit.nsit13}};
  const InequalityPoint assembled = evaluate_point(assemble_probabilities(quantum::protocol_weights(p)));
  j["assembled"] = {{"lgi", assembled.lgi},       {"wlgi", assembled.wlgi},
                    {"nsit12", assembled.nsit12}, {"nsit23", assembled.nsit23},
                    {"nsit13", assembled.nsit13}};
  j["ranges"] = {{"coherent", range_json(quantum::qm_range(p, coherent, threads))},
                 {"tolerance", range_json(quantum::qm_range(p, config.tolerance, threads))}};
  j["tolerance"] = {{"hwp_angle_deg", config.tolerance.hwp_angle_deg},
                    {"t_abs", config.tolerance.t_abs},
                    {"v_lo", config.tolerance.v_lo},
                    {"v_hi", config.tolerance.v_hi}};
  j["macrorealist_bounds"] = {{"lgi", 1.0}, {"wlgi", 0.0}};
  return canonical_dump(j);
}

std::string cmd_predict(const Config& config, const CommandOptions& options) {
  const std::string doc = prediction_json(config);
  prepare_out(options);
  Manifest m("predict", options);
  m.write("prediction.json", doc);
  m.finish(config_json(config), std::nullopt);
  return doc;
}

// ---- hv-bound ----

std::string cmd_hv_bound(const Config& config, const CommandOptions& options) {
  hv::SearchOptions search;
  search.random_starts = config.hv.random_starts;
  search.evaluation_budget = config.hv.evaluation_budget;
  search.seed = options.seed.value_or(config.hv.seed);
  search.threads = resolve_threads(config.threads);

  std::vector<hv::Inequality> which;
  if (config.hv.inequality != "wlgi") which.push_back(hv::Inequality::LGI);
  if (config.hv.inequality != "lgi") which.push_back(hv::Inequality::WLGI);

  json certs = json::array();
  std::string csv = csv_line({"inequality", "eta", "bound", "closed_form", "exceeds_closed_form",
                              "blocker_setup_bound"});
  for (const auto ineq : which) {
    const char* name = ineq == hv::Inequality::LGI ? "lgi" : "wlgi";
    for (const double eta : config.hv.etas) {
      const auto cert = ineq == hv::Inequality::LGI ? hv::maximize_lgi_detectors(eta, search)
                                                    : hv::maximize_wlgi_detectors(eta, search);
      const auto blocker = hv::blocker_setup_bound(ineq, eta);
      certs.push_back({{"inequality", name},
                       {"eta", eta},
                       {"bound", cert.bound},
                       {"closed_form", cert.formula_value},
                       {"exceeds_closed_form", cert.exceeds_formula},
                       {"witness", witness_json(cert.witness)},
                       {"blocker_setup_bound", blocker.bound}});
      csv += csv_line({name, format6(eta), format6(cert.bound), format6(cert.formula_value),
                       cert.exceeds_formula ? "true" : "false", format6(blocker.bound)});
    }
  }
  json doc = {{"certificates", certs},
              {"critical_efficiency",
               {{"lgi", hv::critical_efficiency(hv::Inequality::LGI)},
                {"wlgi", hv::critical_efficiency(hv::Inequality::WLGI)}}},
              {"search",
               {{"random_starts", search.random_starts},
                {"evaluation_budget", search.evaluation_budget},
                {"seed", search.seed}}}};
  const std::string text = canonical_dump(doc);

  prepare_out(options);
  Manifest m("hv-bound", options);
  m.write("hv_bounds.csv", csv);
  m.write("hv_certificates.json", text);
  m.finish(config_json(config), search.seed);
  return text;
}

// ---- gamma-fit ----

multiphoton::CountVector12 read_counts_csv(const fs::path& path) {
  const CsvTable t = read_csv(path, {"set_label", "C1", "C2", "C12"});
  multiphoton::CountVector12 out;
  std::array<bool, 4> seen{};
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    const std::string where = path.string() + ":" + std::to_string(t.line_numbers[r]);
    const std::string label = row[t.columns.at("set_label")];
    const auto it = std::find(multiphoton::kSetLabels.begin(), multiphoton::kSetLabels.end(), label);
    if (it == multiphoton::kSetLabels.end()) fail(ErrorKind::Config, where + ": unknown set_label '" + label + "'");
    const auto s = static_cast<std::size_t>(it - multiphoton::kSetLabels.begin());
    if (seen[s]) fail(ErrorKind::Config, where + ": duplicate set_label '" + label + "'");
    seen[s] = true;
    out.sets[s] = {parse_number(row[t.columns.at("C1")], where + " C1"),
                   parse_number(row[t.columns.at("C2")], where + " C2"),
                   parse_number(row[t.columns.at("C12")], where + " C12")};
    for (double v : {out.sets[s].c1, out.sets[s].c2, out.sets[s].c12}) {
      if (v < 0.0) fail(ErrorKind::Config, where + ": counts must be nonnegative");
    }
  }
  for (std::size_t s = 0; s < 4; ++s) {
    if (!seen[s]) {
      fail(ErrorKind::Config, path.string() + ": missing set_label '" +
                                  std::string(multiphoton::kSetLabels[s]) + "'");
    }
  }
  return out;
}

std::string cmd_gamma_fit(const Config& config, const fs::path& counts_csv,
                          const CommandOptions& options) {
  const auto observed = read_counts_csv(counts_csv);
  multiphoton::FitOptions fit = config.fit;
  fit.seed = options.seed.value_or(config.fit.seed);
  fit.threads = resolve_threads(config.threads);
  const auto result = multiphoton::fit_gamma(observed, fit);
  const auto& p = result.params;
  const auto bounds = multiphoton::modified_bounds(p.gamma);

  json doc = {{"chi2", result.chi2},
              {"converged", result.converged},
              {"restarts", result.restarts},
              {"seed", fit.seed},
              {"params",
               {{"alpha_sq", p.alpha_sq},
                {"t_ratios", p.t_ratios},
                {"eta1", p.eta1},
                {"eta2", p.eta2},
                {"gamma", p.gamma},
                {"n_events", p.n_events}}},
              {"modified_bounds", {{"lgi", bounds.lgi}, {"wlgi", bounds.wlgi}}},
              {"observed", counts_json(observed)},
              {"predicted", counts_json(multiphoton::predicted_counts(p))}};
  const std::string text = canonical_dump(doc);

  prepare_out(options);
  Manifest m("gamma-fit", options);
  m.write("gamma_fit.json", text);
  m.finish(config_json(config), fit.seed, {{"input", counts_csv.string()}});
  if (!result.converged) fail(ErrorKind::NonConvergence, "gamma fit did not converge");
  return text;
}

// ---- simulate ----

std::string cmd_simulate(const Config& config, const CommandOptions& options) {
  sim::SourceConfig src = config.source;
  if (options.seed) src.seed = *options.seed;
  const auto dataset = sim::run_protocol(src, config.setup, config.protocol);
  prepare_out(options);

  struct Task {
    std::size_t slot;
    std::size_t iteration;
  };
  std::vector<Task> tasks;
  for (std::size_t slot = 0; slot < kSubRuns.size(); ++slot) {
    fs::create_directories(options.out_dir / sub_run_dir(slot));
    for (std::size_t it = 0; it < dataset.iterations(slot); ++it) tasks.push_back({slot, it});
  }
  parallel_for(tasks.size(), resolve_threads(config.threads), [&](std::size_t k) {
    const auto& t = tasks[k];
    sim::write_timestamp_csv(options.out_dir / iteration_file(t.slot, t.iteration),
                             dataset.generate(t.slot, t.iteration));
  });

  Manifest m("simulate", options);
  json sub_runs = json::object();
  for (std::size_t slot = 0; slot < kSubRuns.size(); ++slot) {
    json files = json::array(), seeds = json::array(), vis = json::array();
    for (std::size_t it = 0; it < dataset.iterations(slot); ++it) {
      files.push_back(iteration_file(slot, it));
      seeds.push_back(dataset.seed(slot, it));
      vis.push_back(dataset.visibility(slot, it));
      m.add(iteration_file(slot, it));
    }
    sub_runs[kSubRuns[slot].label()] = {{"t1_block", block_name(kSubRuns[slot].blockers.t1)},
                                        {"t2_block", block_name(kSubRuns[slot].blockers.t2)},
                                        {"iterations", dataset.iterations(slot)},
                                        {"files", files},
                                        {"seeds", seeds},
                                        {"visibilities", vis}};
  }
  json dataset_doc = {{"sub_runs", sub_runs}, {"output_scale", sim::output_scale(config.setup)}};
  Config snapshot = config;
  snapshot.source = src;
  m.finish(config_json(snapshot), src.seed, {{"dataset", dataset_doc}});

  json summary = {{"out_dir", options.out_dir.string()},
                  {"master_seed", src.seed},
                  {"files", tasks.size()},
                  {"sub_runs", kSubRuns.size()}};
  return canonical_dump(summary);
}

// ---- analyze ----

analysis::StreamSource dataset_source(const fs::path& dataset_dir) {
  const fs::path manifest_path = dataset_dir / "manifest.json";
  if (!fs::exists(manifest_path)) {
    fail(ErrorKind::Config, dataset_dir.string() + ": no manifest.json or coincidences.csv");
  }
  const json m = parse_json_file(manifest_path);
  const json* subs = nullptr;
  if (m.contains("dataset") && m["dataset"].contains("sub_runs")) subs = &m["dataset"]["sub_runs"];
  if (!subs || !subs->is_object()) fail(ErrorKind::Config, manifest_path.string() + ": missing dataset.sub_runs");

  auto files = std::make_shared<std::array<std::vector<fs::path>, 9>>();
  analysis::StreamSource source;
  for (std::size_t slot = 0; slot < kSubRuns.size(); ++slot) {
    const std::string label = kSubRuns[slot].label();
    if (!subs->contains(label) || !(*subs)[label].contains("files") || !(*subs)[label]["files"].is_array()) {
      fail(ErrorKind::Config, manifest_path.string() + ": dataset.sub_runs." + label + ".files missing");
    }
    for (const auto& f : (*subs)[label]["files"]) {
      if (!f.is_string()) fail(ErrorKind::Config, manifest_path.string() + ": file entries must be strings");
      (*files)[slot].push_back(dataset_dir / f.get<std::string>());
    }
    source.iterations[slot] = (*files)[slot].size();
  }
  source.load = [files](std::size_t slot, std::size_t it) {
    return sim::read_timestamp_csv((*files)[slot].at(it));
  };
  return source;
}

analysis::IterationCounts read_coincidences_csv(const fs::path& path) {
  const CsvTable t = read_csv(path, {"subrun", "iteration", "plus", "minus"});
  std::array<std::map<std::size_t, ChannelCounts>, 9> by_slot;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    const std::string where = path.string() + ":" + std::to_string(t.line_numbers[r]);
    std::size_t slot = 0;
    try {
      slot = sub_run_slot(row[t.columns.at("subrun")]);
    } catch (const Error&) {
      fail(ErrorKind::Config, where + ": unknown subrun '" + row[t.columns.at("subrun")] + "'");
    }
    const double it = parse_number(row[t.columns.at("iteration")], where + " iteration");
    if (it < 0.0 || it != std::floor(it)) fail(ErrorKind::Config, where + ": iteration must be a nonnegative integer");
    ChannelCounts c{parse_number(row[t.columns.at("plus")], where + " plus"),
                    parse_number(row[t.columns.at("minus")], where + " minus")};
    if (c.plus < 0.0 || c.minus < 0.0) fail(ErrorKind::Config, where + ": counts must be nonnegative");
    if (!by_slot[slot].emplace(static_cast<std::size_t>(it), c).second) {
      fail(ErrorKind::Config, where + ": duplicate iteration");
    }
  }
  analysis::IterationCounts out;
  for (std::size_t slot = 0; slot < 9; ++slot) {
    std::size_t expect = 0;
    for (const auto& [it, c] : by_slot[slot]) {
      if (it != expect++) {
        fail(ErrorKind::Config, path.string() + ": iterations of sub-run " + kSubRuns[slot].label() +
                                    " must be numbered 0..n-1");
      }
      out.sub_runs[slot].push_back(c);
    }
  }
  return out;
}

std::string report_json(const analysis::ResultReport& r) {
  json j;
  j["lgi"] = estimate_json(r.lgi);
  j["wlgi"] = estimate_json(r.wlgi);
  j["nsit12"] = estimate_json(r.nsit12);
  j["nsit23"] = estimate_json(r.nsit23);
  j["nsit13"] = estimate_json(r.nsit13);
  j["correlations"] = {{"q12", {{"mean", r.q12.mean}, {"sigma", r.q12.delta ? json(*r.q12.delta) : json(nullptr)}}},
                       {"q23", {{"mean", r.q23.mean}, {"sigma", r.q23.delta ? json(*r.q23.delta) : json(nullptr)}}},
                       {"q13", {{"mean", r.q13.mean}, {"sigma", r.q13.delta ? json(*r.q13.delta) : json(nullptr)}}}};
  j["tables"] = {{"p23", table_json(r.tables.p23)},
                 {"p13", table_json(r.tables.p13)},
                 {"p123", table_json(r.tables.p123)},
                 {"p12", table_json(r.tables.p12)},
                 {"p3", table_json(r.tables.p3)}};
  json its = json::object();
  for (std::size_t slot = 0; slot < r.iterations.size(); ++slot) its[kSubRuns[slot].label()] = r.iterations[slot];
  j["iterations"] = its;
  if (r.errors) {
    auto spread = [](const analysis::RunSpread& s) {
      return json{{"correlation_sd", s.correlation},
                  {"wlgi_term_sd", s.wlgi_term},
                  {"combinations", s.combinations},
                  {"sampled", s.sampled}};
    };
    j["error_distributions"] = {{"run12", spread(r.errors->run12)},
                                {"run23", spread(r.errors->run23)},
                                {"run13", spread(r.errors->run13)}};
  } else {
    j["error_distributions"] = nullptr;
  }
  j["warnings"] = r.warnings;
  return canonical_dump(j);
}

std::string cmd_analyze(const Config& config, const fs::path& dataset_dir, const CommandOptions& options) {
  if (!fs::is_directory(dataset_dir)) fail(ErrorKind::Config, dataset_dir.string() + " is not a directory");
  const unsigned threads = resolve_threads(config.threads);

  analysis::IterationCounts counts;
  const fs::path fixture = dataset_dir / "coincidences.csv";
  const bool from_counts = fs::exists(fixture);
  if (from_counts) {
    counts = read_coincidences_csv(fixture);
  } else {
    counts = analysis::count_coincidences(dataset_source(dataset_dir), config.analysis.histogram, threads);
  }

  analysis::ErrorOptions eo;
  eo.exhaustive_limit = config.analysis.exhaustive_limit;
  eo.sampled_draws = config.analysis.sampled_draws;
  eo.seed = options.seed.value_or(config.analysis.error_seed);
  eo.threads = threads;
  const auto report = analysis::build_report(counts, eo);
  const std::string doc = report_json(report);

  std::string per_it = csv_line({"iteration", "lgi", "wlgi", "nsit12", "nsit23", "nsit13"});
  for (const auto& p : analysis::per_iteration_points(counts)) {
    per_it += csv_line({std::to_string(p.iteration), format6(p.point.lgi), format6(p.point.wlgi),
                        format6(p.point.nsit12), format6(p.point.nsit23), format6(p.point.nsit13)});
  }

  std::string windows = csv_line({"subrun", "channel", "start_ps", "end_ps", "flatline_mean"});
  for (std::size_t slot = 0; slot < 9; ++slot) {
    for (std::size_t ch = 0; ch < 2; ++ch) {
      const auto& w = counts.windows[slot][ch];
      if (!w) continue;
      windows += csv_line({kSubRuns[slot].label(), ch == 0 ? "plus" : "minus", std::to_string(w->start),
                           std::to_string(w->end), format6(w->flatline_mean)});
    }
  }

  std::string sdm = csv_line({"subrun", "I", "K", "mean", "sd", "sd_over_mean"});
  const std::uint64_t boot_seed = options.seed.value_or(config.analysis.bootstrap_seed);
  for (std::size_t slot = 0; slot < 9; ++slot) {
    std::vector<double> totals;
    for (const auto& c : counts.sub_runs[slot]) totals.push_back(c.plus + c.minus);
    for (std::size_t i : {10, 50, 150, 300}) {
      if (i > totals.size()) continue;
      const auto b = analysis::bootstrap_sdm(totals, i, config.analysis.bootstrap_resamples, boot_seed, threads);
      sdm += csv_line({kSubRuns[slot].label(), std::to_string(i), std::to_string(b.resamples), format6(b.mean),
                       format6(b.sd), b.sd_over_mean ? format6(*b.sd_over_mean) : ""});
    }
  }

  prepare_out(options);
  Manifest m("analyze", options);
  m.write("analysis.json", doc);
  m.write("per_iteration.csv", per_it);
  if (!from_counts) m.write("windows.csv", windows);
  m.write("sdm.csv", sdm);
  m.finish(config_json(config), eo.seed, {{"input", dataset_dir.string()}});
  return doc;
}

// ---- report ----

std::string cmd_report(const fs::path& prediction_path, const fs::path& analysis_path,
                       const CommandOptions& options) {
  const json pred = parse_json_file(prediction_path);
  const json meas = parse_json_file(analysis_path);

  auto number_at = [](const json& j, std::initializer_list<const char*> keys,
                      const fs::path& file) -> std::optional<double> {
    const json* node = &j;
    for (const char* k : keys) {
      if (!node->is_object() || !node->contains(k)) return std::nullopt;
      node = &(*node)[k];
    }
    if (node->is_null()) return std::nullopt;
    if (!node->is_number()) fail(ErrorKind::Config, file.string() + ": expected a number");
    return node->get<double>();
  };
  auto range_at = [&](const char* key) -> std::optional<quantum::Interval> {
    if (!pred.contains("ranges") || !pred["ranges"].contains("tolerance") ||
        !pred["ranges"]["tolerance"].contains(key)) {
      return std::nullopt;
    }
    const json& r = pred["ranges"]["tolerance"][key];
    if (!r.is_array() || r.size() != 2) fail(ErrorKind::Config, prediction_path.string() + ": malformed range");
    return quantum::Interval{r[0].get<double>(), r[1].get<double>()};
  };
  if (!pred.contains("ranges")) fail(ErrorKind::Config, prediction_path.string() + ": not a prediction report");

  struct Row {
    const char* name;
    double bound;
  };
  const Row rows[] = {{"lgi", 1.0}, {"wlgi", 0.0}, {"nsit12", 0.0}, {"nsit23", 0.0}, {"nsit13", 0.0}};

  std::string csv = csv_line({"quantity", "measured", "delta", "predicted_lo", "predicted_hi",
                              "macrorealist_bound", "margin", "margin_over_delta"});
  std::string text;
  char line[256];
  std::snprintf(line, sizeof line, "%-8s %10s %10s %22s %8s %10s %10s\n", "quantity", "measured",
                "delta", "predicted", "bound", "margin", "margin/D");
  text += line;
  json doc = json::object();
  for (const Row& row : rows) {
    const auto mean = number_at(meas, {row.name, "mean"}, analysis_path);
    if (!mean) fail(ErrorKind::Config, analysis_path.string() + ": missing " + std::string(row.name) + ".mean");
    const auto delta = number_at(meas, {row.name, "delta"}, analysis_path);
    const auto range = range_at(row.name);
    const double margin = *mean - row.bound;
    std::optional<double> ratio;
    if (delta && *delta > 0.0) ratio = margin / *delta;

    csv += csv_line({row.name, format6(*mean), delta ? format6(*delta) : "", range ? format6(range->lo) : "",
                     range ? format6(range->hi) : "", format6(row.bound), format6(margin),
                     ratio ? format6(*ratio) : ""});
    const std::string range_text = range ? "[" + format6(range->lo) + ", " + format6(range->hi) + "]" : "-";
    std::snprintf(line, sizeof line, "%-8s %10s %10s %22s %8s %10s %10s\n", row.name, format6(*mean).c_str(),
                  delta ? format6(*delta).c_str() : "-", range_text.c_str(), format6(row.bound).c_str(),
                  format6(margin).c_str(), ratio ? format6(*ratio).c_str() : "-");
    text += line;
    doc[row.name] = {{"measured", *mean},
                     {"delta", delta ? json(*delta) : json(nullptr)},
                     {"predicted", range ? interval_json(*range) : json(nullptr)},
                     {"macrorealist_bound", row.bound},
                     {"margin", margin},
                     {"margin_over_delta", ratio ? json(*ratio) : json(nullptr)}};
  }

  prepare_out(options);
  Manifest m("report", options);
  m.write("report.csv", csv);
  m.write("report.txt", text);
  m.write("report.json", canonical_dump(doc));
  m.finish(json::object(), std::nullopt,
           {{"inputs", {prediction_path.string(), analysis_path.string()}}});
  return text;
}

}  // namespace macroreal::commands
