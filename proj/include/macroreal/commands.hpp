#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "macroreal/analysis.hpp"
#include "macroreal/experiment_sim.hpp"
#include "macroreal/hv_models.hpp"
#include "macroreal/multiphoton.hpp"
#include "macroreal/quantum_model.hpp"

namespace macroreal::commands {

inline constexpr const char* kVersion = "1.0.0";

struct AnalysisConfig {
  analysis::HistogramOptions histogram;
  std::size_t exhaustive_limit = 200000;
  std::size_t sampled_draws = 1000000;
  std::uint64_t error_seed = 0xE5505ULL;
  std::size_t bootstrap_resamples = 100000;
  std::uint64_t bootstrap_seed = 0xB007ULL;
};

struct HvConfig {
  std::vector<double> etas{0.5, 2.0 / 3.0, 0.78, 0.8508, 1.0};
  std::string inequality = "both";  // lgi, wlgi or both
  std::size_t random_starts = 96;
  std::size_t evaluation_budget = 200000;
  std::uint64_t seed = 0x5EEDULL;
};

// Shared configuration of every command. Defaults are the nominal setup.
struct Config {
  quantum::SetupParams setup = quantum::nominal_setup();
  quantum::Tolerances tolerance{1.0, 0.02, 0.7, 0.85};
  sim::SourceConfig source;
  sim::ProtocolOptions protocol{300, 150, quantum::Interval{0.7, 0.85}};
  AnalysisConfig analysis;
  multiphoton::FitOptions fit;
  HvConfig hv;
  unsigned threads = 0;  // 0: MACROREAL_THREADS or 1
};

// Strict parse: unknown keys and wrong types throw Config errors that name
// the field path, e.g. "setup.t_ratios[2]".
Config parse_config(const std::string& json_text);
void validate_config(const Config& config);
Config load_config(const std::filesystem::path& path);
std::string config_to_json(const Config& config);

// Rounds to six significant digits, the precision of every emitted number.
double round6(double x);
std::string format6(double x);

struct CommandOptions {
  std::filesystem::path out_dir = "out";
  bool force = false;
  std::optional<std::uint64_t> seed;
  bool timing = false;  // record wall-clock duration in the manifest
};

// Every command writes its outputs and then manifest.json into out_dir and
// returns its primary document as canonical JSON (report: text table).
std::string cmd_predict(const Config& config, const CommandOptions& options);
std::string cmd_hv_bound(const Config& config, const CommandOptions& options);
// Throws NonConvergence after writing its outputs when the fit did not converge.
std::string cmd_gamma_fit(const Config& config, const std::filesystem::path& counts_csv,
                          const CommandOptions& options);
std::string cmd_simulate(const Config& config, const CommandOptions& options);
std::string cmd_analyze(const Config& config, const std::filesystem::path& dataset_dir,
                        const CommandOptions& options);
std::string cmd_report(const std::filesystem::path& prediction_json,
                       const std::filesystem::path& analysis_json, const CommandOptions& options);

// Counts CSV with columns set_label,C1,C2,C12 and rows ++, +-, -+, --.
multiphoton::CountVector12 read_counts_csv(const std::filesystem::path& path);

// Coincidence fixture with columns subrun,iteration,plus,minus.
analysis::IterationCounts read_coincidences_csv(const std::filesystem::path& path);

// Timestamp dataset written by cmd_simulate.
analysis::StreamSource dataset_source(const std::filesystem::path& dataset_dir);

// JSON documents, exposed for tests.
std::string prediction_json(const Config& config);
std::string report_json(const analysis::ResultReport& report);

}  // namespace macroreal::commands
