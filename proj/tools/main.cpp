// Command-line front end over the macroreal C interface.
#include <cstdint>
#include <cstdio>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "macroreal/macroreal.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitNonConvergence = 3;
constexpr int kExitInternal = 1;

int exit_code(mr_status s) {
  switch (s) {
    case MR_OK: return kExitOk;
    case MR_NUMERICAL: return kExitNonConvergence;
    case MR_INTERNAL: return kExitInternal;
    default: return kExitInput;
  }
}

struct SessionDeleter {
  void operator()(mr_session* s) const { mr_session_destroy(s); }
};
using Session = std::unique_ptr<mr_session, SessionDeleter>;

struct OwnedString {
  char* text = nullptr;
  ~OwnedString() { mr_string_free(text); }
};

int report_failure(const mr_session* session, mr_status status) {
  std::fprintf(stderr, "macroreal: error: %s\n", mr_session_last_error(session));
  return exit_code(status);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Leggett-Garg test toolkit: predictions, bounds, simulation and analysis"};
  app.set_version_flag("--version", std::string(mr_version()));
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir = "out";
  bool force = false;
  bool timing = false;
  std::optional<unsigned> threads;

  app.add_option("--config", config_path, "JSON configuration file")->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "master seed (unsigned 64-bit)");
  app.add_option("--out", out_dir, "output directory")->capture_default_str();
  app.add_flag("--force", force, "write into a non-empty output directory");
  app.add_option("--threads", threads, "worker threads (default: MACROREAL_THREADS, else 1)")
      ->check(CLI::Range(1u, 4096u));
  app.add_flag("--timing", timing, "record wall-clock duration in the manifest");

  auto* predict = app.add_subcommand("predict", "quantum predictions and tolerance ranges");

  auto* hv_bound = app.add_subcommand("hv-bound", "detector-only macrorealist bounds");
  std::vector<double> etas;
  std::string inequality;
  hv_bound->add_option("--eta", etas, "detector efficiencies")->delimiter(',');
  hv_bound->add_option("--inequality", inequality, "lgi, wlgi or both")
      ->check(CLI::IsMember({"lgi", "wlgi", "both"}));

  auto* gamma_fit = app.add_subcommand("gamma-fit", "fit the two-photon fraction to singles and coincidences");
  std::string counts_csv;
  gamma_fit->add_option("counts", counts_csv, "counts CSV (set_label,C1,C2,C12)")->required();

  auto* simulate = app.add_subcommand("simulate", "generate a timestamp dataset for all sub-runs");

  auto* analyze = app.add_subcommand("analyze", "analyze a dataset directory");
  std::string dataset_dir;
  analyze->add_option("dataset", dataset_dir, "dataset directory")->required();

  auto* report = app.add_subcommand("report", "compare a prediction with an analysis");
  std::string prediction_json;
  std::string analysis_json;
  report->add_option("prediction", prediction_json, "prediction.json")->required();
  report->add_option("analysis", analysis_json, "analysis.json")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInput;
  }

  mr_session* raw = nullptr;
  if (mr_session_create(&raw) != MR_OK) {
    std::fprintf(stderr, "macroreal: error: cannot create session\n");
    return kExitInternal;
  }
  Session session(raw);

  if (threads) mr_session_set_threads(session.get(), *threads);
  if (!config_path.empty()) {
    const mr_status s = mr_session_load_config_file(session.get(), config_path.c_str());
    if (s != MR_OK) return report_failure(session.get(), s);
  }

  mr_command_options options{out_dir.c_str(), force ? 1 : 0, seed ? 1 : 0, seed.value_or(0),
                             timing ? 1 : 0};
  OwnedString result;
  mr_status status = MR_OK;
  if (*predict) {
    status = mr_predict(session.get(), &options, &result.text);
  } else if (*hv_bound) {
    status = mr_hv_bound(session.get(), &options, etas.data(), etas.size(),
                         inequality.empty() ? nullptr : inequality.c_str(), &result.text);
  } else if (*gamma_fit) {
    status = mr_gamma_fit(session.get(), &options, counts_csv.c_str(), &result.text);
  } else if (*simulate) {
    status = mr_simulate(session.get(), &options, &result.text);
  } else if (*analyze) {
    status = mr_analyze(session.get(), &options, dataset_dir.c_str(), &result.text);
  } else if (*report) {
    status = mr_report(session.get(), &options, prediction_json.c_str(), analysis_json.c_str(),
                       &result.text);
  }

  if (result.text) std::fputs(result.text, stdout);
  if (status != MR_OK) return report_failure(session.get(), status);
  return kExitOk;
}
