#include "macroreal/macroreal.h"

#include <cstdlib>
#include <cstring>
#include <new>
#include <string>

#include "macroreal/commands.hpp"
#include "macroreal/error.hpp"
#include "macroreal/multiphoton.hpp"
#include "macroreal/quantum_model.hpp"

struct mr_session {
  macroreal::commands::Config config;
  std::string last_error;
};

namespace {

using macroreal::Error;
using macroreal::ErrorKind;

mr_status status_of(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidArgument: return MR_INVALID_ARGUMENT;
    case ErrorKind::Config: return MR_CONFIG;
    case ErrorKind::Io: return MR_IO;
    case ErrorKind::Undefined:
    case ErrorKind::Degenerate: return MR_UNDEFINED;
    case ErrorKind::NoPeak: return MR_NO_PEAK;
    case ErrorKind::NonConvergence: return MR_NUMERICAL;
  }
  return MR_INTERNAL;
}

// Runs f, translating exceptions into a status and the session's message.
template <typename F>
mr_status guarded(mr_session* session, F&& f) {
  std::string message;
  mr_status status = MR_OK;
  try {
    f();
  } catch (const Error& e) {
    status = status_of(e.kind());
    message = e.what();
  } catch (const std::filesystem::filesystem_error& e) {
    status = MR_IO;
    message = e.what();
  } catch (const std::bad_alloc&) {
    status = MR_INTERNAL;
    message = "out of memory";
  } catch (const std::exception& e) {
    status = MR_INTERNAL;
    message = e.what();
  }
  if (session) session->last_error = message;
  return status;
}

char* copy_string(const std::string& s) {
  auto* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

macroreal::quantum::SetupParams to_setup(const mr_setup& s) {
  macroreal::quantum::SetupParams p;
  p.alpha_sq = s.alpha_sq;
  for (int i = 0; i < 4; ++i) p.t_ratios[static_cast<std::size_t>(i)] = s.t_ratios[i];
  p.visibility = s.visibility;
  p.validate();
  return p;
}

macroreal::Block to_block(int b) {
  if (b == 0) return macroreal::Block::None;
  if (b == 1) return macroreal::Block::Plus;
  if (b == -1) return macroreal::Block::Minus;
  macroreal::fail(ErrorKind::InvalidArgument, "blocker must be 0, 1 or -1");
}

macroreal::commands::CommandOptions to_options(const mr_command_options* o) {
  macroreal::commands::CommandOptions out;
  if (!o) return out;
  if (o->out_dir) out.out_dir = o->out_dir;
  out.force = o->force != 0;
  if (o->has_seed) out.seed = o->seed;
  out.timing = o->timing != 0;
  return out;
}

void need(const void* p, const char* what) {
  if (!p) macroreal::fail(ErrorKind::InvalidArgument, std::string(what) + " must not be null");
}

}  // namespace

extern "C" {

const char* mr_version(void) { return macroreal::commands::kVersion; }

mr_status mr_session_create(mr_session** out) {
  if (!out) return MR_INVALID_ARGUMENT;
  *out = new (std::nothrow) mr_session();
  return *out ? MR_OK : MR_INTERNAL;
}

void mr_session_destroy(mr_session* session) { delete session; }

mr_status mr_session_load_config_json(mr_session* session, const char* json_text) {
  if (!session) return MR_INVALID_ARGUMENT;
  return guarded(session, [&] {
    need(json_text, "json_text");
    const unsigned threads = session->config.threads;
    session->config = macroreal::commands::parse_config(json_text);
    session->config.threads = threads;
  });
}

mr_status mr_session_load_config_file(mr_session* session, const char* path) {
  if (!session) return MR_INVALID_ARGUMENT;
  return guarded(session, [&] {
    need(path, "path");
    const unsigned threads = session->config.threads;
    session->config = macroreal::commands::load_config(path);
    session->config.threads = threads;
  });
}

mr_status mr_session_set_threads(mr_session* session, unsigned threads) {
  if (!session) return MR_INVALID_ARGUMENT;
  session->config.threads = threads;
  session->last_error.clear();
  return MR_OK;
}

const char* mr_session_last_error(const mr_session* session) {
  return session ? session->last_error.c_str() : "null session";
}

mr_status mr_nominal_setup(mr_setup* out) {
  if (!out) return MR_INVALID_ARGUMENT;
  const auto p = macroreal::quantum::nominal_setup();
  out->alpha_sq = p.alpha_sq;
  for (int i = 0; i < 4; ++i) out->t_ratios[i] = p.t_ratios[static_cast<std::size_t>(i)];
  out->visibility = p.visibility;
  return MR_OK;
}

mr_status mr_qm_point(const mr_setup* setup, mr_qm_values* out) {
  if (!setup || !out) return MR_INVALID_ARGUMENT;
  return guarded(nullptr, [&] {
    const auto p = to_setup(*setup);
    const auto nsit = macroreal::quantum::qm_nsit(p);
    *out = {macroreal::quantum::qm_lgi(p), macroreal::quantum::qm_wlgi(p), nsit.nsit12, nsit.nsit23,
            nsit.nsit13};
  });
}

mr_status mr_detection(const mr_setup* setup, mr_blockers blockers, mr_detection_probs* out) {
  if (!setup || !out) return MR_INVALID_ARGUMENT;
  return guarded(nullptr, [&] {
    const auto d = macroreal::quantum::detection_probs(
        to_setup(*setup), {to_block(blockers.t1), to_block(blockers.t2)});
    *out = {d.p_plus, d.p_minus, d.p_lost};
  });
}

mr_status mr_modified_bounds(double gamma, double* lgi_bound, double* wlgi_bound) {
  if (!lgi_bound || !wlgi_bound) return MR_INVALID_ARGUMENT;
  return guarded(nullptr, [&] {
    const auto b = macroreal::multiphoton::modified_bounds(gamma);
    *lgi_bound = b.lgi;
    *wlgi_bound = b.wlgi;
  });
}

mr_status mr_predict(mr_session* session, const mr_command_options* options, char** result) {
  if (!session) return MR_INVALID_ARGUMENT;
  return guarded(session, [&] {
    need(result, "result");
    *result = copy_string(macroreal::commands::cmd_predict(session->config, to_options(options)));
  });
}

mr_status mr_hv_bound(mr_session* session, const mr_command_options* options, const double* etas,
                      size_t n_etas, const char* inequality, char** result) {
  if (!session) return MR_INVALID_ARGUMENT;
  return guarded(session, [&] {
    need(result, "result");
    auto config = session->config;
    if (n_etas > 0) {
      need(etas, "etas");
      config.hv.etas.assign(etas, etas + n_etas);
    }
    if (inequality) config.hv.inequality = inequality;
    macroreal::commands::validate_config(config);
    *result = copy_string(macroreal::commands::cmd_hv_bound(config, to_options(options)));
  });
}

mr_status mr_gamma_fit(mr_session* session, const mr_command_options* options, const char* counts_csv,
                       char** result) {
  if (!session) return MR_INVALID_ARGUMENT;
  return guarded(session, [&] {
    need(result, "result");
    need(counts_csv, "counts_csv");
    *result = copy_string(macroreal::commands::cmd_gamma_fit(session->config, counts_csv, to_options(options)));
  });
}

mr_status mr_simulate(mr_session* session, const mr_command_options* options, char** result) {
  if (!session) return MR_INVALID_ARGUMENT;
  return guarded(session, [&] {
    need(result, "result");
    *result = copy_string(macroreal::commands::cmd_simulate(session->config, to_options(options)));
  });
}

mr_status mr_analyze(mr_session* session, const mr_command_options* options, const char* dataset_dir,
                     char** result) {
  if (!session) return MR_INVALID_ARGUMENT;
  return guarded(session, [&] {
    need(result, "result");
    need(dataset_dir, "dataset_dir");
    *result = copy_string(macroreal::commands::cmd_analyze(session->config, dataset_dir, to_options(options)));
  });
}

mr_status mr_report(mr_session* session, const mr_command_options* options, const char* prediction_json,
                    const char* analysis_json, char** result) {
  if (!session) return MR_INVALID_ARGUMENT;
  return guarded(session, [&] {
    need(result, "result");
    need(prediction_json, "prediction_json");
    need(analysis_json, "analysis_json");
    *result = copy_string(macroreal::commands::cmd_report(prediction_json, analysis_json, to_options(options)));
  });
}

void mr_string_free(char* s) { std::free(s); }

}  // extern "C"
