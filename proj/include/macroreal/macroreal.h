/* C interface to the macrorealism toolkit. */
#ifndef MACROREAL_MACROREAL_H
#define MACROREAL_MACROREAL_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define MR_API __declspec(dllexport)
#else
#define MR_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum mr_status {
  MR_OK = 0,
  MR_INVALID_ARGUMENT = 1,
  MR_CONFIG = 2,
  MR_NUMERICAL = 3, /* optimizer did not converge */
  MR_UNDEFINED = 4, /* zero denominator in a probability or statistic */
  MR_NO_PEAK = 5,
  MR_IO = 6,
  MR_INTERNAL = 7
} mr_status;

typedef struct mr_session mr_session;

/* Circuit parameters: input split, four splitter transmissions, visibility. */
typedef struct mr_setup {
  double alpha_sq;
  double t_ratios[4];
  double visibility;
} mr_setup;

typedef struct mr_qm_values {
  double lgi;
  double wlgi;
  double nsit12;
  double nsit23;
  double nsit13;
} mr_qm_values;

typedef struct mr_detection_probs {
  double p_plus;
  double p_minus;
  double p_lost;
} mr_detection_probs;

/* Blocker positions: 0 none, 1 on the +1 arm, -1 on the -1 arm. */
typedef struct mr_blockers {
  int t1;
  int t2;
} mr_blockers;

typedef struct mr_command_options {
  const char* out_dir;
  int force;
  int has_seed;
  uint64_t seed;
  int timing;
} mr_command_options;

MR_API const char* mr_version(void);

MR_API mr_status mr_session_create(mr_session** out);
MR_API void mr_session_destroy(mr_session* session);
/* Replaces the session configuration. On failure the previous one is kept. */
MR_API mr_status mr_session_load_config_json(mr_session* session, const char* json_text);
MR_API mr_status mr_session_load_config_file(mr_session* session, const char* path);
/* 0 defers to MACROREAL_THREADS, else one thread. */
MR_API mr_status mr_session_set_threads(mr_session* session, unsigned threads);
/* Message of the last failed call on this session; valid until the next call. */
MR_API const char* mr_session_last_error(const mr_session* session);

MR_API mr_status mr_nominal_setup(mr_setup* out);
MR_API mr_status mr_qm_point(const mr_setup* setup, mr_qm_values* out);
MR_API mr_status mr_detection(const mr_setup* setup, mr_blockers blockers, mr_detection_probs* out);
MR_API mr_status mr_modified_bounds(double gamma, double* lgi_bound, double* wlgi_bound);

/* Commands. Each writes into options->out_dir and returns its primary document
 * through *result, to be released with mr_string_free. */
MR_API mr_status mr_predict(mr_session* session, const mr_command_options* options, char** result);
MR_API mr_status mr_hv_bound(mr_session* session, const mr_command_options* options,
                             const double* etas, size_t n_etas, const char* inequality,
                             char** result);
MR_API mr_status mr_gamma_fit(mr_session* session, const mr_command_options* options,
                              const char* counts_csv, char** result);
MR_API mr_status mr_simulate(mr_session* session, const mr_command_options* options, char** result);
MR_API mr_status mr_analyze(mr_session* session, const mr_command_options* options,
                            const char* dataset_dir, char** result);
MR_API mr_status mr_report(mr_session* session, const mr_command_options* options,
                           const char* prediction_json, const char* analysis_json, char** result);

MR_API void mr_string_free(char* s);

#ifdef __cplusplus
}
#endif

#endif
