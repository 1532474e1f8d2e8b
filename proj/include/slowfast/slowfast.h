#ifndef SLOWFAST_SLOWFAST_H
#define SLOWFAST_SLOWFAST_H

/* C interface of the slow-fast simulator. Every call returns an sf_status;
 * on failure sf_last_error() describes the problem (thread local). Strings
 * returned through char** are owned by the caller and freed with sf_string_free. */

#include <stddef.h>
#include <stdint.h>

#if defined(SLOWFAST_BUILDING)
#define SF_API __attribute__((visibility("default")))
#else
#define SF_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum sf_status {
  SF_OK = 0,
  SF_ERR_CONFIG = 1,       /* invalid configuration or usage */
  SF_ERR_VERIFICATION = 2, /* an oracle reported violations */
  SF_ERR_RUNTIME = 3       /* numerical abort budget, I/O, internal failure */
} sf_status;

typedef struct sf_config sf_config;

SF_API const char* sf_version(void);
SF_API const char* sf_last_error(void);
SF_API void sf_string_free(char* s);

/* Caps worker threads (0 = hardware concurrency). Results do not depend on it. */
SF_API void sf_set_threads(int n);

SF_API sf_status sf_config_default(sf_config** out);
SF_API sf_status sf_config_load(const char* path, sf_config** out);
SF_API sf_status sf_config_set(sf_config* cfg, const char* dotted_key, const char* value);
SF_API sf_status sf_config_get_double(const sf_config* cfg, const char* dotted_key, double* value);
SF_API sf_status sf_config_validate(const sf_config* cfg);
SF_API sf_status sf_config_to_json(const sf_config* cfg, char** json_out);
SF_API void sf_config_free(sf_config* cfg);

/* Runs every inequality oracle for (beta, gamma). SF_ERR_VERIFICATION when any sample violates. */
SF_API sf_status sf_verify_lemmas(const sf_config* cfg, double beta, double gamma, uint64_t samples, uint64_t seed,
                                  char** report_json);

/* Coupled ensemble at (eps, nu); writes CSV/JSON results and returns a JSON summary. */
SF_API sf_status sf_simulate(const sf_config* cfg, double eps, double nu, char** summary_json);

/* Averaged drift at u. u_path == NULL selects u = 0; otherwise a text file with one
 * spectral coefficient "re im" (or "re,im") per line in FFT order. tol > 0 targets that std_error. */
SF_API sf_status sf_fbar(const sf_config* cfg, const char* u_path, double tol, char** estimate_json);

/* kind: "eps", "nu", "holder" or "khasminskii". Writes results and returns the sweep JSON. */
SF_API sf_status sf_sweep(const sf_config* cfg, const char* kind, const double* values, size_t n_values,
                          char** result_json);

#ifdef __cplusplus
}
#endif

#endif
