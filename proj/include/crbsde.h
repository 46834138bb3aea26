/* C interface to the conditional-reflection solver library.
 *
 * All functions return a status int: 0 on success, 2 for input validation
 * failures, 3 for tripped numerical guards, 4 for numerical failures, and
 * 1 for misuse of the API itself (null handles, missing config). On any
 * nonzero status, crb_last_error and crb_last_error_tag describe what went
 * wrong; the strings stay valid until the next call on the same session.
 */
#ifndef CRBSDE_H
#define CRBSDE_H

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef struct crb_session crb_session;

const char* crb_version(void);

crb_session* crb_session_create(void);
void crb_session_destroy(crb_session* s);

int crb_load_config_file(crb_session* s, const char* path);
int crb_load_config_text(crb_session* s, const char* text);

int crb_set_threads(crb_session* s, int threads);
int crb_set_seed(crb_session* s, unsigned long long seed);

/* command is one of "solve", "oracle", "compare", "sweep"; reports are
 * written into out_dir (created if needed). */
int crb_run(crb_session* s, const char* command, const char* out_dir);

/* Results of the last successful crb_run. */
int crb_value0(const crb_session* s, double* out);
int crb_diagnostic(const crb_session* s, const char* key, double* out);

const char* crb_last_error(const crb_session* s);
const char* crb_last_error_tag(const crb_session* s);

#ifdef __cplusplus
}
#endif

#endif /* CRBSDE_H */
