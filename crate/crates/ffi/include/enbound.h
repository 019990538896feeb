/* C interface for the enbound certification toolkit.
 *
 * Conventions:
 *   - constructors return NULL on failure; enbound_last_error_message()
 *     gives a thread-local description (do not free it),
 *   - strings returned by accessors are owned by the caller and must be
 *     released with enbound_string_free(),
 *   - every handle has exactly one matching _free function.
 *
 * Kept in sync with crates/ffi/src/lib.rs by the conformance tests there.
 */

#ifndef ENBOUND_H
#define ENBOUND_H

#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

/* Status codes returned by fallible calls. */
enum EnboundStatus {
  ENBOUND_OK = 0,
  ENBOUND_ERR_ARGUMENT = 1,
  ENBOUND_ERR_CONFIG = 2,
  ENBOUND_ERR_NUMERIC = 3,
  ENBOUND_ERR_INTERNAL = 4,
};

/* Opaque handles. */
typedef struct EnboundConfig EnboundConfig;
typedef struct EnboundModel EnboundModel;
typedef struct EnboundCertificate EnboundCertificate;

/* Library version (static string; do not free). */
const char *enbound_version(void);

/* Message for the most recent failure on this thread, or NULL.
 * Valid until the next failing call; do not free. */
const char *enbound_last_error_message(void);

/* Parse and validate a TOML run configuration. NULL on error. */
EnboundConfig *enbound_config_parse(const char *toml_text);
void enbound_config_free(EnboundConfig *cfg);

/* Build the model described by a configuration. NULL on error. */
EnboundModel *enbound_model_build(const EnboundConfig *cfg);
void enbound_model_free(EnboundModel *model);

/* Matrix dimension (0 on NULL handle). */
int enbound_model_dim(const EnboundModel *model);

/* Supremum of admissible drive intensities under the configured switching
 * profile; +inf when the perturbation vanishes, NaN on error. */
double enbound_model_eps_star_max(const EnboundModel *model);

/* Run the full certification pipeline in memory. NULL on error. */
EnboundCertificate *enbound_certify_run(const EnboundConfig *cfg);
void enbound_certificate_free(EnboundCertificate *cert);

/* Run the pipeline and write certificate artifacts under out_dir, like the
 * command-line certify subcommand. Returns an EnboundStatus. */
int enbound_certify_to_dir(const EnboundConfig *cfg, const char *out_dir);

/* 1 if every verdict passed, 0 if any failed, -1 on NULL handle. */
int enbound_certificate_overall_pass(const EnboundCertificate *cert);

/* Certificate document as JSON (17-significant-digit floats).
 * Free with enbound_string_free(). NULL on error. */
char *enbound_certificate_json(const EnboundCertificate *cert);

/* Flat per-cell table as CSV (12-significant-digit floats).
 * Free with enbound_string_free(). NULL on error. */
char *enbound_certificate_csv(const EnboundCertificate *cert);

/* Release a string returned by this library. */
void enbound_string_free(char *s);

#ifdef __cplusplus
}
#endif

#endif /* ENBOUND_H */
