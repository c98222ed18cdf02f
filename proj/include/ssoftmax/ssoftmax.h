/* C API of the ssoftmax toolkit.
 *
 * Conventions:
 *   - every function returns an SSX_* status code; 0 means success
 *   - on failure, ssx_last_error() returns a thread-local message
 *   - out-parameters are written only on success (exception: ssx_grad_check
 *     writes its report even when checks fail)
 *   - strings returned through char** are heap-allocated; release them with
 *     ssx_string_free. Handles are released with their matching _free call.
 */
#ifndef SSOFTMAX_H
#define SSOFTMAX_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define SSX_API __declspec(dllexport)
#else
#define SSX_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

enum {
  SSX_OK = 0,
  SSX_ERR_VALIDATION = 1, /* bad config, shape or argument */
  SSX_ERR_NUMERIC = 2,    /* NaN/Inf abort during computation */
  SSX_ERR_IO = 3          /* missing or corrupt file */
};

typedef struct ssx_dataset ssx_dataset;
typedef struct ssx_model ssx_model;
typedef struct ssx_scores ssx_scores;

SSX_API const char* ssx_version(void);
SSX_API const char* ssx_last_error(void);
SSX_API void ssx_string_free(char* s);

/* Canonical 64-bit hash of a JSON document (key order normalized); the same
 * value the library embeds in reports as "config_hash". */
SSX_API int ssx_config_hash(const char* json_text, char** out_hash);

/* ---- datasets ---- */

/* spec_json: the noise-trap generator spec (see README). Produces the train
 * and test splits in one call so both derive from the same seed. */
SSX_API int ssx_dataset_generate(const char* spec_json,
                                 ssx_dataset** out_train,
                                 ssx_dataset** out_test);
SSX_API int ssx_dataset_read(const char* path, ssx_dataset** out);
SSX_API int ssx_dataset_write(const ssx_dataset* ds, const char* path);
SSX_API int ssx_dataset_read_idx(const char* images_path,
                                 const char* labels_path, ssx_dataset** out);
/* Header + provenance as a JSON string. */
SSX_API int ssx_dataset_info(const ssx_dataset* ds, char** out_json);
SSX_API void ssx_dataset_free(ssx_dataset* ds);

/* ---- training and models ---- */

/* config_json: a full experiment config; the model and train sections drive
 * the run, the whole document is hashed for provenance. eval_set may be NULL.
 */
SSX_API int ssx_train(const char* config_json, const ssx_dataset* train_set,
                      const ssx_dataset* eval_set, ssx_model** out_model,
                      char** out_log_json);
SSX_API int ssx_model_read(const char* path, ssx_model** out);
SSX_API int ssx_model_write(const ssx_model* m, const char* path);
SSX_API void ssx_model_free(ssx_model* m);

/* ---- evaluation and attacks ---- */

#define SSX_EVAL_WITH_CURVES 1u /* include per-class ROC/PR points */

/* out_scores may be NULL when the raw score matrices are not needed. */
SSX_API int ssx_evaluate(const ssx_model* m, const ssx_dataset* ds,
                         unsigned flags, char** out_metrics_json,
                         ssx_scores** out_scores);

/* attack_json: {"impulse_p": [..], "background_token": int (optional),
 * "seed": u64}. Runs the clean pass plus every attacked variant and reports
 * the accuracy declines. */
SSX_API int ssx_attack(const ssx_model* m, const ssx_dataset* ds,
                       const char* attack_json, char** out_report_json);

/* ---- score dumps and fusion ---- */

SSX_API int ssx_scores_read(const char* path, ssx_scores** out);
SSX_API int ssx_scores_write(const ssx_scores* s, const char* path);
SSX_API void ssx_scores_free(ssx_scores* s);

/* fusion_json: {"method": "gf"|"af", "target_g": int (0 = max input grid),
 * "sigma_floor": double}. Channels must cover identical sample ids. */
SSX_API int ssx_fuse(const ssx_scores* const* channels, size_t n_channels,
                     const char* fusion_json, char** out_report_json);

/* ---- gradient harness ---- */

/* negative_control != 0 appends a deliberately broken check that must fail.
 * Returns SSX_OK only when every check passes. */
SSX_API int ssx_grad_check(int negative_control, char** out_report_json);

#ifdef __cplusplus
}
#endif

#endif /* SSOFTMAX_H */
