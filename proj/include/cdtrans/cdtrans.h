/*
 * cdtrans - cross-domain transformer toolkit, C API.
 *
 * All functions return a cdt_status; CDT_OK means success. On failure the
 * thread-local message from cdt_last_error() describes what went wrong.
 * Objects returned through out-parameters are owned by the caller and must
 * be released with the matching *_free function.
 *
 * Structured configuration travels as JSON strings; unknown keys are
 * rejected. The theorem verifiers also return their report when the result
 * status is CDT_ERR_CONDITIONS_UNMET or CDT_ERR_ASSERTION, so callers can
 * inspect the condition trace.
 */
#ifndef CDTRANS_CDTRANS_H
#define CDTRANS_CDTRANS_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#ifndef CDT_API
#define CDT_API __attribute__((visibility("default")))
#endif

typedef enum cdt_status {
  CDT_OK = 0,
  CDT_ERR_INVALID_ARGUMENT = 1,
  CDT_ERR_CONFIG = 2,
  CDT_ERR_IO = 3,
  CDT_ERR_FORMAT = 4,
  CDT_ERR_TRUNCATED = 5,
  CDT_ERR_DIMENSION = 6,
  CDT_ERR_STATE = 7,
  CDT_ERR_CONDITIONS_UNMET = 8,
  CDT_ERR_ASSERTION = 9,
  CDT_ERR_INTERNAL = 10
} cdt_status;

typedef struct cdt_dataset cdt_dataset; /* labeled domain dataset */
typedef struct cdt_model cdt_model;     /* config + shared parameter set */
typedef struct cdt_pairset cdt_pairset; /* source-target training pairs */
typedef struct cdt_report cdt_report;   /* JSON result document */

CDT_API const char* cdt_version(void);
CDT_API const char* cdt_status_name(cdt_status status);
CDT_API const char* cdt_last_error(void);

/* Serialized default configuration; kind is one of
 * "shift" | "model" | "train" | "gmm". */
CDT_API cdt_status cdt_default_config(const char* kind, cdt_report** out);

/* ---- datasets ---------------------------------------------------------- */

/* Generates a synthetic source/target pair from a shift-spec JSON. */
CDT_API cdt_status cdt_dataset_generate(const char* shift_spec_json,
                                        uint64_t seed,
                                        cdt_dataset** source_out,
                                        cdt_dataset** target_out);
CDT_API cdt_status cdt_dataset_load(const char* path, cdt_dataset** out);
CDT_API cdt_status cdt_dataset_save(const cdt_dataset* ds, const char* path);
CDT_API cdt_status cdt_dataset_export_csv(const cdt_dataset* ds,
                                          const char* path);
CDT_API void cdt_dataset_free(cdt_dataset* ds);
CDT_API size_t cdt_dataset_size(const cdt_dataset* ds);
CDT_API size_t cdt_dataset_classes(const cdt_dataset* ds);
CDT_API size_t cdt_dataset_sample_dim(const cdt_dataset* ds);
/* Copies sample `index` into buffer (sample_dim doubles) and its label. */
CDT_API cdt_status cdt_dataset_sample(const cdt_dataset* ds, size_t index,
                                      double* buffer, size_t buffer_len,
                                      int* label_out);

/* ---- models ------------------------------------------------------------ */

CDT_API cdt_status cdt_model_create(const char* model_config_json,
                                    uint64_t seed, cdt_model** out);
CDT_API cdt_status cdt_model_load(const char* path, cdt_model** out);
CDT_API cdt_status cdt_model_save(const cdt_model* model, const char* path);
CDT_API void cdt_model_free(cdt_model* model);
CDT_API cdt_status cdt_model_predict(const cdt_model* model,
                                     const double* sample, size_t sample_len,
                                     int* class_out);
/* Report: overall accuracy, per-class accuracies, macro average. */
CDT_API cdt_status cdt_model_evaluate(const cdt_model* model,
                                      const cdt_dataset* data,
                                      cdt_report** report_out);
/* Source-only baseline training; metrics paths may be NULL to skip files. */
CDT_API cdt_status cdt_model_pretrain(cdt_model* model,
                                      const cdt_dataset* source,
                                      const cdt_dataset* target_eval,
                                      const char* train_config_json,
                                      const char* metrics_jsonl_path,
                                      const char* metrics_csv_path,
                                      cdt_report** report_out);
/* Head-averaged cross-attention weights between two samples at a layer. */
CDT_API cdt_status cdt_model_attention_csv(const cdt_model* model,
                                           const cdt_dataset* source,
                                           size_t source_index,
                                           const cdt_dataset* target,
                                           size_t target_index, size_t layer,
                                           const char* csv_path);

/* ---- pair construction -------------------------------------------------- */

/* variant: one_way_source | one_way_target | two_way | two_way_center_aware
 * metric:  cosine | euclidean */
CDT_API cdt_status cdt_pairs_build(const cdt_model* model,
                                   const cdt_dataset* source,
                                   const cdt_dataset* target,
                                   const char* variant, const char* metric,
                                   cdt_pairset** out);
CDT_API cdt_status cdt_pairs_ground_truth(const cdt_dataset* source,
                                          const cdt_dataset* target,
                                          uint64_t seed, cdt_pairset** out);
/* Replaces ceil(ratio * size) pair targets with different-class targets. */
CDT_API cdt_status cdt_pairs_corrupt(cdt_pairset* pairs,
                                     const cdt_dataset* target, double ratio,
                                     uint64_t seed);
CDT_API cdt_status cdt_pairs_load_csv(const char* path, cdt_pairset** out);
CDT_API cdt_status cdt_pairs_save_csv(const cdt_pairset* pairs,
                                      const char* path);
CDT_API void cdt_pairs_free(cdt_pairset* pairs);
CDT_API size_t cdt_pairs_size(const cdt_pairset* pairs);
CDT_API size_t cdt_pairs_kept(const cdt_pairset* pairs);
/* Recall/precision of the kept pairs against ground-truth target labels. */
CDT_API cdt_status cdt_pairs_metrics(const cdt_pairset* pairs,
                                     const cdt_dataset* source,
                                     const cdt_dataset* target,
                                     cdt_report** out);

/* ---- training and experiments ------------------------------------------ */

/* Triple-branch training on the kept pairs; one shared parameter set. */
CDT_API cdt_status cdt_train(cdt_model* model, const cdt_pairset* pairs,
                             const cdt_dataset* source,
                             const cdt_dataset* target,
                             const char* train_config_json,
                             const char* metrics_jsonl_path,
                             const char* metrics_csv_path,
                             cdt_report** report_out);
/* Pair-quality table across the four labeling variants. */
CDT_API cdt_status cdt_run_pseudolabel_table(const cdt_model* model,
                                             const cdt_dataset* source,
                                             const cdt_dataset* target,
                                             const char* metric,
                                             const char* table_csv_path,
                                             cdt_report** out);
/* Five-row loss ablation; every row restarts from the given checkpoint. */
CDT_API cdt_status cdt_run_loss_ablation(const cdt_model* model,
                                         const cdt_pairset* pairs,
                                         const cdt_dataset* source,
                                         const cdt_dataset* target,
                                         const char* train_config_json,
                                         const char* table_csv_path,
                                         cdt_report** out);
/* Corruption-robustness curves (cross-attention / direct-label / oracle). */
CDT_API cdt_status cdt_run_noise_sweep(const cdt_model* model,
                                       const cdt_dataset* source,
                                       const cdt_dataset* target,
                                       const double* ratios,
                                       size_t ratio_count,
                                       const char* train_config_json,
                                       uint64_t seed,
                                       const char* curves_csv_path,
                                       cdt_report** out);

/* ---- Gaussian-mixture denoising simulator ------------------------------ */

CDT_API cdt_status cdt_verify_theorem1(const char* gmm_spec_json,
                                       size_t trials, uint64_t seed,
                                       size_t threads,
                                       const char* report_json_path,
                                       cdt_report** out);
CDT_API cdt_status cdt_verify_theorem2(const char* gmm_spec_json,
                                       size_t trials, uint64_t seed,
                                       size_t threads,
                                       const char* report_json_path,
                                       cdt_report** out);
CDT_API cdt_status cdt_sweep_lambda(const char* gmm_spec_json,
                                    const double* lambdas, size_t count,
                                    size_t trials, uint64_t seed,
                                    const char* csv_path);
CDT_API cdt_status cdt_sweep_k(const char* gmm_spec_json,
                               const uint64_t* ks, size_t count,
                               size_t trials, uint64_t seed,
                               const char* csv_path);

/* ---- reports ------------------------------------------------------------ */

/* Borrowed pointer, valid until cdt_report_free. */
CDT_API const char* cdt_report_json(const cdt_report* report);
CDT_API void cdt_report_free(cdt_report* report);

#ifdef __cplusplus
}
#endif

#endif /* CDTRANS_CDTRANS_H */
