#ifndef ADMMPB_H
#define ADMMPB_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stddef.h>
#include <stdint.h>

/*
 Result codes of every fallible function.
 */
typedef enum AdmmpbStatus {
  ADMMPB_STATUS_OK = 0,
  ADMMPB_STATUS_NULL_POINTER = 1,
  ADMMPB_STATUS_INVALID_ARGUMENT = 2,
  ADMMPB_STATUS_INVALID_CONFIG = 3,
  ADMMPB_STATUS_IO = 4,
  ADMMPB_STATUS_CHECKPOINT = 5,
  ADMMPB_STATUS_NUMERICAL = 6,
  ADMMPB_STATUS_BUFFER_TOO_SMALL = 7,
  ADMMPB_STATUS_PANIC = 8,
  ADMMPB_STATUS_INTERNAL = 9,
} AdmmpbStatus;

/*
 Experiment configuration handle.
 */
typedef struct AdmmpbConfig AdmmpbConfig;

/*
 Trained (or loaded) operator parameters together with the training-loss
 trace and the operator settings they were trained under.
 */
typedef struct AdmmpbModel AdmmpbModel;

/*
 Test-bank indicators of one model.
 */
typedef struct AdmmpbIndicators {
  /*
   total variation of the training-loss trace
   */
  double delta_loss;
  double lq_mean;
  double ca_mean;
  double violation;
  double violation_times_lq;
  double min_obstacle_distance;
  /*
   1 when no test trajectory enters the obstacle, else 0
   */
  int32_t collision_free;
} AdmmpbIndicators;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message of the last failing call on this thread, or null if none.
 */
const char *admmpb_last_error(void);

/*
 Library version as a static nul-terminated string.
 */
const char *admmpb_version(void);

/*
 Releases a string returned by this library. Null is ignored.

 # Safety
 `s` must come from this library and not have been freed.
 */
void admmpb_string_free(char *s);

/*
 Creates a configuration with the built-in defaults.

 # Safety
 `out` must be a valid pointer.
 */
enum AdmmpbStatus admmpb_config_new(struct AdmmpbConfig **out);

/*
 Parses a JSON configuration; missing fields take their defaults.

 # Safety
 `json` must be a nul-terminated string and `out` a valid pointer.
 */
enum AdmmpbStatus admmpb_config_from_json(const char *json, struct AdmmpbConfig **out);

/*
 Serializes the configuration to JSON. Free the result with
 `admmpb_string_free`.

 # Safety
 `cfg` must be a live handle and `out` a valid pointer.
 */
enum AdmmpbStatus admmpb_config_to_json(const struct AdmmpbConfig *cfg, char **out);

/*
 Applies the reduced desk-scale preset.

 # Safety
 `cfg` must be a live handle.
 */
enum AdmmpbStatus admmpb_config_desk_scale(struct AdmmpbConfig *cfg);

/*
 # Safety
 `cfg` must be a live handle.
 */
enum AdmmpbStatus admmpb_config_set_seed(struct AdmmpbConfig *cfg, uint64_t seed);

/*
 Sets the number of outer ADMM iterations.

 # Safety
 `cfg` must be a live handle.
 */
enum AdmmpbStatus admmpb_config_set_max_iters(struct AdmmpbConfig *cfg, uintptr_t max_iters);

/*
 Sets the number of baseline training epochs.

 # Safety
 `cfg` must be a live handle.
 */
enum AdmmpbStatus admmpb_config_set_baseline_epochs(struct AdmmpbConfig *cfg, uintptr_t epochs);

/*
 Releases a configuration. Null is ignored.

 # Safety
 `cfg` must come from this library and not have been freed.
 */
void admmpb_config_free(struct AdmmpbConfig *cfg);

/*
 Trains with ADMM-PB.

 # Safety
 `cfg` must be a live handle and `out` a valid pointer.
 */
enum AdmmpbStatus admmpb_train_admm(const struct AdmmpbConfig *cfg, struct AdmmpbModel **out);

/*
 Trains the CBF-penalty baseline with weight `omega`.

 # Safety
 `cfg` must be a live handle and `out` a valid pointer.
 */
enum AdmmpbStatus admmpb_train_baseline(const struct AdmmpbConfig *cfg,
                                        double omega,
                                        struct AdmmpbModel **out);

/*
 Evaluates `model` on the test bank of `cfg`.

 # Safety
 `cfg` and `model` must be live handles and `out` a valid pointer.
 */
enum AdmmpbStatus admmpb_evaluate(const struct AdmmpbConfig *cfg,
                                  const struct AdmmpbModel *model,
                                  struct AdmmpbIndicators *out);

/*
 Writes the model parameters as a checkpoint file.

 # Safety
 `model` must be a live handle and `path` a nul-terminated string.
 */
enum AdmmpbStatus admmpb_model_save(const struct AdmmpbModel *model, const char *path);

/*
 Loads a checkpoint. The loaded model has an empty loss trace.

 # Safety
 `path` must be a nul-terminated string and `out` a valid pointer.
 */
enum AdmmpbStatus admmpb_model_load(const char *path, struct AdmmpbModel **out);

/*
 Number of parameters of the model.

 # Safety
 `model` must be a live handle and `out` a valid pointer.
 */
enum AdmmpbStatus admmpb_model_param_count(const struct AdmmpbModel *model, uintptr_t *out);

/*
 Copies the parameters into `buf`, which must hold at least
 `admmpb_model_param_count` values.

 # Safety
 `model` must be a live handle and `buf` valid for `len` writes.
 */
enum AdmmpbStatus admmpb_model_params(const struct AdmmpbModel *model, double *buf, uintptr_t len);

/*
 Length of the training-loss trace.

 # Safety
 `model` must be a live handle and `out` a valid pointer.
 */
enum AdmmpbStatus admmpb_model_trace_len(const struct AdmmpbModel *model, uintptr_t *out);

/*
 Copies the training-loss trace into `buf`.

 # Safety
 `model` must be a live handle and `buf` valid for `len` writes.
 */
enum AdmmpbStatus admmpb_model_trace(const struct AdmmpbModel *model, double *buf, uintptr_t len);

/*
 Outer iterations (ADMM) or epochs (baseline) run, and whether ADMM met
 its stopping tolerances (1) or not (0).

 # Safety
 `model` must be a live handle; out-pointers must be valid.
 */
enum AdmmpbStatus admmpb_model_progress(const struct AdmmpbModel *model,
                                        uintptr_t *iterations,
                                        int32_t *converged);

/*
 A-priori l2 gain bound of the model's operator.

 # Safety
 `model` must be a live handle and `out` a valid pointer.
 */
enum AdmmpbStatus admmpb_model_gain_bound(const struct AdmmpbModel *model, double *out);

/*
 Releases a model. Null is ignored.

 # Safety
 `model` must come from this library and not have been freed.
 */
void admmpb_model_free(struct AdmmpbModel *model);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ADMMPB_H */
