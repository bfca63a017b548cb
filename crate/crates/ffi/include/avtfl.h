#ifndef AVTFL_H
#define AVTFL_H

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

// Which annotation set `avtfl_evaluate` scores against.
typedef enum AvtflModality {
  AVTFL_MODALITY_FUSED = 0,
  AVTFL_MODALITY_VISUAL = 1,
  AVTFL_MODALITY_AUDIO = 2,
} AvtflModality;

// Manifest split selector; `All` means every video.
typedef enum AvtflSplit {
  AVTFL_SPLIT_ALL = 0,
  AVTFL_SPLIT_TRAIN = 1,
  AVTFL_SPLIT_VAL = 2,
  AVTFL_SPLIT_TEST = 3,
} AvtflSplit;

// Result code of every fallible call.
typedef enum AvtflStatus {
  AVTFL_STATUS_OK = 0,
  AVTFL_STATUS_NULL_POINTER = 1,
  AVTFL_STATUS_INVALID_UTF8 = 2,
  AVTFL_STATUS_INVALID_ARGUMENT = 3,
  AVTFL_STATUS_IO = 4,
  AVTFL_STATUS_PARSE = 5,
  AVTFL_STATUS_CONFIG = 6,
  AVTFL_STATUS_SHAPE = 7,
  AVTFL_STATUS_NON_FINITE = 8,
  AVTFL_STATUS_ID_MISMATCH = 9,
  AVTFL_STATUS_NO_GROUND_TRUTH = 10,
  AVTFL_STATUS_CHECKPOINT = 11,
  AVTFL_STATUS_BUFFER_TOO_SMALL = 12,
  AVTFL_STATUS_PANIC = 13,
} AvtflStatus;

// Opaque pipeline configuration.
typedef struct AvtflConfig AvtflConfig;

// Opaque trained model.
typedef struct AvtflModel AvtflModel;

// Opaque single-video prediction.
typedef struct AvtflPrediction AvtflPrediction;

// A scored temporal segment in seconds.
typedef struct AvtflSegment {
  double start;
  double end;
  double confidence;
} AvtflSegment;

// Headline metrics of one evaluation run.
typedef struct AvtflMetrics {
  double ap_50;
  double ap_75;
  double ap_95;
  double ar_100;
  double ar_90;
  double ar_50;
  double ar_20;
  double ar_10;
} AvtflMetrics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null. The pointer stays
// valid until the next call into this library on the same thread.
const char *avtfl_last_error(void);

// Library version as a static NUL-terminated string.
const char *avtfl_version(void);

// Full-scale defaults. `toy` selects the desk-scale preset instead.
struct AvtflConfig *avtfl_config_new(bool toy);

// Reads a `key = value` config file. Unknown keys are an error.
//
// # Safety
// `path` must be a NUL-terminated string; `out` must be writable.
enum AvtflStatus avtfl_config_from_file(const char *path, struct AvtflConfig **out);

// Sets one field by its config-file key, then revalidates.
//
// # Safety
// `cfg` must come from this library; `key` and `value` must be NUL-terminated.
enum AvtflStatus avtfl_config_set(struct AvtflConfig *cfg, const char *key, const char *value);

// # Safety
// `cfg` must come from this library (or be null) and not be used afterwards.
void avtfl_config_free(struct AvtflConfig *cfg);

// Loads a checkpoint directory.
//
// # Safety
// `dir` must be NUL-terminated; `out` must be writable.
enum AvtflStatus avtfl_model_load(const char *dir, struct AvtflModel **out);

// Writes the model as a checkpoint directory.
//
// # Safety
// `model` must come from this library; `dir` must be NUL-terminated.
enum AvtflStatus avtfl_model_save(const struct AvtflModel *model, const char *dir);

// Copies the model's configuration into a new handle.
//
// # Safety
// `model` must come from this library; `out` must be writable.
enum AvtflStatus avtfl_model_config(const struct AvtflModel *model, struct AvtflConfig **out);

// # Safety
// `model` must come from this library (or be null) and not be used afterwards.
void avtfl_model_free(struct AvtflModel *model);

// Writes a synthetic dataset. `spec_json` may be null for defaults.
//
// # Safety
// Non-null string arguments must be NUL-terminated.
enum AvtflStatus avtfl_synthesize(const char *spec_json, const char *out_dir);

// Trains on the manifest's train split and writes a checkpoint directory.
//
// # Safety
// `cfg` must come from this library; paths must be NUL-terminated.
enum AvtflStatus avtfl_train(const struct AvtflConfig *cfg,
                             const char *manifest,
                             const char *checkpoint_dir);

// Runs inference over a manifest split and writes a predictions file.
// `cfg` may be null to use the model's own configuration.
//
// # Safety
// Handles must come from this library; paths must be NUL-terminated;
// `out_count` may be null.
enum AvtflStatus avtfl_infer_manifest(const struct AvtflModel *model,
                                      const struct AvtflConfig *cfg,
                                      const char *manifest,
                                      enum AvtflSplit split,
                                      const char *predictions_out,
                                      size_t *out_count);

// Runs the full pipeline on one video. Features are row-major
// `dim × frames` arrays of raw per-frame features.
//
// # Safety
// `model` must come from this library; `visual` and `audio` must point to
// `visual_dim * visual_frames` and `audio_dim * audio_frames` doubles.
enum AvtflStatus avtfl_infer_features(const struct AvtflModel *model,
                                      const double *visual,
                                      size_t visual_dim,
                                      size_t visual_frames,
                                      const double *audio,
                                      size_t audio_dim,
                                      size_t audio_frames,
                                      double duration_seconds,
                                      struct AvtflPrediction **out);

// Whether the video was classified fake. Null handles read as real.
//
// # Safety
// `pred` must come from this library or be null.
bool avtfl_prediction_is_fake(const struct AvtflPrediction *pred);

// Number of segments, in descending confidence order.
//
// # Safety
// `pred` must come from this library or be null.
size_t avtfl_prediction_len(const struct AvtflPrediction *pred);

// Pointer to the segment array (`avtfl_prediction_len` entries), owned by
// the handle.
//
// # Safety
// `pred` must come from this library or be null.
const struct AvtflSegment *avtfl_prediction_segments(const struct AvtflPrediction *pred);

// # Safety
// `pred` must come from this library (or be null) and not be used afterwards.
void avtfl_prediction_free(struct AvtflPrediction *pred);

// Soft-NMS over `n` segments of a video of length `duration_seconds`. The
// result (sorted by confidence) goes to `out`, which must hold `capacity`
// entries; `out_len` receives the count. Input and output may alias.
//
// # Safety
// `segments` must point to `n` entries and `out` to `capacity` entries.
enum AvtflStatus avtfl_soft_nms(const struct AvtflSegment *segments,
                                size_t n,
                                double duration_seconds,
                                double alpha,
                                double t1,
                                double t2,
                                struct AvtflSegment *out,
                                size_t capacity,
                                size_t *out_len);

// Scores a predictions file against an annotations file. When `report_out`
// is non-null the full JSON report is written there.
//
// # Safety
// Paths must be NUL-terminated (`report_out` may be null); `out` must be
// writable.
enum AvtflStatus avtfl_evaluate(const char *predictions,
                                const char *annotations,
                                enum AvtflModality modality,
                                const char *report_out,
                                struct AvtflMetrics *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* AVTFL_H */
