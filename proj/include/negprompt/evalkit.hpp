// Copyright 2026 The negprompt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "negprompt/dataengine.hpp"
#include "negprompt/detector.hpp"
#include "negprompt/scoring.hpp"

namespace negprompt {

struct EvalDetection {
  int image_id = 0;
  int category_id = 0;
  BBox bbox;  // pixels
  double score = 0.0;
};

struct EvalGroundTruth {
  int image_id = 0;
  int category_id = 0;
  BBox bbox;
};

struct APConfig {
  std::vector<double> iou_thresholds = default_thresholds();
  /// Highest-scoring detections kept per image.
  std::size_t max_detections = 100;
  static std::vector<double> default_thresholds();  // 0.50:0.05:0.95
};

struct EvalResult {
  /// Mean over categories with ground truth of the threshold-averaged AP.
  double ap = 0.0;
  /// Bucket means; empty when the bucket has no evaluated category.
  std::optional<double> ap_r, ap_c, ap_f;
  std::map<int, double> per_category;
};

/// COCO-style AP: greedy score-descending matching per category and
/// threshold, 101-point interpolated precision. Categories without ground
/// truth are skipped; no ground truth at all gives AP 0.
EvalResult compute_ap(const std::vector<EvalDetection>& dets, const std::vector<EvalGroundTruth>& gts,
                      const APConfig& cfg = {});

/// Direct evaluation of the same definition: explicit prefix precision and
/// recall, maximum precision over every prefix reaching each recall level.
EvalResult reference_ap(const std::vector<EvalDetection>& dets, const std::vector<EvalGroundTruth>& gts,
                        const APConfig& cfg = {});

struct BucketAP {
  std::optional<double> ap_r, ap_c, ap_f;
};
BucketAP bucketed_ap(const EvalResult& result, const std::map<int, Bucket>& buckets);

/// Mean absolute difference. Throws ShapeError on a length mismatch.
double counting_mae(const std::vector<double>& predicted, const std::vector<double>& truth);

/// Detections scoring at least `min_score` that label a box as a category
/// while overlapping (IoU ≥ `iou_thr`) a ground-truth instance of its
/// confusable partner and no instance of its own category.
std::size_t confusable_false_positives(const std::vector<EvalDetection>& dets,
                                       const std::vector<EvalGroundTruth>& gts, const Dataset& data,
                                       double min_score = 0.5, double iou_thr = 0.5);

std::vector<EvalGroundTruth> ground_truth(const Dataset& data, const std::vector<int>& image_ids);

// ----------------------------------------------------------------------------
// Model evaluation

struct EvalOptions {
  InferenceMode mode = InferenceMode::auto_suggested;
  double beta = 0.3;
  /// Training images per category used to build the prompt bank.
  std::size_t n_pos = 8;
  /// Negative rows per category in the bank; at most n_pos times the model K.
  std::size_t k = 3;
  double score_threshold = 0.0;
  std::uint64_t seed = 0;
  JitterSpec neg_spec = JitterSpec::negative();
  APConfig ap;
  /// Images to evaluate; empty means the validation split.
  std::vector<int> image_ids;
};

struct EvalOutput {
  EvalResult result;
  std::vector<EvalDetection> detections;
  std::size_t confusable_fp = 0;
};

/// Builds the prompt bank from the "prompts" stream of `opts.seed`.
PromptBank build_eval_bank(const Dataset& data, const Checkpoint& ckpt, const EvalOptions& opts);

/// Predictions of every image; reused across inference-only settings.
std::map<int, Prediction> predict_images(const Dataset& data, const Checkpoint& ckpt,
                                         const std::vector<int>& image_ids);

EvalOutput evaluate(const Dataset& data, const std::map<int, Prediction>& predictions,
                    const PromptBank& bank, const EvalOptions& opts);

/// Bank construction, prediction and scoring in one call.
EvalOutput evaluate_checkpoint(const Dataset& data, const Checkpoint& ckpt, const EvalOptions& opts);

// ----------------------------------------------------------------------------
// Sweeps

enum class SweepAxis { beta, eta, k, n_pos, mode_policy };
SweepAxis parse_sweep_axis(const std::string& text);
const char* to_string(SweepAxis a);
/// True for axes that need one model per grid value.
bool axis_retrains(SweepAxis a);

struct SweepBase {
  ModelConfig model;
  TrainConfig train;
  EvalOptions eval;
};

struct SweepPoint {
  std::string value;
  EvalResult result;
  /// Set for mode_policy sweeps: AP with inference suppression off.
  std::optional<EvalResult> positive_only;
};

struct SweepReport {
  SweepAxis axis = SweepAxis::beta;
  std::vector<SweepPoint> points;
  std::uint64_t seed = 0;
};

/// Inference axes evaluate `checkpoint` (trained from `base` when absent);
/// eta and mode_policy retrain per grid value. `seed` replaces the training
/// and evaluation seeds of `base`.
SweepReport run_sweep(SweepAxis axis, const std::vector<std::string>& grid, const SweepBase& base,
                      const Dataset& data, std::uint64_t seed,
                      const std::optional<Checkpoint>& checkpoint = std::nullopt);

/// Columns axis_value, ap, ap_r, ap_c, ap_f, seed; absent buckets print "NA".
std::string sweep_csv(const SweepReport& report);
std::string eval_csv(const EvalResult& result, std::uint64_t seed, const std::string& label);
std::string sweep_summary(const SweepReport& report);

/// Rows {image_id, category_id, bbox [x, y, w, h], score}.
std::string detections_json(const std::vector<EvalDetection>& dets);

/// Shortest text that parses back to the same double.
std::string format_number(double v);

}  // namespace negprompt
