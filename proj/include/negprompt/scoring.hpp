// Copyright 2026 The negprompt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "negprompt/losses.hpp"
#include "negprompt/numcore/tape.hpp"
#include "negprompt/prompt.hpp"
#include "negprompt/rng.hpp"

namespace negprompt {

/// How the training step chooses between positive-only (0) and joint (1)
/// scoring.
struct ModePolicy {
  enum class Kind { fixed_0, fixed_1, bernoulli };
  Kind kind = Kind::bernoulli;
  double p = 0.5;

  /// Accepts "fixed_0", "fixed_1", "bernoulli" and "bernoulli(p)".
  static ModePolicy parse(const std::string& text);
  std::string to_string() const;
  void validate() const;
};

int sample_mode_indicator(const ModePolicy& policy, Rng& rng);

struct NNCConfig {
  double beta = 0.3;
  ModePolicy policy;
  void validate() const;
};

struct SimilarityScores {
  Tensor s_pos;  // [N_q × M]
  Tensor s_neg;  // [N_q × M·K], category c in columns [c·K, (c+1)·K)
  std::size_t k = 0;
};

/// S_P = Q·V_Pᵀ and S_N = Q·V_Nᵀ. `negatives` may be empty when K = 0.
SimilarityScores similarity(const Tensor& queries, const Tensor& positives,
                            const Tensor& negatives, std::size_t k);

/// σ(S_P − indicator·β·max_i S_N,i) per query–category cell. With
/// indicator 0, β = 0 or K = 0 the result is σ(S_P) computed exactly as the
/// positive-only path.
Tensor nnc_probability(const SimilarityScores& s, double beta, int indicator);

enum class InferenceMode { positive_only, auto_suggested, user_curated };
InferenceMode parse_inference_mode(const std::string& text);
const char* to_string(InferenceMode m);

struct Detection {
  std::size_t query = 0;
  Box4 box{};
  int category_id = 0;
  double probability = 0.0;
  /// Probability of the same query and category with the suppression off.
  double probability_positive_only = 0.0;
};

struct InferOptions {
  InferenceMode mode = InferenceMode::auto_suggested;
  double beta = 0.3;
  double score_threshold = 0.0;
  /// Per-category greedy suppression above this IoU; 0 disables it.
  double nms_iou = 0.0;
  /// Emit every query–category pair instead of each query's best category.
  bool all_categories = false;
};

/// Per query, the argmax category under calibrated probability (ties to the
/// lower column), or every category with `all_categories`. Detections at or
/// above the threshold come sorted by descending probability, ties by query
/// index. Throws MissingNegativesError for
/// user_curated without negative rows.
std::vector<Detection> infer_detections(const Tensor& queries, const Tensor& boxes,
                                        const PromptBank& bank, const InferOptions& opts);

namespace ad {

/// Differentiable NNC probabilities. `s_neg` is ignored when the suppression
/// term vanishes.
Var nnc_probability(Var s_pos, Var s_neg, std::size_t k, double beta, int indicator);

}  // namespace ad

}  // namespace negprompt
