// Copyright 2026 The negprompt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>
#include <utility>
#include <vector>

#include "negprompt/dataengine.hpp"
#include "negprompt/geometry.hpp"
#include "negprompt/numcore/tape.hpp"
#include "negprompt/rng.hpp"

namespace negprompt {

enum class Polarity { positive, negative };

struct VisualPrompt {
  int category_id = 0;
  BBox box;
  Polarity polarity = Polarity::positive;
  int source_image_id = 0;
};

/// Multi-scale features of one image. Level j has stride 2^(j+1) pixels.
struct FeaturePyramid {
  std::vector<Var> levels;
  std::vector<double> strides;
  double image_w = 0.0;
  double image_h = 0.0;
};

struct PromptEncoderConfig {
  std::size_t dim = 64;
  /// Channels of every pyramid level.
  std::size_t channels = 32;
  std::size_t k = 3;
  /// Side of the sampling grid laid over the box at each level.
  std::size_t grid = 4;
  std::size_t levels = 3;
  std::size_t hidden = 128;
  void validate() const;
};

/// Parameters named "prompt.*": the query Q_P [1×D] and the offsets
/// "prompt.q_neg" [K×D] (zero at init) with Q_N[i] = Q_P + q_neg[i], key /
/// value / query / output projections of the box attention, one
/// self-attention block and a two-layer FFN, each followed by layer norm.
ParamMap init_prompt_encoder(const PromptEncoderConfig& cfg, Rng& rng);

struct TrainingPrompts {
  VisualPrompt positive;
  std::vector<VisualPrompt> negatives;
};

/// One positive from a mild jitter of a uniformly drawn instance of
/// `category_id`, and K negatives from independent strong jitters of the same
/// instance. Throws MissingCategoryError when the scene has no such instance.
TrainingPrompts generate_training_prompts(const Scene& scene, int category_id,
                                          const JitterSpec& pos_spec, const JitterSpec& neg_spec,
                                          std::size_t k, Rng& rng);

/// Pixel-space sample points of the G×G grid at one level, already mapped to
/// feature-map coordinates and clamped to the cells the box covers.
struct SamplePoints {
  std::vector<double> xs;
  std::vector<double> ys;
};
SamplePoints box_sample_points(const BBox& box, double stride, std::size_t map_w,
                               std::size_t map_h, std::size_t grid);

/// Encodes boxes of one polarity into raw embeddings [n×D]. Positives use
/// Q_P; negatives are processed in consecutive chunks of K with row i of a
/// chunk attended by Q_N[i], and self-attention runs within each chunk.
/// Throws EncodeError when a box leaves the image or has a side under one
/// pixel.
Var encode_prompts(Tape& tape, const FeaturePyramid& pyramid, const std::vector<BBox>& boxes,
                   Polarity polarity, const ParamMap& params, const PromptEncoderConfig& cfg);

/// Mean over each group of rows followed by unit normalisation -> [M×D].
/// Throws MissingCategoryError when a group is empty.
Var aggregate_positives(Var embeddings, const std::vector<std::vector<std::size_t>>& groups);

/// Indices of the K rows with the largest dot product with `anchor`, ties to
/// the lower index, returned in ascending index order. Throws CountError when
/// fewer than K candidates exist.
std::vector<std::size_t> select_topk_indices(const Tensor& candidates,
                                             std::span<const double> anchor, std::size_t k);

/// Unit-normalises the candidates and keeps the top K by similarity to the
/// anchor row. The selection is recorded on the tape's branch signature.
Var select_topk_negatives(Var candidates, std::span<const double> anchor, std::size_t k);

/// A per-category prompt bank: one unit positive row and K unit negative rows.
struct PromptBank {
  std::size_t dim = 0;
  std::size_t k = 0;
  std::vector<int> category_ids;
  Tensor positives;  // [M × D]
  Tensor negatives;  // [M·K × D], category c in rows [c·K, (c+1)·K)
};

using PyramidFn = std::function<FeaturePyramid(Tape&, const Scene&)>;

/// Fixed evaluation prompts: for each category, N training images containing
/// it (with replacement when fewer exist); a random instance's exact box is
/// the positive and `cfg.k` strong jitters of it are negative candidates.
/// Positives are averaged; negatives are pooled and the top `k` kept, so `k`
/// may be anything up to N·cfg.k.
PromptBank build_visualg_prompts(const Dataset& data, const std::vector<int>& category_ids,
                                 std::size_t n_images, std::size_t k, const JitterSpec& neg_spec,
                                 const PyramidFn& pyramid_fn, const ParamMap& params,
                                 const PromptEncoderConfig& cfg, Rng& rng);

/// JSON: {version, dim, k, rows: [{category_id, polarity, vector}]}.
void save_prompt_bank(const PromptBank& bank, const std::string& path);
PromptBank load_prompt_bank(const std::string& path);

}  // namespace negprompt
