// Copyright 2026 The negprompt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "negprompt/dataengine.hpp"
#include "negprompt/losses.hpp"
#include "negprompt/matching.hpp"
#include "negprompt/numcore/tape.hpp"
#include "negprompt/prompt.hpp"
#include "negprompt/scoring.hpp"

namespace negprompt {

struct ModelConfig {
  std::size_t image_size = 64;
  std::size_t in_channels = 3;
  std::size_t channels = 32;
  /// Prompt and query embedding width (D = D_q).
  std::size_t dim = 64;
  std::size_t levels = 3;
  std::size_t num_queries = 20;
  std::size_t decoder_layers = 2;
  std::size_t ffn_hidden = 128;
  std::size_t k = 3;
  std::size_t grid = 4;
  /// Strength of the Gaussian locality prior in decoder cross-attention.
  double locality = 2.0;
  /// Norm of the class embeddings, so similarities lie in [−scale, scale].
  double embed_scale = 10.0;

  PromptEncoderConfig prompt_config() const;
  void validate() const;
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// Parameters whose name starts with this prefix train at the backbone rate.
inline constexpr const char* kBackbonePrefix = "backbone.";

ParamMap init_model(const ModelConfig& cfg, Rng& rng);

/// Strided 3×3 convolutions with relu: a stride-2 stem plus one stride-1
/// layer form level 0 (stride 2); each further level halves the resolution.
FeaturePyramid encode_image(Tape& tape, const Tensor& pixels, const ParamMap& params,
                            const ModelConfig& cfg);

/// Flattened pyramid cells for cross-attention.
struct Memory {
  Var values;            // [cells × D], projected features plus level embedding
  Var keys;              // values plus sinusoidal position encoding
  Tensor centers;        // [cells × 2] normalised (x, y)
};

Memory build_memory(Tape& tape, const FeaturePyramid& pyramid, const ParamMap& params,
                    const ModelConfig& cfg);

/// Cell centres and sinusoidal encodings for the configured pyramid.
Tensor memory_centers(const ModelConfig& cfg);
Tensor position_encoding(const Tensor& centers, std::size_t dim);

struct LayerOutput {
  Var embeddings;   // [N_q × D] class embeddings Q of norm embed_scale
  Var boxes;        // [N_q × 4] normalised cxcywh
};

/// Runs the decoder. One output per layer; the last is the prediction.
std::vector<LayerOutput> decode_queries(Tape& tape, const Memory& memory, const ParamMap& params,
                                        const ModelConfig& cfg);

struct Prediction {
  Tensor queries;  // [N_q × D]
  Tensor boxes;    // [N_q × 4]
};

/// Gradient-free forward pass for one image.
Prediction predict(const Tensor& pixels, const ParamMap& params, const ModelConfig& cfg);

/// `params` must outlive the returned function.
PyramidFn make_pyramid_fn(const ParamMap& params, const ModelConfig& cfg);

// ----------------------------------------------------------------------------
// Training

struct TrainConfig {
  std::size_t steps = 600;
  std::size_t batch_size = 6;
  double lr_backbone = 1e-3;
  double lr_others = 1e-3;
  double weight_decay = 1e-4;
  double grad_clip = 1.0;
  /// Both learning rates drop tenfold after this fraction of the steps.
  double lr_drop_fraction = 0.75;
  std::uint64_t seed = 0;
  NNCConfig nnc;
  NNHConfig nnh;
  FocalConfig focal;
  LossWeights weights;
  MatchWeights match;
  JitterSpec pos_spec = JitterSpec::positive();
  JitterSpec neg_spec = JitterSpec::negative();
  /// Use the step's mode indicator in the matching cost (otherwise match on
  /// positive-only probabilities).
  bool match_with_suppression = true;

  void validate() const;
};

struct StepDiagnostics {
  LossComponents final_layer;
  std::vector<LossComponents> aux;
  int mode_indicator = 0;
  std::size_t num_gt = 0;
  std::size_t num_categories = 0;
};

/// Builds the weighted training objective for one batch on `tape`. Randomness
/// for prompt jitter and the mode indicator comes from the given streams.
Var forward_train(Tape& tape, const Dataset& data, const std::vector<int>& image_ids,
                  const ParamMap& params, const ModelConfig& model, const TrainConfig& train,
                  Rng& jitter_rng, Rng& mode_rng, StepDiagnostics* diag = nullptr);

struct AdamW {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::size_t step = 0;
  ParamMap m;
  ParamMap v;

  /// One update. `lr_of(name)` gives each parameter's learning rate; weight
  /// decay applies to matrices and higher-rank tensors only.
  void update(ParamMap& params, const ParamMap& grads,
              const std::function<double(const std::string&)>& lr_of, double weight_decay);
};

struct StepLog {
  std::size_t step = 0;
  double loss = 0.0;
  LossComponents components;
  int mode_indicator = 0;
};

struct TrainResult {
  ParamMap params;
  std::vector<StepLog> log;
};

/// Trains from a fresh initialisation drawn from the "init" stream of
/// `train.seed`. `on_step` sees every log record as it is produced.
TrainResult train(const Dataset& data, const ModelConfig& model, const TrainConfig& train,
                  const std::function<void(const StepLog&)>& on_step = {});

std::string step_log_json(const StepLog& s);

// ----------------------------------------------------------------------------
// Checkpoints: "NEGPCKPT", u32 version, u32-length JSON config, u32 tensor
// count, then per tensor (u32 name length, name, u32 rank, u64 dims, f64 LE
// data), closed by the CRC-32 of everything before it.

struct Checkpoint {
  ModelConfig model;
  ParamMap params;
};

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
/// Throws FormatError (bad magic, version, truncation), ChecksumError, or
/// ConfigMismatchError when `expected` differs from the stored config.
Checkpoint load_checkpoint(const std::string& path,
                           const std::optional<ModelConfig>& expected = std::nullopt);

std::string model_config_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const std::string& text);

}  // namespace negprompt
