// Copyright 2026 The negprompt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "negprompt/numcore/tape.hpp"

namespace negprompt {

/// Focal classification loss parameters. α weights positives and 1-α
/// negatives.
struct FocalConfig {
  double alpha = 0.25;
  double gamma = 2.0;
  void validate() const;
};

/// Margin of the negative-suppression hinge.
struct NNHConfig {
  double eta = 0.3;
  void validate() const;
};

/// Objective weights. The denoising slot exists for completeness and must
/// stay zero: no denoising queries are built.
struct LossWeights {
  double cls = 1.0;
  double hinge = 1.0;
  double l1 = 5.0;
  double giou = 2.0;
  double dn = 0.0;
  void validate() const;
};

struct LossComponents {
  double cls = 0.0;
  double hinge = 0.0;
  double l1 = 0.0;
  double giou = 0.0;
  double dn = 0.0;
};

inline constexpr double kProbClamp = 1e-12;
inline constexpr double kBoxSideClamp = 1e-6;

struct ScalarLoss {
  double value = 0.0;
  double grad = 0.0;
};

/// -α_t (1 - p_t)^γ log p_t with p_t = p for positives and 1 - p otherwise.
/// `grad` is d(loss)/d(prob). p_t is clamped to at least kProbClamp; the
/// gradient is zero on the clamped side.
ScalarLoss focal_loss(double prob, bool is_positive, const FocalConfig& cfg);

struct NNHResult {
  double value = 0.0;
  double grad_positive = 0.0;
  std::vector<double> grad_negatives;
  /// Bit i set when hinge i is active (strictly positive argument).
  std::uint64_t active_mask = 0;
};

/// Σ_i max(0, s_neg[i] - s_pos + eta) / K. Throws CountError for K = 0.
/// A hinge argument of exactly zero counts as inactive.
NNHResult nnh_loss(double s_pos, std::span<const double> s_neg, const NNHConfig& cfg);

using Box4 = std::array<double, 4>;

struct BoxLoss {
  double value = 0.0;
  Box4 grad{};
  std::uint64_t branch = 0;
};

/// Σ |pred - target| over normalised (cx, cy, w, h); sign(0) = 0.
BoxLoss l1_box_loss(const Box4& pred, const Box4& target);
/// 1 - GIoU between two normalised (cx, cy, w, h) boxes. Widths and heights
/// below kBoxSideClamp are clamped (with zero gradient).
BoxLoss giou_loss(const Box4& pred, const Box4& target);

/// Weighted sum of the final-layer components plus every auxiliary decoder
/// layer's components under the same weights.
double total_loss(const LossComponents& final_layer, std::span<const LossComponents> aux,
                  const LossWeights& weights);

namespace ad {

/// Σ focal over a probability matrix against a 0/1 target matrix.
Var focal_loss_sum(Var probs, const Tensor& targets, const FocalConfig& cfg);
/// Σ over (query, category) pairs of the per-pair hinge, where the K
/// negative similarities of category c occupy columns [c·K, (c+1)·K).
Var nnh_loss_sum(Var s_pos, Var s_neg, const std::vector<std::pair<std::size_t, std::size_t>>& pairs,
                 std::size_t k, const NNHConfig& cfg);
/// Σ over (query, target) pairs of the L1 box loss on rows of `boxes`.
Var l1_loss_sum(Var boxes, const std::vector<std::pair<std::size_t, Box4>>& pairs);
Var giou_loss_sum(Var boxes, const std::vector<std::pair<std::size_t, Box4>>& pairs);

}  // namespace ad

}  // namespace negprompt
