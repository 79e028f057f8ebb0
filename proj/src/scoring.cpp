// Copyright 2026 The negprompt Authors
// SPDX-License-Identifier: Apache-2.0

#include "negprompt/scoring.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>

#include "negprompt/errors.hpp"
#include "negprompt/geometry.hpp"
#include "negprompt/numcore/ops.hpp"

namespace negprompt {

ModePolicy ModePolicy::parse(const std::string& text) {
  ModePolicy m;
  if (text == "fixed_0") {
    m.kind = Kind::fixed_0;
  } else if (text == "fixed_1") {
    m.kind = Kind::fixed_1;
  } else if (text == "bernoulli") {
    m.kind = Kind::bernoulli;
  } else if (text.rfind("bernoulli(", 0) == 0 && text.back() == ')') {
    m.kind = Kind::bernoulli;
    try {
      std::size_t used = 0;
      const std::string inner = text.substr(10, text.size() - 11);
      m.p = std::stod(inner, &used);
      if (used != inner.size()) throw std::invalid_argument(inner);
    } catch (const std::logic_error&) {
      throw ValidationError("bad mode policy '" + text + "'");
    }
  } else {
    throw ValidationError("unknown mode policy '" + text + "'");
  }
  m.validate();
  return m;
}

std::string ModePolicy::to_string() const {
  switch (kind) {
    case Kind::fixed_0: return "fixed_0";
    case Kind::fixed_1: return "fixed_1";
    case Kind::bernoulli: break;
  }
  char buf[48];
  std::snprintf(buf, sizeof buf, "bernoulli(%g)", p);
  return buf;
}

void ModePolicy::validate() const {
  if (!(p >= 0.0 && p <= 1.0)) throw RangeError("bernoulli probability must lie in [0,1]");
}

int sample_mode_indicator(const ModePolicy& policy, Rng& rng) {
  switch (policy.kind) {
    case ModePolicy::Kind::fixed_0: return 0;
    case ModePolicy::Kind::fixed_1: return 1;
    case ModePolicy::Kind::bernoulli: return bernoulli(rng, policy.p) ? 1 : 0;
  }
  return 0;
}

void NNCConfig::validate() const {
  if (!(beta >= 0.0 && beta < 1.0)) throw RangeError("beta must lie in [0,1)");
  policy.validate();
}

SimilarityScores similarity(const Tensor& queries, const Tensor& positives,
                            const Tensor& negatives, std::size_t k) {
  if (queries.cols() != positives.cols())
    throw ShapeError("query dim " + std::to_string(queries.cols()) + " differs from prompt dim " +
                     std::to_string(positives.cols()));
  SimilarityScores s;
  s.k = k;
  s.s_pos = tensor_ops::matmul_nt(queries, positives);
  if (k > 0) {
    if (negatives.empty() || negatives.cols() != queries.cols() ||
        negatives.rows() != positives.rows() * k)
      throw ShapeError("negative prompts must be [M·K × D]");
    s.s_neg = tensor_ops::matmul_nt(queries, negatives);
  }
  return s;
}

Tensor nnc_probability(const SimilarityScores& s, double beta, int indicator) {
  if (indicator != 0 && indicator != 1) throw RangeError("mode indicator must be 0 or 1");
  Tensor p = s.s_pos;
  const std::size_t n = p.rows(), m = p.cols(), k = s.k;
  if (indicator == 1 && beta != 0.0 && k > 0) {
    for (std::size_t q = 0; q < n; ++q)
      for (std::size_t c = 0; c < m; ++c) {
        const double* neg = s.s_neg.data().data() + q * m * k + c * k;
        p[q * m + c] -= beta * *std::max_element(neg, neg + k);
      }
  }
  return tensor_ops::sigmoid(p);
}

InferenceMode parse_inference_mode(const std::string& text) {
  if (text == "positive_only") return InferenceMode::positive_only;
  if (text == "auto_suggested") return InferenceMode::auto_suggested;
  if (text == "user_curated") return InferenceMode::user_curated;
  throw ValidationError("unknown inference mode '" + text + "'");
}

const char* to_string(InferenceMode m) {
  switch (m) {
    case InferenceMode::positive_only: return "positive_only";
    case InferenceMode::auto_suggested: return "auto_suggested";
    case InferenceMode::user_curated: return "user_curated";
  }
  return "?";
}

std::vector<Detection> infer_detections(const Tensor& queries, const Tensor& boxes,
                                        const PromptBank& bank, const InferOptions& opts) {
  if (opts.mode == InferenceMode::user_curated && (bank.k == 0 || bank.negatives.empty()))
    throw MissingNegativesError("user_curated mode needs negative prompts");
  if (boxes.rows() != queries.rows() || boxes.cols() != 4)
    throw ShapeError("boxes must be [N_q × 4]");
  const bool joint = opts.mode != InferenceMode::positive_only;
  const SimilarityScores s =
      similarity(queries, bank.positives, bank.negatives, joint ? bank.k : 0);
  const Tensor prob = nnc_probability(s, opts.beta, joint ? 1 : 0);
  const Tensor base = tensor_ops::sigmoid(s.s_pos);
  const std::size_t n = prob.rows(), m = prob.cols();

  std::vector<Detection> out;
  auto emit = [&](std::size_t q, std::size_t c) {
    const double p = prob[q * m + c];
    if (p < opts.score_threshold) return;
    Detection d;
    d.query = q;
    d.box = {boxes[q * 4], boxes[q * 4 + 1], boxes[q * 4 + 2], boxes[q * 4 + 3]};
    d.category_id = bank.category_ids[c];
    d.probability = p;
    d.probability_positive_only = base[q * m + c];
    out.push_back(d);
  };
  for (std::size_t q = 0; q < n; ++q) {
    if (opts.all_categories) {
      for (std::size_t c = 0; c < m; ++c) emit(q, c);
      continue;
    }
    std::size_t best = 0;
    for (std::size_t c = 1; c < m; ++c)
      if (prob[q * m + c] > prob[q * m + best]) best = c;
    emit(q, best);
  }
  std::stable_sort(out.begin(), out.end(), [](const Detection& a, const Detection& b) {
    return a.probability > b.probability;
  });
  if (opts.nms_iou > 0.0) {
    std::vector<Detection> kept;
    for (const Detection& d : out) {
      const BBox bd = from_cxcywh_norm(d.box, 1, 1);
      const bool suppressed = std::any_of(kept.begin(), kept.end(), [&](const Detection& k) {
        return k.category_id == d.category_id && iou(from_cxcywh_norm(k.box, 1, 1), bd) > opts.nms_iou;
      });
      if (!suppressed) kept.push_back(d);
    }
    out = std::move(kept);
  }
  return out;
}

namespace ad {

Var nnc_probability(Var s_pos, Var s_neg, std::size_t k, double beta, int indicator) {
  if (indicator != 0 && indicator != 1) throw RangeError("mode indicator must be 0 or 1");
  if (indicator == 0 || beta == 0.0 || k == 0) return sigmoid(s_pos);
  return sigmoid(sub(s_pos, scale(group_max(s_neg, k), beta)));
}

}  // namespace ad

}  // namespace negprompt
