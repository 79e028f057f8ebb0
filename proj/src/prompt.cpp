// Copyright 2026 The negprompt Authors
// SPDX-License-Identifier: Apache-2.0

#include "negprompt/prompt.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "negprompt/errors.hpp"
#include "negprompt/init.hpp"
#include "negprompt/numcore/ops.hpp"

namespace negprompt {

namespace {

constexpr int kBankVersion = 1;

struct Bound {
  Tape& t;
  const ParamMap& p;
  Var operator()(const std::string& name) const { return t.param(p, "prompt." + name); }
};

Var attention(Var q, Var k, Var v, std::size_t dim) {
  const double inv = 1.0 / std::sqrt(static_cast<double>(dim));
  return ad::matmul(ad::softmax_rows(ad::scale(ad::matmul_nt(q, k), inv)), v);
}

/// Box attention for one box: Q' = LN(q + Wo·Σ softmax(q·kᵀ/√D) v).
Var box_attention(Var query_row, const FeaturePyramid& pyr, const BBox& box, const Bound& w,
                  const PromptEncoderConfig& cfg) {
  std::vector<Var> samples;
  samples.reserve(pyr.levels.size());
  for (std::size_t l = 0; l < pyr.levels.size(); ++l) {
    const Tensor& fm = pyr.levels[l].value();
    const SamplePoints pts = box_sample_points(box, pyr.strides[l], fm.dim(2), fm.dim(1), cfg.grid);
    samples.push_back(ad::bilinear_sample(pyr.levels[l], pts.xs, pts.ys));
  }
  Var feats = ad::concat_rows(samples);
  Var keys = ad::matmul(feats, w("wk"));
  Var values = ad::matmul(feats, w("wv"));
  Var q = ad::matmul(query_row, w("wq"));
  Var ctx = ad::matmul(attention(q, keys, values, cfg.dim), w("wo"));
  return ad::layer_norm_rows(ad::add(query_row, ctx), w("ln1_g"), w("ln1_b"));
}

/// Self-attention and FFN over one chunk of attended queries.
Var refine(Var x, const Bound& w, const PromptEncoderConfig& cfg) {
  Var q = ad::matmul(x, w("sa_wq"));
  Var k = ad::matmul(x, w("sa_wk"));
  Var v = ad::matmul(x, w("sa_wv"));
  Var sa = ad::matmul(attention(q, k, v, cfg.dim), w("sa_wo"));
  Var h = ad::layer_norm_rows(ad::add(x, sa), w("ln2_g"), w("ln2_b"));
  Var f = ad::relu(ad::add_row(ad::matmul(h, w("ffn_w1")), w("ffn_b1")));
  f = ad::add_row(ad::matmul(f, w("ffn_w2")), w("ffn_b2"));
  return ad::layer_norm_rows(ad::add(h, f), w("ln3_g"), w("ln3_b"));
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NotFoundError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

void PromptEncoderConfig::validate() const {
  if (dim == 0 || channels == 0 || grid == 0 || levels == 0 || hidden == 0)
    throw RangeError("prompt encoder sizes must be positive");
  if (k == 0) throw RangeError("prompt encoder needs K >= 1 negative queries");
}

ParamMap init_prompt_encoder(const PromptEncoderConfig& cfg, Rng& rng) {
  cfg.validate();
  const std::size_t d = cfg.dim, c = cfg.channels, h = cfg.hidden;
  ParamMap p;
  p["prompt.q_pos"] = init::normal({1, d}, 0.5, rng);
  p["prompt.q_neg"] = Tensor({cfg.k, d}, 0.0);
  p["prompt.wk"] = init::xavier(c, d, rng);
  p["prompt.wv"] = init::xavier(c, d, rng);
  p["prompt.wq"] = init::xavier(d, d, rng);
  p["prompt.wo"] = init::xavier(d, d, rng);
  for (const char* n : {"sa_wq", "sa_wk", "sa_wv", "sa_wo"}) p[std::string("prompt.") + n] = init::xavier(d, d, rng);
  p["prompt.ffn_w1"] = init::xavier(d, h, rng);
  p["prompt.ffn_b1"] = Tensor({h}, 0.0);
  p["prompt.ffn_w2"] = init::xavier(h, d, rng);
  p["prompt.ffn_b2"] = Tensor({d}, 0.0);
  for (const char* n : {"ln1", "ln2", "ln3"}) {
    p[std::string("prompt.") + n + "_g"] = Tensor({d}, 1.0);
    p[std::string("prompt.") + n + "_b"] = Tensor({d}, 0.0);
  }
  return p;
}

TrainingPrompts generate_training_prompts(const Scene& scene, int category_id,
                                          const JitterSpec& pos_spec, const JitterSpec& neg_spec,
                                          std::size_t k, Rng& rng) {
  std::vector<const Annotation*> inst;
  for (const auto& a : scene.annotations)
    if (a.category_id == category_id) inst.push_back(&a);
  if (inst.empty())
    throw MissingCategoryError("scene " + std::to_string(scene.image_id) + " has no category " +
                               std::to_string(category_id));
  const Annotation& g = *inst[uniform_index(rng, inst.size())];
  const double W = static_cast<double>(scene.width), H = static_cast<double>(scene.height);
  TrainingPrompts out;
  out.positive = {category_id, jitter_box(g.bbox, pos_spec, W, H, rng), Polarity::positive,
                  scene.image_id};
  for (std::size_t i = 0; i < k; ++i)
    out.negatives.push_back(
        {category_id, jitter_box(g.bbox, neg_spec, W, H, rng), Polarity::negative, scene.image_id});
  return out;
}

SamplePoints box_sample_points(const BBox& box, double stride, std::size_t map_w,
                               std::size_t map_h, std::size_t grid) {
  auto axis = [&](double lo_px, double len, std::size_t cells, std::vector<double>& out) {
    const double lo = std::clamp(std::floor(lo_px / stride), 0.0, cells - 1.0);
    const double hi = std::clamp(std::ceil((lo_px + len) / stride) - 1.0, lo, cells - 1.0);
    std::vector<double> v(grid);
    for (std::size_t i = 0; i < grid; ++i) {
      const double px = lo_px + (i + 0.5) / static_cast<double>(grid) * len;
      v[i] = std::clamp(px / stride - 0.5, lo, hi);
    }
    out = std::move(v);
  };
  std::vector<double> ux, uy;
  axis(box.x, box.w, map_w, ux);
  axis(box.y, box.h, map_h, uy);
  SamplePoints pts;
  pts.xs.reserve(grid * grid);
  pts.ys.reserve(grid * grid);
  for (std::size_t j = 0; j < grid; ++j)
    for (std::size_t i = 0; i < grid; ++i) {
      pts.xs.push_back(ux[i]);
      pts.ys.push_back(uy[j]);
    }
  return pts;
}

Var encode_prompts(Tape& tape, const FeaturePyramid& pyramid, const std::vector<BBox>& boxes,
                   Polarity polarity, const ParamMap& params, const PromptEncoderConfig& cfg) {
  if (boxes.empty()) throw CountError("encode_prompts needs at least one box");
  if (pyramid.levels.size() != cfg.levels)
    throw ShapeError("pyramid has " + std::to_string(pyramid.levels.size()) + " levels, expected " +
                     std::to_string(cfg.levels));
  for (const BBox& b : boxes) {
    if (!b.inside(pyramid.image_w, pyramid.image_h))
      throw EncodeError("prompt box lies outside the image");
    if (b.w < 1.0 || b.h < 1.0) throw EncodeError("prompt box side is under one pixel");
  }
  const Bound w{tape, params};
  const bool pos = polarity == Polarity::positive;
  const std::size_t chunk = pos ? 1 : cfg.k;
  Var queries = pos ? w("q_pos") : ad::add_row(w("q_neg"), ad::reshape(w("q_pos"), {cfg.dim}));

  std::vector<Var> out;
  for (std::size_t start = 0; start < boxes.size(); start += chunk) {
    const std::size_t n = std::min(chunk, boxes.size() - start);
    std::vector<Var> attended;
    for (std::size_t i = 0; i < n; ++i)
      attended.push_back(box_attention(ad::slice_rows(queries, i, 1), pyramid, boxes[start + i], w, cfg));
    out.push_back(refine(ad::concat_rows(attended), w, cfg));
  }
  return out.size() == 1 ? out[0] : ad::concat_rows(out);
}

Var aggregate_positives(Var embeddings, const std::vector<std::vector<std::size_t>>& groups) {
  if (groups.empty()) throw MissingCategoryError("aggregate_positives needs at least one category");
  std::vector<Var> means;
  for (const auto& g : groups) {
    if (g.empty()) throw MissingCategoryError("a category has no positive embedding in the batch");
    means.push_back(ad::mean_rows(ad::gather_rows(embeddings, g)));
  }
  return ad::l2_normalize_rows(means.size() == 1 ? means[0] : ad::concat_rows(means));
}

std::vector<std::size_t> select_topk_indices(const Tensor& candidates,
                                             std::span<const double> anchor, std::size_t k) {
  const std::size_t n = candidates.rows(), d = candidates.cols();
  if (anchor.size() != d) throw ShapeError("anchor dimension differs from candidates");
  if (n < k) throw CountError("fewer candidates than K");
  std::vector<double> score(n);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0;
    for (std::size_t j = 0; j < d; ++j) s += candidates[i * d + j] * anchor[j];
    score[i] = s;
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&score](std::size_t a, std::size_t b) { return score[a] > score[b]; });
  order.resize(k);
  std::sort(order.begin(), order.end());
  return order;
}

Var select_topk_negatives(Var candidates, std::span<const double> anchor, std::size_t k) {
  Var unit = ad::l2_normalize_rows(candidates);
  const std::vector<std::size_t> idx = select_topk_indices(unit.value(), anchor, k);
  std::uint64_t h = 0x9e3779b97f4a7c15ULL;
  for (std::size_t i : idx) h = (h ^ (i + 1)) * 0x100000001b3ULL;
  unit.tape->note_branch(h);
  return ad::gather_rows(unit, idx);
}

PromptBank build_visualg_prompts(const Dataset& data, const std::vector<int>& category_ids,
                                 std::size_t n_images, std::size_t k, const JitterSpec& neg_spec,
                                 const PyramidFn& pyramid_fn, const ParamMap& params,
                                 const PromptEncoderConfig& cfg, Rng& rng) {
  if (n_images == 0) throw RangeError("build_visualg_prompts needs N >= 1");
  if (k > 0 && k > n_images * cfg.k)
    throw CountError("K = " + std::to_string(k) + " exceeds the " + std::to_string(n_images * cfg.k) +
                     " negative candidates");
  PromptBank bank;
  bank.dim = cfg.dim;
  bank.k = k;
  bank.category_ids = category_ids;
  const std::size_t m = category_ids.size();
  bank.positives = Tensor({m, cfg.dim});
  if (k > 0) bank.negatives = Tensor({m * k, cfg.dim});

  const std::vector<int> train = data.train_ids();
  for (std::size_t ci = 0; ci < m; ++ci) {
    const int cat = category_ids[ci];
    std::vector<int> holders;
    for (int id : train)
      if (data.scene(id).contains(cat)) holders.push_back(id);
    if (holders.empty())
      throw MissingCategoryError("no training image contains category " + std::to_string(cat));
    std::vector<int> chosen;
    if (holders.size() >= n_images) {
      std::shuffle(holders.begin(), holders.end(), rng);
      chosen.assign(holders.begin(), holders.begin() + n_images);
    } else {
      for (std::size_t i = 0; i < n_images; ++i) chosen.push_back(holders[uniform_index(rng, holders.size())]);
    }

    std::vector<double> pos_sum(cfg.dim, 0.0);
    std::vector<Tensor> neg_rows;
    for (int id : chosen) {
      const Scene& s = data.scene(id);
      std::vector<const Annotation*> inst;
      for (const auto& a : s.annotations)
        if (a.category_id == cat) inst.push_back(&a);
      const BBox g = inst[uniform_index(rng, inst.size())]->bbox;
      Tape tape(false);
      const FeaturePyramid pyr = pyramid_fn(tape, s);
      const Tensor vp = encode_prompts(tape, pyr, {g}, Polarity::positive, params, cfg).value();
      for (std::size_t j = 0; j < cfg.dim; ++j) pos_sum[j] += vp[j];
      if (k > 0) {
        std::vector<BBox> negs;
        for (std::size_t i = 0; i < cfg.k; ++i)
          negs.push_back(jitter_box(g, neg_spec, static_cast<double>(s.width),
                                    static_cast<double>(s.height), rng));
        neg_rows.push_back(encode_prompts(tape, pyr, negs, Polarity::negative, params, cfg).value());
      }
    }
    Tape agg(false);
    Var mean = agg.constant(Tensor({1, cfg.dim}, pos_sum));
    const Tensor anchor = ad::l2_normalize_rows(mean).value();
    std::copy(anchor.storage().begin(), anchor.storage().end(), bank.positives.row(ci).begin());
    if (k > 0) {
      std::vector<Var> parts;
      for (auto& t : neg_rows) parts.push_back(agg.constant(std::move(t)));
      Var pooled = parts.size() == 1 ? parts[0] : ad::concat_rows(parts);
      const Tensor sel = select_topk_negatives(pooled, anchor.storage(), k).value();
      std::copy(sel.storage().begin(), sel.storage().end(),
                bank.negatives.storage().begin() + static_cast<std::ptrdiff_t>(ci * k * cfg.dim));
    }
  }
  return bank;
}

void save_prompt_bank(const PromptBank& bank, const std::string& path) {
  using nlohmann::json;
  json rows = json::array();
  for (std::size_t c = 0; c < bank.category_ids.size(); ++c) {
    auto row = bank.positives.row(c);
    rows.push_back({{"category_id", bank.category_ids[c]},
                    {"polarity", "positive"},
                    {"vector", std::vector<double>(row.begin(), row.end())}});
    for (std::size_t i = 0; i < bank.k; ++i) {
      auto nrow = bank.negatives.row(c * bank.k + i);
      rows.push_back({{"category_id", bank.category_ids[c]},
                      {"polarity", "negative"},
                      {"vector", std::vector<double>(nrow.begin(), nrow.end())}});
    }
  }
  json j{{"version", kBankVersion}, {"dim", bank.dim}, {"k", bank.k}, {"rows", rows}};
  std::ofstream out(path, std::ios::binary);
  out << j.dump() << '\n';
  if (!out) throw FormatError("failed to write prompt bank " + path);
}

PromptBank load_prompt_bank(const std::string& path) {
  using nlohmann::json;
  try {
    const json j = json::parse(read_text(path));
    if (j.at("version").get<int>() != kBankVersion) throw FormatError("unsupported prompt bank version");
    PromptBank bank;
    bank.dim = j.at("dim");
    bank.k = j.at("k");
    std::vector<double> pos, neg;
    std::map<int, std::size_t> neg_count;
    for (const auto& r : j.at("rows")) {
      const int cat = r.at("category_id");
      const auto v = r.at("vector").get<std::vector<double>>();
      if (v.size() != bank.dim) throw FormatError("prompt bank row has the wrong dimension");
      if (r.at("polarity") == "positive") {
        bank.category_ids.push_back(cat);
        pos.insert(pos.end(), v.begin(), v.end());
      } else {
        if (bank.category_ids.empty() || bank.category_ids.back() != cat)
          throw FormatError("negative rows must follow their category's positive row");
        ++neg_count[cat];
        neg.insert(neg.end(), v.begin(), v.end());
      }
    }
    const std::size_t m = bank.category_ids.size();
    if (m == 0) throw FormatError("prompt bank is empty");
    for (int c : bank.category_ids)
      if (neg_count[c] != bank.k) throw FormatError("every category needs exactly K negatives");
    bank.positives = Tensor({m, bank.dim}, pos);
    if (bank.k > 0) bank.negatives = Tensor({m * bank.k, bank.dim}, neg);
    bank.positives.check_finite("prompt bank");
    return bank;
  } catch (const json::exception& e) {
    throw FormatError(std::string("prompt bank parse error: ") + e.what());
  }
}

}  // namespace negprompt
