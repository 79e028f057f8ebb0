// Copyright 2026 The negprompt Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include <json.hpp>

#include "negprompt/detector.hpp"
#include "negprompt/errors.hpp"
#include "negprompt/numcore/ops.hpp"

namespace negprompt {

namespace {

struct ImagePrompts {
  std::map<int, Var> positive;   // category -> [1×D]
  std::map<int, Var> negatives;  // category -> [K×D]
};

Var sum_all(const std::vector<Var>& terms) {
  Var acc = terms.front();
  for (std::size_t i = 1; i < terms.size(); ++i) acc = ad::add(acc, terms[i]);
  return acc;
}

}  // namespace

void TrainConfig::validate() const {
  if (steps == 0) throw RangeError("steps must be >= 1");
  if (batch_size < 1) throw RangeError("batch_size must be >= 1");
  if (!(lr_backbone >= 0 && lr_others >= 0)) throw RangeError("learning rates must be >= 0");
  if (!(weight_decay >= 0)) throw RangeError("weight_decay must be >= 0");
  if (!(grad_clip >= 0)) throw RangeError("grad_clip must be >= 0");
  if (!(lr_drop_fraction > 0 && lr_drop_fraction <= 1)) throw RangeError("lr_drop_fraction must lie in (0,1]");
  nnc.validate();
  nnh.validate();
  focal.validate();
  weights.validate();
  pos_spec.validate();
  neg_spec.validate();
}

Var forward_train(Tape& tape, const Dataset& data, const std::vector<int>& image_ids,
                  const ParamMap& params, const ModelConfig& model, const TrainConfig& train,
                  Rng& jitter_rng, Rng& mode_rng, StepDiagnostics* diag) {
  if (image_ids.empty()) throw BatchConstructionError("empty batch");
  const PromptEncoderConfig pcfg = model.prompt_config();
  const std::size_t K = model.k;
  std::vector<const Scene*> scenes;
  for (int id : image_ids) scenes.push_back(&data.scene(id));

  // Prompts per image and category.
  std::vector<FeaturePyramid> pyramids;
  std::vector<ImagePrompts> prompts(scenes.size());
  std::set<int> cats;
  for (std::size_t b = 0; b < scenes.size(); ++b) {
    pyramids.push_back(encode_image(tape, scenes[b]->pixels, params, model));
    for (const auto& [c, n] : scenes[b]->category_counts()) {
      cats.insert(c);
      const TrainingPrompts tp =
          generate_training_prompts(*scenes[b], c, train.pos_spec, train.neg_spec, K, jitter_rng);
      prompts[b].positive[c] =
          encode_prompts(tape, pyramids[b], {tp.positive.box}, Polarity::positive, params, pcfg);
      if (K > 0) {
        std::vector<BBox> boxes;
        for (const auto& n : tp.negatives) boxes.push_back(n.box);
        prompts[b].negatives[c] = encode_prompts(tape, pyramids[b], boxes, Polarity::negative, params, pcfg);
      }
    }
  }

  // Batch aggregation over shared categories.
  const std::vector<int> order(cats.begin(), cats.end());
  std::map<int, std::size_t> column;
  for (std::size_t i = 0; i < order.size(); ++i) column[order[i]] = i;
  std::vector<Var> pos_rows;
  std::vector<std::vector<std::size_t>> groups(order.size());
  for (std::size_t b = 0; b < scenes.size(); ++b)
    for (const auto& [c, v] : prompts[b].positive) {
      groups[column[c]].push_back(pos_rows.size());
      pos_rows.push_back(v);
    }
  Var vp = aggregate_positives(pos_rows.size() == 1 ? pos_rows[0] : ad::concat_rows(pos_rows), groups);
  Var vn;
  if (K > 0) {
    std::vector<Var> per_cat;
    for (std::size_t ci = 0; ci < order.size(); ++ci) {
      std::vector<Var> cand;
      for (std::size_t b = 0; b < scenes.size(); ++b) {
        auto it = prompts[b].negatives.find(order[ci]);
        if (it != prompts[b].negatives.end()) cand.push_back(it->second);
      }
      Var pool = cand.size() == 1 ? cand[0] : ad::concat_rows(cand);
      per_cat.push_back(select_topk_negatives(pool, vp.value().row(ci), K));
    }
    vn = per_cat.size() == 1 ? per_cat[0] : ad::concat_rows(per_cat);
  }

  const int indicator = sample_mode_indicator(train.nnc.policy, mode_rng);
  const double beta = train.nnc.beta;
  const std::size_t T = model.decoder_layers;
  std::vector<std::vector<Var>> cls_terms(T), l1_terms(T), giou_terms(T);
  std::vector<Var> hinge_terms;
  std::size_t num_gt = 0;

  for (std::size_t b = 0; b < scenes.size(); ++b) {
    const Scene& s = *scenes[b];
    std::vector<GroundTruth> gts;
    for (const auto& a : s.annotations)
      gts.push_back({column.at(a.category_id),
                     to_cxcywh_norm(a.bbox, static_cast<double>(s.width), static_cast<double>(s.height))});
    num_gt += gts.size();

    const Memory mem = build_memory(tape, pyramids[b], params, model);
    const auto layers = decode_queries(tape, mem, params, model);
    for (std::size_t t = 0; t < T; ++t) {
      Var sp = ad::matmul_nt(layers[t].embeddings, vp);
      Var sn;
      if (K > 0) sn = ad::matmul_nt(layers[t].embeddings, vn);
      Var prob = ad::nnc_probability(sp, sn, K, beta, indicator);
      const Tensor match_prob = train.match_with_suppression ? prob.value() : tensor_ops::sigmoid(sp.value());
      const Assignment asg =
          hungarian(build_cost_matrix(match_prob, layers[t].boxes.value(), gts, train.match));
      std::uint64_t h = 0x84222325cbf29ce4ULL;
      for (auto [q, g] : asg.pairs) h = (h ^ (q * 131 + g + 1)) * 0x100000001b3ULL;
      tape.note_branch(h);

      Tensor target(prob.value().dims(), 0.0);
      const std::size_t M = order.size();
      std::vector<std::pair<std::size_t, Box4>> box_pairs;
      std::vector<std::pair<std::size_t, std::size_t>> cells;
      for (auto [q, g] : asg.pairs) {
        target[q * M + gts[g].category] = 1.0;
        box_pairs.emplace_back(q, gts[g].box);
        cells.emplace_back(q, gts[g].category);
      }
      cls_terms[t].push_back(ad::focal_loss_sum(prob, target, train.focal));
      if (!box_pairs.empty()) {
        l1_terms[t].push_back(ad::l1_loss_sum(layers[t].boxes, box_pairs));
        giou_terms[t].push_back(ad::giou_loss_sum(layers[t].boxes, box_pairs));
      }
      if (t + 1 == T && K > 0 && !cells.empty() && train.weights.hinge > 0.0)
        hinge_terms.push_back(ad::nnh_loss_sum(sp, sn, cells, K, train.nnh));
    }
  }

  const double norm = 1.0 / static_cast<double>(std::max<std::size_t>(num_gt, 1));
  const LossWeights& w = train.weights;
  std::vector<Var> weighted;
  std::vector<LossComponents> comps(T);
  for (std::size_t t = 0; t < T; ++t) {
    Var cls = ad::scale(sum_all(cls_terms[t]), norm);
    comps[t].cls = cls.value()[0];
    weighted.push_back(ad::scale(cls, w.cls));
    if (!l1_terms[t].empty()) {
      Var l1 = ad::scale(sum_all(l1_terms[t]), norm);
      Var gi = ad::scale(sum_all(giou_terms[t]), norm);
      comps[t].l1 = l1.value()[0];
      comps[t].giou = gi.value()[0];
      weighted.push_back(ad::scale(l1, w.l1));
      weighted.push_back(ad::scale(gi, w.giou));
    }
  }
  if (!hinge_terms.empty()) {
    Var hinge = ad::scale(sum_all(hinge_terms), norm);
    comps[T - 1].hinge = hinge.value()[0];
    weighted.push_back(ad::scale(hinge, w.hinge));
  }
  if (diag) {
    diag->final_layer = comps.back();
    diag->aux.assign(comps.begin(), comps.end() - 1);
    diag->mode_indicator = indicator;
    diag->num_gt = num_gt;
    diag->num_categories = order.size();
  }
  return sum_all(weighted);
}

void AdamW::update(ParamMap& params, const ParamMap& grads,
                   const std::function<double(const std::string&)>& lr_of, double weight_decay) {
  ++step;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step));
  for (const auto& [name, g] : grads) {
    auto it = params.find(name);
    if (it == params.end()) continue;
    Tensor& p = it->second;
    auto [mi, fresh_m] = m.try_emplace(name, p.dims(), 0.0);
    auto [vi, fresh_v] = v.try_emplace(name, p.dims(), 0.0);
    Tensor& mt = mi->second;
    Tensor& vt = vi->second;
    const double lr = lr_of(name);
    const double decay = p.rank() >= 2 ? weight_decay : 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      mt[i] = beta1 * mt[i] + (1.0 - beta1) * g[i];
      vt[i] = beta2 * vt[i] + (1.0 - beta2) * g[i] * g[i];
      const double mhat = mt[i] / bc1, vhat = vt[i] / bc2;
      p[i] -= lr * (mhat / (std::sqrt(vhat) + eps) + decay * p[i]);
    }
  }
}

std::string step_log_json(const StepLog& s) {
  nlohmann::json j{{"step", s.step},
                   {"loss", s.loss},
                   {"loss_components",
                    {{"cls", s.components.cls},
                     {"hinge", s.components.hinge},
                     {"l1", s.components.l1},
                     {"giou", s.components.giou},
                     {"dn", s.components.dn}}},
                   {"mode_indicator", s.mode_indicator}};
  return j.dump();
}

TrainResult train(const Dataset& data, const ModelConfig& model, const TrainConfig& cfg,
                  const std::function<void(const StepLog&)>& on_step) {
  model.validate();
  cfg.validate();
  Rng init_rng = make_stream(cfg.seed, "init");
  Rng data_rng = make_stream(cfg.seed, "data");
  Rng jitter_rng = make_stream(cfg.seed, "jitter");
  Rng mode_rng = make_stream(cfg.seed, "mode");

  TrainResult result;
  result.params = init_model(model, init_rng);
  const CategoryIndex index = build_category_index(data);
  const std::size_t drop_at = static_cast<std::size_t>(std::ceil(cfg.lr_drop_fraction * cfg.steps));
  AdamW opt;

  for (std::size_t step = 0; step < cfg.steps; ++step) {
    const std::vector<int> ids = cfg.batch_size == 1
                                     ? std::vector<int>{data.train_ids()[uniform_index(data_rng, data.train_ids().size())]}
                                     : construct_batch(data, index, cfg.batch_size, data_rng).image_ids;
    Tape tape;
    StepDiagnostics diag;
    Var total = forward_train(tape, data, ids, result.params, model, cfg, jitter_rng, mode_rng, &diag);
    const double loss = total.value()[0];

    StepLog rec;
    rec.step = step;
    rec.loss = loss;
    rec.mode_indicator = diag.mode_indicator;
    rec.components = diag.final_layer;
    for (const auto& a : diag.aux) {
      rec.components.cls += a.cls;
      rec.components.l1 += a.l1;
      rec.components.giou += a.giou;
    }
    if (!std::isfinite(loss)) {
      std::string ids_text;
      for (int id : ids) ids_text += std::to_string(id) + " ";
      throw TrainingError("non-finite loss at step " + std::to_string(step) + " (images " + ids_text +
                          ") last record " + step_log_json(rec));
    }

    tape.backward(total);
    ParamMap grads = tape.param_grads();
    if (cfg.grad_clip > 0.0) {
      double sq = 0.0;
      for (const auto& [n, g] : grads)
        for (double x : g.storage()) sq += x * x;
      const double norm = std::sqrt(sq);
      if (!std::isfinite(norm)) throw TrainingError("non-finite gradient at step " + std::to_string(step));
      if (norm > cfg.grad_clip)
        for (auto& [n, g] : grads)
          for (double& x : g.storage()) x *= cfg.grad_clip / norm;
    }
    const double drop = step >= drop_at ? 0.1 : 1.0;
    opt.update(result.params, grads,
               [&](const std::string& name) {
                 return drop * (name.rfind(kBackbonePrefix, 0) == 0 ? cfg.lr_backbone : cfg.lr_others);
               },
               cfg.weight_decay);
    result.log.push_back(rec);
    if (on_step) on_step(rec);
  }
  return result;
}

}  // namespace negprompt
