// Copyright 2026 The negprompt Authors
// SPDX-License-Identifier: Apache-2.0

#include "negprompt/evalkit.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <set>
#include <sstream>

#include <json.hpp>

#include "negprompt/errors.hpp"

namespace negprompt {

namespace {

constexpr double kIouSlack = 1e-12;
constexpr std::size_t kRecallPoints = 101;

double recall_level(std::size_t i) { return static_cast<double>(i) / static_cast<double>(kRecallPoints - 1); }

/// Caps each image to its highest-scoring detections (stable on ties).
std::vector<EvalDetection> cap_per_image(const std::vector<EvalDetection>& dets, std::size_t cap) {
  std::map<int, std::vector<std::size_t>> by_image;
  for (std::size_t i = 0; i < dets.size(); ++i) by_image[dets[i].image_id].push_back(i);
  std::vector<char> keep(dets.size(), 0);
  for (auto& [img, idx] : by_image) {
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return dets[a].score > dets[b].score; });
    for (std::size_t j = 0; j < idx.size() && j < cap; ++j) keep[idx[j]] = 1;
  }
  std::vector<EvalDetection> out;
  for (std::size_t i = 0; i < dets.size(); ++i)
    if (keep[i]) out.push_back(dets[i]);
  return out;
}

/// Detections of one category in score-descending order (stable), with the
/// true-positive flag of each at the given threshold.
std::vector<bool> greedy_match(const std::vector<const EvalDetection*>& ranked,
                               const std::vector<const EvalGroundTruth*>& gts, double thr) {
  std::vector<bool> used(gts.size(), false), tp;
  for (const EvalDetection* d : ranked) {
    double best = -1.0;
    std::size_t pick = gts.size();
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (used[g] || gts[g]->image_id != d->image_id) continue;
      const double o = iou(d->bbox, gts[g]->bbox);
      if (o >= thr - kIouSlack && o > best) {
        best = o;
        pick = g;
      }
    }
    if (pick < gts.size()) used[pick] = true;
    tp.push_back(pick < gts.size());
  }
  return tp;
}

template <typename CategoryAP>
EvalResult evaluate_categories(const std::vector<EvalDetection>& raw, const std::vector<EvalGroundTruth>& gts,
                               const APConfig& cfg, CategoryAP&& category_ap) {
  if (cfg.iou_thresholds.empty()) throw RangeError("at least one IoU threshold is required");
  const std::vector<EvalDetection> dets = cap_per_image(raw, cfg.max_detections);
  std::set<int> cats;
  for (const auto& g : gts) cats.insert(g.category_id);
  EvalResult r;
  for (int c : cats) {
    std::vector<const EvalDetection*> ranked;
    for (const auto& d : dets)
      if (d.category_id == c) ranked.push_back(&d);
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const EvalDetection* a, const EvalDetection* b) { return a->score > b->score; });
    std::vector<const EvalGroundTruth*> cat_gts;
    for (const auto& g : gts)
      if (g.category_id == c) cat_gts.push_back(&g);
    double sum = 0.0;
    for (double thr : cfg.iou_thresholds) sum += category_ap(greedy_match(ranked, cat_gts, thr), cat_gts.size());
    r.per_category[c] = sum / static_cast<double>(cfg.iou_thresholds.size());
  }
  if (!r.per_category.empty()) {
    double s = 0.0;
    for (const auto& [c, v] : r.per_category) s += v;
    r.ap = s / static_cast<double>(r.per_category.size());
  }
  return r;
}

std::string optional_text(const std::optional<double>& v) { return v ? format_number(*v) : "NA"; }

}  // namespace

std::vector<double> APConfig::default_thresholds() {
  std::vector<double> t;
  for (int i = 0; i < 10; ++i) t.push_back(0.5 + 0.05 * i);
  return t;
}

EvalResult compute_ap(const std::vector<EvalDetection>& dets, const std::vector<EvalGroundTruth>& gts,
                      const APConfig& cfg) {
  return evaluate_categories(dets, gts, cfg, [](const std::vector<bool>& tp, std::size_t n_gt) {
    const std::size_t n = tp.size();
    std::vector<double> recall(n), precision(n);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < n; ++i) {
      hits += tp[i] ? 1 : 0;
      recall[i] = static_cast<double>(hits) / static_cast<double>(n_gt);
      precision[i] = static_cast<double>(hits) / static_cast<double>(i + 1);
    }
    for (std::size_t i = n; i-- > 1;) precision[i - 1] = std::max(precision[i - 1], precision[i]);
    double area = 0.0;
    std::size_t j = 0;
    for (std::size_t i = 0; i < kRecallPoints; ++i) {
      const double r = recall_level(i);
      while (j < n && recall[j] < r - kIouSlack) ++j;
      if (j == n) break;
      area += precision[j];
    }
    return area / static_cast<double>(kRecallPoints);
  });
}

EvalResult reference_ap(const std::vector<EvalDetection>& dets, const std::vector<EvalGroundTruth>& gts,
                        const APConfig& cfg) {
  return evaluate_categories(dets, gts, cfg, [](const std::vector<bool>& tp, std::size_t n_gt) {
    double area = 0.0;
    for (std::size_t i = 0; i < kRecallPoints; ++i) {
      const double r = recall_level(i);
      double best = 0.0;
      for (std::size_t k = 1; k <= tp.size(); ++k) {
        const auto hits = static_cast<double>(std::count(tp.begin(), tp.begin() + static_cast<std::ptrdiff_t>(k), true));
        if (hits / static_cast<double>(n_gt) >= r - kIouSlack) best = std::max(best, hits / static_cast<double>(k));
      }
      area += best;
    }
    return area / static_cast<double>(kRecallPoints);
  });
}

BucketAP bucketed_ap(const EvalResult& result, const std::map<int, Bucket>& buckets) {
  std::map<Bucket, std::pair<double, std::size_t>> acc;
  for (const auto& [c, v] : result.per_category) {
    auto it = buckets.find(c);
    if (it == buckets.end()) continue;
    acc[it->second].first += v;
    acc[it->second].second += 1;
  }
  auto mean = [&](Bucket b) -> std::optional<double> {
    auto it = acc.find(b);
    if (it == acc.end()) return std::nullopt;
    return it->second.first / static_cast<double>(it->second.second);
  };
  return {mean(Bucket::rare), mean(Bucket::common), mean(Bucket::frequent)};
}

double counting_mae(const std::vector<double>& predicted, const std::vector<double>& truth) {
  if (predicted.size() != truth.size())
    throw ShapeError("counting_mae: " + std::to_string(predicted.size()) + " predictions for " +
                     std::to_string(truth.size()) + " images");
  if (predicted.empty()) return 0.0;
  double s = 0.0;
  for (std::size_t i = 0; i < predicted.size(); ++i) s += std::abs(predicted[i] - truth[i]);
  return s / static_cast<double>(predicted.size());
}

std::size_t confusable_false_positives(const std::vector<EvalDetection>& dets,
                                       const std::vector<EvalGroundTruth>& gts, const Dataset& data,
                                       double min_score, double iou_thr) {
  std::size_t count = 0;
  for (const auto& d : dets) {
    if (d.score < min_score) continue;
    const int partner = data.partner_of(d.category_id);
    if (partner < 0) continue;
    bool on_partner = false, on_own = false;
    for (const auto& g : gts) {
      if (g.image_id != d.image_id || iou(d.bbox, g.bbox) < iou_thr) continue;
      on_partner |= g.category_id == partner;
      on_own |= g.category_id == d.category_id;
    }
    count += (on_partner && !on_own) ? 1 : 0;
  }
  return count;
}

std::vector<EvalGroundTruth> ground_truth(const Dataset& data, const std::vector<int>& image_ids) {
  std::vector<EvalGroundTruth> out;
  for (int id : image_ids)
    for (const auto& a : data.scene(id).annotations) out.push_back({id, a.category_id, a.bbox});
  return out;
}

PromptBank build_eval_bank(const Dataset& data, const Checkpoint& ckpt, const EvalOptions& opts) {
  std::set<int> present;
  for (int id : data.train_ids())
    for (const auto& a : data.scene(id).annotations) present.insert(a.category_id);
  Rng rng = make_stream(opts.seed, "prompts");
  return build_visualg_prompts(data, std::vector<int>(present.begin(), present.end()), opts.n_pos, opts.k,
                               opts.neg_spec, make_pyramid_fn(ckpt.params, ckpt.model), ckpt.params,
                               ckpt.model.prompt_config(), rng);
}

std::map<int, Prediction> predict_images(const Dataset& data, const Checkpoint& ckpt,
                                         const std::vector<int>& image_ids) {
  std::map<int, Prediction> out;
  for (int id : image_ids) out.emplace(id, predict(data.scene(id).pixels, ckpt.params, ckpt.model));
  return out;
}

EvalOutput evaluate(const Dataset& data, const std::map<int, Prediction>& predictions, const PromptBank& bank,
                    const EvalOptions& opts) {
  const std::vector<int> ids = opts.image_ids.empty() ? data.val_ids() : opts.image_ids;
  InferOptions io;
  io.mode = opts.mode;
  io.beta = opts.beta;
  io.score_threshold = opts.score_threshold;
  io.all_categories = true;
  EvalOutput out;
  for (int id : ids) {
    auto it = predictions.find(id);
    if (it == predictions.end()) throw NotFoundError("no prediction for image " + std::to_string(id));
    const Scene& s = data.scene(id);
    for (const Detection& d : infer_detections(it->second.queries, it->second.boxes, bank, io))
      out.detections.push_back({id, d.category_id,
                                from_cxcywh_norm(d.box, static_cast<double>(s.width), static_cast<double>(s.height)),
                                d.probability});
  }
  const auto gts = ground_truth(data, ids);
  out.result = compute_ap(out.detections, gts, opts.ap);
  const BucketAP b = bucketed_ap(out.result, frequency_buckets(data, data.config.buckets));
  out.result.ap_r = b.ap_r;
  out.result.ap_c = b.ap_c;
  out.result.ap_f = b.ap_f;
  out.confusable_fp = confusable_false_positives(out.detections, gts, data);
  return out;
}

EvalOutput evaluate_checkpoint(const Dataset& data, const Checkpoint& ckpt, const EvalOptions& opts) {
  const std::vector<int> ids = opts.image_ids.empty() ? data.val_ids() : opts.image_ids;
  return evaluate(data, predict_images(data, ckpt, ids), build_eval_bank(data, ckpt, opts), opts);
}

SweepAxis parse_sweep_axis(const std::string& text) {
  if (text == "beta") return SweepAxis::beta;
  if (text == "eta") return SweepAxis::eta;
  if (text == "K" || text == "k") return SweepAxis::k;
  if (text == "N_pos" || text == "n_pos") return SweepAxis::n_pos;
  if (text == "mode_policy") return SweepAxis::mode_policy;
  throw ValidationError("unknown sweep axis '" + text + "'");
}

const char* to_string(SweepAxis a) {
  switch (a) {
    case SweepAxis::beta: return "beta";
    case SweepAxis::eta: return "eta";
    case SweepAxis::k: return "K";
    case SweepAxis::n_pos: return "N_pos";
    case SweepAxis::mode_policy: return "mode_policy";
  }
  return "?";
}

bool axis_retrains(SweepAxis a) { return a == SweepAxis::eta || a == SweepAxis::mode_policy; }

namespace {

double parse_real(const std::string& s) {
  double v = 0.0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) throw ValidationError("not a number: '" + s + "'");
  return v;
}

std::size_t parse_count(const std::string& s) {
  std::size_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) throw ValidationError("not a count: '" + s + "'");
  return v;
}

}  // namespace

SweepReport run_sweep(SweepAxis axis, const std::vector<std::string>& grid, const SweepBase& base,
                      const Dataset& data, std::uint64_t seed, const std::optional<Checkpoint>& checkpoint) {
  if (grid.empty()) throw ValidationError("sweep grid is empty");
  SweepBase b = base;
  b.train.seed = seed;
  b.eval.seed = seed;
  SweepReport report;
  report.axis = axis;
  report.seed = seed;
  const std::vector<int> ids = b.eval.image_ids.empty() ? data.val_ids() : b.eval.image_ids;

  if (!axis_retrains(axis)) {
    const Checkpoint ckpt = checkpoint ? *checkpoint : Checkpoint{b.model, train(data, b.model, b.train).params};
    const auto preds = predict_images(data, ckpt, ids);
    std::optional<PromptBank> shared;
    if (axis == SweepAxis::beta) shared = build_eval_bank(data, ckpt, b.eval);
    for (const std::string& v : grid) {
      EvalOptions o = b.eval;
      if (axis == SweepAxis::beta) o.beta = parse_real(v);
      if (axis == SweepAxis::k) o.k = parse_count(v);
      if (axis == SweepAxis::n_pos) o.n_pos = parse_count(v);
      const PromptBank bank = shared ? *shared : build_eval_bank(data, ckpt, o);
      report.points.push_back({v, evaluate(data, preds, bank, o).result, std::nullopt});
    }
    return report;
  }

  for (const std::string& v : grid) {
    TrainConfig t = b.train;
    if (axis == SweepAxis::eta) t.nnh.eta = parse_real(v);
    if (axis == SweepAxis::mode_policy) t.nnc.policy = ModePolicy::parse(v);
    const Checkpoint ckpt{b.model, train(data, b.model, t).params};
    const auto preds = predict_images(data, ckpt, ids);
    const PromptBank bank = build_eval_bank(data, ckpt, b.eval);
    SweepPoint p{v, evaluate(data, preds, bank, b.eval).result, std::nullopt};
    if (axis == SweepAxis::mode_policy) {
      EvalOptions o = b.eval;
      o.mode = InferenceMode::positive_only;
      p.positive_only = evaluate(data, preds, bank, o).result;
    }
    report.points.push_back(std::move(p));
  }
  return report;
}

std::string format_number(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, p);
}

std::string sweep_csv(const SweepReport& report) {
  const bool dual = report.axis == SweepAxis::mode_policy;
  std::string out = std::string("axis_value,ap,ap_r,ap_c,ap_f,seed") + (dual ? ",ap_positive_only" : "") + "\n";
  for (const auto& p : report.points) {
    out += p.value + "," + format_number(p.result.ap) + "," + optional_text(p.result.ap_r) + "," +
           optional_text(p.result.ap_c) + "," + optional_text(p.result.ap_f) + "," + std::to_string(report.seed);
    if (dual) out += "," + (p.positive_only ? format_number(p.positive_only->ap) : std::string("NA"));
    out += "\n";
  }
  return out;
}

std::string eval_csv(const EvalResult& r, std::uint64_t seed, const std::string& label) {
  return "axis_value,ap,ap_r,ap_c,ap_f,seed\n" + label + "," + format_number(r.ap) + "," + optional_text(r.ap_r) +
         "," + optional_text(r.ap_c) + "," + optional_text(r.ap_f) + "," + std::to_string(seed) + "\n";
}

std::string sweep_summary(const SweepReport& report) {
  std::ostringstream s;
  s << "sweep over " << to_string(report.axis) << " (seed " << report.seed << ")\n";
  std::size_t best = 0;
  for (std::size_t i = 0; i < report.points.size(); ++i) {
    const auto& p = report.points[i];
    char line[160];
    std::snprintf(line, sizeof(line), "  %-16s AP %.4f  AP_r %s  AP_c %s  AP_f %s", p.value.c_str(), p.result.ap,
                  p.result.ap_r ? std::to_string(*p.result.ap_r).c_str() : "NA",
                  p.result.ap_c ? std::to_string(*p.result.ap_c).c_str() : "NA",
                  p.result.ap_f ? std::to_string(*p.result.ap_f).c_str() : "NA");
    s << line;
    if (p.positive_only) s << "  positive-only AP " << p.positive_only->ap;
    s << "\n";
    if (p.result.ap > report.points[best].result.ap) best = i;
  }
  s << "best: " << report.points[best].value << "\n";
  return s.str();
}

std::string detections_json(const std::vector<EvalDetection>& dets) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& d : dets)
    rows.push_back({{"image_id", d.image_id},
                    {"category_id", d.category_id},
                    {"bbox", {d.bbox.x, d.bbox.y, d.bbox.w, d.bbox.h}},
                    {"score", d.score}});
  return rows.dump(1);
}

}  // namespace negprompt
