// Copyright 2026 The negprompt Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "negprompt/errors.hpp"
#include "negprompt/evalkit.hpp"

namespace negprompt {
namespace {

EvalGroundTruth gt(int image, int cat, BBox b) { return {image, cat, b}; }
EvalDetection det(int image, int cat, BBox b, double s) { return {image, cat, b, s}; }

TEST(AP, NinetyPercentOverlapFixture) {
  const auto r = compute_ap({det(0, 1, {0, 0, 10, 9}, 0.8)}, {gt(0, 1, {0, 0, 10, 10})});
  EXPECT_DOUBLE_EQ(r.ap, 0.9);
}

TEST(AP, PerfectAndEmpty) {
  const std::vector<EvalGroundTruth> g{gt(0, 1, {0, 0, 10, 10}), gt(0, 2, {20, 20, 8, 8}), gt(1, 1, {5, 5, 6, 6})};
  std::vector<EvalDetection> d;
  for (const auto& x : g) d.push_back(det(x.image_id, x.category_id, x.bbox, 0.9));
  EXPECT_DOUBLE_EQ(compute_ap(d, g).ap, 1.0);
  EXPECT_DOUBLE_EQ(compute_ap({}, g).ap, 0.0);
  EXPECT_EQ(compute_ap(d, g).per_category.size(), 2u);
}

TEST(AP, SingleThresholdHalfRecall) {
  APConfig c;
  c.iou_thresholds = {0.5};
  const std::vector<EvalGroundTruth> g{gt(0, 1, {0, 0, 10, 10}), gt(0, 1, {30, 30, 10, 10})};
  const auto r = compute_ap({det(0, 1, {0, 0, 10, 10}, 0.9)}, g, c);
  EXPECT_NEAR(r.ap, 51.0 / 101.0, 1e-12);
}

std::pair<std::vector<EvalDetection>, std::vector<EvalGroundTruth>> random_case(Rng& rng) {
  std::vector<EvalGroundTruth> g;
  std::vector<EvalDetection> d;
  const int images = 1 + static_cast<int>(uniform_index(rng, 3));
  for (int im = 0; im < images; ++im) {
    const std::size_t ng = uniform_index(rng, 4);
    for (std::size_t i = 0; i < ng; ++i)
      g.push_back(gt(im, static_cast<int>(uniform_index(rng, 2)),
                     {uniform(rng, 0, 40), uniform(rng, 0, 40), uniform(rng, 4, 20), uniform(rng, 4, 20)}));
    const std::size_t nd = uniform_index(rng, 6);
    for (std::size_t i = 0; i < nd; ++i) {
      BBox b{uniform(rng, 0, 40), uniform(rng, 0, 40), uniform(rng, 4, 20), uniform(rng, 4, 20)};
      if (!g.empty() && uniform(rng, 0, 1) < 0.6) {
        b = g[uniform_index(rng, g.size())].bbox;
        b.x += uniform(rng, -2, 2);
        b.y += uniform(rng, -2, 2);
      }
      d.push_back(det(im, static_cast<int>(uniform_index(rng, 2)), b, uniform(rng, 0, 1)));
    }
  }
  return {d, g};
}

TEST(AP, AgreesWithReference) {
  Rng rng = make_stream(3, "ap");
  for (int t = 0; t < 300; ++t) {
    const auto [d, g] = random_case(rng);
    EXPECT_NEAR(compute_ap(d, g).ap, reference_ap(d, g).ap, 1e-6);
  }
}

TEST(AP, MonotoneScoreTransformInvariant) {
  Rng rng = make_stream(4, "ap");
  for (int t = 0; t < 100; ++t) {
    auto [d, g] = random_case(rng);
    const double before = compute_ap(d, g).ap;
    for (auto& x : d) x.score = std::exp(3.0 * x.score) - 7.0;
    EXPECT_EQ(compute_ap(d, g).ap, before);
  }
}

TEST(AP, DuplicateNeverHelps) {
  Rng rng = make_stream(5, "ap");
  for (int t = 0; t < 200; ++t) {
    auto [d, g] = random_case(rng);
    if (d.empty()) continue;
    const double before = compute_ap(d, g).ap;
    EvalDetection dup = d[uniform_index(rng, d.size())];
    dup.score *= 0.999;
    d.push_back(dup);
    EXPECT_LE(compute_ap(d, g).ap, before + 1e-12);
  }
}

TEST(AP, DetectionCapPerImage) {
  APConfig c;
  c.max_detections = 1;
  const std::vector<EvalGroundTruth> g{gt(0, 1, {0, 0, 10, 10})};
  const auto r = compute_ap({det(0, 1, {50, 50, 5, 5}, 0.9), det(0, 1, {0, 0, 10, 10}, 0.5)}, g, c);
  EXPECT_DOUBLE_EQ(r.ap, 0.0);
}

TEST(Buckets, MissingBucketIsAbsent) {
  EvalResult r;
  r.per_category = {{1, 0.2}, {2, 0.4}, {3, 0.9}};
  const BucketAP b = bucketed_ap(r, {{1, Bucket::rare}, {2, Bucket::rare}, {3, Bucket::frequent}});
  ASSERT_TRUE(b.ap_r.has_value());
  EXPECT_NEAR(*b.ap_r, 0.3, 1e-15);
  EXPECT_FALSE(b.ap_c.has_value());
  EXPECT_DOUBLE_EQ(*b.ap_f, 0.9);
}

TEST(Counting, MeanAbsoluteError) {
  EXPECT_DOUBLE_EQ(counting_mae({3, 5}, {2, 5}), 0.5);
  EXPECT_THROW(counting_mae({1}, {1, 2}), ShapeError);
}

TEST(Csv, Layout) {
  SweepReport rep;
  rep.axis = SweepAxis::beta;
  rep.seed = 7;
  EvalResult r;
  r.ap = 0.25;
  r.ap_f = 0.5;
  rep.points = {{"0.1", r, std::nullopt}, {"0.3", r, std::nullopt}};
  const std::string csv = sweep_csv(rep);
  EXPECT_EQ(csv, "axis_value,ap,ap_r,ap_c,ap_f,seed\n0.1,0.25,NA,NA,0.5,7\n0.3,0.25,NA,NA,0.5,7\n");
  rep.axis = SweepAxis::mode_policy;
  rep.points[0].positive_only = r;
  const std::string dual = sweep_csv(rep);
  EXPECT_EQ(dual.substr(0, dual.find('\n')), "axis_value,ap,ap_r,ap_c,ap_f,seed,ap_positive_only");
  EXPECT_NE(dual.find("0.1,0.25,NA,NA,0.5,7,0.25\n"), std::string::npos);
  EXPECT_NE(dual.find("0.3,0.25,NA,NA,0.5,7,NA\n"), std::string::npos);
  EXPECT_EQ(eval_csv(r, 3, "x"), "axis_value,ap,ap_r,ap_c,ap_f,seed\nx,0.25,NA,NA,0.5,3\n");
}

TEST(Sweep, AxisNames) {
  for (auto a : {SweepAxis::beta, SweepAxis::eta, SweepAxis::k, SweepAxis::n_pos, SweepAxis::mode_policy})
    EXPECT_EQ(parse_sweep_axis(to_string(a)), a);
  EXPECT_THROW(parse_sweep_axis("gamma"), Error);
  EXPECT_TRUE(axis_retrains(SweepAxis::eta));
  EXPECT_FALSE(axis_retrains(SweepAxis::beta));
}

TEST(Detections, JsonUsesCornerWidthHeight) {
  const auto j = nlohmann::json::parse(detections_json({det(3, 2, {1, 2, 3, 4}, 0.5)}));
  ASSERT_EQ(j.size(), 1u);
  EXPECT_EQ(j[0]["image_id"], 3);
  EXPECT_EQ(j[0]["category_id"], 2);
  EXPECT_EQ(j[0]["bbox"], nlohmann::json::array({1.0, 2.0, 3.0, 4.0}));
}

class Pipeline : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    DataConfig dc;
    dc.num_scenes = 16;
    dc.num_categories = 4;
    dc.num_pairs = 1;
    dc.val_fraction = 0.25;
    dc.seed = 8;
    data_ = new Dataset(synthesize_dataset(dc));
    base_.model.channels = 8;
    base_.model.dim = 16;
    base_.model.num_queries = 6;
    base_.model.ffn_hidden = 24;
    base_.model.grid = 3;
    base_.train.steps = 4;
    base_.train.batch_size = 2;
    base_.eval.n_pos = 2;
    ckpt_ = new Checkpoint{base_.model, train(*data_, base_.model, base_.train).params};
  }
  static void TearDownTestSuite() {
    delete data_;
    delete ckpt_;
  }
  static Dataset* data_;
  static Checkpoint* ckpt_;
  static SweepBase base_;
};
Dataset* Pipeline::data_ = nullptr;
Checkpoint* Pipeline::ckpt_ = nullptr;
SweepBase Pipeline::base_;

TEST_F(Pipeline, SinglePointSweepEqualsDirectEvaluation) {
  EvalOptions o = base_.eval;
  o.beta = 0.3;
  o.seed = 5;
  const EvalOutput direct = evaluate_checkpoint(*data_, *ckpt_, o);
  const SweepReport rep = run_sweep(SweepAxis::beta, {"0.3"}, base_, *data_, 5, *ckpt_);
  ASSERT_EQ(rep.points.size(), 1u);
  EXPECT_EQ(rep.points[0].result.ap, direct.result.ap);
  EXPECT_EQ(rep.points[0].result.per_category, direct.result.per_category);
}

TEST_F(Pipeline, ThresholdFiltersAndGroundTruthMatchesValidation) {
  EvalOptions o = base_.eval;
  o.score_threshold = 1.0;
  EXPECT_TRUE(evaluate_checkpoint(*data_, *ckpt_, o).detections.empty());
  std::size_t n = 0;
  for (int id : data_->val_ids()) n += data_->scene(id).annotations.size();
  EXPECT_EQ(ground_truth(*data_, data_->val_ids()).size(), n);
}

TEST_F(Pipeline, ConfusableFalsePositivesCountPartnerHits) {
  const auto& pair = data_->config.resolved_pairs().at(0);
  const int id = data_->val_ids().at(0);
  const auto gts = ground_truth(*data_, {id});
  std::vector<EvalDetection> d;
  for (const auto& g : gts) {
    const int partner = g.category_id == pair.first ? pair.second : g.category_id == pair.second ? pair.first : -1;
    if (partner >= 0) d.push_back(det(id, partner, g.bbox, 0.9));
  }
  EXPECT_EQ(confusable_false_positives(d, gts, *data_), d.size());
  for (auto& x : d) x.score = 0.4;
  EXPECT_EQ(confusable_false_positives(d, gts, *data_), 0u);
}

}  // namespace
}  // namespace negprompt
