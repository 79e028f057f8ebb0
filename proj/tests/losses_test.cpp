// Copyright 2026 The negprompt Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "negprompt/errors.hpp"
#include "negprompt/geometry.hpp"
#include "negprompt/losses.hpp"
#include "negprompt/numcore/gradcheck.hpp"
#include "negprompt/numcore/ops.hpp"
#include "negprompt/rng.hpp"

namespace negprompt {
namespace {

TEST(Focal, HalfProbability) {
  const FocalConfig cfg;
  EXPECT_NEAR(focal_loss(0.5, true, cfg).value, 0.04332169878499658, 1e-15);
  EXPECT_NEAR(focal_loss(0.5, false, cfg).value, 0.12996509635498973, 1e-15);
}

TEST(Focal, ClampsExtremeProbabilities) {
  const ScalarLoss l = focal_loss(0.0, true, FocalConfig{});
  EXPECT_TRUE(std::isfinite(l.value));
  EXPECT_NEAR(l.value, -0.25 * std::log(kProbClamp), 1e-9);
  EXPECT_EQ(l.grad, 0.0);
  EXPECT_EQ(focal_loss(1.0, true, FocalConfig{}).value, 0.0);
}

TEST(Focal, GradientMatchesDifference) {
  for (double p : {0.03, 0.2, 0.5, 0.77, 0.99})
    for (bool pos : {true, false}) {
      const FocalConfig cfg;
      const double h = 1e-7;
      const double num =
          (focal_loss(p + h, pos, cfg).value - focal_loss(p - h, pos, cfg).value) / (2 * h);
      EXPECT_NEAR(focal_loss(p, pos, cfg).grad, num, 1e-6 * std::max(1.0, std::abs(num)));
    }
}

TEST(Hinge, Fixtures) {
  const NNHConfig cfg{0.3};
  const double a[] = {0.5};
  EXPECT_NEAR(nnh_loss(0.7, a, cfg).value, 0.1, 1e-15);
  const double b[] = {0.1};
  EXPECT_EQ(nnh_loss(0.9, b, cfg).value, 0.0);
  const double c[] = {0.9};
  EXPECT_NEAR(nnh_loss(0.4, c, cfg).value, 0.8, 1e-15);
  const double two[] = {0.5, 0.1};
  const NNHResult r = nnh_loss(0.7, two, cfg);
  EXPECT_NEAR(r.value, 0.05, 1e-15);
  EXPECT_EQ(r.active_mask, 1u);
  EXPECT_EQ(r.grad_negatives, (std::vector<double>{0.5, 0.0}));
  EXPECT_EQ(r.grad_positive, -0.5);
}

TEST(Hinge, ZeroNegativesIsCountError) {
  EXPECT_THROW(nnh_loss(0.5, std::span<const double>{}, NNHConfig{}), CountError);
}

TEST(Hinge, NonNegativeAndMonotone) {
  Rng rng = make_stream(2, "losses");
  for (int i = 0; i < 200; ++i) {
    std::vector<double> negs(1 + uniform_index(rng, 6));
    for (auto& v : negs) v = uniform(rng, -2, 2);
    const double sp = uniform(rng, -2, 2);
    const double base = nnh_loss(sp, negs, NNHConfig{}).value;
    EXPECT_GE(base, 0.0);
    EXPECT_LE(nnh_loss(sp + 0.1, negs, NNHConfig{}).value, base);
    EXPECT_GE(nnh_loss(sp, negs, NNHConfig{0.5}).value, base);
  }
}

TEST(BoxLoss, IdenticalBoxesGiveZero) {
  const Box4 b{0.4, 0.5, 0.2, 0.3};
  EXPECT_EQ(l1_box_loss(b, b).value, 0.0);
  EXPECT_NEAR(giou_loss(b, b).value, 0.0, 1e-15);
}

TEST(BoxLoss, Fixtures) {
  EXPECT_NEAR(l1_box_loss({0.5, 0.5, 0.2, 0.2}, {0.5, 0.5, 0.4, 0.2}).value, 0.2, 1e-15);
  EXPECT_EQ(l1_box_loss({0.1, 0.2, 0.3, 0.4}, {0.4, 0.3, 0.2, 0.1}).value,
            l1_box_loss({0.4, 0.3, 0.2, 0.1}, {0.1, 0.2, 0.3, 0.4}).value);
  // Corner boxes (0,0,2,2) and (1,1,2,2) in centre form.
  EXPECT_NEAR(giou_loss({1, 1, 2, 2}, {2, 2, 2, 2}).value, 1.0 + 5.0 / 63.0, 1e-12);
  EXPECT_GT(giou_loss({0.05, 0.05, 0.01, 0.01}, {0.95, 0.95, 0.01, 0.01}).value, 1.99);
}

TEST(BoxLoss, GiouMatchesGeometry) {
  Rng rng = make_stream(3, "losses");
  for (int i = 0; i < 200; ++i) {
    const Box4 p{uniform(rng, 0.2, 0.8), uniform(rng, 0.2, 0.8), uniform(rng, 0.05, 0.4),
                 uniform(rng, 0.05, 0.4)};
    const Box4 t{uniform(rng, 0.2, 0.8), uniform(rng, 0.2, 0.8), uniform(rng, 0.05, 0.4),
                 uniform(rng, 0.05, 0.4)};
    const BBox bp = from_cxcywh_norm(p, 1, 1), bt = from_cxcywh_norm(t, 1, 1);
    EXPECT_NEAR(giou_loss(p, t).value, 1.0 - giou(bp, bt), 1e-12);
  }
}

TEST(BoxLoss, ClampsDegenerateWidth) {
  const BoxLoss l = giou_loss({0.5, 0.5, 0.0, 0.2}, {0.5, 0.5, 0.2, 0.2});
  EXPECT_TRUE(std::isfinite(l.value));
  EXPECT_EQ(l.grad[2], 0.0);
}

TEST(BoxLoss, TapeGradientsMatchDifferences) {
  Rng rng = make_stream(4, "losses");
  for (int probe = 0; probe < 100; ++probe) {
    Tensor boxes({3, 4});
    for (std::size_t r = 0; r < 3; ++r) {
      boxes[r * 4] = uniform(rng, 0.3, 0.7);
      boxes[r * 4 + 1] = uniform(rng, 0.3, 0.7);
      boxes[r * 4 + 2] = uniform(rng, 0.1, 0.4);
      boxes[r * 4 + 3] = uniform(rng, 0.1, 0.4);
    }
    const std::vector<std::pair<std::size_t, Box4>> pairs{
        {0, {0.5, 0.5, 0.2, 0.3}}, {2, {uniform(rng, 0.3, 0.7), 0.4, 0.25, 0.15}}};
    ParamMap p{{"boxes", boxes}};
    const auto f = [&pairs](Tape& t, const ParamMap& params) {
      Var b = t.param(params, "boxes");
      return ad::add(ad::scale(ad::l1_loss_sum(b, pairs), 5.0), ad::giou_loss_sum(b, pairs));
    };
    const GradCheckReport r = grad_check(f, p, {});
    EXPECT_LT(r.max_rel_error, 1e-4);
  }
}

TEST(BoxLoss, HingeTapeGradients) {
  Rng rng = make_stream(5, "losses");
  for (int probe = 0; probe < 100; ++probe) {
    Tensor sp({2, 2}), sn({2, 6});
    for (auto& v : sp.storage()) v = uniform(rng, -1, 1);
    for (auto& v : sn.storage()) v = uniform(rng, -1, 1);
    ParamMap p{{"sp", sp}, {"sn", sn}};
    const auto f = [](Tape& t, const ParamMap& params) {
      return ad::nnh_loss_sum(t.param(params, "sp"), t.param(params, "sn"),
                              {{0, 1}, {1, 0}}, 3, NNHConfig{});
    };
    const GradCheckReport r = grad_check(f, p, {});
    EXPECT_LT(r.max_rel_error, 1e-4);
  }
}

TEST(Objective, AuxLayersUseSameWeights) {
  const LossWeights w;
  const LossComponents fin{1.0, 0.5, 0.1, 0.2, 0.0};
  const LossComponents aux[] = {{2.0, 0.0, 0.2, 0.4, 0.0}};
  EXPECT_NEAR(total_loss(fin, aux, w), (1 + 0.5 + 0.5 + 0.4) + (2 + 1 + 0.8), 1e-12);
  EXPECT_DOUBLE_EQ(total_loss({1.0, 1.0, 1.0, 1.0, 0.0}, {}, w), 9.0);
  EXPECT_EQ(total_loss({}, {}, w), 0.0);
  LossWeights bad;
  bad.dn = 1.0;
  EXPECT_THROW(bad.validate(), RangeError);
}

}  // namespace
}  // namespace negprompt
