// Copyright 2026 The negprompt Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <functional>

#include <gtest/gtest.h>

#include "negprompt/errors.hpp"
#include "negprompt/losses.hpp"
#include "negprompt/numcore/gradcheck.hpp"
#include "negprompt/numcore/ops.hpp"
#include "negprompt/rng.hpp"

namespace negprompt {
namespace {

Tensor random_tensor(std::vector<std::size_t> dims, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(dims));
  for (auto& v : t.storage()) v = uniform(rng, lo, hi);
  return t;
}

TEST(Tensor, RejectsMismatchedData) {
  EXPECT_THROW(Tensor({2, 2}, std::vector<double>{1, 2, 3}), ShapeError);
  EXPECT_THROW(Tensor({0, 2}), ShapeError);
}

TEST(Matmul, IdentityLeavesMatrixUnchanged) {
  const Tensor a = Tensor::matrix({{1.5, -2}, {3, 4.25}});
  EXPECT_EQ(tensor_ops::matmul(Tensor::identity(2), a), a);
}

TEST(Matmul, HandArithmetic) {
  const Tensor out =
      tensor_ops::matmul(Tensor::matrix({{1, 2}, {3, 4}}), Tensor::matrix({{1}, {1}}));
  EXPECT_EQ(out, Tensor::matrix({{3}, {7}}));
}

TEST(Matmul, ZeroMatrix) {
  const Tensor a = Tensor::matrix({{1, 2}, {3, 4}});
  EXPECT_EQ(tensor_ops::matmul(Tensor({2, 2}, 0.0), a), Tensor({2, 2}, 0.0));
}

TEST(Matmul, DimensionMismatchIsShapeError) {
  EXPECT_THROW(tensor_ops::matmul(Tensor({2, 3}), Tensor({2, 3})), ShapeError);
  Tape tape;
  EXPECT_THROW(ad::matmul(tape.constant(Tensor({2, 3})), tape.constant(Tensor({2, 3}))),
               ShapeError);
}

TEST(Matmul, AssociativeWithIdentity) {
  Rng rng = make_stream(3, "test");
  const Tensor a = random_tensor({3, 4}, rng), b = random_tensor({4, 2}, rng);
  const Tensor left = tensor_ops::matmul(tensor_ops::matmul(a, Tensor::identity(4)), b);
  const Tensor right = tensor_ops::matmul(a, tensor_ops::matmul(Tensor::identity(4), b));
  EXPECT_EQ(left, right);
}

TEST(Sigmoid, Values) {
  EXPECT_EQ(tensor_ops::sigmoid(0.0), 0.5);
  EXPECT_NEAR(tensor_ops::sigmoid(1.1), 0.7502601055951176, 1e-15);
  const double tiny = tensor_ops::sigmoid(-50.0);
  EXPECT_GT(tiny, 0.0);
  EXPECT_LT(tiny, 1e-20);
  // log-domain oracle: log σ(-50) = -50 - log(1 + e^-50)
  EXPECT_NEAR(std::log(tiny), -50.0 - std::log1p(std::exp(-50.0)), 1e-12);
  EXPECT_EQ(tensor_ops::sigmoid(800.0), 1.0);
  EXPECT_EQ(tensor_ops::sigmoid(-800.0), 0.0);
}

TEST(Softmax, UniformAndStable) {
  const Tensor u = tensor_ops::softmax(Tensor::vector({0, 0, 0}), 0);
  for (double v : u.storage()) EXPECT_NEAR(v, 1.0 / 3.0, 1e-15);
  const Tensor s = tensor_ops::softmax(Tensor::vector({1000, 0}), 0);
  EXPECT_TRUE(std::isfinite(s[0]) && std::isfinite(s[1]));
  EXPECT_NEAR(s[0], 1.0, 1e-15);
  EXPECT_NEAR(s[1], 0.0, 1e-15);
  const Tensor p = tensor_ops::softmax(Tensor::vector({1, 2}), 0);
  EXPECT_NEAR(p[0], 0.2689414213699951, 1e-15);
  EXPECT_NEAR(p[1], 0.7310585786300049, 1e-15);
}

TEST(Softmax, RowsSumToOneAlongAnyAxis) {
  Rng rng = make_stream(5, "test");
  const Tensor x = random_tensor({3, 4, 5}, rng, -20, 20);
  for (std::size_t axis = 0; axis < 3; ++axis) {
    const Tensor s = tensor_ops::softmax(x, axis);
    const auto& d = x.dims();
    std::size_t outer = 1, inner = 1;
    for (std::size_t i = 0; i < axis; ++i) outer *= d[i];
    for (std::size_t i = axis + 1; i < 3; ++i) inner *= d[i];
    for (std::size_t a = 0; a < outer; ++a)
      for (std::size_t b = 0; b < inner; ++b) {
        double sum = 0.0;
        for (std::size_t i = 0; i < d[axis]; ++i) sum += s[a * d[axis] * inner + i * inner + b];
        EXPECT_NEAR(sum, 1.0, 1e-12);
      }
  }
  EXPECT_THROW(tensor_ops::softmax(x, 3), ShapeError);
}

TEST(BilinearSample, Examples) {
  const Tensor fm({1, 2, 2}, std::vector<double>{1, 2, 3, 4});
  const double xs[] = {0.5, 1.0}, ys[] = {0.5, 0.0};
  const Tensor out = tensor_ops::bilinear_sample(fm, xs, ys);
  EXPECT_DOUBLE_EQ(out.at(0, 0), 2.5);
  EXPECT_EQ(out.at(1, 0), 2.0);

  Tensor constant({3, 5, 7}, 0.75);
  Rng rng = make_stream(1, "test");
  for (int i = 0; i < 50; ++i) {
    const double x[] = {uniform(rng, 0, 6)}, y[] = {uniform(rng, 0, 4)};
    const Tensor v = tensor_ops::bilinear_sample(constant, x, y);
    for (double c : v.storage()) EXPECT_DOUBLE_EQ(c, 0.75);
  }
  const double bx[] = {7.0}, by[] = {0.0};
  EXPECT_THROW(tensor_ops::bilinear_sample(constant, bx, by), RangeError);
  const double nx[] = {-0.1}, ny[] = {0.0};
  EXPECT_THROW(tensor_ops::bilinear_sample(constant, nx, ny), RangeError);
}

TEST(Determinism, OpsAreBitIdenticalAcrossRuns) {
  Rng rng = make_stream(11, "test");
  const Tensor a = random_tensor({6, 5}, rng), b = random_tensor({5, 7}, rng);
  auto run = [&] {
    Tape t;
    Var y = ad::softmax_rows(ad::matmul(t.constant(a), t.constant(b)));
    return y.value();
  };
  EXPECT_EQ(run(), run());
}

TEST(Tape, EveryBoundParameterGetsAGradient) {
  Tape t;
  ParamMap p{{"used", Tensor::vector({1, 2})}, {"unused", Tensor::vector({3})}};
  Var u = t.param(p, "used");
  t.param(p, "unused");
  Var out = ad::sum(ad::mul(u, u));
  t.backward(out);
  const ParamMap g = t.param_grads();
  ASSERT_EQ(g.size(), 2u);
  EXPECT_EQ(g.at("used"), Tensor::vector({2, 4}));
  EXPECT_EQ(g.at("unused"), Tensor::vector({0}));
}

TEST(Tape, ReplayReproducesForwardBitExactly) {
  Rng rng = make_stream(12, "test");
  ParamMap p{{"w", random_tensor({4, 3}, rng)}, {"x", random_tensor({2, 4}, rng)}};
  auto build = [](Tape& t, const ParamMap& params) {
    return ad::sum(ad::sigmoid(ad::matmul(t.param(params, "x"), t.param(params, "w"))));
  };
  Tape a, b;
  const double va = build(a, p).value()[0];
  const double vb = build(b, p).value()[0];
  EXPECT_EQ(va, vb);
  EXPECT_EQ(a.branch_signature(), b.branch_signature());
}

TEST(GradCheck, Square) {
  ParamMap p{{"x", Tensor::vector({3.0})}};
  const auto f = [](Tape& t, const ParamMap& params) {
    Var x = t.param(params, "x");
    return ad::sum(ad::mul(x, x));
  };
  const GradCheckReport r = grad_check(f, p, {});
  ASSERT_EQ(r.coords.size(), 1u);
  EXPECT_EQ(r.coords[0].analytic, 6.0);
  EXPECT_NEAR(r.coords[0].numeric, 6.0, 1e-6);
  EXPECT_TRUE(r.pass);
}

TEST(GradCheck, RejectsBadEpsAndNonFinite) {
  ParamMap p{{"x", Tensor::vector({1.0})}};
  const auto f = [](Tape& t, const ParamMap& params) { return ad::sum(t.param(params, "x")); };
  GradCheckOptions o;
  o.eps = 1e-2;
  EXPECT_THROW(grad_check(f, p, o), RangeError);
  const auto bad = [](Tape& t, const ParamMap& params) {
    Var x = t.param(params, "x");
    return ad::scale(ad::sum(x), std::numeric_limits<double>::infinity());
  };
  EXPECT_THROW(grad_check(bad, p, {}), EvaluationError);
}

TEST(GradCheck, FocalLossOnRandomLogits) {
  Rng rng = make_stream(21, "test");
  ParamMap p{{"logits", random_tensor({4, 3}, rng, -3, 3)}};
  Tensor targets({4, 3}, 0.0);
  targets[1] = targets[5] = targets[9] = 1.0;
  const auto f = [&targets](Tape& t, const ParamMap& params) {
    return ad::focal_loss_sum(ad::sigmoid(t.param(params, "logits")), targets, FocalConfig{});
  };
  const GradCheckReport r = grad_check(f, p, {});
  EXPECT_LT(r.max_rel_error, 1e-4);
  EXPECT_EQ(r.excluded, 0u);
}

TEST(GradCheck, HingeKinkIsExcluded) {
  // S_P = 1.0, S_N = 0.7, eta = 0.3: the hinge argument is exactly zero.
  ParamMap p{{"sp", Tensor({1, 1}, 1.0)}, {"sn", Tensor({1, 1}, 0.7)}};
  const auto f = [](Tape& t, const ParamMap& params) {
    return ad::nnh_loss_sum(t.param(params, "sp"), t.param(params, "sn"), {{0, 0}}, 1,
                            NNHConfig{0.3});
  };
  GradCheckOptions o;
  o.eps = 1e-4;
  const GradCheckReport r = grad_check(f, p, o);
  EXPECT_EQ(r.excluded, 2u);
  EXPECT_EQ(r.checked, 0u);
}

// Every differentiable primitive against central differences at 100 random
// probe points. Inputs are drawn away from the relu kink by rejection.
class PrimitiveGradients : public ::testing::TestWithParam<std::string> {};

ScalarGraph primitive_graph(const std::string& name) {
  using ad::sum;
  if (name == "matmul")
    return [](Tape& t, const ParamMap& p) {
      return sum(ad::sigmoid(ad::matmul(t.param(p, "a"), t.param(p, "b"))));
    };
  if (name == "matmul_nt")
    return [](Tape& t, const ParamMap& p) {
      return sum(ad::sigmoid(ad::matmul_nt(t.param(p, "a"), t.param(p, "bt"))));
    };
  if (name == "add_sub_mul_scale")
    return [](Tape& t, const ParamMap& p) {
      Var a = t.param(p, "a2"), c = t.param(p, "c2");
      return sum(ad::mul(ad::scale(ad::add(a, c), 0.7), ad::sub(a, ad::mul(c, c))));
    };
  if (name == "add_row_transpose_reshape")
    return [](Tape& t, const ParamMap& p) {
      Var x = ad::add_row(t.param(p, "a"), t.param(p, "bias4"));
      Var y = ad::reshape(ad::transpose(x), {2, 6});
      return sum(ad::sigmoid(y));
    };
  if (name == "relu")
    return [](Tape& t, const ParamMap& p) {
      Var a = t.param(p, "a");
      return sum(ad::mul(ad::relu(a), a));
    };
  if (name == "softmax_rows")
    return [](Tape& t, const ParamMap& p) {
      Var a = t.param(p, "a");
      return sum(ad::mul(ad::softmax_rows(a), a));
    };
  if (name == "layer_norm")
    return [](Tape& t, const ParamMap& p) {
      Var a = t.param(p, "a");
      Var y = ad::layer_norm_rows(a, t.param(p, "g4"), t.param(p, "bias4"));
      return sum(ad::mul(ad::sigmoid(y), a));
    };
  if (name == "l2_normalize")
    return [](Tape& t, const ParamMap& p) {
      Var a = t.param(p, "a");
      return sum(ad::mul(ad::l2_normalize_rows(a), ad::sigmoid(a)));
    };
  if (name == "mean_slice_gather_concat")
    return [](Tape& t, const ParamMap& p) {
      Var a = t.param(p, "a");
      Var parts = ad::concat_rows({ad::slice_rows(a, 1, 2), ad::gather_rows(a, {0, 0, 2})});
      Var m = ad::mean_rows(parts);
      Var e = ad::gather_entries(a, {{0, 1}, {2, 3}});
      return ad::add(ad::sum(ad::sigmoid(m)), ad::sum(ad::mul(e, e)));
    };
  if (name == "group_max")
    return [](Tape& t, const ParamMap& p) {
      Var a = t.param(p, "a");
      return sum(ad::sigmoid(ad::group_max(a, 2)));
    };
  if (name == "conv2d")
    return [](Tape& t, const ParamMap& p) {
      Var y = ad::conv2d(t.param(p, "img"), t.param(p, "kw"), t.param(p, "kb"), 2, 1);
      return sum(ad::sigmoid(y));
    };
  if (name == "bilinear_sample")
    return [](Tape& t, const ParamMap& p) {
      static const double xs[] = {0.25, 1.5, 2.0, 0.0};
      static const double ys[] = {0.75, 2.5, 1.25, 3.0};
      return sum(ad::sigmoid(ad::bilinear_sample(t.param(p, "img"), xs, ys)));
    };
  throw std::logic_error("unknown primitive " + name);
}

ParamMap random_inputs(Rng& rng) {
  auto away_from_zero = [&rng](std::vector<std::size_t> dims) {
    Tensor t(std::move(dims));
    for (auto& v : t.storage()) {
      do v = uniform(rng, -1.5, 1.5);
      while (std::abs(v) < 1e-3);
    }
    return t;
  };
  return ParamMap{{"a", away_from_zero({3, 4})},
                  {"a2", random_tensor({2, 3}, rng)},
                  {"c2", random_tensor({2, 3}, rng)},
                  {"b", random_tensor({4, 2}, rng)},
                  {"bt", random_tensor({5, 4}, rng)},
                  {"bias4", random_tensor({4}, rng)},
                  {"g4", random_tensor({4}, rng, 0.5, 1.5)},
                  {"img", random_tensor({2, 4, 4}, rng)},
                  {"kw", random_tensor({3, 2, 3, 3}, rng)},
                  {"kb", random_tensor({3}, rng)}};
}

TEST_P(PrimitiveGradients, MatchFiniteDifferencesAt100Probes) {
  const ScalarGraph f = primitive_graph(GetParam());
  Rng rng = make_stream(1000, GetParam());
  double worst = 0.0;
  std::size_t checked = 0;
  for (int probe = 0; probe < 100; ++probe) {
    const ParamMap p = random_inputs(rng);
    // Only probe parameters the graph actually binds.
    Tape bind;
    f(bind, p);
    GradCheckOptions o;
    o.eps = 1e-6;
    for (const auto& [name, id] : bind.param_ids())
      for (std::size_t i = 0; i < p.at(name).size(); ++i) o.coords.push_back({name, i});
    const GradCheckReport r = grad_check(f, p, o);
    worst = std::max(worst, r.max_rel_error);
    checked += r.checked;
  }
  EXPECT_LT(worst, 1e-4) << GetParam();
  EXPECT_GT(checked, 100u);
}

INSTANTIATE_TEST_SUITE_P(AllPrimitives, PrimitiveGradients,
                         ::testing::Values("matmul", "matmul_nt", "add_sub_mul_scale",
                                           "add_row_transpose_reshape", "relu", "softmax_rows",
                                           "layer_norm", "l2_normalize",
                                           "mean_slice_gather_concat", "group_max", "conv2d",
                                           "bilinear_sample"));

}  // namespace
}  // namespace negprompt
