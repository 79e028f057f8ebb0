// Copyright 2026 The negprompt Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <numeric>

#include "negprompt/detector.hpp"
#include "negprompt/errors.hpp"
#include "negprompt/numcore/ops.hpp"

namespace negprompt {
namespace {

ModelConfig tiny_model() {
  ModelConfig m;
  m.channels = 8;
  m.dim = 16;
  m.num_queries = 6;
  m.ffn_hidden = 24;
  m.grid = 3;
  return m;
}

Dataset tiny_corpus(std::size_t scenes, std::uint64_t seed) {
  DataConfig dc;
  dc.num_scenes = scenes;
  dc.num_categories = 4;
  dc.num_pairs = 1;
  dc.val_fraction = 0.2;
  dc.seed = seed;
  return synthesize_dataset(dc);
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

TEST(Backbone, LevelShapes) {
  const ModelConfig m = tiny_model();
  Rng rng = make_stream(0, "init");
  const ParamMap p = init_model(m, rng);
  Tape tape(false);
  const FeaturePyramid pyr = encode_image(tape, Tensor({3, 64, 64}, 0.5), p, m);
  ASSERT_EQ(pyr.levels.size(), 3u);
  const std::size_t sides[] = {32, 16, 8};
  for (std::size_t l = 0; l < 3; ++l) {
    EXPECT_EQ(pyr.levels[l].value().dims(), (std::vector<std::size_t>{8, sides[l], sides[l]}));
    EXPECT_DOUBLE_EQ(pyr.strides[l], 2.0 * static_cast<double>(1u << l));
  }
}

TEST(Backbone, ZeroImageGivesZeroFeatures) {
  const ModelConfig m = tiny_model();
  Rng rng = make_stream(0, "init");
  ParamMap p = init_model(m, rng);
  for (auto& [name, t] : p)
    if (name.rfind(kBackbonePrefix, 0) == 0 && t.rank() == 1) t = Tensor(t.dims(), 0.0);
  Tape tape(false);
  const FeaturePyramid pyr = encode_image(tape, Tensor({3, 64, 64}, 0.0), p, m);
  for (const Var& v : pyr.levels)
    for (double x : v.value().storage()) EXPECT_EQ(x, 0.0);
}

TEST(Decoder, BoxesInsideUnitSquare) {
  const ModelConfig m = tiny_model();
  Rng rng = make_stream(1, "init");
  const ParamMap p = init_model(m, rng);
  const Dataset d = tiny_corpus(6, 3);
  const Prediction pr = predict(d.scene(0).pixels, p, m);
  EXPECT_EQ(pr.queries.dims(), (std::vector<std::size_t>{6, 16}));
  EXPECT_EQ(pr.boxes.dims(), (std::vector<std::size_t>{6, 4}));
  for (double x : pr.boxes.storage()) {
    EXPECT_GT(x, 0.0);
    EXPECT_LT(x, 1.0);
  }
  for (std::size_t q = 0; q < 6; ++q) EXPECT_NEAR(tensor_ops::l2_norm(pr.queries.row(q)), m.embed_scale, 1e-9);
}

TEST(Decoder, MemoryOrderDoesNotMatter) {
  const ModelConfig m = tiny_model();
  Rng rng = make_stream(2, "init");
  const ParamMap p = init_model(m, rng);
  const Dataset d = tiny_corpus(6, 3);
  Tape tape(false);
  const Memory mem = build_memory(tape, encode_image(tape, d.scene(1).pixels, p, m), p, m);
  const std::size_t cells = mem.centers.rows();
  std::vector<std::size_t> perm(cells);
  std::iota(perm.begin(), perm.end(), 0);
  Rng shuffle = make_stream(5, "perm");
  std::shuffle(perm.begin(), perm.end(), shuffle);
  Memory shuffled{ad::gather_rows(mem.values, perm), ad::gather_rows(mem.keys, perm), Tensor({cells, 2})};
  for (std::size_t i = 0; i < cells; ++i) {
    shuffled.centers.at(i, 0) = mem.centers.at(perm[i], 0);
    shuffled.centers.at(i, 1) = mem.centers.at(perm[i], 1);
  }
  const auto a = decode_queries(tape, mem, p, m);
  const auto b = decode_queries(tape, shuffled, p, m);
  const Tensor& ea = a.back().embeddings.value();
  const Tensor& eb = b.back().embeddings.value();
  for (std::size_t i = 0; i < ea.size(); ++i) EXPECT_NEAR(ea[i], eb[i], 1e-9);
  const Tensor& ba = a.back().boxes.value();
  const Tensor& bb = b.back().boxes.value();
  for (std::size_t i = 0; i < ba.size(); ++i) EXPECT_NEAR(ba[i], bb[i], 1e-9);
}

TEST(Decoder, OneOutputPerLayer) {
  ModelConfig m = tiny_model();
  m.decoder_layers = 3;
  Rng rng = make_stream(0, "init");
  const ParamMap p = init_model(m, rng);
  Tape tape(false);
  const Memory mem = build_memory(tape, encode_image(tape, Tensor({3, 64, 64}, 0.3), p, m), p, m);
  EXPECT_EQ(decode_queries(tape, mem, p, m).size(), 3u);
}

TEST(ModelConfig, Validation) {
  ModelConfig m = tiny_model();
  m.embed_scale = 0.0;
  Rng rng = make_stream(0, "init");
  EXPECT_THROW(init_model(m, rng), RangeError);
  m = tiny_model();
  m.dim = 18;
  EXPECT_THROW(init_model(m, rng), RangeError);
}

class Training : public ::testing::Test {
 protected:
  static void SetUpTestSuite() { data_ = new Dataset(tiny_corpus(10, 4)); }
  static void TearDownTestSuite() { delete data_; }
  static TrainConfig quick(std::size_t steps) {
    TrainConfig t;
    t.steps = steps;
    t.batch_size = 2;
    t.lr_backbone = t.lr_others = 3e-3;
    t.seed = 11;
    return t;
  }
  static Dataset* data_;
};
Dataset* Training::data_ = nullptr;

TEST_F(Training, LossIsFiniteAndPositive) {
  const ModelConfig m = tiny_model();
  Rng rng = make_stream(0, "init");
  const ParamMap p = init_model(m, rng);
  Tape tape;
  Rng jitter = make_stream(0, "jitter"), mode = make_stream(0, "mode");
  StepDiagnostics diag;
  const Var loss = forward_train(tape, *data_, {data_->train_ids()[0], data_->train_ids()[1]}, p, m, quick(1),
                                 jitter, mode, &diag);
  EXPECT_TRUE(std::isfinite(loss.value()[0]));
  EXPECT_GT(loss.value()[0], 0.0);
  EXPECT_GT(diag.num_gt, 0u);
  EXPECT_EQ(diag.aux.size(), m.decoder_layers - 1);
}

TEST_F(Training, LossDecreases) {
  const TrainResult r = train(*data_, tiny_model(), quick(50));
  ASSERT_EQ(r.log.size(), 50u);
  double first = 0, last = 0;
  for (std::size_t i = 0; i < 10; ++i) first += r.log[i].loss, last += r.log[40 + i].loss;
  EXPECT_LT(last, first);
}

TEST_F(Training, SameSeedSameParameters) {
  const TrainResult a = train(*data_, tiny_model(), quick(3));
  const TrainResult b = train(*data_, tiny_model(), quick(3));
  ASSERT_EQ(a.params.size(), b.params.size());
  for (const auto& [name, t] : a.params) EXPECT_EQ(t, b.params.at(name)) << name;
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(a.log[i].loss, b.log[i].loss);
}

TEST_F(Training, ZeroRateFreezesParameters) {
  TrainConfig t = quick(3);
  t.lr_others = 0.0;
  const ModelConfig m = tiny_model();
  Rng rng = make_stream(t.seed, "init");
  const ParamMap init = init_model(m, rng);
  const TrainResult r = train(*data_, m, t);
  bool backbone_moved = false;
  for (const auto& [name, v] : r.params) {
    if (name.rfind(kBackbonePrefix, 0) == 0)
      backbone_moved = backbone_moved || !(v == init.at(name));
    else
      EXPECT_EQ(v, init.at(name)) << name;
  }
  EXPECT_TRUE(backbone_moved);
}

TEST_F(Training, LogRecordsAsJson) {
  StepLog s;
  s.step = 4;
  s.loss = 1.5;
  s.mode_indicator = 1;
  const std::string j = step_log_json(s);
  EXPECT_NE(j.find("\"step\":4"), std::string::npos);
  EXPECT_NE(j.find("\"mode_indicator\":1"), std::string::npos);
  EXPECT_NE(j.find("\"loss_components\""), std::string::npos);
}

TEST(Checkpoint, RoundTrip) {
  const ModelConfig m = tiny_model();
  Rng rng = make_stream(0, "init");
  const Checkpoint c{m, init_model(m, rng)};
  const std::string path = temp_path("negprompt_ckpt_rt.bin");
  save_checkpoint(c, path);
  const Checkpoint back = load_checkpoint(path, m);
  EXPECT_EQ(back.model, m);
  ASSERT_EQ(back.params.size(), c.params.size());
  for (const auto& [name, t] : c.params) EXPECT_EQ(t, back.params.at(name));
  const Dataset d = tiny_corpus(6, 3);
  const Prediction a = predict(d.scene(0).pixels, c.params, m);
  const Prediction b = predict(d.scene(0).pixels, back.params, back.model);
  EXPECT_EQ(a.queries, b.queries);
  EXPECT_EQ(a.boxes, b.boxes);
  std::filesystem::remove(path);
}

TEST(Checkpoint, Errors) {
  const ModelConfig m = tiny_model();
  Rng rng = make_stream(0, "init");
  const std::string path = temp_path("negprompt_ckpt_err.bin");
  save_checkpoint({m, init_model(m, rng)}, path);

  ModelConfig other = m;
  other.dim = 32;
  EXPECT_THROW(load_checkpoint(path, other), ConfigMismatchError);

  std::string bytes;
  {
    std::ifstream in(path, std::ios::binary);
    bytes.assign(std::istreambuf_iterator<char>(in), {});
  }
  auto write = [&path](const std::string& b) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << b;
  };
  std::string flipped = bytes;
  flipped[bytes.size() / 2] ^= 0x10;
  write(flipped);
  EXPECT_THROW(load_checkpoint(path), ChecksumError);
  write(bytes.substr(0, bytes.size() / 3));
  EXPECT_THROW(load_checkpoint(path), Error);
  std::string magic = bytes;
  magic[0] = 'X';
  write(magic);
  EXPECT_THROW(load_checkpoint(path), FormatError);
  std::filesystem::remove(path);
  EXPECT_THROW(load_checkpoint(path), NotFoundError);
}

}  // namespace
}  // namespace negprompt
