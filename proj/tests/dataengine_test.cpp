// Copyright 2026 The negprompt Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "negprompt/dataengine.hpp"
#include "negprompt/errors.hpp"

namespace negprompt {
namespace {

namespace fs = std::filesystem;

Scene scene_with(int id, std::vector<int> cats) {
  Scene s;
  s.image_id = id;
  s.width = s.height = 64;
  int inst = id * 100;
  for (int c : cats) s.annotations.push_back({inst++, id, c, {1, 1, 4, 4}});
  return s;
}

DataConfig small_config(std::uint64_t seed = 3) {
  DataConfig c;
  c.num_scenes = 60;
  c.num_categories = 8;
  c.num_pairs = 2;
  c.seed = seed;
  return c;
}

std::string read_all(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

TEST(Synthesis, DegenerateSingleCategoryCorpus) {
  DataConfig c;
  c.num_scenes = 1;
  c.num_categories = 1;
  c.num_pairs = 0;
  const Dataset d = synthesize_dataset(c);
  ASSERT_EQ(d.scenes.size(), 1u);
  const auto b = frequency_buckets(d, c.buckets);
  ASSERT_EQ(b.size(), 1u);
  EXPECT_EQ(b.at(0), Bucket::frequent);
}

TEST(Synthesis, ScenesSatisfyInvariants) {
  const Dataset d = synthesize_dataset(small_config());
  std::set<int> seen;
  for (const Scene& s : d.scenes) {
    ASSERT_FALSE(s.annotations.empty());
    for (double v : s.pixels.storage()) {
      ASSERT_GE(v, 0.0);
      ASSERT_LE(v, 1.0);
      ASSERT_EQ(v, static_cast<double>(static_cast<float>(v)));
    }
    for (const auto& a : s.annotations) {
      EXPECT_GE(a.bbox.x, 0.0);
      EXPECT_GE(a.bbox.y, 0.0);
      EXPECT_LE(a.bbox.x + a.bbox.w, static_cast<double>(s.width));
      EXPECT_LE(a.bbox.y + a.bbox.h, static_cast<double>(s.height));
      seen.insert(a.category_id);
    }
  }
  EXPECT_EQ(seen.size(), 8u);
}

TEST(Synthesis, ConfusablePairsShareFamilyAndDifferSlightly) {
  const Dataset d = synthesize_dataset(small_config());
  for (const auto& [a, b] : d.config.resolved_pairs()) {
    const Category& ca = d.category(a);
    const Category& cb = d.category(b);
    EXPECT_EQ(ca.family, cb.family);
    EXPECT_EQ(ca.partner, b);
    EXPECT_EQ(cb.partner, a);
    EXPECT_NE(ca.texture, cb.texture);
    double diff = 0.0;
    for (int ch = 0; ch < 3; ++ch) diff += std::abs(ca.color[ch] - cb.color[ch]);
    EXPECT_LT(diff, 0.3);
  }
}

TEST(Synthesis, ZipfZeroIsNearUniform) {
  DataConfig c;
  c.num_scenes = 200;
  c.num_categories = 10;
  c.zipf_exponent = 0.0;
  c.seed = 11;
  const Dataset d = synthesize_dataset(c);
  std::map<int, int> counts;
  for (const auto& s : d.scenes)
    for (const auto& a : s.annotations) ++counts[a.category_id];
  int lo = 1 << 30, hi = 0;
  for (const auto& [k, n] : counts) lo = std::min(lo, n), hi = std::max(hi, n);
  EXPECT_LT(static_cast<double>(hi) / lo, 2.0);
}

TEST(Synthesis, ZipfSlopeMatchesExponent) {
  for (double s : {0.8, 1.2}) {
    const auto w = zipf_weights(64, s);
    Rng rng = make_stream(5, "zipf");
    const auto draws = sample_zipf(w, 400000, rng);
    std::vector<double> freq(64, 0.0);
    for (int v : draws) freq[v] += 1.0;
    // Least-squares slope of log frequency against log rank.
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double n = 64;
    for (int r = 0; r < 64; ++r) {
      const double x = std::log(r + 1.0), y = std::log(freq[r]);
      sx += x, sy += y, sxx += x * x, sxy += x * y;
    }
    const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    EXPECT_NEAR(slope, -s, 0.2);
  }
}

TEST(Synthesis, DeterministicManifestAndPixels) {
  const fs::path a = fs::temp_directory_path() / "negprompt_de_a";
  const fs::path b = fs::temp_directory_path() / "negprompt_de_b";
  fs::remove_all(a);
  fs::remove_all(b);
  save_dataset(synthesize_dataset(small_config(9)), a);
  save_dataset(synthesize_dataset(small_config(9)), b);
  EXPECT_EQ(read_all(a / "manifest.json"), read_all(b / "manifest.json"));
  for (const auto& e : fs::directory_iterator(a / "scenes"))
    EXPECT_EQ(read_all(e.path()), read_all(b / "scenes" / e.path().filename()));
  const Dataset other = synthesize_dataset(small_config(10));
  EXPECT_FALSE(synthesize_dataset(small_config(9)).scenes[0].pixels == other.scenes[0].pixels);
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST(Synthesis, RoundTripThroughDisk) {
  const fs::path dir = fs::temp_directory_path() / "negprompt_de_rt";
  fs::remove_all(dir);
  const Dataset d = synthesize_dataset(small_config());
  save_dataset(d, dir);
  const Dataset back = load_dataset(dir);
  ASSERT_EQ(back.scenes.size(), d.scenes.size());
  for (std::size_t i = 0; i < d.scenes.size(); ++i) {
    EXPECT_EQ(back.scenes[i].pixels, d.scenes[i].pixels);
    EXPECT_EQ(back.scenes[i].validation, d.scenes[i].validation);
    ASSERT_EQ(back.scenes[i].annotations.size(), d.scenes[i].annotations.size());
    EXPECT_EQ(back.scenes[i].annotations[0].bbox.x, d.scenes[i].annotations[0].bbox.x);
  }
  ASSERT_EQ(back.categories.size(), d.categories.size());
  EXPECT_EQ(back.categories[3].name, d.categories[3].name);
  EXPECT_EQ(back.categories[3].bucket, d.categories[3].bucket);
  EXPECT_EQ(back.config.seed, d.config.seed);
  fs::remove_all(dir);
}

TEST(Synthesis, SplitCoversEveryCategoryInValidation) {
  const Dataset d = synthesize_dataset(small_config());
  std::set<int> val_cats;
  for (int id : d.val_ids())
    for (const auto& a : d.scene(id).annotations) val_cats.insert(a.category_id);
  EXPECT_EQ(val_cats.size(), 8u);
  const double frac = static_cast<double>(d.val_ids().size()) / static_cast<double>(d.scenes.size());
  EXPECT_NEAR(frac, 0.2, 0.1);
}

TEST(Synthesis, InvalidConfigsRejected) {
  DataConfig c = small_config();
  c.num_categories = 0;
  EXPECT_THROW(synthesize_dataset(c), Error);
  c = small_config();
  c.confusable_pairs = {{0, 42}};
  EXPECT_THROW(synthesize_dataset(c), Error);
}

TEST(Synthesis, OvercrowdedSceneThrowsPlacementError) {
  DataConfig c = small_config();
  c.image_size = 16;
  c.min_side = 8;
  c.max_side = 8;
  c.max_instances = 8;
  EXPECT_THROW(synthesize_dataset(c), PlacementError);
}

TEST(PixelPayload, RoundTripAndCorruption) {
  Tensor t({3, 2, 2}, {0, 0.25, 0.5, 1, 0, 0.25, 0.5, 1, 0, 0.25, 0.5, 1});
  const std::string bytes = encode_pixels(t);
  EXPECT_EQ(bytes.substr(0, 4), "NPXL");
  EXPECT_EQ(decode_pixels(bytes), t);
  EXPECT_THROW(decode_pixels(bytes.substr(0, bytes.size() - 1)), FormatError);
  std::string bad = bytes;
  bad[0] = 'X';
  EXPECT_THROW(decode_pixels(bad), FormatError);
}

TEST(CategoryIndex, StrictlyMoreThanThreeInstances) {
  const std::vector<Scene> scenes{scene_with(0, {1, 1, 1, 1}), scene_with(1, {1, 1, 1}),
                                  scene_with(2, {2, 2, 2, 2, 2, 1}), scene_with(3, {3}),
                                  scene_with(4, {1, 1, 1, 1, 2, 2, 2, 2})};
  const CategoryIndex idx = build_category_index(scenes);
  const CategoryIndex expected{{1, {0, 4}}, {2, {2, 4}}};
  EXPECT_EQ(idx, expected);
}

TEST(CategoryIndex, DatasetIndexUsesTrainingSplitOnly) {
  Dataset d;
  d.scenes = {scene_with(0, {1, 1, 1, 1}), scene_with(1, {1, 1, 1, 1})};
  d.scenes[1].validation = true;
  EXPECT_EQ(build_category_index(d).at(1), std::vector<int>{0});
}

TEST(LinkCategory, SecondMostFrequentWithTieBreak) {
  EXPECT_EQ(link_category(scene_with(0, {4, 4, 4, 4, 4, 7, 7, 7})), 7);
  EXPECT_EQ(link_category(scene_with(0, {4, 4, 4})), 4);
  // Counts {2:2, 5:2, 9:2}: the first of the tied runners-up by id.
  EXPECT_EQ(link_category(scene_with(0, {9, 9, 5, 5, 2, 2})), 5);
}

TEST(ConstructBatch, EveryBatchSharesACategory) {
  const Dataset d = synthesize_dataset(small_config());
  const CategoryIndex idx = build_category_index(d);
  Rng rng = make_stream(1, "data");
  std::size_t replacement = 0;
  for (int i = 0; i < 10000; ++i) {
    const Batch b = construct_batch(d, idx, 4, rng);
    ASSERT_EQ(b.image_ids.size(), 4u);
    for (int id : b.image_ids) ASSERT_TRUE(d.scene(id).contains(b.link_category));
    for (int id : b.image_ids) ASSERT_FALSE(d.scene(id).validation);
    replacement += b.with_replacement ? 1 : 0;
  }
  EXPECT_LT(replacement, 10000u);
}

TEST(ConstructBatch, Errors) {
  const Dataset d = synthesize_dataset(small_config());
  Rng rng = make_stream(1, "data");
  EXPECT_THROW(construct_batch(d, build_category_index(d), 1, rng), BatchConstructionError);
  EXPECT_THROW(construct_batch(d, CategoryIndex{}, 4, rng), BatchConstructionError);
}

TEST(FrequencyBuckets, ThresholdsAndRecount) {
  DataConfig c;
  c.num_scenes = 150;
  c.num_categories = 40;
  c.num_pairs = 4;
  c.zipf_exponent = 1.2;
  c.seed = 4;
  const Dataset d = synthesize_dataset(c);
  const BucketThresholds t{10, 40};
  const auto buckets = frequency_buckets(d, t);
  std::map<int, int> counts;
  for (const auto& s : d.scenes)
    if (!s.validation)
      for (const auto& a : s.annotations) ++counts[a.category_id];
  std::map<Bucket, int> sizes, expect;
  for (const auto& [cat, b] : buckets) ++sizes[b];
  for (int cat = 0; cat < 40; ++cat) {
    const int n = counts[cat];
    ++expect[n <= 10 ? Bucket::rare : n <= 40 ? Bucket::common : Bucket::frequent];
  }
  EXPECT_EQ(sizes, expect);
  EXPECT_THROW((BucketThresholds{100, 10}).validate(), Error);
}

}  // namespace
}  // namespace negprompt
