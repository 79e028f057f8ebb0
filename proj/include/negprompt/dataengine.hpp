// Copyright 2026 The negprompt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "negprompt/geometry.hpp"
#include "negprompt/numcore/tensor.hpp"
#include "negprompt/rng.hpp"

namespace negprompt {

enum class ShapeFamily { rect, ellipse, cross, ring };
enum class Texture { solid, striped };
enum class Bucket { rare, common, frequent };

const char* to_string(ShapeFamily f);
const char* to_string(Texture t);
const char* to_string(Bucket b);
Bucket bucket_from_string(const std::string& s);

struct Category {
  int id = 0;
  std::string name;
  ShapeFamily family = ShapeFamily::rect;
  Texture texture = Texture::solid;
  std::array<double, 3> color{};
  /// Width / height of rendered instances.
  double aspect = 1.0;
  /// Confusable partner id, -1 when unpaired.
  int partner = -1;
  /// Relative sampling weight (Zipf).
  double weight = 1.0;
  Bucket bucket = Bucket::frequent;
};

struct Annotation {
  int instance_id = 0;
  int image_id = 0;
  int category_id = 0;
  BBox bbox;
};

struct Scene {
  int image_id = 0;
  std::size_t width = 0;
  std::size_t height = 0;
  /// [3 × H × W] in [0, 1], exactly representable as float32.
  Tensor pixels;
  std::vector<Annotation> annotations;
  bool validation = false;

  std::map<int, int> category_counts() const;
  bool contains(int category_id) const;
};

struct BucketThresholds {
  int rare_max = 10;
  int common_max = 100;
  void validate() const;
};

struct DataConfig {
  int num_scenes = 200;
  int num_categories = 20;
  /// Explicit pairs; when empty, `num_pairs` pairs (2i, 2i+1) are formed.
  std::vector<std::pair<int, int>> confusable_pairs;
  int num_pairs = 4;
  double zipf_exponent = 1.0;
  int image_size = 64;
  std::uint64_t seed = 0;
  int min_side = 8;
  int max_side = 14;
  int max_instances = 8;
  /// Each scene adds between one and this many further categories.
  int max_other_categories = 3;
  /// Probability that a scene whose primary category has a partner also
  /// places one partner instance next to a primary instance.
  double partner_adjacent_prob = 0.6;
  double val_fraction = 0.2;
  BucketThresholds buckets;

  std::vector<std::pair<int, int>> resolved_pairs() const;
  void validate() const;
};

struct Dataset {
  DataConfig config;
  std::vector<Category> categories;
  std::vector<Scene> scenes;

  const Scene& scene(int image_id) const;
  const Category& category(int id) const;
  std::vector<int> train_ids() const;
  std::vector<int> val_ids() const;
  /// Categories forming a confusable pair with `id`, or -1.
  int partner_of(int id) const;
};

/// Draws `n` category ids with probability ∝ rank^-s over a fixed rank order.
std::vector<int> sample_zipf(const std::vector<double>& weights, std::size_t n, Rng& rng);
std::vector<double> zipf_weights(int num_categories, double exponent);

Dataset synthesize_dataset(const DataConfig& config);

/// Images (training split) holding more than three instances of a category.
using CategoryIndex = std::map<int, std::vector<int>>;
CategoryIndex build_category_index(const Dataset& data);
CategoryIndex build_category_index(const std::vector<Scene>& scenes);

/// Total training-split instance count per category -> bucket. A corpus of a
/// single category has no tail and is reported as frequent.
std::map<int, Bucket> frequency_buckets(const Dataset& data, const BucketThresholds& t);

enum class BatchFallback { none, most_frequent, shared_category, occupancy };

struct Batch {
  std::vector<int> image_ids;
  int link_category = -1;
  BatchFallback fallback = BatchFallback::none;
  /// True when the candidate list was shorter than the batch and images repeat.
  bool with_replacement = false;
};

/// Second-most-frequent category of a scene (ties to the lower id); the only
/// category when one is present.
int link_category(const Scene& scene);

Batch construct_batch(const Dataset& data, const CategoryIndex& index, std::size_t batch_size,
                      Rng& rng);

/// Directory layout: manifest.json plus scenes/<id>.bin.
void save_dataset(const Dataset& data, const std::filesystem::path& dir);
Dataset load_dataset(const std::filesystem::path& dir);

/// Flat pixel payload: "NPXL", u32 version, u32 C, H, W, float32 LE data.
std::string encode_pixels(const Tensor& pixels);
Tensor decode_pixels(const std::string& bytes);

}  // namespace negprompt
