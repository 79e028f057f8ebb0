// Copyright 2026 The negprompt Authors
// SPDX-License-Identifier: Apache-2.0

#include "negprompt/dataengine.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include <json.hpp>

#include "negprompt/errors.hpp"

namespace negprompt {

namespace {

using nlohmann::json;

constexpr char kPixelMagic[4] = {'N', 'P', 'X', 'L'};
constexpr std::uint32_t kPixelVersion = 1;
constexpr int kManifestVersion = 1;
constexpr int kPlacementAttempts = 50;

std::array<double, 3> hsv_to_rgb(double h, double s, double v) {
  h = h - std::floor(h);
  const double c = v * s;
  const double hp = h * 6.0;
  const double x = c * (1.0 - std::abs(std::fmod(hp, 2.0) - 1.0));
  double r = 0, g = 0, b = 0;
  switch (static_cast<int>(hp) % 6) {
    case 0: r = c, g = x; break;
    case 1: r = x, g = c; break;
    case 2: g = c, b = x; break;
    case 3: g = x, b = c; break;
    case 4: r = x, b = c; break;
    default: r = c, b = x; break;
  }
  const double m = v - c;
  return {r + m, g + m, b + m};
}

double to_float(double v) { return static_cast<double>(static_cast<float>(v)); }

bool overlaps_with_gap(const BBox& a, const BBox& b, double gap) {
  return a.x < b.x2() + gap && b.x < a.x2() + gap && a.y < b.y2() + gap && b.y < a.y2() + gap;
}

class SceneBuilder {
 public:
  SceneBuilder(const DataConfig& cfg, Rng& rng) : cfg_(cfg), rng_(rng) {}

  BBox random_size(const Category& c) const {
    const int h = cfg_.min_side + static_cast<int>(uniform_index(rng_, cfg_.max_side - cfg_.min_side + 1));
    int w = static_cast<int>(std::lround(h * c.aspect));
    w = std::clamp(w, cfg_.min_side, cfg_.max_side);
    return BBox{0, 0, static_cast<double>(w), static_cast<double>(h)};
  }

  bool fits(const BBox& b) const {
    if (!b.inside(cfg_.image_size, cfg_.image_size)) return false;
    for (const BBox& o : placed_)
      if (overlaps_with_gap(b, o, 1.0)) return false;
    return true;
  }

  BBox place_free(const Category& c) {
    for (int attempt = 0; attempt < kPlacementAttempts; ++attempt) {
      BBox b = random_size(c);
      b.x = static_cast<double>(uniform_index(rng_, cfg_.image_size - static_cast<int>(b.w) + 1));
      b.y = static_cast<double>(uniform_index(rng_, cfg_.image_size - static_cast<int>(b.h) + 1));
      if (fits(b)) {
        placed_.push_back(b);
        return b;
      }
    }
    throw PlacementError("could not place an instance of category " + std::to_string(c.id) +
                         " after 50 attempts");
  }

  /// Places `c` beside `anchor` with a 1-3 pixel gap.
  std::optional<BBox> place_adjacent(const Category& c, const BBox& anchor) {
    for (int attempt = 0; attempt < kPlacementAttempts; ++attempt) {
      BBox b = random_size(c);
      const int side = static_cast<int>(uniform_index(rng_, 4));
      const double gap = 1.0 + static_cast<double>(uniform_index(rng_, 3));
      if (side < 2) {
        b.x = side == 0 ? anchor.x - gap - b.w : anchor.x2() + gap;
        const double lo = anchor.y - b.h / 2, hi = anchor.y2() - b.h / 2;
        b.y = std::round(uniform(rng_, lo, hi));
      } else {
        b.y = side == 2 ? anchor.y - gap - b.h : anchor.y2() + gap;
        const double lo = anchor.x - b.w / 2, hi = anchor.x2() - b.w / 2;
        b.x = std::round(uniform(rng_, lo, hi));
      }
      if (fits(b)) {
        placed_.push_back(b);
        return b;
      }
    }
    return std::nullopt;
  }

 private:
  const DataConfig& cfg_;
  Rng& rng_;
  std::vector<BBox> placed_;
};

bool in_shape(ShapeFamily f, double u, double v) {
  // u, v in [-1, 1] relative to the box centre.
  switch (f) {
    case ShapeFamily::rect: return true;
    case ShapeFamily::ellipse: return u * u + v * v <= 1.0;
    case ShapeFamily::cross: return std::abs(u) <= 0.36 || std::abs(v) <= 0.36;
    case ShapeFamily::ring: {
      const double r = u * u + v * v;
      return r <= 1.0 && r >= 0.3;
    }
  }
  return false;
}

void render_instance(Tensor& px, const Category& c, const BBox& b, Rng& rng) {
  std::array<double, 3> col = c.color;
  for (auto& v : col) v = std::clamp(v + uniform(rng, -0.04, 0.04), 0.0, 1.0);
  const std::size_t H = px.dim(1), W = px.dim(2);
  const int x0 = static_cast<int>(b.x), y0 = static_cast<int>(b.y);
  const int x1 = static_cast<int>(b.x2()), y1 = static_cast<int>(b.y2());
  for (int y = y0; y < y1; ++y)
    for (int x = x0; x < x1; ++x) {
      const double u = (x + 0.5 - (b.x + b.w / 2)) / (b.w / 2);
      const double v = (y + 0.5 - (b.y + b.h / 2)) / (b.h / 2);
      if (!in_shape(c.family, u, v)) continue;
      double shade = 1.0;
      if (c.texture == Texture::striped && ((x + y) % 4) < 2) shade = 0.55;
      for (std::size_t ch = 0; ch < 3; ++ch)
        px[(ch * H + static_cast<std::size_t>(y)) * W + static_cast<std::size_t>(x)] = col[ch] * shade;
    }
}

std::vector<Category> make_categories(const DataConfig& cfg, Rng& rng) {
  const int n = cfg.num_categories;
  const auto pairs = cfg.resolved_pairs();
  std::vector<int> partner(n, -1);
  for (auto [a, b] : pairs) partner[a] = b, partner[b] = a;

  // Each pair shares one base (family, colour, aspect); every other category
  // gets its own base.
  std::vector<int> base_of(n, -1);
  int bases = 0;
  for (int i = 0; i < n; ++i) {
    if (base_of[i] >= 0) continue;
    base_of[i] = bases;
    if (partner[i] >= 0) base_of[partner[i]] = bases;
    ++bases;
  }
  const int per_family = (bases + 3) / 4;
  constexpr double kAspects[] = {1.0, 1.3, 0.77};

  std::vector<Category> cats(n);
  const std::vector<double> weights = zipf_weights(n, cfg.zipf_exponent);
  std::vector<int> rank(n);
  std::iota(rank.begin(), rank.end(), 0);
  std::shuffle(rank.begin(), rank.end(), rng);
  for (int i = 0; i < n; ++i) {
    Category& c = cats[i];
    const int base = base_of[i];
    const int fam = base % 4, slot = base / 4;
    c.id = i;
    c.family = static_cast<ShapeFamily>(fam);
    c.aspect = kAspects[slot % 3];
    double hue = 0.11 * fam + static_cast<double>(slot) / per_family;
    const bool second = partner[i] >= 0 && partner[i] < i;
    c.texture = second ? Texture::striped : Texture::solid;
    if (second) hue += 0.03;
    c.color = hsv_to_rgb(hue, 0.75, 0.92);
    c.partner = partner[i];
    c.weight = weights[rank[i]];
    c.name = std::string(to_string(c.family)) + "-" + std::to_string(i) +
             (second ? "-striped" : "");
  }
  return cats;
}

Scene compose_scene(int image_id, int primary, const DataConfig& cfg,
                    const std::vector<Category>& cats, const std::vector<double>& weights,
                    int& next_instance, Rng& rng) {
  Scene s;
  s.image_id = image_id;
  s.width = s.height = static_cast<std::size_t>(cfg.image_size);
  s.pixels = Tensor({3, s.height, s.width});
  for (std::size_t ch = 0; ch < 3; ++ch) {
    const double base = uniform(rng, 0.08, 0.22);
    for (std::size_t i = 0; i < s.height * s.width; ++i)
      s.pixels[ch * s.height * s.width + i] = base + uniform(rng, -0.05, 0.05);
  }

  SceneBuilder builder(cfg, rng);
  auto add = [&](int cat, const BBox& b) {
    render_instance(s.pixels, cats[cat], b, rng);
    s.annotations.push_back({next_instance++, image_id, cat, b});
  };

  const int budget = cfg.max_instances;
  const int primary_count = 1 + static_cast<int>(uniform_index(rng, std::min(4, budget)));
  std::vector<BBox> primary_boxes;
  for (int i = 0; i < primary_count; ++i) {
    const BBox b = builder.place_free(cats[primary]);
    primary_boxes.push_back(b);
    add(primary, b);
  }
  int used = primary_count;
  const int partner = cats[primary].partner;
  if (partner >= 0 && used < budget && bernoulli(rng, cfg.partner_adjacent_prob)) {
    const BBox& anchor = primary_boxes[uniform_index(rng, primary_boxes.size())];
    if (auto b = builder.place_adjacent(cats[partner], anchor)) {
      add(partner, *b);
      ++used;
    } else {
      add(partner, builder.place_free(cats[partner]));
      ++used;
    }
  }
  const int others = cfg.max_other_categories > 0
                         ? 1 + static_cast<int>(uniform_index(rng, static_cast<std::size_t>(cfg.max_other_categories)))
                         : 0;
  std::vector<int> taken{primary, partner};
  for (int i = 0; i < others && used < budget; ++i) {
    const int cat = sample_zipf(weights, 1, rng)[0];
    if (std::find(taken.begin(), taken.end(), cat) != taken.end()) continue;
    taken.push_back(cat);
    add(cat, builder.place_free(cats[cat]));
    ++used;
  }
  for (auto& v : s.pixels.storage()) v = to_float(std::clamp(v, 0.0, 1.0));
  return s;
}

void assign_split(std::vector<Scene>& scenes, int num_categories, double val_fraction, Rng& rng) {
  if (scenes.size() < 2) return;
  std::vector<std::vector<std::size_t>> holders(num_categories);
  for (std::size_t i = 0; i < scenes.size(); ++i)
    for (const auto& [c, n] : scenes[i].category_counts()) holders[c].push_back(i);
  std::vector<int> train_left(num_categories);
  for (int c = 0; c < num_categories; ++c) train_left[c] = static_cast<int>(holders[c].size());

  auto movable = [&](std::size_t i) {
    if (scenes[i].validation) return false;
    for (const auto& [c, n] : scenes[i].category_counts())
      if (train_left[c] <= 1) return false;
    return true;
  };
  auto move = [&](std::size_t i) {
    scenes[i].validation = true;
    for (const auto& [c, n] : scenes[i].category_counts()) --train_left[c];
  };

  std::vector<bool> in_val(num_categories, false);
  for (int c = 0; c < num_categories; ++c) {
    if (in_val[c]) continue;
    std::vector<std::size_t> options;
    for (std::size_t i : holders[c])
      if (movable(i)) options.push_back(i);
    if (options.empty()) continue;
    const std::size_t pick = options[uniform_index(rng, options.size())];
    move(pick);
    for (const auto& [cc, n] : scenes[pick].category_counts()) in_val[cc] = true;
  }
  const std::size_t target = static_cast<std::size_t>(std::round(val_fraction * scenes.size()));
  std::vector<std::size_t> order(scenes.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::size_t in_validation = 0;
  for (const auto& s : scenes) in_validation += s.validation;
  for (std::size_t i : order) {
    if (in_validation >= target) break;
    if (movable(i)) {
      move(i);
      ++in_validation;
    }
  }
}

json scene_json(const Scene& s) {
  return json{{"id", s.image_id},
              {"width", s.width},
              {"height", s.height},
              {"file", "scenes/" + std::to_string(s.image_id) + ".bin"},
              {"split", s.validation ? "val" : "train"}};
}

void write_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint32_t read_u32(const std::string& in, std::size_t& pos) {
  if (pos + 4 > in.size()) throw FormatError("pixel payload truncated");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i)
    v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
  pos += 4;
  return v;
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw NotFoundError("cannot open " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

const char* to_string(ShapeFamily f) {
  switch (f) {
    case ShapeFamily::rect: return "rect";
    case ShapeFamily::ellipse: return "ellipse";
    case ShapeFamily::cross: return "cross";
    case ShapeFamily::ring: return "ring";
  }
  return "?";
}

const char* to_string(Texture t) { return t == Texture::solid ? "solid" : "striped"; }

const char* to_string(Bucket b) {
  switch (b) {
    case Bucket::rare: return "rare";
    case Bucket::common: return "common";
    case Bucket::frequent: return "frequent";
  }
  return "?";
}

Bucket bucket_from_string(const std::string& s) {
  if (s == "rare") return Bucket::rare;
  if (s == "common") return Bucket::common;
  if (s == "frequent") return Bucket::frequent;
  throw FormatError("unknown bucket '" + s + "'");
}

std::map<int, int> Scene::category_counts() const {
  std::map<int, int> counts;
  for (const auto& a : annotations) ++counts[a.category_id];
  return counts;
}

bool Scene::contains(int category_id) const {
  return std::any_of(annotations.begin(), annotations.end(),
                     [category_id](const Annotation& a) { return a.category_id == category_id; });
}

void BucketThresholds::validate() const {
  if (!(rare_max < common_max)) throw RangeError("bucket thresholds need rare_max < common_max");
}

std::vector<std::pair<int, int>> DataConfig::resolved_pairs() const {
  if (!confusable_pairs.empty()) return confusable_pairs;
  std::vector<std::pair<int, int>> out;
  for (int i = 0; i < num_pairs && 2 * i + 1 < num_categories; ++i) out.emplace_back(2 * i, 2 * i + 1);
  return out;
}

void DataConfig::validate() const {
  if (num_scenes < 1) throw RangeError("num_scenes must be >= 1");
  if (num_categories < 1) throw RangeError("num_categories must be >= 1");
  if (zipf_exponent < 0) throw RangeError("zipf_exponent must be >= 0");
  if (image_size < 16) throw RangeError("image_size must be >= 16");
  if (min_side < 2 || min_side > max_side || max_side > image_size / 2)
    throw RangeError("instance side range must satisfy 2 <= min <= max <= image/2");
  if (max_instances < 1) throw RangeError("max_instances must be >= 1");
  if (max_other_categories < 0) throw RangeError("max_other_categories must be >= 0");
  if (val_fraction < 0 || val_fraction >= 1) throw RangeError("val_fraction must lie in [0,1)");
  buckets.validate();
  std::set<int> seen;
  for (auto [a, b] : resolved_pairs()) {
    if (a < 0 || b < 0 || a >= num_categories || b >= num_categories || a == b)
      throw CategoryError("confusable pair references an invalid category");
    if (!seen.insert(a).second || !seen.insert(b).second)
      throw CategoryError("a category can belong to at most one confusable pair");
  }
}

const Scene& Dataset::scene(int image_id) const {
  for (const auto& s : scenes)
    if (s.image_id == image_id) return s;
  throw NotFoundError("unknown scene id " + std::to_string(image_id));
}

const Category& Dataset::category(int id) const {
  if (id < 0 || id >= static_cast<int>(categories.size()))
    throw CategoryError("unknown category id " + std::to_string(id));
  return categories[static_cast<std::size_t>(id)];
}

std::vector<int> Dataset::train_ids() const {
  std::vector<int> out;
  for (const auto& s : scenes)
    if (!s.validation) out.push_back(s.image_id);
  return out;
}

std::vector<int> Dataset::val_ids() const {
  std::vector<int> out;
  for (const auto& s : scenes)
    if (s.validation) out.push_back(s.image_id);
  return out;
}

int Dataset::partner_of(int id) const { return category(id).partner; }

std::vector<double> zipf_weights(int num_categories, double exponent) {
  std::vector<double> w(static_cast<std::size_t>(num_categories));
  for (int r = 0; r < num_categories; ++r) w[r] = std::pow(r + 1.0, -exponent);
  return w;
}

std::vector<int> sample_zipf(const std::vector<double>& weights, std::size_t n, Rng& rng) {
  std::discrete_distribution<int> dist(weights.begin(), weights.end());
  std::vector<int> out(n);
  for (auto& v : out) v = dist(rng);
  return out;
}

Dataset synthesize_dataset(const DataConfig& config) {
  config.validate();
  Rng rng = make_stream(config.seed, "data");
  Dataset d;
  d.config = config;
  d.categories = make_categories(config, rng);
  std::vector<double> weights;
  for (const auto& c : d.categories) weights.push_back(c.weight);

  int next_instance = 0;
  const int n = config.num_scenes;
  const int covered = std::min(n, 2 * config.num_categories);
  for (int i = 0; i < n; ++i) {
    const int primary = i < covered ? i % config.num_categories : sample_zipf(weights, 1, rng)[0];
    d.scenes.push_back(compose_scene(i, primary, config, d.categories, weights, next_instance, rng));
  }
  assign_split(d.scenes, config.num_categories, config.val_fraction, rng);
  const auto buckets = frequency_buckets(d, config.buckets);
  for (auto& c : d.categories) c.bucket = buckets.at(c.id);
  return d;
}

CategoryIndex build_category_index(const std::vector<Scene>& scenes) {
  CategoryIndex index;
  for (const auto& s : scenes)
    for (const auto& [c, n] : s.category_counts())
      if (n > 3) index[c].push_back(s.image_id);
  return index;
}

CategoryIndex build_category_index(const Dataset& data) {
  std::vector<Scene> train;
  for (const auto& s : data.scenes)
    if (!s.validation) train.push_back(s);
  return build_category_index(train);
}

std::map<int, Bucket> frequency_buckets(const Dataset& data, const BucketThresholds& t) {
  t.validate();
  std::map<int, int> counts;
  for (const auto& c : data.categories) counts[c.id] = 0;
  for (const auto& s : data.scenes)
    if (!s.validation)
      for (const auto& a : s.annotations) ++counts[a.category_id];
  std::map<int, Bucket> out;
  for (const auto& [c, n] : counts) {
    if (data.categories.size() == 1)
      out[c] = Bucket::frequent;
    else
      out[c] = n <= t.rare_max ? Bucket::rare : n <= t.common_max ? Bucket::common : Bucket::frequent;
  }
  return out;
}

int link_category(const Scene& scene) {
  const auto counts = scene.category_counts();
  if (counts.empty()) throw BatchConstructionError("scene has no annotations");
  std::vector<std::pair<int, int>> order(counts.begin(), counts.end());
  std::stable_sort(order.begin(), order.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  return order.size() == 1 ? order[0].first : order[1].first;
}

Batch construct_batch(const Dataset& data, const CategoryIndex& index, std::size_t batch_size,
                      Rng& rng) {
  if (batch_size < 2) throw BatchConstructionError("batch_size must be >= 2");
  const bool any_indexed = std::any_of(index.begin(), index.end(),
                                       [](const auto& kv) { return !kv.second.empty(); });
  if (!any_indexed) throw BatchConstructionError("no category has an indexed image");
  const std::vector<int> train = data.train_ids();
  if (train.empty()) throw BatchConstructionError("training split is empty");

  const int seed_id = train[uniform_index(rng, train.size())];
  const Scene& seed = data.scene(seed_id);
  const auto counts = seed.category_counts();

  auto others_in = [&](int cat) {
    std::vector<int> out;
    auto it = index.find(cat);
    if (it != index.end())
      for (int id : it->second)
        if (id != seed_id) out.push_back(id);
    return out;
  };

  Batch b;
  b.link_category = link_category(seed);
  std::vector<int> candidates = others_in(b.link_category);
  if (candidates.empty()) {
    int most = counts.begin()->first;
    for (const auto& [c, n] : counts)
      if (n > counts.at(most)) most = c;
    if (!(candidates = others_in(most)).empty()) {
      b.link_category = most, b.fallback = BatchFallback::most_frequent;
    } else {
      for (const auto& [c, n] : counts)
        if (!(candidates = others_in(c)).empty()) {
          b.link_category = c, b.fallback = BatchFallback::shared_category;
          break;
        }
    }
  }
  if (candidates.empty()) {
    b.fallback = BatchFallback::occupancy;
    for (int id : train)
      if (id != seed_id && data.scene(id).contains(b.link_category)) candidates.push_back(id);
  }

  b.image_ids.push_back(seed_id);
  const std::size_t need = batch_size - 1;
  if (candidates.size() >= need) {
    std::shuffle(candidates.begin(), candidates.end(), rng);
    b.image_ids.insert(b.image_ids.end(), candidates.begin(), candidates.begin() + need);
  } else {
    b.with_replacement = true;
    if (candidates.empty()) candidates.push_back(seed_id);
    for (std::size_t i = 0; i < need; ++i)
      b.image_ids.push_back(candidates[uniform_index(rng, candidates.size())]);
  }
  return b;
}

std::string encode_pixels(const Tensor& pixels) {
  if (pixels.rank() != 3) throw ShapeError("pixel payload needs a C×H×W tensor");
  std::string out(kPixelMagic, 4);
  write_u32(out, kPixelVersion);
  for (std::size_t d : pixels.dims()) write_u32(out, static_cast<std::uint32_t>(d));
  out.reserve(out.size() + 4 * pixels.size());
  for (double v : pixels.storage()) write_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  return out;
}

Tensor decode_pixels(const std::string& bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kPixelMagic, 4) != 0)
    throw FormatError("pixel payload: bad magic");
  std::size_t pos = 4;
  if (read_u32(bytes, pos) != kPixelVersion) throw FormatError("pixel payload: unsupported version");
  const std::size_t c = read_u32(bytes, pos), h = read_u32(bytes, pos), w = read_u32(bytes, pos);
  if (c == 0 || h == 0 || w == 0) throw FormatError("pixel payload: zero dimension");
  if (bytes.size() != pos + 4 * c * h * w) throw FormatError("pixel payload: length mismatch");
  Tensor t({c, h, w});
  for (auto& v : t.storage()) v = static_cast<double>(std::bit_cast<float>(read_u32(bytes, pos)));
  t.check_finite("pixel payload");
  return t;
}

void save_dataset(const Dataset& data, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir / "scenes");
  json manifest;
  manifest["version"] = kManifestVersion;
  const DataConfig& c = data.config;
  json pairs = json::array();
  for (auto [a, b] : c.resolved_pairs()) pairs.push_back({a, b});
  manifest["config"] = {{"num_scenes", c.num_scenes},
                        {"num_categories", c.num_categories},
                        {"confusable_pairs", pairs},
                        {"zipf_exponent", c.zipf_exponent},
                        {"image_size", c.image_size},
                        {"seed", c.seed},
                        {"min_side", c.min_side},
                        {"max_side", c.max_side},
                        {"max_instances", c.max_instances},
                        {"max_other_categories", c.max_other_categories},
                        {"partner_adjacent_prob", c.partner_adjacent_prob},
                        {"val_fraction", c.val_fraction},
                        {"rare_max", c.buckets.rare_max},
                        {"common_max", c.buckets.common_max}};
  json images = json::array(), anns = json::array(), cats = json::array();
  for (const auto& s : data.scenes) {
    images.push_back(scene_json(s));
    for (const auto& a : s.annotations)
      anns.push_back({{"id", a.instance_id},
                      {"image_id", a.image_id},
                      {"category_id", a.category_id},
                      {"bbox", {a.bbox.x, a.bbox.y, a.bbox.w, a.bbox.h}}});
    std::ofstream out(dir / "scenes" / (std::to_string(s.image_id) + ".bin"), std::ios::binary);
    const std::string bytes = encode_pixels(s.pixels);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw FormatError("failed to write scene " + std::to_string(s.image_id));
  }
  for (const auto& cat : data.categories)
    cats.push_back({{"id", cat.id},
                    {"name", cat.name},
                    {"bucket", to_string(cat.bucket)},
                    {"family", to_string(cat.family)},
                    {"texture", to_string(cat.texture)},
                    {"color", cat.color},
                    {"aspect", cat.aspect},
                    {"partner", cat.partner},
                    {"weight", cat.weight}});
  manifest["images"] = images;
  manifest["annotations"] = anns;
  manifest["categories"] = cats;
  std::ofstream out(dir / "manifest.json", std::ios::binary);
  out << manifest.dump(1) << '\n';
  if (!out) throw FormatError("failed to write manifest");
}

Dataset load_dataset(const std::filesystem::path& dir) {
  json m;
  try {
    m = json::parse(read_file(dir / "manifest.json"));
  } catch (const json::exception& e) {
    throw FormatError(std::string("manifest parse error: ") + e.what());
  }
  try {
    if (m.at("version").get<int>() != kManifestVersion)
      throw FormatError("unsupported manifest version");
    Dataset d;
    const json& c = m.at("config");
    DataConfig& cfg = d.config;
    cfg.num_scenes = c.at("num_scenes");
    cfg.num_categories = c.at("num_categories");
    for (const auto& p : c.at("confusable_pairs")) cfg.confusable_pairs.emplace_back(p[0], p[1]);
    cfg.num_pairs = static_cast<int>(cfg.confusable_pairs.size());
    cfg.zipf_exponent = c.at("zipf_exponent");
    cfg.image_size = c.at("image_size");
    cfg.seed = c.at("seed");
    cfg.min_side = c.at("min_side");
    cfg.max_side = c.at("max_side");
    cfg.max_instances = c.at("max_instances");
    cfg.max_other_categories = c.at("max_other_categories");
    cfg.partner_adjacent_prob = c.at("partner_adjacent_prob");
    cfg.val_fraction = c.at("val_fraction");
    cfg.buckets.rare_max = c.at("rare_max");
    cfg.buckets.common_max = c.at("common_max");

    static const std::map<std::string, ShapeFamily> families{{"rect", ShapeFamily::rect},
                                                             {"ellipse", ShapeFamily::ellipse},
                                                             {"cross", ShapeFamily::cross},
                                                             {"ring", ShapeFamily::ring}};
    for (const auto& jc : m.at("categories")) {
      Category cat;
      cat.id = jc.at("id");
      cat.name = jc.at("name");
      cat.bucket = bucket_from_string(jc.at("bucket"));
      cat.family = families.at(jc.at("family").get<std::string>());
      cat.texture = jc.at("texture") == "striped" ? Texture::striped : Texture::solid;
      cat.color = jc.at("color").get<std::array<double, 3>>();
      cat.aspect = jc.at("aspect");
      cat.partner = jc.at("partner");
      cat.weight = jc.at("weight");
      if (cat.id != static_cast<int>(d.categories.size()))
        throw FormatError("category ids must be dense and ordered");
      d.categories.push_back(cat);
    }
    std::map<int, std::size_t> slot;
    for (const auto& ji : m.at("images")) {
      Scene s;
      s.image_id = ji.at("id");
      s.width = ji.at("width");
      s.height = ji.at("height");
      s.validation = ji.at("split") == "val";
      s.pixels = decode_pixels(read_file(dir / ji.at("file").get<std::string>()));
      if (s.pixels.dim(1) != s.height || s.pixels.dim(2) != s.width)
        throw FormatError("scene " + std::to_string(s.image_id) + " size disagrees with manifest");
      slot[s.image_id] = d.scenes.size();
      d.scenes.push_back(std::move(s));
    }
    for (const auto& ja : m.at("annotations")) {
      Annotation a;
      a.instance_id = ja.at("id");
      a.image_id = ja.at("image_id");
      a.category_id = ja.at("category_id");
      const auto& b = ja.at("bbox");
      a.bbox = BBox{b[0], b[1], b[2], b[3]};
      auto it = slot.find(a.image_id);
      if (it == slot.end()) throw FormatError("annotation references unknown image");
      Scene& s = d.scenes[it->second];
      if (!a.bbox.inside(static_cast<double>(s.width), static_cast<double>(s.height)))
        throw FormatError("annotation box outside its image");
      d.category(a.category_id);
      s.annotations.push_back(a);
    }
    return d;
  } catch (const json::exception& e) {
    throw FormatError(std::string("manifest schema error: ") + e.what());
  }
}

}  // namespace negprompt
