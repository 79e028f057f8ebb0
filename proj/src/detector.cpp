// Copyright 2026 The negprompt Authors
// SPDX-License-Identifier: Apache-2.0

#include "negprompt/detector.hpp"

#include <cmath>
#include <numbers>

#include "negprompt/errors.hpp"
#include "negprompt/init.hpp"
#include "negprompt/numcore/ops.hpp"

namespace negprompt {

namespace {

std::string layer_name(std::size_t t, const char* what) {
  return "dec" + std::to_string(t) + "." + what;
}

Tensor conv_weight(std::size_t out, std::size_t in, Rng& rng) {
  return init::uniform({out, in, 3, 3}, std::sqrt(6.0 / static_cast<double>(in * 9)), rng);
}

double logit(double p) { return std::log(p / (1.0 - p)); }

Var attention(Var q, Var k, Var v, std::size_t dim) {
  const double inv = 1.0 / std::sqrt(static_cast<double>(dim));
  return ad::matmul(ad::softmax_rows(ad::scale(ad::matmul_nt(q, k), inv)), v);
}

/// [C×H×W] -> [H·W × C]
Var flatten_cells(Var level) {
  const auto& d = level.value().dims();
  return ad::transpose(ad::reshape(level, {d[0], d[1] * d[2]}));
}

/// Additive locality prior −λ((x−cx)²/w² + (y−cy)²/h²) around each query's
/// reference box sigmoid(ref_logits), with sides floored at kMinRefSide.
constexpr double kMinRefSide = 0.05;

Var locality_bias(Var ref_logits, const Tensor& centers, double strength) {
  Tape& tape = *ref_logits.tape;
  const Tensor ref = tensor_ops::sigmoid(ref_logits.value());
  const std::size_t nq = ref.rows(), cells = centers.rows();
  Tensor g({nq, cells});
  std::uint64_t clamped = 0x6c6f63616c697479ULL;
  for (std::size_t q = 0; q < nq; ++q) {
    const double cx = ref[q * 4], cy = ref[q * 4 + 1];
    const double w = std::max(ref[q * 4 + 2], kMinRefSide), h = std::max(ref[q * 4 + 3], kMinRefSide);
    clamped = (clamped ^ ((ref[q * 4 + 2] < kMinRefSide) * 2u + (ref[q * 4 + 3] < kMinRefSide) + 4u * q)) *
              0x100000001b3ULL;
    for (std::size_t j = 0; j < cells; ++j) {
      const double dx = (centers[j * 2] - cx) / w, dy = (centers[j * 2 + 1] - cy) / h;
      g[q * cells + j] = -strength * (dx * dx + dy * dy);
    }
  }
  if (tape.tracking()) tape.note_branch(clamped);
  const int in = ref_logits.id;
  Var out = tape.record(std::move(g), {in}, [in, ref, centers, strength, nq, cells](Tape& t, int self) {
    const Tensor& go = t.grad(self);
    Tensor& gi = t.grad(in);
    for (std::size_t q = 0; q < nq; ++q) {
      const double cx = ref[q * 4], cy = ref[q * 4 + 1];
      const double sw = ref[q * 4 + 2], sh = ref[q * 4 + 3];
      const double w = std::max(sw, kMinRefSide), h = std::max(sh, kMinRefSide);
      double dcx = 0, dcy = 0, dw = 0, dh = 0;
      for (std::size_t j = 0; j < cells; ++j) {
        const double u = go[q * cells + j];
        const double ex = centers[j * 2] - cx, ey = centers[j * 2 + 1] - cy;
        dcx += u * 2 * strength * ex / (w * w);
        dcy += u * 2 * strength * ey / (h * h);
        dw += u * 2 * strength * ex * ex / (w * w * w);
        dh += u * 2 * strength * ey * ey / (h * h * h);
      }
      if (sw < kMinRefSide) dw = 0;
      if (sh < kMinRefSide) dh = 0;
      const double d[4] = {dcx, dcy, dw, dh};
      for (int k = 0; k < 4; ++k) {
        const double s = ref[q * 4 + k];
        gi[q * 4 + k] += d[k] * s * (1 - s);
      }
    }
  });
  return out;
}

}  // namespace

PromptEncoderConfig ModelConfig::prompt_config() const {
  PromptEncoderConfig p;
  p.dim = dim;
  p.channels = channels;
  p.k = std::max<std::size_t>(k, 1);
  p.grid = grid;
  p.levels = levels;
  p.hidden = ffn_hidden;
  return p;
}

void ModelConfig::validate() const {
  if (image_size == 0 || in_channels == 0 || channels == 0 || dim == 0 || levels == 0 ||
      num_queries == 0 || decoder_layers == 0 || ffn_hidden == 0 || grid == 0)
    throw RangeError("model sizes must be positive");
  if (dim % 4 != 0) throw RangeError("dim must be a multiple of 4 for the position encoding");
  if ((image_size >> levels) == 0) throw RangeError("image too small for the pyramid depth");
  if (locality < 0) throw RangeError("locality must be >= 0");
  if (!(embed_scale > 0)) throw RangeError("embed_scale must be > 0");
}

ParamMap init_model(const ModelConfig& cfg, Rng& rng) {
  cfg.validate();
  const std::size_t C = cfg.channels, D = cfg.dim, H = cfg.ffn_hidden, Nq = cfg.num_queries;
  ParamMap p = init_prompt_encoder(cfg.prompt_config(), rng);

  p["backbone.stem_w"] = conv_weight(C, cfg.in_channels, rng);
  p["backbone.stem_b"] = Tensor({C}, 0.0);
  for (std::size_t l = 0; l < cfg.levels; ++l) {
    p["backbone.l" + std::to_string(l) + "_w"] = conv_weight(C, C, rng);
    p["backbone.l" + std::to_string(l) + "_b"] = Tensor({C}, 0.0);
  }

  p["mem.proj"] = init::xavier(C, D, rng);
  p["mem.proj_b"] = Tensor({D}, 0.0);
  p["mem.level_embed"] = init::normal({cfg.levels, D}, 0.1, rng);

  p["dec.query"] = init::normal({Nq, D}, 1.0, rng);
  p["dec.query_pos"] = init::normal({Nq, D}, 1.0, rng);
  Tensor ref({Nq, 4});
  const std::size_t cols = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(Nq))));
  const std::size_t rows = (Nq + cols - 1) / cols;
  for (std::size_t q = 0; q < Nq; ++q) {
    ref[q * 4] = logit((static_cast<double>(q % cols) + 0.5) / static_cast<double>(cols));
    ref[q * 4 + 1] = logit((static_cast<double>(q / cols) + 0.5) / static_cast<double>(rows));
    ref[q * 4 + 2] = ref[q * 4 + 3] = logit(0.2);
  }
  p["dec.ref_logits"] = ref;

  for (std::size_t t = 0; t < cfg.decoder_layers; ++t) {
    for (const char* n : {"sa_wq", "sa_wk", "sa_wv", "sa_wo", "ca_wqk", "ca_wvo"})
      p[layer_name(t, n)] = init::xavier(D, D, rng);
    for (const char* n : {"ln1", "ln2", "ln3"}) {
      p[layer_name(t, n) + "_g"] = Tensor({D}, 1.0);
      p[layer_name(t, n) + "_b"] = Tensor({D}, 0.0);
    }
    p[layer_name(t, "ffn_w1")] = init::xavier(D, H, rng);
    p[layer_name(t, "ffn_b1")] = Tensor({H}, 0.0);
    p[layer_name(t, "ffn_w2")] = init::xavier(H, D, rng);
    p[layer_name(t, "ffn_b2")] = Tensor({D}, 0.0);
    p[layer_name(t, "box_w1")] = init::xavier(D, D, rng);
    p[layer_name(t, "box_b1")] = Tensor({D}, 0.0);
    Tensor w2 = init::xavier(D, 4, rng);
    for (auto& v : w2.storage()) v *= 0.01;
    p[layer_name(t, "box_w2")] = w2;
    p[layer_name(t, "box_b2")] = Tensor({4}, 0.0);
  }
  p["head.cls_w"] = init::xavier(D, D, rng);
  p["head.cls_b"] = Tensor({D}, 0.0);
  return p;
}

FeaturePyramid encode_image(Tape& tape, const Tensor& pixels, const ParamMap& params,
                            const ModelConfig& cfg) {
  if (pixels.rank() != 3 || pixels.dim(0) != cfg.in_channels || pixels.dim(1) != cfg.image_size ||
      pixels.dim(2) != cfg.image_size)
    throw ShapeError("image " + pixels.shape_string() + " does not match the configured " +
                     std::to_string(cfg.in_channels) + "x" + std::to_string(cfg.image_size) + "x" +
                     std::to_string(cfg.image_size));
  auto P = [&](const std::string& n) { return tape.param(params, n); };
  FeaturePyramid pyr;
  pyr.image_w = pyr.image_h = static_cast<double>(cfg.image_size);
  Var x = ad::relu(ad::conv2d(tape.constant(pixels), P("backbone.stem_w"), P("backbone.stem_b"), 2, 1));
  double stride = 2.0;
  for (std::size_t l = 0; l < cfg.levels; ++l) {
    const std::string s = std::to_string(l);
    x = ad::relu(ad::conv2d(x, P("backbone.l" + s + "_w"), P("backbone.l" + s + "_b"), l == 0 ? 1 : 2, 1));
    if (l > 0) stride *= 2.0;
    pyr.levels.push_back(x);
    pyr.strides.push_back(stride);
  }
  return pyr;
}

Tensor memory_centers(const ModelConfig& cfg) {
  std::vector<double> c;
  std::size_t side = cfg.image_size / 2;
  for (std::size_t l = 0; l < cfg.levels; ++l, side /= 2)
    for (std::size_t y = 0; y < side; ++y)
      for (std::size_t x = 0; x < side; ++x) {
        c.push_back((static_cast<double>(x) + 0.5) / static_cast<double>(side));
        c.push_back((static_cast<double>(y) + 0.5) / static_cast<double>(side));
      }
  const std::size_t n = c.size() / 2;
  return Tensor({n, 2}, std::move(c));
}

Tensor position_encoding(const Tensor& centers, std::size_t dim) {
  const std::size_t n = centers.rows(), f = dim / 4;
  Tensor pe({n, dim});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < f; ++j) {
      const double freq = std::numbers::pi * std::pow(16.0, f > 1 ? static_cast<double>(j) / (f - 1) : 0.0);
      const double x = centers[i * 2] * freq, y = centers[i * 2 + 1] * freq;
      pe[i * dim + j] = std::sin(x);
      pe[i * dim + f + j] = std::cos(x);
      pe[i * dim + 2 * f + j] = std::sin(y);
      pe[i * dim + 3 * f + j] = std::cos(y);
    }
  return pe;
}

Memory build_memory(Tape& tape, const FeaturePyramid& pyramid, const ParamMap& params,
                    const ModelConfig& cfg) {
  Var proj = tape.param(params, "mem.proj"), proj_b = tape.param(params, "mem.proj_b");
  Var level_embed = tape.param(params, "mem.level_embed");
  std::vector<Var> parts;
  std::vector<double> centers;
  for (std::size_t l = 0; l < pyramid.levels.size(); ++l) {
    Var cells = ad::matmul(flatten_cells(pyramid.levels[l]), proj);
    cells = ad::add_row(ad::add_row(cells, proj_b), ad::slice_rows(level_embed, l, 1));
    parts.push_back(cells);
    const Tensor& fm = pyramid.levels[l].value();
    const std::size_t h = fm.dim(1), w = fm.dim(2);
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) {
        centers.push_back((static_cast<double>(x) + 0.5) / static_cast<double>(w));
        centers.push_back((static_cast<double>(y) + 0.5) / static_cast<double>(h));
      }
  }
  Memory m;
  m.values = parts.size() == 1 ? parts[0] : ad::concat_rows(parts);
  const std::size_t cells = centers.size() / 2;
  m.centers = Tensor({cells, 2}, std::move(centers));
  m.keys = ad::add(m.values, tape.constant(position_encoding(m.centers, cfg.dim)));
  return m;
}

std::vector<LayerOutput> decode_queries(Tape& tape, const Memory& memory, const ParamMap& params,
                                        const ModelConfig& cfg) {
  auto P = [&](const std::string& n) { return tape.param(params, n); };
  const std::size_t D = cfg.dim;
  Var x = P("dec.query");
  Var pos = P("dec.query_pos");
  Var ref = P("dec.ref_logits");
  Var cls_w = P("head.cls_w"), cls_b = P("head.cls_b");
  const double inv = 1.0 / std::sqrt(static_cast<double>(D));

  std::vector<LayerOutput> out;
  for (std::size_t t = 0; t < cfg.decoder_layers; ++t) {
    auto W = [&](const char* n) { return P(layer_name(t, n)); };
    auto LN = [&](Var v, const char* n) {
      return ad::layer_norm_rows(v, P(layer_name(t, n) + std::string("_g")),
                                 P(layer_name(t, n) + std::string("_b")));
    };
    Var xp = ad::add(x, pos);
    Var sa = ad::matmul(attention(ad::matmul(xp, W("sa_wq")), ad::matmul(xp, W("sa_wk")),
                                  ad::matmul(x, W("sa_wv")), D),
                        W("sa_wo"));
    x = LN(ad::add(x, sa), "ln1");

    xp = ad::add(x, pos);
    Var logits = ad::scale(ad::matmul_nt(ad::matmul(xp, W("ca_wqk")), memory.keys), inv);
    logits = ad::add(logits, locality_bias(ref, memory.centers, cfg.locality));
    Var ctx = ad::matmul(ad::matmul(ad::softmax_rows(logits), memory.values), W("ca_wvo"));
    x = LN(ad::add(x, ctx), "ln2");

    Var f = ad::relu(ad::add_row(ad::matmul(x, W("ffn_w1")), W("ffn_b1")));
    f = ad::add_row(ad::matmul(f, W("ffn_w2")), W("ffn_b2"));
    x = LN(ad::add(x, f), "ln3");

    Var delta = ad::relu(ad::add_row(ad::matmul(x, W("box_w1")), W("box_b1")));
    delta = ad::add_row(ad::matmul(delta, W("box_w2")), W("box_b2"));
    Var box_logits = ad::add(ref, delta);
    LayerOutput o;
    o.boxes = ad::sigmoid(box_logits);
    o.embeddings = ad::scale(ad::l2_normalize_rows(ad::add_row(ad::matmul(x, cls_w), cls_b)), cfg.embed_scale);
    out.push_back(o);
    ref = box_logits;
  }
  return out;
}

Prediction predict(const Tensor& pixels, const ParamMap& params, const ModelConfig& cfg) {
  Tape tape(false);
  const FeaturePyramid pyr = encode_image(tape, pixels, params, cfg);
  const Memory mem = build_memory(tape, pyr, params, cfg);
  const auto layers = decode_queries(tape, mem, params, cfg);
  return {layers.back().embeddings.value(), layers.back().boxes.value()};
}

PyramidFn make_pyramid_fn(const ParamMap& params, const ModelConfig& cfg) {
  return [&params, cfg](Tape& tape, const Scene& s) { return encode_image(tape, s.pixels, params, cfg); };
}

}  // namespace negprompt
