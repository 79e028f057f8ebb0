// Copyright 2026 The negprompt Authors
// SPDX-License-Identifier: Apache-2.0

#include "negprompt/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "negprompt/errors.hpp"

namespace negprompt {

bool BBox::valid() const {
  return std::isfinite(x) && std::isfinite(y) && std::isfinite(w) && std::isfinite(h) &&
         w > 0.0 && h > 0.0;
}

bool BBox::inside(double image_w, double image_h) const {
  return valid() && x >= 0.0 && y >= 0.0 && x2() <= image_w && y2() <= image_h;
}

JitterSpec JitterSpec::negative() {
  JitterSpec s;
  s.scale_lo = 0.7;
  s.scale_hi = 1.0;
  return s;
}

void JitterSpec::validate() const {
  if (!(0.0 <= scale_lo && scale_lo <= scale_hi && scale_hi <= 1.0))
    throw RangeError("jitter range must satisfy 0 <= lo <= hi <= 1");
  if (modes.empty()) throw RangeError("jitter spec needs at least one mode");
}

double iou(const BBox& a, const BBox& b) {
  const double iw = std::min(a.x2(), b.x2()) - std::max(a.x, b.x);
  const double ih = std::min(a.y2(), b.y2()) - std::max(a.y, b.y);
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  return inter / (a.area() + b.area() - inter);
}

double giou(const BBox& a, const BBox& b) {
  const double iw = std::max(0.0, std::min(a.x2(), b.x2()) - std::max(a.x, b.x));
  const double ih = std::max(0.0, std::min(a.y2(), b.y2()) - std::max(a.y, b.y));
  const double inter = iw * ih;
  const double uni = a.area() + b.area() - inter;
  const double ew = std::max(a.x2(), b.x2()) - std::min(a.x, b.x);
  const double eh = std::max(a.y2(), b.y2()) - std::min(a.y, b.y);
  const double enclose = ew * eh;
  return inter / uni - std::max(0.0, enclose - uni) / enclose;
}

JitterDraw sample_jitter(const JitterSpec& spec, Rng& rng) {
  spec.validate();
  JitterDraw d;
  d.u = uniform(rng, spec.scale_lo, spec.scale_hi);
  d.mode = spec.modes[uniform_index(rng, spec.modes.size())];
  d.theta = uniform(rng, 0.0, 2.0 * std::numbers::pi);
  d.width_sign = bernoulli(rng, 0.5) ? 1 : -1;
  d.height_sign = bernoulli(rng, 0.5) ? 1 : -1;
  return d;
}

BBox apply_jitter(const BBox& g, const JitterDraw& d, double image_w, double image_h) {
  const bool shift = d.mode == JitterMode::shift_center || d.mode == JitterMode::shift_both;
  const bool resize = d.mode == JitterMode::shift_size || d.mode == JitterMode::shift_both;
  double dx = 0.0, dy = 0.0, nw = g.w, nh = g.h;
  if (shift && d.u != 0.0) {
    dx = d.u * g.w * std::cos(d.theta);
    dy = d.u * g.h * std::sin(d.theta);
  }
  if (resize && d.u != 0.0) {
    nw = g.w * (1.0 + d.width_sign * d.u);
    nh = g.h * (1.0 + d.height_sign * d.u);
  }
  double x0 = g.x + dx - (nw - g.w) / 2.0;
  double y0 = g.y + dy - (nh - g.h) / 2.0;
  double x1 = x0 + nw, y1 = y0 + nh;
  x0 = std::clamp(x0, 0.0, image_w);
  y0 = std::clamp(y0, 0.0, image_h);
  x1 = std::clamp(x1, 0.0, image_w);
  y1 = std::clamp(y1, 0.0, image_h);
  if (x0 == g.x && x1 == g.x2() && y0 == g.y && y1 == g.y2()) return g;
  return BBox{x0, y0, x1 - x0, y1 - y0};
}

BBox jitter_box(const BBox& g, const JitterSpec& spec, double image_w, double image_h,
                Rng& rng) {
  if (!g.valid()) throw RangeError("jitter_box: invalid source box");
  // A side shorter than one pixel (or than the source side, for sub-pixel
  // sources) counts as collapsed.
  const double min_w = std::min(1.0, g.w), min_h = std::min(1.0, g.h);
  for (int attempt = 0; attempt < 8; ++attempt) {
    const BBox out = apply_jitter(g, sample_jitter(spec, rng), image_w, image_h);
    if (out.valid() && out.w >= min_w && out.h >= min_h) return out;
  }
  throw DegenerateJitterError("jitter_box: clipping collapsed the box in 8 attempts");
}

std::array<double, 4> to_cxcywh_norm(const BBox& b, double image_w, double image_h) {
  if (!b.inside(image_w, image_h)) throw RangeError("to_cxcywh_norm: box outside image");
  return {(b.x + b.w / 2.0) / image_w, (b.y + b.h / 2.0) / image_h, b.w / image_w,
          b.h / image_h};
}

BBox from_cxcywh_norm(const std::array<double, 4>& c, double image_w, double image_h) {
  const double w = c[2] * image_w, h = c[3] * image_h;
  return BBox{c[0] * image_w - w / 2.0, c[1] * image_h - h / 2.0, w, h};
}

}  // namespace negprompt
