// Copyright 2026 The negprompt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <vector>

#include "negprompt/rng.hpp"

namespace negprompt {

/// Axis-aligned box in pixels: top-left corner plus size.
struct BBox {
  double x = 0.0;
  double y = 0.0;
  double w = 0.0;
  double h = 0.0;

  double x2() const { return x + w; }
  double y2() const { return y + h; }
  double area() const { return w * h; }
  bool valid() const;
  bool inside(double image_w, double image_h) const;

  friend bool operator==(const BBox&, const BBox&) = default;
};

enum class JitterMode { shift_center, shift_size, shift_both };

/// Magnitude range and allowed modes for prompt synthesis.
///
/// A draw picks u ~ Uniform[scale_lo, scale_hi] and a mode uniformly from
/// `modes`. Shifting moves the centre by u box-lengths along a random
/// direction (δx = u·w·cosθ, δy = u·h·sinθ). Resizing multiplies width and
/// height independently by (1 ± u). Both transforms keep the centre fixed
/// except for the shift itself.
struct JitterSpec {
  std::vector<JitterMode> modes{JitterMode::shift_center, JitterMode::shift_size,
                                JitterMode::shift_both};
  double scale_lo = 0.0;
  double scale_hi = 0.3;

  static JitterSpec positive() { return JitterSpec{}; }
  static JitterSpec negative();
  void validate() const;
};

/// A fully determined jitter, separated from sampling so exact cases can be
/// constructed directly.
struct JitterDraw {
  JitterMode mode = JitterMode::shift_center;
  double u = 0.0;
  double theta = 0.0;
  int width_sign = 1;
  int height_sign = 1;
};

double iou(const BBox& a, const BBox& b);
double giou(const BBox& a, const BBox& b);

JitterDraw sample_jitter(const JitterSpec& spec, Rng& rng);
/// Applies a draw and clips to the image. May return a box whose side is
/// below one pixel; callers check `valid()` and `jitter_box` retries.
BBox apply_jitter(const BBox& g, const JitterDraw& draw, double image_w, double image_h);
/// Samples and applies a jitter, retrying up to 8 times when clipping
/// collapses the box; then throws DegenerateJitterError.
BBox jitter_box(const BBox& g, const JitterSpec& spec, double image_w, double image_h, Rng& rng);

/// Normalised (cx, cy, w, h). Throws RangeError for a box outside the image.
std::array<double, 4> to_cxcywh_norm(const BBox& b, double image_w, double image_h);
BBox from_cxcywh_norm(const std::array<double, 4>& c, double image_w, double image_h);

}  // namespace negprompt
