// Copyright 2026 The negprompt Authors
// SPDX-License-Identifier: Apache-2.0

#include "negprompt/losses.hpp"

#include <algorithm>
#include <cmath>

#include "negprompt/errors.hpp"
#include "negprompt/numcore/ops.hpp"

namespace negprompt {

void FocalConfig::validate() const {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw RangeError("focal alpha must lie in [0,1]");
  if (!(gamma >= 0.0)) throw RangeError("focal gamma must be >= 0");
}

void NNHConfig::validate() const {
  if (!(eta > 0.0)) throw RangeError("hinge margin eta must be > 0");
}

void LossWeights::validate() const {
  if (cls < 0 || hinge < 0 || l1 < 0 || giou < 0 || dn < 0)
    throw RangeError("loss weights must be non-negative");
  if (dn != 0.0) throw RangeError("denoising weight must be 0: no denoising queries are built");
}

ScalarLoss focal_loss(double prob, bool is_positive, const FocalConfig& cfg) {
  const double raw_pt = is_positive ? prob : 1.0 - prob;
  const double alpha_t = is_positive ? cfg.alpha : 1.0 - cfg.alpha;
  const bool clamped = raw_pt < kProbClamp;
  const double pt = clamped ? kProbClamp : raw_pt;
  const double one_minus = 1.0 - pt;
  const double modulator = cfg.gamma == 0.0 ? 1.0 : std::pow(one_minus, cfg.gamma);
  ScalarLoss out;
  out.value = -alpha_t * modulator * std::log(pt);
  if (!clamped) {
    double dmod = 0.0;
    if (cfg.gamma != 0.0 && one_minus > 0.0)
      dmod = -cfg.gamma * std::pow(one_minus, cfg.gamma - 1.0);
    const double dpt = -alpha_t * (dmod * std::log(pt) + modulator / pt);
    out.grad = is_positive ? dpt : -dpt;
  }
  return out;
}

NNHResult nnh_loss(double s_pos, std::span<const double> s_neg, const NNHConfig& cfg) {
  if (s_neg.empty()) throw CountError("nnh_loss needs at least one negative similarity");
  const double k = static_cast<double>(s_neg.size());
  NNHResult r;
  r.grad_negatives.assign(s_neg.size(), 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < s_neg.size(); ++i) {
    const double z = s_neg[i] - s_pos + cfg.eta;
    if (z > 0.0) {
      total += z;
      r.grad_negatives[i] = 1.0 / k;
      r.grad_positive -= 1.0 / k;
      if (i < 64) r.active_mask |= (std::uint64_t{1} << i);
    }
  }
  r.value = total / k;
  return r;
}

BoxLoss l1_box_loss(const Box4& pred, const Box4& target) {
  BoxLoss out;
  for (std::size_t i = 0; i < 4; ++i) {
    const double d = pred[i] - target[i];
    out.value += std::abs(d);
    const int sign = (d > 0.0) - (d < 0.0);
    out.grad[i] = sign;
    out.branch = out.branch * 3 + static_cast<std::uint64_t>(sign + 1);
  }
  return out;
}

BoxLoss giou_loss(const Box4& pred, const Box4& target) {
  BoxLoss out;
  const bool clamp_w = pred[2] < kBoxSideClamp, clamp_h = pred[3] < kBoxSideClamp;
  const double pw = clamp_w ? kBoxSideClamp : pred[2];
  const double ph = clamp_h ? kBoxSideClamp : pred[3];
  const double tw = std::max(target[2], kBoxSideClamp), th = std::max(target[3], kBoxSideClamp);
  const double x1 = pred[0] - pw / 2, x2 = pred[0] + pw / 2;
  const double y1 = pred[1] - ph / 2, y2 = pred[1] + ph / 2;
  const double X1 = target[0] - tw / 2, X2 = target[0] + tw / 2;
  const double Y1 = target[1] - th / 2, Y2 = target[1] + th / 2;

  // Which box supplies each intersection / enclosure edge.
  const bool ix1 = x1 > X1, ix2 = x2 < X2, iy1 = y1 > Y1, iy2 = y2 < Y2;
  const bool ex1 = x1 < X1, ex2 = x2 > X2, ey1 = y1 < Y1, ey2 = y2 > Y2;
  const double iw_raw = (ix2 ? x2 : X2) - (ix1 ? x1 : X1);
  const double ih_raw = (iy2 ? y2 : Y2) - (iy1 ? y1 : Y1);
  const bool has_w = iw_raw > 0.0, has_h = ih_raw > 0.0;
  const double iw = has_w ? iw_raw : 0.0, ih = has_h ? ih_raw : 0.0;
  const double inter = iw * ih;
  const double ap = pw * ph, at = tw * th;
  const double uni = ap + at - inter;
  const double ew = (ex2 ? x2 : X2) - (ex1 ? x1 : X1);
  const double eh = (ey2 ? y2 : Y2) - (ey1 ? y1 : Y1);
  const double enc = ew * eh;

  out.value = 2.0 - inter / uni - uni / enc;

  // loss = 2 - inter/U - U/E with U = ap + at - inter.
  const double d_inter = -(1.0 / uni + inter / (uni * uni)) + 1.0 / enc;
  const double d_ap = inter / (uni * uni) - 1.0 / enc;
  const double d_enc = uni / (enc * enc);

  const double d_iw = d_inter * ih, d_ih = d_inter * iw;
  double gx1 = 0, gx2 = 0, gy1 = 0, gy2 = 0, gw = 0, gh = 0;
  if (has_w && has_h) {
    if (ix1) gx1 -= d_iw;
    if (ix2) gx2 += d_iw;
    if (iy1) gy1 -= d_ih;
    if (iy2) gy2 += d_ih;
  }
  if (ex1) gx1 -= d_enc * eh;
  if (ex2) gx2 += d_enc * eh;
  if (ey1) gy1 -= d_enc * ew;
  if (ey2) gy2 += d_enc * ew;
  if (!clamp_w) gw += d_ap * ph;
  if (!clamp_h) gh += d_ap * pw;

  out.grad[0] = gx1 + gx2;
  out.grad[1] = gy1 + gy2;
  out.grad[2] = clamp_w ? 0.0 : gw + 0.5 * (gx2 - gx1);
  out.grad[3] = clamp_h ? 0.0 : gh + 0.5 * (gy2 - gy1);

  const bool bits[] = {ix1, ix2, iy1, iy2, ex1, ex2, ey1, ey2, has_w, has_h, clamp_w, clamp_h};
  for (bool b : bits) out.branch = (out.branch << 1) | static_cast<std::uint64_t>(b);
  return out;
}

double total_loss(const LossComponents& final_layer, std::span<const LossComponents> aux,
                  const LossWeights& w) {
  auto weighted = [&w](const LossComponents& c) {
    return w.cls * c.cls + w.hinge * c.hinge + w.l1 * c.l1 + w.giou * c.giou + w.dn * c.dn;
  };
  double total = weighted(final_layer);
  for (const auto& c : aux) total += weighted(c);
  return total;
}

namespace ad {

Var focal_loss_sum(Var probs, const Tensor& targets, const FocalConfig& cfg) {
  Tape& t = *probs.tape;
  const Tensor& p = probs.value();
  if (!p.same_shape(targets)) throw ShapeError("focal_loss_sum: target shape mismatch");
  Tensor grad(p.dims(), 0.0);
  double total = 0.0;
  std::uint64_t h = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const bool pos = targets[i] > 0.5;
    const ScalarLoss l = focal_loss(p[i], pos, cfg);
    total += l.value;
    grad[i] = l.grad;
    if ((pos ? p[i] : 1.0 - p[i]) < kProbClamp) h = (h ^ (i + 1)) * 0x100000001b3ULL;
  }
  if (t.tracking()) t.note_branch(h);
  const int ip = probs.id;
  return t.record(Tensor({1}, total), {ip}, [ip, grad](Tape& tp, int self) {
    const double g = tp.grad(self)[0];
    auto& gp = tp.grad(ip).storage();
    for (std::size_t i = 0; i < gp.size(); ++i) gp[i] += g * grad[i];
  });
}

Var nnh_loss_sum(Var s_pos, Var s_neg,
                 const std::vector<std::pair<std::size_t, std::size_t>>& pairs, std::size_t k,
                 const NNHConfig& cfg) {
  Tape& t = *s_pos.tape;
  const Tensor& sp = s_pos.value();
  const Tensor& sn = s_neg.value();
  const std::size_t m = sp.cols();
  if (k == 0) throw CountError("nnh_loss_sum needs at least one negative per category");
  if (sn.rows() != sp.rows() || sn.cols() != m * k)
    throw ShapeError("nnh_loss_sum: negative similarities must be [N_q x M*K]");
  Tensor gpos(sp.dims(), 0.0), gneg(sn.dims(), 0.0);
  double total = 0.0;
  std::uint64_t h = 0;
  for (const auto& [q, c] : pairs) {
    std::span<const double> negs(sn.storage().data() + q * m * k + c * k, k);
    const NNHResult r = nnh_loss(sp[q * m + c], negs, cfg);
    total += r.value;
    gpos[q * m + c] += r.grad_positive;
    for (std::size_t i = 0; i < k; ++i) gneg[q * m * k + c * k + i] += r.grad_negatives[i];
    h = (h ^ r.active_mask) * 0x100000001b3ULL;
  }
  if (t.tracking()) t.note_branch(h);
  const int ip = s_pos.id, in = s_neg.id;
  return t.record(Tensor({1}, total), {ip, in}, [ip, in, gpos, gneg](Tape& tp, int self) {
    const double g = tp.grad(self)[0];
    if (tp.needs_grad(ip)) {
      auto& gp = tp.grad(ip).storage();
      for (std::size_t i = 0; i < gp.size(); ++i) gp[i] += g * gpos[i];
    }
    if (tp.needs_grad(in)) {
      auto& gn = tp.grad(in).storage();
      for (std::size_t i = 0; i < gn.size(); ++i) gn[i] += g * gneg[i];
    }
  });
}

namespace {

template <typename Fn>
Var box_loss_sum(Var boxes, const std::vector<std::pair<std::size_t, Box4>>& pairs, Fn fn) {
  Tape& t = *boxes.tape;
  const Tensor& b = boxes.value();
  if (b.cols() != 4) throw ShapeError("box losses expect [N x 4] boxes");
  Tensor grad(b.dims(), 0.0);
  double total = 0.0;
  std::uint64_t h = 0;
  for (const auto& [q, target] : pairs) {
    if (q >= b.rows()) throw ShapeError("box loss pair index out of range");
    const Box4 pred{b[q * 4], b[q * 4 + 1], b[q * 4 + 2], b[q * 4 + 3]};
    const BoxLoss l = fn(pred, target);
    total += l.value;
    for (std::size_t i = 0; i < 4; ++i) grad[q * 4 + i] += l.grad[i];
    h = (h ^ l.branch) * 0x100000001b3ULL;
  }
  if (t.tracking()) t.note_branch(h);
  const int ib = boxes.id;
  return t.record(Tensor({1}, total), {ib}, [ib, grad](Tape& tp, int self) {
    const double g = tp.grad(self)[0];
    auto& gb = tp.grad(ib).storage();
    for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += g * grad[i];
  });
}

}  // namespace

Var l1_loss_sum(Var boxes, const std::vector<std::pair<std::size_t, Box4>>& pairs) {
  return box_loss_sum(boxes, pairs, l1_box_loss);
}

Var giou_loss_sum(Var boxes, const std::vector<std::pair<std::size_t, Box4>>& pairs) {
  return box_loss_sum(boxes, pairs, giou_loss);
}

}  // namespace ad

}  // namespace negprompt
