#pragma once

#include <algorithm>
#include <cmath>

#include "ssa2d/tensor.hpp"

namespace ssa2d {

template <class S>
struct LossWeights {
  S w_actor = S(1.3);
  S w_action = S(1.3);
  S w_mask = S(0.3);
  S dice_epsilon = S(1e-6);
};

namespace detail {

template <class S>
S clamp_prob(S p) {
  return std::min(std::max(p, S(1e-7)), S(1) - S(1e-7));
}

}  // namespace detail

// Generalized 3D dice loss over per-class probability volumes:
//   L = 1 - 2 * sum_c sum_i p * p_hat / sum_c (sum_i p^2 + sum_i p_hat^2 + eps)
// pred and gt share a [..., C] layout; gt is one-hot (or binary for C=1).
template <class S>
Tensor<S> dice_loss(Tape<S>* tape, const Tensor<S>& pred, const Tensor<S>& gt, S eps) {
  if (pred.shape != gt.shape)
    throw ShapeError("dice_loss: shape mismatch " + shape_str(pred.shape) + " vs " + shape_str(gt.shape));
  const std::int64_t C = pred.channels();
  const std::int64_t n = pred.numel();
  double num = 0.0, den = static_cast<double>(eps) * static_cast<double>(C);
  for (std::int64_t i = 0; i < n; ++i) {
    const double ph = static_cast<double>(detail::clamp_prob(pred.at(i)));
    const double p = static_cast<double>(gt.at(i));
    num += p * ph;
    den += p * p + ph * ph;
  }
  const bool rg = detail::track(tape, {&pred});
  Tensor<S> out(Shape{1}, rg);
  out.at(0) = static_cast<S>(1.0 - 2.0 * num / den);
  MemStats::add_ops(4 * n);
  if (rg) {
    Tensor<S> pv = pred, gv = gt, ov = out;
    tape->record([pv, gv, ov, num, den]() mutable {
      const S g = ov.gptr()[0];
      const std::int64_t n = pv.numel();
      for (std::int64_t i = 0; i < n; ++i) {
        const double ph = static_cast<double>(detail::clamp_prob(pv.at(i)));
        const double p = static_cast<double>(gv.at(i));
        // d/dph of (1 - 2 num/den)
        const double d = -2.0 * (p * den - num * 2.0 * ph) / (den * den);
        pv.gptr()[i] += static_cast<S>(d) * g;
      }
    });
  }
  return out;
}

// Mean per-pixel categorical cross-entropy: -(1/N) sum_i sum_j gt * log(pred).
// N is the pixel count (pred.numel() / C).
template <class S>
Tensor<S> cross_entropy_mean(Tape<S>* tape, const Tensor<S>& pred, const Tensor<S>& gt) {
  if (pred.shape != gt.shape)
    throw ShapeError("cross_entropy_mean: shape mismatch");
  const std::int64_t C = pred.channels();
  const std::int64_t n = pred.numel();
  const std::int64_t N = n / C;
  double acc = 0.0;
  for (std::int64_t i = 0; i < n; ++i) {
    const double p = static_cast<double>(gt.at(i));
    if (p != 0.0) acc -= p * std::log(static_cast<double>(detail::clamp_prob(pred.at(i))));
  }
  const bool rg = detail::track(tape, {&pred});
  Tensor<S> out(Shape{1}, rg);
  out.at(0) = static_cast<S>(acc / static_cast<double>(N));
  MemStats::add_ops(2 * n);
  if (rg) {
    Tensor<S> pv = pred, gv = gt, ov = out;
    tape->record([pv, gv, ov, N]() mutable {
      const S g = ov.gptr()[0];
      const std::int64_t n = pv.numel();
      for (std::int64_t i = 0; i < n; ++i) {
        const S p = gv.at(i);
        if (p == S(0)) continue;
        pv.gptr()[i] -= g * p / (detail::clamp_prob(pv.at(i)) * static_cast<S>(N));
      }
    });
  }
  return out;
}

// Mean binary cross-entropy over a foreground-probability volume.
template <class S>
Tensor<S> binary_cross_entropy_mean(Tape<S>* tape, const Tensor<S>& pred_fg, const Tensor<S>& gt) {
  if (pred_fg.shape != gt.shape)
    throw ShapeError("binary_cross_entropy_mean: shape mismatch");
  const std::int64_t n = pred_fg.numel();
  double acc = 0.0;
  for (std::int64_t i = 0; i < n; ++i) {
    const double ph = static_cast<double>(detail::clamp_prob(pred_fg.at(i)));
    const double p = static_cast<double>(gt.at(i));
    acc -= p * std::log(ph) + (1.0 - p) * std::log(1.0 - ph);
  }
  const bool rg = detail::track(tape, {&pred_fg});
  Tensor<S> out(Shape{1}, rg);
  out.at(0) = static_cast<S>(acc / static_cast<double>(n));
  MemStats::add_ops(4 * n);
  if (rg) {
    Tensor<S> pv = pred_fg, gv = gt, ov = out;
    tape->record([pv, gv, ov]() mutable {
      const S g = ov.gptr()[0];
      const std::int64_t n = pv.numel();
      for (std::int64_t i = 0; i < n; ++i) {
        const S ph = detail::clamp_prob(pv.at(i));
        const S p = gv.at(i);
        pv.gptr()[i] += g * (ph - p) / (ph * (S(1) - ph) * static_cast<S>(n));
      }
    });
  }
  return out;
}

// Actor / action task loss: mean categorical cross-entropy plus dice.
template <class S>
Tensor<S> categorical_task_loss(Tape<S>* tape, const Tensor<S>& pred, const Tensor<S>& gt_onehot,
                                S eps) {
  Tensor<S> ce = cross_entropy_mean(tape, pred, gt_onehot);
  Tensor<S> dl = dice_loss(tape, pred, gt_onehot, eps);
  return add(tape, ce, dl);
}

template <class S>
Tensor<S> actor_loss(Tape<S>* tape, const Tensor<S>& actor_d, const Tensor<S>& gt_onehot, S eps) {
  return categorical_task_loss(tape, actor_d, gt_onehot, eps);
}

template <class S>
Tensor<S> action_loss(Tape<S>* tape, const Tensor<S>& action_d, const Tensor<S>& gt_onehot, S eps) {
  return categorical_task_loss(tape, action_d, gt_onehot, eps);
}

// STU-Mask loss: binary cross-entropy plus dice on the foreground map.
template <class S>
Tensor<S> mask_loss(Tape<S>* tape, const Tensor<S>& stu_mask_fg, const Tensor<S>& gt_mask, S eps) {
  Tensor<S> bce = binary_cross_entropy_mean(tape, stu_mask_fg, gt_mask);
  Tensor<S> dl = dice_loss(tape, stu_mask_fg, gt_mask, eps);
  return add(tape, bce, dl);
}

template <class S>
Tensor<S> total_loss(Tape<S>* tape, const Tensor<S>& l_actor, const Tensor<S>& l_action,
                     const Tensor<S>& l_mask, const LossWeights<S>& w) {
  return weighted_sum<S>(tape, {l_actor, l_action, l_mask}, {w.w_actor, w.w_action, w.w_mask});
}

}  // namespace ssa2d
