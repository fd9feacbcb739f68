#pragma once

#include <array>
#include <cmath>
#include <random>

#include "ssa2d/tensor.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace ssa2d {

using Triple = std::array<std::int64_t, 3>;

template <class S>
struct Conv3DParams {
  Tensor<S> kernel;  // [kt,kh,kw,in_ch,out_ch]
  Tensor<S> bias;    // [out_ch]
  Triple stride{1, 1, 1};
  Triple dilation{1, 1, 1};
  Triple padding{0, 0, 0};
};

inline std::int64_t conv_out_dim(std::int64_t in, std::int64_t k, std::int64_t s,
                                 std::int64_t p, std::int64_t d) {
  return (in + 2 * p - d * (k - 1) - 1) / s + 1;
}

inline std::int64_t deconv_out_dim(std::int64_t in, std::int64_t k, std::int64_t s,
                                   std::int64_t p, std::int64_t d) {
  return (in - 1) * s - 2 * p + d * (k - 1) + 1;
}

// Padding that keeps the output size equal to the input for stride 1 and
// odd effective kernel extent.
inline Triple same_padding(const Triple& k, const Triple& d) {
  return {d[0] * (k[0] - 1) / 2, d[1] * (k[1] - 1) / 2, d[2] * (k[2] - 1) / 2};
}

template <class S>
Conv3DParams<S> make_conv_params(Triple k, std::int64_t in_ch, std::int64_t out_ch,
                                 Triple stride, Triple padding, std::mt19937& rng,
                                 Triple dilation = {1, 1, 1}) {
  Conv3DParams<S> p;
  p.kernel = Tensor<S>(Shape{k[0], k[1], k[2], in_ch, out_ch}, true);
  p.bias = Tensor<S>(Shape{out_ch}, true);
  p.stride = stride;
  p.dilation = dilation;
  p.padding = padding;
  const double fan_in = static_cast<double>(k[0] * k[1] * k[2] * in_ch);
  const double limit = std::sqrt(6.0 / std::max(1.0, fan_in));
  std::uniform_real_distribution<double> dist(-limit, limit);
  for (std::int64_t i = 0; i < p.kernel.numel(); ++i)
    p.kernel.at(i) = static_cast<S>(dist(rng));
  return p;
}

namespace detail {

inline void check_rank4(const Shape& s, const char* what) {
  if (s.size() != 4) throw ShapeError(std::string(what) + ": expected rank-4 [T,H,W,C] tensor, got " + shape_str(s));
}

}  // namespace detail

// 3D cross-correlation with stride/dilation/zero padding over [T,H,W,Cin].
template <class S>
Tensor<S> conv3d(Tape<S>* tape, const Tensor<S>& x, const Conv3DParams<S>& p) {
  detail::check_rank4(x.shape, "conv3d");
  const auto& ks = p.kernel.shape;
  if (ks.size() != 5 || ks[3] != x.shape[3])
    throw ShapeError("conv3d: kernel " + shape_str(ks) + " incompatible with input " + shape_str(x.shape));
  const std::int64_t T = x.shape[0], H = x.shape[1], W = x.shape[2], Ci = x.shape[3];
  const std::int64_t kt = ks[0], kh = ks[1], kw = ks[2], Co = ks[4];
  const std::int64_t To = conv_out_dim(T, kt, p.stride[0], p.padding[0], p.dilation[0]);
  const std::int64_t Ho = conv_out_dim(H, kh, p.stride[1], p.padding[1], p.dilation[1]);
  const std::int64_t Wo = conv_out_dim(W, kw, p.stride[2], p.padding[2], p.dilation[2]);
  if (To < 1 || Ho < 1 || Wo < 1)
    throw ShapeError("conv3d: kernel does not fit input " + shape_str(x.shape));

  const bool rg = detail::track(tape, {&x, &p.kernel, &p.bias});
  Tensor<S> out(Shape{To, Ho, Wo, Co}, rg);

  const S* xd = x.ptr();
  const S* kd = p.kernel.ptr();
  const S* bd = p.bias.ptr();
  S* od = out.ptr();

#pragma omp parallel for collapse(2) schedule(static)
  for (std::int64_t to = 0; to < To; ++to) {
    for (std::int64_t ho = 0; ho < Ho; ++ho) {
      for (std::int64_t wo = 0; wo < Wo; ++wo) {
        S* orow = od + ((to * Ho + ho) * Wo + wo) * Co;
        for (std::int64_t co = 0; co < Co; ++co) orow[co] = bd[co];
        for (std::int64_t it = 0; it < kt; ++it) {
          const std::int64_t ti = to * p.stride[0] - p.padding[0] + it * p.dilation[0];
          if (ti < 0 || ti >= T) continue;
          for (std::int64_t ih = 0; ih < kh; ++ih) {
            const std::int64_t hi = ho * p.stride[1] - p.padding[1] + ih * p.dilation[1];
            if (hi < 0 || hi >= H) continue;
            for (std::int64_t iw = 0; iw < kw; ++iw) {
              const std::int64_t wi = wo * p.stride[2] - p.padding[2] + iw * p.dilation[2];
              if (wi < 0 || wi >= W) continue;
              const S* xrow = xd + ((ti * H + hi) * W + wi) * Ci;
              const S* krow = kd + ((it * kh + ih) * kw + iw) * Ci * Co;
              for (std::int64_t ci = 0; ci < Ci; ++ci) {
                const S xv = xrow[ci];
                const S* kc = krow + ci * Co;
                for (std::int64_t co = 0; co < Co; ++co) orow[co] += xv * kc[co];
              }
            }
          }
        }
      }
    }
  }
  MemStats::add_ops(2 * To * Ho * Wo * Co * kt * kh * kw * Ci);

  if (rg) {
    Tensor<S> xv = x, kv = p.kernel, bv = p.bias, ov = out;
    const Triple st = p.stride, di = p.dilation, pa = p.padding;
    tape->record([xv, kv, bv, ov, st, di, pa]() mutable {
      const std::int64_t T = xv.shape[0], H = xv.shape[1], W = xv.shape[2], Ci = xv.shape[3];
      const std::int64_t kt = kv.shape[0], kh = kv.shape[1], kw = kv.shape[2], Co = kv.shape[4];
      const std::int64_t To = ov.shape[0], Ho = ov.shape[1], Wo = ov.shape[2];
      const S* go = ov.gptr();
      const S* xd = xv.ptr();
      const S* kd = kv.ptr();

      if (bv.requires_grad) {
        S* gb = bv.gptr();
        for (std::int64_t o = 0; o < To * Ho * Wo; ++o)
          for (std::int64_t co = 0; co < Co; ++co) gb[co] += go[o * Co + co];
      }
      if (xv.requires_grad) {
        S* gx = xv.gptr();
        // each thread owns a disjoint ci slice of gx
#pragma omp parallel for schedule(static)
        for (std::int64_t ci = 0; ci < Ci; ++ci) {
          for (std::int64_t to = 0; to < To; ++to)
            for (std::int64_t ho = 0; ho < Ho; ++ho)
              for (std::int64_t wo = 0; wo < Wo; ++wo) {
                const S* grow = go + ((to * Ho + ho) * Wo + wo) * Co;
                for (std::int64_t it = 0; it < kt; ++it) {
                  const std::int64_t ti = to * st[0] - pa[0] + it * di[0];
                  if (ti < 0 || ti >= T) continue;
                  for (std::int64_t ih = 0; ih < kh; ++ih) {
                    const std::int64_t hi = ho * st[1] - pa[1] + ih * di[1];
                    if (hi < 0 || hi >= H) continue;
                    for (std::int64_t iw = 0; iw < kw; ++iw) {
                      const std::int64_t wi = wo * st[2] - pa[2] + iw * di[2];
                      if (wi < 0 || wi >= W) continue;
                      const S* kc = kd + (((it * kh + ih) * kw + iw) * Ci + ci) * Co;
                      S acc = S(0);
                      for (std::int64_t co = 0; co < Co; ++co) acc += grow[co] * kc[co];
                      gx[((ti * H + hi) * W + wi) * Ci + ci] += acc;
                    }
                  }
                }
              }
        }
      }
      if (kv.requires_grad) {
        S* gk = kv.gptr();
        const std::int64_t kvol = kt * kh * kw;
#pragma omp parallel for schedule(static)
        for (std::int64_t kidx = 0; kidx < kvol; ++kidx) {
          const std::int64_t it = kidx / (kh * kw);
          const std::int64_t ih = (kidx / kw) % kh;
          const std::int64_t iw = kidx % kw;
          S* gkrow = gk + kidx * Ci * Co;
          for (std::int64_t to = 0; to < To; ++to) {
            const std::int64_t ti = to * st[0] - pa[0] + it * di[0];
            if (ti < 0 || ti >= T) continue;
            for (std::int64_t ho = 0; ho < Ho; ++ho) {
              const std::int64_t hi = ho * st[1] - pa[1] + ih * di[1];
              if (hi < 0 || hi >= H) continue;
              for (std::int64_t wo = 0; wo < Wo; ++wo) {
                const std::int64_t wi = wo * st[2] - pa[2] + iw * di[2];
                if (wi < 0 || wi >= W) continue;
                const S* xrow = xd + ((ti * H + hi) * W + wi) * Ci;
                const S* grow = go + ((to * Ho + ho) * Wo + wo) * Co;
                for (std::int64_t ci = 0; ci < Ci; ++ci) {
                  const S xval = xrow[ci];
                  S* gkc = gkrow + ci * Co;
                  for (std::int64_t co = 0; co < Co; ++co) gkc[co] += xval * grow[co];
                }
              }
            }
          }
        }
      }
    });
  }
  return out;
}

// Transposed 3D convolution; adjoint of conv3d with the same kernel.
template <class S>
Tensor<S> deconv3d(Tape<S>* tape, const Tensor<S>& x, const Conv3DParams<S>& p) {
  detail::check_rank4(x.shape, "deconv3d");
  const auto& ks = p.kernel.shape;
  if (ks.size() != 5 || ks[3] != x.shape[3])
    throw ShapeError("deconv3d: kernel " + shape_str(ks) + " incompatible with input " + shape_str(x.shape));
  const std::int64_t T = x.shape[0], H = x.shape[1], W = x.shape[2], Ci = x.shape[3];
  const std::int64_t kt = ks[0], kh = ks[1], kw = ks[2], Co = ks[4];
  const std::int64_t To = deconv_out_dim(T, kt, p.stride[0], p.padding[0], p.dilation[0]);
  const std::int64_t Ho = deconv_out_dim(H, kh, p.stride[1], p.padding[1], p.dilation[1]);
  const std::int64_t Wo = deconv_out_dim(W, kw, p.stride[2], p.padding[2], p.dilation[2]);
  if (To < 1 || Ho < 1 || Wo < 1)
    throw ShapeError("deconv3d: output would be empty for input " + shape_str(x.shape));

  const bool rg = detail::track(tape, {&x, &p.kernel, &p.bias});
  Tensor<S> out(Shape{To, Ho, Wo, Co}, rg);

  const S* xd = x.ptr();
  const S* kd = p.kernel.ptr();
  const S* bd = p.bias.ptr();
  S* od = out.ptr();

  for (std::int64_t o = 0; o < To * Ho * Wo; ++o)
    for (std::int64_t co = 0; co < Co; ++co) od[o * Co + co] = bd[co];

  // scatter from input positions; threads own disjoint co slices
#pragma omp parallel
  {
#ifdef _OPENMP
    const int nth = omp_get_num_threads();
    const int tid = omp_get_thread_num();
#else
    const int nth = 1, tid = 0;
#endif
    for (std::int64_t ti = 0; ti < T; ++ti)
      for (std::int64_t hi = 0; hi < H; ++hi)
        for (std::int64_t wi = 0; wi < W; ++wi) {
          const S* xrow = xd + ((ti * H + hi) * W + wi) * Ci;
          for (std::int64_t it = 0; it < kt; ++it) {
            const std::int64_t to = ti * p.stride[0] - p.padding[0] + it * p.dilation[0];
            if (to < 0 || to >= To) continue;
            for (std::int64_t ih = 0; ih < kh; ++ih) {
              const std::int64_t ho = hi * p.stride[1] - p.padding[1] + ih * p.dilation[1];
              if (ho < 0 || ho >= Ho) continue;
              for (std::int64_t iw = 0; iw < kw; ++iw) {
                const std::int64_t wo = wi * p.stride[2] - p.padding[2] + iw * p.dilation[2];
                if (wo < 0 || wo >= Wo) continue;
                S* orow = od + ((to * Ho + ho) * Wo + wo) * Co;
                const S* krow = kd + ((it * kh + ih) * kw + iw) * Ci * Co;
                for (std::int64_t ci = 0; ci < Ci; ++ci) {
                  const S xval = xrow[ci];
                  const S* kc = krow + ci * Co;
                  for (std::int64_t co = tid; co < Co; co += nth) orow[co] += xval * kc[co];
                }
              }
            }
          }
        }
  }
  MemStats::add_ops(2 * T * H * W * Ci * kt * kh * kw * Co);

  if (rg) {
    Tensor<S> xv = x, kv = p.kernel, bv = p.bias, ov = out;
    const Triple st = p.stride, di = p.dilation, pa = p.padding;
    tape->record([xv, kv, bv, ov, st, di, pa]() mutable {
      const std::int64_t T = xv.shape[0], H = xv.shape[1], W = xv.shape[2], Ci = xv.shape[3];
      const std::int64_t kt = kv.shape[0], kh = kv.shape[1], kw = kv.shape[2], Co = kv.shape[4];
      const std::int64_t To = ov.shape[0], Ho = ov.shape[1], Wo = ov.shape[2];
      const S* go = ov.gptr();
      const S* xd = xv.ptr();
      const S* kd = kv.ptr();

      if (bv.requires_grad) {
        S* gb = bv.gptr();
        for (std::int64_t o = 0; o < To * Ho * Wo; ++o)
          for (std::int64_t co = 0; co < Co; ++co) gb[co] += go[o * Co + co];
      }
      if (xv.requires_grad) {
        // dX is a plain convolution of dOut with the shared kernel
        S* gx = xv.gptr();
#pragma omp parallel for collapse(2) schedule(static)
        for (std::int64_t ti = 0; ti < T; ++ti)
          for (std::int64_t hi = 0; hi < H; ++hi)
            for (std::int64_t wi = 0; wi < W; ++wi) {
              S* gxrow = gx + ((ti * H + hi) * W + wi) * Ci;
              for (std::int64_t it = 0; it < kt; ++it) {
                const std::int64_t to = ti * st[0] - pa[0] + it * di[0];
                if (to < 0 || to >= To) continue;
                for (std::int64_t ih = 0; ih < kh; ++ih) {
                  const std::int64_t ho = hi * st[1] - pa[1] + ih * di[1];
                  if (ho < 0 || ho >= Ho) continue;
                  for (std::int64_t iw = 0; iw < kw; ++iw) {
                    const std::int64_t wo = wi * st[2] - pa[2] + iw * di[2];
                    if (wo < 0 || wo >= Wo) continue;
                    const S* grow = go + ((to * Ho + ho) * Wo + wo) * Co;
                    const S* krow = kd + ((it * kh + ih) * kw + iw) * Ci * Co;
                    for (std::int64_t ci = 0; ci < Ci; ++ci) {
                      const S* kc = krow + ci * Co;
                      S acc = S(0);
                      for (std::int64_t co = 0; co < Co; ++co) acc += grow[co] * kc[co];
                      gxrow[ci] += acc;
                    }
                  }
                }
              }
            }
      }
      if (kv.requires_grad) {
        S* gk = kv.gptr();
        const std::int64_t kvol = kt * kh * kw;
#pragma omp parallel for schedule(static)
        for (std::int64_t kidx = 0; kidx < kvol; ++kidx) {
          const std::int64_t it = kidx / (kh * kw);
          const std::int64_t ih = (kidx / kw) % kh;
          const std::int64_t iw = kidx % kw;
          S* gkrow = gk + kidx * Ci * Co;
          for (std::int64_t ti = 0; ti < T; ++ti) {
            const std::int64_t to = ti * st[0] - pa[0] + it * di[0];
            if (to < 0 || to >= To) continue;
            for (std::int64_t hi = 0; hi < H; ++hi) {
              const std::int64_t ho = hi * st[1] - pa[1] + ih * di[1];
              if (ho < 0 || ho >= Ho) continue;
              for (std::int64_t wi = 0; wi < W; ++wi) {
                const std::int64_t wo = wi * st[2] - pa[2] + iw * di[2];
                if (wo < 0 || wo >= Wo) continue;
                const S* xrow = xd + ((ti * H + hi) * W + wi) * Ci;
                const S* grow = go + ((to * Ho + ho) * Wo + wo) * Co;
                for (std::int64_t ci = 0; ci < Ci; ++ci) {
                  const S xval = xrow[ci];
                  S* gkc = gkrow + ci * Co;
                  for (std::int64_t co = 0; co < Co; ++co) gkc[co] += xval * grow[co];
                }
              }
            }
          }
        }
      }
    });
  }
  return out;
}

// Per-window max over [T,H,W]; gradient routes to the first argmax in scan order.
template <class S>
Tensor<S> maxpool3d(Tape<S>* tape, const Tensor<S>& x, Triple window, Triple stride) {
  detail::check_rank4(x.shape, "maxpool3d");
  const std::int64_t T = x.shape[0], H = x.shape[1], W = x.shape[2], C = x.shape[3];
  const std::int64_t To = conv_out_dim(T, window[0], stride[0], 0, 1);
  const std::int64_t Ho = conv_out_dim(H, window[1], stride[1], 0, 1);
  const std::int64_t Wo = conv_out_dim(W, window[2], stride[2], 0, 1);
  if (To < 1 || Ho < 1 || Wo < 1) throw ShapeError("maxpool3d: window does not fit input");

  const bool rg = detail::track(tape, {&x});
  Tensor<S> out(Shape{To, Ho, Wo, C}, rg);
  auto argmax = std::make_shared<std::vector<std::int64_t>>(out.numel());

  const S* xd = x.ptr();
  S* od = out.ptr();
  for (std::int64_t to = 0; to < To; ++to)
    for (std::int64_t ho = 0; ho < Ho; ++ho)
      for (std::int64_t wo = 0; wo < Wo; ++wo)
        for (std::int64_t c = 0; c < C; ++c) {
          S best = -std::numeric_limits<S>::infinity();
          std::int64_t besti = -1;
          for (std::int64_t it = 0; it < window[0]; ++it)
            for (std::int64_t ih = 0; ih < window[1]; ++ih)
              for (std::int64_t iw = 0; iw < window[2]; ++iw) {
                const std::int64_t ti = to * stride[0] + it;
                const std::int64_t hi = ho * stride[1] + ih;
                const std::int64_t wi = wo * stride[2] + iw;
                const std::int64_t idx = ((ti * H + hi) * W + wi) * C + c;
                if (xd[idx] > best) {
                  best = xd[idx];
                  besti = idx;
                }
              }
          const std::int64_t oidx = ((to * Ho + ho) * Wo + wo) * C + c;
          od[oidx] = best;
          (*argmax)[static_cast<std::size_t>(oidx)] = besti;
        }
  MemStats::add_ops(out.numel() * window[0] * window[1] * window[2]);

  if (rg) {
    Tensor<S> xv = x, ov = out;
    tape->record([xv, ov, argmax]() mutable {
      const std::int64_t n = ov.numel();
      for (std::int64_t i = 0; i < n; ++i)
        xv.gptr()[(*argmax)[static_cast<std::size_t>(i)]] += ov.gptr()[i];
    });
  }
  return out;
}

namespace detail {

// align-corners-false source coordinate: lo index, hi index, hi weight
inline void lerp_coord(std::int64_t o, std::int64_t factor, std::int64_t in_dim,
                       std::int64_t& lo, std::int64_t& hi, double& w_hi) {
  const double src = (static_cast<double>(o) + 0.5) / static_cast<double>(factor) - 0.5;
  const double clamped = std::min(std::max(src, 0.0), static_cast<double>(in_dim - 1));
  lo = static_cast<std::int64_t>(std::floor(clamped));
  hi = std::min(lo + 1, in_dim - 1);
  w_hi = clamped - static_cast<double>(lo);
}

}  // namespace detail

// Trilinear upsampling by integer factors, align-corners-false convention.
template <class S>
Tensor<S> upsample_trilinear(Tape<S>* tape, const Tensor<S>& x, Triple factor) {
  detail::check_rank4(x.shape, "upsample_trilinear");
  for (auto f : factor)
    if (f < 1) throw ShapeError("upsample_trilinear: factors must be >= 1");
  const std::int64_t T = x.shape[0], H = x.shape[1], W = x.shape[2], C = x.shape[3];
  const std::int64_t To = T * factor[0], Ho = H * factor[1], Wo = W * factor[2];
  const bool rg = detail::track(tape, {&x});
  Tensor<S> out(Shape{To, Ho, Wo, C}, rg);

  const S* xd = x.ptr();
  S* od = out.ptr();
#pragma omp parallel for schedule(static)
  for (std::int64_t to = 0; to < To; ++to) {
    std::int64_t t0, t1;
    double wt;
    detail::lerp_coord(to, factor[0], T, t0, t1, wt);
    for (std::int64_t ho = 0; ho < Ho; ++ho) {
      std::int64_t h0, h1;
      double wh;
      detail::lerp_coord(ho, factor[1], H, h0, h1, wh);
      for (std::int64_t wo = 0; wo < Wo; ++wo) {
        std::int64_t w0, w1;
        double ww;
        detail::lerp_coord(wo, factor[2], W, w0, w1, ww);
        S* orow = od + ((to * Ho + ho) * Wo + wo) * C;
        for (std::int64_t c = 0; c < C; ++c) {
          double acc = 0.0;
          for (int dt = 0; dt < 2; ++dt)
            for (int dh = 0; dh < 2; ++dh)
              for (int dw = 0; dw < 2; ++dw) {
                const double w = (dt ? wt : 1.0 - wt) * (dh ? wh : 1.0 - wh) * (dw ? ww : 1.0 - ww);
                if (w == 0.0) continue;
                const std::int64_t ti = dt ? t1 : t0;
                const std::int64_t hi = dh ? h1 : h0;
                const std::int64_t wi = dw ? w1 : w0;
                acc += w * static_cast<double>(xd[((ti * H + hi) * W + wi) * C + c]);
              }
          orow[c] = static_cast<S>(acc);
        }
      }
    }
  }
  MemStats::add_ops(out.numel() * 8);

  if (rg) {
    Tensor<S> xv = x, ov = out;
    tape->record([xv, ov, factor]() mutable {
      const std::int64_t T = xv.shape[0], H = xv.shape[1], W = xv.shape[2], C = xv.shape[3];
      const std::int64_t To = ov.shape[0], Ho = ov.shape[1], Wo = ov.shape[2];
      const S* go = ov.gptr();
      S* gx = xv.gptr();
#pragma omp parallel for schedule(static)
      for (std::int64_t c = 0; c < C; ++c) {
        for (std::int64_t to = 0; to < To; ++to) {
          std::int64_t t0, t1;
          double wt;
          detail::lerp_coord(to, factor[0], T, t0, t1, wt);
          for (std::int64_t ho = 0; ho < Ho; ++ho) {
            std::int64_t h0, h1;
            double wh;
            detail::lerp_coord(ho, factor[1], H, h0, h1, wh);
            for (std::int64_t wo = 0; wo < Wo; ++wo) {
              std::int64_t w0, w1;
              double ww;
              detail::lerp_coord(wo, factor[2], W, w0, w1, ww);
              const S g = go[((to * Ho + ho) * Wo + wo) * C + c];
              if (g == S(0)) continue;
              for (int dt = 0; dt < 2; ++dt)
                for (int dh = 0; dh < 2; ++dh)
                  for (int dw = 0; dw < 2; ++dw) {
                    const double w =
                        (dt ? wt : 1.0 - wt) * (dh ? wh : 1.0 - wh) * (dw ? ww : 1.0 - ww);
                    if (w == 0.0) continue;
                    const std::int64_t ti = dt ? t1 : t0;
                    const std::int64_t hi = dh ? h1 : h0;
                    const std::int64_t wi = dw ? w1 : w0;
                    gx[((ti * H + hi) * W + wi) * C + c] += static_cast<S>(w * static_cast<double>(g));
                  }
            }
          }
        }
      }
    });
  }
  return out;
}

// Nearest-neighbor resize to an arbitrary [T,H,W] target, channel count kept.
template <class S>
Tensor<S> resize_nearest(Tape<S>* tape, const Tensor<S>& x, Triple target) {
  detail::check_rank4(x.shape, "resize_nearest");
  const std::int64_t T = x.shape[0], H = x.shape[1], W = x.shape[2], C = x.shape[3];
  const std::int64_t To = target[0], Ho = target[1], Wo = target[2];
  if (To < 1 || Ho < 1 || Wo < 1) throw ShapeError("resize_nearest: bad target shape");
  const bool rg = detail::track(tape, {&x});
  Tensor<S> out(Shape{To, Ho, Wo, C}, rg);
  auto src_index = [](std::int64_t o, std::int64_t od, std::int64_t id) {
    const std::int64_t i = (2 * o + 1) * id / (2 * od);
    return std::min(i, id - 1);
  };
  const S* xd = x.ptr();
  S* od = out.ptr();
  for (std::int64_t to = 0; to < To; ++to) {
    const std::int64_t ti = src_index(to, To, T);
    for (std::int64_t ho = 0; ho < Ho; ++ho) {
      const std::int64_t hi = src_index(ho, Ho, H);
      for (std::int64_t wo = 0; wo < Wo; ++wo) {
        const std::int64_t wi = src_index(wo, Wo, W);
        const S* xrow = xd + ((ti * H + hi) * W + wi) * C;
        S* orow = od + ((to * Ho + ho) * Wo + wo) * C;
        for (std::int64_t c = 0; c < C; ++c) orow[c] = xrow[c];
      }
    }
  }
  if (rg) {
    Tensor<S> xv = x, ov = out;
    tape->record([xv, ov, src_index]() mutable {
      const std::int64_t T = xv.shape[0], H = xv.shape[1], W = xv.shape[2], C = xv.shape[3];
      const std::int64_t To = ov.shape[0], Ho = ov.shape[1], Wo = ov.shape[2];
      for (std::int64_t to = 0; to < To; ++to) {
        const std::int64_t ti = src_index(to, To, T);
        for (std::int64_t ho = 0; ho < Ho; ++ho) {
          const std::int64_t hi = src_index(ho, Ho, H);
          for (std::int64_t wo = 0; wo < Wo; ++wo) {
            const std::int64_t wi = src_index(wo, Wo, W);
            for (std::int64_t c = 0; c < C; ++c)
              xv.gptr()[((ti * H + hi) * W + wi) * C + c] +=
                  ov.gptr()[((to * Ho + ho) * Wo + wo) * C + c];
          }
        }
      }
    });
  }
  return out;
}

// Parallel same-padded dilated conv branches concatenated on channels,
// fused by a 1x1x1 convolution. Output spatial/temporal size equals input.
template <class S>
struct AtrousBlock {
  std::vector<Conv3DParams<S>> branches;  // one per rate
  Conv3DParams<S> fuse;                   // 1x1x1
  std::vector<std::int64_t> rates;

  static AtrousBlock make(std::int64_t in_ch, std::int64_t branch_ch, std::int64_t out_ch,
                          const std::vector<std::int64_t>& rates, Triple k, std::mt19937& rng) {
    AtrousBlock b;
    b.rates = rates;
    for (auto r : rates) {
      Triple d{r, r, r};
      b.branches.push_back(
          make_conv_params<S>(k, in_ch, branch_ch, {1, 1, 1}, same_padding(k, d), rng, d));
    }
    b.fuse = make_conv_params<S>({1, 1, 1}, branch_ch * static_cast<std::int64_t>(rates.size()),
                                 out_ch, {1, 1, 1}, {0, 0, 0}, rng);
    return b;
  }

  Tensor<S> forward(Tape<S>* tape, const Tensor<S>& x) const {
    Tensor<S> cat;
    for (std::size_t i = 0; i < branches.size(); ++i) {
      Tensor<S> y = conv3d(tape, x, branches[i]);
      cat = (i == 0) ? y : concat_channels(tape, cat, y);
    }
    return conv3d(tape, cat, fuse);
  }
};

}  // namespace ssa2d
