#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "ssa2d/memstats.hpp"

namespace ssa2d {

using Shape = std::vector<std::int64_t>;

inline std::int64_t shape_numel(const Shape& s) {
  std::int64_t n = 1;
  for (auto d : s) n *= d;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

struct ShapeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct ContractError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

template <class S>
using Buffer = std::shared_ptr<std::vector<S>>;

template <class S>
Buffer<S> make_buffer(std::int64_t n, S fill = S(0)) {
  auto* vec = new std::vector<S>(static_cast<std::size_t>(n), fill);
  const std::int64_t bytes = n * static_cast<std::int64_t>(sizeof(S));
  MemStats::on_alloc(bytes);
  return Buffer<S>(vec, [bytes](std::vector<S>* p) {
    MemStats::on_free(bytes);
    delete p;
  });
}

// Dense row-major N-D tensor, the universal value/gradient carrier.
// Copies share storage; values are treated as immutable once an operation
// has produced them (gradient buffers are the exception).
template <class S>
class Tensor {
 public:
  Shape shape;
  Buffer<S> data;
  Buffer<S> grad;  // allocated iff requires_grad
  bool requires_grad = false;

  Tensor() = default;
  Tensor(Shape sh, bool rg = false) : shape(std::move(sh)), requires_grad(rg) {
    data = make_buffer<S>(numel());
    if (requires_grad) grad = make_buffer<S>(numel());
  }
  Tensor(Shape sh, std::vector<S> values, bool rg = false)
      : shape(std::move(sh)), requires_grad(rg) {
    if (static_cast<std::int64_t>(values.size()) != numel())
      throw ShapeError("tensor data size does not match shape " + shape_str(shape));
    data = make_buffer<S>(numel());
    std::copy(values.begin(), values.end(), data->begin());
    if (requires_grad) grad = make_buffer<S>(numel());
  }

  std::int64_t numel() const { return shape_numel(shape); }
  std::int64_t channels() const { return shape.empty() ? 1 : shape.back(); }

  S* ptr() { return data->data(); }
  const S* ptr() const { return data->data(); }
  S* gptr() { return grad ? grad->data() : nullptr; }
  const S* gptr() const { return grad ? grad->data() : nullptr; }

  S& at(std::int64_t i) { return (*data)[static_cast<std::size_t>(i)]; }
  S at(std::int64_t i) const { return (*data)[static_cast<std::size_t>(i)]; }

  void zero_grad() {
    if (grad) std::fill(grad->begin(), grad->end(), S(0));
  }
  void ensure_grad() {
    if (!grad) grad = make_buffer<S>(numel());
    requires_grad = true;
  }

  S item() const {
    if (numel() != 1) throw ContractError("item() on non-scalar tensor");
    return (*data)[0];
  }

  Tensor detached() const {
    Tensor t;
    t.shape = shape;
    t.data = data;
    t.requires_grad = false;
    return t;
  }

  Tensor clone() const {
    Tensor t(shape, requires_grad);
    std::copy(data->begin(), data->end(), t.data->begin());
    return t;
  }
};

// Ordered record of executed operations. Backward replays the record in
// exact reverse execution order; gradients accumulate until cleared.
template <class S>
class Tape {
 public:
  void record(std::function<void()> backward_fn) {
    nodes_.push_back(std::move(backward_fn));
  }
  std::size_t size() const { return nodes_.size(); }
  void clear() { nodes_.clear(); }

  void backward(Tensor<S>& loss) {
    if (loss.numel() != 1) throw ContractError("backward requires a scalar loss");
    loss.ensure_grad();
    (*loss.grad)[0] += S(1);
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)();
  }

 private:
  std::vector<std::function<void()>> nodes_;
};

namespace detail {

template <class S>
bool track(const Tape<S>* tape, std::initializer_list<const Tensor<S>*> ins) {
  if (!tape) return false;
  for (const auto* t : ins)
    if (t->requires_grad) return true;
  return false;
}

}  // namespace detail

template <class S>
Tensor<S> full(const Shape& sh, S value, bool rg = false) {
  Tensor<S> t(sh, rg);
  std::fill(t.data->begin(), t.data->end(), value);
  return t;
}

template <class S>
Tensor<S> zeros(const Shape& sh, bool rg = false) {
  return Tensor<S>(sh, rg);
}

// out[i] = a[i] + b[i]
template <class S>
Tensor<S> add(Tape<S>* tape, const Tensor<S>& a, const Tensor<S>& b) {
  if (a.shape != b.shape)
    throw ShapeError("add: shape mismatch " + shape_str(a.shape) + " vs " + shape_str(b.shape));
  const bool rg = detail::track(tape, {&a, &b});
  Tensor<S> out(a.shape, rg);
  const std::int64_t n = a.numel();
  for (std::int64_t i = 0; i < n; ++i) out.at(i) = a.at(i) + b.at(i);
  MemStats::add_ops(n);
  if (rg) {
    Tensor<S> av = a, bv = b, ov = out;
    tape->record([av, bv, ov]() mutable {
      const std::int64_t n = ov.numel();
      if (av.requires_grad)
        for (std::int64_t i = 0; i < n; ++i) av.gptr()[i] += ov.gptr()[i];
      if (bv.requires_grad)
        for (std::int64_t i = 0; i < n; ++i) bv.gptr()[i] += ov.gptr()[i];
    });
  }
  return out;
}

template <class S>
Tensor<S> scale(Tape<S>* tape, const Tensor<S>& a, S k) {
  const bool rg = detail::track(tape, {&a});
  Tensor<S> out(a.shape, rg);
  const std::int64_t n = a.numel();
  for (std::int64_t i = 0; i < n; ++i) out.at(i) = a.at(i) * k;
  MemStats::add_ops(n);
  if (rg) {
    Tensor<S> av = a, ov = out;
    tape->record([av, ov, k]() mutable {
      const std::int64_t n = ov.numel();
      for (std::int64_t i = 0; i < n; ++i) av.gptr()[i] += k * ov.gptr()[i];
    });
  }
  return out;
}

// Elementwise product. b must either match a's shape exactly or match it
// with a trailing channel dimension of 1, broadcast across a's channels.
template <class S>
Tensor<S> elementwise_mul(Tape<S>* tape, const Tensor<S>& a, const Tensor<S>& b) {
  bool broadcast = false;
  if (a.shape != b.shape) {
    Shape bc = a.shape;
    if (!bc.empty()) bc.back() = 1;
    if (b.shape == bc && a.shape != bc) {
      broadcast = true;
    } else {
      throw ShapeError("elementwise_mul: shapes " + shape_str(a.shape) + " and " +
                       shape_str(b.shape) + " are not compatible");
    }
  }
  const bool rg = detail::track(tape, {&a, &b});
  Tensor<S> out(a.shape, rg);
  const std::int64_t ch = a.channels();
  const std::int64_t n = a.numel();
  if (!broadcast) {
    for (std::int64_t i = 0; i < n; ++i) out.at(i) = a.at(i) * b.at(i);
  } else {
    for (std::int64_t i = 0; i < n; ++i) out.at(i) = a.at(i) * b.at(i / ch);
  }
  MemStats::add_ops(n);
  if (rg) {
    Tensor<S> av = a, bv = b, ov = out;
    tape->record([av, bv, ov, broadcast, ch]() mutable {
      const std::int64_t n = ov.numel();
      if (!broadcast) {
        if (av.requires_grad)
          for (std::int64_t i = 0; i < n; ++i) av.gptr()[i] += bv.at(i) * ov.gptr()[i];
        if (bv.requires_grad)
          for (std::int64_t i = 0; i < n; ++i) bv.gptr()[i] += av.at(i) * ov.gptr()[i];
      } else {
        if (av.requires_grad)
          for (std::int64_t i = 0; i < n; ++i) av.gptr()[i] += bv.at(i / ch) * ov.gptr()[i];
        if (bv.requires_grad)
          for (std::int64_t i = 0; i < n; ++i) bv.gptr()[i / ch] += av.at(i) * ov.gptr()[i];
      }
    });
  }
  return out;
}

// Concatenation along the last (channel) axis; a occupies the leading slots.
template <class S>
Tensor<S> concat_channels(Tape<S>* tape, const Tensor<S>& a, const Tensor<S>& b) {
  if (a.shape.size() != b.shape.size() || a.shape.empty())
    throw ShapeError("concat_channels: rank mismatch");
  for (std::size_t i = 0; i + 1 < a.shape.size(); ++i)
    if (a.shape[i] != b.shape[i])
      throw ShapeError("concat_channels: non-channel dim mismatch " + shape_str(a.shape) +
                       " vs " + shape_str(b.shape));
  const std::int64_t ca = a.shape.back(), cb = b.shape.back();
  Shape osh = a.shape;
  osh.back() = ca + cb;
  const bool rg = detail::track(tape, {&a, &b});
  Tensor<S> out(osh, rg);
  const std::int64_t rows = ca + cb > 0 ? shape_numel(osh) / (ca + cb) : 0;
  for (std::int64_t r = 0; r < rows; ++r) {
    for (std::int64_t c = 0; c < ca; ++c) out.at(r * (ca + cb) + c) = a.at(r * ca + c);
    for (std::int64_t c = 0; c < cb; ++c) out.at(r * (ca + cb) + ca + c) = b.at(r * cb + c);
  }
  if (rg) {
    Tensor<S> av = a, bv = b, ov = out;
    tape->record([av, bv, ov, rows, ca, cb]() mutable {
      for (std::int64_t r = 0; r < rows; ++r) {
        if (av.requires_grad)
          for (std::int64_t c = 0; c < ca; ++c)
            av.gptr()[r * ca + c] += ov.gptr()[r * (ca + cb) + c];
        if (bv.requires_grad)
          for (std::int64_t c = 0; c < cb; ++c)
            bv.gptr()[r * cb + c] += ov.gptr()[r * (ca + cb) + ca + c];
      }
    });
  }
  return out;
}

// View-copy of channels [c0, c1) along the last axis.
template <class S>
Tensor<S> slice_channels(Tape<S>* tape, const Tensor<S>& x, std::int64_t c0, std::int64_t c1) {
  const std::int64_t ch = x.channels();
  if (c0 < 0 || c1 > ch || c0 > c1) throw ShapeError("slice_channels: bad range");
  Shape osh = x.shape;
  osh.back() = c1 - c0;
  const bool rg = detail::track(tape, {&x});
  Tensor<S> out(osh, rg);
  const std::int64_t rows = x.numel() / ch;
  const std::int64_t oc = c1 - c0;
  for (std::int64_t r = 0; r < rows; ++r)
    for (std::int64_t c = 0; c < oc; ++c) out.at(r * oc + c) = x.at(r * ch + c0 + c);
  if (rg) {
    Tensor<S> xv = x, ov = out;
    tape->record([xv, ov, rows, ch, c0, oc]() mutable {
      for (std::int64_t r = 0; r < rows; ++r)
        for (std::int64_t c = 0; c < oc; ++c)
          xv.gptr()[r * ch + c0 + c] += ov.gptr()[r * oc + c];
    });
  }
  return out;
}

// Softmax across the channel (last) axis, stabilized by max subtraction.
template <class S>
Tensor<S> softmax_channels(Tape<S>* tape, const Tensor<S>& x) {
  const std::int64_t ch = x.channels();
  if (ch < 1) throw ShapeError("softmax_channels: channel dim must be >= 1");
  const bool rg = detail::track(tape, {&x});
  Tensor<S> out(x.shape, rg);
  const std::int64_t rows = x.numel() / ch;
  for (std::int64_t r = 0; r < rows; ++r) {
    const S* xi = x.ptr() + r * ch;
    S* yo = out.ptr() + r * ch;
    S m = xi[0];
    for (std::int64_t c = 1; c < ch; ++c) m = std::max(m, xi[c]);
    S sum = S(0);
    for (std::int64_t c = 0; c < ch; ++c) {
      yo[c] = std::exp(xi[c] - m);
      sum += yo[c];
    }
    const S inv = S(1) / sum;
    for (std::int64_t c = 0; c < ch; ++c) yo[c] *= inv;
  }
  MemStats::add_ops(x.numel() * 4);
  if (rg) {
    Tensor<S> xv = x, ov = out;
    tape->record([xv, ov, rows, ch]() mutable {
      for (std::int64_t r = 0; r < rows; ++r) {
        const S* y = ov.ptr() + r * ch;
        const S* gy = ov.gptr() + r * ch;
        S* gx = xv.gptr() + r * ch;
        S dot = S(0);
        for (std::int64_t c = 0; c < ch; ++c) dot += gy[c] * y[c];
        for (std::int64_t c = 0; c < ch; ++c) gx[c] += y[c] * (gy[c] - dot);
      }
    });
  }
  return out;
}

template <class S>
Tensor<S> sigmoid(Tape<S>* tape, const Tensor<S>& x) {
  const bool rg = detail::track(tape, {&x});
  Tensor<S> out(x.shape, rg);
  const std::int64_t n = x.numel();
  for (std::int64_t i = 0; i < n; ++i) {
    const S v = x.at(i);
    out.at(i) = v >= S(0) ? S(1) / (S(1) + std::exp(-v))
                          : std::exp(v) / (S(1) + std::exp(v));
  }
  MemStats::add_ops(n * 3);
  if (rg) {
    Tensor<S> xv = x, ov = out;
    tape->record([xv, ov]() mutable {
      const std::int64_t n = ov.numel();
      for (std::int64_t i = 0; i < n; ++i) {
        const S y = ov.at(i);
        xv.gptr()[i] += y * (S(1) - y) * ov.gptr()[i];
      }
    });
  }
  return out;
}

template <class S>
Tensor<S> relu(Tape<S>* tape, const Tensor<S>& x) {
  const bool rg = detail::track(tape, {&x});
  Tensor<S> out(x.shape, rg);
  const std::int64_t n = x.numel();
  for (std::int64_t i = 0; i < n; ++i) out.at(i) = x.at(i) > S(0) ? x.at(i) : S(0);
  MemStats::add_ops(n);
  if (rg) {
    Tensor<S> xv = x, ov = out;
    tape->record([xv, ov]() mutable {
      const std::int64_t n = ov.numel();
      for (std::int64_t i = 0; i < n; ++i)
        if (xv.at(i) > S(0)) xv.gptr()[i] += ov.gptr()[i];
    });
  }
  return out;
}

// Reduces to a scalar tensor of shape [1].
template <class S>
Tensor<S> sum(Tape<S>* tape, const Tensor<S>& x) {
  const bool rg = detail::track(tape, {&x});
  Tensor<S> out(Shape{1}, rg);
  double acc = 0.0;  // double accumulation: one rounding instead of N
  const std::int64_t n = x.numel();
  for (std::int64_t i = 0; i < n; ++i) acc += static_cast<double>(x.at(i));
  out.at(0) = static_cast<S>(acc);
  MemStats::add_ops(n);
  if (rg) {
    Tensor<S> xv = x, ov = out;
    tape->record([xv, ov]() mutable {
      const std::int64_t n = xv.numel();
      const S g = ov.gptr()[0];
      for (std::int64_t i = 0; i < n; ++i) xv.gptr()[i] += g;
    });
  }
  return out;
}

// Weighted sum of scalar tensors (the loss combiner).
template <class S>
Tensor<S> weighted_sum(Tape<S>* tape, const std::vector<Tensor<S>>& terms,
                       const std::vector<S>& weights) {
  if (terms.size() != weights.size())
    throw ContractError("weighted_sum: term/weight count mismatch");
  bool any_rg = false;
  for (const auto& t : terms) {
    if (t.numel() != 1) throw ContractError("weighted_sum: non-scalar term");
    any_rg = any_rg || t.requires_grad;
  }
  const bool rg = tape && any_rg;
  Tensor<S> out(Shape{1}, rg);
  S acc = S(0);
  for (std::size_t i = 0; i < terms.size(); ++i) acc += weights[i] * terms[i].item();
  out.at(0) = acc;
  if (rg) {
    auto tv = terms;
    auto wv = weights;
    Tensor<S> ov = out;
    tape->record([tv, wv, ov]() mutable {
      for (std::size_t i = 0; i < tv.size(); ++i)
        if (tv[i].requires_grad) tv[i].gptr()[0] += wv[i] * ov.gptr()[0];
    });
  }
  return out;
}

}  // namespace ssa2d
