#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <functional>
#include <limits>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "locgan/errors.hpp"
#include "locgan/rng.hpp"

namespace locgan {

/**
 * @brief Dense N-dimensional float32 array with an optional gradient buffer.
 *
 * Tensor is a value type with shared storage: copies are cheap handles to
 * the same data, like shared_ptr. The gradient buffer is allocated lazily
 * the first time a backward pass reaches the tensor; has_grad() reports
 * whether it is present.
 */
class Tensor {
 public:
  Tensor() : s_(std::make_shared<Storage>()) {}

  explicit Tensor(std::vector<int> shape, bool requires_grad = false)
      : s_(std::make_shared<Storage>()) {
    int64_t n = 1;
    for (int d : shape) {
      if (d <= 0) throw DimensionError("tensor dimension must be positive");
      n *= d;
    }
    s_->shape = std::move(shape);
    s_->data.assign(static_cast<size_t>(n), 0.0f);
    s_->requires_grad = requires_grad;
  }

  static Tensor zeros(std::vector<int> shape, bool requires_grad = false) {
    return Tensor(std::move(shape), requires_grad);
  }

  static Tensor full(std::vector<int> shape, float value,
                     bool requires_grad = false) {
    Tensor t(std::move(shape), requires_grad);
    std::fill(t.data(), t.data() + t.numel(), value);
    return t;
  }

  static Tensor ones(std::vector<int> shape, bool requires_grad = false) {
    return full(std::move(shape), 1.0f, requires_grad);
  }

  static Tensor from_vector(std::vector<int> shape, const std::vector<float>& v,
                            bool requires_grad = false) {
    Tensor t(std::move(shape), requires_grad);
    if (static_cast<int64_t>(v.size()) != t.numel())
      throw DimensionError("from_vector: data length does not match shape");
    std::copy(v.begin(), v.end(), t.data());
    return t;
  }

  static Tensor scalar(float value, bool requires_grad = false) {
    return full({1}, value, requires_grad);
  }

  const std::vector<int>& shape() const { return s_->shape; }
  int rank() const { return static_cast<int>(s_->shape.size()); }
  int dim(int i) const { return s_->shape[static_cast<size_t>(i)]; }
  int64_t numel() const { return static_cast<int64_t>(s_->data.size()); }

  float* data() const { return s_->data.data(); }
  const std::vector<float>& vec() const { return s_->data; }

  bool requires_grad() const { return s_->requires_grad; }
  void set_requires_grad(bool rg) { s_->requires_grad = rg; }

  bool has_grad() const { return !s_->grad.empty(); }
  /// Allocate (zeroed) gradient storage if absent, then return it.
  float* ensure_grad() const {
    if (s_->grad.empty()) s_->grad.assign(s_->data.size(), 0.0f);
    return s_->grad.data();
  }
  float* grad() const { return s_->grad.data(); }
  const std::vector<float>& grad_vec() const { return s_->grad; }
  /// Drop the gradient buffer entirely (it becomes "missing", not zero).
  void clear_grad() const { s_->grad.clear(); }
  void zero_grad() const {
    std::fill(s_->grad.begin(), s_->grad.end(), 0.0f);
  }

  float item() const {
    if (numel() != 1) throw ContractError("item() requires a scalar tensor");
    return s_->data[0];
  }

  /// Identical shape test against another tensor.
  bool same_shape(const Tensor& o) const { return s_->shape == o.s_->shape; }

  /// True when both handles point at the same storage.
  bool same_storage(const Tensor& o) const { return s_ == o.s_; }

  // Index helpers for the common ranks.
  float& at2(int i, int j) const {
    return s_->data[static_cast<size_t>(i) * dim(1) + j];
  }
  float& at4(int n, int c, int h, int w) const {
    const int64_t idx =
        ((static_cast<int64_t>(n) * dim(1) + c) * dim(2) + h) * dim(3) + w;
    return s_->data[static_cast<size_t>(idx)];
  }

  /// Deep copy with no autodiff link to the source.
  Tensor detach() const {
    Tensor t(s_->shape, false);
    std::copy(s_->data.begin(), s_->data.end(), t.data());
    return t;
  }

  std::string shape_str() const {
    std::ostringstream os;
    os << '[';
    for (size_t i = 0; i < s_->shape.size(); ++i) {
      if (i) os << 'x';
      os << s_->shape[i];
    }
    os << ']';
    return os.str();
  }

 private:
  struct Storage {
    std::vector<int> shape;
    std::vector<float> data;
    std::vector<float> grad;  // empty == missing
    bool requires_grad = false;
  };
  std::shared_ptr<Storage> s_;
};

/**
 * @brief Records forward operations and replays them in reverse.
 *
 * Each op that participates in differentiation appends one closure; calling
 * backward(loss) seeds d(loss)/d(loss) = 1 and runs the closures in exact
 * reverse order of recording.
 */
class Tape {
 public:
  void record(std::function<void()> step) { steps_.push_back(std::move(step)); }

  size_t size() const { return steps_.size(); }

  void backward(const Tensor& loss) {
    if (loss.numel() != 1)
      throw ContractError("backward requires a scalar loss, got shape " +
                          loss.shape_str());
    loss.ensure_grad()[0] = 1.0f;
    for (auto it = steps_.rbegin(); it != steps_.rend(); ++it) (*it)();
  }

  void clear() { steps_.clear(); }

 private:
  std::vector<std::function<void()>> steps_;
};

inline void backward(const Tensor& loss, Tape& tape) { tape.backward(loss); }

// ---------------------------------------------------------------------------
// matmul micro-kernels (row-major, accumulate into C)
// ---------------------------------------------------------------------------

namespace detail {

/// C[M,N] += A[M,K] * B[K,N]
inline void mm_nn(const float* __restrict__ a, const float* __restrict__ b,
                  float* __restrict__ c, int m, int k, int n) {
  for (int i = 0; i < m; ++i) {
    const float* arow = a + static_cast<int64_t>(i) * k;
    float* crow = c + static_cast<int64_t>(i) * n;
    for (int p = 0; p < k; ++p) {
      const float av = arow[p];
      const float* brow = b + static_cast<int64_t>(p) * n;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

/// C[M,N] += A[M,K] * B[N,K]^T
inline void mm_nt(const float* __restrict__ a, const float* __restrict__ b,
                  float* __restrict__ c, int m, int k, int n) {
  for (int i = 0; i < m; ++i) {
    const float* arow = a + static_cast<int64_t>(i) * k;
    float* crow = c + static_cast<int64_t>(i) * n;
    for (int j = 0; j < n; ++j) {
      const float* brow = b + static_cast<int64_t>(j) * k;
      float acc = 0.0f;
      for (int p = 0; p < k; ++p) acc += arow[p] * brow[p];
      crow[j] += acc;
    }
  }
}

/// C[M,N] += A[K,M]^T * B[K,N]
inline void mm_tn(const float* __restrict__ a, const float* __restrict__ b,
                  float* __restrict__ c, int m, int k, int n) {
  for (int p = 0; p < k; ++p) {
    const float* arow = a + static_cast<int64_t>(p) * m;
    const float* brow = b + static_cast<int64_t>(p) * n;
    for (int i = 0; i < m; ++i) {
      const float av = arow[i];
      float* crow = c + static_cast<int64_t>(i) * n;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

inline int conv_out_dim(int in, int k, int stride, int pad,
                        const char* axis_name) {
  const int span = in + 2 * pad - k;
  if (span < 0)
    throw DimensionError(std::string("conv2d: kernel larger than padded input along ") +
                         axis_name);
  if (span % stride != 0)
    throw DimensionError(
        std::string("conv2d: padding/stride do not yield integer output dims along ") +
        axis_name);
  return span / stride + 1;
}

/// Expand conv patches into a [C*k*k, Ho*Wo] column matrix.
inline void im2col(const float* src, int c_in, int h, int w, int k, int stride,
                   int pad, int ho, int wo, float* cols) {
  const int p_total = ho * wo;
  int row = 0;
  for (int c = 0; c < c_in; ++c) {
    const float* chan = src + static_cast<int64_t>(c) * h * w;
    for (int ki = 0; ki < k; ++ki) {
      for (int kj = 0; kj < k; ++kj, ++row) {
        float* dst = cols + static_cast<int64_t>(row) * p_total;
        for (int oh = 0; oh < ho; ++oh) {
          const int ih = oh * stride - pad + ki;
          float* drow = dst + static_cast<int64_t>(oh) * wo;
          if (ih < 0 || ih >= h) {
            std::fill(drow, drow + wo, 0.0f);
            continue;
          }
          const float* srow = chan + static_cast<int64_t>(ih) * w;
          for (int ow = 0; ow < wo; ++ow) {
            const int iw = ow * stride - pad + kj;
            drow[ow] = (iw >= 0 && iw < w) ? srow[iw] : 0.0f;
          }
        }
      }
    }
  }
}

/// Scatter-add a column matrix back onto the input layout.
inline void col2im_acc(const float* cols, int c_in, int h, int w, int k,
                       int stride, int pad, int ho, int wo, float* dst) {
  const int p_total = ho * wo;
  int row = 0;
  for (int c = 0; c < c_in; ++c) {
    float* chan = dst + static_cast<int64_t>(c) * h * w;
    for (int ki = 0; ki < k; ++ki) {
      for (int kj = 0; kj < k; ++kj, ++row) {
        const float* srcrow = cols + static_cast<int64_t>(row) * p_total;
        for (int oh = 0; oh < ho; ++oh) {
          const int ih = oh * stride - pad + ki;
          if (ih < 0 || ih >= h) continue;
          float* drow = chan + static_cast<int64_t>(ih) * w;
          const float* srow = srcrow + static_cast<int64_t>(oh) * wo;
          for (int ow = 0; ow < wo; ++ow) {
            const int iw = ow * stride - pad + kj;
            if (iw >= 0 && iw < w) drow[iw] += srow[ow];
          }
        }
      }
    }
  }
}

inline bool want_grad(const Tape* tape, std::initializer_list<Tensor> inputs) {
  if (!tape) return false;
  for (const auto& t : inputs)
    if (t.requires_grad()) return true;
  return false;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Operations. Every op takes the tape first; pass nullptr for pure inference.
// ---------------------------------------------------------------------------

/// 2D cross-correlation of input [N,C,H,W] with kernel [F,C,k,k].
/// Optional bias [F] is added per output channel.
inline Tensor conv2d(Tape* tape, const Tensor& input, const Tensor& kernel,
                     int stride, int padding, const Tensor* bias = nullptr) {
  if (input.rank() != 4)
    throw DimensionError("conv2d: input must be rank 4, got " +
                         input.shape_str());
  if (kernel.rank() != 4)
    throw DimensionError("conv2d: kernel must be rank 4, got " +
                         kernel.shape_str());
  const int n = input.dim(0), c_in = input.dim(1), h = input.dim(2),
            w = input.dim(3);
  const int f = kernel.dim(0), kc = kernel.dim(1), kh = kernel.dim(2),
            kw = kernel.dim(3);
  if (kh != kw)
    throw DimensionError("conv2d: kernel must be square, got " +
                         kernel.shape_str());
  const int k = kh;
  if (k != 1 && k != 3 && k != 5 && k != 7)
    throw ContractError("conv2d: kernel size must be one of 1,3,5,7");
  if (kc != c_in)
    throw DimensionError("conv2d: kernel channel axis (" + std::to_string(kc) +
                         ") does not match input channel axis (" +
                         std::to_string(c_in) + ")");
  if (stride < 1) throw ContractError("conv2d: stride must be >= 1");
  if (padding < 0) throw ContractError("conv2d: padding must be >= 0");
  if (bias && (bias->rank() != 1 || bias->dim(0) != f))
    throw DimensionError("conv2d: bias axis must match output channels");

  const int ho = detail::conv_out_dim(h, k, stride, padding, "height");
  const int wo = detail::conv_out_dim(w, k, stride, padding, "width");
  const int kk = c_in * k * k;
  const int pt = ho * wo;

  Tensor out({n, f, ho, wo});
  std::vector<float> cols(static_cast<size_t>(kk) * pt);
  for (int b = 0; b < n; ++b) {
    detail::im2col(input.data() + static_cast<int64_t>(b) * c_in * h * w, c_in,
                   h, w, k, stride, padding, ho, wo, cols.data());
    float* obatch = out.data() + static_cast<int64_t>(b) * f * pt;
    detail::mm_nn(kernel.data(), cols.data(), obatch, f, kk, pt);
    if (bias) {
      const float* bv = bias->data();
      for (int fo = 0; fo < f; ++fo) {
        float* orow = obatch + static_cast<int64_t>(fo) * pt;
        for (int p = 0; p < pt; ++p) orow[p] += bv[fo];
      }
    }
  }

  const bool rg = bias ? detail::want_grad(tape, {input, kernel, *bias})
                       : detail::want_grad(tape, {input, kernel});
  out.set_requires_grad(rg);
  if (rg) {
    Tensor bias_t = bias ? *bias : Tensor();
    const bool has_bias = bias != nullptr;
    tape->record([input, kernel, bias_t, has_bias, out, stride, padding, n,
                  c_in, h, w, f, k, ho, wo, kk, pt]() {
      if (!out.has_grad()) return;
      const float* gout = out.grad();
      std::vector<float> cols(static_cast<size_t>(kk) * pt);
      std::vector<float> colgrad;
      if (input.requires_grad())
        colgrad.resize(static_cast<size_t>(kk) * pt);
      float* gin = input.requires_grad() ? input.ensure_grad() : nullptr;
      float* gker = kernel.requires_grad() ? kernel.ensure_grad() : nullptr;
      for (int b = 0; b < n; ++b) {
        const float* gb = gout + static_cast<int64_t>(b) * f * pt;
        if (gker) {
          detail::im2col(input.data() + static_cast<int64_t>(b) * c_in * h * w,
                         c_in, h, w, k, stride, padding, ho, wo, cols.data());
          detail::mm_nt(gb, cols.data(), gker, f, pt, kk);
        }
        if (gin) {
          std::fill(colgrad.begin(), colgrad.end(), 0.0f);
          detail::mm_tn(kernel.data(), gb, colgrad.data(), kk, f, pt);
          detail::col2im_acc(colgrad.data(), c_in, h, w, k, stride, padding,
                             ho, wo,
                             gin + static_cast<int64_t>(b) * c_in * h * w);
        }
      }
      if (has_bias && bias_t.requires_grad()) {
        float* gbias = bias_t.ensure_grad();
        for (int b = 0; b < n; ++b)
          for (int fo = 0; fo < f; ++fo) {
            const float* grow =
                gout + (static_cast<int64_t>(b) * f + fo) * pt;
            double acc = 0.0;
            for (int p = 0; p < pt; ++p) acc += grow[p];
            gbias[fo] += static_cast<float>(acc);
          }
      }
    });
  }
  return out;
}

/// Affine map of [N,D] by weight [D,M] plus bias [M].
inline Tensor fully_connected(Tape* tape, const Tensor& x, const Tensor& weight,
                              const Tensor& bias) {
  if (x.rank() != 2 || weight.rank() != 2)
    throw DimensionError("fully_connected: input and weight must be rank 2");
  const int n = x.dim(0), d = x.dim(1);
  if (weight.dim(0) != d)
    throw DimensionError("fully_connected: inner axes do not match (input " +
                         x.shape_str() + ", weight " + weight.shape_str() + ")");
  const int m = weight.dim(1);
  if (bias.rank() != 1 || bias.dim(0) != m)
    throw DimensionError("fully_connected: bias axis must match output width");

  Tensor out({n, m});
  detail::mm_nn(x.data(), weight.data(), out.data(), n, d, m);
  for (int i = 0; i < n; ++i) {
    float* orow = out.data() + static_cast<int64_t>(i) * m;
    for (int j = 0; j < m; ++j) orow[j] += bias.data()[j];
  }

  const bool rg = detail::want_grad(tape, {x, weight, bias});
  out.set_requires_grad(rg);
  if (rg) {
    tape->record([x, weight, bias, out, n, d, m]() {
      if (!out.has_grad()) return;
      const float* g = out.grad();
      if (x.requires_grad())
        detail::mm_nt(g, weight.data(), x.ensure_grad(), n, m, d);
      if (weight.requires_grad())
        detail::mm_tn(x.data(), g, weight.ensure_grad(), d, n, m);
      if (bias.requires_grad()) {
        float* gb = bias.ensure_grad();
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < m; ++j) gb[j] += g[static_cast<int64_t>(i) * m + j];
      }
    });
  }
  return out;
}

enum class BnMode { kTrain, kEval };

/// Per-channel batch normalization over [N,C,H,W]. Train mode normalizes by
/// batch statistics and folds them into the running buffers; eval mode reads
/// the running buffers. eps 1e-5, running-stat decay 0.9.
inline Tensor batch_norm(Tape* tape, const Tensor& x, const Tensor& gamma,
                         const Tensor& beta, const Tensor& running_mean,
                         const Tensor& running_var, BnMode mode,
                         float eps = 1e-5f, float momentum = 0.9f) {
  if (x.rank() != 4)
    throw DimensionError("batch_norm: input must be rank 4, got " +
                         x.shape_str());
  const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  if (gamma.numel() != c || beta.numel() != c)
    throw DimensionError("batch_norm: gamma/beta axis (" +
                         std::to_string(static_cast<int>(gamma.numel())) +
                         ") does not match channel axis (" + std::to_string(c) +
                         ")");
  if (running_mean.numel() != c || running_var.numel() != c)
    throw DimensionError("batch_norm: running stats axis does not match channels");
  const int64_t spatial = static_cast<int64_t>(h) * w;
  const int64_t m = static_cast<int64_t>(n) * spatial;
  if (mode == BnMode::kTrain && m <= 1)
    throw ContractError(
        "batch_norm: degenerate statistics, batch*spatial size must exceed 1 "
        "in train mode");

  std::vector<float> mean(static_cast<size_t>(c)), invstd(static_cast<size_t>(c));
  if (mode == BnMode::kTrain) {
    for (int ch = 0; ch < c; ++ch) {
      double acc = 0.0;
      for (int b = 0; b < n; ++b) {
        const float* p = x.data() + (static_cast<int64_t>(b) * c + ch) * spatial;
        for (int64_t i = 0; i < spatial; ++i) acc += p[i];
      }
      const double mu = acc / static_cast<double>(m);
      double vacc = 0.0;
      for (int b = 0; b < n; ++b) {
        const float* p = x.data() + (static_cast<int64_t>(b) * c + ch) * spatial;
        for (int64_t i = 0; i < spatial; ++i) {
          const double d = p[i] - mu;
          vacc += d * d;
        }
      }
      const double var = vacc / static_cast<double>(m);
      mean[ch] = static_cast<float>(mu);
      invstd[ch] = static_cast<float>(1.0 / std::sqrt(var + eps));
      running_mean.data()[ch] = momentum * running_mean.data()[ch] +
                                (1.0f - momentum) * static_cast<float>(mu);
      running_var.data()[ch] = momentum * running_var.data()[ch] +
                               (1.0f - momentum) * static_cast<float>(var);
    }
  } else {
    for (int ch = 0; ch < c; ++ch) {
      mean[ch] = running_mean.data()[ch];
      invstd[ch] =
          static_cast<float>(1.0 / std::sqrt(running_var.data()[ch] + eps));
    }
  }

  Tensor out({n, c, h, w});
  for (int b = 0; b < n; ++b)
    for (int ch = 0; ch < c; ++ch) {
      const float* p = x.data() + (static_cast<int64_t>(b) * c + ch) * spatial;
      float* q = out.data() + (static_cast<int64_t>(b) * c + ch) * spatial;
      const float mu = mean[ch], is = invstd[ch];
      const float ga = gamma.data()[ch], be = beta.data()[ch];
      for (int64_t i = 0; i < spatial; ++i) q[i] = (p[i] - mu) * is * ga + be;
    }

  const bool rg = detail::want_grad(tape, {x, gamma, beta});
  out.set_requires_grad(rg);
  if (rg) {
    const bool train = mode == BnMode::kTrain;
    tape->record([x, gamma, beta, out, mean, invstd, n, c, spatial, m,
                  train]() {
      if (!out.has_grad()) return;
      const float* g = out.grad();
      float* gx = x.requires_grad() ? x.ensure_grad() : nullptr;
      float* gga = gamma.requires_grad() ? gamma.ensure_grad() : nullptr;
      float* gbe = beta.requires_grad() ? beta.ensure_grad() : nullptr;
      for (int ch = 0; ch < c; ++ch) {
        const float mu = mean[static_cast<size_t>(ch)];
        const float is = invstd[static_cast<size_t>(ch)];
        const float ga = gamma.data()[ch];
        double sum_g = 0.0, sum_gx = 0.0;
        for (int b = 0; b < n; ++b) {
          const int64_t off = (static_cast<int64_t>(b) * c + ch) * spatial;
          const float* gp = g + off;
          const float* xp = x.data() + off;
          for (int64_t i = 0; i < spatial; ++i) {
            sum_g += gp[i];
            sum_gx += gp[i] * static_cast<double>((xp[i] - mu) * is);
          }
        }
        if (gga) gga[ch] += static_cast<float>(sum_gx);
        if (gbe) gbe[ch] += static_cast<float>(sum_g);
        if (gx) {
          const float mean_g = static_cast<float>(sum_g / static_cast<double>(m));
          const float mean_gx = static_cast<float>(sum_gx / static_cast<double>(m));
          for (int b = 0; b < n; ++b) {
            const int64_t off = (static_cast<int64_t>(b) * c + ch) * spatial;
            const float* gp = g + off;
            const float* xp = x.data() + off;
            float* gxp = gx + off;
            if (train) {
              for (int64_t i = 0; i < spatial; ++i) {
                const float xhat = (xp[i] - mu) * is;
                gxp[i] += ga * is * (gp[i] - mean_g - xhat * mean_gx);
              }
            } else {
              for (int64_t i = 0; i < spatial; ++i) gxp[i] += ga * is * gp[i];
            }
          }
        }
      }
    });
  }
  return out;
}

inline Tensor relu(Tape* tape, const Tensor& x) {
  Tensor out(x.shape());
  const int64_t n = x.numel();
  for (int64_t i = 0; i < n; ++i)
    out.data()[i] = x.data()[i] > 0.0f ? x.data()[i] : 0.0f;
  const bool rg = detail::want_grad(tape, {x});
  out.set_requires_grad(rg);
  if (rg) {
    tape->record([x, out, n]() {
      if (!out.has_grad()) return;
      float* gx = x.ensure_grad();
      const float* g = out.grad();
      for (int64_t i = 0; i < n; ++i)
        if (x.data()[i] > 0.0f) gx[i] += g[i];
    });
  }
  return out;
}

inline Tensor leaky_relu(Tape* tape, const Tensor& x, float slope = 0.1f) {
  Tensor out(x.shape());
  const int64_t n = x.numel();
  for (int64_t i = 0; i < n; ++i) {
    const float v = x.data()[i];
    out.data()[i] = v > 0.0f ? v : slope * v;
  }
  const bool rg = detail::want_grad(tape, {x});
  out.set_requires_grad(rg);
  if (rg) {
    tape->record([x, out, n, slope]() {
      if (!out.has_grad()) return;
      float* gx = x.ensure_grad();
      const float* g = out.grad();
      for (int64_t i = 0; i < n; ++i)
        gx[i] += (x.data()[i] > 0.0f ? 1.0f : slope) * g[i];
    });
  }
  return out;
}

/// Logistic function, pinned to the open interval (0,1) even where float
/// rounding would saturate.
inline Tensor sigmoid(Tape* tape, const Tensor& x) {
  constexpr float kLo = 1e-30f;
  constexpr float kHi = 1.0f - 6e-8f;  // largest float below 1
  Tensor out(x.shape());
  const int64_t n = x.numel();
  for (int64_t i = 0; i < n; ++i) {
    const float v = 1.0f / (1.0f + std::exp(-x.data()[i]));
    out.data()[i] = std::min(kHi, std::max(kLo, v));
  }
  const bool rg = detail::want_grad(tape, {x});
  out.set_requires_grad(rg);
  if (rg) {
    tape->record([x, out, n]() {
      if (!out.has_grad()) return;
      float* gx = x.ensure_grad();
      const float* g = out.grad();
      for (int64_t i = 0; i < n; ++i) {
        const float s = out.data()[i];
        gx[i] += s * (1.0f - s) * g[i];
      }
    });
  }
  return out;
}

/// Softmax along `axis`, computed with max subtraction. Sums to 1 along the
/// axis for any finite logits.
inline Tensor softmax(Tape* tape, const Tensor& x, int axis) {
  if (axis < 0) axis += x.rank();
  if (axis < 0 || axis >= x.rank())
    throw DimensionError("softmax: axis out of range for " + x.shape_str());
  const int d = x.dim(axis);
  int64_t outer = 1, inner = 1;
  for (int i = 0; i < axis; ++i) outer *= x.dim(i);
  for (int i = axis + 1; i < x.rank(); ++i) inner *= x.dim(i);

  Tensor out(x.shape());
  for (int64_t o = 0; o < outer; ++o)
    for (int64_t in = 0; in < inner; ++in) {
      const int64_t base = o * d * inner + in;
      float mx = -std::numeric_limits<float>::infinity();
      for (int j = 0; j < d; ++j)
        mx = std::max(mx, x.data()[base + j * inner]);
      double sum = 0.0;
      for (int j = 0; j < d; ++j) {
        const float e = std::exp(x.data()[base + j * inner] - mx);
        out.data()[base + j * inner] = e;
        sum += e;
      }
      const float inv = static_cast<float>(1.0 / sum);
      for (int j = 0; j < d; ++j) out.data()[base + j * inner] *= inv;
    }

  const bool rg = detail::want_grad(tape, {x});
  out.set_requires_grad(rg);
  if (rg) {
    tape->record([x, out, outer, inner, d]() {
      if (!out.has_grad()) return;
      float* gx = x.ensure_grad();
      const float* g = out.grad();
      const float* p = out.data();
      for (int64_t o = 0; o < outer; ++o)
        for (int64_t in = 0; in < inner; ++in) {
          const int64_t base = o * d * inner + in;
          double dotgp = 0.0;
          for (int j = 0; j < d; ++j)
            dotgp += static_cast<double>(g[base + j * inner]) * p[base + j * inner];
          for (int j = 0; j < d; ++j) {
            const int64_t idx = base + j * inner;
            gx[idx] += p[idx] * (g[idx] - static_cast<float>(dotgp));
          }
        }
    });
  }
  return out;
}

/// Nearest-neighbor 2x spatial upsampling of [N,C,H,W].
inline Tensor upsample_nearest2x(Tape* tape, const Tensor& x) {
  if (x.rank() != 4)
    throw DimensionError("upsample_nearest2x: input must be rank 4");
  const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  Tensor out({n, c, 2 * h, 2 * w});
  for (int b = 0; b < n; ++b)
    for (int ch = 0; ch < c; ++ch) {
      const float* src = x.data() + (static_cast<int64_t>(b) * c + ch) * h * w;
      float* dst =
          out.data() + (static_cast<int64_t>(b) * c + ch) * 4 * h * w;
      for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j) {
          const float v = src[static_cast<int64_t>(i) * w + j];
          float* d0 = dst + (static_cast<int64_t>(2 * i) * 2 * w + 2 * j);
          d0[0] = v;
          d0[1] = v;
          d0[2 * w] = v;
          d0[2 * w + 1] = v;
        }
    }
  const bool rg = detail::want_grad(tape, {x});
  out.set_requires_grad(rg);
  if (rg) {
    tape->record([x, out, n, c, h, w]() {
      if (!out.has_grad()) return;
      float* gx = x.ensure_grad();
      const float* g = out.grad();
      for (int b = 0; b < n; ++b)
        for (int ch = 0; ch < c; ++ch) {
          const int64_t so = (static_cast<int64_t>(b) * c + ch) * h * w;
          const int64_t go = (static_cast<int64_t>(b) * c + ch) * 4 * h * w;
          for (int i = 0; i < h; ++i)
            for (int j = 0; j < w; ++j) {
              const float* g0 = g + go + (static_cast<int64_t>(2 * i) * 2 * w + 2 * j);
              gx[so + static_cast<int64_t>(i) * w + j] +=
                  g0[0] + g0[1] + g0[2 * w] + g0[2 * w + 1];
            }
        }
    });
  }
  return out;
}

/// Concatenate along the channel axis; a's channels come first.
inline Tensor concat_channels(Tape* tape, const Tensor& a, const Tensor& b) {
  if (a.rank() != 4 || b.rank() != 4)
    throw DimensionError("concat_channels: inputs must be rank 4");
  if (a.dim(0) != b.dim(0))
    throw DimensionError("concat_channels: batch axes differ (" +
                         a.shape_str() + " vs " + b.shape_str() + ")");
  if (a.dim(2) != b.dim(2) || a.dim(3) != b.dim(3))
    throw DimensionError("concat_channels: spatial axes differ (" +
                         a.shape_str() + " vs " + b.shape_str() + ")");
  const int n = a.dim(0), ca = a.dim(1), cb = b.dim(1), h = a.dim(2),
            w = a.dim(3);
  const int64_t spatial = static_cast<int64_t>(h) * w;
  Tensor out({n, ca + cb, h, w});
  for (int bi = 0; bi < n; ++bi) {
    float* dst = out.data() + static_cast<int64_t>(bi) * (ca + cb) * spatial;
    std::memcpy(dst, a.data() + static_cast<int64_t>(bi) * ca * spatial,
                sizeof(float) * ca * spatial);
    std::memcpy(dst + static_cast<int64_t>(ca) * spatial,
                b.data() + static_cast<int64_t>(bi) * cb * spatial,
                sizeof(float) * cb * spatial);
  }
  const bool rg = detail::want_grad(tape, {a, b});
  out.set_requires_grad(rg);
  if (rg) {
    tape->record([a, b, out, n, ca, cb, spatial]() {
      if (!out.has_grad()) return;
      const float* g = out.grad();
      for (int bi = 0; bi < n; ++bi) {
        const float* gsrc = g + static_cast<int64_t>(bi) * (ca + cb) * spatial;
        if (a.requires_grad()) {
          float* ga = a.ensure_grad() + static_cast<int64_t>(bi) * ca * spatial;
          for (int64_t i = 0; i < ca * spatial; ++i) ga[i] += gsrc[i];
        }
        if (b.requires_grad()) {
          float* gb = b.ensure_grad() + static_cast<int64_t>(bi) * cb * spatial;
          const float* gs = gsrc + static_cast<int64_t>(ca) * spatial;
          for (int64_t i = 0; i < cb * spatial; ++i) gb[i] += gs[i];
        }
      }
    });
  }
  return out;
}

/// Upsample `low` by 2x (nearest) and concatenate `skip` after it.
inline Tensor upsample_concat(Tape* tape, const Tensor& low,
                              const Tensor& skip) {
  Tensor up = upsample_nearest2x(tape, low);
  if (up.dim(2) != skip.dim(2) || up.dim(3) != skip.dim(3))
    throw DimensionError("upsample_concat: upsampled spatial dims " +
                         up.shape_str() + " do not match skip " +
                         skip.shape_str());
  return concat_channels(tape, up, skip);
}

inline Tensor add(Tape* tape, const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b))
    throw DimensionError("add: shapes differ (" + a.shape_str() + " vs " +
                         b.shape_str() + ")");
  Tensor out(a.shape());
  const int64_t n = a.numel();
  for (int64_t i = 0; i < n; ++i) out.data()[i] = a.data()[i] + b.data()[i];
  const bool rg = detail::want_grad(tape, {a, b});
  out.set_requires_grad(rg);
  if (rg) {
    tape->record([a, b, out, n]() {
      if (!out.has_grad()) return;
      const float* g = out.grad();
      if (a.requires_grad()) {
        float* ga = a.ensure_grad();
        for (int64_t i = 0; i < n; ++i) ga[i] += g[i];
      }
      if (b.requires_grad()) {
        float* gb = b.ensure_grad();
        for (int64_t i = 0; i < n; ++i) gb[i] += g[i];
      }
    });
  }
  return out;
}

inline Tensor mul(Tape* tape, const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b))
    throw DimensionError("mul: shapes differ (" + a.shape_str() + " vs " +
                         b.shape_str() + ")");
  Tensor out(a.shape());
  const int64_t n = a.numel();
  for (int64_t i = 0; i < n; ++i) out.data()[i] = a.data()[i] * b.data()[i];
  const bool rg = detail::want_grad(tape, {a, b});
  out.set_requires_grad(rg);
  if (rg) {
    tape->record([a, b, out, n]() {
      if (!out.has_grad()) return;
      const float* g = out.grad();
      if (a.requires_grad()) {
        float* ga = a.ensure_grad();
        for (int64_t i = 0; i < n; ++i) ga[i] += g[i] * b.data()[i];
      }
      if (b.requires_grad()) {
        float* gb = b.ensure_grad();
        for (int64_t i = 0; i < n; ++i) gb[i] += g[i] * a.data()[i];
      }
    });
  }
  return out;
}

inline Tensor scale(Tape* tape, const Tensor& x, float factor) {
  Tensor out(x.shape());
  const int64_t n = x.numel();
  for (int64_t i = 0; i < n; ++i) out.data()[i] = x.data()[i] * factor;
  const bool rg = detail::want_grad(tape, {x});
  out.set_requires_grad(rg);
  if (rg) {
    tape->record([x, out, n, factor]() {
      if (!out.has_grad()) return;
      float* gx = x.ensure_grad();
      const float* g = out.grad();
      for (int64_t i = 0; i < n; ++i) gx[i] += factor * g[i];
    });
  }
  return out;
}

/// Sum of all entries, accumulated in double, returned as a scalar tensor.
inline Tensor sum_all(Tape* tape, const Tensor& x) {
  double acc = 0.0;
  const int64_t n = x.numel();
  for (int64_t i = 0; i < n; ++i) acc += x.data()[i];
  Tensor out = Tensor::scalar(static_cast<float>(acc));
  const bool rg = detail::want_grad(tape, {x});
  out.set_requires_grad(rg);
  if (rg) {
    tape->record([x, out, n]() {
      if (!out.has_grad()) return;
      const float g = out.grad()[0];
      float* gx = x.ensure_grad();
      for (int64_t i = 0; i < n; ++i) gx[i] += g;
    });
  }
  return out;
}

inline Tensor mean_all(Tape* tape, const Tensor& x) {
  const float inv = 1.0f / static_cast<float>(x.numel());
  return scale(tape, sum_all(tape, x), inv);
}

/// Global average pool: [N,C,H,W] -> [N,C].
inline Tensor mean_spatial(Tape* tape, const Tensor& x) {
  if (x.rank() != 4)
    throw DimensionError("mean_spatial: input must be rank 4");
  const int n = x.dim(0), c = x.dim(1);
  const int64_t spatial = static_cast<int64_t>(x.dim(2)) * x.dim(3);
  Tensor out({n, c});
  for (int b = 0; b < n; ++b)
    for (int ch = 0; ch < c; ++ch) {
      const float* p = x.data() + (static_cast<int64_t>(b) * c + ch) * spatial;
      double acc = 0.0;
      for (int64_t i = 0; i < spatial; ++i) acc += p[i];
      out.at2(b, ch) = static_cast<float>(acc / static_cast<double>(spatial));
    }
  const bool rg = detail::want_grad(tape, {x});
  out.set_requires_grad(rg);
  if (rg) {
    tape->record([x, out, n, c, spatial]() {
      if (!out.has_grad()) return;
      const float* g = out.grad();
      float* gx = x.ensure_grad();
      const float inv = 1.0f / static_cast<float>(spatial);
      for (int b = 0; b < n; ++b)
        for (int ch = 0; ch < c; ++ch) {
          const float gv = g[static_cast<int64_t>(b) * c + ch] * inv;
          float* gp = gx + (static_cast<int64_t>(b) * c + ch) * spatial;
          for (int64_t i = 0; i < spatial; ++i) gp[i] += gv;
        }
    });
  }
  return out;
}

/// Copy into a new shape with the same element count.
inline Tensor reshape(Tape* tape, const Tensor& x, std::vector<int> shape) {
  Tensor out(std::move(shape));
  if (out.numel() != x.numel())
    throw DimensionError("reshape: element count mismatch (" + x.shape_str() +
                         " -> " + out.shape_str() + ")");
  std::memcpy(out.data(), x.data(), sizeof(float) * x.numel());
  const bool rg = detail::want_grad(tape, {x});
  out.set_requires_grad(rg);
  if (rg) {
    const int64_t n = x.numel();
    tape->record([x, out, n]() {
      if (!out.has_grad()) return;
      float* gx = x.ensure_grad();
      const float* g = out.grad();
      for (int64_t i = 0; i < n; ++i) gx[i] += g[i];
    });
  }
  return out;
}

/// Binary cross-entropy of probabilities `p` against targets `g`, summed over
/// all entries. Probabilities are clamped to [1e-7, 1-1e-7] before the logs;
/// the sum is accumulated in double.
inline Tensor bce_sum(Tape* tape, const Tensor& p, const Tensor& target) {
  if (!p.same_shape(target))
    throw DimensionError("bce_sum: shapes differ (" + p.shape_str() + " vs " +
                         target.shape_str() + ")");
  constexpr float kEps = 1e-7f;
  const int64_t n = p.numel();
  double acc = 0.0;
  for (int64_t i = 0; i < n; ++i) {
    const double pc = std::min(1.0f - kEps, std::max(kEps, p.data()[i]));
    const double t = target.data()[i];
    acc -= t * std::log(pc) + (1.0 - t) * std::log(1.0 - pc);
  }
  Tensor out = Tensor::scalar(static_cast<float>(acc));
  const bool rg = detail::want_grad(tape, {p});
  out.set_requires_grad(rg);
  if (rg) {
    tape->record([p, target, out, n]() {
      if (!out.has_grad()) return;
      constexpr float eps = 1e-7f;
      const float g = out.grad()[0];
      float* gp = p.ensure_grad();
      for (int64_t i = 0; i < n; ++i) {
        const float pc = std::min(1.0f - eps, std::max(eps, p.data()[i]));
        const float t = target.data()[i];
        gp[i] += g * (pc - t) / (pc * (1.0f - pc));
      }
    });
  }
  return out;
}

/// Cross-entropy between softmax(logits) rows and target probability rows,
/// summed over the batch. Gradient w.r.t. logits is softmax - target.
inline Tensor softmax_xent(Tape* tape, const Tensor& logits,
                           const Tensor& target) {
  if (logits.rank() != 2 || !logits.same_shape(target))
    throw DimensionError("softmax_xent: logits and target must share a rank-2 shape");
  const int n = logits.dim(0), d = logits.dim(1);
  Tensor probs({n, d});
  double acc = 0.0;
  for (int i = 0; i < n; ++i) {
    const float* lr = logits.data() + static_cast<int64_t>(i) * d;
    const float* tr = target.data() + static_cast<int64_t>(i) * d;
    float* pr = probs.data() + static_cast<int64_t>(i) * d;
    float mx = -std::numeric_limits<float>::infinity();
    for (int j = 0; j < d; ++j) mx = std::max(mx, lr[j]);
    double sum = 0.0;
    for (int j = 0; j < d; ++j) {
      pr[j] = std::exp(lr[j] - mx);
      sum += pr[j];
    }
    const double lse = std::log(sum) + mx;
    const float inv = static_cast<float>(1.0 / sum);
    for (int j = 0; j < d; ++j) {
      acc += static_cast<double>(tr[j]) * (lse - lr[j]);
      pr[j] *= inv;
    }
  }
  Tensor out = Tensor::scalar(static_cast<float>(acc));
  const bool rg = detail::want_grad(tape, {logits});
  out.set_requires_grad(rg);
  if (rg) {
    tape->record([logits, target, probs, out, n, d]() {
      if (!out.has_grad()) return;
      const float g = out.grad()[0];
      float* gl = logits.ensure_grad();
      for (int64_t i = 0; i < static_cast<int64_t>(n) * d; ++i)
        gl[i] += g * (probs.data()[i] - target.data()[i]);
    });
  }
  return out;
}

/// Fill with N(0, stddev) draws from `rng`.
inline void fill_normal(const Tensor& t, Rng& rng, double stddev) {
  const int64_t n = t.numel();
  for (int64_t i = 0; i < n; ++i)
    t.data()[i] = static_cast<float>(rng.normal() * stddev);
}

inline void fill_uniform(const Tensor& t, Rng& rng, double lo, double hi) {
  const int64_t n = t.numel();
  for (int64_t i = 0; i < n; ++i)
    t.data()[i] = static_cast<float>(rng.uniform(lo, hi));
}

}  // namespace locgan
