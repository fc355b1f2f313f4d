// Toy differentiable classifier zoo. Four architectures spanning the
// CNN-vs-attention divide, each with a hand-rolled forward pass, analytic
// input gradients, and full parameter backprop for mini-batch training.
// All gradients are checked against central finite differences in the tests.

#pragma once

#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "dataset.hpp"
#include "rng.hpp"
#include "tensor.hpp"

namespace adaea {

enum class ArchId : std::uint32_t {
  Linear = 0,
  Mlp = 1,
  SmallConv = 2,
  TinyAttention = 3,
};

inline const char* arch_name(ArchId a) {
  switch (a) {
    case ArchId::Linear: return "linear";
    case ArchId::Mlp: return "mlp";
    case ArchId::SmallConv: return "smallconv";
    case ArchId::TinyAttention: return "tinyattention";
  }
  throw std::invalid_argument("unknown architecture id");
}

inline ArchId arch_from_name(const std::string& s) {
  if (s == "linear") return ArchId::Linear;
  if (s == "mlp") return ArchId::Mlp;
  if (s == "smallconv") return ArchId::SmallConv;
  if (s == "tinyattention") return ArchId::TinyAttention;
  throw std::invalid_argument("unknown architecture: " + s);
}

struct Shape3 {
  std::size_t c = 3, h = 16, w = 16;
  std::size_t size() const { return c * h * w; }
  std::vector<std::size_t> vec() const { return {c, h, w}; }
  bool matches(const Tensor& t) const {
    return t.rank() == 3 && t.shape()[0] == c && t.shape()[1] == h &&
           t.shape()[2] == w;
  }
};

struct NamedParam {
  std::string name;
  Tensor value;
};

class Classifier {
 public:
  Classifier(ArchId arch, std::string name, Shape3 input_shape,
             std::size_t num_classes)
      : arch_(arch),
        name_(std::move(name)),
        input_shape_(input_shape),
        num_classes_(num_classes) {
    if (num_classes < 2) throw std::invalid_argument("num_classes < 2");
  }
  virtual ~Classifier() = default;

  ArchId arch() const { return arch_; }
  const std::string& name() const { return name_; }
  void set_name(std::string n) { name_ = std::move(n); }
  Shape3 input_shape() const { return input_shape_; }
  std::size_t num_classes() const { return num_classes_; }

  std::vector<double> forward(const Image& x) const {
    require_input(x);
    return forward_impl(x);
  }

  // dL/dx for upstream logit cotangent dlogits; linear in dlogits.
  Tensor input_grad_from_logit_grad(const Image& x,
                                    const std::vector<double>& dlogits) const {
    require_input(x);
    Tensor dx(input_shape_.vec());
    backprop(x, dlogits, &dx, nullptr);
    return dx;
  }

  // Analytic gradient of cross_entropy(forward(x), y) w.r.t. x.
  Tensor input_gradient(const Image& x, std::size_t y) const {
    require_input(x);
    if (y >= num_classes_) throw std::invalid_argument("label out of range");
    return input_grad_from_logit_grad(x, onehot_residual(forward_impl(x), y));
  }

  // Parameter gradients of the cross-entropy loss, accumulated into dparams
  // (aligned with params(); caller zero-initializes).
  void accumulate_param_grads(const Image& x, std::size_t y,
                              std::vector<Tensor>& dparams) const {
    require_input(x);
    backprop(x, onehot_residual(forward_impl(x), y), nullptr, &dparams);
  }

  virtual std::vector<NamedParam>& params() = 0;
  virtual const std::vector<NamedParam>& params() const = 0;

  std::unique_ptr<Classifier> clone() const;

 protected:
  virtual std::vector<double> forward_impl(const Image& x) const = 0;
  // Computes dx and/or accumulates dparams for logit cotangent dlogits.
  virtual void backprop(const Image& x, const std::vector<double>& dlogits,
                        Tensor* dx, std::vector<Tensor>* dparams) const = 0;

  void require_input(const Image& x) const {
    if (!input_shape_.matches(x))
      throw std::invalid_argument("input shape mismatch for model " + name_);
  }

 private:
  ArchId arch_;
  std::string name_;
  Shape3 input_shape_;
  std::size_t num_classes_;
};

namespace detail {

// y += W * x   for W (rows, cols), x (cols)
inline void matvec_add(const Tensor& W, const double* x, double* y) {
  const std::size_t rows = W.shape()[0], cols = W.shape()[1];
  const double* w = W.data().data();
  for (std::size_t r = 0; r < rows; ++r) {
    double acc = 0.0;
    const double* row = w + r * cols;
    for (std::size_t c = 0; c < cols; ++c) acc += row[c] * x[c];
    y[r] += acc;
  }
}

// x_grad += W^T * dy
inline void matvec_t_add(const Tensor& W, const double* dy, double* x_grad) {
  const std::size_t rows = W.shape()[0], cols = W.shape()[1];
  const double* w = W.data().data();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = w + r * cols;
    for (std::size_t c = 0; c < cols; ++c) x_grad[c] += row[c] * dy[r];
  }
}

// dW += dy * x^T
inline void outer_add(Tensor& dW, const double* dy, const double* x) {
  const std::size_t rows = dW.shape()[0], cols = dW.shape()[1];
  double* w = dW.data().data();
  for (std::size_t r = 0; r < rows; ++r) {
    double* row = w + r * cols;
    for (std::size_t c = 0; c < cols; ++c) row[c] += dy[r] * x[c];
  }
}

inline void init_matrix(Tensor& W, RngStream& rng, double scale) {
  for (double& v : W.data()) v = scale * rng.normal();
}

// 3x3 same-padding convolution, stride 1. in (Cin,H,W), W (Cout,Cin,3,3).
inline void conv3x3_forward(const Tensor& in, const Tensor& W, const Tensor& b,
                            Tensor& out) {
  const std::size_t Cin = in.shape()[0], H = in.shape()[1], Wd = in.shape()[2];
  const std::size_t Cout = W.shape()[0];
  for (std::size_t co = 0; co < Cout; ++co) {
    for (std::size_t y = 0; y < H; ++y) {
      for (std::size_t x = 0; x < Wd; ++x) {
        double acc = b[co];
        for (std::size_t ci = 0; ci < Cin; ++ci) {
          for (int ky = -1; ky <= 1; ++ky) {
            const int iy = static_cast<int>(y) + ky;
            if (iy < 0 || iy >= static_cast<int>(H)) continue;
            for (int kx = -1; kx <= 1; ++kx) {
              const int ix = static_cast<int>(x) + kx;
              if (ix < 0 || ix >= static_cast<int>(Wd)) continue;
              acc += W.data()[((co * Cin + ci) * 3 + (ky + 1)) * 3 + (kx + 1)] *
                     in.at(ci, static_cast<std::size_t>(iy),
                           static_cast<std::size_t>(ix));
            }
          }
        }
        out.at(co, y, x) = acc;
      }
    }
  }
}

inline void conv3x3_backward(const Tensor& in, const Tensor& W,
                             const Tensor& dout, Tensor* din, Tensor* dW,
                             Tensor* db) {
  const std::size_t Cin = in.shape()[0], H = in.shape()[1], Wd = in.shape()[2];
  const std::size_t Cout = W.shape()[0];
  for (std::size_t co = 0; co < Cout; ++co) {
    for (std::size_t y = 0; y < H; ++y) {
      for (std::size_t x = 0; x < Wd; ++x) {
        const double g = dout.at(co, y, x);
        if (db) (*db)[co] += g;
        for (std::size_t ci = 0; ci < Cin; ++ci) {
          for (int ky = -1; ky <= 1; ++ky) {
            const int iy = static_cast<int>(y) + ky;
            if (iy < 0 || iy >= static_cast<int>(H)) continue;
            for (int kx = -1; kx <= 1; ++kx) {
              const int ix = static_cast<int>(x) + kx;
              if (ix < 0 || ix >= static_cast<int>(Wd)) continue;
              const std::size_t widx =
                  ((co * Cin + ci) * 3 + (ky + 1)) * 3 + (kx + 1);
              if (dW)
                dW->data()[widx] += g * in.at(ci, static_cast<std::size_t>(iy),
                                              static_cast<std::size_t>(ix));
              if (din)
                din->at(ci, static_cast<std::size_t>(iy),
                        static_cast<std::size_t>(ix)) += g * W.data()[widx];
            }
          }
        }
      }
    }
  }
}

inline void relu_inplace(Tensor& t) {
  for (double& v : t.data())
    if (v < 0.0) v = 0.0;
}

}  // namespace detail

// ---- Linear: flatten -> affine -------------------------------------------

class LinearModel final : public Classifier {
 public:
  LinearModel(Shape3 in, std::size_t classes, std::uint64_t seed,
              std::string name = "linear")
      : Classifier(ArchId::Linear, std::move(name), in, classes) {
    const std::size_t d = in.size();
    params_.push_back({"W", Tensor({classes, d})});
    params_.push_back({"b", Tensor({classes})});
    RngStream rng(seed);
    detail::init_matrix(params_[0].value, rng, 1.0 / std::sqrt(double(d)));
  }

  std::vector<NamedParam>& params() override { return params_; }
  const std::vector<NamedParam>& params() const override { return params_; }

 protected:
  std::vector<double> forward_impl(const Image& x) const override {
    std::vector<double> z(num_classes());
    for (std::size_t k = 0; k < z.size(); ++k) z[k] = params_[1].value[k];
    detail::matvec_add(params_[0].value, x.data().data(), z.data());
    return z;
  }

  void backprop(const Image& x, const std::vector<double>& dz, Tensor* dx,
                std::vector<Tensor>* dp) const override {
    if (dx) detail::matvec_t_add(params_[0].value, dz.data(), dx->data().data());
    if (dp) {
      detail::outer_add((*dp)[0], dz.data(), x.data().data());
      for (std::size_t k = 0; k < dz.size(); ++k) (*dp)[1][k] += dz[k];
    }
  }

 private:
  std::vector<NamedParam> params_;
};

// ---- Mlp: flatten -> 64 ReLU -> affine -----------------------------------

class MlpModel final : public Classifier {
 public:
  static constexpr std::size_t kHidden = 64;

  MlpModel(Shape3 in, std::size_t classes, std::uint64_t seed,
           std::string name = "mlp")
      : Classifier(ArchId::Mlp, std::move(name), in, classes) {
    const std::size_t d = in.size();
    params_.push_back({"W1", Tensor({kHidden, d})});
    params_.push_back({"b1", Tensor({kHidden})});
    params_.push_back({"W2", Tensor({classes, kHidden})});
    params_.push_back({"b2", Tensor({classes})});
    RngStream rng(seed);
    detail::init_matrix(params_[0].value, rng, std::sqrt(2.0 / double(d)));
    detail::init_matrix(params_[2].value, rng, std::sqrt(2.0 / double(kHidden)));
  }

  std::vector<NamedParam>& params() override { return params_; }
  const std::vector<NamedParam>& params() const override { return params_; }

 protected:
  std::vector<double> forward_impl(const Image& x) const override {
    std::vector<double> h(kHidden);
    hidden_pre(x, h.data());
    for (double& v : h) v = std::max(v, 0.0);
    std::vector<double> z(num_classes());
    for (std::size_t k = 0; k < z.size(); ++k) z[k] = params_[3].value[k];
    detail::matvec_add(params_[2].value, h.data(), z.data());
    return z;
  }

  void backprop(const Image& x, const std::vector<double>& dz, Tensor* dx,
                std::vector<Tensor>* dp) const override {
    std::vector<double> a(kHidden);
    hidden_pre(x, a.data());
    std::vector<double> h(kHidden);
    for (std::size_t i = 0; i < kHidden; ++i) h[i] = std::max(a[i], 0.0);

    std::vector<double> dh(kHidden, 0.0);
    detail::matvec_t_add(params_[2].value, dz.data(), dh.data());
    // ReLU subgradient at 0 is 0
    for (std::size_t i = 0; i < kHidden; ++i)
      if (a[i] <= 0.0) dh[i] = 0.0;

    if (dp) {
      detail::outer_add((*dp)[2], dz.data(), h.data());
      for (std::size_t k = 0; k < dz.size(); ++k) (*dp)[3][k] += dz[k];
      detail::outer_add((*dp)[0], dh.data(), x.data().data());
      for (std::size_t i = 0; i < kHidden; ++i) (*dp)[1][i] += dh[i];
    }
    if (dx) detail::matvec_t_add(params_[0].value, dh.data(), dx->data().data());
  }

 private:
  void hidden_pre(const Image& x, double* a) const {
    for (std::size_t i = 0; i < kHidden; ++i) a[i] = params_[1].value[i];
    detail::matvec_add(params_[0].value, x.data().data(), a);
  }

  std::vector<NamedParam> params_;
};

// ---- SmallConv: conv3x3(8) ReLU -> conv3x3(16) ReLU -> GAP -> affine -----

class SmallConvModel final : public Classifier {
 public:
  static constexpr std::size_t kC1 = 8;
  static constexpr std::size_t kC2 = 16;

  SmallConvModel(Shape3 in, std::size_t classes, std::uint64_t seed,
                 std::string name = "smallconv")
      : Classifier(ArchId::SmallConv, std::move(name), in, classes) {
    params_.push_back({"conv1.W", Tensor({kC1, in.c, 3, 3})});
    params_.push_back({"conv1.b", Tensor({kC1})});
    params_.push_back({"conv2.W", Tensor({kC2, kC1, 3, 3})});
    params_.push_back({"conv2.b", Tensor({kC2})});
    params_.push_back({"head.W", Tensor({classes, kC2})});
    params_.push_back({"head.b", Tensor({classes})});
    RngStream rng(seed);
    detail::init_matrix(params_[0].value, rng, std::sqrt(2.0 / (in.c * 9.0)));
    detail::init_matrix(params_[2].value, rng, std::sqrt(2.0 / (kC1 * 9.0)));
    detail::init_matrix(params_[4].value, rng, std::sqrt(2.0 / double(kC2)));
  }

  std::vector<NamedParam>& params() override { return params_; }
  const std::vector<NamedParam>& params() const override { return params_; }

 protected:
  std::vector<double> forward_impl(const Image& x) const override {
    Cache c;
    run_forward(x, c);
    return c.logits;
  }

  void backprop(const Image& x, const std::vector<double>& dz, Tensor* dx,
                std::vector<Tensor>* dp) const override {
    const Shape3 in = input_shape();
    Cache c;
    run_forward(x, c);
    const double inv_hw = 1.0 / double(in.h * in.w);

    std::vector<double> dpool(kC2, 0.0);
    detail::matvec_t_add(params_[4].value, dz.data(), dpool.data());
    if (dp) {
      detail::outer_add((*dp)[4], dz.data(), c.pool.data());
      for (std::size_t k = 0; k < dz.size(); ++k) (*dp)[5][k] += dz[k];
    }

    Tensor da2({kC2, in.h, in.w});
    for (std::size_t ch = 0; ch < kC2; ++ch)
      for (std::size_t y = 0; y < in.h; ++y)
        for (std::size_t xx = 0; xx < in.w; ++xx)
          da2.at(ch, y, xx) =
              (c.a2.at(ch, y, xx) > 0.0) ? dpool[ch] * inv_hw : 0.0;

    Tensor dh1({kC1, in.h, in.w});
    detail::conv3x3_backward(c.h1, params_[2].value, da2, &dh1,
                             dp ? &(*dp)[2] : nullptr,
                             dp ? &(*dp)[3] : nullptr);
    for (std::size_t i = 0; i < dh1.size(); ++i)
      if (c.a1[i] <= 0.0) dh1[i] = 0.0;

    detail::conv3x3_backward(x, params_[0].value, dh1, dx,
                             dp ? &(*dp)[0] : nullptr,
                             dp ? &(*dp)[1] : nullptr);
  }

 private:
  struct Cache {
    Tensor a1, h1, a2;  // pre/post ReLU activations
    std::vector<double> pool;
    std::vector<double> logits;
  };

  void run_forward(const Image& x, Cache& c) const {
    const Shape3 in = input_shape();
    c.a1 = Tensor({kC1, in.h, in.w});
    detail::conv3x3_forward(x, params_[0].value, params_[1].value, c.a1);
    c.h1 = c.a1;
    detail::relu_inplace(c.h1);
    c.a2 = Tensor({kC2, in.h, in.w});
    detail::conv3x3_forward(c.h1, params_[2].value, params_[3].value, c.a2);
    Tensor h2 = c.a2;
    detail::relu_inplace(h2);
    c.pool.assign(kC2, 0.0);
    const double inv_hw = 1.0 / double(in.h * in.w);
    for (std::size_t ch = 0; ch < kC2; ++ch) {
      double acc = 0.0;
      for (std::size_t y = 0; y < in.h; ++y)
        for (std::size_t xx = 0; xx < in.w; ++xx) acc += h2.at(ch, y, xx);
      c.pool[ch] = acc * inv_hw;
    }
    c.logits.assign(num_classes(), 0.0);
    for (std::size_t k = 0; k < c.logits.size(); ++k)
      c.logits[k] = params_[5].value[k];
    detail::matvec_add(params_[4].value, c.pool.data(), c.logits.data());
  }

  std::vector<NamedParam> params_;
};

// ---- TinyAttention: 4x4 patchify -> embed 32 -> single-head SA -> pool ---

class TinyAttentionModel final : public Classifier {
 public:
  static constexpr std::size_t kPatch = 4;
  static constexpr std::size_t kEmbed = 32;

  TinyAttentionModel(Shape3 in, std::size_t classes, std::uint64_t seed,
                     std::string name = "tinyattention")
      : Classifier(ArchId::TinyAttention, std::move(name), in, classes) {
    if (in.h % kPatch != 0 || in.w % kPatch != 0)
      throw std::invalid_argument("tinyattention: H and W must be multiples of 4");
    const std::size_t pd = in.c * kPatch * kPatch;
    params_.push_back({"embed.W", Tensor({kEmbed, pd})});
    params_.push_back({"embed.b", Tensor({kEmbed})});
    params_.push_back({"attn.Wq", Tensor({kEmbed, kEmbed})});
    params_.push_back({"attn.Wk", Tensor({kEmbed, kEmbed})});
    params_.push_back({"attn.Wv", Tensor({kEmbed, kEmbed})});
    params_.push_back({"head.W", Tensor({classes, kEmbed})});
    params_.push_back({"head.b", Tensor({classes})});
    RngStream rng(seed);
    detail::init_matrix(params_[0].value, rng, 1.0 / std::sqrt(double(pd)));
    for (int i = 2; i <= 4; ++i)
      detail::init_matrix(params_[i].value, rng, 1.0 / std::sqrt(double(kEmbed)));
    detail::init_matrix(params_[5].value, rng, 1.0 / std::sqrt(double(kEmbed)));
  }

  std::vector<NamedParam>& params() override { return params_; }
  const std::vector<NamedParam>& params() const override { return params_; }

 protected:
  std::vector<double> forward_impl(const Image& x) const override {
    Cache c;
    run_forward(x, c);
    return c.logits;
  }

  void backprop(const Image& x, const std::vector<double>& dz, Tensor* dx,
                std::vector<Tensor>* dp) const override {
    Cache c;
    run_forward(x, c);
    const std::size_t P = num_patches();
    const std::size_t E = kEmbed;
    const double scale = 1.0 / std::sqrt(double(E));

    std::vector<double> dpool(E, 0.0);
    detail::matvec_t_add(params_[5].value, dz.data(), dpool.data());
    if (dp) {
      detail::outer_add((*dp)[5], dz.data(), c.pool.data());
      for (std::size_t k = 0; k < dz.size(); ++k) (*dp)[6][k] += dz[k];
    }

    // Y = X + A V W-chain; pool = mean_p Y[p]
    std::vector<double> dY(P * E);
    for (std::size_t p = 0; p < P; ++p)
      for (std::size_t e = 0; e < E; ++e) dY[p * E + e] = dpool[e] / double(P);

    std::vector<double> dX = dY;  // residual branch

    // attention branch: O = A V, dO = dY
    std::vector<double> dV(P * E, 0.0), dA(P * P, 0.0);
    for (std::size_t i = 0; i < P; ++i)
      for (std::size_t j = 0; j < P; ++j) {
        const double a = c.A[i * P + j];
        double dot = 0.0;
        for (std::size_t e = 0; e < E; ++e) {
          dV[j * E + e] += a * dY[i * E + e];
          dot += dY[i * E + e] * c.V[j * E + e];
        }
        dA[i * P + j] = dot;
      }

    // softmax rows backward
    std::vector<double> dS(P * P);
    for (std::size_t i = 0; i < P; ++i) {
      double row_dot = 0.0;
      for (std::size_t j = 0; j < P; ++j)
        row_dot += dA[i * P + j] * c.A[i * P + j];
      for (std::size_t j = 0; j < P; ++j)
        dS[i * P + j] = c.A[i * P + j] * (dA[i * P + j] - row_dot);
    }

    std::vector<double> dQ(P * E, 0.0), dK(P * E, 0.0);
    for (std::size_t i = 0; i < P; ++i)
      for (std::size_t j = 0; j < P; ++j) {
        const double s = dS[i * P + j] * scale;
        for (std::size_t e = 0; e < E; ++e) {
          dQ[i * E + e] += s * c.K[j * E + e];
          dK[j * E + e] += s * c.Q[i * E + e];
        }
      }

    // Q = X Wq^T etc.: dX += dQ Wq, dWq += dQ^T X
    auto proj_back = [&](const std::vector<double>& dOut, const Tensor& W,
                         Tensor* dW) {
      for (std::size_t p = 0; p < P; ++p) {
        detail::matvec_t_add(W, dOut.data() + p * E, dX.data() + p * E);
        if (dW) detail::outer_add(*dW, dOut.data() + p * E, c.X.data() + p * E);
      }
    };
    proj_back(dQ, params_[2].value, dp ? &(*dp)[2] : nullptr);
    proj_back(dK, params_[3].value, dp ? &(*dp)[3] : nullptr);
    proj_back(dV, params_[4].value, dp ? &(*dp)[4] : nullptr);

    // embed backward and patch scatter
    const std::size_t pd = patch_dim();
    std::vector<double> dpatch(pd);
    for (std::size_t p = 0; p < P; ++p) {
      std::fill(dpatch.begin(), dpatch.end(), 0.0);
      detail::matvec_t_add(params_[0].value, dX.data() + p * E, dpatch.data());
      if (dp) {
        detail::outer_add((*dp)[0], dX.data() + p * E, c.patches.data() + p * pd);
        for (std::size_t e = 0; e < E; ++e)
          (*dp)[1][e] += dX[p * E + e];
      }
      if (dx) scatter_patch(*dx, p, dpatch.data());
    }
  }

 private:
  struct Cache {
    std::vector<double> patches;  // P x pd
    std::vector<double> X;        // P x E tokens
    std::vector<double> Q, K, V;  // P x E
    std::vector<double> A;        // P x P attention rows
    std::vector<double> pool;     // E
    std::vector<double> logits;
  };

  std::size_t num_patches() const {
    const Shape3 in = input_shape();
    return (in.h / kPatch) * (in.w / kPatch);
  }
  std::size_t patch_dim() const { return input_shape().c * kPatch * kPatch; }

  void gather_patch(const Image& x, std::size_t p, double* out) const {
    const Shape3 in = input_shape();
    const std::size_t pw = in.w / kPatch;
    const std::size_t py = (p / pw) * kPatch, px = (p % pw) * kPatch;
    std::size_t i = 0;
    for (std::size_t c = 0; c < in.c; ++c)
      for (std::size_t y = 0; y < kPatch; ++y)
        for (std::size_t xx = 0; xx < kPatch; ++xx)
          out[i++] = x.at(c, py + y, px + xx);
  }

  void scatter_patch(Tensor& dx, std::size_t p, const double* grad) const {
    const Shape3 in = input_shape();
    const std::size_t pw = in.w / kPatch;
    const std::size_t py = (p / pw) * kPatch, px = (p % pw) * kPatch;
    std::size_t i = 0;
    for (std::size_t c = 0; c < in.c; ++c)
      for (std::size_t y = 0; y < kPatch; ++y)
        for (std::size_t xx = 0; xx < kPatch; ++xx)
          dx.at(c, py + y, px + xx) += grad[i++];
  }

  void run_forward(const Image& x, Cache& c) const {
    const std::size_t P = num_patches();
    const std::size_t E = kEmbed;
    const std::size_t pd = patch_dim();
    const double scale = 1.0 / std::sqrt(double(E));

    c.patches.assign(P * pd, 0.0);
    c.X.assign(P * E, 0.0);
    for (std::size_t p = 0; p < P; ++p) {
      gather_patch(x, p, c.patches.data() + p * pd);
      for (std::size_t e = 0; e < E; ++e)
        c.X[p * E + e] = params_[1].value[e];
      detail::matvec_add(params_[0].value, c.patches.data() + p * pd,
                         c.X.data() + p * E);
    }

    c.Q.assign(P * E, 0.0);
    c.K.assign(P * E, 0.0);
    c.V.assign(P * E, 0.0);
    for (std::size_t p = 0; p < P; ++p) {
      detail::matvec_add(params_[2].value, c.X.data() + p * E, c.Q.data() + p * E);
      detail::matvec_add(params_[3].value, c.X.data() + p * E, c.K.data() + p * E);
      detail::matvec_add(params_[4].value, c.X.data() + p * E, c.V.data() + p * E);
    }

    c.A.assign(P * P, 0.0);
    std::vector<double> row(P);
    for (std::size_t i = 0; i < P; ++i) {
      for (std::size_t j = 0; j < P; ++j) {
        double dot = 0.0;
        for (std::size_t e = 0; e < E; ++e)
          dot += c.Q[i * E + e] * c.K[j * E + e];
        row[j] = dot * scale;
      }
      std::vector<double> a = softmax(row);
      for (std::size_t j = 0; j < P; ++j) c.A[i * P + j] = a[j];
    }

    // Y = X + A V; pool = mean over patches
    c.pool.assign(E, 0.0);
    for (std::size_t i = 0; i < P; ++i) {
      for (std::size_t e = 0; e < E; ++e) {
        double o = c.X[i * E + e];
        for (std::size_t j = 0; j < P; ++j)
          o += c.A[i * P + j] * c.V[j * E + e];
        c.pool[e] += o;
      }
    }
    for (double& v : c.pool) v /= double(P);

    c.logits.assign(num_classes(), 0.0);
    for (std::size_t k = 0; k < c.logits.size(); ++k)
      c.logits[k] = params_[6].value[k];
    detail::matvec_add(params_[5].value, c.pool.data(), c.logits.data());
  }

  std::vector<NamedParam> params_;
};

inline std::unique_ptr<Classifier> make_classifier(ArchId arch, Shape3 in,
                                                   std::size_t classes,
                                                   std::uint64_t seed,
                                                   std::string name = "") {
  std::unique_ptr<Classifier> m;
  switch (arch) {
    case ArchId::Linear: m = std::make_unique<LinearModel>(in, classes, seed); break;
    case ArchId::Mlp: m = std::make_unique<MlpModel>(in, classes, seed); break;
    case ArchId::SmallConv: m = std::make_unique<SmallConvModel>(in, classes, seed); break;
    case ArchId::TinyAttention: m = std::make_unique<TinyAttentionModel>(in, classes, seed); break;
  }
  if (!m) throw std::invalid_argument("unknown architecture id");
  if (!name.empty()) m->set_name(std::move(name));
  return m;
}

inline std::unique_ptr<Classifier> Classifier::clone() const {
  auto copy = make_classifier(arch_, input_shape_, num_classes_, 0, name_);
  auto& dst = copy->params();
  const auto& src = params();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i].value = src[i].value;
  return copy;
}

// ---- training -------------------------------------------------------------

struct TrainResult {
  double final_accuracy = 0.0;
  double final_loss = 0.0;
};

inline std::size_t predict(const Classifier& m, const Image& x) {
  std::vector<double> z = m.forward(x);
  std::size_t best = 0;
  for (std::size_t k = 1; k < z.size(); ++k)
    if (z[k] > z[best]) best = k;
  return best;
}

inline double accuracy(const Classifier& m, const LabeledDataset& ds) {
  if (ds.size() == 0) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < ds.size(); ++i)
    if (predict(m, ds.images[i]) == ds.labels[i]) ++hits;
  return double(hits) / double(ds.size());
}

// Plain mini-batch gradient descent, batch 32, deterministic shuffle per
// epoch derived from seed.
inline TrainResult train_toy(Classifier& model, const LabeledDataset& data,
                             std::size_t epochs, double learning_rate,
                             std::uint64_t seed) {
  if (data.size() == 0) throw std::invalid_argument("train_toy: empty dataset");
  if (epochs < 1) throw std::invalid_argument("train_toy: epochs < 1");
  constexpr std::size_t kBatch = 32;

  auto& params = model.params();
  std::vector<Tensor> grads, m1, m2;
  for (const auto& p : params) {
    grads.emplace_back(p.value.shape());
    m1.emplace_back(p.value.shape());
    m2.emplace_back(p.value.shape());
  }

  std::vector<std::size_t> order(data.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  // Adam: small signal-to-scale ratios in the pooled features make plain
  // SGD impractically slow on the conv and attention models.
  constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kAdamEps = 1e-8;
  std::size_t step = 0;
  double last_loss = 0.0;
  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    RngStream rng(derive_seed(seed, epoch));
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[rng.next_below(i)]);

    last_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += kBatch) {
      const std::size_t end = std::min(start + kBatch, order.size());
      for (Tensor& g : grads)
        std::fill(g.data().begin(), g.data().end(), 0.0);
      for (std::size_t i = start; i < end; ++i) {
        const std::size_t idx = order[i];
        model.accumulate_param_grads(data.images[idx], data.labels[idx], grads);
        last_loss += cross_entropy(model.forward(data.images[idx]),
                                   data.labels[idx]);
      }
      ++step;
      const double batch = double(end - start);
      const double bc1 = 1.0 - std::pow(kBeta1, double(step));
      const double bc2 = 1.0 - std::pow(kBeta2, double(step));
      for (std::size_t p = 0; p < params.size(); ++p)
        for (std::size_t j = 0; j < grads[p].size(); ++j) {
          const double g = grads[p][j] / batch;
          m1[p][j] = kBeta1 * m1[p][j] + (1.0 - kBeta1) * g;
          m2[p][j] = kBeta2 * m2[p][j] + (1.0 - kBeta2) * g * g;
          params[p].value[j] -= learning_rate * (m1[p][j] / bc1) /
                                (std::sqrt(m2[p][j] / bc2) + kAdamEps);
        }
    }
    last_loss /= double(data.size());
  }
  return {accuracy(model, data), last_loss};
}

// ---- zoo ------------------------------------------------------------------

struct ZooSpec {
  std::vector<ArchId> archs;
  Shape3 input_shape;
  std::size_t num_classes = 4;
};

// Distinct per-model seeds derived from the master seed; duplicate
// architectures get distinct weights and a numeric name suffix.
inline std::vector<std::unique_ptr<Classifier>> build_zoo(const ZooSpec& spec,
                                                          std::uint64_t seed) {
  if (spec.archs.empty()) throw std::invalid_argument("build_zoo: empty spec");
  std::vector<std::unique_ptr<Classifier>> zoo;
  std::vector<std::size_t> arch_counts(4, 0);
  for (std::size_t i = 0; i < spec.archs.size(); ++i) {
    ArchId a = spec.archs[i];
    auto m = make_classifier(a, spec.input_shape, spec.num_classes,
                             derive_seed(seed, 100 + i));
    std::size_t n = arch_counts[static_cast<std::size_t>(a)]++;
    if (n > 0) m->set_name(std::string(arch_name(a)) + "-" + std::to_string(n));
    zoo.push_back(std::move(m));
  }
  return zoo;
}

}  // namespace adaea
