// Dense row-major tensor of 64-bit reals plus the elementary operations the
// attack stack composes: softmax, cross-entropy, sign, per-position channel
// cosine, l-inf ball projection, and a central finite-difference gradient
// used as the independent oracle for every analytic gradient in the project.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace adaea {

class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(std::vector<std::size_t> shape, double fill = 0.0)
      : shape_(std::move(shape)),
        data_(std::accumulate(shape_.begin(), shape_.end(), std::size_t{1},
                              std::multiplies<>()),
              fill) {
    if (shape_.empty()) throw std::invalid_argument("Tensor: empty shape");
    if (shape_.size() > 4) throw std::invalid_argument("Tensor: rank > 4");
  }

  static Tensor from_data(std::vector<std::size_t> shape,
                          std::vector<double> data) {
    Tensor t(std::move(shape));
    if (t.data_.size() != data.size())
      throw std::invalid_argument("Tensor: shape/data size mismatch");
    t.data_ = std::move(data);
    return t;
  }

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t size() const { return data_.size(); }
  std::size_t rank() const { return shape_.size(); }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  // (C,H,W) indexing for rank-3 tensors
  double& at(std::size_t c, std::size_t h, std::size_t w) {
    return data_[(c * shape_[1] + h) * shape_[2] + w];
  }
  double at(std::size_t c, std::size_t h, std::size_t w) const {
    return data_[(c * shape_[1] + h) * shape_[2] + w];
  }

  // (H,W) indexing for rank-2 tensors
  double& at(std::size_t h, std::size_t w) { return data_[h * shape_[1] + w]; }
  double at(std::size_t h, std::size_t w) const {
    return data_[h * shape_[1] + w];
  }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  bool all_finite() const {
    for (double v : data_)
      if (!std::isfinite(v)) return false;
    return true;
  }

  Tensor& operator+=(const Tensor& o) {
    require_same_shape(o);
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
    return *this;
  }

  Tensor& operator-=(const Tensor& o) {
    require_same_shape(o);
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
    return *this;
  }

  Tensor& operator*=(double s) {
    for (double& v : data_) v *= s;
    return *this;
  }

  friend Tensor operator+(Tensor a, const Tensor& b) { return a += b; }
  friend Tensor operator-(Tensor a, const Tensor& b) { return a -= b; }
  friend Tensor operator*(Tensor a, double s) { return a *= s; }
  friend Tensor operator*(double s, Tensor a) { return a *= s; }

  void require_same_shape(const Tensor& o) const {
    if (!same_shape(o)) throw std::invalid_argument("Tensor: shape mismatch");
  }

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

// Images are (C,H,W) tensors with unit-interval pixels; logits are length-N
// vectors. Kept as aliases, validated at module boundaries.
using Image = Tensor;

inline void require_image(const Tensor& x) {
  if (x.rank() != 3) throw std::invalid_argument("image must be rank 3 (C,H,W)");
}

// Numerically stable softmax (max subtraction).
inline std::vector<double> softmax(const std::vector<double>& v) {
  if (v.empty()) throw std::invalid_argument("softmax: empty input");
  double m = v[0];
  for (double x : v) {
    if (!std::isfinite(x)) throw std::invalid_argument("softmax: non-finite input");
    m = std::max(m, x);
  }
  std::vector<double> out(v.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[i] = std::exp(v[i] - m);
    sum += out[i];
  }
  for (double& x : out) x /= sum;
  return out;
}

// -log softmax(logits)[y]; computed directly from logits so extreme margins
// do not underflow through an intermediate probability.
inline double cross_entropy(const std::vector<double>& logits, std::size_t y) {
  if (y >= logits.size())
    throw std::invalid_argument("cross_entropy: label out of range");
  double m = logits[0];
  for (double x : logits) {
    if (!std::isfinite(x))
      throw std::invalid_argument("cross_entropy: non-finite logit");
    m = std::max(m, x);
  }
  double sum = 0.0;
  for (double x : logits) sum += std::exp(x - m);
  return std::log(sum) - (logits[y] - m);
}

inline double cross_entropy(const Tensor& logits, std::size_t y) {
  return cross_entropy(logits.data(), y);
}

inline Tensor sign_tensor(const Tensor& t) {
  if (!t.all_finite()) throw std::invalid_argument("sign: non-finite input");
  Tensor out(t.shape());
  for (std::size_t i = 0; i < t.size(); ++i) {
    double v = t[i];
    out[i] = (v > 0.0) ? 1.0 : (v < 0.0) ? -1.0 : 0.0;
  }
  return out;
}

// Cosine similarity of the channel vectors a[:,p,q] and b[:,p,q].
// Convention for degenerate vectors: both zero -> 1 (no disagreement),
// exactly one zero -> 0 (no directional information).
inline double channel_cosine(const Tensor& a, const Tensor& b, std::size_t p,
                             std::size_t q) {
  a.require_same_shape(b);
  require_image(a);
  const std::size_t C = a.shape()[0];
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t c = 0; c < C; ++c) {
    double av = a.at(c, p, q), bv = b.at(c, p, q);
    dot += av * bv;
    na += av * av;
    nb += bv * bv;
  }
  if (na == 0.0 && nb == 0.0) return 1.0;
  if (na == 0.0 || nb == 0.0) return 0.0;
  double cosv = dot / (std::sqrt(na) * std::sqrt(nb));
  return std::clamp(cosv, -1.0, 1.0);
}

// Elementwise nearest point inside both the eps-ball around x0 and [0,1].
inline Image clip_to_ball(const Image& x0, const Image& x, double epsilon) {
  x0.require_same_shape(x);
  if (epsilon < 0.0) throw std::invalid_argument("clip_to_ball: epsilon < 0");
  Image out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    double v = std::clamp(x[i], x0[i] - epsilon, x0[i] + epsilon);
    out[i] = std::clamp(v, 0.0, 1.0);
  }
  return out;
}

inline Image clip_to_unit(Image x) {
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::clamp(x[i], 0.0, 1.0);
  return x;
}

// Central-difference gradient; the independent oracle for analytic gradients.
inline Tensor finite_diff_gradient(const std::function<double(const Image&)>& loss,
                                   const Image& x, double h) {
  if (h <= 0.0) throw std::invalid_argument("finite_diff_gradient: h <= 0");
  Tensor grad(x.shape());
  Image probe = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = probe[i];
    probe[i] = orig + h;
    const double up = loss(probe);
    probe[i] = orig - h;
    const double down = loss(probe);
    probe[i] = orig;
    grad[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

inline double linf_distance(const Tensor& a, const Tensor& b) {
  a.require_same_shape(b);
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

inline std::vector<double> onehot_residual(const std::vector<double>& logits,
                                           std::size_t y) {
  std::vector<double> d = softmax(logits);
  d[y] -= 1.0;
  return d;
}

}  // namespace adaea
