// Test-only independent oracle: straight-line re-implementations of every
// zoo forward pass in extended precision, used for golden vectors and as
// the loss function behind the finite-difference gradient checks. Written
// against the documented parameter layout, not the model code paths.

#pragma once

#include <cmath>
#include <vector>

#include "adaea/models.hpp"

namespace adaea_test {

using adaea::ArchId;
using adaea::Classifier;
using adaea::Image;

inline std::vector<long double> ref_linear(const Classifier& m, const Image& x) {
  const auto& P = m.params();
  const std::size_t D = m.input_shape().size(), K = m.num_classes();
  std::vector<long double> z(K);
  for (std::size_t k = 0; k < K; ++k) {
    long double acc = P[1].value[k];
    for (std::size_t d = 0; d < D; ++d)
      acc += (long double)P[0].value.data()[k * D + d] * (long double)x.data()[d];
    z[k] = acc;
  }
  return z;
}

inline std::vector<long double> ref_mlp(const Classifier& m, const Image& x) {
  const auto& P = m.params();
  const std::size_t D = m.input_shape().size(), K = m.num_classes(), H = 64;
  std::vector<long double> h(H);
  for (std::size_t i = 0; i < H; ++i) {
    long double acc = P[1].value[i];
    for (std::size_t d = 0; d < D; ++d)
      acc += (long double)P[0].value.data()[i * D + d] * (long double)x.data()[d];
    h[i] = acc > 0.0L ? acc : 0.0L;
  }
  std::vector<long double> z(K);
  for (std::size_t k = 0; k < K; ++k) {
    long double acc = P[3].value[k];
    for (std::size_t i = 0; i < H; ++i)
      acc += (long double)P[2].value.data()[k * H + i] * h[i];
    z[k] = acc;
  }
  return z;
}

inline std::vector<long double> ref_smallconv(const Classifier& m,
                                              const Image& x) {
  const auto& P = m.params();
  const std::size_t C = x.shape()[0], H = x.shape()[1], W = x.shape()[2];
  const std::size_t C1 = 8, C2 = 16, K = m.num_classes();
  auto conv = [&](const std::vector<long double>& in, std::size_t cin,
                  const adaea::Tensor& Wt, const adaea::Tensor& bt,
                  std::size_t cout) {
    std::vector<long double> out(cout * H * W);
    for (std::size_t o = 0; o < cout; ++o)
      for (std::size_t y = 0; y < H; ++y)
        for (std::size_t xx = 0; xx < W; ++xx) {
          long double acc = bt[o];
          for (std::size_t c = 0; c < cin; ++c)
            for (int dy = -1; dy <= 1; ++dy)
              for (int dx = -1; dx <= 1; ++dx) {
                const int yy = int(y) + dy, xw = int(xx) + dx;
                if (yy < 0 || yy >= int(H) || xw < 0 || xw >= int(W)) continue;
                acc += (long double)Wt.data()[((o * cin + c) * 3 + dy + 1) * 3 + dx + 1] *
                       in[(c * H + yy) * W + xw];
              }
          out[(o * H + y) * W + xx] = acc > 0.0L ? acc : 0.0L;
        }
    return out;
  };
  std::vector<long double> xin(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) xin[i] = x.data()[i];
  auto h1 = conv(xin, C, P[0].value, P[1].value, C1);
  auto h2 = conv(h1, C1, P[2].value, P[3].value, C2);
  std::vector<long double> pool(C2, 0.0L);
  for (std::size_t o = 0; o < C2; ++o) {
    for (std::size_t i = 0; i < H * W; ++i) pool[o] += h2[o * H * W + i];
    pool[o] /= (long double)(H * W);
  }
  std::vector<long double> z(K);
  for (std::size_t k = 0; k < K; ++k) {
    long double acc = P[5].value[k];
    for (std::size_t o = 0; o < C2; ++o)
      acc += (long double)P[4].value.data()[k * C2 + o] * pool[o];
    z[k] = acc;
  }
  return z;
}

inline std::vector<long double> ref_tinyattention(const Classifier& m,
                                                  const Image& x) {
  const auto& P = m.params();
  const std::size_t C = x.shape()[0], H = x.shape()[1], W = x.shape()[2];
  const std::size_t patch = 4, E = 32, K = m.num_classes();
  const std::size_t ph = H / patch, pw = W / patch, Pn = ph * pw;
  const std::size_t pd = C * patch * patch;

  std::vector<long double> X(Pn * E);
  for (std::size_t p = 0; p < Pn; ++p) {
    std::vector<long double> pv(pd);
    const std::size_t py = (p / pw) * patch, px = (p % pw) * patch;
    std::size_t i = 0;
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t y = 0; y < patch; ++y)
        for (std::size_t xx = 0; xx < patch; ++xx)
          pv[i++] = x.at(c, py + y, px + xx);
    for (std::size_t e = 0; e < E; ++e) {
      long double acc = P[1].value[e];
      for (std::size_t d = 0; d < pd; ++d)
        acc += (long double)P[0].value.data()[e * pd + d] * pv[d];
      X[p * E + e] = acc;
    }
  }

  auto project = [&](const adaea::Tensor& Wt) {
    std::vector<long double> out(Pn * E, 0.0L);
    for (std::size_t p = 0; p < Pn; ++p)
      for (std::size_t r = 0; r < E; ++r) {
        long double acc = 0.0L;
        for (std::size_t c = 0; c < E; ++c)
          acc += (long double)Wt.data()[r * E + c] * X[p * E + c];
        out[p * E + r] = acc;
      }
    return out;
  };
  auto Q = project(P[2].value), Km = project(P[3].value), V = project(P[4].value);

  const long double scale = 1.0L / std::sqrt((long double)E);
  std::vector<long double> pool(E, 0.0L);
  for (std::size_t i = 0; i < Pn; ++i) {
    std::vector<long double> s(Pn);
    long double mx = -1e30L;
    for (std::size_t j = 0; j < Pn; ++j) {
      long double dot = 0.0L;
      for (std::size_t e = 0; e < E; ++e) dot += Q[i * E + e] * Km[j * E + e];
      s[j] = dot * scale;
      if (s[j] > mx) mx = s[j];
    }
    long double sum = 0.0L;
    for (std::size_t j = 0; j < Pn; ++j) {
      s[j] = std::exp(s[j] - mx);
      sum += s[j];
    }
    for (std::size_t e = 0; e < E; ++e) {
      long double o = X[i * E + e];
      for (std::size_t j = 0; j < Pn; ++j)
        o += (s[j] / sum) * V[j * E + e];
      pool[e] += o;
    }
  }
  for (long double& v : pool) v /= (long double)Pn;

  std::vector<long double> z(K);
  for (std::size_t k = 0; k < K; ++k) {
    long double acc = P[6].value[k];
    for (std::size_t e = 0; e < E; ++e)
      acc += (long double)P[5].value.data()[k * E + e] * pool[e];
    z[k] = acc;
  }
  return z;
}

inline std::vector<long double> ref_forward(const Classifier& m, const Image& x) {
  switch (m.arch()) {
    case ArchId::Linear: return ref_linear(m, x);
    case ArchId::Mlp: return ref_mlp(m, x);
    case ArchId::SmallConv: return ref_smallconv(m, x);
    case ArchId::TinyAttention: return ref_tinyattention(m, x);
  }
  throw std::logic_error("unknown arch");
}

inline long double ref_cross_entropy(const std::vector<long double>& z,
                                     std::size_t y) {
  long double mx = z[0];
  for (long double v : z) mx = std::max(mx, v);
  long double sum = 0.0L;
  for (long double v : z) sum += std::exp(v - mx);
  return std::log(sum) - (z[y] - mx);
}

inline long double ref_loss(const Classifier& m, const Image& x, std::size_t y) {
  return ref_cross_entropy(ref_forward(m, x), y);
}

// Central-difference gradient of the extended-precision reference loss.
inline adaea::Tensor ref_fd_gradient(const Classifier& m, const Image& x,
                                     std::size_t y, double h) {
  adaea::Tensor g(x.shape());
  Image probe = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = probe[i];
    probe[i] = orig + h;
    const long double up = ref_loss(m, probe, y);
    probe[i] = orig - h;
    const long double down = ref_loss(m, probe, y);
    probe[i] = orig;
    g[i] = double((up - down) / (2.0L * h));
  }
  return g;
}

}  // namespace adaea_test
