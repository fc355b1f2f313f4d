// Adaptive model-ensemble attack core: adversarial-ratio weighting (AGM),
// disparity-reduced filtering (DRF), the masked ensemble gradient, the full
// adaptive attack loop with ablation switches, the equal-weight ensemble
// baseline, and the two-model fixed-weight sweep variant.

#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "attacks.hpp"
#include "models.hpp"
#include "tensor.hpp"

namespace adaea {

struct GradientStack {
  std::vector<Tensor> grads;
  std::vector<std::string> model_names;

  std::size_t size() const { return grads.size(); }

  void validate() const {
    if (grads.empty()) throw std::invalid_argument("gradient stack empty");
    for (const Tensor& g : grads) g.require_same_shape(grads[0]);
  }
};

struct EnsembleWeights {
  std::vector<double> w;
};

struct DisparityMap {
  Tensor d;  // (H, W), entries in [-1, 1]
};

struct BinaryFilter {
  Tensor b;  // (H, W), entries in {0, 1}
};

struct ProbeMatrix {
  std::size_t k = 0;
  std::vector<double> s;  // row-major K x K; entry (k, i)

  double& at(std::size_t row, std::size_t col) { return s[row * k + col]; }
  double at(std::size_t row, std::size_t col) const { return s[row * k + col]; }
};

using ModelList = std::vector<const Classifier*>;

// s[k][i]: loss of model k on the one-step probe built from model i's
// gradient sign. Probe inputs clamp to [0,1] only; no ball re-projection.
inline ProbeMatrix probe_loss(const ModelList& models, const Image& x_adv,
                              std::size_t y, const GradientStack& grads,
                              double alpha) {
  if (models.size() != grads.size())
    throw std::invalid_argument("probe_loss: model/gradient count mismatch");
  grads.validate();
  const std::size_t K = models.size();
  ProbeMatrix s;
  s.k = K;
  s.s.assign(K * K, 0.0);
  for (std::size_t i = 0; i < K; ++i) {
    Image probe = clip_to_unit(x_adv + alpha * sign_tensor(grads.grads[i]));
    for (std::size_t k = 0; k < K; ++k)
      s.at(k, i) = cross_entropy(models[k]->forward(probe), y);
  }
  return s;
}

// rho_i = (beta / (K-1)) * sum_{k != i} s[k][i] / s[k][k], with the
// self-loss guarded away from zero. K=1 degenerates to [beta].
inline std::vector<double> adversarial_ratio(const ProbeMatrix& s, double beta) {
  const std::size_t K = s.k;
  if (K == 0) throw std::invalid_argument("adversarial_ratio: empty matrix");
  if (K == 1) return {beta};
  constexpr double kDivGuard = 1e-12;
  std::vector<double> rho(K, 0.0);
  for (std::size_t i = 0; i < K; ++i) {
    double acc = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
      if (k == i) continue;
      acc += s.at(k, i) / std::max(s.at(k, k), kDivGuard);
    }
    rho[i] = beta / double(K - 1) * acc;
  }
  return rho;
}

inline EnsembleWeights agm_weights(const std::vector<double>& rho) {
  return {softmax(rho)};
}

// Per-position mean pairwise channel cosine: d = (1/K) sum_i d_i where
// d_i averages cos(g_i, g_k) over k != i.
inline DisparityMap disparity_map(const GradientStack& grads) {
  grads.validate();
  const std::size_t K = grads.size();
  if (K < 2) throw std::invalid_argument("disparity_map: need K >= 2");
  const std::size_t H = grads.grads[0].shape()[1];
  const std::size_t W = grads.grads[0].shape()[2];
  Tensor d({H, W});
  for (std::size_t p = 0; p < H; ++p) {
    for (std::size_t q = 0; q < W; ++q) {
      double total = 0.0;
      for (std::size_t i = 0; i < K; ++i) {
        double di = 0.0;
        for (std::size_t k = 0; k < K; ++k) {
          if (k == i) continue;
          di += channel_cosine(grads.grads[i], grads.grads[k], p, q);
        }
        total += di / double(K - 1);
      }
      d.at(p, q) = total / double(K);
    }
  }
  return {std::move(d)};
}

inline BinaryFilter binary_filter(const DisparityMap& d, double eta) {
  if (eta < -1.0 || eta > 1.0)
    throw std::invalid_argument("binary_filter: eta out of [-1,1]");
  Tensor b(d.d.shape());
  for (std::size_t i = 0; i < b.size(); ++i)
    b[i] = (d.d[i] <= eta) ? 0.0 : 1.0;
  return {std::move(b)};
}

inline BinaryFilter all_ones_filter(std::size_t h, std::size_t w) {
  return {Tensor({h, w}, 1.0)};
}

// Gradient of the fused-logit cross-entropy, masked by the spatial filter
// broadcast over channels. Linearity of backprop in the logit cotangent
// turns the fused gradient into a weighted sum of per-model backward passes.
inline Tensor ensemble_gradient(const ModelList& models, const Image& x_adv,
                                std::size_t y, const EnsembleWeights& weights,
                                const BinaryFilter& filter) {
  if (models.empty()) throw std::invalid_argument("ensemble_gradient: no models");
  if (weights.w.size() != models.size())
    throw std::invalid_argument("ensemble_gradient: weight count mismatch");
  require_image(x_adv);
  const std::size_t K = models.size();

  std::vector<std::vector<double>> logits(K);
  std::vector<double> fused(models[0]->num_classes(), 0.0);
  for (std::size_t k = 0; k < K; ++k) {
    logits[k] = models[k]->forward(x_adv);
    for (std::size_t j = 0; j < fused.size(); ++j)
      fused[j] += weights.w[k] * logits[k][j];
  }
  std::vector<double> dl = onehot_residual(fused, y);

  Tensor g(x_adv.shape());
  for (std::size_t k = 0; k < K; ++k) {
    Tensor gk = models[k]->input_grad_from_logit_grad(x_adv, dl);
    gk *= weights.w[k];
    g += gk;
  }

  const std::size_t C = x_adv.shape()[0], H = x_adv.shape()[1],
                    W = x_adv.shape()[2];
  if (filter.b.shape()[0] != H || filter.b.shape()[1] != W)
    throw std::invalid_argument("ensemble_gradient: filter shape mismatch");
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t p = 0; p < H; ++p)
      for (std::size_t q = 0; q < W; ++q)
        g.at(c, p, q) *= filter.b.at(p, q);
  return g;
}

struct Ablation {
  bool use_agm = true;
  bool use_drf = true;
};

// The full adaptive loop. Per iteration: per-model gradients (on the
// DI-transformed input for the DI2 base) -> AGM weights (uniform when
// disabled) -> DRF filter (all-ones when disabled or K=1) -> masked fused
// gradient -> base update -> projection onto the eps-ball and pixel range.
// fixed_weights, when given, bypasses AGM entirely (weight-sweep variant).
inline Image ada_ea_attack(const ModelList& models, const Image& x,
                           std::size_t y, const AttackConfig& cfg,
                           BaseAttack base, Ablation ablation = {},
                           const std::vector<double>* fixed_weights = nullptr) {
  cfg.validate();
  if (models.empty()) throw std::invalid_argument("ada_ea_attack: no models");
  require_image(x);
  const std::size_t K = models.size();
  const std::size_t H = x.shape()[1], W = x.shape()[2];

  AttackState state(x);
  RngStream rng(cfg.seed);
  const std::size_t T = (base == BaseAttack::Fgsm) ? 1 : cfg.iterations;
  const double step = (base == BaseAttack::Fgsm) ? cfg.epsilon : cfg.alpha;

  for (std::size_t t = 0; t < T; ++t) {
    Image xin = (base == BaseAttack::DiFgsm)
                    ? diverse_input_transform(state.x_adv, cfg, rng)
                    : state.x_adv;

    GradientStack grads;
    for (std::size_t k = 0; k < K; ++k) {
      grads.grads.push_back(models[k]->input_gradient(xin, y));
      grads.model_names.push_back(models[k]->name());
    }

    EnsembleWeights weights;
    if (fixed_weights) {
      weights.w = *fixed_weights;
    } else if (ablation.use_agm && K >= 2) {
      weights = agm_weights(
          adversarial_ratio(probe_loss(models, xin, y, grads, cfg.alpha),
                            cfg.beta));
    } else {
      weights.w.assign(K, 1.0 / double(K));
    }

    BinaryFilter filter = (ablation.use_drf && K >= 2)
                              ? binary_filter(disparity_map(grads), cfg.eta)
                              : all_ones_filter(H, W);

    Tensor g_ens = ensemble_gradient(models, xin, y, weights, filter);

    AttackConfig step_cfg = cfg;
    step_cfg.alpha = step;
    if (base == BaseAttack::MiFgsm) {
      iter_step(state, momentum_update(state, g_ens, cfg), step_cfg);
    } else {
      iter_step(state, g_ens, step_cfg);
    }
  }
  return state.x_adv;
}

// Fixed-weight two-model ensemble (the supplementary weight sweep); w1 is
// the weight of the first model, no AGM/DRF.
inline Image weight_sweep_attack(const ModelList& models, const Image& x,
                                 std::size_t y, const AttackConfig& cfg,
                                 BaseAttack base, double w1) {
  if (models.size() != 2)
    throw std::invalid_argument("weight_sweep_attack: exactly two models required");
  if (w1 < 0.0 || w1 > 1.0)
    throw std::invalid_argument("weight_sweep_attack: w1 out of [0,1]");
  std::vector<double> w{w1, 1.0 - w1};
  return ada_ea_attack(models, x, y, cfg, base, {false, false}, &w);
}

}  // namespace adaea
