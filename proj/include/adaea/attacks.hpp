// Single-model gradient-sign attacks: FGSM, I-FGSM, MI-FGSM, DI2-FGSM.
// These run standalone and provide the base update rule the ensemble
// attacks consume.

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include "models.hpp"
#include "rng.hpp"
#include "tensor.hpp"

namespace adaea {

enum class BaseAttack { Fgsm, IFgsm, MiFgsm, DiFgsm };

inline const char* base_attack_name(BaseAttack b) {
  switch (b) {
    case BaseAttack::Fgsm: return "fgsm";
    case BaseAttack::IFgsm: return "i-fgsm";
    case BaseAttack::MiFgsm: return "mi-fgsm";
    case BaseAttack::DiFgsm: return "di2-fgsm";
  }
  throw std::invalid_argument("unknown base attack");
}

inline BaseAttack base_attack_from_name(const std::string& s) {
  if (s == "fgsm") return BaseAttack::Fgsm;
  if (s == "i-fgsm" || s == "ifgsm") return BaseAttack::IFgsm;
  if (s == "mi-fgsm" || s == "mifgsm") return BaseAttack::MiFgsm;
  if (s == "di2-fgsm" || s == "difgsm") return BaseAttack::DiFgsm;
  throw std::invalid_argument("unknown base attack: " + s);
}

struct AttackConfig {
  double epsilon = 8.0 / 255.0;   // l-inf budget
  double alpha = 2.0 / 255.0;     // step size
  std::size_t iterations = 20;    // T
  double beta = 10.0;             // AGM weighting scale
  double eta = -0.3;              // DRF threshold
  double momentum_decay = 1.0;    // mu (MI-FGSM)
  double di_probability = 0.5;    // DI2 transform probability
  double di_max_enlarge = 1.1;    // DI2 enlarge upper bound
  double gamma_asr = 1e-12;       // ASR denominator guard
  std::uint64_t seed = 7;

  void validate() const {
    if (!(epsilon > 0.0 && epsilon < 1.0))
      throw std::invalid_argument("config: epsilon must be in (0,1)");
    if (!(alpha > 0.0 && alpha <= epsilon))
      throw std::invalid_argument("config: need 0 < alpha <= epsilon");
    if (iterations < 1) throw std::invalid_argument("config: iterations < 1");
    if (eta < -1.0 || eta > 1.0)
      throw std::invalid_argument("config: eta must be in [-1,1]");
    if (momentum_decay < 0.0)
      throw std::invalid_argument("config: momentum decay < 0");
    if (di_probability < 0.0 || di_probability > 1.0)
      throw std::invalid_argument("config: di probability must be in [0,1]");
    if (di_max_enlarge < 1.0)
      throw std::invalid_argument("config: di max enlarge < 1");
    if (gamma_asr <= 0.0) throw std::invalid_argument("config: gamma <= 0");
  }
};

struct AttackState {
  Image x0;
  Image x_adv;
  std::size_t t = 1;
  Tensor momentum;

  AttackState(const Image& original)
      : x0(original), x_adv(original), momentum(original.shape()) {}
};

// One Eq.-style iterate: x <- clip(x + alpha * sign(g)).
inline void iter_step(AttackState& state, const Tensor& g,
                      const AttackConfig& cfg) {
  state.x_adv.require_same_shape(g);
  state.x_adv = clip_to_ball(state.x0, state.x_adv + cfg.alpha * sign_tensor(g),
                             cfg.epsilon);
  ++state.t;
}

// MI accumulation: m <- mu*m + g/||g||_1, returned as the step direction.
// Near-zero gradients skip the normalization so plateaus cannot produce NaN.
inline const Tensor& momentum_update(AttackState& state, const Tensor& g,
                                     const AttackConfig& cfg) {
  double l1 = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) l1 += std::abs(g[i]);
  const double inv = (l1 < 1e-12) ? 1.0 : 1.0 / l1;
  state.momentum *= cfg.momentum_decay;
  for (std::size_t i = 0; i < g.size(); ++i)
    state.momentum[i] += g[i] * inv;
  return state.momentum;
}

// DI2 input diversity: with probability p, nearest-neighbor enlarge to a
// random size in [H, floor(H*maxEnlarge)], then a uniformly random crop back
// to the original (H,W) canvas. Output shape always equals input shape.
inline Image diverse_input_transform(const Image& x, const AttackConfig& cfg,
                                     RngStream& rng) {
  require_image(x);
  if (rng.next_double() >= cfg.di_probability) return x;
  const std::size_t C = x.shape()[0], H = x.shape()[1], W = x.shape()[2];
  const std::size_t h_max =
      static_cast<std::size_t>(double(H) * cfg.di_max_enlarge);
  const std::size_t new_h = H + rng.next_below(h_max - H + 1);
  const std::size_t new_w = (new_h * W) / H;
  const std::size_t off_y = rng.next_below(new_h - H + 1);
  const std::size_t off_x = rng.next_below(new_w - W + 1);
  if (new_h == H && new_w == W) return x;

  Image out(x.shape());
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t y = 0; y < H; ++y) {
      const std::size_t oy = ((y + off_y) * H) / new_h;
      for (std::size_t w = 0; w < W; ++w) {
        const std::size_t ox = ((w + off_x) * W) / new_w;
        out.at(c, y, w) = x.at(c, oy, ox);
      }
    }
  }
  return out;
}

// Single-step FGSM: x + epsilon * sign(grad), clamped to the pixel range.
inline Image fgsm_attack(const Classifier& model, const Image& x, std::size_t y,
                         const AttackConfig& cfg) {
  cfg.validate();
  Tensor g = model.input_gradient(x, y);
  return clip_to_ball(x, x + cfg.epsilon * sign_tensor(g), cfg.epsilon);
}

// Full single-model attack loop for any base rule.
inline Image run_base_attack(const Classifier& model, const Image& x,
                             std::size_t y, const AttackConfig& cfg,
                             BaseAttack base) {
  cfg.validate();
  if (base == BaseAttack::Fgsm) return fgsm_attack(model, x, y, cfg);

  AttackState state(x);
  RngStream rng(cfg.seed);
  for (std::size_t t = 0; t < cfg.iterations; ++t) {
    Tensor g;
    if (base == BaseAttack::DiFgsm) {
      g = model.input_gradient(diverse_input_transform(state.x_adv, cfg, rng), y);
    } else {
      g = model.input_gradient(state.x_adv, y);
    }
    if (base == BaseAttack::MiFgsm) {
      iter_step(state, momentum_update(state, g, cfg), cfg);
    } else {
      iter_step(state, g, cfg);
    }
  }
  return state.x_adv;
}

}  // namespace adaea
