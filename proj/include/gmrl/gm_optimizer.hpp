#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gmrl/errors.hpp"
#include "gmrl/nn.hpp"
#include "gmrl/tensor.hpp"

namespace gmrl {

// Gradient Monitoring variants. `wogm` is the unmodified Adam baseline.
enum class GmVariant { wogm, f_wgm, u_wgm, m_wgm, am_wgm };

inline std::string_view to_string(GmVariant v) {
  switch (v) {
    case GmVariant::wogm: return "wogm";
    case GmVariant::f_wgm: return "f_wgm";
    case GmVariant::u_wgm: return "u_wgm";
    case GmVariant::m_wgm: return "m_wgm";
    case GmVariant::am_wgm: return "am_wgm";
  }
  return "?";
}

inline GmVariant variant_from_string(std::string_view name) {
  for (auto v : {GmVariant::wogm, GmVariant::f_wgm, GmVariant::u_wgm, GmVariant::m_wgm,
                 GmVariant::am_wgm}) {
    if (to_string(v) == name) return v;
  }
  throw LookupError("unknown GM variant '" + std::string(name) + "'");
}

inline bool is_vanilla(GmVariant v) { return v == GmVariant::f_wgm || v == GmVariant::u_wgm; }
inline bool is_momentum(GmVariant v) { return v == GmVariant::m_wgm || v == GmVariant::am_wgm; }

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct GmConfig {
  GmVariant variant = GmVariant::wogm;
  double lambda = 0.5;          // learning factor scaling the per-layer mean threshold
  double zeta = 0.999;          // masking momentum
  std::uint64_t eta_start = 0;  // first schedule point
  std::uint64_t eta_repeat = 1; // schedule period
  double alpha_lambda = 0.001;  // adaptive step of lambda (am_wgm)
  double momentum_init = 1.0;   // initial value of every momentum-matrix entry
  bool mask_biases = false;

  void validate() const {
    if (!(lambda >= 0.0 && lambda <= 1.0)) throw ConfigError("gm.lambda", "must lie in [0, 1]");
    if (!(zeta >= 0.0 && zeta <= 1.0)) throw ConfigError("gm.zeta", "must lie in [0, 1]");
    if (!(alpha_lambda > 0.0)) throw ConfigError("gm.alpha_lambda", "must be positive");
    if (eta_repeat < 1) throw ConfigError("gm.eta_repeat", "must be at least 1");
    if (!(momentum_init >= 0.0 && momentum_init <= 1.0)) {
      throw ConfigError("gm.momentum_init", "must lie in [0, 1]");
    }
  }
};

struct AdamMoments {
  Matrix m;
  Matrix v;
};

struct AdamState {
  std::vector<AdamMoments> slots;
  std::uint64_t t = 0;
};

struct GmSlot {
  Matrix mask;      // binary, valid when has_mask
  Matrix momentum;  // entries in [0, 1], momentum variants only
  bool has_mask = false;
};

struct GmState {
  std::vector<GmSlot> slots;
  double lambda = 0.5;
  std::uint64_t eta = 0;
  std::uint64_t recomputations = 0;
  std::optional<std::uint64_t> last_mask_eta;
  std::optional<std::uint64_t> last_adapt_eta;
  // Adaptive-threshold controller memory.
  bool has_reference = false;
  double reward_old = 0.0;
  double phi_old = 1.0;
  std::vector<double> reward_window;
};

/// One row of optimizer diagnostics, produced after every update.
struct GmMetrics {
  double abs_grad_sum = 0.0;  // sum of |applied direction| over every parameter
  double active_pct = 100.0;  // mean effective mask over maskable entries, in percent
  double lambda = 0.0;
};

/// Adam step direction m_hat / (sqrt(v_hat) + eps); updates the moments in place.
/// `t` is the 1-based step count after increment.
inline Matrix adam_direction(const Matrix& grad, AdamMoments& moments, std::uint64_t t,
                             const AdamConfig& cfg) {
  require_same_shape(grad, moments.m, "adam_direction");
  if (!grad.all_finite()) throw NumericError("adam_direction: non-finite gradient");
  const double td = static_cast<double>(t);
  const double bc1 = 1.0 - std::pow(cfg.beta1, td);
  const double bc2 = 1.0 - std::pow(cfg.beta2, td);
  Matrix dir(grad.rows(), grad.cols());
  for (std::size_t i = 0; i < grad.size(); ++i) {
    const double g = grad[i];
    moments.m[i] = cfg.beta1 * moments.m[i] + (1.0 - cfg.beta1) * g;
    moments.v[i] = cfg.beta2 * moments.v[i] + (1.0 - cfg.beta2) * g * g;
    const double m_hat = moments.m[i] / bc1;
    const double v_hat = moments.v[i] / bc2;
    dir[i] = m_hat / (std::sqrt(v_hat) + cfg.epsilon);
  }
  return dir;
}

inline constexpr double kDecisionGuard = 1e-12;

/// Learning-significance score |direction / weight|, guarded against zero weights.
inline Matrix decision_matrix(const Matrix& direction, const Matrix& weights) {
  require_same_shape(direction, weights, "decision_matrix");
  Matrix d(direction.rows(), direction.cols());
  for (std::size_t i = 0; i < d.size(); ++i) {
    d[i] = std::abs(direction[i]) / (std::abs(weights[i]) + kDecisionGuard);
  }
  return d;
}

inline double layer_threshold(const Matrix& decision) { return mean(decision); }

/// Heaviside mask H(D - lambda * mu) with H(0) = 1.
inline Matrix compute_mask(const Matrix& decision, double lambda, double mu) {
  if (!(lambda >= 0.0)) throw DomainError("compute_mask: lambda must be non-negative");
  const double cut = lambda * mu;
  Matrix mask(decision.rows(), decision.cols());
  for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = decision[i] >= cut ? 1.0 : 0.0;
  return mask;
}

/// M_zeta <- M_zeta * zeta + M * (1 - zeta)
inline void update_momentum(Matrix& momentum, const Matrix& mask, double zeta) {
  require_same_shape(momentum, mask, "update_momentum");
  const double keep = 1.0 - zeta;
  for (std::size_t i = 0; i < momentum.size(); ++i) {
    momentum[i] = momentum[i] * zeta + mask[i] * keep;
  }
}

/// Mean per-step reward over an adaptation window.
inline double episode_reward_mean(std::span<const double> rewards) {
  if (rewards.empty()) throw StateError("episode_reward_mean: empty reward window");
  double s = 0.0;
  for (double r : rewards) s += r;
  return s / static_cast<double>(rewards.size());
}

/// Reward-driven threshold controller. Returns the applied change (-1 or +1).
///
/// The ratio phi = R_n / R_o is only meaningful for a positive reference; for
/// R_o <= 0 improvement is judged directly by R_n >= R_o and phi resets to 1.
/// The first call adopts R_n as its own reference.
inline int adapt_lambda(double reward_new, GmState& state, const GmConfig& cfg) {
  if (!state.has_reference) {
    state.reward_old = reward_new;
    state.phi_old = 1.0;
    state.has_reference = true;
  }
  bool improved = false;
  double phi_new = 1.0;
  if (state.reward_old > 0.0) {
    phi_new = reward_new / state.reward_old;
    improved = phi_new / state.phi_old >= 1.0;
  } else {
    improved = reward_new >= state.reward_old;
  }
  const int change = improved ? -1 : 1;
  state.lambda = std::clamp(state.lambda + cfg.alpha_lambda * change, 0.0, 1.0);
  state.phi_old = phi_new;
  state.reward_old = reward_new;
  return change;
}

/// True when the vanilla schedule recomputes masks at progress `eta`.
inline bool mask_schedule_fires(std::uint64_t eta, const GmConfig& cfg) {
  return eta >= cfg.eta_start && (eta - cfg.eta_start) % cfg.eta_repeat == 0;
}

/// True when the adaptive controller runs at progress `eta`.
inline bool adapt_schedule_fires(std::uint64_t eta, const GmConfig& cfg) {
  return eta >= cfg.eta_start && eta % cfg.eta_repeat == 0;
}

/// Adam wrapped by Gradient Monitoring.
///
/// Progress `eta` is supplied by the caller through set_progress(): it counts
/// policy updates for PPO and episodes for the A2C robot agents. Schedule
/// events (vanilla mask recomputation, adaptive threshold steps) fire at most
/// once per distinct eta, however many updates share it.
class GmOptimizer {
 public:
  GmOptimizer() : GmOptimizer(GmConfig{}, AdamConfig{}) {}
  GmOptimizer(GmConfig gm, AdamConfig adam) : gm_(gm), adam_cfg_(adam) {
    gm_.validate();
    state_.lambda = gm_.lambda;
  }

  const GmConfig& config() const noexcept { return gm_; }
  const AdamConfig& adam_config() const noexcept { return adam_cfg_; }
  GmState& state() noexcept { return state_; }
  const GmState& state() const noexcept { return state_; }
  AdamState& adam_state() noexcept { return adam_; }
  const AdamState& adam_state() const noexcept { return adam_; }
  double lambda() const noexcept { return state_.lambda; }

  void set_progress(std::uint64_t eta) { state_.eta = eta; }

  /// Feeds one per-step reward into the adaptive controller's window.
  void observe_reward(double r) {
    if (gm_.variant == GmVariant::am_wgm) state_.reward_window.push_back(r);
  }

  /// Applies one update to every parameter from its accumulated gradient.
  GmMetrics step(std::span<const ParamRef> params) {
    ensure_slots(params);
    ++adam_.t;

    if (gm_.variant == GmVariant::am_wgm && adapt_schedule_fires(state_.eta, gm_) &&
        state_.last_adapt_eta != state_.eta) {
      const double reward_new = episode_reward_mean(state_.reward_window);
      adapt_lambda(reward_new, state_, gm_);
      state_.reward_window.clear();
      state_.last_adapt_eta = state_.eta;
    }
    const bool recompute = is_vanilla(gm_.variant) && mask_schedule_fires(state_.eta, gm_) &&
                           state_.last_mask_eta != state_.eta;

    GmMetrics metrics;
    double active_sum = 0.0;
    std::size_t active_count = 0;
    for (std::size_t i = 0; i < params.size(); ++i) {
      const ParamRef& p = params[i];
      Matrix direction = adam_direction(*p.grad, adam_.slots[i], adam_.t, adam_cfg_);
      GmSlot& slot = state_.slots[i];
      const bool maskable =
          p.kind == ParamKind::weight || (gm_.mask_biases && p.kind == ParamKind::bias);

      const Matrix* gate = nullptr;
      if (maskable && is_vanilla(gm_.variant)) {
        if (recompute) {
          const Matrix decision = decision_matrix(direction, *p.value);
          slot.mask = compute_mask(decision, state_.lambda, layer_threshold(decision));
          slot.has_mask = true;
        }
        if (slot.has_mask) gate = &slot.mask;
      } else if (maskable && is_momentum(gm_.variant)) {
        const Matrix decision = decision_matrix(direction, *p.value);
        slot.mask = compute_mask(decision, state_.lambda, layer_threshold(decision));
        slot.has_mask = true;
        update_momentum(slot.momentum, slot.mask, gm_.zeta);
        gate = &slot.momentum;
      }
      if (gate != nullptr) {
        for (std::size_t k = 0; k < direction.size(); ++k) direction[k] *= (*gate)[k];
      }

      Matrix& w = *p.value;
      for (std::size_t k = 0; k < w.size(); ++k) w[k] -= adam_cfg_.learning_rate * direction[k];
      metrics.abs_grad_sum += abs_sum(direction);

      if (maskable && gm_.variant != GmVariant::wogm) {
        if (gate != nullptr) {
          for (double g : gate->values()) active_sum += g;
        } else {
          active_sum += static_cast<double>(direction.size());
        }
        active_count += direction.size();
      }
    }

    if (recompute) {
      state_.last_mask_eta = state_.eta;
      ++state_.recomputations;
      if (gm_.variant == GmVariant::u_wgm) state_.lambda /= 2.0;
    }

    metrics.active_pct =
        active_count == 0 ? 100.0 : 100.0 * active_sum / static_cast<double>(active_count);
    metrics.lambda = state_.lambda;
    last_ = metrics;
    return metrics;
  }

  const GmMetrics& last_metrics() const noexcept { return last_; }

  /// Active percentage of the current effective mask without stepping.
  double active_pct() const noexcept { return last_.active_pct; }

 private:
  void ensure_slots(std::span<const ParamRef> params) {
    if (adam_.slots.empty()) {
      for (const auto& p : params) {
        adam_.slots.push_back({Matrix(p.value->rows(), p.value->cols()),
                               Matrix(p.value->rows(), p.value->cols())});
        GmSlot slot;
        if (is_momentum(gm_.variant)) {
          slot.momentum = Matrix(p.value->rows(), p.value->cols(), gm_.momentum_init);
        }
        state_.slots.push_back(std::move(slot));
      }
      return;
    }
    if (adam_.slots.size() != params.size()) {
      throw DimensionError("GmOptimizer: parameter count changed between steps");
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
      require_same_shape(*params[i].value, adam_.slots[i].m, "GmOptimizer");
      require_same_shape(*params[i].grad, adam_.slots[i].m, "GmOptimizer");
    }
  }

  GmConfig gm_;
  AdamConfig adam_cfg_;
  AdamState adam_;
  GmState state_;
  GmMetrics last_;
};

}  // namespace gmrl
