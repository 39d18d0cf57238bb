#pragma once

#include <cmath>
#include <limits>
#include <numbers>
#include <span>
#include <string_view>
#include <vector>

#include "gmrl/nn.hpp"
#include "gmrl/random.hpp"

namespace gmrl::rl {

enum class PolicyKind { categorical, gaussian };

inline std::string_view to_string(PolicyKind k) {
  return k == PolicyKind::categorical ? "categorical" : "diagonal-gaussian";
}

inline PolicyKind policy_kind_from_string(std::string_view s) {
  if (s == "categorical") return PolicyKind::categorical;
  if (s == "gaussian" || s == "diagonal-gaussian") return PolicyKind::gaussian;
  throw LookupError("unknown policy kind '" + std::string(s) + "'");
}

struct PolicyOutput {
  std::vector<double> action;  // index in action[0] for categorical policies
  double log_prob = 0.0;
  double entropy = 0.0;
  double value = 0.0;
};

inline constexpr std::string_view kActorHead = "actor";
inline constexpr std::string_view kCriticHead = "critic";

// log() floored at the smallest normal double so that 0 * log(0) stays 0.
inline double safe_log(double p) { return std::log(std::max(p, std::numeric_limits<double>::min())); }

inline int sample_categorical(std::span<const double> probs, Rng& rng) {
  const double u = rng.uniform();
  double acc = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    acc += probs[i];
    if (u < acc) return static_cast<int>(i);
  }
  // Rounding left the cumulative sum just under 1; fall back to the last
  // action with non-zero mass.
  for (std::size_t i = probs.size(); i-- > 0;)
    if (probs[i] > 0.0) return static_cast<int>(i);
  return static_cast<int>(probs.size()) - 1;
}

inline int argmax(std::span<const double> values) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i)
    if (values[i] > values[best]) best = i;
  return static_cast<int>(best);
}

inline double categorical_entropy(std::span<const double> probs) {
  double h = 0.0;
  for (double p : probs) h -= p * safe_log(p);
  return h;
}

inline double gaussian_log_prob(std::span<const double> mean, std::span<const double> log_std,
                                std::span<const double> action) {
  constexpr double half_log_2pi = 0.91893853320467274178;
  double lp = 0.0;
  for (std::size_t i = 0; i < mean.size(); ++i) {
    const double z = (action[i] - mean[i]) * std::exp(-log_std[i]);
    lp += -0.5 * z * z - log_std[i] - half_log_2pi;
  }
  return lp;
}

// 0.5 * ln(2 pi e sigma^2) per dimension.
inline double gaussian_entropy(std::span<const double> log_std) {
  constexpr double half_log_2pi_e = 1.41893853320467274178;
  double h = 0.0;
  for (double ls : log_std) h += half_log_2pi_e + ls;
  return h;
}

/// Samples an action for one state. `log_std` is required for gaussian
/// policies. With `greedy` set, returns the mode (argmax / mean).
inline PolicyOutput act(const Network& net, std::span<const double> state, PolicyKind kind, Rng& rng,
                        const Matrix* log_std = nullptr, bool greedy = false) {
  const Matrix x = Matrix::row_vector(state);
  const Matrix head = net.predict(x, kActorHead);
  PolicyOutput out;
  out.value = net.predict(x, kCriticHead)(0, 0);
  if (kind == PolicyKind::categorical) {
    const auto probs = head.row(0);
    const int a = greedy ? argmax(probs) : sample_categorical(probs, rng);
    out.action = {static_cast<double>(a)};
    out.log_prob = safe_log(probs[static_cast<std::size_t>(a)]);
    out.entropy = categorical_entropy(probs);
    return out;
  }
  if (log_std == nullptr || log_std->size() != head.cols()) {
    throw DimensionError("act: gaussian policy needs a log_std of the action dimension");
  }
  const auto mean = head.row(0);
  out.action.resize(mean.size());
  for (std::size_t i = 0; i < mean.size(); ++i) {
    out.action[i] = greedy ? mean[i] : mean[i] + std::exp((*log_std)[i]) * rng.normal();
  }
  out.log_prob = gaussian_log_prob(mean, log_std->values(), out.action);
  out.entropy = gaussian_entropy(log_std->values());
  return out;
}

}  // namespace gmrl::rl
