#pragma once

// Information measures and emergence coefficients, all in bits (log base 2).
//
// Every function here is pure: no shared state, safe to call from any thread.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ina/errors.hpp"

namespace ina {

/// Quantity of information in bits. The only unit crossing module boundaries.
using InfoBits = double;

enum class EmergenceMode : std::uint8_t { none = 0, global = 1, per_group = 2 };

inline std::string_view to_string(EmergenceMode mode) {
  switch (mode) {
    case EmergenceMode::none: return "none";
    case EmergenceMode::global: return "global";
    case EmergenceMode::per_group: return "group";
  }
  return "unknown";
}

inline std::optional<EmergenceMode> parse_emergence_mode(std::string_view s) {
  if (s == "none") return EmergenceMode::none;
  if (s == "global") return EmergenceMode::global;
  if (s == "group" || s == "per_group") return EmergenceMode::per_group;
  return std::nullopt;
}

/// How the emergence coefficient psi is resolved when building weights.
///
/// `complexity` is the maximal combination size Z for global mode; Z = 1
/// gives phi = 1, i.e. psi = log2 W / log2 N. `psi_floor` is a lower bound
/// applied to per-feature psi_g in per_group mode (0 keeps the raw formula,
/// under which single-class features get psi_g = 0).
struct EmergenceConfig {
  EmergenceMode mode = EmergenceMode::none;
  std::uint32_t complexity = 1;
  double psi_floor = 0.0;

  friend bool operator==(const EmergenceConfig&, const EmergenceConfig&) = default;
};

namespace info {

inline constexpr double kShannonSumTolerance = 1e-9;

/// log2 of the number of equiprobable states.
inline InfoBits hartley_information(std::uint64_t num_states) {
  if (num_states == 0) throw DomainError("hartley_information: num_states must be >= 1");
  return std::log2(static_cast<double>(num_states));
}

/// -sum p log2 p with 0 log 0 = 0.
inline InfoBits shannon_entropy(std::span<const double> probabilities) {
  double total = 0.0;
  for (double p : probabilities) {
    if (!(p >= 0.0 && p <= 1.0)) throw ValidationError("shannon_entropy: probability outside [0,1]");
    total += p;
  }
  if (std::abs(total - 1.0) > kShannonSumTolerance)
    throw ValidationError("shannon_entropy: probabilities do not sum to 1");
  double h = 0.0;
  for (double p : probabilities)
    if (p > 0.0) h -= p * std::log2(p);
  return h == 0.0 ? 0.0 : h;  // avoid -0.0
}

/// Pointwise mutual information log2(p_ij / (p_i p_j)).
inline InfoBits pmi(double p_ij, double p_i, double p_j) {
  auto in_unit = [](double p) { return p > 0.0 && p <= 1.0; };
  if (!in_unit(p_ij) || !in_unit(p_i) || !in_unit(p_j))
    throw DomainError("pmi: probabilities must lie in (0, 1]");
  if (p_ij > std::min(p_i, p_j) + 1e-12)
    throw DomainError("pmi: joint probability exceeds a marginal");
  return std::log2(p_ij / (p_i * p_j));
}

/// Average mutual information of a joint distribution given as rows x cols.
/// Marginals are derived from the joint; zero cells contribute nothing.
inline InfoBits average_mutual_information(const std::vector<std::vector<double>>& joint) {
  if (joint.empty()) throw ValidationError("average_mutual_information: empty joint");
  const std::size_t cols = joint.front().size();
  std::vector<double> row_m(joint.size(), 0.0);
  std::vector<double> col_m(cols, 0.0);
  double total = 0.0;
  for (std::size_t r = 0; r < joint.size(); ++r) {
    if (joint[r].size() != cols) throw ValidationError("average_mutual_information: ragged joint");
    for (std::size_t c = 0; c < cols; ++c) {
      const double p = joint[r][c];
      if (!(p >= 0.0)) throw ValidationError("average_mutual_information: negative entry");
      row_m[r] += p;
      col_m[c] += p;
      total += p;
    }
  }
  if (std::abs(total - 1.0) > kShannonSumTolerance)
    throw ValidationError("average_mutual_information: joint does not sum to 1");
  double acc = 0.0;
  for (std::size_t r = 0; r < joint.size(); ++r)
    for (std::size_t c = 0; c < cols; ++c)
      if (const double p = joint[r][c]; p > 0.0) acc += p * std::log2(p / (row_m[r] * col_m[c]));
  return acc;
}

/// log2 C(n, k). Exact integer arithmetic while the coefficient fits in 53 bits,
/// log-gamma beyond that.
inline double log2_binomial(std::uint64_t n, std::uint64_t k) {
  if (k > n) throw DomainError("log2_binomial: k > n");
  k = std::min(k, n - k);
  if (k == 0) return 0.0;
  if (k == 1) return std::log2(static_cast<double>(n));
  std::uint64_t c = 1;
  bool exact = true;
  for (std::uint64_t i = 0; i < k; ++i) {
    // c * (n - i) / (i + 1) is always an integer: c holds C(n, i).
    std::uint64_t prod = 0;
    if (__builtin_mul_overflow(c, n - i, &prod) || prod > (std::uint64_t{1} << 53) * (i + 1)) {
      exact = false;
      break;
    }
    c = prod / (i + 1);
  }
  if (exact) return std::log2(static_cast<double>(c));
  const double nd = static_cast<double>(n);
  const double kd = static_cast<double>(k);
  return (std::lgamma(nd + 1.0) - std::lgamma(kd + 1.0) - std::lgamma(nd - kd + 1.0)) /
         std::numbers::ln2;
}

/// log2( sum_{m=1..Z} C(W, m) ), accumulated with log-sum-exp so W ~ 1e6 is fine.
inline double log2_binomial_sum(std::uint64_t W, std::uint64_t Z) {
  if (W == 0 || Z == 0 || Z > W)
    throw DomainError("log2_binomial_sum: requires 1 <= Z <= W");
  // C(W, m) is unimodal with its peak at floor(W/2).
  const double peak = log2_binomial(W, std::min(Z, W / 2 == 0 ? std::uint64_t{1} : W / 2));
  double sum = 0.0;
  for (std::uint64_t m = 1; m <= Z; ++m) sum += std::exp2(log2_binomial(W, m) - peak);
  return peak + std::log2(sum);
}

/// Hartley emergence coefficient: system complexity of W states combined up to size Z.
inline double phi(std::uint64_t W, std::uint64_t Z) {
  if (W < 2) throw DomainError("phi: W must be >= 2");
  if (Z == 0 || Z > W) throw DomainError("phi: requires 1 <= Z <= W");
  return log2_binomial_sum(W, Z) / std::log2(static_cast<double>(W));
}

/// Fraction of the system information log2 W^phi that lies beyond the classical log2 W.
inline double synergic_share(std::uint64_t W, std::uint64_t Z) {
  const double f = phi(W, Z);
  return (f - 1.0) / f;
}

/// Global emergence coefficient phi(W,Z) log2 W / log2 N, before clamping.
inline double psi_global_raw(std::uint64_t W, std::uint64_t N, std::uint64_t Z = 1) {
  if (W < 2) throw DomainError("psi_global: W must be >= 2");
  if (N < 2) throw DomainError("psi_global: N must be >= 2");
  const double log_w = std::log2(static_cast<double>(W));
  const double system_bits = Z == 1 ? log_w : phi(W, Z) * log_w;
  return system_bits / std::log2(static_cast<double>(N));
}

/// Global emergence coefficient clamped to [0, 1]. Z = 1 is the phi = 1 simplification.
inline double psi_global(std::uint64_t W, std::uint64_t N, std::uint64_t Z = 1) {
  return std::clamp(psi_global_raw(W, N, Z), 0.0, 1.0);
}

/// log2(2^w - 1) without forming 2^w.
inline double log2_pow2_minus_one(std::uint64_t w) {
  if (w == 0) throw DomainError("log2_pow2_minus_one: w must be >= 1");
  if (w <= 53) return std::log2(static_cast<double>((std::uint64_t{1} << w) - 1));
  return static_cast<double>(w) + std::log1p(-std::exp2(-static_cast<double>(w))) / std::numbers::ln2;
}

/// Per-group emergence coefficient with the normalization rule:
/// 1 when W_g > log2(2N), otherwise log2(2^W_g - 1) / log2 N_g, clamped to [0, 1].
inline double psi_group(std::uint64_t W_g, std::uint64_t N_g, std::uint64_t N) {
  if (W_g == 0) throw DomainError("psi_group: W_g must be >= 1");
  if (N_g < 2) throw DomainError("psi_group: N_g must be >= 2");
  if (N < 2) throw DomainError("psi_group: N must be >= 2");
  if (static_cast<double>(W_g) > std::log2(2.0 * static_cast<double>(N))) return 1.0;
  return std::clamp(log2_pow2_minus_one(W_g) / std::log2(static_cast<double>(N_g)), 0.0, 1.0);
}

/// Harkevich information log2(N_ij N / (N_i N_j)) from co-occurrence counts.
///
/// Counts are taken as doubles so smoothed (fractional) counts share the path.
/// N_ij = 0 has no logarithm; it maps to `zero_value`.
inline InfoBits harkevich_info(double n_ij, double n_i, double n_j, double n, double zero_value = 0.0) {
  if (!(n_i > 0.0) || !(n_j > 0.0)) throw DomainError("harkevich_info: marginal count is zero");
  if (!(n > 0.0)) throw DomainError("harkevich_info: total count is zero");
  if (!(n_ij >= 0.0) || n_ij > std::min(n_i, n_j))
    throw DomainError("harkevich_info: joint count outside [0, min(N_i, N_j)]");
  if (n_ij == 0.0) return zero_value;
  return std::log2((n_ij * n) / (n_i * n_j));
}

/// Harkevich information scaled by the emergence coefficient psi.
/// The exponent on the count ratio becomes a multiplier in log space.
inline InfoBits lutsenko_info(double n_ij, double n_i, double n_j, double n, double psi,
                              double zero_value = 0.0) {
  if (!(psi >= 0.0 && psi <= 1.0)) throw DomainError("lutsenko_info: psi outside [0, 1]");
  return psi * harkevich_info(n_ij, n_i, n_j, n, zero_value);
}

} // namespace info
} // namespace ina
