#pragma once

// Optimal Mixture of Gaussians (OMG) fusion of scalar height measurements.
//
// A cell state keeps the collapsed mixture {mean, variance, precision sum}
// plus the number of fused measurements. Unlike a Kalman update, the OMG
// variance retains the spread between the fused measurements.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>

namespace omgmap {

class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class EmptyInputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct GaussianMeasurement {
  double value = 0.0;
  double variance = 1.0;
};

struct CellState {
  double mean = 0.0;
  double variance = 0.0;
  double precision_sum = 0.0;
  std::uint32_t count = 0;

  [[nodiscard]] bool empty() const noexcept { return count == 0 && precision_sum == 0.0; }

  friend bool operator==(const CellState&, const CellState&) = default;
};

struct KalmanState {
  double mean = 0.0;
  double variance = 0.0;
  std::uint32_t count = 0;

  [[nodiscard]] bool empty() const noexcept { return count == 0; }
};

namespace detail {

inline std::uint32_t saturating_add(std::uint32_t a, std::uint32_t b) noexcept {
  const std::uint32_t max = std::numeric_limits<std::uint32_t>::max();
  return a > max - b ? max : a + b;
}

inline void check_measurement(const GaussianMeasurement& m) {
  if (!std::isfinite(m.value)) throw DomainError("measurement value is not finite");
  if (!(m.variance > 0.0) || !std::isfinite(m.variance))
    throw DomainError("measurement variance must be positive and finite");
}

// Difference a - b that stays finite when a and b are finite but of
// opposite sign and close to the largest double.
inline double safe_diff(double a, double b) noexcept {
  const double d = a - b;
  if (std::isfinite(d)) return d;
  return 2.0 * (0.5 * a - 0.5 * b);
}

}  // namespace detail

/// State holding exactly one measurement.
inline CellState single_state(const GaussianMeasurement& m) {
  detail::check_measurement(m);
  return {m.value, m.variance, 1.0 / m.variance, 1};
}

/// Fuses two OMG states (the pairwise form used by pyramid pooling).
///
/// Both the second raw moment and the squared mean are expressed around the
/// fused mean, i.e. S(σ² + μ²) - Sμ² is evaluated as S·(σ² + (μ_i - μ)²).
/// This is the same quantity without cancellation between two large squares.
inline CellState fuse_states(const CellState& a, const CellState& b) noexcept {
  if (a.empty()) return b;
  if (b.empty()) return a;
  const double s = a.precision_sum + b.precision_sum;
  const double wa = a.precision_sum / s;
  const double wb = b.precision_sum / s;
  const double mean = wa * a.mean + wb * b.mean;
  const double da = a.mean - mean;
  const double db = b.mean - mean;
  const double variance = wa * (a.variance + da * da) + wb * (b.variance + db * db);
  return {mean, variance, s, detail::saturating_add(a.count, b.count)};
}

/// Cumulative OMG update of `prior` with one measurement.
///
/// The printed cumulative variance adds x²/σ²_x + 1, which is the per-sample
/// term (σ²_x + x²)/σ²_x of the batch formula. Here it is regrouped around
/// the posterior mean so that folding updates reproduces omg_batch to
/// round-off, even for measurements whose variance is tiny next to x².
inline CellState omg_update(const CellState& prior, const GaussianMeasurement& m) {
  return fuse_states(prior, single_state(m));
}

/// Same contract as omg_update but never squares a raw height or a raw
/// height difference: each deviation is first scaled by the square root of
/// its weight, so the result is finite whenever the true variance is.
inline CellState omg_update_overflow_safe(const CellState& prior, const GaussianMeasurement& m) {
  const CellState b = single_state(m);
  if (prior.empty()) return b;
  const double s = prior.precision_sum + b.precision_sum;
  const double wa = prior.precision_sum / s;
  const double wb = b.precision_sum / s;
  const double mean = wa * prior.mean + wb * b.mean;
  const double ra = std::sqrt(wa) * detail::safe_diff(prior.mean, mean);
  const double rb = std::sqrt(wb) * detail::safe_diff(b.mean, mean);
  const double variance = wa * prior.variance + wb * b.variance + ra * ra + rb * rb;
  return {mean, variance, s, detail::saturating_add(prior.count, 1)};
}

/// Closed-form OMG over a whole measurement list. Two passes: precision
/// weighted mean, then the weighted sum of σ²_i + (x_i - μ)².
inline CellState omg_batch(std::span<const GaussianMeasurement> ms) {
  if (ms.empty()) throw EmptyInputError("omg_batch: empty measurement list");
  double s = 0.0;
  double weighted = 0.0;
  for (const auto& m : ms) {
    detail::check_measurement(m);
    s += 1.0 / m.variance;
    weighted += m.value / m.variance;
  }
  const double mean = weighted / s;
  double second = 0.0;
  for (const auto& m : ms) {
    const double d = m.value - mean;
    second += (m.variance + d * d) / m.variance;
  }
  const auto n = ms.size() > std::numeric_limits<std::uint32_t>::max()
                     ? std::numeric_limits<std::uint32_t>::max()
                     : static_cast<std::uint32_t>(ms.size());
  return {mean, second / s, s, n};
}

/// Time inflation: multiplies the effective uncertainty of the fused past by k.
/// σ² gains (N+1)(k-1) and S is divided by k. Empty states pass through.
inline CellState inflate(const CellState& state, double k) {
  if (!(k >= 1.0) || !std::isfinite(k)) throw DomainError("inflation factor must be >= 1");
  if (state.empty()) return state;
  CellState out = state;
  out.variance = state.variance + (static_cast<double>(state.count) + 1.0) * (k - 1.0);
  out.precision_sum = state.precision_sum / k;
  return out;
}

/// 1D Kalman (product of Gaussians) update, the classic elevation-map baseline.
inline KalmanState kalman_update(const KalmanState& prior, const GaussianMeasurement& m) {
  detail::check_measurement(m);
  if (prior.empty()) return {m.value, m.variance, 1};
  const double v1 = prior.variance;
  const double v2 = m.variance;
  return {(prior.mean * v2 + m.value * v1) / (v1 + v2), v1 * v2 / (v1 + v2),
          detail::saturating_add(prior.count, 1)};
}

/// Relative difference used by the oracle comparisons throughout the project.
inline double relative_difference(double a, double b, double floor = 1e-300) noexcept {
  const double scale = std::max({std::abs(a), std::abs(b), floor});
  return std::abs(a - b) / scale;
}

}  // namespace omgmap
