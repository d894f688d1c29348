#pragma once

#include <span>
#include <vector>

#include "mvde/core.hpp"
#include "mvde/linearized_view.hpp"

namespace mvde {

/// Lower bound applied to the automatically estimated Welsch scale.
inline constexpr double kSigmaFloor = 1e-4;

/// Cost phi(x). L2: x^2/2. Huber: x^2/(2 eps) inside eps, |x| - eps/2
/// outside. Welsch: sigma^2 (1 - exp(-x^2 / (2 sigma^2))).
/// Throws StateError for a Welsch kind whose sigma is still automatic.
double penalty_value(const PenaltyKind& kind, double x);

/// IRLS weight phi'(x)/x; finite at x = 0 for every kind.
double penalty_weight(const PenaltyKind& kind, double x);

/// Derivative phi'(x).
double penalty_derivative(const PenaltyKind& kind, double x);

/// Welsch scale history. Never increases.
class SigmaState {
 public:
  SigmaState() = default;

  bool empty() const noexcept { return history_.empty(); }
  /// Throws StateError when no value has been recorded yet.
  double current() const;
  const std::vector<double>& history() const noexcept { return history_; }

  friend SigmaState clamp_sigma(SigmaState state, double proposal);

 private:
  std::vector<double> history_;
};

/// Appends min(current, proposal) to the history (or the proposal on the
/// first call).
SigmaState clamp_sigma(SigmaState state, double proposal);

/// Mean over the adjacent views of the RMS linearised residual a*w + b on
/// each view's valid pixels. Views without valid pixels are skipped;
/// EstimationError if none remain. Result is floored at kSigmaFloor.
double estimate_sigma_d(std::span<const LinearizedView> views,
                        std::span<const std::size_t> adjacency,
                        const DisparityField& w);

/// Indices of views whose baseline has unit infinity norm (the
/// reference's immediate neighbours).
std::vector<std::size_t> adjacent_indices(
    std::span<const LinearizedView> views);

}  // namespace mvde
