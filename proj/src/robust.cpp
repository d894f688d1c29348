#include "mvde/robust.hpp"

#include <algorithm>
#include <cmath>

namespace mvde {

namespace {

double bound_sigma(const PenaltyKind& kind) {
  if (!kind.sigma) {
    throw StateError("Welsch sigma is automatic and has not been bound");
  }
  return *kind.sigma;
}

}  // namespace

double penalty_value(const PenaltyKind& kind, double x) {
  switch (kind.tag) {
    case PenaltyTag::l2:
      return 0.5 * x * x;
    case PenaltyTag::huber_l1: {
      const double ax = std::abs(x);
      if (ax <= kind.epsilon) return 0.5 * x * x / kind.epsilon;
      return ax - 0.5 * kind.epsilon;
    }
    case PenaltyTag::welsch: {
      const double s = bound_sigma(kind);
      const double s2 = s * s;
      return s2 * -std::expm1(-0.5 * x * x / s2);
    }
  }
  return 0.0;
}

double penalty_weight(const PenaltyKind& kind, double x) {
  switch (kind.tag) {
    case PenaltyTag::l2:
      return 1.0;
    case PenaltyTag::huber_l1: {
      const double ax = std::abs(x);
      return ax <= kind.epsilon ? 1.0 / kind.epsilon : 1.0 / ax;
    }
    case PenaltyTag::welsch: {
      const double s = bound_sigma(kind);
      return std::exp(-0.5 * x * x / (s * s));
    }
  }
  return 1.0;
}

double penalty_derivative(const PenaltyKind& kind, double x) {
  if (kind.tag == PenaltyTag::huber_l1 && std::abs(x) > kind.epsilon) {
    return x > 0.0 ? 1.0 : -1.0;
  }
  return penalty_weight(kind, x) * x;
}

double SigmaState::current() const {
  if (history_.empty()) throw StateError("sigma state holds no value yet");
  return history_.back();
}

SigmaState clamp_sigma(SigmaState state, double proposal) {
  if (!(proposal > 0.0) || !std::isfinite(proposal)) {
    throw ParameterError("sigma proposal must be positive and finite");
  }
  const double next =
      state.history_.empty() ? proposal
                             : std::min(state.history_.back(), proposal);
  state.history_.push_back(next);
  return state;
}

double estimate_sigma_d(std::span<const LinearizedView> views,
                        std::span<const std::size_t> adjacency,
                        const DisparityField& w) {
  if (adjacency.empty()) {
    throw EstimationError("sigma estimation needs at least one adjacent view");
  }
  double sum_rms = 0.0;
  int used = 0;
  for (std::size_t idx : adjacency) {
    const LinearizedView& v = views[idx];
    require_same_shape(v.a, w.field(), "estimate_sigma_d");
    double sq = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < v.a.size(); ++i) {
      if (!v.mask[i]) continue;
      const double r = v.a[i] * w.field()[i] + v.b[i];
      sq += r * r;
      ++count;
    }
    if (count == 0) continue;
    sum_rms += std::sqrt(sq / static_cast<double>(count));
    ++used;
  }
  if (used == 0) {
    throw EstimationError("no adjacent view has valid pixels");
  }
  return std::max(sum_rms / used, kSigmaFloor);
}

std::vector<std::size_t> adjacent_indices(
    std::span<const LinearizedView> views) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < views.size(); ++i) {
    if (std::abs(views[i].baseline.inf_norm() - 1.0) < 1e-9) out.push_back(i);
  }
  return out;
}

}  // namespace mvde
