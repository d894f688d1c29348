#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "mvde/core.hpp"
#include "mvde/imgproc.hpp"
#include "mvde/solver.hpp"

namespace mvde {

enum class PlanMode : std::uint8_t { gate_formula, custom_order };

/// Nested view subsets, each containing the reference, the last one
/// covering every view.
struct StagePlan {
  PlanMode mode = PlanMode::gate_formula;
  std::vector<std::vector<std::size_t>> stages;
};

/// Views whose baseline infinity norm is <= k + s*c, plus the reference,
/// in ascending index order.
std::vector<std::size_t> views_at_stage(const ViewSet& views, double k,
                                        double c, int stage);

/// Gate-formula plan: stages s = 0, 1, ... until all views are in. Stages
/// that would add nothing are skipped.
StagePlan plan_gate(const ViewSet& views, double k, double c);

/// One view per stage in the given order (reference excluded from
/// `order`). Throws PlanError unless `order` names every non-reference
/// view exactly once.
StagePlan plan_custom(const ViewSet& views, std::span<const std::size_t> order);

/// Ascending infinity norm; ties: x-axis before y-axis before off-axis,
/// then negative before positive.
std::vector<std::size_t> crosshair_order(const ViewSet& views);
StagePlan plan_crosshair(const ViewSet& views);

struct LowpassDecision {
  bool needed = false;
  int levels = 0;
  double product = 0.0;  ///< omega_max * |B'|_1 * residual before filtering
};

/// Checks whether omega^T B' w stays within pi/2 for the active baselines,
/// taking the 95th percentile of |residual| as the expected residual
/// disparity. Each 2x pyramid level halves the effective omega.
LowpassDecision needs_lowpass(std::span<const BaselineVec> baselines,
                              const DisparityField& residual, double omega_max);

struct StageResult {
  std::vector<std::size_t> active;
  DisparityField w_total;
  DisparityField w_residual;
  LowpassDecision lowpass;
  // Diagnostics; empty unless requested.
  std::vector<EnergyBreakdown> trace;
  std::vector<int> cg_iterations;
};

struct ProgressiveOptions {
  bool diagnostics = false;
  /// Expected |w| before anything is estimated (e.g. from dataset
  /// metadata); feeds the low-pass test of the first stage.
  std::optional<double> initial_disparity_bound;
  /// Sinc-upsampled originals, one per view, reused across runs.
  const std::vector<Field>* upsampled = nullptr;
};

struct ProgressiveResult {
  std::vector<StageResult> stages;
  SigmaState sigma;
};

/// Sinc-upsampled copies of every view, for ProgressiveOptions::upsampled.
std::vector<Field> upsample_views(const ViewSet& views);

/// Aligns each active non-reference view with the reference by warping
/// the ORIGINAL image along -B' w_total (multi-hypothesis warp). When
/// w_total is identically zero the originals are returned unchanged with
/// all-valid masks.
std::vector<WarpResult> warp_to_reference(
    const ViewSet& views, std::span<const std::size_t> active,
    const DisparityField& w_total, const std::vector<Field>* upsampled = nullptr);

/// Progressive inclusion of views: per stage, warp the original views by
/// the accumulated estimate, solve for a residual field by IRLS (with the
/// regulariser acting on the total), and accumulate.
ProgressiveResult run_progressive(const ViewSet& views, const StagePlan& plan,
                                  const SolverConfig& config,
                                  const ProgressiveOptions& options = {});

}  // namespace mvde
