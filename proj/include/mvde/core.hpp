#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "mvde/grid.hpp"

namespace mvde {

/// Single-channel intensity image, nominally in [0, 1]. Immutable once
/// built; every sample is finite.
class ImageGrid {
 public:
  explicit ImageGrid(Field samples);
  ImageGrid(int width, int height, std::vector<double> samples);

  int width() const noexcept { return field_.width(); }
  int height() const noexcept { return field_.height(); }
  double operator()(int x, int y) const noexcept { return field_(x, y); }
  const Field& field() const noexcept { return field_; }

  bool operator==(const ImageGrid&) const = default;

 private:
  Field field_;
};

/// Baseline normalised so the nearest view pair has unit infinity norm.
struct BaselineVec {
  double bx = 0.0;
  double by = 0.0;

  double inf_norm() const noexcept;
  double l1_norm() const noexcept;
  bool is_zero() const noexcept { return bx == 0.0 && by == 0.0; }
  bool operator==(const BaselineVec&) const = default;
};

struct View {
  ImageGrid image;
  BaselineVec baseline;
};

/// A reference view plus any number of co-planar views with normalised
/// baselines relative to it.
class ViewSet {
 public:
  ViewSet(std::vector<View> views, std::size_t reference_index);

  std::size_t size() const noexcept { return views_.size(); }
  std::size_t reference_index() const noexcept { return reference_; }
  const View& operator[](std::size_t i) const { return views_.at(i); }
  const View& reference() const noexcept { return views_[reference_]; }
  std::span<const View> views() const noexcept { return views_; }
  int width() const noexcept { return views_.front().image.width(); }
  int height() const noexcept { return views_.front().image.height(); }

 private:
  std::vector<View> views_;
  std::size_t reference_;
};

enum class Resolution : std::uint8_t { base, doubled };

/// Normalised reciprocal depth w(s); displacement to view p is B'_p * w.
class DisparityField {
 public:
  explicit DisparityField(Field w, Resolution res = Resolution::base);
  DisparityField(int width, int height, double fill = 0.0,
                 Resolution res = Resolution::base);

  int width() const noexcept { return w_.width(); }
  int height() const noexcept { return w_.height(); }
  Resolution resolution() const noexcept { return res_; }
  double operator()(int x, int y) const noexcept { return w_(x, y); }
  const Field& field() const noexcept { return w_; }

  bool operator==(const DisparityField&) const = default;

 private:
  Field w_;
  Resolution res_;
};

/// Per-pixel 2-D displacement, in pixels.
struct DisplacementField {
  Field dx;
  Field dy;
};

/// Physical rig description. Lengths in mm.
struct CameraGeometry {
  double focal_length = 50.0;
  double view_spacing = 1.25;
  double pixel_pitch = 0.01;

  void validate() const;
};

/// Scales baselines (any consistent unit) so the smallest nonzero one has
/// unit infinity norm. Ratios between baselines are preserved exactly.
std::vector<BaselineVec> normalize_baselines(std::span<const BaselineVec> raw);
std::vector<BaselineVec> normalize_baselines(std::span<const BaselineVec> raw,
                                             const CameraGeometry& geometry);

/// Pixel disparity F * B * r for a physical baseline (mm) and reciprocal
/// depth (1/mm). Not used by the solver, which works in normalised units.
double physical_disparity_px(double baseline_mm, double reciprocal_depth,
                             const CameraGeometry& geometry);

enum class PenaltyTag : std::uint8_t { l2, huber_l1, welsch };

/// Cost selector for the data or regularisation term. A Welsch penalty
/// with no sigma is "auto": the scale is estimated while solving.
struct PenaltyKind {
  PenaltyTag tag = PenaltyTag::l2;
  double epsilon = 1e-4;
  std::optional<double> sigma;

  static PenaltyKind l2() { return {}; }
  static PenaltyKind huber_l1(double epsilon = 1e-4) {
    return {PenaltyTag::huber_l1, epsilon, std::nullopt};
  }
  static PenaltyKind welsch(std::optional<double> sigma = std::nullopt) {
    return {PenaltyTag::welsch, 1e-4, sigma};
  }

  bool is_auto() const noexcept {
    return tag == PenaltyTag::welsch && !sigma.has_value();
  }
  void validate() const;
};

enum class GradientMode : std::uint8_t { average, paper_sum };

/// How the W_r-weighted Laplacian enters the Euler-Lagrange operator.
/// edge_weighted: each stencil edge carries the mean of its endpoint
/// weights (symmetric, positive semi-definite). literal: W_r(s) times the
/// Laplacian at s (non-symmetric when W_r varies).
enum class RegularizerForm : std::uint8_t { edge_weighted, literal };

enum class Preconditioner : std::uint8_t { jacobi, incomplete_cholesky };

struct SolverConfig {
  double alpha = 0.1;
  PenaltyKind data_penalty = PenaltyKind::welsch();
  PenaltyKind reg_penalty = PenaltyKind::huber_l1();
  double dog_sigma = 0.75;
  int irls_iters = 10;
  double cg_tol = 1e-6;
  int cg_max_iters = 500;
  double schedule_k = 1.0;
  double schedule_c = 1.0;
  GradientMode gradient_mode = GradientMode::average;
  RegularizerForm reg_form = RegularizerForm::edge_weighted;
  Preconditioner preconditioner = Preconditioner::incomplete_cholesky;
  /// Highest image frequency (rad/pixel) assumed by the linearisation
  /// validity test. Default is the band left after the derivative blur.
  double omega_max = 1.5707963267948966;
  bool coarse_to_fine = true;
  std::uint64_t seed = 0;

  void validate() const;
};

DisplacementField disparity_from_w(const DisparityField& w,
                                   const BaselineVec& b);

}  // namespace mvde
