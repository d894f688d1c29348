#include "mvde/core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace mvde {

namespace {

void require_finite(const Field& f, const char* what) {
  for (double v : f.samples()) {
    if (!std::isfinite(v)) {
      throw ParameterError(std::string(what) + " contains a non-finite sample");
    }
  }
}

}  // namespace

ImageGrid::ImageGrid(Field samples) : field_(std::move(samples)) {
  if (field_.empty()) throw ParameterError("image must not be empty");
  require_finite(field_, "image");
}

ImageGrid::ImageGrid(int width, int height, std::vector<double> samples)
    : ImageGrid(Field(width, height, std::move(samples))) {}

double BaselineVec::inf_norm() const noexcept {
  return std::max(std::abs(bx), std::abs(by));
}

double BaselineVec::l1_norm() const noexcept {
  return std::abs(bx) + std::abs(by);
}

ViewSet::ViewSet(std::vector<View> views, std::size_t reference_index)
    : views_(std::move(views)), reference_(reference_index) {
  if (views_.size() < 2) {
    throw ParameterError("a view set needs at least 2 views");
  }
  if (reference_ >= views_.size()) {
    throw ParameterError("reference index out of range");
  }
  const ImageGrid& first = views_.front().image;
  double min_norm = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < views_.size(); ++i) {
    const View& v = views_[i];
    if (v.image.width() != first.width() || v.image.height() != first.height()) {
      throw ParameterError("view " + std::to_string(i) +
                           " has dimensions different from view 0");
    }
    if (!std::isfinite(v.baseline.bx) || !std::isfinite(v.baseline.by)) {
      throw ParameterError("view " + std::to_string(i) +
                           " has a non-finite baseline");
    }
    for (std::size_t j = 0; j < i; ++j) {
      if (views_[j].baseline == v.baseline) {
        throw ParameterError("views " + std::to_string(j) + " and " +
                             std::to_string(i) + " share a baseline");
      }
    }
    if (i != reference_) min_norm = std::min(min_norm, v.baseline.inf_norm());
  }
  if (!views_[reference_].baseline.is_zero()) {
    throw ParameterError("reference view must have baseline (0,0)");
  }
  if (std::abs(min_norm - 1.0) > 1e-9) {
    throw ParameterError("baselines are not normalised: nearest view has "
                         "infinity norm " + std::to_string(min_norm));
  }
}

DisparityField::DisparityField(Field w, Resolution res)
    : w_(std::move(w)), res_(res) {
  if (w_.empty()) throw ParameterError("disparity field must not be empty");
  require_finite(w_, "disparity field");
}

DisparityField::DisparityField(int width, int height, double fill,
                               Resolution res)
    : DisparityField(Field(width, height, fill), res) {}

void CameraGeometry::validate() const {
  if (!(focal_length > 0.0) || !(view_spacing > 0.0) || !(pixel_pitch > 0.0)) {
    throw ParameterError(
        "camera geometry values must be strictly positive");
  }
}

std::vector<BaselineVec> normalize_baselines(std::span<const BaselineVec> raw) {
  double min_norm = std::numeric_limits<double>::infinity();
  for (const BaselineVec& b : raw) {
    if (!std::isfinite(b.bx) || !std::isfinite(b.by)) {
      throw ParameterError("baseline components must be finite");
    }
    if (!b.is_zero()) min_norm = std::min(min_norm, b.inf_norm());
  }
  if (!std::isfinite(min_norm)) {
    throw DegenerateGeometryError("all baselines are zero");
  }
  std::vector<BaselineVec> out;
  out.reserve(raw.size());
  for (const BaselineVec& b : raw) {
    out.push_back({b.bx / min_norm, b.by / min_norm});
  }
  return out;
}

std::vector<BaselineVec> normalize_baselines(std::span<const BaselineVec> raw,
                                             const CameraGeometry& geometry) {
  geometry.validate();
  return normalize_baselines(raw);
}

double physical_disparity_px(double baseline_mm, double reciprocal_depth,
                             const CameraGeometry& geometry) {
  geometry.validate();
  return baseline_mm * geometry.focal_length * reciprocal_depth /
         geometry.pixel_pitch;
}

void PenaltyKind::validate() const {
  if (tag == PenaltyTag::huber_l1 && !(epsilon > 0.0)) {
    throw ParameterError("Huber transition point must be positive");
  }
  if (tag == PenaltyTag::welsch && sigma && !(*sigma > 0.0)) {
    throw ParameterError("Welsch sigma must be positive");
  }
}

void SolverConfig::validate() const {
  if (!(alpha > 0.0)) throw ParameterError("alpha must be positive");
  if (!(dog_sigma > 0.0)) throw ParameterError("dog_sigma must be positive");
  if (!(cg_tol > 0.0)) throw ParameterError("cg_tol must be positive");
  if (irls_iters < 1) throw ParameterError("irls_iters must be at least 1");
  if (cg_max_iters < 1) throw ParameterError("cg_max_iters must be at least 1");
  if (!(schedule_k >= 1.0) || !(schedule_c > 0.0)) {
    throw ParameterError("schedule requires k >= 1 and c > 0");
  }
  if (!(omega_max > 0.0) || omega_max > 3.141592653589793 + 1e-12) {
    throw ParameterError("omega_max must lie in (0, pi]");
  }
  if (reg_penalty.is_auto()) {
    throw ParameterError("automatic Welsch scale is only supported for the "
                         "data term");
  }
  data_penalty.validate();
  reg_penalty.validate();
}

DisplacementField disparity_from_w(const DisparityField& w,
                                   const BaselineVec& b) {
  DisplacementField d{Field(w.width(), w.height()),
                      Field(w.width(), w.height())};
  const auto src = w.field().samples();
  auto dx = d.dx.samples();
  auto dy = d.dy.samples();
  for (std::size_t i = 0; i < src.size(); ++i) {
    dx[i] = b.bx * src[i];
    dy[i] = b.by * src[i];
  }
  return d;
}

}  // namespace mvde
