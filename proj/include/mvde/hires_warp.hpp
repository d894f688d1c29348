#pragma once

#include <array>

#include "mvde/core.hpp"
#include "mvde/imgproc.hpp"

namespace mvde {

/// Nearest-neighbour 2x upsampling: each pixel becomes a 2x2 block and
/// its value is doubled, since pixel displacements scale with sampling
/// density.
DisparityField upsample_disparity_nn(const DisparityField& w);

/// Nine unit-shifted copies of a 2x field, w_h[m] = w[m + h] with
/// replicated borders, h in {-1,0,1}^2.
class HypothesisSet {
 public:
  static constexpr int kCount = 9;

  explicit HypothesisSet(std::array<Field, kCount> fields)
      : fields_(std::move(fields)) {}

  static constexpr int index(int hx, int hy) noexcept {
    return (hy + 1) * 3 + (hx + 1);
  }
  const Field& at(int hx, int hy) const noexcept {
    return fields_[index(hx, hy)];
  }
  const std::array<Field, kCount>& fields() const noexcept { return fields_; }

 private:
  std::array<Field, kCount> fields_;
};

HypothesisSet make_hypotheses(const DisparityField& w2);

/// Warps `img` by d = B' w at twice its resolution: sinc-upsample the
/// image, bilinearly warp it with each of the nine hypothesis
/// displacements, average, then sinc-decimate. A pixel is valid when all
/// four of its fine samples are valid in all nine warps.
WarpResult multi_hypothesis_warp(const Field& img, const DisparityField& w,
                                 const BaselineVec& baseline);

/// Same as above with the sinc-upsampled image precomputed.
WarpResult multi_hypothesis_warp_upsampled(const Field& img_up,
                                           const DisparityField& w,
                                           const BaselineVec& baseline);

}  // namespace mvde
