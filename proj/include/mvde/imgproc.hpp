#pragma once

#include <vector>

#include "mvde/core.hpp"

namespace mvde {

// All filters below use half-sample symmetric boundary extension and
// fixed-order accumulation, so results do not depend on threading.

struct GradientPair {
  Field gx;
  Field gy;
};

struct WarpResult {
  Field image;
  Mask valid;  ///< 1 where the sample position fell inside the source
};

/// Sum-normalised sampled Gaussian, radius ceil(4 sigma), centre at
/// index radius.
std::vector<double> gaussian_kernel(double sigma);

/// Sampled derivative-of-Gaussian as a correlation kernel: zero DC and
/// unit first moment, so correlating a ramp a*x yields a.
std::vector<double> derivative_kernel(double sigma);

Field gaussian_blur(const Field& img, double sigma);
ImageGrid gaussian_blur(const ImageGrid& img, double sigma);

/// Derivative-of-Gaussian gradient of the combined image pair.
GradientPair dog_gradient(const ImageGrid& a, const ImageGrid& b, double sigma,
                          GradientMode mode);
GradientPair dog_gradient(const Field& a, const Field& b, double sigma,
                          GradientMode mode);

/// Gaussian-blurred difference iq - ip.
Field diff_blur(const Field& iq, const Field& ip, double sigma);
Field diff_blur(const ImageGrid& iq, const ImageGrid& ip, double sigma);

/// out(s) = img sampled bilinearly at s + disp(s). Positions outside the
/// image are clamped to the border and flagged invalid.
WarpResult bilinear_warp(const Field& img, const DisplacementField& disp);

/// 2x interpolation with an 8-tap Hann-windowed sinc per axis. Output
/// pixel m sits at input coordinate m/2 - 1/4 (pixel-centre aligned), so
/// each input pixel maps onto a 2x2 output block.
Field upsample_sinc2(const Field& img);
ImageGrid upsample_sinc2(const ImageGrid& img);

/// Half-band Hann-windowed-sinc low-pass followed by 2x subsampling;
/// inverse alignment of upsample_sinc2. Requires even dimensions.
Field decimate_sinc2(const Field& img);

/// Gaussian (sigma = 1) low-pass and 2x subsampling for image pyramids.
/// Odd trailing rows/columns are dropped.
Field pyramid_down(const Field& img);

}  // namespace mvde
