#include "mvde/imgproc.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace mvde {

namespace {

/// One separable 1-D filtering pass: output i accumulates
/// weight[i*taps + k] * input[source[i*taps + k]], k = 0..taps-1.
struct FirPass {
  int out_len = 0;
  int taps = 0;
  std::vector<int> source;
  std::vector<double> weight;
};

/// Pass where every output uses the same centred kernel.
FirPass convolution_pass(int len, const std::vector<double>& kernel) {
  const int taps = static_cast<int>(kernel.size());
  const int radius = taps / 2;
  FirPass p{len, taps, {}, {}};
  p.source.resize(static_cast<std::size_t>(len) * taps);
  p.weight.resize(p.source.size());
  for (int i = 0; i < len; ++i) {
    for (int k = 0; k < taps; ++k) {
      const std::size_t at = static_cast<std::size_t>(i) * taps + k;
      p.source[at] = mirror_index(i - radius + k, len);
      p.weight[at] = kernel[k];
    }
  }
  return p;
}

Field run_rows(const Field& in, const FirPass& p) {
  Field out(p.out_len, in.height());
  for (int y = 0; y < in.height(); ++y) {
    const auto src = in.row(y);
    auto dst = out.row(y);
    for (int i = 0; i < p.out_len; ++i) {
      const int* s = &p.source[static_cast<std::size_t>(i) * p.taps];
      const double* w = &p.weight[static_cast<std::size_t>(i) * p.taps];
      double acc = 0.0;
      for (int k = 0; k < p.taps; ++k) acc += w[k] * src[s[k]];
      dst[i] = acc;
    }
  }
  return out;
}

Field run_cols(const Field& in, const FirPass& p) {
  Field out(in.width(), p.out_len);
  for (int j = 0; j < p.out_len; ++j) {
    auto dst = out.row(j);
    for (int k = 0; k < p.taps; ++k) {
      const std::size_t at = static_cast<std::size_t>(j) * p.taps + k;
      const auto src = in.row(p.source[at]);
      const double w = p.weight[at];
      for (int x = 0; x < in.width(); ++x) dst[x] += w * src[x];
    }
  }
  return out;
}

Field separable(const Field& in, const std::vector<double>& kx,
                const std::vector<double>& ky) {
  return run_cols(run_rows(in, convolution_pass(in.width(), kx)),
                  convolution_pass(in.height(), ky));
}

double sinc(double t) {
  if (t == 0.0) return 1.0;
  const double a = std::numbers::pi * t;
  return std::sin(a) / a;
}

double hann(double t, double half_width) {
  if (std::abs(t) >= half_width) return 0.0;
  return 0.5 * (1.0 + std::cos(std::numbers::pi * t / half_width));
}

constexpr int kUpTaps = 8;
constexpr int kDownTaps = 16;

/// Output m of a 2x interpolation reads input coordinate m/2 - 1/4.
FirPass upsample_pass(int in_len) {
  FirPass p{2 * in_len, kUpTaps, {}, {}};
  p.source.resize(static_cast<std::size_t>(p.out_len) * kUpTaps);
  p.weight.resize(p.source.size());
  for (int m = 0; m < p.out_len; ++m) {
    const double u = 0.5 * m - 0.25;
    const int first = static_cast<int>(std::floor(u)) - kUpTaps / 2 + 1;
    double sum = 0.0;
    for (int k = 0; k < kUpTaps; ++k) {
      const double t = u - (first + k);
      sum += sinc(t) * hann(t, kUpTaps / 2.0);
    }
    for (int k = 0; k < kUpTaps; ++k) {
      const std::size_t at = static_cast<std::size_t>(m) * kUpTaps + k;
      const double t = u - (first + k);
      p.source[at] = mirror_index(first + k, in_len);
      p.weight[at] = sinc(t) * hann(t, kUpTaps / 2.0) / sum;
    }
  }
  return p;
}

/// Output k of a 2x decimation is centred on fine coordinate 2k + 1/2.
FirPass decimate_pass(int in_len) {
  FirPass p{in_len / 2, kDownTaps, {}, {}};
  p.source.resize(static_cast<std::size_t>(p.out_len) * kDownTaps);
  p.weight.resize(p.source.size());
  std::vector<double> kernel(kDownTaps);
  double sum = 0.0;
  for (int k = 0; k < kDownTaps; ++k) {
    const double t = (k - kDownTaps / 2) + 0.5;
    kernel[k] = 0.5 * sinc(0.5 * t) * hann(t, kDownTaps / 2.0);
    sum += kernel[k];
  }
  for (double& v : kernel) v /= sum;
  for (int i = 0; i < p.out_len; ++i) {
    const int first = 2 * i - kDownTaps / 2 + 1;
    for (int k = 0; k < kDownTaps; ++k) {
      const std::size_t at = static_cast<std::size_t>(i) * kDownTaps + k;
      p.source[at] = mirror_index(first + k, in_len);
      p.weight[at] = kernel[k];
    }
  }
  return p;
}

void require_sigma(double sigma) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) {
    throw ParameterError("filter sigma must be positive");
  }
}

}  // namespace

std::vector<double> gaussian_kernel(double sigma) {
  require_sigma(sigma);
  const int radius = static_cast<int>(std::ceil(4.0 * sigma));
  std::vector<double> k(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    k[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
    sum += k[i + radius];
  }
  for (double& v : k) v /= sum;
  return k;
}

std::vector<double> derivative_kernel(double sigma) {
  require_sigma(sigma);
  const int radius = static_cast<int>(std::ceil(4.0 * sigma));
  std::vector<double> k(2 * radius + 1);
  double mean = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    k[i + radius] = i * std::exp(-0.5 * i * i / (sigma * sigma));
    mean += k[i + radius];
  }
  mean /= static_cast<double>(k.size());
  double moment = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    k[i + radius] -= mean;
    moment += i * k[i + radius];
  }
  for (double& v : k) v /= moment;
  return k;
}

Field gaussian_blur(const Field& img, double sigma) {
  const auto g = gaussian_kernel(sigma);
  return separable(img, g, g);
}

ImageGrid gaussian_blur(const ImageGrid& img, double sigma) {
  return ImageGrid(gaussian_blur(img.field(), sigma));
}

GradientPair dog_gradient(const Field& a, const Field& b, double sigma,
                          GradientMode mode) {
  require_same_shape(a, b, "dog_gradient");
  const double scale = mode == GradientMode::average ? 0.5 : 1.0;
  Field combined(a.width(), a.height());
  for (std::size_t i = 0; i < combined.size(); ++i) {
    combined[i] = scale * (a[i] + b[i]);
  }
  const auto g = gaussian_kernel(sigma);
  const auto d = derivative_kernel(sigma);
  return {separable(combined, d, g), separable(combined, g, d)};
}

GradientPair dog_gradient(const ImageGrid& a, const ImageGrid& b, double sigma,
                          GradientMode mode) {
  return dog_gradient(a.field(), b.field(), sigma, mode);
}

Field diff_blur(const Field& iq, const Field& ip, double sigma) {
  require_same_shape(iq, ip, "diff_blur");
  Field diff(iq.width(), iq.height());
  for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = iq[i] - ip[i];
  return gaussian_blur(diff, sigma);
}

Field diff_blur(const ImageGrid& iq, const ImageGrid& ip, double sigma) {
  return diff_blur(iq.field(), ip.field(), sigma);
}

WarpResult bilinear_warp(const Field& img, const DisplacementField& disp) {
  require_same_shape(img, disp.dx, "bilinear_warp");
  require_same_shape(img, disp.dy, "bilinear_warp");
  const int w = img.width();
  const int h = img.height();
  WarpResult out{Field(w, h), Mask(w, h, 1)};
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double px = x + disp.dx(x, y);
      double py = y + disp.dy(x, y);
      if (px < 0.0 || px > w - 1 || py < 0.0 || py > h - 1) {
        out.valid(x, y) = 0;
        px = std::clamp(px, 0.0, static_cast<double>(w - 1));
        py = std::clamp(py, 0.0, static_cast<double>(h - 1));
      }
      const int x0 = std::min(static_cast<int>(px), std::max(w - 2, 0));
      const int y0 = std::min(static_cast<int>(py), std::max(h - 2, 0));
      const int x1 = std::min(x0 + 1, w - 1);
      const int y1 = std::min(y0 + 1, h - 1);
      const double fx = px - x0;
      const double fy = py - y0;
      const double top = (1.0 - fx) * img(x0, y0) + fx * img(x1, y0);
      const double bottom = (1.0 - fx) * img(x0, y1) + fx * img(x1, y1);
      out.image(x, y) = (1.0 - fy) * top + fy * bottom;
    }
  }
  return out;
}

Field upsample_sinc2(const Field& img) {
  return run_cols(run_rows(img, upsample_pass(img.width())),
                  upsample_pass(img.height()));
}

ImageGrid upsample_sinc2(const ImageGrid& img) {
  return ImageGrid(upsample_sinc2(img.field()));
}

Field decimate_sinc2(const Field& img) {
  if (img.width() % 2 != 0 || img.height() % 2 != 0) {
    throw ParameterError("decimate_sinc2 requires even dimensions");
  }
  return run_cols(run_rows(img, decimate_pass(img.width())),
                  decimate_pass(img.height()));
}

Field pyramid_down(const Field& img) {
  if (img.width() < 2 || img.height() < 2) {
    throw ParameterError("image too small for another pyramid level");
  }
  const Field blurred = gaussian_blur(img, 1.0);
  Field out(img.width() / 2, img.height() / 2);
  for (int y = 0; y < out.height(); ++y) {
    for (int x = 0; x < out.width(); ++x) {
      // 2x2 block mean keeps the pixel-centre alignment of upsample_sinc2.
      out(x, y) = 0.25 * (blurred(2 * x, 2 * y) + blurred(2 * x + 1, 2 * y) +
                          blurred(2 * x, 2 * y + 1) +
                          blurred(2 * x + 1, 2 * y + 1));
    }
  }
  return out;
}

}  // namespace mvde
