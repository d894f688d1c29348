#include "mvde/hires_warp.hpp"

#include <algorithm>

namespace mvde {

DisparityField upsample_disparity_nn(const DisparityField& w) {
  Field out(2 * w.width(), 2 * w.height());
  for (int y = 0; y < out.height(); ++y) {
    for (int x = 0; x < out.width(); ++x) {
      out(x, y) = 2.0 * w(x / 2, y / 2);
    }
  }
  return DisparityField(std::move(out), Resolution::doubled);
}

HypothesisSet make_hypotheses(const DisparityField& w2) {
  const int wd = w2.width();
  const int ht = w2.height();
  std::array<Field, HypothesisSet::kCount> fields;
  for (int hy = -1; hy <= 1; ++hy) {
    for (int hx = -1; hx <= 1; ++hx) {
      Field f(wd, ht);
      for (int y = 0; y < ht; ++y) {
        const int sy = std::clamp(y + hy, 0, ht - 1);
        for (int x = 0; x < wd; ++x) {
          f(x, y) = w2(std::clamp(x + hx, 0, wd - 1), sy);
        }
      }
      fields[HypothesisSet::index(hx, hy)] = std::move(f);
    }
  }
  return HypothesisSet(std::move(fields));
}

WarpResult multi_hypothesis_warp_upsampled(const Field& img_up,
                                           const DisparityField& w,
                                           const BaselineVec& baseline) {
  if (img_up.width() != 2 * w.width() || img_up.height() != 2 * w.height()) {
    throw ParameterError(
        "multi_hypothesis_warp: upsampled image must be twice the field size");
  }
  const HypothesisSet hyps = make_hypotheses(upsample_disparity_nn(w));
  const int fw = img_up.width();
  const int fh = img_up.height();
  Field sum(fw, fh);
  Mask valid(fw, fh, 1);
  // Same sampling as bilinear_warp, accumulated in place per hypothesis.
  const int x_hi = std::max(fw - 2, 0);
  const int y_hi = std::max(fh - 2, 0);
  for (const Field& wh : hyps.fields()) {
    for (int y = 0; y < fh; ++y) {
      const auto src = wh.row(y);
      auto acc = sum.row(y);
      auto ok = valid.row(y);
      for (int x = 0; x < fw; ++x) {
        double px = x + baseline.bx * src[x];
        double py = y + baseline.by * src[x];
        if (px < 0.0 || px > fw - 1 || py < 0.0 || py > fh - 1) {
          ok[x] = 0;
          px = std::clamp(px, 0.0, static_cast<double>(fw - 1));
          py = std::clamp(py, 0.0, static_cast<double>(fh - 1));
        }
        const int x0 = std::min(static_cast<int>(px), x_hi);
        const int y0 = std::min(static_cast<int>(py), y_hi);
        const int x1 = std::min(x0 + 1, fw - 1);
        const int y1 = std::min(y0 + 1, fh - 1);
        const double fx = px - x0;
        const double fy = py - y0;
        const double top = (1.0 - fx) * img_up(x0, y0) + fx * img_up(x1, y0);
        const double bottom = (1.0 - fx) * img_up(x0, y1) + fx * img_up(x1, y1);
        acc[x] += (1.0 - fy) * top + fy * bottom;
      }
    }
  }
  for (double& v : sum.samples()) v /= HypothesisSet::kCount;

  WarpResult out{decimate_sinc2(sum), Mask(w.width(), w.height(), 1)};
  for (int y = 0; y < w.height(); ++y) {
    for (int x = 0; x < w.width(); ++x) {
      out.valid(x, y) = valid(2 * x, 2 * y) & valid(2 * x + 1, 2 * y) &
                        valid(2 * x, 2 * y + 1) & valid(2 * x + 1, 2 * y + 1);
    }
  }
  return out;
}

WarpResult multi_hypothesis_warp(const Field& img, const DisparityField& w,
                                 const BaselineVec& baseline) {
  require_same_shape(img, w.field(), "multi_hypothesis_warp");
  return multi_hypothesis_warp_upsampled(upsample_sinc2(img), w, baseline);
}

}  // namespace mvde
