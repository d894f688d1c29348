#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "mvde/data.hpp"

namespace mvde {

namespace {

/// Band-limited procedural texture: a sum of random plane waves with
/// spatial frequencies well below Nyquist, so point samples at any
/// sub-pixel offset are exact.
struct Texture {
  struct Wave {
    double u, v, phase, amplitude;
  };
  double mean = 0.5;
  std::vector<Wave> waves;

  static Texture random(std::mt19937_64& rng, double mean, double contrast,
                        double anisotropy) {
    constexpr int kWaves = 32;
    std::uniform_real_distribution<double> freq(0.02, 0.12);
    std::uniform_real_distribution<double> angle(0.0, std::numbers::pi);
    std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
    Texture t;
    t.mean = mean;
    const double amp = contrast * std::sqrt(2.0 / kWaves);
    for (int k = 0; k < kWaves; ++k) {
      const double f = 2.0 * std::numbers::pi * freq(rng);
      const double a = angle(rng);
      t.waves.push_back(
          {f * std::cos(a), anisotropy * f * std::sin(a), phase(rng), amp});
    }
    return t;
  }

  /// Samples T(x + sx, y + sy) on the full pixel grid.
  Field render(int width, int height, double sx, double sy) const {
    Field out(width, height, mean);
    std::vector<double> cx(width), snx(width), cy(height), sny(height);
    for (const Wave& w : waves) {
      for (int x = 0; x < width; ++x) {
        const double arg = w.u * (x + sx) + w.phase;
        cx[x] = w.amplitude * std::cos(arg);
        snx[x] = w.amplitude * std::sin(arg);
      }
      for (int y = 0; y < height; ++y) {
        const double arg = w.v * (y + sy);
        cy[y] = std::cos(arg);
        sny[y] = std::sin(arg);
      }
      for (int y = 0; y < height; ++y) {
        auto row = out.row(y);
        for (int x = 0; x < width; ++x) row[x] += cx[x] * cy[y] - snx[x] * sny[y];
      }
    }
    return out;
  }
};

double overlap(double a0, double a1, double b0, double b1) {
  return std::max(0.0, std::min(a1, b1) - std::max(a0, b0));
}

bool in_slat(const SceneSpec& spec, double u) {
  return std::any_of(spec.slats.begin(), spec.slats.end(), [u](const Slat& s) {
    return u >= s.x && u < s.x + s.width;
  });
}

}  // namespace

std::vector<Slat> SceneSpec::default_slats(int width) {
  const double k = width / 640.0;
  // Edges on pixel boundaries (pixel i spans [i - 0.5, i + 0.5]).
  const auto slat = [k](double x, double w) {
    return Slat{std::round(x * k) - 0.5, std::max(1.0, std::round(w * k))};
  };
  return {slat(100, 24), slat(240, 36), slat(380, 20), slat(500, 40)};
}

void SceneSpec::validate() const {
  if (n_views < 3 || n_views % 2 == 0) {
    throw SceneError("slats scene needs an odd number of views (>= 3)");
  }
  if (width <= 0 || height <= 0) throw SceneError("image size must be positive");
  if (!(view_spacing > 0.0) || !(focal_length > 0.0)) {
    throw SceneError("view spacing and focal length must be positive");
  }
  if (!(background_w >= 0.0) || !(slat_w > background_w)) {
    throw SceneError("need slat_w > background_w >= 0");
  }
  std::vector<Slat> sorted = slats;
  std::sort(sorted.begin(), sorted.end(),
            [](const Slat& a, const Slat& b) { return a.x < b.x; });
  double covered = 0.0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const Slat& s = sorted[i];
    if (!(s.width > 0.0) || s.x < -0.5 || s.x + s.width > width - 0.5) {
      throw SceneError("slat outside the image or of non-positive width");
    }
    if (i > 0 && s.x < sorted[i - 1].x + sorted[i - 1].width) {
      throw SceneError("slats overlap");
    }
    covered += s.width;
  }
  if (!(texture_contrast >= 0.0) || texture_contrast > 0.5) {
    throw SceneError("texture contrast must lie in [0, 0.5]");
  }
  if (!(texture_anisotropy > 0.0) || texture_anisotropy > 1.0) {
    throw SceneError("texture anisotropy must lie in (0, 1]");
  }
  if (covered >= width) {
    throw SceneError("slats cover the whole reference view");
  }
}

SlatsScene generate_slats(const SceneSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.texture_seed);
  const Texture background = Texture::random(rng, 0.5, spec.texture_contrast,
                                                 spec.texture_anisotropy);
  const Texture slat = Texture::random(rng, 0.5, spec.texture_contrast,
                                                 spec.texture_anisotropy);

  const int centre = spec.n_views / 2;
  std::vector<BaselineVec> raw;
  for (int i = 0; i < spec.n_views; ++i) {
    raw.push_back({(i - centre) * spec.view_spacing, 0.0});
  }
  const CameraGeometry geometry{spec.focal_length, spec.view_spacing, 0.01};
  const auto baselines = normalize_baselines(raw, geometry);

  std::vector<View> views;
  views.reserve(spec.n_views);
  for (int i = 0; i < spec.n_views; ++i) {
    const BaselineVec& b = baselines[i];
    const Field bg = background.render(spec.width, spec.height,
                                       b.bx * spec.background_w,
                                       b.by * spec.background_w);
    const Field fg = slat.render(spec.width, spec.height, b.bx * spec.slat_w,
                                 b.by * spec.slat_w);
    // A layer point at reference x appears at x - B'w in this view.
    std::vector<double> cover(spec.width, 0.0);
    for (const Slat& s : spec.slats) {
      const double x0 = s.x - b.bx * spec.slat_w;
      const double x1 = x0 + s.width;
      for (int x = 0; x < spec.width; ++x) {
        cover[x] += overlap(x - 0.5, x + 0.5, x0, x1);
      }
    }
    Field img(spec.width, spec.height);
    for (int y = 0; y < spec.height; ++y) {
      for (int x = 0; x < spec.width; ++x) {
        const double c = std::min(cover[x], 1.0);
        img(x, y) = std::clamp(c * fg(x, y) + (1.0 - c) * bg(x, y), 0.0, 1.0);
      }
    }
    views.push_back({ImageGrid(std::move(img)), b});
  }

  Field gt(2 * spec.width, 2 * spec.height);
  for (int x = 0; x < gt.width(); ++x) {
    const double w = in_slat(spec, 0.5 * x - 0.25) ? spec.slat_w : spec.background_w;
    for (int y = 0; y < gt.height(); ++y) gt(x, y) = w;
  }
  return {ViewSet(std::move(views), static_cast<std::size_t>(centre)),
          DisparityField(std::move(gt), Resolution::doubled)};
}

std::size_t occluded_pixel_count(const SceneSpec& spec, const BaselineVec& b) {
  std::size_t count = 0;
  for (int x = 0; x < spec.width; ++x) {
    if (in_slat(spec, x)) continue;
    // Background point at x lands where a slat shifted by -B' w_slat sits.
    const double seen = x - b.bx * spec.background_w;
    const bool hidden = std::any_of(
        spec.slats.begin(), spec.slats.end(), [&](const Slat& s) {
          const double x0 = s.x - b.bx * spec.slat_w;
          return seen >= x0 && seen < x0 + s.width;
        });
    if (hidden) ++count;
  }
  return count * static_cast<std::size_t>(spec.height);
}

ImageGrid add_noise(const ImageGrid& img, double variance, std::uint64_t seed) {
  if (!(variance >= 0.0)) throw ParameterError("noise variance must be >= 0");
  if (variance == 0.0) return img;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, std::sqrt(variance));
  Field out = img.field();
  for (double& v : out.samples()) v = std::clamp(v + noise(rng), 0.0, 1.0);
  return ImageGrid(std::move(out));
}

}  // namespace mvde
