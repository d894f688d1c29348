#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "mvde/imgproc.hpp"
#include "support.hpp"

using namespace mvde;

namespace {

Field ramp_x(int w, int h, double a, double c = 0.0) {
  Field f(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) f(x, y) = a * x + c;
  }
  return f;
}

Field cosine(int w, int h, double fx, double fy, double phase) {
  Field f(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      f(x, y) = 0.5 + 0.3 * std::cos(2 * std::numbers::pi * (fx * x + fy * y) + phase);
    }
  }
  return f;
}

}  // namespace

TEST_CASE("kernels") {
  const auto g = gaussian_kernel(0.75);
  CHECK(g.size() == 2 * 3 + 1);
  double sum = 0.0;
  for (double v : g) sum += v;
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(g[3] == doctest::Approx(1.0 / (1.0 + 2 * std::exp(-1 / 1.125) +
                                       2 * std::exp(-4 / 1.125) +
                                       2 * std::exp(-9 / 1.125))));
  const auto d = derivative_kernel(0.75);
  double dc = 0.0, moment = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    dc += d[i];
    moment += (static_cast<double>(i) - 3.0) * d[i];
  }
  CHECK(std::abs(dc) < 1e-15);
  CHECK(moment == doctest::Approx(1.0).epsilon(1e-14));
  CHECK_THROWS_AS(gaussian_kernel(0.0), ParameterError);
  CHECK_THROWS_AS(derivative_kernel(-1.0), ParameterError);
}

TEST_CASE("gaussian_blur examples") {
  const Field c(9, 7, 0.37);
  CHECK(testing::max_abs_diff(gaussian_blur(c, 0.75), c) < 1e-15);

  Field impulse(15, 15, 0.0);
  impulse(7, 7) = 1.0;
  const Field blurred = gaussian_blur(impulse, 0.75);
  const auto g = gaussian_kernel(0.75);
  for (int dy = -3; dy <= 3; ++dy) {
    for (int dx = -3; dx <= 3; ++dx) {
      CHECK(blurred(7 + dx, 7 + dy) == doctest::Approx(g[dx + 3] * g[dy + 3]).epsilon(1e-13));
    }
  }

  const Field r = ramp_x(20, 6, 0.3, 0.1);
  const Field rb = gaussian_blur(r, 0.75);
  for (int x = 4; x < 16; ++x) CHECK(rb(x, 3) == doctest::Approx(r(x, 3)).epsilon(1e-13));

  CHECK_THROWS_AS(gaussian_blur(c, 0.0), ParameterError);
}

TEST_CASE("dog_gradient examples") {
  const Field r = ramp_x(20, 12, 0.2);
  const auto avg = dog_gradient(r, r, 0.75, GradientMode::average);
  const auto sum = dog_gradient(r, r, 0.75, GradientMode::paper_sum);
  for (int y = 4; y < 8; ++y) {
    for (int x = 4; x < 16; ++x) {
      CHECK(avg.gx(x, y) == doctest::Approx(0.2).epsilon(1e-12));
      CHECK(std::abs(avg.gy(x, y)) < 1e-13);
      CHECK(sum.gx(x, y) == doctest::Approx(0.4).epsilon(1e-12));
    }
  }
  const Field c(10, 10, 0.8);
  const auto g = dog_gradient(c, c, 0.75, GradientMode::average);
  for (std::size_t i = 0; i < c.size(); ++i) {
    CHECK(std::abs(g.gx[i]) < 1e-14);
    CHECK(std::abs(g.gy[i]) < 1e-14);
  }
  CHECK_THROWS_AS(dog_gradient(c, Field(9, 10), 0.75, GradientMode::average),
                  ParameterError);
}

TEST_CASE("DC behaviour: blur gain 1, derivative gain 0") {
  std::mt19937_64 rng(5);
  const Field img = testing::random_field(16, 12, rng, 0.0, 1.0);
  Field shifted = img;
  for (double& v : shifted.samples()) v += 0.25;
  CHECK(testing::max_abs_diff(gaussian_blur(shifted, 1.1),
                              [&] {
                                Field b = gaussian_blur(img, 1.1);
                                for (double& v : b.samples()) v += 0.25;
                                return b;
                              }()) < 1e-13);
  const auto g0 = dog_gradient(img, img, 0.75, GradientMode::average);
  const auto g1 = dog_gradient(shifted, shifted, 0.75, GradientMode::average);
  CHECK(testing::max_abs_diff(g0.gx, g1.gx) < 1e-13);
  CHECK(testing::max_abs_diff(g0.gy, g1.gy) < 1e-13);
}

TEST_CASE("diff_blur examples") {
  std::mt19937_64 rng(6);
  const Field a = testing::random_field(11, 9, rng);
  const Field zero = diff_blur(a, a, 0.75);
  for (double v : zero.samples()) CHECK(v == 0.0);
  Field b = a;
  for (double& v : b.samples()) v -= 0.4;
  const Field c = diff_blur(a, b, 0.75);
  for (double v : c.samples()) CHECK(v == doctest::Approx(0.4).epsilon(1e-12));
  Field impulse(11, 11, 0.0);
  impulse(5, 5) = 1.0;
  const Field k = diff_blur(impulse, Field(11, 11, 0.0), 0.75);
  const auto g = gaussian_kernel(0.75);
  CHECK(k(5, 5) == doctest::Approx(g[3] * g[3]));
  CHECK(k(6, 4) == doctest::Approx(g[4] * g[2]));
}

TEST_CASE("bilinear_warp examples") {
  std::mt19937_64 rng(8);
  const Field img = testing::random_field(10, 8, rng);
  DisplacementField zero{Field(10, 8), Field(10, 8)};
  const auto id = bilinear_warp(img, zero);
  CHECK(id.image == img);
  for (auto v : id.valid.samples()) CHECK(v == 1);

  DisplacementField one{Field(10, 8, 1.0), Field(10, 8)};
  const auto s = bilinear_warp(img, one);
  for (int y = 0; y < 8; ++y) {
    for (int x = 0; x < 9; ++x) {
      CHECK(s.image(x, y) == doctest::Approx(img(x + 1, y)));
      CHECK(s.valid(x, y) == 1);
    }
    CHECK(s.valid(9, y) == 0);
  }

  const Field r = ramp_x(10, 4, 0.7, 0.2);
  DisplacementField half{Field(10, 4, 0.5), Field(10, 4)};
  const auto h = bilinear_warp(r, half);
  for (int x = 0; x < 9; ++x) {
    CHECK(h.image(x, 2) == doctest::Approx(0.7 * (x + 0.5) + 0.2).epsilon(1e-14));
  }
}

TEST_CASE("bilinear_warp mask is monotone in |disp|") {
  std::mt19937_64 rng(9);
  const Field img = testing::random_field(12, 10, rng);
  const Field dir_x = testing::random_field(12, 10, rng);
  const Field dir_y = testing::random_field(12, 10, rng);
  Mask previous(12, 10, 1);
  for (double scale : {0.0, 0.5, 1.0, 2.0, 4.0, 8.0}) {
    DisplacementField d{dir_x, dir_y};
    for (double& v : d.dx.samples()) v *= scale;
    for (double& v : d.dy.samples()) v *= scale;
    const auto r = bilinear_warp(img, d);
    for (std::size_t i = 0; i < img.size(); ++i) {
      if (!previous[i]) CHECK(r.valid[i] == 0);
    }
    previous = r.valid;
  }
}

TEST_CASE("sinc upsampling and decimation") {
  const Field c(8, 6, 0.42);
  const Field up = upsample_sinc2(c);
  CHECK(up.width() == 16);
  CHECK(up.height() == 12);
  CHECK(testing::max_abs_diff(up, Field(16, 12, 0.42)) < 1e-14);
  CHECK(testing::max_abs_diff(decimate_sinc2(Field(16, 12, 0.42)), Field(8, 6, 0.42)) <
        1e-14);
  CHECK_THROWS_AS(decimate_sinc2(Field(7, 6)), ParameterError);

  SUBCASE("cosine below quarter band lands on the fine grid") {
    const double fx = 0.11, fy = 0.07, ph = 0.3;
    const int w = 48, h = 40;
    const Field fine = upsample_sinc2(cosine(w, h, fx, fy, ph));
    double err = 0.0;
    for (int y = 12; y < 2 * h - 12; ++y) {
      for (int x = 12; x < 2 * w - 12; ++x) {
        const double u = 0.5 * x - 0.25;
        const double v = 0.5 * y - 0.25;
        const double truth =
            0.5 + 0.3 * std::cos(2 * std::numbers::pi * (fx * u + fy * v) + ph);
        err = std::max(err, std::abs(fine(x, y) - truth));
      }
    }
    CHECK(err < 1e-2);
  }
  SUBCASE("round trip") {
    std::mt19937_64 rng(2);
    const Field img = gaussian_blur(testing::random_field(40, 30, rng, 0, 1), 1.0);
    const Field back = decimate_sinc2(upsample_sinc2(img));
    double err = 0.0;
    for (int y = 6; y < 24; ++y) {
      for (int x = 6; x < 34; ++x) err = std::max(err, std::abs(back(x, y) - img(x, y)));
    }
    CHECK(err < 1e-2);
  }
  SUBCASE("Nyquist columns are attenuated by more than 20 dB") {
    Field alt(32, 8);
    for (int y = 0; y < 8; ++y) {
      for (int x = 0; x < 32; ++x) alt(x, y) = x % 2 ? 1.0 : -1.0;
    }
    const Field d = decimate_sinc2(alt);
    double peak = 0.0;
    for (int y = 0; y < 4; ++y) {
      for (int x = 4; x < 12; ++x) peak = std::max(peak, std::abs(d(x, y)));
    }
    CHECK(peak < 0.1);
  }
}

TEST_CASE("pyramid_down halves and preserves constants") {
  const Field c(17, 10, 0.3);
  const Field p = pyramid_down(c);
  CHECK(p.width() == 8);
  CHECK(p.height() == 5);
  CHECK(testing::max_abs_diff(p, Field(8, 5, 0.3)) < 1e-14);
  CHECK_THROWS_AS(pyramid_down(Field(1, 4)), ParameterError);
}
