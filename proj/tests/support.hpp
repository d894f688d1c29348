#pragma once

#include <cmath>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "mvde/core.hpp"
#include "mvde/linearized_view.hpp"

namespace testing {

inline mvde::Field random_field(int w, int h, std::mt19937_64& rng,
                                double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  mvde::Field f(w, h);
  for (double& v : f.samples()) v = u(rng);
  return f;
}

/// Reflection written out independently of the library's helper.
inline int reflect(int i, int n) {
  while (i < 0 || i >= n) {
    if (i < 0) i = -i - 1;
    if (i >= n) i = 2 * n - i - 1;
  }
  return i;
}

inline double max_abs_diff(const mvde::Field& a, const mvde::Field& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

inline Eigen::VectorXd to_vector(const mvde::Field& f) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(f.size()));
  for (std::size_t i = 0; i < f.size(); ++i) v(static_cast<Eigen::Index>(i)) = f[i];
  return v;
}

inline mvde::Field to_field(const Eigen::VectorXd& v, int w, int h) {
  mvde::Field f(w, h);
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = v(static_cast<Eigen::Index>(i));
  return f;
}

struct StencilTap {
  int dx, dy;
  double c;
};

inline const std::vector<StencilTap>& laplacian_taps() {
  static const std::vector<StencilTap> taps = {
      {-1, -1, 1.0 / 12}, {0, -1, 1.0 / 6}, {1, -1, 1.0 / 12}, {-1, 0, 1.0 / 6},
      {1, 0, 1.0 / 6},    {-1, 1, 1.0 / 12}, {0, 1, 1.0 / 6},  {1, 1, 1.0 / 12}};
  return taps;
}

/// Dense Euler-Lagrange matrix assembled entry by entry from its
/// definition: data diagonal plus alpha^2 times the weighted stencil.
inline Eigen::MatrixXd dense_el_matrix(const std::vector<mvde::LinearizedView>& views,
                                       const std::vector<mvde::Field>& wd,
                                       const mvde::Field& wr, double alpha,
                                       bool edge_weighted) {
  const int w = wr.width();
  const int h = wr.height();
  const int n = w * h;
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n, n);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int s = y * w + x;
      for (std::size_t p = 0; p < views.size(); ++p) {
        A(s, s) += wd[p](x, y) * views[p].a(x, y) * views[p].a(x, y);
      }
      for (const auto& t : laplacian_taps()) {
        const int nx = reflect(x + t.dx, w);
        const int ny = reflect(y + t.dy, h);
        const int m = ny * w + nx;
        const double weight =
            edge_weighted ? 0.5 * (wr(x, y) + wr(nx, ny)) : wr(x, y);
        // (w_s - w_m) vanishes when the neighbour reflects onto s.
        A(s, s) += alpha * alpha * t.c * weight;
        A(s, m) -= alpha * alpha * t.c * weight;
      }
    }
  }
  return A;
}

}  // namespace testing
