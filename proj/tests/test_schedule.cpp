#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "mvde/data.hpp"
#include "mvde/schedule.hpp"
#include "support.hpp"

using namespace mvde;

namespace {

double texture_at(double u, double v) {
  return 0.5 + 0.15 * std::sin(0.29 * u + 0.13 * v) + 0.1 * std::cos(0.19 * u - 0.37 * v + 1.0) +
         0.06 * std::sin(0.47 * u + 0.21 * v + 2.0);
}

/// Views of a fronto-parallel textured plane at constant w.
ViewSet plane_views(int w, int h, const std::vector<BaselineVec>& baselines, std::size_t ref,
                    double w0) {
  std::vector<View> views;
  for (const auto& b : baselines) {
    Field f(w, h);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) f(x, y) = texture_at(x + b.bx * w0, y + b.by * w0);
    }
    views.push_back({ImageGrid(std::move(f)), b});
  }
  return ViewSet(std::move(views), ref);
}

std::vector<BaselineVec> linear_array(int n) {
  std::vector<BaselineVec> b;
  for (int i = 0; i < n; ++i) b.push_back({static_cast<double>(i - n / 2), 0.0});
  return b;
}

std::vector<BaselineVec> grid(int n) {
  std::vector<BaselineVec> b;
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) {
      b.push_back({static_cast<double>(c - n / 2), static_cast<double>(r - n / 2)});
    }
  }
  return b;
}

double mean_abs(const Field& f) {
  double s = 0.0;
  for (double v : f.samples()) s += std::abs(v);
  return s / static_cast<double>(f.size());
}

}  // namespace

TEST_CASE("gate formula stages on a 31-view array") {
  const ViewSet vs = plane_views(8, 6, linear_array(31), 15, 0.0);
  CHECK(views_at_stage(vs, 1, 1, 0) == std::vector<std::size_t>{14, 15, 16});
  CHECK(views_at_stage(vs, 1, 1, 1).size() == 5);
  CHECK(views_at_stage(vs, 1, 1, 100).size() == 31);
  const auto plan = plan_gate(vs, 1, 1);
  REQUIRE(plan.stages.size() == 15);
  for (std::size_t s = 0; s < plan.stages.size(); ++s) {
    CHECK(plan.stages[s].size() == 3 + 2 * s);
    CHECK(std::find(plan.stages[s].begin(), plan.stages[s].end(), 15) != plan.stages[s].end());
    if (s > 0) {
      CHECK(std::includes(plan.stages[s].begin(), plan.stages[s].end(),
                          plan.stages[s - 1].begin(), plan.stages[s - 1].end()));
    }
  }
  CHECK_THROWS_AS(views_at_stage(vs, 0.5, 1, 0), ParameterError);
}

TEST_CASE("crosshair plan on a 9x9 grid") {
  const ViewSet vs = select_crosshair(plane_views(8, 6, grid(9), 40, 0.0));
  REQUIRE(vs.size() == 17);
  REQUIRE(vs.reference_index() == 8);
  const auto order = crosshair_order(vs);
  REQUIRE(order.size() == 16);
  CHECK(vs[order[0]].baseline == BaselineVec{-1, 0});
  CHECK(vs[order[1]].baseline == BaselineVec{1, 0});
  CHECK(vs[order[2]].baseline == BaselineVec{0, -1});
  CHECK(vs[order[3]].baseline == BaselineVec{0, 1});
  CHECK(vs[order[15]].baseline == BaselineVec{0, 4});
  const auto plan = plan_crosshair(vs);
  CHECK(plan.mode == PlanMode::custom_order);
  REQUIRE(plan.stages.size() == 16);
  CHECK(plan.stages.front().size() == 2);
  CHECK(plan.stages.back().size() == 17);
  for (std::size_t idx : plan.stages.back()) {
    const auto& b = vs[idx].baseline;
    CHECK((b.bx == 0.0 || b.by == 0.0));
  }
}

TEST_CASE("two views make a single stage") {
  const ViewSet vs = plane_views(8, 6, {{0, 0}, {1, 0}}, 0, 0.0);
  CHECK(plan_gate(vs, 1, 1).stages.size() == 1);
  const std::vector<std::size_t> order{1};
  CHECK(plan_custom(vs, order).stages.size() == 1);
}

TEST_CASE("custom order must name every view once") {
  const ViewSet vs = plane_views(8, 6, linear_array(5), 2, 0.0);
  const std::vector<std::size_t> missing{1, 3, 0};
  const std::vector<std::size_t> repeated{1, 3, 0, 0};
  const std::vector<std::size_t> with_ref{1, 3, 0, 4, 2};
  const std::vector<std::size_t> unknown{1, 3, 0, 9};
  CHECK_THROWS_AS(plan_custom(vs, missing), PlanError);
  CHECK_THROWS_AS(plan_custom(vs, repeated), PlanError);
  CHECK_THROWS_AS(plan_custom(vs, with_ref), PlanError);
  CHECK_THROWS_AS(plan_custom(vs, unknown), PlanError);
  const std::vector<std::size_t> ok{1, 3, 0, 4};
  const auto plan = plan_custom(vs, ok);
  CHECK(plan.stages.size() == 4);
  CHECK(plan.stages[0] == std::vector<std::size_t>{1, 2});
}

TEST_CASE("needs_lowpass examples") {
  const std::vector<BaselineVec> unit{{1, 0}, {-1, 0}};
  const auto small = needs_lowpass(unit, DisparityField(8, 8, 0.5), std::numbers::pi);
  CHECK_FALSE(small.needed);
  CHECK(small.product == doctest::Approx(std::numbers::pi / 2));
  const auto big = needs_lowpass(unit, DisparityField(8, 8, 2.0), std::numbers::pi);
  CHECK(big.needed);
  CHECK(big.levels == 2);
  const auto zero = needs_lowpass(unit, DisparityField(8, 8), std::numbers::pi);
  CHECK_FALSE(zero.needed);
  CHECK(zero.levels == 0);
  // Longer baselines raise the product proportionally.
  const std::vector<BaselineVec> far{{3, 0}};
  const auto wide = needs_lowpass(far, DisparityField(8, 8, 0.5), std::numbers::pi);
  CHECK(wide.product == doctest::Approx(1.5 * std::numbers::pi));
  CHECK(wide.levels == 2);
}

TEST_CASE("single-stage plan equals irls_solve") {
  const ViewSet vs = plane_views(32, 24, linear_array(3), 1, 0.3);
  const auto plan = plan_gate(vs, 1, 1);
  REQUIRE(plan.stages.size() == 1);
  SolverConfig c;
  c.irls_iters = 4;
  const auto pr = run_progressive(vs, plan, c);
  const auto ir = irls_solve(vs, plan.stages[0], DisparityField(32, 24), c);
  REQUIRE(pr.stages.size() == 1);
  CHECK(testing::max_abs_diff(pr.stages[0].w_total.field(), ir.w.field()) < 1e-12);
  CHECK(pr.sigma.history() == ir.sigma.history());
}

TEST_CASE("residual shrinks across stages on a constant scene") {
  const ViewSet vs = plane_views(48, 32, linear_array(5), 2, 0.4);
  const auto plan = plan_gate(vs, 1, 1);
  REQUIRE(plan.stages.size() == 2);
  SolverConfig c;
  c.alpha = 0.05;
  c.irls_iters = 4;
  const auto pr = run_progressive(vs, plan, c);
  const double r1 = mean_abs(pr.stages[0].w_residual.field());
  const double r2 = mean_abs(pr.stages[1].w_residual.field());
  CHECK(r2 < r1);
  // Accumulation is the running sum of residuals.
  Field sum(48, 32);
  for (const auto& st : pr.stages) {
    for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += st.w_residual.field()[i];
  }
  CHECK(testing::max_abs_diff(sum, pr.stages.back().w_total.field()) < 1e-12);
  double err = 0.0;
  for (int y = 8; y < 24; ++y) {
    for (int x = 8; x < 40; ++x) err += std::abs(pr.stages.back().w_total(x, y) - 0.4);
  }
  CHECK(err / (16 * 32) < 0.05);
}

TEST_CASE("diagnostics have no observer effect") {
  const ViewSet vs = plane_views(32, 24, linear_array(5), 2, 0.3);
  const auto plan = plan_gate(vs, 1, 1);
  SolverConfig c;
  c.irls_iters = 3;
  ProgressiveOptions quiet;
  ProgressiveOptions loud;
  loud.diagnostics = true;
  const auto a = run_progressive(vs, plan, c, quiet);
  const auto b = run_progressive(vs, plan, c, loud);
  REQUIRE(a.stages.size() == b.stages.size());
  for (std::size_t s = 0; s < a.stages.size(); ++s) {
    CHECK(a.stages[s].w_total == b.stages[s].w_total);
    CHECK(a.stages[s].trace.empty());
    CHECK(b.stages[s].trace.size() == 4);
  }
}

TEST_CASE("low-pass fallback runs when the prior bound is large") {
  const ViewSet vs = plane_views(64, 48, linear_array(3), 1, 1.5);
  const auto plan = plan_gate(vs, 1, 1);
  SolverConfig c;
  c.irls_iters = 4;
  ProgressiveOptions opt;
  opt.initial_disparity_bound = 1.5;
  const auto r = run_progressive(vs, plan, c, opt);
  CHECK(r.stages[0].lowpass.needed);
  CHECK(r.stages[0].lowpass.levels >= 1);
  c.coarse_to_fine = false;
  const auto off = run_progressive(vs, plan, c, opt);
  CHECK_FALSE(off.stages[0].lowpass.needed);
}

TEST_CASE("warping always resamples the originals") {
  const ViewSet vs = plane_views(24, 16, linear_array(5), 2, 0.2);
  const std::vector<std::size_t> active{0, 1, 2, 3, 4};
  const auto zero = warp_to_reference(vs, active, DisparityField(24, 16));
  REQUIRE(zero.size() == 4);
  CHECK(testing::max_abs_diff(zero[0].image, vs[0].image.field()) == 0.0);
  const DisparityField w(24, 16, 0.2);
  const auto first = warp_to_reference(vs, active, w);
  const auto again = warp_to_reference(vs, active, w);
  const auto up = upsample_views(vs);
  const auto cached = warp_to_reference(vs, active, w, &up);
  for (std::size_t i = 0; i < first.size(); ++i) {
    CHECK(testing::max_abs_diff(first[i].image, again[i].image) == 0.0);
    CHECK(testing::max_abs_diff(first[i].image, cached[i].image) == 0.0);
  }
  // Aligned views match the reference away from the borders.
  for (int y = 4; y < 12; ++y) {
    for (int x = 6; x < 18; ++x) {
      CHECK(std::abs(first[0].image(x, y) - vs.reference().image.field()(x, y)) < 2e-2);
    }
  }
}
