#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "mvde/harness.hpp"
#include "mvde/hires_warp.hpp"
#include "support.hpp"

using namespace mvde;
namespace fs = std::filesystem;

namespace {

Dataset tiny_slats(int n_views, int width, int height, double noise_var) {
  SceneSpec spec;
  spec.n_views = n_views;
  spec.width = width;
  spec.height = height;
  spec.slats = {{width * 0.3, width * 0.1}, {width * 0.65, width * 0.12}};
  spec.texture_seed = 3;
  auto scene = generate_slats(spec);
  std::vector<View> views;
  for (std::size_t i = 0; i < scene.views.size(); ++i) {
    views.push_back({add_noise(scene.views[i].image, noise_var, 100 + i), scene.views[i].baseline});
  }
  return {"tiny", ViewSet(std::move(views), scene.views.reference_index()), scene.gt,
          GroundTruthGrid::doubled, std::nullopt, false};
}

}  // namespace

TEST_CASE("rmse_hypotheses examples") {
  // Estimate whose upsampling equals a constant ground truth.
  const DisparityField est(5, 4, 0.3);
  const DisparityField gt(10, 8, 0.3, Resolution::doubled);
  CHECK(rmse_hypotheses(est, gt) == doctest::Approx(0.0).epsilon(1e-15));
  const DisparityField off(5, 4, 0.3 + 0.07);
  CHECK(rmse_hypotheses(off, gt) == doctest::Approx(0.07).epsilon(1e-12));
  CHECK_THROWS_AS(rmse_hypotheses(est, DisparityField(9, 8)), ParameterError);

  // Naive triple loop: hypotheses by index arithmetic, nearest neighbour
  // upsampling by integer division.
  std::mt19937_64 rng(12);
  const Field e = testing::random_field(6, 6, rng);
  const Field g = testing::random_field(12, 12, rng);
  double sum = 0.0;
  for (int hy = -1; hy <= 1; ++hy) {
    for (int hx = -1; hx <= 1; ++hx) {
      for (int y = 0; y < 12; ++y) {
        for (int x = 0; x < 12; ++x) {
          const int sx = std::clamp(x + hx, 0, 11);
          const int sy = std::clamp(y + hy, 0, 11);
          const double d = e(sx / 2, sy / 2) - g(x, y);
          sum += d * d;
        }
      }
    }
  }
  const double expect = std::sqrt(sum / (9.0 * 144.0));
  CHECK(rmse_hypotheses(DisparityField(e), DisparityField(g, Resolution::doubled)) ==
        doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("rmse_hypotheses is zero only for exact matches") {
  Field e(3, 3);
  e(1, 1) = 1.0;
  // The nearest-neighbour image of e: not matched by every hypothesis.
  const auto up = upsample_disparity_nn(DisparityField(e));
  Field g = up.field();
  for (double& v : g.samples()) v *= 0.5;
  CHECK(rmse_hypotheses(DisparityField(e), DisparityField(g, Resolution::doubled)) > 0.0);
}

TEST_CASE("rmse_plain examples") {
  std::mt19937_64 rng(5);
  const Field a = testing::random_field(7, 3, rng);
  CHECK(rmse_plain(DisparityField(a), DisparityField(a)) == 0.0);
  Field b = a;
  for (double& v : b.samples()) v += 0.1;
  CHECK(rmse_plain(DisparityField(b), DisparityField(a)) == doctest::Approx(0.1).epsilon(1e-12));
  const Field c = testing::random_field(7, 3, rng);
  double s = 0.0;
  for (int y = 0; y < 3; ++y) {
    for (int x = 0; x < 7; ++x) s += (a(x, y) - c(x, y)) * (a(x, y) - c(x, y));
  }
  CHECK(rmse_plain(DisparityField(a), DisparityField(c)) ==
        doctest::Approx(std::sqrt(s / 21.0)).epsilon(1e-12));
  CHECK_THROWS_AS(rmse_plain(DisparityField(a), DisparityField(3, 7)), ParameterError);
}

TEST_CASE("method names") {
  CHECK(method_name(Method::l2_l2) == "L2-L2");
  CHECK(method_name(Method::l2_l1) == "L2-L1");
  CHECK(method_name(Method::l1_l1) == "L1-L1");
  CHECK(method_name(Method::welsch_l1) == "Welsch-L1");
  for (Method m : kAllMethods) {
    CHECK(parse_method(method_cli_name(m)) == m);
    CHECK(parse_method(method_name(m)) == m);
  }
  CHECK_THROWS_AS(parse_method("l3-l3"), ParameterError);
  const SolverConfig w = configure(Method::welsch_l1, SolverConfig{}, 0.2);
  CHECK(w.alpha == 0.2);
  CHECK(w.data_penalty.is_auto());
  CHECK(w.reg_penalty.tag == PenaltyTag::huber_l1);
  const SolverConfig l = configure(Method::l2_l2, SolverConfig{}, 1.0);
  CHECK(l.data_penalty.tag == PenaltyTag::l2);
  CHECK(l.reg_penalty.tag == PenaltyTag::l2);
  CHECK(configure(Method::l1_l1, SolverConfig{}, 1.0).data_penalty.tag == PenaltyTag::huber_l1);
}

TEST_CASE("csv output") {
  const ExperimentRow row{Method::welsch_l1, 0.025, 17, 0.123456789, 0.0, 7, 42};
  const std::vector<ExperimentRow> one{row};
  const std::string text = format_csv(one);
  CHECK(text == std::string(kCsvHeader) + "\nWelsch-L1,0.025,17,0.123457,0,7,42\n");
  const fs::path p = fs::temp_directory_path() / "mvde_test_rows.csv";
  emit_csv(one, p);
  std::ifstream in(p);
  std::string line;
  int lines = 0;
  while (std::getline(in, line)) ++lines;
  CHECK(lines == 2);

  std::vector<ExperimentRow> many;
  for (Method m : kAllMethods) {
    many.push_back({m, 0.5, 3, 0.25, 1.5, 0, 1});
    many.push_back({m, 2, 31, 0.125, 0.0, 14, 1});
  }
  const auto parsed = parse_csv(format_csv(many));
  CHECK(parsed == many);
  CHECK_THROWS_AS(format_csv(std::vector<ExperimentRow>{}), ParameterError);
  CHECK_THROWS_AS(emit_csv(std::vector<ExperimentRow>{}, p), ParameterError);
}

TEST_CASE("csv parser handles quoted fields") {
  const std::string text = std::string(kCsvHeader) + "\r\n\"L2-L2\",\"0.5\",3,0.1,0,0,9\r\n";
  const auto rows = parse_csv(text);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].method == Method::l2_l2);
  CHECK(rows[0].seed == 9);
  CHECK_THROWS_AS(parse_csv("nonsense\n1,2\n"), ParameterError);
}

TEST_CASE("best-alpha envelope lies below every curve") {
  std::vector<ExperimentRow> rows;
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.05, 0.5);
  for (Method m : {Method::l2_l2, Method::welsch_l1}) {
    for (double a : {0.1, 0.5, 2.0}) {
      for (std::size_t s = 0; s < 5; ++s) rows.push_back({m, a, 3 + 2 * s, u(rng), 0, s, 0});
    }
  }
  const auto env = best_alpha_envelope(rows);
  CHECK(env.size() == 10);
  for (const auto& r : rows) {
    const auto best = envelope_at(env, r.method, r.n_views);
    REQUIRE(best.has_value());
    CHECK(*best <= r.rmse);
  }
  CHECK_FALSE(envelope_at(env, Method::l1_l1, 3).has_value());
}

TEST_CASE("configuration parsing") {
  const SolverConfig c = parse_solver_config(
      "# comment\n"
      "alpha = 0.5\n"
      "data_penalty = welsch:0.2\n"
      "reg_penalty = huber:0.001\n"
      "\n"
      "irls_iters = 3\n"
      "cg_tol = 1e-4\n"
      "gradient_mode = paper_sum\n"
      "reg_form = literal\n"
      "preconditioner = jacobi\n"
      "coarse_to_fine = false\n"
      "seed = 9\n");
  CHECK(c.alpha == 0.5);
  CHECK(c.data_penalty.tag == PenaltyTag::welsch);
  CHECK(*c.data_penalty.sigma == 0.2);
  CHECK(c.reg_penalty.epsilon == 0.001);
  CHECK(c.irls_iters == 3);
  CHECK(c.cg_tol == 1e-4);
  CHECK(c.gradient_mode == GradientMode::paper_sum);
  CHECK(c.reg_form == RegularizerForm::literal);
  CHECK(c.preconditioner == Preconditioner::jacobi);
  CHECK_FALSE(c.coarse_to_fine);
  CHECK(c.seed == 9);
  CHECK_THROWS_AS(parse_solver_config("bogus = 1\n"), ParameterError);
  CHECK_THROWS_AS(parse_solver_config("alpha = x\n"), ParameterError);
  CHECK_THROWS_AS(parse_solver_config("alpha 1\n"), ParameterError);
  CHECK_THROWS_AS(parse_solver_config("cg_tol = -1\n"), ParameterError);
}

TEST_CASE("schedule parsing") {
  const Dataset ds = tiny_slats(7, 32, 8, 0.0);
  CHECK(parse_schedule(ds.views, "gate:k=1,c=1").stages.size() == 3);
  CHECK(parse_schedule(ds.views, "gate:k=1,c=2").stages.size() == 2);
  CHECK(parse_schedule(ds.views, "crosshair").stages.size() == 6);
  CHECK(default_plan(ds, SolverConfig{}).stages.size() == 3);
  CHECK_THROWS_AS(parse_schedule(ds.views, "spiral"), ParameterError);
}

TEST_CASE("one cell reproduces a direct solve") {
  const Dataset ds = tiny_slats(3, 32, 16, 0.01);
  const auto plan = default_plan(ds, SolverConfig{});
  REQUIRE(plan.stages.size() == 1);
  SolverConfig base;
  base.irls_iters = 3;
  const std::vector<Method> methods{Method::welsch_l1};
  const std::vector<double> alphas{0.2};
  const auto res = run_experiment(ds, methods, alphas, plan, base);
  REQUIRE(res.rows.size() == 1);
  CHECK(res.failures.empty());
  const SolverConfig c = configure(Method::welsch_l1, base, 0.2);
  const auto direct = irls_solve(ds.views, plan.stages[0], DisparityField(32, 16), c);
  CHECK(res.rows[0].rmse == doctest::Approx(rmse_hypotheses(direct.w, *ds.gt)).epsilon(1e-12));
  CHECK(res.rows[0].n_views == 3);
  CHECK(res.rows[0].stage == 0);
  CHECK(res.rows[0].runtime_s == 0.0);
}

TEST_CASE("full sweep row count and thread independence") {
  const Dataset ds = tiny_slats(31, 32, 8, 0.01);
  const auto plan = default_plan(ds, SolverConfig{});
  REQUIRE(plan.stages.size() == 15);
  SolverConfig base;
  base.irls_iters = 1;
  base.cg_tol = 1e-3;
  const std::vector<double> alphas{0.01, 0.025, 0.05, 0.1, 0.2, 0.5, 1, 2, 5};
  ExperimentOptions one;
  const auto a = run_experiment(ds, kAllMethods, alphas, plan, base, one);
  CHECK(a.rows.size() == 540);
  CHECK(a.failures.empty());
  ExperimentOptions two;
  two.threads = 2;
  const auto b = run_experiment(ds, kAllMethods, alphas, plan, base, two);
  CHECK(format_csv(a.rows) == format_csv(b.rows));
  for (std::size_t i = 1; i < a.rows.size(); ++i) {
    const auto& p = a.rows[i - 1];
    const auto& q = a.rows[i];
    const bool ordered = p.method != q.method ? p.method < q.method
                         : p.alpha != q.alpha ? p.alpha < q.alpha
                                              : p.stage < q.stage;
    CHECK(ordered);
  }
}
