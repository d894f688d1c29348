#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <sstream>

#include "mvde/data.hpp"
#include "mvde/harness.hpp"
#include "mvde/schedule.hpp"

namespace {

enum Exit { kOk = 0, kUsage = 2, kData = 3, kNumerical = 4 };

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

struct Common {
  std::string config_file;
  std::vector<std::string> overrides;

  void add(CLI::App* app) {
    app->add_option("--config", config_file, "Solver configuration file (key = value)");
    app->add_option("--set", overrides, "Override one config field, KEY=VALUE")
        ->take_all();
  }

  mvde::SolverConfig config() const {
    mvde::SolverConfig c;
    if (!config_file.empty()) c = mvde::load_solver_config(config_file);
    for (const std::string& kv : overrides) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) {
        throw mvde::ParameterError("--set expects KEY=VALUE, got " + kv);
      }
      mvde::set_config_value(c, kv.substr(0, eq), kv.substr(eq + 1));
    }
    c.validate();
    return c;
  }
};

int gen_slats(const std::string& out, mvde::SceneSpec spec, double noise_var,
              std::uint64_t seed) {
  spec.slats = mvde::SceneSpec::default_slats(spec.width);
  mvde::SlatsScene scene = mvde::generate_slats(spec);
  if (noise_var > 0.0) {
    std::vector<mvde::View> noisy;
    for (std::size_t i = 0; i < scene.views.size(); ++i) {
      noisy.push_back({mvde::add_noise(scene.views[i].image, noise_var, seed + i),
                       scene.views[i].baseline});
    }
    scene.views = mvde::ViewSet(std::move(noisy), scene.views.reference_index());
  }
  mvde::write_slats_dataset(scene, out);
  std::cout << "wrote " << scene.views.size() << " views (" << spec.width << "x"
            << spec.height << ") to " << out << "\n";
  return kOk;
}

int estimate(const std::string& data, const std::string& method, double alpha,
             const std::string& schedule, const std::string& out_disp,
             const std::string& out_png, const mvde::SolverConfig& base) {
  const mvde::Dataset ds = mvde::load_dataset(data);
  const mvde::SolverConfig config =
      mvde::configure(mvde::parse_method(method), base, alpha);
  const mvde::StagePlan plan = schedule.empty()
                                   ? mvde::default_plan(ds, config)
                                   : mvde::parse_schedule(ds.views, schedule);
  mvde::ProgressiveOptions opts;
  opts.initial_disparity_bound = ds.disparity_bound;
  const mvde::ProgressiveResult r = mvde::run_progressive(ds.views, plan, config, opts);
  const mvde::DisparityField& w = r.stages.back().w_total;
  mvde::write_pfm(w.field(), out_disp);
  if (!out_png.empty()) mvde::write_pgm(w.field(), out_png);
  std::cout << "stages " << r.stages.size() << ", views "
            << r.stages.back().active.size();
  if (ds.gt) std::cout << ", rmse " << mvde::dataset_rmse(ds, w);
  std::cout << "\n";
  return kOk;
}

int sweep(const std::string& data, const std::string& methods,
          const std::string& alphas, const std::string& schedule,
          const std::string& out, int threads, bool record_runtime,
          const mvde::SolverConfig& config) {
  const mvde::Dataset ds = mvde::load_dataset(data);
  std::vector<mvde::Method> ms;
  for (const auto& m : split_list(methods)) ms.push_back(mvde::parse_method(m));
  std::vector<double> as;
  for (const auto& a : split_list(alphas)) {
    try {
      as.push_back(std::stod(a));
    } catch (const std::logic_error&) {
      throw mvde::ParameterError("bad alpha '" + a + "'");
    }
  }
  const mvde::StagePlan plan = schedule.empty()
                                   ? mvde::default_plan(ds, config)
                                   : mvde::parse_schedule(ds.views, schedule);
  mvde::ExperimentOptions opts;
  opts.threads = threads;
  opts.record_runtime = record_runtime;
  opts.on_cell_done = [](mvde::Method m, double a) {
    std::cerr << "done " << mvde::method_name(m) << " alpha=" << a << "\n";
  };
  const mvde::ExperimentResult r = mvde::run_experiment(ds, ms, as, plan, config, opts);
  for (const auto& f : r.failures) {
    std::cerr << "failed " << mvde::method_name(f.method) << " alpha=" << f.alpha
              << ": " << f.message << "\n";
  }
  if (r.rows.empty()) throw mvde::NumericalError("every experiment cell failed", 0);
  mvde::emit_csv(r.rows, out);
  std::cout << "wrote " << r.rows.size() << " rows to " << out << "\n";
  return r.failures.empty() ? kOk : kNumerical;
}

int eval(const std::string& est, const std::string& gt, bool hypotheses) {
  const mvde::DisparityField e(mvde::read_pfm(est));
  const mvde::DisparityField g(mvde::read_pfm(gt), hypotheses
                                                       ? mvde::Resolution::doubled
                                                       : mvde::Resolution::base);
  const double rmse = hypotheses ? mvde::rmse_hypotheses(e, g) : mvde::rmse_plain(e, g);
  std::printf("%.6g\n", rmse);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multiview disparity estimation with robust data terms"};
  app.require_subcommand(1);

  auto* gen = app.add_subcommand("gen-slats", "Render the synthetic slats dataset");
  std::string gen_out;
  mvde::SceneSpec gen_spec;
  double gen_noise = 0.01;
  std::uint64_t gen_seed = 0;
  gen->add_option("--out", gen_out, "Output directory")->required();
  gen->add_option("--views", gen_spec.n_views, "Number of views (odd)")->capture_default_str();
  gen->add_option("--width", gen_spec.width)->capture_default_str();
  gen->add_option("--height", gen_spec.height)->capture_default_str();
  gen->add_option("--contrast", gen_spec.texture_contrast, "Texture standard deviation")
      ->capture_default_str();
  gen->add_option("--anisotropy", gen_spec.texture_anisotropy,
                  "Vertical/horizontal texture frequency ratio")
      ->capture_default_str();
  gen->add_option("--texture-seed", gen_spec.texture_seed)->capture_default_str();
  gen->add_option("--slat-w", gen_spec.slat_w, "Slat depth (normalised w)")
      ->capture_default_str();
  gen->add_option("--background-w", gen_spec.background_w, "Background depth (normalised w)")
      ->capture_default_str();
  gen->add_option("--noise-var", gen_noise, "Gaussian noise variance")->capture_default_str();
  gen->add_option("--seed", gen_seed, "Noise seed")->capture_default_str();

  auto* est = app.add_subcommand("estimate", "Estimate a disparity field");
  std::string est_data, est_method = "welsch-l1", est_schedule, est_out, est_png;
  double est_alpha = 0.1;
  Common est_common;
  est->add_option("--data", est_data, "Dataset directory")->required();
  est->add_option("--method", est_method)->capture_default_str();
  est->add_option("--alpha", est_alpha)->capture_default_str();
  est->add_option("--schedule", est_schedule, "gate:k=K,c=C or crosshair");
  est->add_option("--out-disp", est_out, "Output PFM")->required();
  est->add_option("--out-png", est_png, "Optional PGM preview");
  est_common.add(est);

  auto* sw = app.add_subcommand("sweep", "Methods x alphas experiment to CSV");
  std::string sw_data, sw_methods = "l2-l2,l2-l1,l1-l1,welsch-l1",
                       sw_alphas = "0.01,0.025,0.05,0.1,0.2,0.5,1,2,5", sw_schedule,
                       sw_out;
  int sw_threads = 1;
  bool sw_runtime = false;
  Common sw_common;
  sw->add_option("--data", sw_data, "Dataset directory")->required();
  sw->add_option("--methods", sw_methods)->capture_default_str();
  sw->add_option("--alphas", sw_alphas)->capture_default_str();
  sw->add_option("--schedule", sw_schedule, "gate:k=K,c=C or crosshair");
  sw->add_option("--out", sw_out, "Output CSV")->required();
  sw->add_option("--threads", sw_threads)->capture_default_str();
  sw->add_flag("--record-runtime", sw_runtime, "Write wall-clock seconds per row");
  sw_common.add(sw);

  auto* ev = app.add_subcommand("eval", "RMSE of an estimate against ground truth");
  std::string ev_est, ev_gt;
  bool ev_hyp = false;
  ev->add_option("--est", ev_est)->required();
  ev->add_option("--gt", ev_gt)->required();
  ev->add_flag("--hypotheses", ev_hyp, "Ground truth is at twice the resolution");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*gen) return gen_slats(gen_out, gen_spec, gen_noise, gen_seed);
    if (*est) {
      return estimate(est_data, est_method, est_alpha, est_schedule, est_out, est_png,
                      est_common.config());
    }
    if (*sw) {
      return sweep(sw_data, sw_methods, sw_alphas, sw_schedule, sw_out, sw_threads,
                   sw_runtime, sw_common.config());
    }
    if (*ev) return eval(ev_est, ev_gt, ev_hyp);
  } catch (const mvde::ParameterError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const mvde::PlanError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const mvde::SceneError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const mvde::IngestionError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kData;
  } catch (const mvde::DegenerateGeometryError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kData;
  } catch (const mvde::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kNumerical;
  }
  return kUsage;
}
