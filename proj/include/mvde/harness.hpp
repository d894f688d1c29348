#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mvde/core.hpp"
#include "mvde/data.hpp"
#include "mvde/schedule.hpp"

namespace mvde {

/// Data-term / regulariser cost pairs compared in the experiments.
enum class Method : std::uint8_t { l2_l2, l2_l1, l1_l1, welsch_l1 };

inline constexpr Method kAllMethods[] = {Method::l2_l2, Method::l2_l1,
                                         Method::l1_l1, Method::welsch_l1};

/// "L2-L2", "L2-L1", "L1-L1", "Welsch-L1".
std::string_view method_name(Method m);
/// "l2-l2", "l2-l1", "l1-l1", "welsch-l1".
std::string_view method_cli_name(Method m);
/// Accepts either spelling, case-insensitively. Throws ParameterError.
Method parse_method(std::string_view name);

/// `base` with the penalties of `m` and the given alpha.
SolverConfig configure(Method m, const SolverConfig& base, double alpha);

/// RMSE against a 2x ground truth over all nine nearest-neighbour
/// hypotheses of the upsampled estimate, in the estimate's pixel units.
double rmse_hypotheses(const DisparityField& w_est, const DisparityField& gt);

/// Plain RMSE between equally sized fields.
double rmse_plain(const DisparityField& w_est, const DisparityField& gt);

/// Metric matching the dataset's ground-truth grid.
double dataset_rmse(const Dataset& ds, const DisparityField& w_est);

struct ExperimentRow {
  Method method = Method::welsch_l1;
  double alpha = 0.0;
  std::size_t n_views = 0;
  double rmse = 0.0;
  double runtime_s = 0.0;
  std::size_t stage = 0;
  std::uint64_t seed = 0;

  bool operator==(const ExperimentRow&) const = default;
};

struct ExperimentFailure {
  Method method;
  double alpha;
  std::string message;
};

struct ExperimentOptions {
  int threads = 1;
  /// Wall-clock per row (cumulative over stages). Off by default so that
  /// output bytes only depend on inputs.
  bool record_runtime = false;
  /// Optional (method, alpha) progress callback, called from one thread
  /// at a time.
  std::function<void(Method, double)> on_cell_done;
};

struct ExperimentResult {
  std::vector<ExperimentRow> rows;  ///< sorted by (method, alpha, stage)
  std::vector<ExperimentFailure> failures;
};

/// Runs every (method, alpha) cell with run_progressive and records the
/// RMSE at each stage. A failing cell is reported in `failures` and the
/// run continues.
ExperimentResult run_experiment(const Dataset& ds,
                                std::span<const Method> methods,
                                std::span<const double> alphas,
                                const StagePlan& plan, const SolverConfig& config,
                                const ExperimentOptions& options = {});

/// Best RMSE over alpha for each (method, n_views).
struct EnvelopePoint {
  Method method;
  std::size_t n_views;
  double rmse;
  double alpha;
};
std::vector<EnvelopePoint> best_alpha_envelope(std::span<const ExperimentRow> rows);

/// Best-alpha RMSE of `m` at `n_views`, if present.
std::optional<double> envelope_at(std::span<const EnvelopePoint> env, Method m,
                                  std::size_t n_views);

inline constexpr const char* kCsvHeader =
    "method,alpha,n_views,rmse,runtime_s,stage,seed";

/// Header plus one line per row, 6 significant digits, RFC 4180 quoting.
/// Throws ParameterError for empty input.
std::string format_csv(std::span<const ExperimentRow> rows);
void emit_csv(std::span<const ExperimentRow> rows,
              const std::filesystem::path& path);
std::vector<ExperimentRow> parse_csv(const std::string& text);

/// Flat `key = value` configuration (blank lines and '#' comments
/// allowed). Keys mirror SolverConfig fields; penalties take l2, huber,
/// huber:EPS, welsch or welsch:SIGMA. Unknown keys raise ParameterError.
SolverConfig parse_solver_config(const std::string& text,
                                 SolverConfig base = {});
SolverConfig load_solver_config(const std::filesystem::path& path,
                                SolverConfig base = {});
/// Sets one field from its textual value.
void set_config_value(SolverConfig& config, const std::string& key,
                      const std::string& value);

/// `gate:k=K,c=C` or `crosshair`.
StagePlan parse_schedule(const ViewSet& views, const std::string& spec);
/// Crosshair for camera grids, otherwise the gate plan with the
/// config's k and c.
StagePlan default_plan(const Dataset& ds, const SolverConfig& config);

}  // namespace mvde
