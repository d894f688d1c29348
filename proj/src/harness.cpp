#include "mvde/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "mvde/hires_warp.hpp"

namespace mvde {

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

double parse_double(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double v = std::stod(value, &used);
    if (used == value.size()) return v;
  } catch (const std::logic_error&) {
  }
  throw ParameterError(key + ": not a number: '" + value + "'");
}

long long parse_integer(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const long long v = std::stoll(value, &used);
    if (used == value.size()) return v;
  } catch (const std::logic_error&) {
  }
  throw ParameterError(key + ": not an integer: '" + value + "'");
}

PenaltyKind parse_penalty(const std::string& key, const std::string& value) {
  const std::string v = lower(value);
  const auto colon = v.find(':');
  const std::string name = v.substr(0, colon);
  const std::optional<double> arg =
      colon == std::string::npos
          ? std::nullopt
          : std::optional<double>(parse_double(key, v.substr(colon + 1)));
  PenaltyKind kind;
  if (name == "l2" && !arg) {
    kind = PenaltyKind::l2();
  } else if (name == "huber" || name == "l1") {
    kind = PenaltyKind::huber_l1(arg.value_or(1e-4));
  } else if (name == "welsch") {
    kind = PenaltyKind::welsch(arg);
  } else {
    throw ParameterError(key + ": unknown penalty '" + value + "'");
  }
  kind.validate();
  return kind;
}

bool parse_bool(const std::string& key, const std::string& value) {
  const std::string v = lower(value);
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ParameterError(key + ": expected true or false, got '" + value + "'");
}

std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

std::vector<std::vector<std::string>> split_csv(const std::string& text) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string field;
  bool quoted = false;
  bool any = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
      continue;
    }
    if (c == '"') {
      quoted = true;
      any = true;
    } else if (c == ',') {
      record.push_back(std::move(field));
      field.clear();
      any = true;
    } else if (c == '\r' || c == '\n') {
      if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
      if (any || !field.empty()) {
        record.push_back(std::move(field));
        records.push_back(std::move(record));
      }
      field.clear();
      record.clear();
      any = false;
    } else {
      field += c;
      any = true;
    }
  }
  if (quoted) throw ParameterError("CSV: unterminated quoted field");
  if (any || !field.empty()) {
    record.push_back(std::move(field));
    records.push_back(std::move(record));
  }
  return records;
}

}  // namespace

std::string_view method_name(Method m) {
  switch (m) {
    case Method::l2_l2: return "L2-L2";
    case Method::l2_l1: return "L2-L1";
    case Method::l1_l1: return "L1-L1";
    case Method::welsch_l1: return "Welsch-L1";
  }
  return "?";
}

std::string_view method_cli_name(Method m) {
  switch (m) {
    case Method::l2_l2: return "l2-l2";
    case Method::l2_l1: return "l2-l1";
    case Method::l1_l1: return "l1-l1";
    case Method::welsch_l1: return "welsch-l1";
  }
  return "?";
}

Method parse_method(std::string_view name) {
  const std::string n = lower(name);
  for (Method m : kAllMethods) {
    if (n == method_cli_name(m)) return m;
  }
  throw ParameterError("unknown method '" + std::string(name) +
                       "' (expected l2-l2, l2-l1, l1-l1 or welsch-l1)");
}

SolverConfig configure(Method m, const SolverConfig& base, double alpha) {
  SolverConfig c = base;
  c.alpha = alpha;
  const double eps = base.reg_penalty.tag == PenaltyTag::huber_l1
                         ? base.reg_penalty.epsilon
                         : 1e-4;
  switch (m) {
    case Method::l2_l2:
      c.data_penalty = PenaltyKind::l2();
      c.reg_penalty = PenaltyKind::l2();
      break;
    case Method::l2_l1:
      c.data_penalty = PenaltyKind::l2();
      c.reg_penalty = PenaltyKind::huber_l1(eps);
      break;
    case Method::l1_l1:
      c.data_penalty = PenaltyKind::huber_l1(eps);
      c.reg_penalty = PenaltyKind::huber_l1(eps);
      break;
    case Method::welsch_l1:
      c.data_penalty = base.data_penalty.tag == PenaltyTag::welsch
                           ? base.data_penalty
                           : PenaltyKind::welsch();
      c.reg_penalty = PenaltyKind::huber_l1(eps);
      break;
  }
  c.validate();
  return c;
}

double rmse_hypotheses(const DisparityField& w_est, const DisparityField& gt) {
  if (gt.width() != 2 * w_est.width() || gt.height() != 2 * w_est.height()) {
    throw ParameterError("rmse_hypotheses: ground truth must be exactly twice "
                         "the estimate size");
  }
  const HypothesisSet hyps = make_hypotheses(upsample_disparity_nn(w_est));
  const Field& g = gt.field();
  double sum = 0.0;
  for (const Field& h : hyps.fields()) {
    for (std::size_t i = 0; i < g.size(); ++i) {
      // Hypotheses carry doubled values; the ground truth is in base units.
      const double d = 0.5 * h[i] - g[i];
      sum += d * d;
    }
  }
  return std::sqrt(sum / (HypothesisSet::kCount * static_cast<double>(g.size())));
}

double rmse_plain(const DisparityField& w_est, const DisparityField& gt) {
  require_same_shape(w_est.field(), gt.field(), "rmse_plain");
  double sum = 0.0;
  for (std::size_t i = 0; i < gt.field().size(); ++i) {
    const double d = w_est.field()[i] - gt.field()[i];
    sum += d * d;
  }
  return std::sqrt(sum / static_cast<double>(gt.field().size()));
}

double dataset_rmse(const Dataset& ds, const DisparityField& w_est) {
  if (!ds.gt) throw ParameterError("dataset '" + ds.name + "' has no ground truth");
  return ds.gt_grid == GroundTruthGrid::doubled ? rmse_hypotheses(w_est, *ds.gt)
                                                : rmse_plain(w_est, *ds.gt);
}

ExperimentResult run_experiment(const Dataset& ds, std::span<const Method> methods,
                                std::span<const double> alphas,
                                const StagePlan& plan, const SolverConfig& config,
                                const ExperimentOptions& options) {
  if (!ds.gt) throw ParameterError("dataset '" + ds.name + "' has no ground truth");
  if (methods.empty() || alphas.empty()) {
    throw ParameterError("run_experiment needs at least one method and alpha");
  }
  if (options.threads < 1) throw ParameterError("threads must be at least 1");

  struct Cell {
    Method method;
    double alpha;
    std::vector<ExperimentRow> rows;
    std::optional<std::string> error;
  };
  std::vector<Cell> cells;
  for (Method m : methods) {
    for (double a : alphas) {
      configure(m, config, a);  // validate up front
      cells.push_back({m, a, {}, std::nullopt});
    }
  }

  const std::vector<Field> upsampled = upsample_views(ds.views);
  ProgressiveOptions popts;
  popts.initial_disparity_bound = ds.disparity_bound;
  popts.upsampled = &upsampled;

  std::atomic<std::size_t> next{0};
  std::mutex report;
  const auto worker = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++) {
      Cell& cell = cells[i];
      const auto start = std::chrono::steady_clock::now();
      try {
        const SolverConfig c = configure(cell.method, config, cell.alpha);
        const ProgressiveResult r = run_progressive(ds.views, plan, c, popts);
        for (std::size_t s = 0; s < r.stages.size(); ++s) {
          const double elapsed =
              options.record_runtime
                  ? std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
                        .count()
                  : 0.0;
          cell.rows.push_back({cell.method, cell.alpha, r.stages[s].active.size(),
                               dataset_rmse(ds, r.stages[s].w_total), elapsed, s,
                               config.seed});
        }
      } catch (const Error& e) {
        cell.rows.clear();
        cell.error = e.what();
      }
      if (options.on_cell_done) {
        std::lock_guard lock(report);
        options.on_cell_done(cell.method, cell.alpha);
      }
    }
  };
  if (options.threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int t = 0; t < options.threads; ++t) pool.emplace_back(worker);
  }

  ExperimentResult out;
  for (Cell& cell : cells) {
    if (cell.error) {
      out.failures.push_back({cell.method, cell.alpha, *cell.error});
    }
    for (auto& row : cell.rows) out.rows.push_back(row);
  }
  std::sort(out.rows.begin(), out.rows.end(),
            [](const ExperimentRow& a, const ExperimentRow& b) {
              if (a.method != b.method) return a.method < b.method;
              if (a.alpha != b.alpha) return a.alpha < b.alpha;
              return a.stage < b.stage;
            });
  return out;
}

std::vector<EnvelopePoint> best_alpha_envelope(std::span<const ExperimentRow> rows) {
  std::vector<EnvelopePoint> env;
  for (const ExperimentRow& r : rows) {
    auto it = std::find_if(env.begin(), env.end(), [&](const EnvelopePoint& p) {
      return p.method == r.method && p.n_views == r.n_views;
    });
    if (it == env.end()) {
      env.push_back({r.method, r.n_views, r.rmse, r.alpha});
    } else if (r.rmse < it->rmse) {
      it->rmse = r.rmse;
      it->alpha = r.alpha;
    }
  }
  std::sort(env.begin(), env.end(), [](const EnvelopePoint& a, const EnvelopePoint& b) {
    if (a.method != b.method) return a.method < b.method;
    return a.n_views < b.n_views;
  });
  return env;
}

std::optional<double> envelope_at(std::span<const EnvelopePoint> env, Method m,
                                  std::size_t n_views) {
  for (const EnvelopePoint& p : env) {
    if (p.method == m && p.n_views == n_views) return p.rmse;
  }
  return std::nullopt;
}

std::string format_csv(std::span<const ExperimentRow> rows) {
  if (rows.empty()) throw ParameterError("refusing to write a CSV with no rows");
  std::string out = kCsvHeader;
  out += '\n';
  for (const ExperimentRow& r : rows) {
    out += csv_field(method_name(r.method));
    out += ',' + csv_field(format_number(r.alpha));
    out += ',' + std::to_string(r.n_views);
    out += ',' + csv_field(format_number(r.rmse));
    out += ',' + csv_field(format_number(r.runtime_s));
    out += ',' + std::to_string(r.stage);
    out += ',' + std::to_string(r.seed);
    out += '\n';
  }
  return out;
}

void emit_csv(std::span<const ExperimentRow> rows, const std::filesystem::path& path) {
  const std::string text = format_csv(rows);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IngestionError(path.string(), "cannot open for writing");
  out << text;
  out.flush();
  if (!out) throw IngestionError(path.string(), "write failed");
}

std::vector<ExperimentRow> parse_csv(const std::string& text) {
  const auto records = split_csv(text);
  if (records.empty()) throw ParameterError("CSV: empty input");
  std::string header;
  for (std::size_t i = 0; i < records[0].size(); ++i) {
    header += (i ? "," : "") + records[0][i];
  }
  if (header != kCsvHeader) throw ParameterError("CSV: unexpected header " + header);
  std::vector<ExperimentRow> rows;
  for (std::size_t i = 1; i < records.size(); ++i) {
    const auto& f = records[i];
    if (f.size() != 7) {
      throw ParameterError("CSV: record " + std::to_string(i) + " has " +
                           std::to_string(f.size()) + " fields");
    }
    Method m = Method::welsch_l1;
    bool known = false;
    for (Method cand : kAllMethods) {
      if (f[0] == method_name(cand)) {
        m = cand;
        known = true;
      }
    }
    if (!known) throw ParameterError("CSV: unknown method " + f[0]);
    rows.push_back({m, parse_double("alpha", f[1]),
                    static_cast<std::size_t>(parse_integer("n_views", f[2])),
                    parse_double("rmse", f[3]), parse_double("runtime_s", f[4]),
                    static_cast<std::size_t>(parse_integer("stage", f[5])),
                    static_cast<std::uint64_t>(parse_integer("seed", f[6]))});
  }
  return rows;
}

void set_config_value(SolverConfig& c, const std::string& key,
                      const std::string& value) {
  if (key == "alpha") {
    c.alpha = parse_double(key, value);
  } else if (key == "data_penalty") {
    c.data_penalty = parse_penalty(key, value);
  } else if (key == "reg_penalty") {
    c.reg_penalty = parse_penalty(key, value);
  } else if (key == "dog_sigma") {
    c.dog_sigma = parse_double(key, value);
  } else if (key == "irls_iters") {
    c.irls_iters = static_cast<int>(parse_integer(key, value));
  } else if (key == "cg_tol") {
    c.cg_tol = parse_double(key, value);
  } else if (key == "cg_max_iters") {
    c.cg_max_iters = static_cast<int>(parse_integer(key, value));
  } else if (key == "schedule_k") {
    c.schedule_k = parse_double(key, value);
  } else if (key == "schedule_c") {
    c.schedule_c = parse_double(key, value);
  } else if (key == "gradient_mode") {
    const std::string v = lower(value);
    if (v == "average") {
      c.gradient_mode = GradientMode::average;
    } else if (v == "paper_sum") {
      c.gradient_mode = GradientMode::paper_sum;
    } else {
      throw ParameterError(key + ": expected average or paper_sum");
    }
  } else if (key == "reg_form") {
    const std::string v = lower(value);
    if (v == "edge_weighted") {
      c.reg_form = RegularizerForm::edge_weighted;
    } else if (v == "literal") {
      c.reg_form = RegularizerForm::literal;
    } else {
      throw ParameterError(key + ": expected edge_weighted or literal");
    }
  } else if (key == "preconditioner") {
    const std::string v = lower(value);
    if (v == "jacobi") {
      c.preconditioner = Preconditioner::jacobi;
    } else if (v == "incomplete_cholesky" || v == "ic") {
      c.preconditioner = Preconditioner::incomplete_cholesky;
    } else {
      throw ParameterError(key + ": expected jacobi or incomplete_cholesky");
    }
  } else if (key == "omega_max") {
    c.omega_max = parse_double(key, value);
  } else if (key == "coarse_to_fine") {
    c.coarse_to_fine = parse_bool(key, value);
  } else if (key == "seed") {
    const long long s = parse_integer(key, value);
    if (s < 0) throw ParameterError("seed must be non-negative");
    c.seed = static_cast<std::uint64_t>(s);
  } else {
    throw ParameterError("unknown configuration key '" + key + "'");
  }
}

SolverConfig parse_solver_config(const std::string& text, SolverConfig base) {
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ParameterError("config line " + std::to_string(line_no) +
                           ": expected key = value");
    }
    set_config_value(base, trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
  }
  base.validate();
  return base;
}

SolverConfig load_solver_config(const std::filesystem::path& path, SolverConfig base) {
  std::ifstream in(path);
  if (!in) throw IngestionError(path.string(), "cannot open file");
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return parse_solver_config(buf.str(), std::move(base));
  } catch (const ParameterError& e) {
    throw ParameterError(path.string() + ": " + e.what());
  }
}

StagePlan parse_schedule(const ViewSet& views, const std::string& spec) {
  const std::string s = lower(trim(spec));
  if (s == "crosshair") return plan_crosshair(views);
  if (s.rfind("gate", 0) == 0) {
    double k = 1.0;
    double c = 1.0;
    if (s.size() > 4) {
      if (s[4] != ':') throw ParameterError("schedule: expected gate:k=K,c=C");
      std::istringstream parts(s.substr(5));
      std::string item;
      while (std::getline(parts, item, ',')) {
        const auto eq = item.find('=');
        if (eq == std::string::npos) throw ParameterError("schedule: bad item " + item);
        const std::string key = trim(item.substr(0, eq));
        const double v = parse_double("schedule " + key, trim(item.substr(eq + 1)));
        if (key == "k") {
          k = v;
        } else if (key == "c") {
          c = v;
        } else {
          throw ParameterError("schedule: unknown parameter " + key);
        }
      }
    }
    return plan_gate(views, k, c);
  }
  throw ParameterError("schedule: expected gate:k=K,c=C or crosshair");
}

StagePlan default_plan(const Dataset& ds, const SolverConfig& config) {
  if (ds.grid_layout) return plan_crosshair(ds.views);
  return plan_gate(ds.views, config.schedule_k, config.schedule_c);
}

}  // namespace mvde
