#include "mvde/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "mvde/hires_warp.hpp"
#include "mvde/imgproc.hpp"

namespace mvde {

namespace {

void validate_plan(const ViewSet& views, const StagePlan& plan) {
  if (plan.stages.empty()) throw PlanError("plan has no stages");
  const std::size_t ref = views.reference_index();
  std::vector<std::size_t> previous;
  for (std::size_t s = 0; s < plan.stages.size(); ++s) {
    const auto& stage = plan.stages[s];
    if (!std::is_sorted(stage.begin(), stage.end()) ||
        std::adjacent_find(stage.begin(), stage.end()) != stage.end()) {
      throw PlanError("stage " + std::to_string(s) +
                      " must list distinct views in ascending order");
    }
    if (!std::binary_search(stage.begin(), stage.end(), ref)) {
      throw PlanError("stage " + std::to_string(s) + " omits the reference");
    }
    if (stage.back() >= views.size()) {
      throw PlanError("stage " + std::to_string(s) + " names an unknown view");
    }
    if (!std::includes(stage.begin(), stage.end(), previous.begin(),
                       previous.end())) {
      throw PlanError("stage " + std::to_string(s) +
                      " drops a view of the previous stage");
    }
    previous = stage;
  }
  if (plan.stages.front().size() < 2) {
    throw PlanError("first stage needs at least two views");
  }
}

Field zeros_like(const Field& f) { return Field(f.width(), f.height()); }

bool all_zero(const Field& f) {
  return std::all_of(f.samples().begin(), f.samples().end(),
                     [](double v) { return v == 0.0; });
}

BaselineVec negated(const BaselineVec& b) { return {-b.bx, -b.by}; }

/// 2x2 block mean, values halved (disparity in coarse pixels).
Field downsample_disparity(const Field& w) {
  Field out(w.width() / 2, w.height() / 2);
  for (int y = 0; y < out.height(); ++y) {
    for (int x = 0; x < out.width(); ++x) {
      out(x, y) = 0.125 * (w(2 * x, 2 * y) + w(2 * x + 1, 2 * y) +
                           w(2 * x, 2 * y + 1) + w(2 * x + 1, 2 * y + 1));
    }
  }
  return out;
}

/// Crops or replicates the last row/column so `f` becomes width x height.
Field fit_to(const Field& f, int width, int height) {
  Field out(width, height);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      out(x, y) = f(std::min(x, f.width() - 1), std::min(y, f.height() - 1));
    }
  }
  return out;
}

Field add(const Field& a, const Field& b) {
  Field out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b[i];
  return out;
}

double percentile95_abs(const Field& f) {
  std::vector<double> v(f.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::abs(f[i]);
  const std::size_t k = static_cast<std::size_t>(
      std::ceil(0.95 * static_cast<double>(v.size()))) - 1;
  std::nth_element(v.begin(), v.begin() + k, v.end());
  return v[k];
}

std::vector<LinearizedView> linearize_all(const Field& ref,
                                          const std::vector<Field>& images,
                                          const std::vector<Mask>& masks,
                                          std::span<const BaselineVec> baselines,
                                          const SolverConfig& config) {
  std::vector<LinearizedView> lin;
  lin.reserve(images.size());
  for (std::size_t i = 0; i < images.size(); ++i) {
    LinearizedView v = linearize_view(ref, images[i], baselines[i],
                                      config.dog_sigma, config.gradient_mode);
    v.mask = masks[i];
    lin.push_back(std::move(v));
  }
  return lin;
}

struct StageSolve {
  Field residual;
  std::vector<EnergyBreakdown> trace;
  std::vector<int> cg_iterations;
};

}  // namespace

std::vector<std::size_t> views_at_stage(const ViewSet& views, double k,
                                        double c, int stage) {
  if (!(k >= 1.0) || !(c > 0.0) || stage < 0) {
    throw ParameterError("views_at_stage requires k >= 1, c > 0, s >= 0");
  }
  const double gate = k + stage * c;
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < views.size(); ++i) {
    if (i == views.reference_index() ||
        views[i].baseline.inf_norm() <= gate + 1e-12) {
      out.push_back(i);
    }
  }
  return out;
}

StagePlan plan_gate(const ViewSet& views, double k, double c) {
  StagePlan plan{PlanMode::gate_formula, {}};
  for (int s = 0; plan.stages.empty() || plan.stages.back().size() < views.size();
       ++s) {
    auto subset = views_at_stage(views, k, c, s);
    if (subset.size() < 2) continue;
    if (plan.stages.empty() || subset.size() > plan.stages.back().size()) {
      plan.stages.push_back(std::move(subset));
    }
  }
  validate_plan(views, plan);
  return plan;
}

StagePlan plan_custom(const ViewSet& views, std::span<const std::size_t> order) {
  const std::size_t ref = views.reference_index();
  std::vector<std::size_t> sorted(order.begin(), order.end());
  std::sort(sorted.begin(), sorted.end());
  std::vector<std::size_t> expected;
  for (std::size_t i = 0; i < views.size(); ++i) {
    if (i != ref) expected.push_back(i);
  }
  if (sorted != expected) {
    throw PlanError("custom order must list every non-reference view once");
  }
  StagePlan plan{PlanMode::custom_order, {}};
  std::vector<std::size_t> current{ref};
  for (std::size_t idx : order) {
    current.insert(std::upper_bound(current.begin(), current.end(), idx), idx);
    plan.stages.push_back(current);
  }
  validate_plan(views, plan);
  return plan;
}

std::vector<std::size_t> crosshair_order(const ViewSet& views) {
  struct Key {
    double norm;
    int axis;
    double sign;
    std::size_t index;
  };
  std::vector<Key> keys;
  for (std::size_t i = 0; i < views.size(); ++i) {
    if (i == views.reference_index()) continue;
    const BaselineVec& b = views[i].baseline;
    const int axis = b.by == 0.0 ? 0 : (b.bx == 0.0 ? 1 : 2);
    const double component = axis == 1 ? b.by : b.bx;
    keys.push_back({b.inf_norm(), axis, component, i});
  }
  std::sort(keys.begin(), keys.end(), [](const Key& l, const Key& r) {
    if (l.norm != r.norm) return l.norm < r.norm;
    if (l.axis != r.axis) return l.axis < r.axis;
    if (l.sign != r.sign) return l.sign < r.sign;
    return l.index < r.index;
  });
  std::vector<std::size_t> out;
  for (const Key& k : keys) out.push_back(k.index);
  return out;
}

StagePlan plan_crosshair(const ViewSet& views) {
  const auto order = crosshair_order(views);
  return plan_custom(views, order);
}

LowpassDecision needs_lowpass(std::span<const BaselineVec> baselines,
                              const DisparityField& residual, double omega_max) {
  if (!(omega_max > 0.0) || omega_max > std::numbers::pi + 1e-12) {
    throw ParameterError("omega_max must lie in (0, pi]");
  }
  double reach = 0.0;
  for (const auto& b : baselines) reach = std::max(reach, b.l1_norm());
  LowpassDecision d;
  d.product = omega_max * reach * percentile95_abs(residual.field());
  double p = d.product;
  while (p > 0.5 * std::numbers::pi) {
    p *= 0.5;
    ++d.levels;
  }
  d.needed = d.levels > 0;
  return d;
}

std::vector<Field> upsample_views(const ViewSet& views) {
  std::vector<Field> out;
  out.reserve(views.size());
  for (const auto& v : views.views()) out.push_back(upsample_sinc2(v.image.field()));
  return out;
}

std::vector<WarpResult> warp_to_reference(const ViewSet& views,
                                          std::span<const std::size_t> active,
                                          const DisparityField& w_total,
                                          const std::vector<Field>* upsampled) {
  const bool identity = all_zero(w_total.field());
  std::vector<WarpResult> out;
  for (std::size_t idx : active) {
    if (idx == views.reference_index()) continue;
    const View& v = views[idx];
    if (identity) {
      out.push_back({v.image.field(), Mask(views.width(), views.height(), 1)});
    } else if (upsampled) {
      out.push_back(multi_hypothesis_warp_upsampled((*upsampled)[idx], w_total,
                                                    negated(v.baseline)));
    } else {
      out.push_back(multi_hypothesis_warp(v.image.field(), w_total,
                                          negated(v.baseline)));
    }
  }
  return out;
}

ProgressiveResult run_progressive(const ViewSet& views, const StagePlan& plan,
                                  const SolverConfig& config,
                                  const ProgressiveOptions& options) {
  config.validate();
  validate_plan(views, plan);
  const int width = views.width();
  const int height = views.height();
  const Field& ref = views.reference().image.field();

  ProgressiveResult result;
  Field w_total(width, height);
  // Low-pass trigger input: the first stage tests the optional prior bound
  // against its own baselines; later stages test the previous stage's
  // residual against the baselines it was solved with. An out-of-range
  // previous step means the remaining error is not trusted to be small.
  std::optional<Field> last_residual;
  std::vector<BaselineVec> last_baselines;
  if (options.initial_disparity_bound) {
    last_residual = Field(width, height, std::abs(*options.initial_disparity_bound));
  }

  for (std::size_t s = 0; s < plan.stages.size(); ++s) {
    const auto& active = plan.stages[s];
    std::vector<BaselineVec> baselines;
    for (std::size_t idx : active) {
      if (idx != views.reference_index()) baselines.push_back(views[idx].baseline);
    }
    const double alpha_eff = effective_alpha(config.alpha, active.size());

    LowpassDecision lowpass;
    if (last_residual && config.coarse_to_fine) {
      lowpass = needs_lowpass(s == 0 ? baselines : last_baselines,
                              DisparityField(*last_residual), config.omega_max);
    }
    // Cap so the coarsest level keeps at least 8 pixels per side.
    while (lowpass.levels > 0 &&
           (std::min(width, height) >> lowpass.levels) < 8) {
      --lowpass.levels;
    }
    lowpass.needed = lowpass.levels > 0;

    StageSolve solved;
    try {
      if (!lowpass.needed) {
        auto warped = warp_to_reference(views, active, DisparityField(w_total),
                                        options.upsampled);
        std::vector<Field> images;
        std::vector<Mask> masks;
        for (auto& wr : warped) {
          images.push_back(std::move(wr.image));
          masks.push_back(std::move(wr.valid));
        }
        const auto lin = linearize_all(ref, images, masks, baselines, config);
        IrlsResult r = irls_solve(lin, DisparityField(width, height), config,
                                  alpha_eff, std::move(result.sigma), &w_total);
        result.sigma = std::move(r.sigma);
        solved = {r.w.field(), std::move(r.trace), std::move(r.cg_iterations)};
      } else {
        // Coarse-to-fine within the stage. Every level warps the original
        // images (at that level) by the accumulated estimate plus the
        // increment found so far.
        const int levels = lowpass.levels;
        std::vector<std::vector<Field>> pyr_views(levels + 1);
        std::vector<Field> pyr_ref(levels + 1);
        std::vector<Field> pyr_total(levels + 1);
        pyr_ref[0] = ref;
        pyr_total[0] = w_total;
        for (std::size_t idx : active) {
          if (idx != views.reference_index()) {
            pyr_views[0].push_back(views[idx].image.field());
          }
        }
        for (int l = 1; l <= levels; ++l) {
          pyr_ref[l] = pyramid_down(pyr_ref[l - 1]);
          pyr_total[l] = downsample_disparity(pyr_total[l - 1]);
          for (const Field& f : pyr_views[l - 1]) {
            pyr_views[l].push_back(pyramid_down(f));
          }
        }
        Field inc = zeros_like(pyr_ref[levels]);
        for (int l = levels; l >= 0; --l) {
          const int lw = pyr_ref[l].width();
          const int lh = pyr_ref[l].height();
          if (l < levels) {
            inc = fit_to(upsample_disparity_nn(DisparityField(inc)).field(), lw, lh);
          }
          const Field base = add(pyr_total[l], inc);
          std::vector<Field> images;
          std::vector<Mask> masks;
          if (l == 0) {
            auto warped = warp_to_reference(views, active, DisparityField(base),
                                            options.upsampled);
            for (auto& wr : warped) {
              images.push_back(std::move(wr.image));
              masks.push_back(std::move(wr.valid));
            }
          } else {
            for (std::size_t i = 0; i < baselines.size(); ++i) {
              const DisplacementField d =
                  disparity_from_w(DisparityField(base), negated(baselines[i]));
              WarpResult wr = bilinear_warp(pyr_views[l][i], d);
              images.push_back(std::move(wr.image));
              masks.push_back(std::move(wr.valid));
            }
          }
          const auto lin = linearize_all(pyr_ref[l], images, masks, baselines, config);
          if (l > 0) {
            // Coarse levels keep their own sigma history so they cannot
            // pin the scale used at full resolution.
            IrlsResult r = irls_solve(lin, DisparityField(lw, lh), config,
                                      alpha_eff, {}, &base);
            inc = add(inc, r.w.field());
          } else {
            IrlsResult r = irls_solve(lin, DisparityField(lw, lh), config,
                                      alpha_eff, std::move(result.sigma), &base);
            result.sigma = std::move(r.sigma);
            inc = add(inc, r.w.field());
            solved.trace = std::move(r.trace);
            solved.cg_iterations = std::move(r.cg_iterations);
          }
        }
        solved.residual = std::move(inc);
      }
    } catch (const NumericalError& e) {
      throw NumericalError("stage " + std::to_string(s) + ": " + e.what(),
                           e.iteration());
    } catch (const EstimationError& e) {
      throw EstimationError("stage " + std::to_string(s) + ": " + e.what());
    }

    w_total = add(w_total, solved.residual);
    StageResult stage{active,
                      DisparityField(w_total),
                      DisparityField(solved.residual),
                      lowpass,
                      {},
                      {}};
    if (options.diagnostics) {
      stage.trace = std::move(solved.trace);
      stage.cg_iterations = std::move(solved.cg_iterations);
    }
    last_residual = std::move(solved.residual);
    last_baselines = std::move(baselines);
    result.stages.push_back(std::move(stage));
  }
  return result;
}

}  // namespace mvde
