#include "mvde/solver.hpp"

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseCore>

#include <algorithm>
#include <cmath>
#include <memory>

#include "mvde/imgproc.hpp"

namespace mvde {

namespace {

struct StencilTap {
  int dx;
  int dy;
  double c;
};

// Off-centre coefficients of the Laplacian stencil; the centre is -1.
constexpr StencilTap kTaps[8] = {
    {-1, -1, 1.0 / 12}, {0, -1, 1.0 / 6}, {1, -1, 1.0 / 12},
    {-1, 0, 1.0 / 6},   {1, 0, 1.0 / 6},  {-1, 1, 1.0 / 12},
    {0, 1, 1.0 / 6},    {1, 1, 1.0 / 12},
};

/// Copies `f` into a (w+2)x(h+2) buffer with a one-pixel half-sample
/// symmetric border.
void pad_into(const Field& f, std::vector<double>& out) {
  const int w = f.width();
  const int h = f.height();
  const int pw = w + 2;
  out.resize(static_cast<std::size_t>(pw) * (h + 2));
  for (int py = 0; py < h + 2; ++py) {
    const auto src = f.row(mirror_index(py - 1, h));
    double* dst = &out[static_cast<std::size_t>(py) * pw];
    dst[0] = src[0];
    std::copy(src.begin(), src.end(), dst + 1);
    dst[w + 1] = src[w - 1];
  }
}

std::vector<double> padded(const Field& f) {
  std::vector<double> out;
  pad_into(f, out);
  return out;
}

std::vector<const LinearizedView*> canonical_order(
    std::span<const LinearizedView> views) {
  std::vector<const LinearizedView*> order;
  order.reserve(views.size());
  for (const auto& v : views) order.push_back(&v);
  std::stable_sort(order.begin(), order.end(),
                   [](const LinearizedView* l, const LinearizedView* r) {
                     if (l->baseline.bx != r->baseline.bx) {
                       return l->baseline.bx < r->baseline.bx;
                     }
                     return l->baseline.by < r->baseline.by;
                   });
  return order;
}

double dot(const Field& a, const Field& b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

Field total_field(const DisparityField& w, const Field* base) {
  Field total = w.field();
  if (base) {
    require_same_shape(*base, total, "regulariser base");
    for (std::size_t i = 0; i < total.size(); ++i) total[i] += (*base)[i];
  }
  return total;
}

}  // namespace

LinearizedView linearize_view(const Field& ref, const Field& other,
                              const BaselineVec& baseline, double sigma,
                              GradientMode mode) {
  require_same_shape(ref, other, "linearize_view");
  const GradientPair g = dog_gradient(ref, other, sigma, mode);
  Field a(ref.width(), ref.height());
  for (std::size_t i = 0; i < a.size(); ++i) {
    a[i] = g.gx[i] * baseline.bx + g.gy[i] * baseline.by;
  }
  return {std::move(a), diff_blur(ref, other, sigma),
          Mask(ref.width(), ref.height(), 1), baseline};
}

LinearizedView linearize_view(const ImageGrid& ref, const ImageGrid& other,
                              const BaselineVec& baseline, double sigma,
                              GradientMode mode) {
  return linearize_view(ref.field(), other.field(), baseline, sigma, mode);
}

Field laplacian_apply(const Field& w) {
  const std::vector<double> p = padded(w);
  const int pw = w.width() + 2;
  Field out(w.width(), w.height());
  for (int y = 0; y < w.height(); ++y) {
    for (int x = 0; x < w.width(); ++x) {
      const std::size_t centre = static_cast<std::size_t>(y + 1) * pw + x + 1;
      double acc = -p[centre];
      for (const auto& t : kTaps) acc += t.c * p[centre + t.dy * pw + t.dx];
      out(x, y) = acc;
    }
  }
  return out;
}

Field gradient_magnitude(const Field& w) {
  const std::vector<double> p = padded(w);
  const int pw = w.width() + 2;
  Field out(w.width(), w.height());
  for (int y = 0; y < w.height(); ++y) {
    for (int x = 0; x < w.width(); ++x) {
      const std::size_t centre = static_cast<std::size_t>(y + 1) * pw + x + 1;
      double acc = 0.0;
      for (const auto& t : kTaps) {
        const double d = p[centre + t.dy * pw + t.dx] - p[centre];
        acc += t.c * d * d;
      }
      out(x, y) = std::sqrt(0.5 * acc);
    }
  }
  return out;
}

IrlsWeights assemble_weights(std::span<const LinearizedView> views,
                             const DisparityField& w,
                             const PenaltyKind& data_kind,
                             const PenaltyKind& reg_kind) {
  IrlsWeights out;
  out.data.reserve(views.size());
  const Field& wf = w.field();
  for (const auto& v : views) {
    require_same_shape(v.a, wf, "assemble_weights");
    Field wd(wf.width(), wf.height());
    for (std::size_t i = 0; i < wd.size(); ++i) {
      wd[i] = v.mask[i]
                  ? penalty_weight(data_kind, v.a[i] * wf[i] + v.b[i])
                  : 0.0;
    }
    out.data.push_back(std::move(wd));
  }
  out.reg = regularizer_weights(wf, reg_kind);
  return out;
}

Field regularizer_weights(const Field& w, const PenaltyKind& reg_kind) {
  Field g = gradient_magnitude(w);
  for (double& v : g.samples()) v = penalty_weight(reg_kind, v);
  return g;
}

ElOperator::ElOperator(std::span<const LinearizedView> views,
                       const IrlsWeights& weights, double alpha_eff,
                       RegularizerForm form)
    : width_(weights.reg.width()),
      height_(weights.reg.height()),
      alpha2_(alpha_eff * alpha_eff),
      form_(form),
      data_diag_(width_, height_),
      reg_weight_(weights.reg),
      diagonal_(width_, height_) {
  if (weights.data.size() != views.size()) {
    throw ParameterError("one data weight field per view is required");
  }
  // Accumulate in canonical baseline order so the operator does not depend
  // on the order views were passed in.
  std::vector<std::size_t> order(views.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t l, std::size_t r) {
    const auto& bl = views[l].baseline;
    const auto& br = views[r].baseline;
    return bl.bx != br.bx ? bl.bx < br.bx : bl.by < br.by;
  });
  for (std::size_t idx : order) {
    const auto& v = views[idx];
    const Field& wd = weights.data[idx];
    require_same_shape(v.a, data_diag_, "ElOperator");
    require_same_shape(wd, data_diag_, "ElOperator");
    for (std::size_t i = 0; i < data_diag_.size(); ++i) {
      data_diag_[i] += wd[i] * v.a[i] * v.a[i];
    }
  }
  pad_into(reg_weight_, padded_weight_);

  for (int y = 0; y < height_; ++y) {
    for (int x = 0; x < width_; ++x) {
      double reg = 0.0;
      const double ws = reg_weight_(x, y);
      for (const auto& t : kTaps) {
        const int nx = mirror_index(x + t.dx, width_);
        const int ny = mirror_index(y + t.dy, height_);
        if (nx == x && ny == y) continue;
        reg += form_ == RegularizerForm::edge_weighted
                   ? t.c * 0.5 * (ws + reg_weight_(nx, ny))
                   : t.c * ws;
      }
      diagonal_(x, y) = data_diag_(x, y) + alpha2_ * reg;
    }
  }
}

void ElOperator::apply_impl(const Field& w, Field& out, bool with_data,
                            double reg_scale) const {
  if (w.width() != width_ || w.height() != height_) {
    throw ParameterError("ElOperator: field dimension mismatch");
  }
  if (!out.same_shape(w)) out = Field(width_, height_);
  pad_into(w, padded_w_);
  const int pw = width_ + 2;
  const double* pwv = padded_w_.data();
  const double* pww = padded_weight_.data();
  for (int y = 0; y < height_; ++y) {
    auto dst = out.row(y);
    const auto diag = data_diag_.row(y);
    for (int x = 0; x < width_; ++x) {
      const std::size_t c = static_cast<std::size_t>(y + 1) * pw + x + 1;
      const double ws = pwv[c];
      const double wr = pww[c];
      double reg = 0.0;
      if (form_ == RegularizerForm::edge_weighted) {
        for (const auto& t : kTaps) {
          const std::size_t n = c + t.dy * pw + t.dx;
          reg += t.c * (wr + pww[n]) * (ws - pwv[n]);
        }
        reg *= 0.5;
      } else {
        for (const auto& t : kTaps) {
          reg += t.c * (ws - pwv[c + t.dy * pw + t.dx]);
        }
        reg *= wr;
      }
      dst[x] = (with_data ? diag[x] * ws : 0.0) + reg_scale * reg;
    }
  }
}

void ElOperator::apply(const Field& w, Field& out) const {
  apply_impl(w, out, true, alpha2_);
}

Field ElOperator::apply(const Field& w) const {
  Field out(width_, height_);
  apply(w, out);
  return out;
}

Field ElOperator::apply_regularizer(const Field& w) const {
  Field out(width_, height_);
  apply_impl(w, out, false, 1.0);
  return out;
}

std::vector<ElOperator::Entry> ElOperator::entries() const {
  std::vector<Entry> out;
  out.reserve(data_diag_.size() * 9);
  const auto at = [this](int x, int y) {
    return static_cast<std::size_t>(y) * width_ + x;
  };
  for (int y = 0; y < height_; ++y) {
    for (int x = 0; x < width_; ++x) {
      const std::size_t s = at(x, y);
      out.push_back({s, s, data_diag_[s]});
      const double ws = reg_weight_(x, y);
      for (const auto& t : kTaps) {
        const int nx = mirror_index(x + t.dx, width_);
        const int ny = mirror_index(y + t.dy, height_);
        if (nx == x && ny == y) continue;
        const double k = alpha2_ * t.c *
                         (form_ == RegularizerForm::edge_weighted
                              ? 0.5 * (ws + reg_weight_(nx, ny))
                              : ws);
        out.push_back({s, s, k});
        out.push_back({s, at(nx, ny), -k});
      }
    }
  }
  return out;
}

Field el_operator(const Field& w, std::span<const LinearizedView> views,
                  const IrlsWeights& weights, double alpha_eff,
                  RegularizerForm form) {
  return ElOperator(views, weights, alpha_eff, form).apply(w);
}

Field el_rhs(std::span<const LinearizedView> views, const IrlsWeights& weights) {
  if (weights.data.size() != views.size()) {
    throw ParameterError("one data weight field per view is required");
  }
  Field rhs(weights.reg.width(), weights.reg.height());
  std::vector<std::size_t> order(views.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t l, std::size_t r) {
    const auto& bl = views[l].baseline;
    const auto& br = views[r].baseline;
    return bl.bx != br.bx ? bl.bx < br.bx : bl.by < br.by;
  });
  for (std::size_t idx : order) {
    const auto& v = views[idx];
    const Field& wd = weights.data[idx];
    for (std::size_t i = 0; i < rhs.size(); ++i) {
      rhs[i] -= wd[i] * v.a[i] * v.b[i];
    }
  }
  return rhs;
}

namespace {

ApplyFn jacobi(const Field& diagonal) {
  return [&diagonal](const Field& in, Field& out) {
    for (std::size_t i = 0; i < in.size(); ++i) {
      const double d = diagonal[i];
      out[i] = d > 0.0 ? in[i] / d : in[i];
    }
  };
}

/// Incomplete Cholesky factor of the operator in natural pixel order, or
/// an empty function if the factorisation fails.
ApplyFn incomplete_cholesky(const ElOperator& op) {
  using SpMat = Eigen::SparseMatrix<double>;
  const auto n = static_cast<Eigen::Index>(op.width()) * op.height();
  std::vector<Eigen::Triplet<double>> triplets;
  for (const auto& e : op.entries()) {
    if (e.row >= e.col) {
      triplets.emplace_back(static_cast<Eigen::Index>(e.row),
                            static_cast<Eigen::Index>(e.col), e.value);
    }
  }
  SpMat lower(n, n);
  lower.setFromTriplets(triplets.begin(), triplets.end());
  auto factor = std::make_shared<
      Eigen::IncompleteCholesky<double, Eigen::Lower, Eigen::NaturalOrdering<int>>>();
  factor->compute(lower);
  if (factor->info() != Eigen::Success) return {};
  return [factor](const Field& in, Field& out) {
    const Eigen::Map<const Eigen::VectorXd> r(in.samples().data(),
                                              static_cast<Eigen::Index>(in.size()));
    Eigen::Map<Eigen::VectorXd>(out.samples().data(),
                                static_cast<Eigen::Index>(out.size())) = factor->solve(r);
  };
}

}  // namespace

CgResult cg_solve(const ApplyFn& apply, const Field& rhs, const Field& x0,
                  const Field& diagonal, double tol, int max_iters) {
  if (diagonal.empty()) {
    return cg_solve_preconditioned(apply, rhs, x0, {}, tol, max_iters);
  }
  require_same_shape(rhs, diagonal, "cg_solve");
  return cg_solve_preconditioned(apply, rhs, x0, jacobi(diagonal), tol, max_iters);
}

CgResult cg_solve_preconditioned(const ApplyFn& apply, const Field& rhs,
                                 const Field& x0, const ApplyFn& precondition,
                                 double tol, int max_iters) {
  if (!(tol > 0.0)) throw ParameterError("cg tolerance must be positive");
  if (max_iters < 1) throw ParameterError("cg needs at least one iteration");
  require_same_shape(rhs, x0, "cg_solve");

  const std::size_t n = rhs.size();
  CgResult res{x0, 0, 0.0, false};
  Field& x = res.x;
  Field r(rhs.width(), rhs.height());
  Field z(rhs.width(), rhs.height());
  Field q(rhs.width(), rhs.height());

  apply(x, q);
  for (std::size_t i = 0; i < n; ++i) r[i] = rhs[i] - q[i];

  double norm_ref = std::sqrt(dot(rhs, rhs));
  const double r0 = std::sqrt(dot(r, r));
  if (!std::isfinite(r0)) throw NumericalError("cg: non-finite residual", 0);
  if (norm_ref == 0.0) norm_ref = r0;
  if (norm_ref == 0.0 || r0 / norm_ref <= tol) {
    res.relative_residual = norm_ref == 0.0 ? 0.0 : r0 / norm_ref;
    res.converged = true;
    return res;
  }

  auto precond = [&](const Field& in, Field& out) {
    if (precondition) {
      precondition(in, out);
    } else {
      std::copy(in.samples().begin(), in.samples().end(), out.samples().begin());
    }
  };

  precond(r, z);
  Field p = z;
  double rz = dot(r, z);
  for (int it = 1; it <= max_iters; ++it) {
    apply(p, q);
    const double pq = dot(p, q);
    if (!std::isfinite(pq)) throw NumericalError("cg: non-finite curvature", it);
    if (pq <= 0.0) {
      // Direction of non-positive curvature: no further descent possible.
      res.iterations = it - 1;
      break;
    }
    const double step = rz / pq;
    for (std::size_t i = 0; i < n; ++i) {
      x[i] += step * p[i];
      r[i] -= step * q[i];
    }
    res.iterations = it;
    const double rn = std::sqrt(dot(r, r));
    if (!std::isfinite(rn)) throw NumericalError("cg: non-finite residual", it);
    res.relative_residual = rn / norm_ref;
    if (res.relative_residual <= tol) {
      res.converged = true;
      break;
    }
    precond(r, z);
    const double rz_next = dot(r, z);
    const double beta = rz_next / rz;
    rz = rz_next;
    for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
  }
  if (!res.converged) {
    // Report the true residual, not the recursively updated one.
    apply(x, q);
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = rhs[i] - q[i];
      acc += d * d;
    }
    res.relative_residual = std::sqrt(acc) / norm_ref;
  }
  return res;
}

CgResult cg_solve(const ElOperator& op, const Field& rhs, const Field& x0,
                  double tol, int max_iters, Preconditioner preconditioner) {
  const ApplyFn apply = [&op](const Field& in, Field& out) { op.apply(in, out); };
  if (preconditioner == Preconditioner::incomplete_cholesky &&
      op.form() == RegularizerForm::edge_weighted) {
    if (auto ic = incomplete_cholesky(op)) {
      return cg_solve_preconditioned(apply, rhs, x0, ic, tol, max_iters);
    }
  }
  return cg_solve(apply, rhs, x0, op.diagonal(), tol, max_iters);
}

EnergyBreakdown energy_eval(const DisparityField& w,
                            std::span<const LinearizedView> views,
                            const PenaltyKind& data_kind,
                            const PenaltyKind& reg_kind, double alpha_eff,
                            const Field* base) {
  EnergyBreakdown e;
  const Field& wf = w.field();
  for (const LinearizedView* v : canonical_order(views)) {
    require_same_shape(v->a, wf, "energy_eval");
    for (std::size_t i = 0; i < wf.size(); ++i) {
      if (v->mask[i]) e.e_data += penalty_value(data_kind, v->a[i] * wf[i] + v->b[i]);
    }
  }
  const Field g = gradient_magnitude(total_field(w, base));
  for (double gv : g.samples()) e.e_reg += penalty_value(reg_kind, gv);
  e.e_total = e.e_data + alpha_eff * alpha_eff * e.e_reg;
  return e;
}

double effective_alpha(double alpha, std::size_t active_views) {
  return alpha * std::sqrt(static_cast<double>(active_views));
}

IrlsResult irls_solve(std::span<const LinearizedView> views,
                      const DisparityField& w_init, const SolverConfig& config,
                      double alpha_eff, SigmaState sigma, const Field* base) {
  config.validate();
  if (views.empty()) {
    throw ParameterError("irls_solve needs at least one non-reference view");
  }
  if (base) require_same_shape(*base, w_init.field(), "irls_solve base");

  std::vector<std::size_t> adjacency;
  PenaltyKind data_kind = config.data_penalty;
  if (data_kind.is_auto()) {
    adjacency = adjacent_indices(views);
    if (adjacency.empty()) {
      // No unit-baseline neighbour in this subset: fall back to every view.
      for (std::size_t i = 0; i < views.size(); ++i) adjacency.push_back(i);
    }
  }

  IrlsResult out{w_init, {}, {}, std::move(sigma)};
  Field x = w_init.field();
  for (int k = 0; k < config.irls_iters; ++k) {
    DisparityField current(x, w_init.resolution());
    if (config.data_penalty.is_auto()) {
      out.sigma = clamp_sigma(std::move(out.sigma),
                              estimate_sigma_d(views, adjacency, current));
      data_kind.sigma = out.sigma.current();
    }
    if (k == 0) {
      out.trace.push_back(energy_eval(current, views, data_kind,
                                      config.reg_penalty, alpha_eff, base));
    }

    // Data weights follow the solved field; the regulariser sees the total.
    IrlsWeights weights =
        assemble_weights(views, current, data_kind, config.reg_penalty);
    if (base) {
      weights.reg = regularizer_weights(total_field(current, base),
                                        config.reg_penalty);
    }
    const ElOperator op(views, weights, alpha_eff, config.reg_form);
    Field rhs = el_rhs(views, weights);
    if (base) {
      const Field reg_base = op.apply_regularizer(*base);
      const double a2 = alpha_eff * alpha_eff;
      for (std::size_t i = 0; i < rhs.size(); ++i) rhs[i] -= a2 * reg_base[i];
    }
    CgResult cg = cg_solve(op, rhs, x, config.cg_tol, config.cg_max_iters,
                           config.preconditioner);
    x = std::move(cg.x);
    out.cg_iterations.push_back(cg.iterations);
    out.trace.push_back(energy_eval(DisparityField(x, w_init.resolution()),
                                    views, data_kind, config.reg_penalty,
                                    alpha_eff, base));
  }
  out.w = DisparityField(std::move(x), w_init.resolution());
  return out;
}

IrlsResult irls_solve(const ViewSet& views, std::span<const std::size_t> active,
                      const DisparityField& w_init, const SolverConfig& config,
                      SigmaState sigma) {
  std::vector<LinearizedView> lin;
  for (std::size_t idx : active) {
    if (idx >= views.size()) throw ParameterError("active view out of range");
    if (idx == views.reference_index()) continue;
    lin.push_back(linearize_view(views.reference().image, views[idx].image,
                                 views[idx].baseline, config.dog_sigma,
                                 config.gradient_mode));
  }
  std::size_t count = lin.size() + 1;
  return irls_solve(lin, w_init, config, effective_alpha(config.alpha, count),
                    std::move(sigma));
}

}  // namespace mvde
