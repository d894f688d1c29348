#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "mvde/core.hpp"
#include "mvde/linearized_view.hpp"
#include "mvde/robust.hpp"

namespace mvde {

struct EnergyBreakdown {
  double e_data = 0.0;
  double e_reg = 0.0;
  double e_total = 0.0;  ///< e_data + alpha_eff^2 * e_reg
};

/// Linearise `other` against `ref`: a = <DoG gradient, B'>,
/// b = blur(ref - other). The mask starts all-valid.
LinearizedView linearize_view(const Field& ref, const Field& other,
                              const BaselineVec& baseline, double sigma,
                              GradientMode mode);
LinearizedView linearize_view(const ImageGrid& ref, const ImageGrid& other,
                              const BaselineVec& baseline, double sigma,
                              GradientMode mode);

/// 3x3 Laplacian stencil, corners 1/12, edges 1/6, centre -1, with
/// half-sample symmetric borders.
Field laplacian_apply(const Field& w);

/// Regulariser gradient magnitude consistent with the Laplacian stencil:
/// g(s)^2 = 1/2 * sum_n c_n (w(n) - w(s))^2 over the 8-neighbourhood,
/// where c_n are the off-centre stencil coefficients. Then
/// d/dw sum_s g(s)^2 / 2 = -laplacian_apply(w).
Field gradient_magnitude(const Field& w);

struct IrlsWeights {
  std::vector<Field> data;  ///< one per view, zero where masked out
  Field reg;
};

/// IRLS weights at the current field: data weights from the linearised
/// residual of each view, regulariser weight from gradient_magnitude.
IrlsWeights assemble_weights(std::span<const LinearizedView> views,
                             const DisparityField& w,
                             const PenaltyKind& data_kind,
                             const PenaltyKind& reg_kind);

/// penalty_weight(reg_kind, gradient_magnitude(w)) per pixel.
Field regularizer_weights(const Field& w, const PenaltyKind& reg_kind);

/// Matrix-free Euler-Lagrange operator
///   (A w)(s) = sum_p W_d,p a_p^2 w(s) - alpha_eff^2 [W_r o Lap] w (s).
class ElOperator {
 public:
  ElOperator(std::span<const LinearizedView> views, const IrlsWeights& weights,
             double alpha_eff, RegularizerForm form);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }

  Field apply(const Field& w) const;
  void apply(const Field& w, Field& out) const;

  /// Regulariser part only (no data diagonal, no alpha scaling).
  Field apply_regularizer(const Field& w) const;

  const Field& diagonal() const noexcept { return diagonal_; }

  struct Entry {
    std::size_t row;
    std::size_t col;
    double value;
  };
  /// Explicit matrix entries over row-major pixel indices. Entries for the
  /// same (row, col) may repeat and are meant to be summed.
  std::vector<Entry> entries() const;

  RegularizerForm form() const noexcept { return form_; }

 private:
  void apply_impl(const Field& w, Field& out, bool with_data,
                  double reg_scale) const;

  int width_;
  int height_;
  double alpha2_;
  RegularizerForm form_;
  Field data_diag_;
  Field reg_weight_;
  Field diagonal_;
  mutable std::vector<double> padded_w_;
  std::vector<double> padded_weight_;
};

/// Convenience wrapper: build the operator and apply it once.
Field el_operator(const Field& w, std::span<const LinearizedView> views,
                  const IrlsWeights& weights, double alpha_eff,
                  RegularizerForm form = RegularizerForm::edge_weighted);

/// Right-hand side -sum_p W_d,p a_p b_p of the Euler-Lagrange system.
Field el_rhs(std::span<const LinearizedView> views, const IrlsWeights& weights);

struct CgResult {
  Field x;
  int iterations = 0;
  double relative_residual = 0.0;
  bool converged = false;
};

/// Linear operator concept used by cg_solve: y = A x on a width x height
/// field.
using ApplyFn = std::function<void(const Field&, Field&)>;

/// Preconditioned conjugate gradients from initial guess x0. Stops when
/// ||A x - rhs|| / ||rhs|| <= tol or after max_iters. The preconditioner
/// is the inverse of `diagonal` (Jacobi); pass an empty field for none.
/// Throws NumericalError on non-finite values.
CgResult cg_solve(const ApplyFn& apply, const Field& rhs, const Field& x0,
                  const Field& diagonal, double tol, int max_iters);
/// Same with an arbitrary preconditioner z = M^-1 r (empty: none).
CgResult cg_solve_preconditioned(const ApplyFn& apply, const Field& rhs,
                                 const Field& x0, const ApplyFn& precondition,
                                 double tol, int max_iters);
/// Solves with `op`, preconditioned as requested. The incomplete Cholesky
/// variant needs the symmetric edge-weighted form and falls back to
/// Jacobi otherwise or when the factorisation fails.
CgResult cg_solve(const ElOperator& op, const Field& rhs, const Field& x0,
                  double tol, int max_iters,
                  Preconditioner preconditioner = Preconditioner::jacobi);

/// Energy of the linearised problem at w (+ base). The regulariser is
/// evaluated on base + w so a residual field can be solved on top of an
/// accumulated estimate.
EnergyBreakdown energy_eval(const DisparityField& w,
                            std::span<const LinearizedView> views,
                            const PenaltyKind& data_kind,
                            const PenaltyKind& reg_kind, double alpha_eff,
                            const Field* base = nullptr);

/// alpha scaled by sqrt(number of active views, reference included).
double effective_alpha(double alpha, std::size_t active_views);

struct IrlsResult {
  DisparityField w;
  std::vector<EnergyBreakdown> trace;  ///< at w_init, then after each step
  std::vector<int> cg_iterations;
  SigmaState sigma;
};

/// Iteratively reweighted least squares on the linearised energy. When
/// the data penalty is an automatic Welsch kind, sigma is re-estimated at
/// every reweighting step from the views adjacent to the reference and
/// clamped so it never increases; `sigma` carries that state in and out.
/// `base`, if given, is an accumulated estimate the regulariser sees
/// underneath the solved field.
IrlsResult irls_solve(std::span<const LinearizedView> views,
                      const DisparityField& w_init, const SolverConfig& config,
                      double alpha_eff, SigmaState sigma = {},
                      const Field* base = nullptr);

/// Linearises the active non-reference views against the reference
/// (no warping) and runs irls_solve with alpha scaled by the number of
/// active views.
IrlsResult irls_solve(const ViewSet& views, std::span<const std::size_t> active,
                      const DisparityField& w_init, const SolverConfig& config,
                      SigmaState sigma = {});

}  // namespace mvde
