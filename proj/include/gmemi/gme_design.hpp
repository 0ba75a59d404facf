#pragma once

#include <cstddef>
#include <utility>

#include "gmemi/linalg.hpp"

namespace gmemi {

// Step sizes for the fixed-point iteration, with the slack delta used by the
// closed-form selection. Valid parameters satisfy
//   (1/g1) I - (k/2) A^T A - lambda L^T L > O
//   (1/g2) I - I - M^T M                  > O
//    1/g3  >= (k/2 + 2/k) ||BtB||_op
//   (1/g4) I - g3 M M^T                   > O
struct StepParams {
    double kappa = 2.0;
    double gamma1 = 0.0, gamma2 = 0.0, gamma3 = 0.0, gamma4 = 0.0;
    double delta = 1e-2;
};

// The iteration metric. Blocks couple (x, v, r), (sigma, eta, xi), and
// (tau, zeta); `full` is the same quadratic form assembled over the stacked
// variable z = (x, sigma, v, tau, r, eta, xi, zeta).
struct PMetric {
    std::size_t n = 0;  // dim x
    std::size_t m = 0;  // dim v, r (= rows of L)
    std::size_t l = 0;  // dim sigma, tau, eta
    std::size_t p = 0;  // dim xi, zeta

    DenseMatrix p1;  // over (x, v, r)
    DenseMatrix p2;  // over (sigma, eta, xi)
    DenseMatrix p3;  // over (tau, zeta)
    DenseMatrix full;

    std::size_t dim() const { return n + 2 * m + 3 * l + 2 * p; }
    double p_inner(const Vector& z1, const Vector& z2) const;
    double p_norm(const Vector& z) const;
};

// B = sqrt(theta/lambda) * A, valid when the analysis operator is the
// identity: Q = A^T A - lambda B^T B = (1-theta) A^T A >= O for theta <= 1.
DenseMatrix design_B_identity_L(const DenseMatrix& A, double lambda, double theta);

// For L the 1-D forward difference: split A * cumsum into [h H] and damp H
// against the direction h,
//   BtB = (theta/lambda) * H^T (I - h h^+ ) H,   h^+ = h^T/||h||^2 (0 if h = 0),
// which keeps Q = A^T A - lambda L^T BtB L >= O for any theta in [0,1].
DenseMatrix design_BtB_difference_L(const DenseMatrix& A, double lambda, double theta);

// Q = A^T A - lambda * L^T BtB L, exactly symmetrized.
DenseMatrix assemble_Q(const DenseMatrix& A, const DenseMatrix& L, const DenseMatrix& BtB,
                       double lambda);

// (lambda_min(Q) >= -tol, lambda_min(Q)).
std::pair<bool, double> verify_overall_convexity(const DenseMatrix& Q, double tol);

// Closed-form steps
//   g1 = 1/(||(k/2) A^T A + lambda L^T L|| + delta)
//   g2 = 1/(||M||^2 + 1 + delta)
//   g3 = 1/((k/2 + 2/k) ||BtB|| + delta)
//   g4 = 1/(g3 ||M||^2 + delta),
// then every condition is re-verified numerically; a failed check throws
// std::runtime_error naming the violated condition (possible only when the
// slack delta drowns in the floating-point scale of the instance).
StepParams select_step_params(const DenseMatrix& A, const DenseMatrix& L, const DenseMatrix& M,
                              const DenseMatrix& BtB, double lambda, double kappa = 2.0,
                              double delta = 1e-2);

// Assembles P1, P2, P3 and the stacked P. M may be empty (l = p = 0).
PMetric build_p_metric(const DenseMatrix& L, const DenseMatrix& M, const DenseMatrix& BtB,
                       const StepParams& params, double lambda);

}  // namespace gmemi
