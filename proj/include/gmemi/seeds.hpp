#pragma once

#include <cstddef>
#include <functional>
#include <utility>
#include <vector>

#include "gmemi/linalg.hpp"
#include "gmemi/prox.hpp"

namespace gmemi {

// Index pairs (i, j) over {0..m-1} defining a difference structure.
struct NeighborGraph {
    std::vector<std::pair<std::size_t, std::size_t>> pairs;

    static NeighborGraph chain(std::size_t m);  // (0,1), (1,2), ...
};

// A seed couples u to an auxiliary block sigma through
//   phi(u, sigma) = f(u, sigma) + g(M sigma),
// with f and g prox-friendly. The penalty it generates is
// psi(u) = min_sigma phi(u, sigma). Degenerate seeds have l = p = 0 and
// psi = f exactly.
//
// prox_f acts on the concatenated point (u-block, sigma-block) in R^{m+l}.
struct SeedFunction {
    std::size_t m = 0;  // dim of u
    std::size_t l = 0;  // dim of sigma (0 for plain seeds)
    std::size_t p = 0;  // dim of g's argument

    DenseMatrix M;           // p x l
    double m_op_norm = 0.0;  // ||M||_op, cached at construction

    ProxHandle prox_f;  // (gamma, point in R^{m+l}) -> point
    ProxHandle prox_g;  // (gamma, point in R^p) -> point

    std::function<double(const Vector&, const Vector&)> eval_f;  // may be +inf
    std::function<double(const Vector&)> eval_g;                 // may be +inf

    // Structured fast paths for M and M^T (fall back to the dense matrix).
    std::function<Vector(const Vector&)> apply_M;
    std::function<Vector(const Vector&)> apply_Mt;

    // Maps a sigma iterate to a nearby point where phi(w, .) is finite
    // (domain clamp plus g-feasibility restoration). Identity when phi is
    // finite everywhere. Used only by the evaluators and certificates.
    std::function<Vector(const Vector&, const Vector&)> repair_sigma;

    // Warm start for the inner minimization over sigma at a given u.
    std::function<Vector(const Vector&)> init_sigma;

    Vector mul_M(const Vector& s) const { return apply_M ? apply_M(s) : matvec(M, s); }
    Vector mul_Mt(const Vector& x) const { return apply_Mt ? apply_Mt(x) : matvec_t(M, x); }
};

// f(u,sigma) = sum_i h(u_i, sigma_i) with h the perspective of the scaled
// square; g the l1-ball indicator of radius alpha; M the signed difference
// (first minus second) over the graph pairs.
SeedFunction make_lop_seed(std::size_t m, double alpha, const NeighborGraph& graph);

// f(u,sigma) = alpha*||u-sigma||_1, g = (1-alpha)*||.||_1,
// M = transpose of the 1-D difference matrix on m+1 points (p = m+1).
SeedFunction make_tgv_seed(std::size_t m, double alpha);

// Degenerate seed: l = p = 0, f the weighted group l2,1 norm over `part`,
// psi(u) = f(u) with no inner minimization.
SeedFunction make_plain_seed(std::size_t m, const GroupPartition& part);

// (n-1) x n forward difference, rows (-1 at i, +1 at i+1).
DenseMatrix difference_matrix_1d(std::size_t n);

// n x n lower-triangular all-ones (cumulative sum).
DenseMatrix cumsum_matrix(std::size_t n);

// psi(u) = min_sigma f(u,sigma) + g(M sigma), within tol.
// Plain seeds return eval_f(u) directly; otherwise a primal-dual inner
// iteration solves the tethered problem over the joint variable (w, sigma)
// with a quadratic (rho/2)||w-u||^2 ramped x10 per continuation stage until
// a two-sided bracket around psi(u) (dual lower bound, feasible-sigma upper
// bound) closes below tol; the bracket midpoint is returned. Throws
// std::runtime_error (carrying the residual) if a stage exhausts its
// iteration budget or the continuation runs out of stages.
double eval_mi_penalty(const SeedFunction& seed, const Vector& u, double tol);

// Psi_B(u) = psi(u) - min_{v,sigma} [ f(v,sigma) + g(M sigma)
//                                     + (1/2)(u-v)^T BtB (u-v) ].
double eval_gme_mi_penalty(const SeedFunction& seed, const DenseMatrix& BtB, const Vector& u,
                           double tol);

}  // namespace gmemi
