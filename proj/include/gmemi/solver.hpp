#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <vector>

#include "gmemi/gme_design.hpp"
#include "gmemi/linalg.hpp"
#include "gmemi/seeds.hpp"

namespace gmemi {

// Feasible set for the x block, applied through its Euclidean projector.
struct Constraint {
    enum class Kind { whole_space, box, custom };
    Kind kind = Kind::whole_space;
    double lo = 0.0, hi = 0.0;                       // box bounds (uniform)
    std::function<Vector(const Vector&)> projector;  // custom sets

    static Constraint whole_space();
    static Constraint box(double lo, double hi);
    static Constraint custom(std::function<Vector(const Vector&)> projector);

    Vector project(const Vector& x) const;
    // true when the max-norm distance to the set is within tol
    bool contains(const Vector& x, double tol) const;
};

// One instance of
//   minimize over x in C:  J(x) = (1/2)||y - A x||^2 + lambda * Psi_B(L x)
// with Psi_B generated by `seed` and the envelope quadratic BtB.
struct ProblemSpec {
    DenseMatrix A;  // d x n
    Vector y;       // d
    DenseMatrix L;  // m x n, seed.m == m
    double lambda = 1.0;
    SeedFunction seed;
    DenseMatrix BtB;  // m x m, PSD
    Constraint constraint;
};

// Shape conformance and finiteness (cheap; solve runs this every call).
void check_shapes(const ProblemSpec& spec);

// check_shapes plus the expensive eigenvalue certificates: BtB PSD and
// overall convexity of Q = A^T A - lambda L^T BtB L, both within
// tol * max(1, scale). Throws std::invalid_argument on failure.
void validate_problem(const ProblemSpec& spec, double tol = 1e-8);

// The eight iterate blocks (x, sigma, v, tau, r, eta, xi, zeta); sigma,
// tau, eta live in R^l, v, r in R^m, xi, zeta in R^p.
struct SolverState {
    Vector x, sigma, v, tau, r, eta, xi, zeta;

    static SolverState zeros(const ProblemSpec& spec);
};

struct SolveOptions {
    double threshold = 1e-4;  // on the successive-difference norm
    std::size_t max_iters = 10000;
    double mu = 1.0;              // KM relaxation factor in (0, 1]
    bool record_history = false;  // fill the residual traces below
    std::optional<SolverState> initial;  // default: all-zero state
};

struct Solution {
    Vector x_star;
    std::size_t iterations = 0;
    bool converged = false;
    double final_residual = 0.0;
    // Successive-difference norms per iteration (the stopping metric and
    // its P-metric counterpart); filled when record_history is set.
    std::vector<double> residual_history;
    std::vector<double> p_residual_history;
    SolverState state;  // full final iterate; sigma feeds the certificate
};

// One application of the fixed-point operator: the six update lines in
// their printed order; the extrapolations 2x^ - x and 2sigma^ - sigma use
// the freshly updated blocks. Q must be the assemble_Q output.
SolverState apply_T(const SolverState& z, const ProblemSpec& spec, const StepParams& params,
                    const DenseMatrix& Q);

// Iterates z <- (1 - mu) z + mu T(z) from opts.initial (or zeros) until
// the Euclidean norm of the concatenated successive difference over all
// eight blocks drops below opts.threshold. Exhausting max_iters is not an
// error: the Solution comes back with converged = false.
Solution solve(const ProblemSpec& spec, const StepParams& params, const SolveOptions& opts = {});

// J(x), evaluating the penalty to accuracy tol. Returns +inf when x is
// farther than 1e-12 (max-norm) from the constraint set.
double evaluate_objective(const ProblemSpec& spec, const Vector& x, double tol);

// Gap phi(L x*, sigma~) - psi(L x*) >= 0 with sigma~ the repaired sigma
// block of the solution. At a fixed point sigma attains the inner minimum,
// so the gap vanishes up to solver accuracy (contract: <= 10 * tol at a
// true fixed point). Exactly 0 for degenerate seeds (l = 0).
double certify_inner_optimality(const ProblemSpec& spec, const Solution& sol, double tol);

struct AveragednessReport {
    std::size_t trials = 0;
    std::size_t violations = 0;      // margins below -1e-8 (relative)
    double worst_margin = 0.0;       // min over trials, scaled
};

// Empirical check of the averaged inequality
//   ||Tz1 - Tz2||_P^2 <= ||z1 - z2||_P^2
//                        - ((1-a)/a) ||(z1 - Tz1) - (z2 - Tz2)||_P^2
// with a = kappa/(2 kappa - 1), over `trials` random state pairs drawn
// from a fixed generator. Failures are reported, never thrown.
AveragednessReport averagedness_check(const ProblemSpec& spec, const StepParams& params,
                                      std::size_t trials);

}  // namespace gmemi
