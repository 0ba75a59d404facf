#include "gmemi/solver.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>

#include "gmemi/prox.hpp"

namespace gmemi {

namespace {

Vector concat(const Vector& a, const Vector& b) {
    Vector out;
    out.reserve(a.size() + b.size());
    out.insert(out.end(), a.begin(), a.end());
    out.insert(out.end(), b.begin(), b.end());
    return out;
}

Vector head(const Vector& x, std::size_t n) { return Vector(x.begin(), x.begin() + n); }

Vector tail(const Vector& x, std::size_t n) { return Vector(x.begin() + n, x.end()); }

void append(Vector& out, const Vector& b) { out.insert(out.end(), b.begin(), b.end()); }

// Blocks in the metric's order (x, sigma, v, tau, r, eta, xi, zeta).
Vector to_vec(const SolverState& z) {
    Vector out;
    out.reserve(z.x.size() + 2 * z.v.size() + 3 * z.sigma.size() + 2 * z.xi.size());
    append(out, z.x);
    append(out, z.sigma);
    append(out, z.v);
    append(out, z.tau);
    append(out, z.r);
    append(out, z.eta);
    append(out, z.xi);
    append(out, z.zeta);
    return out;
}

void check_state(const SolverState& z, const ProblemSpec& spec, const char* who) {
    const std::size_t n = spec.A.cols, m = spec.L.rows, l = spec.seed.l, p = spec.seed.p;
    if (z.x.size() != n || z.sigma.size() != l || z.v.size() != m || z.tau.size() != l ||
        z.r.size() != m || z.eta.size() != l || z.xi.size() != p || z.zeta.size() != p)
        throw std::invalid_argument(std::string(who) + ": state block dimensions do not match");
}

void check_params(const StepParams& params) {
    if (!(params.gamma1 > 0.0) || !(params.gamma2 > 0.0) || !(params.gamma3 > 0.0) ||
        !(params.gamma4 > 0.0))
        throw std::invalid_argument("solver: step sizes must be positive");
}

struct StepContext {
    const ProblemSpec& spec;
    const StepParams& params;
    const DenseMatrix& Q;
    Vector aty;  // A^T y, hoisted out of the iteration
};

// The six update lines, in their printed order. Fresh blocks feed the
// 2x^-x / 2sigma^-sigma / 2tau^-tau extrapolations; everything else reads
// the incoming state.
SolverState step(const StepContext& c, const SolverState& z) {
    const SeedFunction& seed = c.spec.seed;
    const std::size_t m = c.spec.L.rows, l = seed.l, p = seed.p;
    SolverState out;

    // x^ = P_C[x - g1 (Q x - A^T y + lambda L^T (BtB v + r))]
    Vector w = matvec(c.spec.BtB, z.v) + z.r;
    Vector grad = matvec(c.Q, z.x) - c.aty + scaled(matvec_t(c.spec.L, w), c.spec.lambda);
    out.x = c.spec.constraint.project(z.x - scaled(grad, c.params.gamma1));

    // sigma^ = sigma - g2 (eta + M^T xi)
    if (l > 0) out.sigma = z.sigma - scaled(z.eta + seed.mul_Mt(z.xi), c.params.gamma2);

    // (v^, tau^) = prox_{g3 f}(v + g3 BtB (L(2x^-x) - v), tau - g3 M^T zeta)
    Vector lxe = matvec(c.spec.L, scaled(out.x, 2.0) - z.x);
    Vector varg = z.v + scaled(matvec(c.spec.BtB, lxe - z.v), c.params.gamma3);
    Vector targ = l > 0 ? z.tau - scaled(seed.mul_Mt(z.zeta), c.params.gamma3) : Vector{};
    Vector vt = seed.prox_f(c.params.gamma3, concat(varg, targ));
    out.v = head(vt, m);
    out.tau = tail(vt, m);

    // (r^, eta^) = prox_{f*}(r + L(2x^-x), eta + 2sigma^-sigma)
    Vector se = l > 0 ? scaled(out.sigma, 2.0) - z.sigma : Vector{};
    Vector re = prox_conjugate(seed.prox_f, 1.0, concat(z.r + lxe, l > 0 ? z.eta + se : Vector{}));
    out.r = head(re, m);
    out.eta = tail(re, m);

    if (p > 0) {
        // xi^ = prox_{g*}(xi + M(2sigma^-sigma))
        out.xi = prox_conjugate(seed.prox_g, 1.0, z.xi + seed.mul_M(se));
        // zeta^ = prox_{g4 g*}(zeta + g4 M(2tau^-tau))
        Vector te = scaled(out.tau, 2.0) - z.tau;
        out.zeta = prox_conjugate(seed.prox_g, c.params.gamma4,
                                  z.zeta + scaled(seed.mul_M(te), c.params.gamma4));
    }
    return out;
}

}  // namespace

Constraint Constraint::whole_space() { return Constraint{}; }

Constraint Constraint::box(double lo, double hi) {
    if (!(lo <= hi)) throw std::invalid_argument("Constraint::box: lo must not exceed hi");
    Constraint c;
    c.kind = Kind::box;
    c.lo = lo;
    c.hi = hi;
    return c;
}

Constraint Constraint::custom(std::function<Vector(const Vector&)> projector) {
    if (!projector) throw std::invalid_argument("Constraint::custom: null projector");
    Constraint c;
    c.kind = Kind::custom;
    c.projector = std::move(projector);
    return c;
}

Vector Constraint::project(const Vector& x) const {
    switch (kind) {
        case Kind::whole_space:
            return x;
        case Kind::box:
            return project_box(x, lo, hi);
        case Kind::custom:
            return projector(x);
    }
    throw std::logic_error("Constraint::project: unknown kind");
}

bool Constraint::contains(const Vector& x, double tol) const {
    if (kind == Kind::whole_space) return true;
    return nrm_inf(x - project(x)) <= tol;
}

void check_shapes(const ProblemSpec& spec) {
    const std::size_t n = spec.A.cols, m = spec.L.rows;
    if (spec.A.empty() || spec.L.empty())
        throw std::invalid_argument("ProblemSpec: A and L must be nonempty");
    if (spec.y.size() != spec.A.rows)
        throw std::invalid_argument("ProblemSpec: y length must equal the rows of A");
    if (spec.L.cols != n)
        throw std::invalid_argument("ProblemSpec: L must have as many columns as A");
    if (!(spec.lambda > 0.0)) throw std::invalid_argument("ProblemSpec: lambda must be positive");
    if (spec.seed.m != m)
        throw std::invalid_argument("ProblemSpec: seed dimension must equal the rows of L");
    if (spec.seed.l == 0 && spec.seed.p != 0)
        throw std::invalid_argument("ProblemSpec: seed with empty sigma block cannot carry M");
    if (spec.BtB.rows != m || spec.BtB.cols != m)
        throw std::invalid_argument("ProblemSpec: BtB must be square of the rows of L");
    require_finite(spec.A, "ProblemSpec A");
    require_finite(spec.y, "ProblemSpec y");
    require_finite(spec.L, "ProblemSpec L");
    require_finite(spec.BtB, "ProblemSpec BtB");
}

void validate_problem(const ProblemSpec& spec, double tol) {
    check_shapes(spec);
    double bscale = 0.0;
    for (double v : spec.BtB.a) bscale = std::max(bscale, std::fabs(v));
    if (min_eigenvalue_symmetric(spec.BtB) < -tol * std::max(1.0, bscale))
        throw std::invalid_argument("validate_problem: BtB is not positive semidefinite");
    DenseMatrix q = assemble_Q(spec.A, spec.L, spec.BtB, spec.lambda);
    double qscale = 0.0;
    for (double v : q.a) qscale = std::max(qscale, std::fabs(v));
    auto [ok, lmin] = verify_overall_convexity(q, tol * std::max(1.0, qscale));
    if (!ok)
        throw std::invalid_argument("validate_problem: overall convexity fails, min eigenvalue " +
                                    std::to_string(lmin));
}

SolverState SolverState::zeros(const ProblemSpec& spec) {
    SolverState z;
    z.x.assign(spec.A.cols, 0.0);
    z.sigma.assign(spec.seed.l, 0.0);
    z.v.assign(spec.L.rows, 0.0);
    z.tau.assign(spec.seed.l, 0.0);
    z.r.assign(spec.L.rows, 0.0);
    z.eta.assign(spec.seed.l, 0.0);
    z.xi.assign(spec.seed.p, 0.0);
    z.zeta.assign(spec.seed.p, 0.0);
    return z;
}

SolverState apply_T(const SolverState& z, const ProblemSpec& spec, const StepParams& params,
                    const DenseMatrix& Q) {
    check_shapes(spec);
    check_params(params);
    check_state(z, spec, "apply_T");
    if (Q.rows != spec.A.cols || Q.cols != spec.A.cols)
        throw std::invalid_argument("apply_T: Q must be square of the columns of A");
    StepContext c{spec, params, Q, matvec_t(spec.A, spec.y)};
    return step(c, z);
}

Solution solve(const ProblemSpec& spec, const StepParams& params, const SolveOptions& opts) {
    check_shapes(spec);
    check_params(params);
    if (!(opts.threshold > 0.0))
        throw std::invalid_argument("solve: threshold must be positive");
    if (!(opts.mu > 0.0) || opts.mu > 1.0)
        throw std::invalid_argument("solve: mu must lie in (0, 1]");

    DenseMatrix q = assemble_Q(spec.A, spec.L, spec.BtB, spec.lambda);
    StepContext c{spec, params, q, matvec_t(spec.A, spec.y)};

    SolverState z = opts.initial ? *opts.initial : SolverState::zeros(spec);
    check_state(z, spec, "solve");
    require_finite(to_vec(z), "solve initial state");

    std::optional<PMetric> pm;
    if (opts.record_history)
        pm.emplace(build_p_metric(spec.L, spec.seed.M, spec.BtB, params, spec.lambda));

    Solution sol;
    double res = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < opts.max_iters; ++k) {
        SolverState t = step(c, z);
        if (opts.mu != 1.0) {
            auto mix = [&](const Vector& a, const Vector& b) {
                Vector out(a.size());
                for (std::size_t i = 0; i < a.size(); ++i)
                    out[i] = (1.0 - opts.mu) * a[i] + opts.mu * b[i];
                return out;
            };
            t.x = mix(z.x, t.x);
            t.sigma = mix(z.sigma, t.sigma);
            t.v = mix(z.v, t.v);
            t.tau = mix(z.tau, t.tau);
            t.r = mix(z.r, t.r);
            t.eta = mix(z.eta, t.eta);
            t.xi = mix(z.xi, t.xi);
            t.zeta = mix(z.zeta, t.zeta);
        }
        Vector diff = to_vec(t) - to_vec(z);
        res = nrm2(diff);
        if (opts.record_history) {
            sol.residual_history.push_back(res);
            sol.p_residual_history.push_back(pm->p_norm(diff));
        }
        z = t;
        if (res < opts.threshold) {
            sol.converged = true;
            sol.iterations = k + 1;
            break;
        }
    }
    if (!sol.converged) sol.iterations = opts.max_iters;
    sol.final_residual = res;
    sol.x_star = z.x;
    sol.state = std::move(z);
    return sol;
}

double evaluate_objective(const ProblemSpec& spec, const Vector& x, double tol) {
    check_shapes(spec);
    if (x.size() != spec.A.cols)
        throw std::invalid_argument("evaluate_objective: x dimension mismatch");
    require_finite(x, "evaluate_objective x");
    if (!spec.constraint.contains(x, 1e-12)) return std::numeric_limits<double>::infinity();
    Vector resid = spec.y - matvec(spec.A, x);
    return 0.5 * dot(resid, resid) +
           spec.lambda * eval_gme_mi_penalty(spec.seed, spec.BtB, matvec(spec.L, x), tol);
}

double certify_inner_optimality(const ProblemSpec& spec, const Solution& sol, double tol) {
    check_shapes(spec);
    if (spec.seed.l == 0) return 0.0;
    check_state(sol.state, spec, "certify_inner_optimality");
    Vector u = matvec(spec.L, sol.state.x);
    Vector st = spec.seed.repair_sigma(u, sol.state.sigma);
    double phi = spec.seed.eval_f(u, st) + spec.seed.eval_g(spec.seed.mul_M(st));
    return phi - eval_mi_penalty(spec.seed, u, tol);
}

AveragednessReport averagedness_check(const ProblemSpec& spec, const StepParams& params,
                                      std::size_t trials) {
    check_shapes(spec);
    check_params(params);
    DenseMatrix q = assemble_Q(spec.A, spec.L, spec.BtB, spec.lambda);
    PMetric pm = build_p_metric(spec.L, spec.seed.M, spec.BtB, params, spec.lambda);
    StepContext c{spec, params, q, matvec_t(spec.A, spec.y)};

    const double alpha = params.kappa / (2.0 * params.kappa - 1.0);
    const double fac = (1.0 - alpha) / alpha;

    std::mt19937_64 gen(0x6a09e667f3bcc908ULL);
    std::normal_distribution<double> nd(0.0, 1.0);
    auto random_state = [&] {
        SolverState z = SolverState::zeros(spec);
        for (Vector* b : {&z.x, &z.sigma, &z.v, &z.tau, &z.r, &z.eta, &z.xi, &z.zeta})
            for (double& val : *b) val = nd(gen);
        return z;
    };

    AveragednessReport rep;
    rep.trials = trials;
    rep.worst_margin = std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t < trials; ++t) {
        SolverState z1 = random_state(), z2 = random_state();
        Vector v1 = to_vec(z1), v2 = to_vec(z2);
        Vector t1 = to_vec(step(c, z1)), t2 = to_vec(step(c, z2));
        Vector dt = t1 - t2, dz = v1 - v2, dr = (v1 - t1) - (v2 - t2);
        double lhs = pm.p_inner(dt, dt);
        double base = pm.p_inner(dz, dz);
        double rhs = base - fac * pm.p_inner(dr, dr);
        double margin = (rhs - lhs) / std::max(1.0, base);
        rep.worst_margin = std::min(rep.worst_margin, margin);
        if (margin < -1e-8) ++rep.violations;
    }
    if (trials == 0) rep.worst_margin = 0.0;
    return rep;
}

}  // namespace gmemi
