#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <random>
#include <stdexcept>

#include "doctest.h"
#include "gmemi/gme_design.hpp"
#include "gmemi/prox.hpp"
#include "gmemi/seeds.hpp"
#include "gmemi/solver.hpp"
#include "test_util.hpp"

using namespace gmemi;

namespace {

// ---- oracles ----

double soft(double x, double t) {
    if (x > t) return x - t;
    if (x < -t) return x + t;
    return 0.0;
}

// Scalar envelope-regularized l1: |u| - min_v [ |v| + (theta/2)(u-v)^2 ].
// The inner minimum is the Huber function of u at knee 1/theta.
double scalar_gme_l1(double u, double theta) {
    double a = std::fabs(u);
    double huber = a <= 1.0 / theta ? 0.5 * theta * u * u : a - 0.5 / theta;
    return a - huber;
}

double ternary_min(const std::function<double(double)>& fn, double lo, double hi) {
    for (int it = 0; it < 300; ++it) {
        double m1 = lo + (hi - lo) / 3.0, m2 = hi - (hi - lo) / 3.0;
        if (fn(m1) <= fn(m2))
            hi = m2;
        else
            lo = m1;
    }
    return 0.5 * (lo + hi);
}

double nmse(const Vector& truth, const Vector& est) {
    Vector d = truth - est;
    return dot(d, d) / dot(truth, truth);
}

// Projected subgradient descent for (1/2)||y-Ax||^2 + lambda*||x||_1 over a
// box, best iterate by exact objective, best step constant from a small grid.
Vector subgrad_l1_box(const DenseMatrix& a, const Vector& y, double lambda, double lo, double hi,
                      std::size_t iters) {
    auto objective = [&](const Vector& x) {
        Vector res = y - matvec(a, x);
        return 0.5 * dot(res, res) + lambda * nrm1(x);
    };
    Vector best(a.cols, 0.0);
    double best_val = objective(best);
    for (double c : {0.02, 0.1, 0.5}) {
        Vector x(a.cols, 0.0);
        for (std::size_t k = 0; k < iters; ++k) {
            Vector g = matvec_t(a, matvec(a, x) - y);
            for (std::size_t i = 0; i < x.size(); ++i)
                g[i] += lambda * (x[i] > 0.0 ? 1.0 : (x[i] < 0.0 ? -1.0 : 0.0));
            double s = c / std::sqrt(double(k + 1));
            for (std::size_t i = 0; i < x.size(); ++i)
                x[i] = std::min(hi, std::max(lo, x[i] - s * g[i]));
            double val = objective(x);
            if (val < best_val) {
                best_val = val;
                best = x;
            }
        }
    }
    return best;
}

// The coupled-difference convex model in joint (x, sigma) form:
//   (1/2)||y-Ax||^2 + lambda*(alpha*||Lx-sigma||_1 + (1-alpha)*||M sigma||_1)
// with M sigma = (-s_0, s_0-s_1, ..., s_{m-2}-s_{m-1}, s_{m-1}) reversed-sign
// taper, i.e. entry 0 is -s_0, entries k = s_{k-1}-s_k, entry m is s_{m-1}.
Vector tgv_mul_m(const Vector& s) {
    std::size_t m = s.size();
    Vector out(m + 1);
    out[0] = -s[0];
    for (std::size_t k = 1; k < m; ++k) out[k] = s[k - 1] - s[k];
    out[m] = s[m - 1];
    return out;
}

Vector tgv_mul_mt(const Vector& xi) {
    std::size_t m = xi.size() - 1;
    Vector out(m);
    for (std::size_t j = 0; j < m; ++j) out[j] = xi[j + 1] - xi[j];
    return out;
}

Vector subgrad_tgv_joint(const DenseMatrix& a, const Vector& y, const DenseMatrix& el,
                         double lambda, double alpha, std::size_t iters) {
    const std::size_t n = a.cols, m = el.rows;
    auto objective = [&](const Vector& x, const Vector& s) {
        Vector res = y - matvec(a, x);
        Vector d = matvec(el, x) - s;
        return 0.5 * dot(res, res) + lambda * (alpha * nrm1(d) + (1.0 - alpha) * nrm1(tgv_mul_m(s)));
    };
    auto sign = [](double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); };
    Vector best(n, 0.0);
    double best_val = objective(best, Vector(m, 0.0));
    for (double c : {0.02, 0.1, 0.5}) {
        Vector x(n, 0.0), s(m, 0.0);
        for (std::size_t k = 0; k < iters; ++k) {
            Vector d = matvec(el, x) - s;
            Vector sd(m);
            for (std::size_t i = 0; i < m; ++i) sd[i] = sign(d[i]);
            Vector gx = matvec_t(a, matvec(a, x) - y) + scaled(matvec_t(el, sd), lambda * alpha);
            Vector ms = tgv_mul_m(s);
            Vector sm(m + 1);
            for (std::size_t i = 0; i <= m; ++i) sm[i] = sign(ms[i]);
            Vector gs = scaled(sd, -lambda * alpha) +
                        scaled(tgv_mul_mt(sm), lambda * (1.0 - alpha));
            double st = c / std::sqrt(double(k + 1));
            axpy(-st, gx, x);
            axpy(-st, gs, s);
            double val = objective(x, s);
            if (val < best_val) {
                best_val = val;
                best = x;
            }
        }
    }
    return best;
}

// Pairwise seed with zero budget on a connected chain collapses to the
// radial norm sqrt(m)*||u||_2, so the convex model has an exact subgradient.
Vector subgrad_lop_radial(const DenseMatrix& a, const Vector& y, double lambda,
                          std::size_t iters) {
    const std::size_t n = a.cols;
    const double w = std::sqrt(double(n));
    auto objective = [&](const Vector& x) {
        Vector res = y - matvec(a, x);
        return 0.5 * dot(res, res) + lambda * w * nrm2(x);
    };
    Vector best(n, 0.0);
    double best_val = objective(best);
    for (double c : {0.02, 0.1, 0.5}) {
        Vector x(n, 0.0);
        for (std::size_t k = 0; k < iters; ++k) {
            Vector g = matvec_t(a, matvec(a, x) - y);
            double nx = nrm2(x);
            if (nx > 1e-12) axpy(lambda * w / nx, x, g);
            axpy(-c / std::sqrt(double(k + 1)), g, x);
            double val = objective(x);
            if (val < best_val) {
                best_val = val;
                best = x;
            }
        }
    }
    return best;
}

// ---- shared instance builders ----

ProblemSpec plain_l1_spec(const DenseMatrix& a, const Vector& y, double lambda,
                          const DenseMatrix& btb) {
    ProblemSpec spec;
    spec.A = a;
    spec.y = y;
    spec.L = DenseMatrix::identity(a.cols);
    spec.lambda = lambda;
    spec.seed = make_plain_seed(a.cols, GroupPartition::singletons(a.cols));
    spec.BtB = btb;
    return spec;
}

ProblemSpec lop_identity_spec(std::mt19937_64& rng, std::size_t d, std::size_t n, double lambda,
                              double alpha, double theta) {
    ProblemSpec spec;
    spec.A = testutil::random_matrix(rng, d, n);
    Vector xorg(n, 0.0);
    for (std::size_t i = 0; i < n / 2; ++i) xorg[i] = (i % 2 == 0) ? 1.0 : -0.5;
    spec.y = matvec(spec.A, xorg) + testutil::random_vector(rng, d, 0.05);
    spec.L = DenseMatrix::identity(n);
    spec.lambda = lambda;
    spec.seed = make_lop_seed(n, alpha, NeighborGraph::chain(n));
    spec.BtB = gram(design_B_identity_L(spec.A, lambda, theta));
    return spec;
}

bool all_zero(const Vector& v) {
    for (double x : v)
        if (x != 0.0) return false;
    return true;
}

}  // namespace

TEST_SUITE("solver") {
    TEST_CASE("state plumbing and input validation") {
        auto rng = testutil::rng(90);
        ProblemSpec spec = lop_identity_spec(rng, 10, 8, 0.4, 0.6, 0.7);
        check_shapes(spec);
        validate_problem(spec);

        auto z = SolverState::zeros(spec);
        CHECK(z.x.size() == 8);
        CHECK(z.sigma.size() == 8);
        CHECK(z.v.size() == 8);
        CHECK(z.tau.size() == 8);
        CHECK(z.r.size() == 8);
        CHECK(z.eta.size() == 8);
        CHECK(z.xi.size() == 7);
        CHECK(z.zeta.size() == 7);

        ProblemSpec bad = spec;
        bad.y.pop_back();
        CHECK_THROWS_AS(check_shapes(bad), std::invalid_argument);
        bad = spec;
        bad.lambda = 0.0;
        CHECK_THROWS_AS(check_shapes(bad), std::invalid_argument);
        bad = spec;
        bad.L = DenseMatrix::identity(7);
        CHECK_THROWS_AS(check_shapes(bad), std::invalid_argument);
        bad = spec;
        bad.BtB = DenseMatrix(7, 7);
        CHECK_THROWS_AS(check_shapes(bad), std::invalid_argument);
        bad = spec;
        bad.seed = make_lop_seed(7, 0.6, NeighborGraph::chain(7));
        CHECK_THROWS_AS(check_shapes(bad), std::invalid_argument);

        // lambda large enough to break overall convexity
        ProblemSpec nonconvex = plain_l1_spec(DenseMatrix::identity(3), Vector(3, 0.0), 2.0,
                                              DenseMatrix::identity(3));
        CHECK_THROWS_AS(validate_problem(nonconvex), std::invalid_argument);

        auto params = select_step_params(spec.A, spec.L, spec.seed.M, spec.BtB, spec.lambda);
        SolveOptions opts;
        opts.mu = 0.0;
        CHECK_THROWS_AS(solve(spec, params, opts), std::invalid_argument);
        opts.mu = 1.5;
        CHECK_THROWS_AS(solve(spec, params, opts), std::invalid_argument);
        opts.mu = 1.0;
        opts.threshold = 0.0;
        CHECK_THROWS_AS(solve(spec, params, opts), std::invalid_argument);

        auto q = assemble_Q(spec.A, spec.L, spec.BtB, spec.lambda);
        auto zbad = z;
        zbad.v.pop_back();
        CHECK_THROWS_AS(apply_T(zbad, spec, params, q), std::invalid_argument);
        CHECK_THROWS_AS(apply_T(z, spec, params, DenseMatrix::identity(5)),
                        std::invalid_argument);

        // running out of iterations is an outcome, not an error
        SolveOptions tiny;
        tiny.threshold = 1e-16;
        tiny.max_iters = 5;
        auto sol = solve(spec, params, tiny);
        CHECK_FALSE(sol.converged);
        CHECK(sol.iterations == 5);
        CHECK(sol.final_residual >= 1e-16);

        CHECK_THROWS_AS(Constraint::box(1.0, -1.0), std::invalid_argument);
        CHECK_THROWS_AS(Constraint::custom(nullptr), std::invalid_argument);
    }

    TEST_CASE("zero is a fixed point when y = 0") {
        auto rng = testutil::rng(91);
        ProblemSpec spec = lop_identity_spec(rng, 9, 7, 0.5, 0.8, 0.6);
        spec.y.assign(spec.y.size(), 0.0);
        auto params = select_step_params(spec.A, spec.L, spec.seed.M, spec.BtB, spec.lambda);
        auto q = assemble_Q(spec.A, spec.L, spec.BtB, spec.lambda);
        auto z = SolverState::zeros(spec);
        auto t = apply_T(z, spec, params, q);
        CHECK(all_zero(t.x));
        CHECK(all_zero(t.sigma));
        CHECK(all_zero(t.v));
        CHECK(all_zero(t.tau));
        CHECK(all_zero(t.r));
        CHECK(all_zero(t.eta));
        CHECK(all_zero(t.xi));
        CHECK(all_zero(t.zeta));

        // coupled-difference seed, box constraint containing the origin
        ProblemSpec spec2;
        spec2.A = testutil::random_matrix(rng, 8, 6);
        spec2.y.assign(8, 0.0);
        spec2.L = difference_matrix_1d(6);
        spec2.lambda = 0.8;
        spec2.seed = make_tgv_seed(5, 0.4);
        spec2.BtB = design_BtB_difference_L(spec2.A, spec2.lambda, 0.5);
        spec2.constraint = Constraint::box(-1.0, 1.0);
        auto params2 =
            select_step_params(spec2.A, spec2.L, spec2.seed.M, spec2.BtB, spec2.lambda);
        auto q2 = assemble_Q(spec2.A, spec2.L, spec2.BtB, spec2.lambda);
        auto t2 = apply_T(SolverState::zeros(spec2), spec2, params2, q2);
        CHECK(all_zero(t2.x));
        CHECK(all_zero(t2.sigma));
        CHECK(all_zero(t2.v));
        CHECK(all_zero(t2.tau));
        CHECK(all_zero(t2.r));
        CHECK(all_zero(t2.eta));
        CHECK(all_zero(t2.xi));
        CHECK(all_zero(t2.zeta));
    }

    TEST_CASE("single step matches a hand trace") {
        // n = 2 degenerate-seed instance: only x, v, r are live, BtB = O,
        // so each update line collapses to hand arithmetic.
        ProblemSpec spec;
        spec.A = DenseMatrix::from_data(2, 2, {1.0, 0.0, 0.0, 2.0});
        spec.y = {1.0, -2.0};
        spec.L = DenseMatrix::identity(2);
        spec.lambda = 0.7;
        spec.seed = make_plain_seed(2, GroupPartition::singletons(2));
        spec.BtB = DenseMatrix(2, 2);

        StepParams params;
        params.gamma1 = 0.1;
        params.gamma2 = 0.5;
        params.gamma3 = 0.25;
        params.gamma4 = 0.5;

        auto q = assemble_Q(spec.A, spec.L, spec.BtB, spec.lambda);
        SolverState z = SolverState::zeros(spec);
        z.x = {0.3, -0.4};
        z.v = {0.5, -1.2};
        z.r = {0.2, -0.9};
        auto t = apply_T(z, spec, params, q);

        // x^ = x - g1*(A^T A x - A^T y + lambda r), no projection
        Vector ata_x = {0.3, -1.6}, aty = {1.0, -4.0};
        for (std::size_t i = 0; i < 2; ++i) {
            double grad = ata_x[i] - aty[i] + spec.lambda * z.r[i];
            CHECK(t.x[i] == doctest::Approx(z.x[i] - params.gamma1 * grad).epsilon(1e-13));
        }
        // v^ = soft(v, g3); BtB = O freezes the argument at v itself
        for (std::size_t i = 0; i < 2; ++i)
            CHECK(t.v[i] == doctest::Approx(soft(z.v[i], params.gamma3)).epsilon(1e-13));
        // r^ = clamp(r + (2x^ - x)) to [-1, 1] (conjugate of the l1 norm)
        for (std::size_t i = 0; i < 2; ++i) {
            double arg = z.r[i] + (2.0 * t.x[i] - z.x[i]);
            CHECK(t.r[i] ==
                  doctest::Approx(std::min(1.0, std::max(-1.0, arg))).epsilon(1e-13));
        }
    }

    TEST_CASE("soft and firm threshold solves") {
        // BtB = O: separable l1 problem with the soft-threshold solution
        ProblemSpec spec = plain_l1_spec(DenseMatrix::identity(2), {2.0, 0.5}, 1.0,
                                         DenseMatrix(2, 2));
        auto params = select_step_params(spec.A, spec.L, spec.seed.M, spec.BtB, spec.lambda);
        SolveOptions opts;
        opts.threshold = 1e-12;
        opts.max_iters = 200000;
        auto sol = solve(spec, params, opts);
        REQUIRE(sol.converged);
        CHECK(sol.final_residual < opts.threshold);
        CHECK(sol.x_star[0] == doctest::Approx(1.0).epsilon(1e-8));
        CHECK(std::fabs(sol.x_star[1]) <= 1e-8);
        CHECK(certify_inner_optimality(spec, sol, 1e-6) == 0.0);

        // BtB = theta*I: per-coordinate objective is exactly evaluable, so a
        // 1-D search is the oracle; y_0 beyond the knee must pass through
        for (Vector y : {Vector{2.0, 0.5}, Vector{1.05, -1.08}}) {
            double theta = 0.9;
            DenseMatrix btb = DenseMatrix::identity(2);
            for (auto& e : btb.a) e *= theta;
            ProblemSpec gspec = plain_l1_spec(DenseMatrix::identity(2), y, 1.0, btb);
            auto gparams =
                select_step_params(gspec.A, gspec.L, gspec.seed.M, gspec.BtB, gspec.lambda);
            auto gsol = solve(gspec, gparams, opts);
            REQUIRE(gsol.converged);
            for (std::size_t i = 0; i < 2; ++i) {
                double want = ternary_min(
                    [&](double x) {
                        return 0.5 * (y[i] - x) * (y[i] - x) + scalar_gme_l1(x, theta);
                    },
                    -5.0, 5.0);
                CHECK(gsol.x_star[i] == doctest::Approx(want).epsilon(1e-6));
            }
        }
    }

    TEST_CASE("convex solves match projected subgradient oracles") {
        SolveOptions opts;
        opts.threshold = 1e-11;
        opts.max_iters = 400000;

        SUBCASE("separable l1 over a box") {
            auto rng = testutil::rng(101);
            DenseMatrix a = testutil::random_matrix(rng, 9, 6);
            Vector xorg = {1.0, 0.0, 0.0, -0.7, 0.0, 0.4};
            Vector y = matvec(a, xorg) + testutil::random_vector(rng, 9, 0.1);
            ProblemSpec spec = plain_l1_spec(a, y, 0.4, DenseMatrix(6, 6));
            spec.constraint = Constraint::box(-1.0, 1.0);
            auto params = select_step_params(spec.A, spec.L, spec.seed.M, spec.BtB, spec.lambda);
            auto sol = solve(spec, params, opts);
            REQUIRE(sol.converged);
            Vector xo = subgrad_l1_box(a, y, 0.4, -1.0, 1.0, 100000);
            CHECK(nmse(sol.x_star, xo) <= 1e-3);
        }

        SUBCASE("coupled-difference model") {
            auto rng = testutil::rng(102);
            DenseMatrix a = testutil::random_matrix(rng, 11, 8);
            Vector xorg = {0.0, 0.2, 0.4, 0.6, 0.5, 0.4, 0.3, 0.2};
            Vector y = matvec(a, xorg) + testutil::random_vector(rng, 11, 0.05);
            ProblemSpec spec;
            spec.A = a;
            spec.y = y;
            spec.L = difference_matrix_1d(8);
            spec.lambda = 0.5;
            spec.seed = make_tgv_seed(7, 0.45);
            spec.BtB = DenseMatrix(7, 7);
            auto params = select_step_params(spec.A, spec.L, spec.seed.M, spec.BtB, spec.lambda);
            auto sol = solve(spec, params, opts);
            REQUIRE(sol.converged);
            Vector xo = subgrad_tgv_joint(a, y, spec.L, 0.5, 0.45, 100000);
            CHECK(nmse(sol.x_star, xo) <= 1e-3);
        }

        SUBCASE("radial-norm collapse of the pairwise seed") {
            auto rng = testutil::rng(103);
            DenseMatrix a = testutil::random_matrix(rng, 10, 7);
            Vector xorg = {0.9, -0.3, 0.0, 0.5, 0.0, -0.8, 0.2};
            Vector y = matvec(a, xorg) + testutil::random_vector(rng, 10, 0.05);
            ProblemSpec spec;
            spec.A = a;
            spec.y = y;
            spec.L = DenseMatrix::identity(7);
            spec.lambda = 0.35;
            spec.seed = make_lop_seed(7, 0.0, NeighborGraph::chain(7));
            spec.BtB = DenseMatrix(7, 7);
            auto params = select_step_params(spec.A, spec.L, spec.seed.M, spec.BtB, spec.lambda);
            auto sol = solve(spec, params, opts);
            REQUIRE(sol.converged);
            Vector xo = subgrad_lop_radial(a, y, 0.35, 100000);
            CHECK(nmse(sol.x_star, xo) <= 1e-3);
        }
    }

    TEST_CASE("solution is locally optimal under random perturbations") {
        auto rng = testutil::rng(104);
        ProblemSpec spec = lop_identity_spec(rng, 15, 20, 0.3, 0.5, 0.8);
        spec.constraint = Constraint::box(-8.0, 8.0);
        auto params = select_step_params(spec.A, spec.L, spec.seed.M, spec.BtB, spec.lambda);
        SolveOptions opts;
        opts.threshold = 1e-10;
        opts.max_iters = 400000;
        auto sol = solve(spec, params, opts);
        REQUIRE(sol.converged);
        double jstar = evaluate_objective(spec, sol.x_star, 1e-7);
        for (int t = 0; t < 100; ++t) {
            Vector d = testutil::random_vector(rng, 20);
            d = scaled(d, 1e-2 / nrm2(d));
            double j = evaluate_objective(spec, sol.x_star + d, 1e-7);
            CHECK(jstar <= j + 1e-6);
        }
        // the certificate at the converged point
        double gap = certify_inner_optimality(spec, sol, 1e-6);
        CHECK(gap <= 10.0 * 1e-6);
        CHECK(gap >= -10.0 * 1e-6);  // floor set by the evaluator's own accuracy
        // a perturbed sigma block must certify strictly worse
        Solution rough = sol;
        auto noise = testutil::random_vector(rng, rough.state.sigma.size(), 1e-2);
        rough.state.sigma = rough.state.sigma + noise;
        CHECK(certify_inner_optimality(spec, rough, 1e-6) > gap + 1e-9);
    }

    TEST_CASE("nonexpansive and averaged in the solver metric") {
        auto rng = testutil::rng(105);
        ProblemSpec spec = lop_identity_spec(rng, 10, 8, 0.4, 0.7, 0.8);
        auto params = select_step_params(spec.A, spec.L, spec.seed.M, spec.BtB, spec.lambda);
        auto q = assemble_Q(spec.A, spec.L, spec.BtB, spec.lambda);
        auto pm = build_p_metric(spec.L, spec.seed.M, spec.BtB, params, spec.lambda);

        auto random_state = [&] {
            SolverState z = SolverState::zeros(spec);
            for (Vector* b : {&z.x, &z.sigma, &z.v, &z.tau, &z.r, &z.eta, &z.xi, &z.zeta})
                for (double& val : *b) val = std::normal_distribution<double>()(rng);
            return z;
        };
        auto to_vec = [](const SolverState& z) {
            Vector out;
            for (const Vector* b : {&z.x, &z.sigma, &z.v, &z.tau, &z.r, &z.eta, &z.xi, &z.zeta})
                out.insert(out.end(), b->begin(), b->end());
            return out;
        };

        for (int t = 0; t < 40; ++t) {
            auto z1 = random_state(), z2 = random_state();
            Vector dt = to_vec(apply_T(z1, spec, params, q)) - to_vec(apply_T(z2, spec, params, q));
            Vector dz = to_vec(z1) - to_vec(z2);
            CHECK(pm.p_norm(dt) <= (1.0 + 1e-9) * pm.p_norm(dz));
        }

        auto rep = averagedness_check(spec, params, 100);
        CHECK(rep.trials == 100);
        CHECK(rep.violations == 0);
        CHECK(rep.worst_margin >= -1e-8);

        // negative control: inflating gamma1 voids condition 1
        StepParams badp = params;
        badp.gamma1 *= 10.0;
        auto bad = averagedness_check(spec, badp, 100);
        CHECK(bad.violations > 0);
        CHECK(bad.worst_margin < -1e-8);

        auto rep0 = averagedness_check(spec, params, 0);
        CHECK(rep0.worst_margin == 0.0);
        CHECK(rep0.violations == 0);
    }

    TEST_CASE("determinism and relaxation") {
        auto rng = testutil::rng(106);
        ProblemSpec spec = lop_identity_spec(rng, 9, 7, 0.35, 0.6, 0.75);
        auto params = select_step_params(spec.A, spec.L, spec.seed.M, spec.BtB, spec.lambda);
        SolveOptions opts;
        opts.threshold = 1e-9;
        opts.max_iters = 200000;
        opts.record_history = true;

        auto s1 = solve(spec, params, opts);
        auto s2 = solve(spec, params, opts);
        REQUIRE(s1.converged);
        REQUIRE(s1.iterations == s2.iterations);
        for (std::size_t i = 0; i < s1.x_star.size(); ++i) CHECK(s1.x_star[i] == s2.x_star[i]);
        REQUIRE(s1.residual_history.size() == s2.residual_history.size());
        for (std::size_t i = 0; i < s1.residual_history.size(); ++i)
            CHECK(s1.residual_history[i] == s2.residual_history[i]);

        SolveOptions relaxed = opts;
        relaxed.mu = 0.5;
        auto s3 = solve(spec, params, relaxed);
        REQUIRE(s3.converged);
        CHECK(nmse(s1.x_star, s3.x_star) <= 1e-8);

        // warm start from the solution: immediate convergence
        SolveOptions warm = opts;
        warm.initial = s1.state;
        auto s4 = solve(spec, params, warm);
        CHECK(s4.converged);
        CHECK(s4.iterations <= 2);
    }

    TEST_CASE("residual histories are monotone in the metric") {
        auto rng = testutil::rng(107);
        ProblemSpec spec = lop_identity_spec(rng, 10, 8, 0.45, 0.6, 0.7);
        auto params = select_step_params(spec.A, spec.L, spec.seed.M, spec.BtB, spec.lambda);
        SolveOptions opts;
        opts.threshold = 1e-9;
        opts.max_iters = 200000;
        opts.record_history = true;
        auto sol = solve(spec, params, opts);
        REQUIRE(sol.converged);
        REQUIRE(sol.residual_history.size() == sol.iterations);
        REQUIRE(sol.p_residual_history.size() == sol.iterations);
        CHECK(sol.residual_history.back() == sol.final_residual);
        CHECK(sol.final_residual < opts.threshold);
        for (std::size_t k = 0; k + 1 < sol.p_residual_history.size(); ++k)
            CHECK(sol.p_residual_history[k + 1] <=
                  sol.p_residual_history[k] * (1.0 + 1e-9) + 1e-300);
    }

    TEST_CASE("objective evaluation") {
        auto rng = testutil::rng(108);
        ProblemSpec spec = lop_identity_spec(rng, 9, 7, 0.5, 0.7, 0.8);

        // x = 0, y = 0 costs exactly nothing
        ProblemSpec zspec = spec;
        zspec.y.assign(zspec.y.size(), 0.0);
        CHECK(std::fabs(evaluate_objective(zspec, Vector(7, 0.0), 1e-8)) <= 1e-8);

        // zero envelope: the cost reduces to the convex penalty
        ProblemSpec cspec = spec;
        cspec.BtB = DenseMatrix(7, 7);
        Vector x = testutil::random_vector(rng, 7);
        Vector resid = cspec.y - matvec(cspec.A, x);
        double want = 0.5 * dot(resid, resid) +
                      cspec.lambda * eval_mi_penalty(cspec.seed, matvec(cspec.L, x), 1e-8);
        CHECK(evaluate_objective(cspec, x, 1e-8) == doctest::Approx(want).epsilon(1e-9));

        // constraint violations are infinitely expensive
        ProblemSpec bspec = spec;
        bspec.constraint = Constraint::box(-1.0, 1.0);
        Vector far(7, 0.0);
        far[3] = 1.5;
        CHECK(std::isinf(evaluate_objective(bspec, far, 1e-6)));
        CHECK(evaluate_objective(bspec, Vector(7, 0.0), 1e-6) <
              std::numeric_limits<double>::infinity());

        CHECK_THROWS_AS(evaluate_objective(spec, Vector(6, 0.0), 1e-6), std::invalid_argument);
        Vector bad(7, 0.0);
        bad[0] = std::numeric_limits<double>::quiet_NaN();
        CHECK_THROWS_AS(evaluate_objective(spec, bad, 1e-6), std::invalid_argument);

        // global optimality spot check on the separable instance
        ProblemSpec gspec = plain_l1_spec(DenseMatrix::identity(2), {2.0, 0.5}, 1.0,
                                          scaled(DenseMatrix::identity(2), 0.9));
        auto gparams = select_step_params(gspec.A, gspec.L, gspec.seed.M, gspec.BtB, gspec.lambda);
        SolveOptions opts;
        opts.threshold = 1e-12;
        opts.max_iters = 200000;
        auto gsol = solve(gspec, gparams, opts);
        REQUIRE(gsol.converged);
        double jstar = evaluate_objective(gspec, gsol.x_star, 1e-8);
        for (int t = 0; t < 100; ++t) {
            Vector cand = testutil::random_vector(rng, 2, 1.5);
            CHECK(evaluate_objective(gspec, cand, 1e-8) >= jstar - 1e-6);
        }
    }

    TEST_CASE("scaling the data rescales the objective") {
        auto rng = testutil::rng(109);
        ProblemSpec spec = lop_identity_spec(rng, 10, 6, 0.4, 0.6, 0.8);
        const double c = 1.7;
        ProblemSpec sspec = spec;
        sspec.A = scaled(spec.A, c);
        sspec.y = scaled(spec.y, c);
        sspec.lambda = c * c * spec.lambda;
        // identity-analysis BtB is (theta/lambda) A^T A, invariant under
        // (A, lambda) -> (cA, c^2 lambda)
        validate_problem(sspec);

        for (int t = 0; t < 20; ++t) {
            Vector x = testutil::random_vector(rng, 6);
            double j1 = evaluate_objective(spec, x, 1e-9);
            double j2 = evaluate_objective(sspec, x, 1e-9);
            CHECK(j2 == doctest::Approx(c * c * j1).epsilon(1e-6));
        }

        SolveOptions opts;
        opts.threshold = 1e-11;
        opts.max_iters = 400000;
        auto params = select_step_params(spec.A, spec.L, spec.seed.M, spec.BtB, spec.lambda);
        auto sparams = select_step_params(sspec.A, sspec.L, sspec.seed.M, sspec.BtB, sspec.lambda);
        auto sol = solve(spec, params, opts);
        auto ssol = solve(sspec, sparams, opts);
        REQUIRE(sol.converged);
        REQUIRE(ssol.converged);
        CHECK(nmse(sol.x_star, ssol.x_star) <= 1e-6);
    }

    TEST_CASE("inner optimality certificates") {
        auto rng = testutil::rng(110);

        // coupled-difference instance
        ProblemSpec spec;
        spec.A = testutil::random_matrix(rng, 12, 9);
        Vector xorg = {0.0, 0.1, 0.2, 0.3, 0.35, 0.3, 0.2, 0.1, 0.0};
        spec.y = matvec(spec.A, xorg) + testutil::random_vector(rng, 12, 0.05);
        spec.L = difference_matrix_1d(9);
        spec.lambda = 0.5;
        spec.seed = make_tgv_seed(8, 0.4);
        spec.BtB = design_BtB_difference_L(spec.A, spec.lambda, 0.7);
        auto params = select_step_params(spec.A, spec.L, spec.seed.M, spec.BtB, spec.lambda);
        SolveOptions opts;
        opts.threshold = 1e-11;
        opts.max_iters = 400000;
        auto sol = solve(spec, params, opts);
        REQUIRE(sol.converged);
        double gap = certify_inner_optimality(spec, sol, 1e-6);
        CHECK(gap <= 1e-5);
        CHECK(gap >= -1e-5);

        Solution rough = sol;
        rough.state.sigma = rough.state.sigma + testutil::random_vector(rng, 8, 1e-2);
        double gap2 = certify_inner_optimality(spec, rough, 1e-6);
        CHECK(gap2 > gap + 1e-9);
    }
}
