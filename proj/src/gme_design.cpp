#include "gmemi/gme_design.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "gmemi/seeds.hpp"

namespace gmemi {

DenseMatrix design_B_identity_L(const DenseMatrix& A, double lambda, double theta) {
    if (!(lambda > 0.0)) throw std::invalid_argument("design_B_identity_L: lambda must be > 0");
    if (!(theta >= 0.0 && theta <= 1.0))
        throw std::invalid_argument("design_B_identity_L: theta must lie in [0,1]");
    return scaled(A, std::sqrt(theta / lambda));
}

DenseMatrix design_BtB_difference_L(const DenseMatrix& A, double lambda, double theta) {
    if (!(lambda > 0.0))
        throw std::invalid_argument("design_BtB_difference_L: lambda must be > 0");
    if (!(theta >= 0.0 && theta <= 1.0))
        throw std::invalid_argument("design_BtB_difference_L: theta must lie in [0,1]");
    const std::size_t n = A.cols;
    if (n < 2)
        throw std::invalid_argument(
            "design_BtB_difference_L: A must have >= 2 columns to match the difference operator");

    DenseMatrix as = matmul(A, cumsum_matrix(n));
    Vector h(A.rows);
    DenseMatrix big_h(A.rows, n - 1);
    for (std::size_t i = 0; i < A.rows; ++i) {
        h[i] = as(i, 0);
        for (std::size_t j = 1; j < n; ++j) big_h(i, j - 1) = as(i, j);
    }

    DenseMatrix g = gram(big_h);  // H^T H, exactly symmetric
    double hn2 = dot(h, h);
    if (std::sqrt(hn2) > 1e-12 * operator_norm(A)) {
        Vector w = matvec_t(big_h, h);
        for (std::size_t i = 0; i < g.rows; ++i)
            for (std::size_t j = 0; j <= i; ++j) {
                double v = g(i, j) - w[i] * w[j] / hn2;
                g(i, j) = v;
                g(j, i) = v;
            }
    }
    return scaled(g, theta / lambda);
}

DenseMatrix assemble_Q(const DenseMatrix& A, const DenseMatrix& L, const DenseMatrix& BtB,
                       double lambda) {
    if (!(lambda > 0.0)) throw std::invalid_argument("assemble_Q: lambda must be > 0");
    const std::size_t n = A.cols;
    if (L.cols != n || BtB.rows != L.rows || BtB.cols != L.rows)
        throw std::invalid_argument("assemble_Q: shape mismatch");

    DenseMatrix q = gram(A);
    DenseMatrix t = matmul(transpose(L), matmul(BtB, L));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j <= i; ++j) {
            double v = q(i, j) - lambda * 0.5 * (t(i, j) + t(j, i));
            q(i, j) = v;
            q(j, i) = v;
        }
    return q;
}

std::pair<bool, double> verify_overall_convexity(const DenseMatrix& Q, double tol) {
    double lmin = min_eigenvalue_symmetric(Q);
    return {lmin >= -tol, lmin};
}

namespace {

// (1/g) I - W, exactly symmetrized input expected
double margin_of(const DenseMatrix& w, double inv_gamma) {
    DenseMatrix s = scaled(w, -1.0);
    for (std::size_t i = 0; i < s.rows; ++i) s(i, i) += inv_gamma;
    return min_eigenvalue_symmetric(s);
}

DenseMatrix symmetrized(const DenseMatrix& m) {
    DenseMatrix s = m;
    for (std::size_t i = 0; i < s.rows; ++i)
        for (std::size_t j = 0; j < i; ++j) {
            double v = 0.5 * (s(i, j) + s(j, i));
            s(i, j) = v;
            s(j, i) = v;
        }
    return s;
}

}  // namespace

StepParams select_step_params(const DenseMatrix& A, const DenseMatrix& L, const DenseMatrix& M,
                              const DenseMatrix& BtB, double lambda, double kappa, double delta) {
    if (!(lambda > 0.0)) throw std::invalid_argument("select_step_params: lambda must be > 0");
    if (!(kappa > 1.0)) throw std::invalid_argument("select_step_params: kappa must be > 1");
    if (!(delta > 0.0)) throw std::invalid_argument("select_step_params: delta must be > 0");
    if (L.cols != A.cols) throw std::invalid_argument("select_step_params: A/L column mismatch");
    if (BtB.rows != L.rows || BtB.cols != L.rows)
        throw std::invalid_argument("select_step_params: BtB must match rows(L)");

    const bool has_m = !M.empty();
    const double mn = operator_norm(M);
    const double mn2 = mn * mn;
    const double btbn = operator_norm(BtB);
    const double cfac = kappa / 2.0 + 2.0 / kappa;

    DenseMatrix w1 = gram(A);
    for (double& v : w1.a) v *= kappa / 2.0;
    DenseMatrix ltl = gram(L);
    for (std::size_t i = 0; i < w1.rows; ++i)
        for (std::size_t j = 0; j < w1.cols; ++j) w1(i, j) += lambda * ltl(i, j);

    StepParams sp;
    sp.kappa = kappa;
    sp.delta = delta;
    sp.gamma1 = 1.0 / (operator_norm(w1) + delta);
    sp.gamma2 = 1.0 / (mn2 + 1.0 + delta);
    sp.gamma3 = 1.0 / (cfac * btbn + delta);
    sp.gamma4 = 1.0 / (sp.gamma3 * mn2 + delta);

    // re-verify each condition numerically; the closed form leaves margin
    // delta, so a failure means the instance's scale swallowed the slack
    auto fail = [](int which) {
        std::ostringstream os;
        os << "select_step_params: step condition " << which
           << " failed numerical verification";
        throw std::runtime_error(os.str());
    };
    if (margin_of(symmetrized(w1), 1.0 / sp.gamma1) <= 0.0) fail(1);
    if (has_m) {
        DenseMatrix w2 = gram(M);
        for (std::size_t i = 0; i < w2.rows; ++i) w2(i, i) += 1.0;
        if (margin_of(w2, 1.0 / sp.gamma2) <= 0.0) fail(2);
    } else if (1.0 / sp.gamma2 - 1.0 <= 0.0) {
        fail(2);
    }
    if (1.0 / sp.gamma3 < cfac * btbn) fail(3);
    if (has_m) {
        DenseMatrix mmt = gram(transpose(M));
        for (double& v : mmt.a) v *= sp.gamma3;
        if (margin_of(mmt, 1.0 / sp.gamma4) <= 0.0) fail(4);
    } else if (1.0 / sp.gamma4 <= 0.0) {
        fail(4);
    }
    return sp;
}

PMetric build_p_metric(const DenseMatrix& L, const DenseMatrix& M, const DenseMatrix& BtB,
                       const StepParams& params, double lambda) {
    if (!(lambda > 0.0)) throw std::invalid_argument("build_p_metric: lambda must be > 0");
    if (BtB.rows != L.rows || BtB.cols != L.rows)
        throw std::invalid_argument("build_p_metric: BtB must match rows(L)");

    PMetric pm;
    pm.n = L.cols;
    pm.m = L.rows;
    pm.l = M.empty() ? 0 : M.cols;
    pm.p = M.empty() ? 0 : M.rows;
    const std::size_t n = pm.n, m = pm.m, l = pm.l, p = pm.p;
    const double g1 = params.gamma1, g2 = params.gamma2, g3 = params.gamma3, g4 = params.gamma4;

    DenseMatrix btbl = matmul(BtB, L);  // m x n

    // P1 over (x, v, r)
    pm.p1 = DenseMatrix(n + 2 * m, n + 2 * m);
    for (std::size_t i = 0; i < n; ++i) pm.p1(i, i) = 1.0 / g1;
    for (std::size_t i = 0; i < m; ++i) {
        pm.p1(n + i, n + i) = lambda / g3;
        pm.p1(n + m + i, n + m + i) = lambda;
    }
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            pm.p1(n + i, j) = -lambda * btbl(i, j);
            pm.p1(j, n + i) = -lambda * btbl(i, j);
            pm.p1(n + m + i, j) = -lambda * L(i, j);
            pm.p1(j, n + m + i) = -lambda * L(i, j);
        }

    // P2 over (sigma, eta, xi), all entries carry lambda
    pm.p2 = DenseMatrix(2 * l + p, 2 * l + p);
    for (std::size_t i = 0; i < l; ++i) {
        pm.p2(i, i) = lambda / g2;
        pm.p2(l + i, l + i) = lambda;
        pm.p2(i, l + i) = -lambda;
        pm.p2(l + i, i) = -lambda;
    }
    for (std::size_t i = 0; i < p; ++i) pm.p2(2 * l + i, 2 * l + i) = lambda;
    for (std::size_t i = 0; i < p; ++i)
        for (std::size_t j = 0; j < l; ++j) {
            pm.p2(2 * l + i, j) = -lambda * M(i, j);
            pm.p2(j, 2 * l + i) = -lambda * M(i, j);
        }

    // P3 over (tau, zeta)
    pm.p3 = DenseMatrix(l + p, l + p);
    for (std::size_t i = 0; i < l; ++i) pm.p3(i, i) = lambda / g3;
    for (std::size_t i = 0; i < p; ++i) pm.p3(l + i, l + i) = lambda / g4;
    for (std::size_t i = 0; i < p; ++i)
        for (std::size_t j = 0; j < l; ++j) {
            pm.p3(l + i, j) = -lambda * M(i, j);
            pm.p3(j, l + i) = -lambda * M(i, j);
        }

    // stacked order (x, sigma, v, tau, r, eta, xi, zeta)
    const std::size_t ox = 0, os = n, ov = n + l, ot = n + l + m, orr = n + l + m + l,
                      oe = n + 2 * l + 2 * m, oxi = n + 3 * l + 2 * m, oz = n + 3 * l + 2 * m + p;
    pm.full = DenseMatrix(pm.dim(), pm.dim());
    auto put1 = [&](std::size_t bi, std::size_t bj, std::size_t di, std::size_t dj,
                    std::size_t ri, std::size_t rj, const DenseMatrix& src) {
        for (std::size_t i = 0; i < ri; ++i)
            for (std::size_t j = 0; j < rj; ++j) pm.full(di + i, dj + j) = src(bi + i, bj + j);
    };
    // from P1: (x,x), (x,v), (x,r), (v,v), (r,r) and mirrors
    put1(0, 0, ox, ox, n, n, pm.p1);
    put1(0, n, ox, ov, n, m, pm.p1);
    put1(n, 0, ov, ox, m, n, pm.p1);
    put1(0, n + m, ox, orr, n, m, pm.p1);
    put1(n + m, 0, orr, ox, m, n, pm.p1);
    put1(n, n, ov, ov, m, m, pm.p1);
    put1(n + m, n + m, orr, orr, m, m, pm.p1);
    // from P2: (sigma,sigma), (sigma,eta), (sigma,xi), (eta,eta), (xi,xi)
    put1(0, 0, os, os, l, l, pm.p2);
    put1(0, l, os, oe, l, l, pm.p2);
    put1(l, 0, oe, os, l, l, pm.p2);
    put1(0, 2 * l, os, oxi, l, p, pm.p2);
    put1(2 * l, 0, oxi, os, p, l, pm.p2);
    put1(l, l, oe, oe, l, l, pm.p2);
    put1(2 * l, 2 * l, oxi, oxi, p, p, pm.p2);
    // from P3: (tau,tau), (tau,zeta), (zeta,zeta)
    put1(0, 0, ot, ot, l, l, pm.p3);
    put1(0, l, ot, oz, l, p, pm.p3);
    put1(l, 0, oz, ot, p, l, pm.p3);
    put1(l, l, oz, oz, p, p, pm.p3);

    return pm;
}

double PMetric::p_inner(const Vector& z1, const Vector& z2) const {
    if (z1.size() != dim() || z2.size() != dim())
        throw std::invalid_argument("PMetric::p_inner: dimension mismatch");
    return dot(z1, matvec(full, z2));
}

double PMetric::p_norm(const Vector& z) const {
    return std::sqrt(std::max(p_inner(z, z), 0.0));
}

}  // namespace gmemi
