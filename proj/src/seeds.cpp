#include "gmemi/seeds.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>
#include <stdexcept>

namespace gmemi {

NeighborGraph NeighborGraph::chain(std::size_t m) {
    NeighborGraph g;
    for (std::size_t i = 0; i + 1 < m; ++i) g.pairs.emplace_back(i, i + 1);
    return g;
}

DenseMatrix difference_matrix_1d(std::size_t n) {
    if (n < 2) throw std::invalid_argument("difference_matrix_1d: n must be >= 2");
    DenseMatrix d(n - 1, n);
    for (std::size_t i = 0; i + 1 < n; ++i) {
        d(i, i) = -1.0;
        d(i, i + 1) = 1.0;
    }
    return d;
}

DenseMatrix cumsum_matrix(std::size_t n) {
    if (n < 1) throw std::invalid_argument("cumsum_matrix: n must be >= 1");
    DenseMatrix s(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j <= i; ++j) s(i, j) = 1.0;
    return s;
}

SeedFunction make_lop_seed(std::size_t m, double alpha, const NeighborGraph& graph) {
    if (m == 0) throw std::invalid_argument("make_lop_seed: m must be >= 1");
    if (alpha < 0.0) throw std::invalid_argument("make_lop_seed: alpha must be >= 0");
    std::set<std::pair<std::size_t, std::size_t>> seen;
    for (const auto& [i, j] : graph.pairs) {
        if (i >= m || j >= m) throw std::invalid_argument("make_lop_seed: pair index out of range");
        if (i == j) throw std::invalid_argument("make_lop_seed: self-pair");
        if (!seen.insert({i, j}).second)
            throw std::invalid_argument("make_lop_seed: duplicate pair");
    }

    SeedFunction s;
    s.m = m;
    s.l = m;
    s.p = graph.pairs.size();
    s.M = DenseMatrix(s.p, s.l);
    for (std::size_t k = 0; k < s.p; ++k) {
        s.M(k, graph.pairs[k].first) = 1.0;  // first minus second
        s.M(k, graph.pairs[k].second) = -1.0;
    }
    s.m_op_norm = (s.p > 0) ? operator_norm(s.M, 1e-12) : 0.0;

    auto pairs = graph.pairs;
    s.apply_M = [pairs](const Vector& sg) {
        Vector out(pairs.size());
        for (std::size_t k = 0; k < pairs.size(); ++k)
            out[k] = sg[pairs[k].first] - sg[pairs[k].second];
        return out;
    };
    s.apply_Mt = [pairs, m](const Vector& xi) {
        Vector out(m, 0.0);
        for (std::size_t k = 0; k < pairs.size(); ++k) {
            out[pairs[k].first] += xi[k];
            out[pairs[k].second] -= xi[k];
        }
        return out;
    };

    s.prox_f = [m](double gamma, const Vector& point) {
        Vector out(2 * m);
        for (std::size_t i = 0; i < m; ++i) {
            auto [ui, si] = prox_perspective_quad(point[i], point[m + i], gamma);
            out[i] = ui;
            out[m + i] = si;
        }
        return out;
    };
    s.prox_g = [alpha](double, const Vector& xi) { return project_l1_ball(xi, alpha); };

    s.eval_f = [m](const Vector& u, const Vector& sg) {
        double v = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            v += perspective_quad(u[i], sg[i]);
            if (!std::isfinite(v)) return std::numeric_limits<double>::infinity();
        }
        return v;
    };
    s.eval_g = [alpha](const Vector& xi) {
        if (nrm1(xi) <= alpha * (1.0 + 1e-12) + 1e-15) return 0.0;
        return std::numeric_limits<double>::infinity();
    };

    // Domain clamp, then shrink toward the mean until ||M sigma||_1 <= alpha.
    // Constants lie in the kernel of every pairwise difference, so the shrink
    // restores g-feasibility exactly while keeping sigma >= 0. If phi(w, .)
    // still comes out infinite (some sigma_i = 0 against w_i != 0, possible
    // only far from optimality), fall back to the best constant sigma, which
    // is always feasible and gives the value sqrt(m) * ||w||_2.
    auto apply_m_local = s.apply_M;
    s.repair_sigma = [m, alpha, apply_m_local](const Vector& w, const Vector& sg) {
        Vector c(sg.size());
        double mean = 0.0;
        for (std::size_t i = 0; i < sg.size(); ++i) {
            c[i] = std::max(sg[i], 0.0);
            mean += c[i];
        }
        mean /= static_cast<double>(std::max<std::size_t>(sg.size(), 1));
        double tv = nrm1(apply_m_local(c));
        double shrink = (tv <= alpha) ? 1.0 : alpha / tv;
        for (double& ci : c) ci = mean + shrink * (ci - mean);
        bool finite = true;
        for (std::size_t i = 0; i < m; ++i)
            if (c[i] <= 0.0 && w[i] != 0.0) {
                finite = false;
                break;
            }
        if (finite) return c;
        double flat = nrm2(w) / std::sqrt(static_cast<double>(m));
        return Vector(sg.size(), flat);
    };
    s.init_sigma = [](const Vector& u) {
        Vector sg(u.size());
        for (std::size_t i = 0; i < u.size(); ++i) sg[i] = std::fabs(u[i]);
        return sg;
    };
    return s;
}

SeedFunction make_tgv_seed(std::size_t m, double alpha) {
    if (m == 0) throw std::invalid_argument("make_tgv_seed: m must be >= 1");
    if (!(alpha > 0.0 && alpha < 1.0))
        throw std::invalid_argument("make_tgv_seed: alpha must lie in (0,1)");
    SeedFunction s;
    s.m = m;
    s.l = m;
    s.p = m + 1;
    s.M = transpose(difference_matrix_1d(m + 1));
    s.m_op_norm = operator_norm(s.M, 1e-12);

    s.apply_M = [m](const Vector& sg) {
        Vector out(m + 1);
        out[0] = -sg[0];
        for (std::size_t i = 1; i < m; ++i) out[i] = sg[i - 1] - sg[i];
        out[m] = sg[m - 1];
        return out;
    };
    s.apply_Mt = [m](const Vector& xi) {
        Vector out(m);
        for (std::size_t i = 0; i < m; ++i) out[i] = xi[i + 1] - xi[i];
        return out;
    };

    auto g1 = GroupPartition::singletons(m);
    s.prox_f = [m, alpha, g1](double gamma, const Vector& point) {
        Vector u(point.begin(), point.begin() + static_cast<std::ptrdiff_t>(m));
        Vector sg(point.begin() + static_cast<std::ptrdiff_t>(m), point.end());
        auto [a, b] = prox_tgv_coupling(u, sg, gamma, alpha, g1);
        Vector out(2 * m);
        std::copy(a.begin(), a.end(), out.begin());
        std::copy(b.begin(), b.end(), out.begin() + static_cast<std::ptrdiff_t>(m));
        return out;
    };
    auto g2 = GroupPartition::singletons(m + 1);
    s.prox_g = [alpha, g2](double gamma, const Vector& xi) {
        return prox_group_l21(xi, g2, gamma * (1.0 - alpha));
    };

    s.eval_f = [alpha](const Vector& u, const Vector& sg) {
        double v = 0.0;
        for (std::size_t i = 0; i < u.size(); ++i) v += std::fabs(u[i] - sg[i]);
        return alpha * v;
    };
    s.eval_g = [alpha](const Vector& xi) { return (1.0 - alpha) * nrm1(xi); };

    s.repair_sigma = [](const Vector&, const Vector& sg) { return sg; };
    s.init_sigma = [](const Vector& u) { return u; };
    return s;
}

SeedFunction make_plain_seed(std::size_t m, const GroupPartition& part) {
    if (m == 0) throw std::invalid_argument("make_plain_seed: m must be >= 1");
    auto checked = GroupPartition::from_groups(m, part.groups);

    SeedFunction s;
    s.m = m;
    s.l = 0;
    s.p = 0;
    s.prox_f = [checked](double gamma, const Vector& point) {
        return prox_group_l21(point, checked, gamma);
    };
    s.prox_g = [](double, const Vector& xi) { return xi; };
    s.eval_f = [checked](const Vector& u, const Vector&) { return group_l21_norm(u, checked); };
    s.eval_g = [](const Vector&) { return 0.0; };
    s.repair_sigma = [](const Vector&, const Vector& sg) { return sg; };
    s.init_sigma = [](const Vector&) { return Vector(); };
    return s;
}

/*=============================================================================
 * Inner solver shared by the two penalty evaluators.
 *
 * Both evaluators minimize, over the joint variable q = (w, sigma),
 *     F(q) = f(w, sigma) + g(M sigma) + quad(w),
 * where quad is a tether (rho/2)||w - u||^2 (psi, with rho ramped by
 * continuation) or a fixed weight (1/2)(w-u)^T BtB (w-u) (the envelope).
 *
 * Tether stages dualize the quadratic: with q*(z) = ||z||^2/(2 rho) + <z, u>
 * the saddle is  min_{w,sigma} max_{z,xi}  f + <z, w> - q*(z)
 *                                            + <xi, M sigma> - g*(xi),
 * and the primal-dual steps satisfy tau*s_z < 1, tau*s_xi*||M||^2 < 1 --
 * independent of rho, so late stages (rho ~ 1e8 and beyond) cost no more
 * than early ones. A gradient step on the tether instead would force
 * tau ~ 1/rho and stall the sigma block. At the fixed point z = rho*(w - u):
 * z converges to the subgradient of psi certifying the tether solution.
 *
 * The envelope weight BtB is bounded and possibly singular (its conjugate
 * would need a pseudo-inverse), so that path keeps the gradient form with
 * 1/tau - s_xi*||M||^2 >= ||BtB||/2.
 *
 * Stopping is on the norm of an exact element of the KKT inclusion at the
 * last iterate (primal block: (q - q^+)/tau + grad(w^+) - grad(w)
 *                             + K^T(dual^+ - dual), and mirrored dual rows),
 * so "residual <= tol" certifies an eps-critical primal-dual pair rather
 * than a merely slow iteration.
 *===========================================================================*/
namespace {

struct InnerState {
    Vector w, sigma, xi, z;
};

struct InnerOutcome {
    double residual = std::numeric_limits<double>::infinity();
    std::size_t iterations = 0;
    bool converged = false;
};

constexpr std::size_t kInnerMaxIters = 200000;

InnerOutcome run_stage_tether(const SeedFunction& seed, const Vector& u, double rho,
                              InnerState& st, double tol_res) {
    const std::size_t m = seed.m, l = seed.l, p = seed.p;
    const bool has_dual = p > 0;

    const double tau = 0.9;
    const double sz = 0.81 / tau;
    const double mnorm2 = std::max(seed.m_op_norm * seed.m_op_norm, 1e-12);
    const double sxi = 0.81 / (tau * mnorm2);

    InnerOutcome out;
    Vector q(m + l), mtxi;
    for (std::size_t k = 0; k < kInnerMaxIters; ++k) {
        for (std::size_t i = 0; i < m; ++i) q[i] = st.w[i] - tau * st.z[i];
        if (has_dual) {
            mtxi = seed.mul_Mt(st.xi);
            for (std::size_t i = 0; i < l; ++i) q[m + i] = st.sigma[i] - tau * mtxi[i];
        } else {
            for (std::size_t i = 0; i < l; ++i) q[m + i] = st.sigma[i];
        }
        Vector qh = seed.prox_f(tau, q);

        Vector zh(m);
        for (std::size_t i = 0; i < m; ++i) {
            double ext = 2.0 * qh[i] - st.w[i];
            zh[i] = (st.z[i] + sz * (ext - u[i])) / (1.0 + sz / rho);
        }

        Vector xih = st.xi;
        if (has_dual) {
            Vector arg(l);
            for (std::size_t i = 0; i < l; ++i) arg[i] = 2.0 * qh[m + i] - st.sigma[i];
            Vector bar = st.xi + scaled(seed.mul_M(arg), sxi);
            xih = prox_conjugate(seed.prox_g, sxi, bar);
        }

        double r2 = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            double ri = (st.w[i] - qh[i]) / tau + (zh[i] - st.z[i]);
            r2 += ri * ri;
            double rz = (st.z[i] - zh[i]) / sz + (qh[i] - st.w[i]);
            r2 += rz * rz;
        }
        if (has_dual) {
            Vector dxi(p);
            for (std::size_t i = 0; i < p; ++i) dxi[i] = xih[i] - st.xi[i];
            Vector mtd = seed.mul_Mt(dxi);
            Vector dsg(l);
            for (std::size_t i = 0; i < l; ++i) dsg[i] = qh[m + i] - st.sigma[i];
            Vector md = seed.mul_M(dsg);
            for (std::size_t i = 0; i < l; ++i) {
                double ri = (st.sigma[i] - qh[m + i]) / tau + mtd[i];
                r2 += ri * ri;
            }
            for (std::size_t i = 0; i < p; ++i) {
                double ri = -dxi[i] / sxi + md[i];
                r2 += ri * ri;
            }
        } else {
            for (std::size_t i = 0; i < l; ++i) {
                double ri = (st.sigma[i] - qh[m + i]) / tau;
                r2 += ri * ri;
            }
        }

        st.w.assign(qh.begin(), qh.begin() + static_cast<std::ptrdiff_t>(m));
        st.sigma.assign(qh.begin() + static_cast<std::ptrdiff_t>(m), qh.end());
        st.z = std::move(zh);
        st.xi = std::move(xih);
        out.iterations = k + 1;
        out.residual = std::sqrt(r2);
        if (out.residual <= tol_res) {
            out.converged = true;
            break;
        }
    }
    return out;
}

InnerOutcome run_stage_quad(const SeedFunction& seed, const Vector& u, const DenseMatrix& btb,
                            double lw, InnerState& st, double tol_res) {
    const std::size_t m = seed.m, l = seed.l, p = seed.p;
    const bool has_dual = p > 0;

    double sxi = 1.0;
    double tau;
    if (has_dual) {
        const double mnorm2 = std::max(seed.m_op_norm * seed.m_op_norm, 1e-12);
        sxi = 1.0 / mnorm2;
        tau = 0.9 / (lw / 2.0 + sxi * mnorm2);
    } else {
        tau = (lw > 0.0) ? 1.8 / lw : 1.0;
    }

    auto grad_at = [&](const Vector& w) {
        Vector d(m);
        for (std::size_t i = 0; i < m; ++i) d[i] = w[i] - u[i];
        return matvec(btb, d);
    };

    InnerOutcome out;
    Vector q(m + l), mtxi;
    for (std::size_t k = 0; k < kInnerMaxIters; ++k) {
        Vector grad = grad_at(st.w);
        for (std::size_t i = 0; i < m; ++i) q[i] = st.w[i] - tau * grad[i];
        if (has_dual) {
            mtxi = seed.mul_Mt(st.xi);
            for (std::size_t i = 0; i < l; ++i) q[m + i] = st.sigma[i] - tau * mtxi[i];
        } else {
            for (std::size_t i = 0; i < l; ++i) q[m + i] = st.sigma[i];
        }
        Vector qh = seed.prox_f(tau, q);

        Vector xih = st.xi;
        if (has_dual) {
            Vector arg(l);
            for (std::size_t i = 0; i < l; ++i) arg[i] = 2.0 * qh[m + i] - st.sigma[i];
            Vector bar = st.xi + scaled(seed.mul_M(arg), sxi);
            xih = prox_conjugate(seed.prox_g, sxi, bar);
        }

        Vector wh(qh.begin(), qh.begin() + static_cast<std::ptrdiff_t>(m));
        Vector grad_h = grad_at(wh);
        double r2 = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            double ri = (st.w[i] - qh[i]) / tau + grad_h[i] - grad[i];
            r2 += ri * ri;
        }
        if (has_dual) {
            Vector dxi(p);
            for (std::size_t i = 0; i < p; ++i) dxi[i] = xih[i] - st.xi[i];
            Vector mtd = seed.mul_Mt(dxi);
            Vector dsg(l);
            for (std::size_t i = 0; i < l; ++i) dsg[i] = qh[m + i] - st.sigma[i];
            Vector md = seed.mul_M(dsg);
            for (std::size_t i = 0; i < l; ++i) {
                double ri = (st.sigma[i] - qh[m + i]) / tau + mtd[i];
                r2 += ri * ri;
            }
            for (std::size_t i = 0; i < p; ++i) {
                double ri = -dxi[i] / sxi + md[i];
                r2 += ri * ri;
            }
        } else {
            for (std::size_t i = 0; i < l; ++i) {
                double ri = (st.sigma[i] - qh[m + i]) / tau;
                r2 += ri * ri;
            }
        }

        st.w = std::move(wh);
        st.sigma.assign(qh.begin() + static_cast<std::ptrdiff_t>(m), qh.end());
        st.xi = std::move(xih);
        out.iterations = k + 1;
        out.residual = std::sqrt(r2);
        if (out.residual <= tol_res) {
            out.converged = true;
            break;
        }
    }
    return out;
}

[[noreturn]] void throw_inner_failure(const char* where, double residual, double tol) {
    std::ostringstream os;
    os << where << ": inner iteration exceeded its budget (residual " << residual
       << ", tolerance " << tol << ")";
    throw std::runtime_error(os.str());
}

// f + g at the repaired sigma; throws rather than returning a non-finite value.
double fg_value(const SeedFunction& seed, const Vector& w, const Vector& sigma) {
    Vector repaired = seed.repair_sigma ? seed.repair_sigma(w, sigma) : sigma;
    double v = seed.eval_f(w, repaired);
    if (seed.p > 0) v += seed.eval_g(seed.mul_M(repaired));
    if (!std::isfinite(v))
        throw std::runtime_error("penalty evaluation produced a non-finite value");
    return v;
}

InnerState fresh_state(const SeedFunction& seed, const Vector& u) {
    InnerState st;
    st.w = u;
    st.sigma = seed.init_sigma ? seed.init_sigma(u) : Vector(seed.l, 0.0);
    st.xi.assign(seed.p, 0.0);
    st.z.assign(seed.m, 0.0);
    return st;
}

}  // namespace

double eval_mi_penalty(const SeedFunction& seed, const Vector& u, double tol) {
    if (u.size() != seed.m) throw std::invalid_argument("eval_mi_penalty: dimension mismatch");
    if (!(tol > 0.0)) throw std::invalid_argument("eval_mi_penalty: tol must be > 0");
    require_finite(u, "eval_mi_penalty: u");
    if (seed.l == 0) return seed.eval_f(u, Vector());

    InnerState st = fresh_state(seed, u);
    const double scale = 1.0 + nrm2(u);
    const double tol_res = 0.1 * tol * scale;

    double rho = 1.0;
    while (rho <= 1e16) {
        InnerOutcome oc = run_stage_tether(seed, u, rho, st, tol_res);
        if (!oc.converged) throw_inner_failure("eval_mi_penalty", oc.residual, tol_res);
        // -z in d(psi)(w) at the stage fixed point, so
        //   lower = [f+g](w) + <z, w - u>  <=  psi(u)  <=  [f+g](u, sigma) = upper
        // (any sigma yields an upper bound; the stage sigma tightens it as the
        // tether pulls w toward u). Stop once the bracket closes and return its
        // midpoint: the error stays at stage accuracy, whereas a rho*||w - u||^2
        // correction would amplify the w-iterate's noise by rho and can dominate
        // the value once the drift is measurement-limited.
        double lower = fg_value(seed, st.w, st.sigma) + dot(st.z, st.w - u);
        double upper = fg_value(seed, u, st.sigma);
        if (upper - lower <= 0.5 * tol * scale) return 0.5 * (lower + upper);
        rho *= 10.0;
    }
    throw std::runtime_error("eval_mi_penalty: tether continuation failed to localize");
}

double eval_gme_mi_penalty(const SeedFunction& seed, const DenseMatrix& BtB, const Vector& u,
                           double tol) {
    if (u.size() != seed.m) throw std::invalid_argument("eval_gme_mi_penalty: dimension mismatch");
    if (!(tol > 0.0)) throw std::invalid_argument("eval_gme_mi_penalty: tol must be > 0");
    if (BtB.rows != seed.m || BtB.cols != seed.m)
        throw std::invalid_argument("eval_gme_mi_penalty: BtB must be m x m");
    double asym = 0.0, amax = 0.0;
    for (std::size_t i = 0; i < BtB.rows; ++i)
        for (std::size_t j = 0; j < BtB.cols; ++j) {
            asym = std::max(asym, std::fabs(BtB(i, j) - BtB(j, i)));
            amax = std::max(amax, std::fabs(BtB(i, j)));
        }
    if (asym > 1e-10 * std::max(1.0, amax))
        throw std::invalid_argument("eval_gme_mi_penalty: BtB not symmetric");

    double psi = eval_mi_penalty(seed, u, tol);
    // B = O: the envelope infimum is inf psi = 0 (psi >= 0 with psi(0) = 0).
    if (amax == 0.0) return psi;

    InnerState st = fresh_state(seed, u);
    const double tol_res = 0.1 * tol * (1.0 + nrm2(u));
    const double lw = operator_norm(BtB, 1e-10);
    InnerOutcome oc = run_stage_quad(seed, u, BtB, lw, st, tol_res);
    if (!oc.converged) throw_inner_failure("eval_gme_mi_penalty", oc.residual, tol_res);

    Vector d = st.w - u;
    double envelope = fg_value(seed, st.w, st.sigma) + 0.5 * dot(d, matvec(BtB, d));
    return psi - envelope;
}

}  // namespace gmemi
