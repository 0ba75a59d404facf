#include "gmemi/prox.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace gmemi {

GroupPartition GroupPartition::singletons(std::size_t p) {
    GroupPartition part;
    part.groups.reserve(p);
    for (std::size_t i = 0; i < p; ++i) part.groups.push_back({i});
    return part;
}

GroupPartition GroupPartition::single_block(std::size_t p) {
    GroupPartition part;
    if (p > 0) {
        std::vector<std::size_t> all(p);
        std::iota(all.begin(), all.end(), std::size_t{0});
        part.groups.push_back(std::move(all));
    }
    return part;
}

GroupPartition GroupPartition::contiguous(std::size_t p, std::size_t width) {
    if (width == 0) throw std::invalid_argument("GroupPartition::contiguous: width 0");
    GroupPartition part;
    for (std::size_t start = 0; start < p; start += width) {
        std::vector<std::size_t> grp;
        for (std::size_t i = start; i < std::min(start + width, p); ++i) grp.push_back(i);
        part.groups.push_back(std::move(grp));
    }
    return part;
}

GroupPartition GroupPartition::from_groups(std::size_t p,
                                           std::vector<std::vector<std::size_t>> gs) {
    std::vector<int> seen(p, 0);
    for (const auto& grp : gs) {
        if (grp.empty()) throw std::invalid_argument("GroupPartition: empty group");
        for (std::size_t i : grp) {
            if (i >= p) throw std::invalid_argument("GroupPartition: index out of range");
            if (seen[i]++) throw std::invalid_argument("GroupPartition: overlapping groups");
        }
    }
    for (std::size_t i = 0; i < p; ++i)
        if (!seen[i]) throw std::invalid_argument("GroupPartition: index not covered");
    GroupPartition part;
    part.groups = std::move(gs);
    return part;
}

std::size_t GroupPartition::dim() const {
    std::size_t n = 0;
    for (const auto& g : groups) n += g.size();
    return n;
}

double group_l21_norm(const Vector& x, const GroupPartition& part) {
    double s = 0.0;
    for (const auto& grp : part.groups) {
        double g2 = 0.0;
        for (std::size_t i : grp) g2 += x[i] * x[i];
        s += std::sqrt(static_cast<double>(grp.size())) * std::sqrt(g2);
    }
    return s;
}

Vector prox_group_l21(const Vector& x, const GroupPartition& part, double kappa) {
    if (kappa < 0.0) throw std::invalid_argument("prox_group_l21: negative threshold");
    if (part.dim() != x.size()) throw std::invalid_argument("prox_group_l21: partition mismatch");
    Vector y = x;
    if (kappa == 0.0) return y;
    for (const auto& grp : part.groups) {
        double g2 = 0.0;
        for (std::size_t i : grp) g2 += x[i] * x[i];
        double gn = std::sqrt(g2);
        double kg = kappa * std::sqrt(static_cast<double>(grp.size()));
        double factor = 1.0 - kg / std::max(kg, gn);
        for (std::size_t i : grp) y[i] = factor * x[i];
    }
    return y;
}

double perspective_quad(double u, double s) {
    if (s > 0.0) return u * u / (2.0 * s) + s / 2.0;
    if (u == 0.0 && s == 0.0) return 0.0;
    return std::numeric_limits<double>::infinity();
}

/*=============================================================================
 * prox of gamma*h, h the perspective of the scaled square.
 *
 * Case split on the input (u, s):
 *   2*gamma*s + u^2 <= gamma^2          ->  (0, 0)
 *   u = 0, s > gamma/2                  ->  (0, s - gamma/2)
 *   otherwise                           ->  (u - gamma*t*sgn(u),
 *                                            s + gamma*(t^2 - 1)/2)
 * with t the unique positive root of
 *   t^3 + (2s/gamma + 1) t - 2|u|/gamma = 0.
 *
 * The root comes from Cardano's formula: with p = 2s/gamma + 1 and
 * discriminant D = u^2/gamma^2 + p^3/27,
 *   D >= 0: t = cbrt(|u|/gamma + sqrt(D)) + cbrt(|u|/gamma - sqrt(D))
 *   D <  0: t = 2 sqrt(-p/3) cos( arctan(gamma sqrt(-D)/|u|) / 3 )
 * followed by two guarded Newton steps to clear rounding.
 *===========================================================================*/
std::pair<double, double> prox_perspective_quad(double u, double s, double gamma) {
    if (!(gamma > 0.0)) throw std::invalid_argument("prox_perspective_quad: gamma must be > 0");
    if (2.0 * gamma * s + u * u <= gamma * gamma) return {0.0, 0.0};
    if (u == 0.0) return {0.0, s - gamma / 2.0};  // here s > gamma/2 necessarily

    const double au = std::fabs(u);
    const double p = 2.0 * s / gamma + 1.0;
    const double q = -2.0 * au / gamma;
    const double disc = (au / gamma) * (au / gamma) + p * p * p / 27.0;
    double t;
    if (disc >= 0.0) {
        double rd = std::sqrt(disc);
        t = std::cbrt(au / gamma + rd) + std::cbrt(au / gamma - rd);
    } else {
        t = 2.0 * std::sqrt(-p / 3.0) *
            std::cos(std::atan(gamma * std::sqrt(-disc) / au) / 3.0);
    }
    for (int it = 0; it < 2; ++it) {
        double df = 3.0 * t * t + p;
        if (df <= 1e-300) break;
        t -= (t * t * t + p * t + q) / df;
    }
    if (t < 0.0) t = 0.0;

    double mag = std::max(au - gamma * t, 0.0);
    double s_out = std::max(s + gamma * (t * t - 1.0) / 2.0, 0.0);
    if (s_out == 0.0) mag = 0.0;  // stay inside dom h
    return {std::copysign(mag, u), s_out};
}

Vector project_l1_ball(const Vector& x, double alpha) {
    if (alpha < 0.0) throw std::invalid_argument("project_l1_ball: negative radius");
    if (alpha == 0.0) return Vector(x.size(), 0.0);
    double l1 = nrm1(x);
    if (l1 <= alpha) return x;

    // sort-and-scan: find the largest k with |x|_(k) > (cumsum_k - alpha)/k
    Vector mag(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) mag[i] = std::fabs(x[i]);
    std::sort(mag.begin(), mag.end(), std::greater<double>());
    double cumsum = 0.0, theta = 0.0;
    for (std::size_t k = 0; k < mag.size(); ++k) {
        cumsum += mag[k];
        double cand = (cumsum - alpha) / static_cast<double>(k + 1);
        if (mag[k] > cand)
            theta = cand;
        else
            break;
    }
    Vector y(x.size());
    for (std::size_t i = 0; i < x.size(); ++i)
        y[i] = std::copysign(std::max(std::fabs(x[i]) - theta, 0.0), x[i]);
    return y;
}

std::pair<Vector, Vector> prox_tgv_coupling(const Vector& u, const Vector& s, double gamma,
                                            double alpha, const GroupPartition& g1) {
    if (!(gamma > 0.0)) throw std::invalid_argument("prox_tgv_coupling: gamma must be > 0");
    if (u.size() != s.size()) throw std::invalid_argument("prox_tgv_coupling: size mismatch");
    Vector shrunk = prox_group_l21(u - s, g1, 2.0 * gamma * alpha);
    Vector a(u.size()), b(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) {
        a[i] = (u[i] + s[i] + shrunk[i]) / 2.0;
        b[i] = (u[i] + s[i] - shrunk[i]) / 2.0;
    }
    return {std::move(a), std::move(b)};
}

Vector prox_conjugate(const ProxHandle& prox_f, double gamma, const Vector& x) {
    if (!(gamma > 0.0)) throw std::invalid_argument("prox_conjugate: gamma must be > 0");
    Vector inner = prox_f(1.0 / gamma, scaled(x, 1.0 / gamma));
    Vector y(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] - gamma * inner[i];
    return y;
}

Vector project_box(const Vector& x, double lo, double hi) {
    if (lo > hi) throw std::invalid_argument("project_box: lo > hi");
    Vector y(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = std::clamp(x[i], lo, hi);
    return y;
}

}  // namespace gmemi
