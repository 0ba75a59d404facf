#pragma once

#include <cstddef>
#include <functional>
#include <utility>
#include <vector>

#include "gmemi/linalg.hpp"

namespace gmemi {

// prox handle convention used everywhere: h(gamma, x) returns prox_{gamma*f}(x).
using ProxHandle = std::function<Vector(double, const Vector&)>;

// Disjoint index groups covering {0, ..., dim-1}. Group weights are
// sqrt(|group|), folded into every operation that takes a partition.
struct GroupPartition {
    std::vector<std::vector<std::size_t>> groups;

    static GroupPartition singletons(std::size_t p);
    static GroupPartition single_block(std::size_t p);
    // contiguous blocks of the given width; the last block keeps the remainder
    static GroupPartition contiguous(std::size_t p, std::size_t width);
    // validates that the groups cover {0..p-1} disjointly
    static GroupPartition from_groups(std::size_t p, std::vector<std::vector<std::size_t>> gs);

    std::size_t dim() const;
};

// Weighted group l2,1 norm: sum_g sqrt(|I_g|) * ||x_g||_2.
double group_l21_norm(const Vector& x, const GroupPartition& part);

// prox of kappa * weighted-l2,1: per-group shrinkage
//   x_g <- (1 - k_g / max{k_g, ||x_g||_2}) x_g,  k_g = kappa*sqrt(|I_g|).
Vector prox_group_l21(const Vector& x, const GroupPartition& part, double kappa);

// Perspective of the scaled square,
//   h(u,s) = u^2/(2s) + s/2  (s>0),  0 at (0,0),  +inf elsewhere.
double perspective_quad(double u, double s);

// prox_{gamma*h}: closed form via the unique positive root of
// t^3 + (2s/gamma+1) t - 2|u|/gamma = 0 (Cardano, Newton-polished).
std::pair<double, double> prox_perspective_quad(double u, double s, double gamma);

// Euclidean projection onto { x : ||x||_1 <= alpha }, exact sort-and-scan.
Vector project_l1_ball(const Vector& x, double alpha);

// Joint prox of f(u,s) = alpha * ||u - s||_{2,1}^{G1} through the rotation
// trick: s* = prox_{2*gamma*alpha*l21}(u - s), result ((u+s+s*)/2, (u+s-s*)/2).
std::pair<Vector, Vector> prox_tgv_coupling(const Vector& u, const Vector& s, double gamma,
                                            double alpha, const GroupPartition& g1);

// Moreau decomposition, the single path every conjugate prox goes through:
//   prox_{gamma*f*}(x) = x - gamma * prox_{f/gamma}(x/gamma).
Vector prox_conjugate(const ProxHandle& prox_f, double gamma, const Vector& x);

// Componentwise clamp onto [lo, hi]^n.
Vector project_box(const Vector& x, double lo, double hi);

}  // namespace gmemi
