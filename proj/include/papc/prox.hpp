#pragma once

// Proximal maps used by the dual update. Every conjugate prox here follows the
// convention prox_sigma^{g*}(z) = argmin_y g*(y) + ||y - z||^2 / (2 sigma).

#include <cmath>
#include <exception>
#include <functional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "papc/errors.hpp"
#include "papc/linops.hpp"

namespace papc {

/// prox_sigma^{g_i*} for one dual block, evaluated into `out` (sized by the callee).
using ConjugateProx = std::function<void(const Vector& z, double sigma, Vector& out)>;

/// prox_c^{g}(u) = argmin_z g(z) + ||z - u||^2 / (2c).
using PrimalProx = std::function<Vector(const Vector& u, double c)>;

struct ProxableBlock {
    std::size_t block_dim = 0;
    ConjugateProx prox_conjugate;
    std::string description;
};

inline double soft_threshold(double t, double threshold) {
    if (t > threshold) return t - threshold;
    if (t < -threshold) return t + threshold;
    return 0.0;
}

inline Vector soft_threshold(const Vector& u, double threshold) {
    return u.unaryExpr([threshold](double t) { return soft_threshold(t, threshold); });
}

/// Componentwise projection onto {||y||_inf <= lambda}, i.e. clamping to [-lambda, lambda].
inline Vector project_linf_ball(const Vector& y, double lambda) {
    if (!(lambda > 0.0)) throw InvalidParameter("project_linf_ball: lambda must be positive");
    return y.cwiseMax(-lambda).cwiseMin(lambda);
}

/// Conjugate prox from the primal prox: z - sigma * prox_{1/sigma}^g(z / sigma).
inline Vector prox_conjugate_via_moreau(const PrimalProx& prox_of_g, const Vector& z, double sigma) {
    if (!(sigma > 0.0)) throw InvalidParameter("prox_conjugate_via_moreau: sigma must be positive");
    return z - sigma * prox_of_g(z / sigma, 1.0 / sigma);
}

/// Constraint |<omega, y - b>| <= q.
struct SlabConstraint {
    Vector omega;
    Vector b;
    double q = 0.0;
};

/// Euclidean projection onto the slab {y : |<omega, y - b>| <= q}.
inline Vector project_slab(const Vector& y, const Vector& omega, const Vector& b, double q) {
    if (y.size() != omega.size() || y.size() != b.size())
        throw InvalidDimension("project_slab: y, omega and b must have equal length");
    if (!(q > 0.0)) throw InvalidParameter("project_slab: q must be positive");
    const double w2 = omega.squaredNorm();
    if (!(w2 > 0.0)) throw InvalidParameter("project_slab: zero weight vector");
    const double r = omega.dot(y - b);
    if (std::abs(r) <= q) return y;
    return y - omega * ((r - std::copysign(q, r)) / w2);
}

inline Vector project_slab(const Vector& y, const SlabConstraint& slab) {
    return project_slab(y, slab.omega, slab.b, slab.q);
}

/// Dual update for one slab constraint:
/// v = y_prev + sigma*Ap, result = v - sigma * P_C(v / sigma).
inline Vector smre_dual_prox(const Vector& y_prev, const Vector& Ap, double sigma, const SlabConstraint& slab) {
    if (!(sigma > 0.0)) throw InvalidParameter("smre_dual_prox: sigma must be positive");
    if (y_prev.size() != Ap.size()) throw InvalidDimension("smre_dual_prox: y_prev and Ap lengths differ");
    const Vector v = y_prev + sigma * Ap;
    return v - sigma * project_slab(v / sigma, slab);
}

/// Dual block whose conjugate prox is the projection onto {||y||_inf <= lambda}
/// (g = lambda ||.||_1, so the projection does not depend on sigma).
inline ProxableBlock make_linf_ball_block(std::size_t dim, double lambda) {
    if (!(lambda > 0.0)) throw InvalidParameter("make_linf_ball_block: lambda must be positive");
    return {dim, [lambda](const Vector& z, double, Vector& out) { out = project_linf_ball(z, lambda); },
            "linf-ball(" + std::to_string(lambda) + ")"};
}

/// Dual block with g* = indicator of {0} (g = 0); its prox is identically zero.
inline ProxableBlock make_zero_block(std::size_t dim) {
    return {dim, [](const Vector& z, double, Vector& out) { out = Vector::Zero(z.size()); }, "zero"};
}

/// Dual block with g* = 0 (g = indicator of {0}); its prox is the identity.
inline ProxableBlock make_free_block(std::size_t dim) {
    return {dim, [](const Vector& z, double, Vector& out) { out = z; }, "free"};
}

namespace detail {

/// Runs fn(i) for i in [0, count) on up to `threads` workers; each index is handled once.
template <class Fn>
void parallel_for(std::size_t count, std::size_t threads, Fn&& fn) {
    if (threads <= 1 || count <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    const std::size_t workers = std::min(threads, count);
    std::vector<std::exception_ptr> errors(workers);
    {
        std::vector<std::jthread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w)
            pool.emplace_back([&, w] {
                try {
                    for (std::size_t i = w; i < count; i += workers) fn(i);
                } catch (...) {
                    errors[w] = std::current_exception();
                }
            });
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

}  // namespace detail

/// Applies each block's conjugate prox to its slice of the concatenated vector.
inline Vector prox_separable_product(const std::vector<ProxableBlock>& blocks, const Vector& zeta, double sigma,
                                     std::size_t threads = 1) {
    std::vector<Eigen::Index> offsets(blocks.size() + 1, 0);
    for (std::size_t i = 0; i < blocks.size(); ++i)
        offsets[i + 1] = offsets[i] + static_cast<Eigen::Index>(blocks[i].block_dim);
    if (offsets.back() != zeta.size())
        throw InvalidDimension("prox_separable_product: zeta length " + std::to_string(zeta.size()) +
                               " does not match total block dimension " + std::to_string(offsets.back()));
    Vector out(zeta.size());
    detail::parallel_for(blocks.size(), threads, [&](std::size_t i) {
        const Eigen::Index len = offsets[i + 1] - offsets[i];
        Vector slice = zeta.segment(offsets[i], len);
        Vector result;
        blocks[i].prox_conjugate(slice, sigma, result);
        if (result.size() != len) throw InvalidDimension("prox block '" + blocks[i].description + "' changed length");
        out.segment(offsets[i], len) = result;
    });
    return out;
}

}  // namespace papc
