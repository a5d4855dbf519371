#pragma once

// Smooth objectives f (value, gradient, gradient Lipschitz constant) and a sampled
// certificate for pointwise quadratic supportability:
//
//   phi(x) >= phi(y) + <v, x - y> + mu/2 ||x - y||^2   for all v in dphi(y), x near y.

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "papc/errors.hpp"
#include "papc/linops.hpp"

namespace papc {

struct SmoothObjective {
    std::size_t dim = 0;
    std::function<double(const Vector&)> value;
    std::function<void(const Vector&, Vector&)> gradient;
    double lipschitz_grad = 0.0;
    /// Pointwise quadratic supportability constant, when one is known analytically.
    std::optional<double> pqs_constant;
    std::string description;

    Vector grad(const Vector& x) const {
        Vector g;
        gradient(x, g);
        return g;
    }
};

/// f(x) = 1/2 ||x - b||^2; L_f = mu = 1 everywhere.
inline SmoothObjective quadratic_fidelity(Vector b) {
    if (b.size() == 0) throw InvalidDimension("quadratic_fidelity: empty data vector");
    auto data = std::make_shared<const Vector>(std::move(b));
    SmoothObjective f;
    f.dim = static_cast<std::size_t>(data->size());
    f.value = [data](const Vector& x) { return 0.5 * (x - *data).squaredNorm(); };
    f.gradient = [data](const Vector& x, Vector& g) { g = x - *data; };
    f.lipschitz_grad = 1.0;
    f.pqs_constant = 1.0;
    f.description = "quadratic_fidelity";
    return f;
}

// ---------------------------------------------------------------------------
// Huber function and its derivative (quadratic core of half-width alpha).

inline void check_huber_alpha(double alpha) {
    if (!(alpha > 0.0)) throw InvalidParameter("huber: alpha must be positive");
}

inline double huber_value(double t, double alpha) {
    check_huber_alpha(alpha);
    const double a = std::abs(t);
    return a <= alpha ? t * t / (2.0 * alpha) : a - 0.5 * alpha;
}

inline double huber_grad(double t, double alpha) {
    check_huber_alpha(alpha);
    if (std::abs(t) <= alpha) return t / alpha;
    return t > 0.0 ? 1.0 : -1.0;
}

/// Huber variant with kinked minimum: quadratic pieces shifted by eps on either side of 0,
/// linear for |t| > alpha - eps. Convex and quadratically supportable at 0, not strongly convex.
inline double modified_huber_value(double t, double alpha, double eps) {
    if (!(eps > 0.0 && eps < alpha)) throw InvalidParameter("modified_huber: requires 0 < eps < alpha");
    if (std::abs(t) > alpha - eps) return std::abs(t) + (eps - (eps * eps + alpha * alpha) / (2.0 * alpha));
    if (t >= 0.0) return ((t + eps) * (t + eps) - eps * eps) / (2.0 * alpha);
    return ((t - eps) * (t - eps) - eps * eps) / (2.0 * alpha);
}

/// Endpoints of the (convex) subdifferential of modified_huber_value at t.
inline std::vector<double> modified_huber_subgradients(double t, double alpha, double eps) {
    if (!(eps > 0.0 && eps < alpha)) throw InvalidParameter("modified_huber: requires 0 < eps < alpha");
    if (std::abs(t) > alpha - eps) return {t > 0.0 ? 1.0 : -1.0};
    if (t > 0.0) return {(t + eps) / alpha};
    if (t < 0.0) return {(t - eps) / alpha};
    return {-eps / alpha, eps / alpha};
}

/// J(x) = sum_c huber(( grad x )_c); gradient grad^T huber'(grad x); L = ||grad||^2 / alpha.
/// `grad_norm_sq` should bound ||grad||^2 from above; when absent it is estimated by
/// power iteration and inflated.
inline SmoothObjective smoothed_tv_objective(const LinearOperator& grad_op, double alpha,
                                             std::optional<double> grad_norm_sq = std::nullopt) {
    check_huber_alpha(alpha);
    const double norm_sq = grad_norm_sq ? *grad_norm_sq : operator_norm_sq(grad_op, 20000, 1e-10, 1).upper_bound;
    SmoothObjective f;
    f.dim = grad_op.domain_dim();
    f.value = [grad_op, alpha](const Vector& x) {
        const Vector d = grad_op.apply(x);
        double s = 0.0;
        for (Eigen::Index i = 0; i < d.size(); ++i) s += huber_value(d[i], alpha);
        return s;
    };
    f.gradient = [grad_op, alpha](const Vector& x, Vector& g) {
        Vector d = grad_op.apply(x);
        for (Eigen::Index i = 0; i < d.size(); ++i) d[i] = huber_grad(d[i], alpha);
        grad_op.apply_adjoint(d, g);
    };
    f.lipschitz_grad = norm_sq / alpha;
    f.description = "smoothed_tv(alpha=" + std::to_string(alpha) + ")";
    return f;
}

/// J(x) = 1/2 ||grad x||^2; gradient grad^T grad x; L = ||grad||^2.
/// `mu` is lambda_min(grad^T grad) when the caller knows it (zero-kernel gradients have none).
inline SmoothObjective dirichlet_energy(const LinearOperator& grad_op, std::optional<double> grad_norm_sq = std::nullopt,
                                        std::optional<double> mu = std::nullopt) {
    const double norm_sq = grad_norm_sq ? *grad_norm_sq : operator_norm_sq(grad_op, 20000, 1e-10, 1).upper_bound;
    if (mu && !(*mu > 0.0)) throw InvalidParameter("dirichlet_energy: mu must be positive when given");
    SmoothObjective f;
    f.dim = grad_op.domain_dim();
    f.value = [grad_op](const Vector& x) { return 0.5 * grad_op.apply(x).squaredNorm(); };
    f.gradient = [grad_op](const Vector& x, Vector& g) { grad_op.apply_adjoint(grad_op.apply(x), g); };
    f.lipschitz_grad = norm_sq;
    f.pqs_constant = mu;
    f.description = "dirichlet_energy";
    return f;
}

/// 1 - exp(-||x||^2): quadratically supportable at 0 on bounded sets but not convex.
inline SmoothObjective gaussian_well(std::size_t dim) {
    if (dim == 0) throw InvalidDimension("gaussian_well: dim must be positive");
    SmoothObjective f;
    f.dim = dim;
    f.value = [](const Vector& x) { return 1.0 - std::exp(-x.squaredNorm()); };
    f.gradient = [](const Vector& x, Vector& g) { g = 2.0 * std::exp(-x.squaredNorm()) * x; };
    f.lipschitz_grad = 2.0;
    f.description = "gaussian_well";
    return f;
}

// ---------------------------------------------------------------------------
// Pointwise quadratic supportability certificate.

/// A function together with the extreme points of its subdifferential at a point.
struct SupportableFunction {
    std::size_t dim = 0;
    std::function<double(const Vector&)> value;
    std::function<std::vector<Vector>(const Vector&)> subgradients;
};

inline SupportableFunction as_supportable(const SmoothObjective& f) {
    return {f.dim, f.value, [f](const Vector& y) { return std::vector<Vector>{f.grad(y)}; }};
}

inline SupportableFunction modified_huber_function(double alpha, double eps) {
    if (!(eps > 0.0 && eps < alpha)) throw InvalidParameter("modified_huber: requires 0 < eps < alpha");
    return {1, [alpha, eps](const Vector& x) { return modified_huber_value(x[0], alpha, eps); },
            [alpha, eps](const Vector& y) {
                std::vector<Vector> out;
                for (double v : modified_huber_subgradients(y[0], alpha, eps)) out.push_back(Vector::Constant(1, v));
                return out;
            }};
}

inline SupportableFunction huber_function(double alpha) {
    check_huber_alpha(alpha);
    return {1, [alpha](const Vector& x) { return huber_value(x[0], alpha); },
            [alpha](const Vector& y) { return std::vector<Vector>{Vector::Constant(1, huber_grad(y[0], alpha))}; }};
}

struct PqsCertificate {
    bool passed = false;
    double worst_slack = std::numeric_limits<double>::infinity();
    Vector worst_point;
    double radius = 0.0;
    double mu = 0.0;
    std::size_t samples = 0;
};

namespace detail {

inline std::vector<unsigned> first_primes(std::size_t count) {
    std::vector<unsigned> primes;
    for (unsigned c = 2; primes.size() < count; ++c) {
        bool prime = true;
        for (unsigned p : primes) {
            if (p * p > c) break;
            if (c % p == 0) {
                prime = false;
                break;
            }
        }
        if (prime) primes.push_back(c);
    }
    return primes;
}

inline double radical_inverse(std::uint64_t i, unsigned base) {
    double inv = 1.0 / base, f = inv, r = 0.0;
    while (i > 0) {
        r += f * static_cast<double>(i % base);
        i /= base;
        f *= inv;
    }
    return r;
}

inline double unit_uniform(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

}  // namespace detail

/// Samples `samples` points in the radius-ball around y and returns the smallest slack of
/// the supportability inequality over all of them and all subgradient extreme points.
///
/// Directions come from a Halton sequence (rotated by the seed) pushed through Box-Muller;
/// radii are uniform on [0, radius]. In one dimension the directions alternate in sign.
inline PqsCertificate pqs_certificate(const SupportableFunction& phi, const Vector& y, double radius, double mu,
                                      std::size_t samples, std::uint64_t seed) {
    if (static_cast<std::size_t>(y.size()) != phi.dim) throw InvalidDimension("pqs_certificate: point dimension mismatch");
    if (!(radius > 0.0)) throw InvalidParameter("pqs_certificate: radius must be positive");
    if (!(mu > 0.0)) throw InvalidParameter("pqs_certificate: mu must be positive");
    if (samples < 1) throw InvalidParameter("pqs_certificate: samples must be at least 1");

    const std::size_t d = phi.dim;
    const double fy = phi.value(y);
    const std::vector<Vector> subgrads = phi.subgradients(y);

    std::mt19937_64 rng(seed);
    const std::size_t halton_dims = d + (d % 2);
    const std::vector<unsigned> primes = detail::first_primes(halton_dims);
    std::vector<double> shift(halton_dims);
    for (double& s : shift) s = detail::unit_uniform(rng);

    PqsCertificate cert;
    cert.radius = radius;
    cert.mu = mu;
    cert.samples = samples;
    Vector dir(static_cast<Eigen::Index>(d));
    for (std::size_t s = 0; s < samples; ++s) {
        if (d == 1) {
            dir[0] = (s % 2 == 0) ? 1.0 : -1.0;
        } else {
            for (std::size_t k = 0; k + 1 < halton_dims; k += 2) {
                double u1 = std::fmod(detail::radical_inverse(s + 1, primes[k]) + shift[k], 1.0);
                double u2 = std::fmod(detail::radical_inverse(s + 1, primes[k + 1]) + shift[k + 1], 1.0);
                u1 = std::max(u1, 1e-300);
                const double rad = std::sqrt(-2.0 * std::log(u1));
                const double ang = 2.0 * std::numbers::pi * u2;
                dir[static_cast<Eigen::Index>(k)] = rad * std::cos(ang);
                if (k + 1 < d) dir[static_cast<Eigen::Index>(k + 1)] = rad * std::sin(ang);
            }
            const double nrm = dir.norm();
            if (nrm == 0.0) continue;
            dir /= nrm;
        }
        const double r = radius * detail::unit_uniform(rng);
        const Vector x = y + r * dir;
        const double fx = phi.value(x);
        for (const Vector& v : subgrads) {
            const double slack = fx - fy - v.dot(x - y) - 0.5 * mu * r * r;
            if (slack < cert.worst_slack) {
                cert.worst_slack = slack;
                cert.worst_point = x;
            }
        }
    }
    cert.passed = cert.worst_slack >= -1e-12;
    return cert;
}

inline PqsCertificate pqs_certificate(const SmoothObjective& phi, const Vector& y, double radius, double mu,
                                      std::size_t samples, std::uint64_t seed) {
    return pqs_certificate(as_supportable(phi), y, radius, mu, samples, seed);
}

/// Constant obtained by extending a local certificate (mu on a ball of radius `local_radius`)
/// to a ball of radius R around the same point: mu * local_radius^2 / (4 R^2).
inline double pqs_extend_constant(double mu, double local_radius, double R) {
    if (!(mu > 0.0 && local_radius > 0.0 && R > 0.0)) throw InvalidParameter("pqs_extend_constant: inputs must be positive");
    if (R <= local_radius) return mu;
    return mu * local_radius * local_radius / (4.0 * R * R);
}

}  // namespace papc
