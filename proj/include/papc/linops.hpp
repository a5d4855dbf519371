#pragma once

// Matrix-free linear operators: finite differences, PSF convolution and
// spectral estimates for the Gram operator of a mapping.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <numbers>
#include <random>
#include <string>
#include <utility>

#include <Eigen/Dense>

#include "papc/errors.hpp"

namespace papc {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Bounds on the spectrum of a Gram operator K^T K (or of the stacked dual operator).
struct SpectralBounds {
    double lambda_min = 0.0;
    double lambda_max = 0.0;
    /// true when both values come from a closed form rather than an iterative estimate
    bool certified = false;

    double condition_number() const {
        return lambda_min > 0.0 ? lambda_max / lambda_min : std::numeric_limits<double>::infinity();
    }
};

/// Immutable, shareable handle on a linear map R^domain -> R^codomain.
///
/// Copies share the same implementation; `same_as` exposes that identity so the
/// solver can reuse K p across dual blocks built from one operator.
class LinearOperator {
public:
    using Kernel = std::function<void(const Vector&, Vector&)>;

    LinearOperator() = default;

    LinearOperator(std::size_t domain_dim, std::size_t codomain_dim, Kernel apply, Kernel apply_adjoint,
                   std::string name = "operator")
        : impl_(std::make_shared<const Impl>(
              Impl{domain_dim, codomain_dim, std::move(apply), std::move(apply_adjoint), std::move(name)})) {
        if (domain_dim == 0 || codomain_dim == 0) throw InvalidDimension("linear operator with empty domain or codomain");
    }

    std::size_t domain_dim() const { return impl_->domain_dim; }
    std::size_t codomain_dim() const { return impl_->codomain_dim; }
    const std::string& name() const { return impl_->name; }
    bool valid() const { return static_cast<bool>(impl_); }
    bool same_as(const LinearOperator& other) const { return impl_ == other.impl_; }

    void apply(const Vector& x, Vector& out) const {
        if (static_cast<std::size_t>(x.size()) != impl_->domain_dim)
            throw InvalidDimension(impl_->name + ": apply expects length " + std::to_string(impl_->domain_dim) +
                                   ", got " + std::to_string(x.size()));
        out.resize(static_cast<Eigen::Index>(impl_->codomain_dim));
        impl_->apply(x, out);
    }

    void apply_adjoint(const Vector& y, Vector& out) const {
        if (static_cast<std::size_t>(y.size()) != impl_->codomain_dim)
            throw InvalidDimension(impl_->name + ": adjoint expects length " + std::to_string(impl_->codomain_dim) +
                                   ", got " + std::to_string(y.size()));
        out.resize(static_cast<Eigen::Index>(impl_->domain_dim));
        impl_->apply_adjoint(y, out);
    }

    Vector apply(const Vector& x) const {
        Vector out;
        apply(x, out);
        return out;
    }

    Vector apply_adjoint(const Vector& y) const {
        Vector out;
        apply_adjoint(y, out);
        return out;
    }

private:
    struct Impl {
        std::size_t domain_dim;
        std::size_t codomain_dim;
        Kernel apply;
        Kernel apply_adjoint;
        std::string name;
    };
    std::shared_ptr<const Impl> impl_;
};

// ---------------------------------------------------------------------------
// 1D differences with the Dirichlet closure (d x)_n = -x_n.

inline Vector grad1d_dirichlet(const Vector& x) {
    const Eigen::Index n = x.size();
    if (n < 1) throw InvalidDimension("grad1d_dirichlet: empty input");
    Vector d(n);
    for (Eigen::Index i = 0; i + 1 < n; ++i) d[i] = x[i + 1] - x[i];
    d[n - 1] = -x[n - 1];
    return d;
}

/// Divergence paired with grad1d_dirichlet: div = -grad^T.
inline Vector div1d_dirichlet(const Vector& y) {
    const Eigen::Index n = y.size();
    if (n < 1) throw InvalidDimension("div1d_dirichlet: empty input");
    Vector out(n);
    out[0] = y[0];
    for (Eigen::Index i = 1; i < n; ++i) out[i] = y[i] - y[i - 1];
    return out;
}

inline LinearOperator make_identity(std::size_t n) {
    return LinearOperator(
        n, n, [](const Vector& x, Vector& out) { out = x; }, [](const Vector& y, Vector& out) { out = y; },
        "identity");
}

inline LinearOperator make_grad1d_dirichlet(std::size_t n) {
    return LinearOperator(
        n, n, [](const Vector& x, Vector& out) { out = grad1d_dirichlet(x); },
        [](const Vector& y, Vector& out) { out = -div1d_dirichlet(y); }, "grad1d_dirichlet");
}

/// Smallest eigenvalue of the n x n Dirichlet negative Laplacian tridiag(-1, 2, -1).
inline double laplacian_min_eig_1d(std::size_t n) {
    if (n == 0) throw InvalidDimension("laplacian_min_eig_1d: n must be positive");
    const double s = std::sin(std::numbers::pi / (2.0 * static_cast<double>(n) + 2.0));
    return 4.0 * s * s;
}

/// k-th eigenvalue (1-based, ascending) of grad1d^T grad1d.
///
/// The forward stencil closes with -x_n on the right and has no left closure, so its
/// Gram matrix is tridiag(-1, 2, -1) with a 1 in the top-left corner: a mixed
/// Neumann/Dirichlet Laplacian with eigenvalues 4 sin^2((2k-1) pi / (4n+2)).
inline double grad1d_dirichlet_gram_eig(std::size_t n, std::size_t k) {
    if (n == 0) throw InvalidDimension("grad1d_dirichlet_gram_eig: n must be positive");
    if (k < 1 || k > n) throw InvalidParameter("grad1d_dirichlet_gram_eig: index out of range");
    const double s = std::sin((2.0 * static_cast<double>(k) - 1.0) * std::numbers::pi /
                              (4.0 * static_cast<double>(n) + 2.0));
    return 4.0 * s * s;
}

inline SpectralBounds grad1d_dirichlet_spectrum(std::size_t n) {
    return {grad1d_dirichlet_gram_eig(n, 1), grad1d_dirichlet_gram_eig(n, n), true};
}

// ---------------------------------------------------------------------------
// 2D forward differences with Neumann closure (zero in the last row / column).

struct GradientField {
    Matrix d1;  // differences along rows (index i)
    Matrix d2;  // differences along columns (index j)
};

inline GradientField grad2d_neumann(const Matrix& x) {
    const Eigen::Index n = x.rows();
    if (n < 2 || x.cols() != n) throw InvalidDimension("grad2d_neumann: expects an n x n field with n >= 2");
    GradientField g{Matrix::Zero(n, n), Matrix::Zero(n, n)};
    g.d1.topRows(n - 1) = x.bottomRows(n - 1) - x.topRows(n - 1);
    g.d2.leftCols(n - 1) = x.rightCols(n - 1) - x.leftCols(n - 1);
    return g;
}

/// Satisfies <grad2d_neumann(x), y> = -<x, div2d_neumann(y)>.
inline Matrix div2d_neumann(const GradientField& y) {
    const Eigen::Index n = y.d1.rows();
    if (n < 2 || y.d1.cols() != n || y.d2.rows() != n || y.d2.cols() != n)
        throw InvalidDimension("div2d_neumann: components must be n x n fields of equal size, n >= 2");
    Matrix out = Matrix::Zero(n, n);
    out.topRows(n - 1) += y.d1.topRows(n - 1);
    out.bottomRows(n - 1) -= y.d1.topRows(n - 1);
    out.leftCols(n - 1) += y.d2.leftCols(n - 1);
    out.rightCols(n - 1) -= y.d2.leftCols(n - 1);
    return out;
}

/// Flat form R^{n*n} -> R^{2*n*n}; fields are column-major, component 1 first.
inline LinearOperator make_grad2d_neumann(std::size_t n) {
    if (n < 2) throw InvalidDimension("make_grad2d_neumann: n must be at least 2");
    const auto ni = static_cast<Eigen::Index>(n);
    const auto nn = ni * ni;
    return LinearOperator(
        n * n, 2 * n * n,
        [ni, nn](const Vector& x, Vector& out) {
            const GradientField g = grad2d_neumann(Eigen::Map<const Matrix>(x.data(), ni, ni));
            out.head(nn) = Eigen::Map<const Vector>(g.d1.data(), nn);
            out.tail(nn) = Eigen::Map<const Vector>(g.d2.data(), nn);
        },
        [ni, nn](const Vector& y, Vector& out) {
            GradientField g{Eigen::Map<const Matrix>(y.data(), ni, ni), Eigen::Map<const Matrix>(y.data() + nn, ni, ni)};
            const Matrix d = div2d_neumann(g);
            out = -Eigen::Map<const Vector>(d.data(), nn);
        },
        "grad2d_neumann");
}

/// ||grad2d_neumann||^2 = 8 cos^2(pi / 2n), the top of the 2D Neumann Laplacian spectrum.
inline double grad2d_neumann_norm_sq(std::size_t n) {
    if (n < 2) throw InvalidDimension("grad2d_neumann_norm_sq: n must be at least 2");
    const double c = std::cos(std::numbers::pi / (2.0 * static_cast<double>(n)));
    return 8.0 * c * c;
}

// ---------------------------------------------------------------------------
// Zero-padded "same" convolution with a k x k point spread function.

inline void check_psf(const Matrix& psf, Eigen::Index n) {
    if (psf.rows() == 0 || psf.rows() != psf.cols()) throw InvalidDimension("psf must be a non-empty square kernel");
    if (psf.rows() > n) throw InvalidDimension("psf kernel larger than the image");
    if ((psf.array() < 0.0).any() || !psf.allFinite()) throw InvalidParameter("psf entries must be finite and nonnegative");
}

inline Matrix convolve_psf(const Matrix& x, const Matrix& psf) {
    const Eigen::Index n = x.rows();
    if (x.cols() != n) throw InvalidDimension("convolve_psf: image must be square");
    check_psf(psf, n);
    const Eigen::Index k = psf.rows();
    const Eigen::Index c = k / 2;
    Matrix out = Matrix::Zero(n, n);
    for (Eigen::Index j = 0; j < n; ++j)
        for (Eigen::Index i = 0; i < n; ++i) {
            double acc = 0.0;
            for (Eigen::Index b = 0; b < k; ++b) {
                const Eigen::Index sj = j - (b - c);
                if (sj < 0 || sj >= n) continue;
                for (Eigen::Index a = 0; a < k; ++a) {
                    const Eigen::Index si = i - (a - c);
                    if (si < 0 || si >= n) continue;
                    acc += psf(a, b) * x(si, sj);
                }
            }
            out(i, j) = acc;
        }
    return out;
}

/// Adjoint of convolve_psf: correlation with the same kernel (convolution with its flip).
inline Matrix correlate_psf(const Matrix& y, const Matrix& psf) {
    const Eigen::Index n = y.rows();
    if (y.cols() != n) throw InvalidDimension("correlate_psf: image must be square");
    check_psf(psf, n);
    const Eigen::Index k = psf.rows();
    const Eigen::Index c = k / 2;
    Matrix out = Matrix::Zero(n, n);
    for (Eigen::Index j = 0; j < n; ++j)
        for (Eigen::Index i = 0; i < n; ++i) {
            double acc = 0.0;
            for (Eigen::Index b = 0; b < k; ++b) {
                const Eigen::Index sj = j + (b - c);
                if (sj < 0 || sj >= n) continue;
                for (Eigen::Index a = 0; a < k; ++a) {
                    const Eigen::Index si = i + (a - c);
                    if (si < 0 || si >= n) continue;
                    acc += psf(a, b) * y(si, sj);
                }
            }
            out(i, j) = acc;
        }
    return out;
}

inline LinearOperator make_convolution(std::size_t n, Matrix psf) {
    const auto ni = static_cast<Eigen::Index>(n);
    check_psf(psf, ni);
    auto kernel = std::make_shared<const Matrix>(std::move(psf));
    return LinearOperator(
        n * n, n * n,
        [ni, kernel](const Vector& x, Vector& out) {
            const Matrix r = convolve_psf(Eigen::Map<const Matrix>(x.data(), ni, ni), *kernel);
            out = Eigen::Map<const Vector>(r.data(), ni * ni);
        },
        [ni, kernel](const Vector& y, Vector& out) {
            const Matrix r = correlate_psf(Eigen::Map<const Matrix>(y.data(), ni, ni), *kernel);
            out = Eigen::Map<const Vector>(r.data(), ni * ni);
        },
        "convolution");
}

// ---------------------------------------------------------------------------
// Spectral estimation.

struct PowerIterationResult {
    double lambda = 0.0;       // Rayleigh quotient at termination (a lower estimate)
    double upper_bound = 0.0;  // lambda inflated by 1%, for step-size rules
    bool certified = false;    // power iteration never certifies
    bool converged = false;
    std::size_t iterations = 0;
};

namespace detail {

inline Vector seeded_uniform(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    Vector v(static_cast<Eigen::Index>(n));
    for (Eigen::Index i = 0; i < v.size(); ++i)
        v[i] = static_cast<double>(rng() >> 11) * 0x1.0p-53 * 2.0 - 1.0;
    return v;
}

template <class GramApply>
PowerIterationResult power_iterate(std::size_t dim, GramApply&& gram, std::size_t max_iters, double tol,
                                   std::uint64_t seed) {
    if (max_iters < 1) throw InvalidParameter("power iteration needs max_iters >= 1");
    PowerIterationResult r;
    Vector v = seeded_uniform(dim, seed);
    v.normalize();
    Vector w;
    double prev = 0.0;
    for (std::size_t it = 1; it <= max_iters; ++it) {
        gram(v, w);
        const double lambda = v.dot(w);
        const double wn = w.norm();
        r.iterations = it;
        r.lambda = lambda;
        if (wn == 0.0) {
            r.lambda = 0.0;
            r.converged = true;
            break;
        }
        if (it > 1 && std::abs(lambda - prev) <= tol * std::abs(lambda)) {
            r.converged = true;
            break;
        }
        prev = lambda;
        v = w / wn;
    }
    r.lambda = std::max(r.lambda, 0.0);
    r.upper_bound = 1.01 * r.lambda;
    return r;
}

}  // namespace detail

/// Power-iteration estimate of lambda_max(op^T op), deterministic for a fixed seed.
inline PowerIterationResult operator_norm_sq(const LinearOperator& op, std::size_t max_iters, double tol,
                                             std::uint64_t seed) {
    if (!op.valid()) throw InvalidParameter("operator_norm_sq: empty operator handle");
    Vector tmp;
    return detail::power_iterate(
        op.domain_dim(),
        [&](const Vector& v, Vector& w) {
            op.apply(v, tmp);
            op.apply_adjoint(tmp, w);
        },
        max_iters, tol, seed);
}

/// Non-certified estimate of lambda_min(op^T op) by power iteration on shift*I - op^T op.
/// `shift` must bound lambda_max from above.
inline PowerIterationResult gram_min_eig_estimate(const LinearOperator& op, double shift, std::size_t max_iters,
                                                  double tol, std::uint64_t seed) {
    if (!op.valid()) throw InvalidParameter("gram_min_eig_estimate: empty operator handle");
    if (!(shift > 0.0)) throw InvalidParameter("gram_min_eig_estimate: shift must be positive");
    Vector tmp;
    PowerIterationResult r = detail::power_iterate(
        op.domain_dim(),
        [&](const Vector& v, Vector& w) {
            op.apply(v, tmp);
            op.apply_adjoint(tmp, w);
            w = shift * v - w;
        },
        max_iters, tol, seed);
    r.lambda = std::max(shift - r.lambda, 0.0);
    r.upper_bound = r.lambda;
    return r;
}

}  // namespace papc
