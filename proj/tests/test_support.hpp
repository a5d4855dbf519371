#pragma once

#include <random>

#include "papc.hpp"

namespace papc::testing {

inline Vector random_vector(std::mt19937_64& rng, Eigen::Index n, double scale = 1.0) {
    std::normal_distribution<double> nd(0.0, scale);
    Vector v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = nd(rng);
    return v;
}

/// Materializes an operator column by column.
inline Matrix dense_matrix(const LinearOperator& op) {
    const auto n = static_cast<Eigen::Index>(op.domain_dim());
    const auto m = static_cast<Eigen::Index>(op.codomain_dim());
    Matrix M(m, n);
    for (Eigen::Index j = 0; j < n; ++j) M.col(j) = op.apply(Vector::Unit(n, j));
    return M;
}

/// Worst relative adjoint residual |<Kx, y> - <x, K*y>| / (1 + |x||y|) over random pairs.
inline double adjoint_residual(const LinearOperator& op, std::size_t pairs, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    double worst = 0.0;
    for (std::size_t t = 0; t < pairs; ++t) {
        const Vector x = random_vector(rng, static_cast<Eigen::Index>(op.domain_dim()));
        const Vector y = random_vector(rng, static_cast<Eigen::Index>(op.codomain_dim()));
        const double r = std::abs(op.apply(x).dot(y) - x.dot(op.apply_adjoint(y)));
        worst = std::max(worst, r / (1.0 + x.norm() * y.norm()));
    }
    return worst;
}

}  // namespace papc::testing
