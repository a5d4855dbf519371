#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>

#include "test_support.hpp"

using namespace papc;
using papc::testing::adjoint_residual;
using papc::testing::dense_matrix;
using papc::testing::random_vector;

namespace {

Matrix tridiag_dirichlet(Eigen::Index n) {
    Matrix T = Matrix::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        T(i, i) = 2.0;
        if (i + 1 < n) T(i, i + 1) = T(i + 1, i) = -1.0;
    }
    return T;
}

}  // namespace

TEST(Grad1d, StencilOnSmallVector) {
    Vector x(3);
    x << 1, 2, 3;
    Vector expected(3);
    expected << 1, 1, -3;
    EXPECT_EQ(grad1d_dirichlet(x), expected);
    EXPECT_EQ(grad1d_dirichlet(Vector::Zero(6)), Vector::Zero(6));
}

TEST(Grad1d, EmptyInputRejected) {
    EXPECT_THROW(grad1d_dirichlet(Vector()), InvalidDimension);
    EXPECT_THROW(div1d_dirichlet(Vector()), InvalidDimension);
}

TEST(Div1d, StencilAndConstantInput) {
    Vector y(3);
    y << 1, 1, -3;
    Vector expected(3);
    expected << 1, 0, -4;
    EXPECT_EQ(div1d_dirichlet(y), expected);

    const Vector c = Vector::Constant(5, 2.5);
    Vector e = Vector::Zero(5);
    e[0] = 2.5;
    EXPECT_EQ(div1d_dirichlet(c), e);
}

TEST(Div1d, IsNegativeTransposeOfGradMatrix) {
    const Matrix G = dense_matrix(make_grad1d_dirichlet(5));
    Matrix D(5, 5);
    for (Eigen::Index j = 0; j < 5; ++j) D.col(j) = div1d_dirichlet(Vector::Unit(5, j));
    EXPECT_LE((G.transpose() + D).norm(), 1e-15);
}

TEST(Grad1d, AdjointAgainstRandomPairs) {
    std::mt19937_64 rng(17);
    const LinearOperator op = make_grad1d_dirichlet(17);
    const Matrix G = dense_matrix(op);
    for (int t = 0; t < 20; ++t) {
        const Vector x = random_vector(rng, 17), y = random_vector(rng, 17);
        EXPECT_NEAR(op.apply(x).dot(y), x.dot(G.transpose() * y), 1e-12);
    }
    EXPECT_LE(adjoint_residual(op, 100, 3), 1e-12);
}

TEST(Grad2d, ConstantFieldHasZeroGradient) {
    const GradientField g = grad2d_neumann(Matrix::Constant(5, 5, 3.0));
    EXPECT_EQ(g.d1.norm(), 0.0);
    EXPECT_EQ(g.d2.norm(), 0.0);
}

TEST(Grad2d, RowRamp) {
    Matrix x(3, 3);
    for (int i = 0; i < 3; ++i) x.row(i).setConstant(i);
    const GradientField g = grad2d_neumann(x);
    Matrix expected1 = Matrix::Ones(3, 3);
    expected1.row(2).setZero();
    EXPECT_EQ(g.d1, expected1);
    EXPECT_EQ(g.d2, Matrix::Zero(3, 3));
}

TEST(Grad2d, SmallFieldsRejected) {
    EXPECT_THROW(grad2d_neumann(Matrix::Zero(1, 1)), InvalidDimension);
    EXPECT_THROW(div2d_neumann({Matrix::Zero(3, 3), Matrix::Zero(4, 4)}), InvalidDimension);
    EXPECT_THROW(make_grad2d_neumann(1), InvalidDimension);
}

TEST(Grad2d, AdjointAgainstDenseMatrix) {
    const LinearOperator op = make_grad2d_neumann(4);
    const Matrix G = dense_matrix(op);
    Matrix GT(16, 32);
    for (Eigen::Index j = 0; j < 32; ++j) GT.col(j) = op.apply_adjoint(Vector::Unit(32, j));
    EXPECT_LE((G.transpose() - GT).norm(), 1e-14);
    EXPECT_LE(adjoint_residual(make_grad2d_neumann(8), 100, 5), 1e-12);
    EXPECT_EQ(div2d_neumann({Matrix::Zero(4, 4), Matrix::Zero(4, 4)}), Matrix::Zero(4, 4));
}

TEST(Grad2d, DivGradIsFivePointLaplacianInInterior) {
    std::mt19937_64 rng(9);
    const Eigen::Index n = 7;
    const Vector v = random_vector(rng, n * n);
    const Matrix x = Eigen::Map<const Matrix>(v.data(), n, n);
    const Matrix lap = div2d_neumann(grad2d_neumann(x));
    for (Eigen::Index i = 1; i + 1 < n; ++i)
        for (Eigen::Index j = 1; j + 1 < n; ++j)
            EXPECT_NEAR(lap(i, j), x(i + 1, j) + x(i - 1, j) + x(i, j + 1) + x(i, j - 1) - 4.0 * x(i, j), 1e-13);
}

TEST(Convolution, IdentityKernelAndConstantPreservation) {
    std::mt19937_64 rng(1);
    const Vector v = random_vector(rng, 36);
    const Matrix x = Eigen::Map<const Matrix>(v.data(), 6, 6);
    EXPECT_EQ(convolve_psf(x, Matrix::Ones(1, 1)), x);

    const Matrix uniform = Matrix::Constant(3, 3, 1.0 / 9.0);
    const Matrix out = convolve_psf(Matrix::Constant(6, 6, 2.0), uniform);
    // Interior pixels see the full kernel; zero padding lowers the border.
    EXPECT_NEAR(out.block(1, 1, 4, 4).maxCoeff(), 2.0, 1e-14);
    EXPECT_NEAR(out.block(1, 1, 4, 4).minCoeff(), 2.0, 1e-14);
}

TEST(Convolution, KernelLargerThanImageRejected) {
    EXPECT_THROW(convolve_psf(Matrix::Zero(3, 3), Matrix::Ones(5, 5)), InvalidDimension);
    EXPECT_THROW(make_convolution(4, -Matrix::Ones(3, 3)), InvalidParameter);
}

TEST(Convolution, AdjointAgainstDenseMatrix) {
    std::mt19937_64 rng(4);
    Matrix psf(3, 3);
    for (Eigen::Index i = 0; i < 9; ++i) psf.data()[i] = std::abs(random_vector(rng, 1)[0]);
    const LinearOperator op = make_convolution(8, psf);
    const Matrix C = dense_matrix(op);
    Matrix CT(64, 64);
    for (Eigen::Index j = 0; j < 64; ++j) CT.col(j) = op.apply_adjoint(Vector::Unit(64, j));
    EXPECT_LE((C.transpose() - CT).norm(), 1e-13);
    EXPECT_LE(adjoint_residual(op, 100, 8), 1e-12);
}

TEST(Convolution, SymmetricKernelIsSelfAdjoint) {
    const LinearOperator op = make_convolution(8, gaussian_psf(5, 1.3));
    std::mt19937_64 rng(2);
    for (int t = 0; t < 20; ++t) {
        const Vector x = random_vector(rng, 64);
        EXPECT_LE((op.apply(x) - op.apply_adjoint(x)).norm(), 1e-12);
    }
}

TEST(Operators, LinearityOnRandomCombinations) {
    std::mt19937_64 rng(21);
    for (const LinearOperator& op : {make_grad1d_dirichlet(9), make_grad2d_neumann(5), make_convolution(5, gaussian_psf(3, 1.0))}) {
        const auto n = static_cast<Eigen::Index>(op.domain_dim());
        const Vector x = random_vector(rng, n), z = random_vector(rng, n);
        EXPECT_LE((op.apply(2.5 * x - 0.75 * z) - (2.5 * op.apply(x) - 0.75 * op.apply(z))).norm(), 1e-12);
    }
}

TEST(Operators, DimensionChecks) {
    const LinearOperator op = make_grad1d_dirichlet(4);
    EXPECT_THROW(op.apply(Vector::Zero(5)), InvalidDimension);
    EXPECT_THROW(op.apply_adjoint(Vector::Zero(3)), InvalidDimension);
}

TEST(PowerIteration, IdentityHasUnitNorm) {
    const PowerIterationResult r = operator_norm_sq(make_identity(5), 100, 1e-12, 3);
    EXPECT_NEAR(r.lambda, 1.0, 1e-8);
    EXPECT_FALSE(r.certified);
    EXPECT_NEAR(r.upper_bound, 1.01, 1e-8);
}

TEST(PowerIteration, ZeroOperatorReturnsZero) {
    const LinearOperator zero(4, 3, [](const Vector&, Vector& out) { out.setZero(); },
                              [](const Vector&, Vector& out) { out.setZero(); });
    const PowerIterationResult r = operator_norm_sq(zero, 10, 1e-10, 1);
    EXPECT_EQ(r.lambda, 0.0);
    EXPECT_FALSE(r.certified);
}

TEST(PowerIteration, DeterministicForSeed) {
    const LinearOperator op = make_grad2d_neumann(16);
    EXPECT_EQ(operator_norm_sq(op, 500, 1e-9, 42).lambda, operator_norm_sq(op, 500, 1e-9, 42).lambda);
}

TEST(PowerIteration, DifferenceOperatorBounds) {
    EXPECT_LE(operator_norm_sq(make_grad1d_dirichlet(256), 20000, 1e-12, 1).lambda, 4.0);
    EXPECT_LE(operator_norm_sq(make_grad2d_neumann(64), 20000, 1e-12, 1).lambda, 8.0);
}

TEST(PowerIteration, MinEigenEstimateOfGram) {
    const std::size_t n = 12;
    const PowerIterationResult r = gram_min_eig_estimate(make_grad1d_dirichlet(n), 4.0, 200000, 1e-14, 5);
    EXPECT_NEAR(r.lambda, grad1d_dirichlet_gram_eig(n, 1), 1e-8);
}

TEST(LaplacianMinEig, MatchesDenseEigensolver) {
    EXPECT_NEAR(laplacian_min_eig_1d(3), 2.0 - std::sqrt(2.0), 1e-12);
    for (Eigen::Index n : {3, 10, 100}) {
        const double dense = Eigen::SelfAdjointEigenSolver<Matrix>(tridiag_dirichlet(n)).eigenvalues().minCoeff();
        EXPECT_NEAR(laplacian_min_eig_1d(static_cast<std::size_t>(n)), dense, 1e-10) << "n=" << n;
    }
    EXPECT_THROW(laplacian_min_eig_1d(0), InvalidDimension);
}

TEST(LaplacianMinEig, DecreasesMonotonically) {
    double prev = laplacian_min_eig_1d(1);
    for (std::size_t n = 2; n < 2000; n += 37) {
        const double v = laplacian_min_eig_1d(n);
        EXPECT_LT(v, prev);
        prev = v;
    }
}

TEST(GradGramSpectrum, ClosedFormMatchesDenseEigenvalues) {
    for (std::size_t n : {1u, 3u, 10u, 64u}) {
        const Matrix G = dense_matrix(make_grad1d_dirichlet(n));
        const Vector ev = Eigen::SelfAdjointEigenSolver<Matrix>(G.transpose() * G).eigenvalues();
        for (std::size_t k = 1; k <= n; ++k) EXPECT_NEAR(grad1d_dirichlet_gram_eig(n, k), ev[static_cast<Eigen::Index>(k - 1)], 1e-11);
        const SpectralBounds sb = grad1d_dirichlet_spectrum(n);
        EXPECT_TRUE(sb.certified);
        EXPECT_LE(sb.lambda_max, 4.0);
    }
}

TEST(GradGramSpectrum, TwoDimensionalNeumannNorm) {
    const Matrix G = dense_matrix(make_grad2d_neumann(6));
    const double top = Eigen::SelfAdjointEigenSolver<Matrix>(G.transpose() * G).eigenvalues().maxCoeff();
    EXPECT_NEAR(grad2d_neumann_norm_sq(6), top, 1e-11);
}
