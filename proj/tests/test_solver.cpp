#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>

#include "test_support.hpp"

using namespace papc;
using papc::testing::dense_matrix;
using papc::testing::random_vector;

namespace {

SaddleProblem scalar_problem(double b) {
    SaddleProblem prob;
    prob.f = quadratic_fidelity(Vector::Constant(1, b));
    prob.blocks.push_back({make_zero_block(1), make_identity(1)});
    prob.spectral = {1.0, 1.0, true};
    return prob;
}

SaddleProblem tv_problem(std::size_t n, std::uint64_t seed, double lambda = 0.05) {
    return build_tv_denoise({synth_signal(SignalKind::blocks, n, 0.03, seed).noisy, lambda});
}

SolverConfig config_for(const SaddleProblem& prob, double tau, std::size_t iters, double stop_tol = 0.0) {
    SolverConfig cfg;
    cfg.tau = tau;
    cfg.sigma = default_sigma(tau, prob.spectral.lambda_max);
    cfg.max_iters = iters;
    cfg.stop_tol = stop_tol;
    return cfg;
}

double h_distance(const IterateState& a, const IterateState& b, const HMetric& m) {
    std::vector<Vector> dy;
    for (std::size_t i = 0; i < a.y.size(); ++i) dy.push_back(a.y[i] - b.y[i]);
    return h_norm(a.x - b.x, dy, m);
}

}  // namespace

TEST(ValidateParams, AcceptsAndRejects) {
    EXPECT_NO_THROW(validate_params(0.5, 1.0, 1.0, 1.0));
    EXPECT_THROW(validate_params(1.0, 1.0, 1.0, 1.0), ParameterDomainError);
    EXPECT_THROW(validate_params(0.0, 1.0, 1.0, 1.0), ParameterDomainError);
    EXPECT_THROW(validate_params(0.5, 2.5, 1.0, 1.0), ParameterDomainError);
    EXPECT_THROW(validate_params(0.5, -1.0, 1.0, 1.0), ParameterDomainError);
    EXPECT_NO_THROW(validate_params(0.3, default_sigma(0.3, 3.7), 1.0, 3.7));
    EXPECT_THROW(validate_params(0.5, 1.0, 0.0, 1.0), ParameterDomainError);
}

TEST(PapcStep, ScalarWorkedExample) {
    const SaddleProblem prob = scalar_problem(1.0);
    SolverConfig cfg;
    cfg.tau = 0.5;
    cfg.sigma = 2.0;
    const IterateState next = papc_step(zero_state(prob), prob, cfg);
    EXPECT_DOUBLE_EQ(next.p[0], 0.5);
    EXPECT_DOUBLE_EQ(next.y[0][0], 0.0);
    EXPECT_DOUBLE_EQ(next.x[0], 0.5);
    EXPECT_EQ(next.k, 1u);
}

TEST(PapcStep, RejectsMismatchedState) {
    const SaddleProblem prob = scalar_problem(1.0);
    SolverConfig cfg;
    cfg.tau = 0.5;
    cfg.sigma = 2.0;
    IterateState s = zero_state(prob);
    s.x = Vector::Zero(2);
    EXPECT_THROW(papc_step(s, prob, cfg), InvalidDimension);
    s = zero_state(prob);
    s.y.clear();
    EXPECT_THROW(papc_step(s, prob, cfg), InvalidDimension);
}

TEST(PapcStep, SolutionIsFixedPoint) {
    const SaddleProblem prob = tv_problem(32, 4);
    const SolverConfig cfg = config_for(prob, 0.5, 200000);
    const SolveResult ref = solve(prob, cfg);
    ASSERT_EQ(ref.report.stop_reason, StopReason::stagnation);
    const IterateState next = papc_step(ref.state, prob, cfg);
    const HMetric m = make_hmetric(prob, cfg.tau, cfg.sigma);
    EXPECT_LE(h_distance(next, ref.state, m), 1e-12);
}

TEST(PapcStep, SplittingBlocksMatchesStackedOperator) {
    std::mt19937_64 rng(3);
    const std::size_t n = 10;
    const Vector b = random_vector(rng, n);
    const LinearOperator g = make_grad1d_dirichlet(n), id = make_identity(n);
    const LinearOperator stacked(n, 2 * n,
                                 [g](const Vector& x, Vector& out) { out << g.apply(x), x; },
                                 [g, n](const Vector& y, Vector& out) {
                                     const auto m = static_cast<Eigen::Index>(n);
                                     out = g.apply_adjoint(y.head(m)) + y.tail(m);
                                 });
    const ProxableBlock b1 = make_linf_ball_block(n, 0.1), b2 = make_linf_ball_block(n, 0.3);
    const ProxableBlock joint{2 * n, [b1, b2](const Vector& z, double s, Vector& out) {
                                  out = prox_separable_product({b1, b2}, z, s);
                              }, "joint"};

    SaddleProblem split, single;
    split.f = single.f = quadratic_fidelity(b);
    split.blocks = {{b1, g}, {b2, id}};
    single.blocks = {{joint, stacked}};
    split.spectral = single.spectral = {0.0, 5.0, false};

    SolverConfig cfg;
    cfg.tau = 0.4;
    cfg.sigma = default_sigma(cfg.tau, 5.0);
    IterateState a = zero_state(split), c = zero_state(single);
    for (int k = 0; k < 50; ++k) {
        a = papc_step(a, split, cfg);
        c = papc_step(c, single, cfg);
    }
    EXPECT_LE((a.x - c.x).norm(), 1e-13);
    Vector ya(2 * n);
    ya << a.y[0], a.y[1];
    EXPECT_LE((ya - c.y[0]).norm(), 1e-13);
}

TEST(Solve, ConvergesToDataWithoutDualTerm) {
    const SaddleProblem prob = scalar_problem(3.0);
    const SolveResult r = solve(prob, config_for(prob, 0.5, 1000, 1e-12));
    EXPECT_NEAR(r.state.x[0], 3.0, 1e-11);
    EXPECT_EQ(r.report.stop_reason, StopReason::tolerance);
    EXPECT_TRUE(r.report.delta_certified.has_value());
}

TEST(Solve, InfiniteToleranceStopsAfterOneStep) {
    const SaddleProblem prob = tv_problem(16, 1);
    const SolveResult r = solve(prob, config_for(prob, 0.5, 100, std::numeric_limits<double>::infinity()));
    EXPECT_EQ(r.report.iterations_run, 1u);
    EXPECT_EQ(r.report.stop_reason, StopReason::tolerance);
    EXPECT_EQ(r.report.steps_H.size(), 1u);
}

TEST(Solve, ZeroBudgetReturnsInitialState) {
    const SaddleProblem prob = tv_problem(16, 1);
    const SolveResult r = solve(prob, config_for(prob, 0.5, 0));
    EXPECT_EQ(r.report.iterations_run, 0u);
    EXPECT_EQ(r.state.x, Vector::Zero(16));
    EXPECT_FALSE(r.report.estimated_rate_c.has_value());
}

TEST(Solve, ObserverSeesInitialAndEveryIterate) {
    const SaddleProblem prob = tv_problem(16, 2);
    std::vector<std::size_t> seen;
    const SolveResult r = solve(prob, config_for(prob, 0.5, 25), std::nullopt, [&](const IterateState& s) { seen.push_back(s.k); });
    ASSERT_EQ(seen.size(), r.report.iterations_run + 1);
    for (std::size_t i = 0; i < seen.size(); ++i) EXPECT_EQ(seen[i], i);
    EXPECT_EQ(r.report.trace.size(), 25u);
}

TEST(Solve, ParallelDualMatchesSequential) {
    SmreSpec spec;
    spec.b = synth_signal(SignalKind::blocks, 128, 0.02, 5).noisy;
    spec.levels = 6;
    const SmreProblem P = build_smre_1d(spec);
    SolverConfig cfg = config_for(P.saddle, 0.2, 300);
    const SolveResult seq = solve(P.saddle, cfg);
    cfg.parallel_dual = true;
    cfg.threads = 4;
    const SolveResult par = solve(P.saddle, cfg);
    EXPECT_EQ(seq.state.x, par.state.x);
    EXPECT_EQ(seq.report.steps_H, par.report.steps_H);
    EXPECT_FALSE(seq.report.delta_certified.has_value());
}

TEST(Solve, RejectsBadParameters) {
    const SaddleProblem prob = tv_problem(16, 1);
    SolverConfig cfg = config_for(prob, 0.5, 10);
    cfg.tau = 1.5;
    EXPECT_THROW(solve(prob, cfg), ParameterDomainError);
    cfg = config_for(prob, 0.5, 10);
    cfg.alpha = 1.0;
    EXPECT_THROW(solve(prob, cfg), ParameterDomainError);
}

TEST(Solve, DivergesWhenLipschitzConstantUnderstated) {
    SaddleProblem prob = scalar_problem(1.0);
    prob.f.gradient = [](const Vector& x, Vector& g) { g = 10.0 * (x - Vector::Ones(1)); };
    const SolverConfig cfg = config_for(prob, 0.5, 100000);
    try {
        solve(prob, cfg);
        FAIL() << "expected divergence";
    } catch (const DivergenceError& e) {
        EXPECT_GT(e.iteration(), 1u);
    }
}

TEST(HMetric, MatchesDenseBlockMatrix) {
    const std::size_t n = 8;
    const SaddleProblem prob = tv_problem(n, 3);
    const double tau = 0.3, sigma = default_sigma(tau, prob.spectral.lambda_max);
    const HMetric m = make_hmetric(prob, tau, sigma);
    const Matrix K = dense_matrix(prob.blocks[0].op);
    const Matrix G = Matrix::Identity(8, 8) / sigma - tau * K * K.transpose();
    std::mt19937_64 rng(4);
    for (int t = 0; t < 20; ++t) {
        const Vector x = random_vector(rng, 8), y = random_vector(rng, 8);
        const double dense = x.squaredNorm() / tau + y.dot(G * y);
        EXPECT_NEAR(h_norm(x, {y}, m), std::sqrt(dense), 1e-12 * std::sqrt(dense));
    }
}

TEST(HMetric, IndefiniteStepsRaiseMetricError) {
    const SaddleProblem prob = tv_problem(8, 3);
    const HMetric m = make_hmetric(prob, 0.5, 10.0 / (0.5 * prob.spectral.lambda_max));
    const Matrix K = dense_matrix(prob.blocks[0].op);
    Eigen::SelfAdjointEigenSolver<Matrix> es(K * K.transpose());
    const Vector top = es.eigenvectors().col(7);
    EXPECT_THROW(h_norm(Vector::Zero(8), {top}, m), MetricError);
}

TEST(DeltaBound, WorkedExampleAndMonotonicity) {
    EXPECT_DOUBLE_EQ(delta_bound(2.0, 0.5, 1.0, 1.0, 1.0, 1.0), 0.125);
    double prev = 0.0;
    for (double mu = 0.01; mu < 10.0; mu *= 1.5) {
        const double d = delta_bound(2.0, 0.5, 1.0, 1.0, mu, 1.0);
        EXPECT_GE(d, prev);
        prev = d;
    }
    EXPECT_THROW(delta_bound(1.0, 0.5, 1.0, 1.0, 1.0, 1.0), ParameterDomainError);
    EXPECT_THROW(delta_bound(2.0, 0.5, 1.0, 1.0, 1.0, 0.0), ParameterDomainError);
}

TEST(Tune, UnitConditionNumbers) {
    const TunedParameters t = tune_parameters(1.0, 1.0, 1.0, 1.0);
    EXPECT_NEAR(t.rho, 1.74464, 5e-6);
    EXPECT_NEAR(1.0 / t.rho, 0.57318, 5e-6);
    const double r = t.rho;
    EXPECT_NEAR(r * r * r - 1.5 * r * r - r + 1.0, 0.0, 1e-12);
}

TEST(Tune, BranchesCoincideAndParametersValidate) {
    for (double ka : {1.0, 4.0, 37.0, 1e3})
        for (double kf : {1.0, 10.0, 1e4}) {
            const double L = 2.5, lmax = 3.0;
            const TunedParameters t = tune_parameters(ka, kf, L, lmax);
            EXPECT_NO_THROW(validate_params(t.tau, t.sigma, L, lmax));
            EXPECT_GT(t.alpha, 1.0);
            const double first = (t.alpha - 1.0) * t.tau * t.sigma * (1.0 - t.tau * L) * (lmax / ka) / t.alpha;
            const double second = (L / kf) * t.tau * t.sigma * (lmax / ka) /
                                  (t.alpha * t.tau * L * L + t.sigma * (lmax / ka));
            EXPECT_NEAR(first, second, 1e-6 * first) << ka << " " << kf;
            EXPECT_NEAR(t.delta_m, delta_bound(t.alpha, t.tau, t.sigma, L, L / kf, lmax / ka), 1e-9 * t.delta_m);
        }
}

TEST(Tune, TunedRateBeatsNeighbouringChoices) {
    const double ka = 10.0, kf = 5.0, L = 1.0, lmax = 1.0;
    const TunedParameters t = tune_parameters(ka, kf, L, lmax);
    for (double s : {0.8, 0.9, 1.1, 1.2}) {
        const double tau = std::min(t.tau * s, 0.999 / L);
        const double sigma = default_sigma(tau, lmax);
        for (double a : {t.alpha * 0.8, t.alpha, t.alpha * 1.25})
            EXPECT_LE(delta_bound(std::max(a, 1.0001), tau, sigma, L, L / kf, lmax / ka), t.delta_m * (1.0 + 1e-9));
    }
}

TEST(Tune, WeakStrongConvexityPushesStepToInverseLipschitz) {
    const TunedParameters t = tune_parameters(1.0, 1e6, 2.0, 1.0);
    EXPECT_NEAR(t.tau * 2.0, 1.0, 2e-3);
    EXPECT_THROW(tune_parameters(0.5, 1.0, 1.0, 1.0), ParameterDomainError);
}

TEST(EstimateRate, GeometricAndDegenerateSeries) {
    std::vector<double> geo;
    for (int k = 0; k < 100; ++k) geo.push_back(std::pow(0.9, k));
    EXPECT_NEAR(*estimate_rate(geo, 50), 0.9, 1e-12);
    EXPECT_FALSE(estimate_rate(std::vector<double>(100, 1.0), 50).has_value());
    EXPECT_FALSE(estimate_rate({1.0, 0.5}, 50).has_value());
    std::vector<double> under = geo;
    under.back() = 0.0;
    EXPECT_FALSE(estimate_rate(under, 50).has_value());
    EXPECT_THROW(estimate_rate(geo, 1), InvalidParameter);
}

TEST(AposterioriBound, WorkedExample) {
    EXPECT_DOUBLE_EQ(aposteriori_bound(0.5, 1.0), 1.0);
    EXPECT_DOUBLE_EQ(aposteriori_bound(0.9, 0.0), 0.0);
    EXPECT_THROW(aposteriori_bound(1.0, 1.0), ParameterDomainError);
}

TEST(IterationBudget, WorkedExamples) {
    EXPECT_EQ(iteration_budget(0.01, 1.0, 0.25, 1.0, BudgetTarget::primal), 37u);
    EXPECT_EQ(iteration_budget(0.01, 1.0, 0.25, 200.0, BudgetTarget::primal), 0u);
    EXPECT_EQ(iteration_budget(0.01, 1.0, 0.25, 200.0, BudgetTarget::dual), 37u);
    EXPECT_THROW(iteration_budget(0.0, 1.0, 0.25, 1.0, BudgetTarget::primal), ParameterDomainError);
}

class TvConvergence : public ::testing::TestWithParam<std::uint64_t> {};

TEST_P(TvConvergence, FejerMonotoneAndQLinear) {
    const SaddleProblem prob = tv_problem(32, GetParam());
    const TunedParameters t =
        tune_parameters(prob.spectral.condition_number(), 1.0, prob.f.lipschitz_grad, prob.spectral.lambda_max);
    SolverConfig cfg = config_for(prob, t.tau, 400000);
    cfg.alpha = t.alpha;
    const SolveResult ref = solve(prob, cfg);
    ASSERT_NE(ref.report.stop_reason, StopReason::budget);

    const HMetric m = make_hmetric(prob, cfg.tau, cfg.sigma);
    cfg.max_iters = 300;
    std::vector<double> dist;
    const SolveResult run = solve(prob, cfg, std::nullopt, [&](const IterateState& s) { dist.push_back(h_distance(s, ref.state, m)); });
    const double delta = *run.report.delta_certified;
    EXPECT_NEAR(delta, t.delta_m, 1e-12);
    for (std::size_t k = 1; k < dist.size(); ++k) {
        EXPECT_LE(dist[k], dist[k - 1] * (1.0 + 1e-12)) << "k=" << k;
        EXPECT_LE(dist[k] * dist[k], dist[k - 1] * dist[k - 1] / (1.0 + delta) * (1.0 + 1e-10)) << "k=" << k;
    }
    for (std::size_t k = 1; k < run.report.steps_H.size(); ++k)
        EXPECT_LE(run.report.steps_H[k], run.report.steps_H[k - 1] * (1.0 + 1e-12)) << "k=" << k;
}

INSTANTIATE_TEST_SUITE_P(Seeds, TvConvergence, ::testing::Values(1u, 2u, 3u));

TEST(Solve, WarmStartAtSolutionStopsImmediately) {
    const SaddleProblem prob = tv_problem(24, 6);
    const SolverConfig cfg = config_for(prob, 0.5, 400000);
    const SolveResult ref = solve(prob, cfg);
    SolverConfig warm = cfg;
    warm.stop_tol = 1e-10;
    const SolveResult again = solve(prob, warm, ref.state);
    EXPECT_EQ(again.report.iterations_run, 1u);
}
