#pragma once

// Proximal alternating predictor-corrector iteration for
//
//   min_x max_y  f(x) + <x, A y> - sum_i g_i*(y_i),     A y = sum_i K_i^T y_i,
//
// together with the weighted H-norm, rate certificate, step-size tuning and the
// a posteriori error bound built on an observed contraction factor.
//
// Each dual block stores K_i : primal -> dual block (the transpose of the column
// block of A), so the dual update reads y_i <- prox_sigma^{g_i*}(y_i + sigma K_i p).

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "papc/errors.hpp"
#include "papc/functions.hpp"
#include "papc/linops.hpp"
#include "papc/prox.hpp"

namespace papc {

struct DualBlock {
    ProxableBlock prox;
    LinearOperator op;  // K_i : R^n -> R^{m_i}
};

struct SaddleProblem {
    SmoothObjective f;
    std::vector<DualBlock> blocks;
    /// Spectrum of A^T A on the stacked dual space.
    SpectralBounds spectral;
    /// Optional feasibility measure reported in traces.
    std::function<double(const Vector&)> max_violation;

    std::size_t primal_dim() const { return f.dim; }

    std::size_t dual_dim() const {
        std::size_t m = 0;
        for (const auto& b : blocks) m += b.prox.block_dim;
        return m;
    }

    void validate() const {
        if (f.dim == 0 || !f.value || !f.gradient) throw InvalidDimension("saddle problem: objective not set");
        if (blocks.empty()) throw InvalidDimension("saddle problem: no dual blocks");
        for (const auto& b : blocks) {
            if (!b.op.valid() || !b.prox.prox_conjugate) throw InvalidDimension("saddle problem: incomplete dual block");
            if (b.op.domain_dim() != f.dim)
                throw InvalidDimension("saddle problem: block operator '" + b.op.name() + "' has domain " +
                                       std::to_string(b.op.domain_dim()) + ", expected " + std::to_string(f.dim));
            if (b.op.codomain_dim() != b.prox.block_dim)
                throw InvalidDimension("saddle problem: block '" + b.prox.description + "' dimension mismatch");
        }
        if (!(spectral.lambda_max > 0.0)) throw InvalidParameter("saddle problem: lambda_max must be positive");
        if (spectral.lambda_min < 0.0 || spectral.lambda_min > spectral.lambda_max)
            throw InvalidParameter("saddle problem: inconsistent spectral bounds");
    }
};

struct SolverConfig {
    double tau = 0.0;
    double sigma = 0.0;
    /// free parameter of the rate certificate, any value > 1
    double alpha = 2.0;
    std::size_t max_iters = 1000;
    double stop_tol = 1e-8;
    bool record_trace = true;
    bool parallel_dual = false;
    std::size_t threads = 1;
    std::uint64_t seed = 0;
    std::size_t rate_window = 50;
    double burn_in_fraction = 0.1;
};

struct IterateState {
    Vector x;
    Vector p;
    std::vector<Vector> y;
    std::size_t k = 0;
};

struct TraceRecord {
    std::size_t iter = 0;
    double step_H = 0.0;
    double primal_step = 0.0;
    double dual_step = 0.0;
    double objective = 0.0;
    double max_violation = 0.0;
};

enum class StopReason { tolerance, budget, stagnation };

inline const char* to_string(StopReason r) {
    switch (r) {
        case StopReason::tolerance: return "tolerance";
        case StopReason::budget: return "budget";
        case StopReason::stagnation: return "stagnation";
    }
    return "unknown";
}

struct ConvergenceReport {
    std::vector<double> steps_H;
    std::optional<double> estimated_rate_c;
    std::optional<double> delta_certified;
    std::optional<double> aposteriori_bound;
    std::size_t iterations_run = 0;
    StopReason stop_reason = StopReason::budget;
    std::vector<TraceRecord> trace;
};

// ---------------------------------------------------------------------------
// Parameters.

struct ValidatedParams {
    double tau;
    double sigma;
};

/// Checks tau in (0, 1/L_f) and 0 < tau*sigma <= 1/lambda_max. The second inequality
/// admits a relative round-off of 1e-12 so that sigma = 1/(tau*lambda_max) passes.
inline ValidatedParams validate_params(double tau, double sigma, double L_f, double lambda_max) {
    if (!(L_f > 0.0)) throw ParameterDomainError("validate_params: L_f must be positive");
    if (!(lambda_max > 0.0)) throw ParameterDomainError("validate_params: lambda_max must be positive");
    if (!(tau > 0.0) || !(tau * L_f < 1.0))
        throw ParameterDomainError("step size violates tau in (0, 1/L_f): tau=" + std::to_string(tau) +
                                   ", 1/L_f=" + std::to_string(1.0 / L_f));
    if (!(sigma > 0.0) || !(tau * sigma * lambda_max <= 1.0 + 1e-12))
        throw ParameterDomainError("step sizes violate 0 < tau*sigma <= 1/||A^T A||: tau*sigma=" +
                                   std::to_string(tau * sigma) + ", bound=" + std::to_string(1.0 / lambda_max));
    return {tau, sigma};
}

/// sigma = 1 / (tau * lambda_max).
inline double default_sigma(double tau, double lambda_max) {
    if (!(tau > 0.0 && lambda_max > 0.0)) throw ParameterDomainError("default_sigma: tau and lambda_max must be positive");
    return 1.0 / (tau * lambda_max);
}

/// Q-linear rate constant: ||u^k - u*||_H^2 <= ||u^{k-1} - u*||_H^2 / (1 + delta).
inline double delta_bound(double alpha, double tau, double sigma, double L_f, double mu, double lambda_min) {
    if (!(alpha > 1.0)) throw ParameterDomainError("delta_bound: alpha must exceed 1");
    if (!(tau > 0.0) || !(tau * L_f < 1.0) || !(L_f > 0.0)) throw ParameterDomainError("delta_bound: tau not in (0, 1/L_f)");
    if (!(sigma > 0.0)) throw ParameterDomainError("delta_bound: sigma must be positive");
    if (!(mu > 0.0)) throw ParameterDomainError("delta_bound: mu must be positive");
    if (!(lambda_min > 0.0)) throw ParameterDomainError("delta_bound: lambda_min must be positive");
    const double ts = tau * sigma;
    const double first = (alpha - 1.0) * ts * (1.0 - tau * L_f) * lambda_min / alpha;
    const double second = mu * ts * lambda_min / (alpha * tau * L_f * L_f + sigma * lambda_min);
    return std::min(first, second);
}

struct TunedParameters {
    double tau;
    double sigma;
    double alpha;
    double rho;
    double delta_m;
};

/// Maximizes the certified rate over tau (with sigma = 1/(tau lambda_max)) and alpha.
/// rho = sqrt(kappa_A alpha) is the root above sqrt(kappa_A) of
///   rho^3 - (1 + kappa_A/(2 kappa_f)) rho^2 - kappa_A rho + kappa_A = 0,
/// where the two branches of delta_m coincide.
inline TunedParameters tune_parameters(double kappa_A, double kappa_f, double L_f, double lambda_max) {
    if (!(kappa_A >= 1.0) || !(kappa_f >= 1.0)) throw ParameterDomainError("tune_parameters: condition numbers must be >= 1");
    if (!(L_f > 0.0) || !(lambda_max > 0.0)) throw ParameterDomainError("tune_parameters: L_f and lambda_max must be positive");
    const double c2 = 1.0 + kappa_A / (2.0 * kappa_f);
    const auto cubic = [&](double r) { return ((r - c2) * r - kappa_A) * r + kappa_A; };

    double lo = std::sqrt(kappa_A);
    double hi = 2.0 * lo;
    int expansions = 0;
    while (!(cubic(hi) > 0.0)) {
        if (++expansions > 200 || !std::isfinite(hi)) throw TuningFailure("tune_parameters: no sign change in the cubic");
        lo = hi;
        hi *= 2.0;
    }
    for (int it = 0; it < 400 && hi - lo > 4.0 * std::numeric_limits<double>::epsilon() * hi; ++it) {
        const double mid = 0.5 * (lo + hi);
        (cubic(mid) > 0.0 ? hi : lo) = mid;
    }
    const double rho = 0.5 * (lo + hi);

    TunedParameters t;
    t.rho = rho;
    t.tau = 1.0 / (rho * L_f);
    t.sigma = 1.0 / (t.tau * lambda_max);
    t.alpha = rho * rho / kappa_A;
    const double first = (rho * rho - kappa_A) * (1.0 - 1.0 / rho) / (rho * rho * kappa_A);
    const double second = 1.0 / (2.0 * rho * kappa_f);
    t.delta_m = std::min(first, second);
    return t;
}

/// Geometric mean of consecutive step ratios over the trailing `window` entries.
/// Empty when the series is too short, a step underflows, or any ratio reaches 1.
inline std::optional<double> estimate_rate(const std::vector<double>& steps, std::size_t window) {
    if (window < 2) throw InvalidParameter("estimate_rate: window must be at least 2");
    if (steps.size() < window) return std::nullopt;
    const std::size_t first = steps.size() - window;
    double log_sum = 0.0;
    for (std::size_t i = first; i + 1 < steps.size(); ++i) {
        const double a = steps[i], b = steps[i + 1];
        if (!(a >= std::numeric_limits<double>::min()) || !(b >= std::numeric_limits<double>::min())) return std::nullopt;
        if (!std::isfinite(a) || !std::isfinite(b)) return std::nullopt;
        const double r = b / a;
        if (r >= 1.0) return std::nullopt;
        log_sum += std::log(r);
    }
    return std::exp(log_sum / static_cast<double>(window - 1));
}

/// ||u^k - u*||_H <= c/(1-c) * ||u^k - u^{k-1}||_H for a contraction factor c of the steps.
inline double aposteriori_bound(double c, double last_step_H) {
    if (!(c > 0.0 && c < 1.0)) throw ParameterDomainError("aposteriori_bound: c must lie in (0, 1)");
    if (!(last_step_H >= 0.0)) throw ParameterDomainError("aposteriori_bound: step must be nonnegative");
    return c * last_step_H / (1.0 - c);
}

enum class BudgetTarget { primal, dual };

/// Iterations sufficient for ||x^k - x*|| <= eps (primal) or ||y^k - y*||_G <= eps (dual):
/// ceil(2 ln(C / (L_f eps)) / delta), resp. ceil(2 ln(C / eps) / delta). Natural logarithm.
inline std::size_t iteration_budget(double eps, double C, double delta, double L_f, BudgetTarget target) {
    if (!(eps > 0.0 && C > 0.0 && delta > 0.0 && L_f > 0.0))
        throw ParameterDomainError("iteration_budget: all inputs must be positive");
    const double ratio = target == BudgetTarget::primal ? C / (L_f * eps) : C / eps;
    const double lg = std::log(ratio);
    if (lg <= 0.0) return 0;
    return static_cast<std::size_t>(std::ceil(2.0 * lg / delta));
}

// ---------------------------------------------------------------------------
// H-metric.

/// ||u||_H^2 = ||x||^2 / tau + ||y||_G^2,  G = I/sigma - tau A^T A.
struct HMetric {
    double tau = 0.0;
    double sigma = 0.0;
    /// y -> A y = sum_i K_i^T y_i
    std::function<void(const std::vector<Vector>&, Vector&)> dual_to_primal;
};

inline double g_seminorm_sq(const std::vector<Vector>& y, const HMetric& m) {
    double ysq = 0.0;
    for (const auto& yi : y) ysq += yi.squaredNorm();
    if (ysq == 0.0) return 0.0;
    Vector Ay;
    m.dual_to_primal(y, Ay);
    const double scaled = ysq / m.sigma;
    const double q = scaled - m.tau * Ay.squaredNorm();
    if (q < -1e-12 * scaled)
        throw MetricError("G = I/sigma - tau A^T A is indefinite: <y, G y> = " + std::to_string(q));
    return std::max(q, 0.0);
}

inline double h_norm(const Vector& x, const std::vector<Vector>& y, const HMetric& m) {
    if (!(m.tau > 0.0 && m.sigma > 0.0)) throw MetricError("h_norm: tau and sigma must be positive");
    return std::sqrt(x.squaredNorm() / m.tau + g_seminorm_sq(y, m));
}

// ---------------------------------------------------------------------------
// Iteration.

namespace detail {

/// Dual blocks grouped by shared operator so K p and A y are computed once per operator.
struct OperatorGroups {
    std::vector<LinearOperator> ops;
    std::vector<std::size_t> group_of;  // block -> group
    std::vector<std::vector<std::size_t>> members;

    explicit OperatorGroups(const SaddleProblem& prob) {
        group_of.resize(prob.blocks.size());
        for (std::size_t i = 0; i < prob.blocks.size(); ++i) {
            std::size_t g = 0;
            while (g < ops.size() && !ops[g].same_as(prob.blocks[i].op)) ++g;
            if (g == ops.size()) {
                ops.push_back(prob.blocks[i].op);
                members.emplace_back();
            }
            group_of[i] = g;
            members[g].push_back(i);
        }
    }

    void dual_to_primal(const std::vector<Vector>& y, std::size_t n, Vector& out) const {
        out = Vector::Zero(static_cast<Eigen::Index>(n));
        Vector sum, tmp;
        for (std::size_t g = 0; g < ops.size(); ++g) {
            sum = y[members[g].front()];
            for (std::size_t j = 1; j < members[g].size(); ++j) sum += y[members[g][j]];
            ops[g].apply_adjoint(sum, tmp);
            out += tmp;
        }
    }
};

}  // namespace detail

inline HMetric make_hmetric(const SaddleProblem& prob, double tau, double sigma) {
    auto groups = std::make_shared<const detail::OperatorGroups>(prob);
    const std::size_t n = prob.primal_dim();
    return {tau, sigma, [groups, n](const std::vector<Vector>& y, Vector& out) { groups->dual_to_primal(y, n, out); }};
}

/// Stateful driver that caches the operator grouping and A y between iterations.
class PapcIterator {
public:
    PapcIterator(const SaddleProblem& prob, const SolverConfig& cfg) : prob_(prob), cfg_(cfg), groups_(prob) {
        prob_.validate();
    }

    void check_state(const IterateState& s) const {
        if (static_cast<std::size_t>(s.x.size()) != prob_.primal_dim())
            throw InvalidDimension("iterate: primal length " + std::to_string(s.x.size()) + ", expected " +
                                   std::to_string(prob_.primal_dim()));
        if (s.y.size() != prob_.blocks.size()) throw InvalidDimension("iterate: wrong number of dual blocks");
        for (std::size_t i = 0; i < s.y.size(); ++i)
            if (static_cast<std::size_t>(s.y[i].size()) != prob_.blocks[i].prox.block_dim)
                throw InvalidDimension("iterate: dual block " + std::to_string(i) + " has wrong length");
    }

    /// Advances `s` by one iteration in place.
    void step(IterateState& s) {
        const double tau = cfg_.tau, sigma = cfg_.sigma;
        const std::size_t n = prob_.primal_dim();
        if (!ay_valid_) {
            groups_.dual_to_primal(s.y, n, ay_);
            ay_valid_ = true;
        }
        prob_.f.gradient(s.x, grad_);
        s.p = s.x - tau * (grad_ + ay_);

        kp_.resize(groups_.ops.size());
        for (std::size_t g = 0; g < groups_.ops.size(); ++g) groups_.ops[g].apply(s.p, kp_[g]);

        const std::size_t threads = cfg_.parallel_dual ? std::max<std::size_t>(cfg_.threads, 1) : 1;
        detail::parallel_for(prob_.blocks.size(), threads, [&](std::size_t i) {
            Vector z = s.y[i] + sigma * kp_[groups_.group_of[i]];
            Vector out;
            prob_.blocks[i].prox.prox_conjugate(z, sigma, out);
            if (out.size() != z.size())
                throw InvalidDimension("prox block '" + prob_.blocks[i].prox.description + "' changed length");
            s.y[i] = std::move(out);
        });

        groups_.dual_to_primal(s.y, n, ay_);
        s.x = s.x - tau * (grad_ + ay_);
        ++s.k;
    }

    /// Forget cached A y (call after modifying the state externally).
    void invalidate() { ay_valid_ = false; }

    const detail::OperatorGroups& groups() const { return groups_; }

private:
    const SaddleProblem& prob_;
    SolverConfig cfg_;
    detail::OperatorGroups groups_;
    Vector grad_, ay_;
    std::vector<Vector> kp_;
    bool ay_valid_ = false;
};

inline IterateState zero_state(const SaddleProblem& prob) {
    IterateState s;
    s.x = Vector::Zero(static_cast<Eigen::Index>(prob.primal_dim()));
    s.p = s.x;
    for (const auto& b : prob.blocks) s.y.push_back(Vector::Zero(static_cast<Eigen::Index>(b.prox.block_dim)));
    return s;
}

/// One iteration: predictor p, dual prox per block, corrector x; grad f evaluated once at x^{k-1}.
inline IterateState papc_step(const IterateState& state, const SaddleProblem& prob, const SolverConfig& cfg) {
    PapcIterator it(prob, cfg);
    it.check_state(state);
    IterateState next = state;
    it.step(next);
    return next;
}

struct SolveResult {
    IterateState state;
    ConvergenceReport report;
};

using IterateObserver = std::function<void(const IterateState&)>;

/// Iterates until the H-norm step drops to stop_tol, the budget is spent, or the step
/// falls to round-off relative to the iterate. `observer` sees u^0 and every u^k.
inline SolveResult solve(const SaddleProblem& prob, const SolverConfig& cfg, std::optional<IterateState> init = std::nullopt,
                         const IterateObserver& observer = {}) {
    prob.validate();
    validate_params(cfg.tau, cfg.sigma, prob.f.lipschitz_grad, prob.spectral.lambda_max);
    if (!(cfg.alpha > 1.0)) throw ParameterDomainError("solver: alpha must exceed 1");
    if (cfg.rate_window < 2) throw InvalidParameter("solver: rate window must be at least 2");

    PapcIterator it(prob, cfg);
    IterateState s = init ? *init : zero_state(prob);
    if (s.p.size() == 0) s.p = s.x;
    it.check_state(s);

    const HMetric metric{cfg.tau, cfg.sigma, [&](const std::vector<Vector>& y, Vector& out) {
                             it.groups().dual_to_primal(y, prob.primal_dim(), out);
                         }};

    SolveResult result;
    ConvergenceReport& rep = result.report;
    if (observer) observer(s);

    std::vector<Vector> dy(s.y.size());
    for (std::size_t k = 1; k <= cfg.max_iters; ++k) {
        const Vector x_prev = s.x;
        const std::vector<Vector> y_prev = s.y;
        it.step(s);

        const Vector dx = s.x - x_prev;
        double dual_sq = 0.0;
        for (std::size_t i = 0; i < s.y.size(); ++i) {
            dy[i] = s.y[i] - y_prev[i];
            dual_sq += dy[i].squaredNorm();
        }
        if (!s.x.allFinite() || !std::isfinite(dual_sq)) throw DivergenceError(k, "non-finite iterate");
        const double step = h_norm(dx, dy, metric);
        const double size = h_norm(s.x, s.y, metric);
        if (!std::isfinite(step) || !std::isfinite(size)) throw DivergenceError(k, "H-norm overflow");
        rep.steps_H.push_back(step);
        rep.iterations_run = k;
        if (cfg.record_trace)
            rep.trace.push_back({k, step, dx.norm(), std::sqrt(dual_sq), prob.f.value(s.x),
                                 prob.max_violation ? prob.max_violation(s.x) : 0.0});
        if (observer) observer(s);

        if (step <= cfg.stop_tol) {
            rep.stop_reason = StopReason::tolerance;
            break;
        }
        if (step <= 16.0 * std::numeric_limits<double>::epsilon() * size) {
            rep.stop_reason = StopReason::stagnation;
            break;
        }
        rep.stop_reason = StopReason::budget;
    }

    const std::size_t burn = static_cast<std::size_t>(std::ceil(cfg.burn_in_fraction * static_cast<double>(rep.steps_H.size())));
    if (rep.steps_H.size() > burn) {
        const std::vector<double> tail(rep.steps_H.begin() + static_cast<std::ptrdiff_t>(burn), rep.steps_H.end());
        rep.estimated_rate_c = estimate_rate(tail, cfg.rate_window);
    }
    if (rep.estimated_rate_c && !rep.steps_H.empty())
        rep.aposteriori_bound = aposteriori_bound(*rep.estimated_rate_c, rep.steps_H.back());
    if (prob.spectral.certified && prob.spectral.lambda_min > 0.0 && prob.f.pqs_constant)
        rep.delta_certified = delta_bound(cfg.alpha, cfg.tau, cfg.sigma, prob.f.lipschitz_grad, *prob.f.pqs_constant,
                                          prob.spectral.lambda_min);
    result.state = std::move(s);
    return result;
}

}  // namespace papc
