// Experiment runner for the PAPC solver: TV denoising, 1D/2D multiresolution estimation,
// step-size tuning and quadratic-supportability certificates.
//
// Exit codes: 0 success, 2 configuration error, 3 numerical divergence, 4 I/O error.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "papc.hpp"

namespace fs = std::filesystem;
using namespace papc;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitDivergence = 3;
constexpr int kExitIo = 4;

constexpr const char* kConfigHelp = "key=value file; keys are the long option names, command-line flags take precedence";

/// Ordered key=value summary, printed to stdout and persisted as summary.txt.
class Summary {
public:
    template <class T>
    void set(const std::string& key, const T& value) {
        std::ostringstream ss;
        ss.precision(17);
        ss << value;
        entries_.emplace_back(key, ss.str());
    }

    void set_optional(const std::string& key, const std::optional<double>& value) {
        if (value) set(key, *value);
        else set(key, "absent");
    }

    std::string str() const {
        std::string out;
        for (const auto& [k, v] : entries_) out += k + "=" + v + "\n";
        return out;
    }

private:
    std::vector<std::pair<std::string, std::string>> entries_;
};

/// Files are assembled in memory and committed together; a failed commit removes
/// whatever had already been moved into place.
class OutputSet {
public:
    void add(const std::string& name, std::string contents) { files_.emplace_back(name, std::move(contents)); }

    void commit(const fs::path& dir) const {
        std::error_code ec;
        fs::create_directories(dir, ec);
        if (ec) throw PersistenceError("cannot create output directory '" + dir.string() + "'");
        std::vector<fs::path> written;
        try {
            for (const auto& [name, contents] : files_) {
                atomic_write(dir / name, contents);
                written.push_back(dir / name);
            }
        } catch (...) {
            for (const auto& p : written) fs::remove(p, ec);
            throw;
        }
    }

private:
    std::vector<std::pair<std::string, std::string>> files_;
};

struct SolveOptions {
    std::optional<double> tau;
    std::optional<double> sigma;
    std::optional<double> rate_alpha;
    std::size_t max_iters = 0;
    double stop_tol = 0.0;
    std::size_t threads = 1;
    std::size_t rate_window = 50;
    std::uint64_t seed = 1;
    std::string out_dir = "papc_out";
};

void add_solve_options(CLI::App* sub, SolveOptions& o, double tau_default, std::size_t iters_default, double tol_default) {
    o.tau = tau_default;
    o.max_iters = iters_default;
    o.stop_tol = tol_default;
    sub->add_option("--tau", o.tau, "primal step size tau (1/units of f), must satisfy tau*L_f < 1")->capture_default_str();
    sub->add_option("--sigma", o.sigma, "dual step size sigma; default 1/(tau*lambda_max)");
    sub->add_option("--rate-alpha", o.rate_alpha,
                    "free parameter alpha > 1 of the rate certificate; default: tuned value when certifiable, else 2");
    sub->add_option("--max-iters", o.max_iters, "iteration budget (count)")->capture_default_str();
    sub->add_option("--stop-tol", o.stop_tol, "stop when the H-norm step falls to this value")->capture_default_str();
    sub->add_option("--threads", o.threads, "worker threads for the dual-block proxes (count)")->capture_default_str();
    sub->add_option("--rate-window", o.rate_window, "trailing steps used to estimate the contraction factor (count)")
        ->capture_default_str();
    sub->add_option("--seed", o.seed, "seed for synthetic data and power iteration")->capture_default_str();
    sub->add_option("--out-dir", o.out_dir, "directory receiving the result files")->capture_default_str();
    sub->add_option("--config")->description(kConfigHelp);
}

SolverConfig make_solver_config(const SolveOptions& o, const SaddleProblem& prob, Summary& s) {
    SolverConfig cfg;
    cfg.tau = *o.tau;
    cfg.sigma = o.sigma ? *o.sigma : default_sigma(cfg.tau, prob.spectral.lambda_max);
    validate_params(cfg.tau, cfg.sigma, prob.f.lipschitz_grad, prob.spectral.lambda_max);

    const bool certifiable = prob.spectral.certified && prob.spectral.lambda_min > 0.0 && prob.f.pqs_constant;
    if (o.rate_alpha) {
        cfg.alpha = *o.rate_alpha;
    } else if (certifiable) {
        cfg.alpha = tune_parameters(prob.spectral.condition_number(), prob.f.lipschitz_grad / *prob.f.pqs_constant,
                                    prob.f.lipschitz_grad, prob.spectral.lambda_max)
                        .alpha;
    } else {
        cfg.alpha = 2.0;
    }
    if (!(cfg.alpha > 1.0)) throw ParameterDomainError("rate alpha must exceed 1");
    cfg.max_iters = o.max_iters;
    cfg.stop_tol = o.stop_tol;
    cfg.threads = o.threads;
    cfg.parallel_dual = o.threads > 1;
    cfg.rate_window = o.rate_window;
    cfg.seed = o.seed;

    s.set("tau", cfg.tau);
    s.set("sigma", cfg.sigma);
    s.set("rate_alpha", cfg.alpha);
    s.set("L_f", prob.f.lipschitz_grad);
    s.set("lambda_min", prob.spectral.lambda_min);
    s.set("lambda_max", prob.spectral.lambda_max);
    s.set("spectrum_certified", prob.spectral.certified ? "true" : "false");
    s.set("dual_blocks", prob.blocks.size());
    return cfg;
}

void summarize_report(const ConvergenceReport& rep, Summary& s) {
    s.set("iterations", rep.iterations_run);
    s.set("stop_reason", to_string(rep.stop_reason));
    s.set("final_step_H", rep.steps_H.empty() ? 0.0 : rep.steps_H.back());
    s.set_optional("estimated_c", rep.estimated_rate_c);
    s.set_optional("aposteriori_bound", rep.aposteriori_bound);
    s.set_optional("delta_certified", rep.delta_certified);
    s.set("log_base", "natural");
}

SmreObjective parse_objective(const std::string& name) {
    if (name == "quadratic") return SmreObjective::dirichlet_energy;
    if (name == "huber") return SmreObjective::smoothed_tv;
    throw InvalidParameter("objective must be 'quadratic' or 'huber'");
}

std::string violations_csv(const std::vector<double>& q, const std::vector<double>& v) {
    std::string out = "level,q,violation\n";
    for (std::size_t l = 0; l < v.size(); ++l) {
        std::ostringstream ss;
        ss.precision(17);
        ss << (l + 1) << ',' << q[l] << ',' << v[l] << '\n';
        out += ss.str();
    }
    return out;
}

// ---------------------------------------------------------------------------

struct DenoiseOptions {
    SolveOptions solve;
    std::size_t n = 256;
    double noise_sd = 0.03;
    double lambda = 0.05;
    std::string signal = "blocks";
    std::string input;
    bool tuned = false;
};

int cmd_denoise_tv(const DenoiseOptions& o) {
    Vector b;
    if (!o.input.empty()) {
        b = read_signal_csv(o.input);
    } else {
        SignalKind kind;
        if (o.signal == "blocks") kind = SignalKind::blocks;
        else if (o.signal == "ramp") kind = SignalKind::ramp;
        else throw InvalidParameter("signal must be 'blocks' or 'ramp'");
        b = synth_signal(kind, o.n, o.noise_sd, o.solve.seed).noisy;
    }
    const SaddleProblem prob = build_tv_denoise({b, o.lambda});

    Summary s;
    s.set("command", "denoise-tv");
    s.set("n", b.size());
    s.set("lambda", o.lambda);
    s.set("noise_sd", o.input.empty() ? o.noise_sd : 0.0);
    SolveOptions so = o.solve;
    if (o.tuned) {
        const auto t = tune_parameters(prob.spectral.condition_number(), 1.0, prob.f.lipschitz_grad, prob.spectral.lambda_max);
        so.tau = t.tau;
        so.sigma = t.sigma;
        if (!so.rate_alpha) so.rate_alpha = t.alpha;
    }
    const SolverConfig cfg = make_solver_config(so, prob, s);
    const SolveResult r = solve(prob, cfg);
    summarize_report(r.report, s);

    OutputSet out;
    out.add("data.csv", format_signal_csv(b));
    out.add("reconstruction.csv", format_signal_csv(r.state.x));
    out.add("trace.csv", format_trace_csv(r.report.trace));
    out.add("summary.txt", s.str());
    out.commit(o.solve.out_dir);
    std::cout << s.str();
    return 0;
}

// ---------------------------------------------------------------------------

struct SmreOptions {
    SolveOptions solve;
    std::size_t n = 0;
    std::size_t levels = 0;
    double noise_sd = 0.0;
    std::optional<double> q0;
    double scale_f = 1.0;
    std::string objective;
    double alpha = 0.25;
    std::string input;
    // 2D only
    std::string psf = "gaussian";
    std::size_t psf_size = 7;
    double psf_width = 1.5;
    std::string psf_file;
};

int run_smre(const SmreOptions& o, std::size_t dims) {
    SmreSpec spec;
    spec.dims = dims;
    spec.levels = o.levels;
    spec.scale_f = o.scale_f;
    spec.objective = parse_objective(o.objective);
    spec.alpha = o.alpha;
    spec.seed = o.solve.seed;
    spec.q0 = o.q0 ? *o.q0 : 3.0 * o.noise_sd;
    if (!(spec.q0 > 0.0)) throw InvalidParameter("q0 must be positive (set --q0 or a positive --noise-sd)");

    Summary s;
    s.set("command", dims == 1 ? "smre1d" : "smre2d");
    OutputSet out;
    Vector clean;
    std::size_t n = o.n;
    if (dims == 1) {
        if (!o.input.empty()) {
            spec.b = read_signal_csv(o.input);
            n = static_cast<std::size_t>(spec.b.size());
        } else {
            spec.b = synth_signal(SignalKind::blocks, n, o.noise_sd, o.solve.seed).noisy;
        }
        out.add("data.csv", format_signal_csv(spec.b));
    } else {
        Matrix psf;
        if (!o.psf_file.empty()) psf = read_psf_csv(o.psf_file);
        else if (o.psf == "gaussian") psf = gaussian_psf(o.psf_size, o.psf_width);
        else if (o.psf != "none") throw InvalidParameter("psf must be 'gaussian' or 'none' (or give --psf-file)");
        Matrix img;
        if (!o.input.empty()) {
            img = read_image(o.input);
            n = static_cast<std::size_t>(img.rows());
        }
        if (psf.size() > 0) spec.forward = make_convolution(n, psf);
        if (o.input.empty()) {
            const Matrix phantom = phantom_image(n);
            Vector x0 = Eigen::Map<const Vector>(phantom.data(), phantom.size());
            if (spec.forward.valid()) x0 = spec.forward.apply(x0);
            spec.b = x0 + gaussian_noise(n * n, o.noise_sd, o.solve.seed);
        } else {
            spec.b = Eigen::Map<const Vector>(img.data(), img.size());
        }
        const auto N = static_cast<Eigen::Index>(n);
        out.add("data.raw", encode_raw_image(Eigen::Map<const Matrix>(spec.b.data(), N, N)));
        s.set("psf", psf.size() > 0 ? std::to_string(psf.rows()) + "x" + std::to_string(psf.cols()) : std::string("none"));
    }

    const SmreProblem P = dims == 1 ? build_smre_1d(spec) : build_smre_2d(spec);
    s.set("n", n);
    s.set("levels", spec.levels);
    s.set("q0", spec.q0);
    s.set("scale_f", spec.scale_f);
    s.set("objective", o.objective);
    if (spec.objective == SmreObjective::smoothed_tv) s.set("huber_alpha", spec.alpha);
    s.set("total_constraints", P.windows.total_constraints);
    const SolverConfig cfg = make_solver_config(o.solve, P.saddle, s);
    const SolveResult r = solve(P.saddle, cfg);
    summarize_report(r.report, s);

    const std::vector<double> viol = constraint_violation(r.state.x, spec, P.windows);
    double worst = 0.0;
    for (double v : viol) worst = std::max(worst, v);
    s.set("max_violation", worst);

    if (dims == 1) {
        out.add("reconstruction.csv", format_signal_csv(r.state.x));
    } else {
        const auto N = static_cast<Eigen::Index>(n);
        const Eigen::Map<const Matrix> x(r.state.x.data(), N, N);
        out.add("reconstruction.raw", encode_raw_image(x));
        const double lo = x.minCoeff(), hi = x.maxCoeff();
        out.add("reconstruction.pgm", encode_pgm(hi > lo ? Matrix((x.array() - lo) / (hi - lo)) : Matrix(Matrix::Zero(N, N))));
    }
    out.add("trace.csv", format_trace_csv(r.report.trace));
    out.add("violations.csv", violations_csv(P.thresholds, viol));
    out.add("summary.txt", s.str());
    out.commit(o.solve.out_dir);
    std::cout << s.str();
    return 0;
}

// ---------------------------------------------------------------------------

struct TuneOptions {
    std::optional<double> kappa_a;
    double kappa_f = 1.0;
    double lf = 1.0;
    double lambda_max = 1.0;
    std::string problem;
    std::size_t n = 256;
    double eps = 1e-3;
    double c = 1.0;
    std::string target = "primal";
};

int cmd_tune(const TuneOptions& o) {
    double kappa_a = 1.0, kappa_f = o.kappa_f, lf = o.lf, lambda_max = o.lambda_max;
    if (o.problem == "tv") {
        const SpectralBounds sb = grad1d_dirichlet_spectrum(o.n);
        kappa_a = sb.condition_number();
        kappa_f = 1.0;
        lf = 1.0;
        lambda_max = sb.lambda_max;
    } else if (!o.problem.empty()) {
        throw InvalidParameter("problem must be 'tv' when given");
    }
    if (o.kappa_a) kappa_a = *o.kappa_a;
    BudgetTarget target;
    if (o.target == "primal") target = BudgetTarget::primal;
    else if (o.target == "dual") target = BudgetTarget::dual;
    else throw InvalidParameter("target must be 'primal' or 'dual'");

    const TunedParameters t = tune_parameters(kappa_a, kappa_f, lf, lambda_max);
    validate_params(t.tau, t.sigma, lf, lambda_max);
    Summary s;
    s.set("command", "tune");
    s.set("kappa_A", kappa_a);
    s.set("kappa_f", kappa_f);
    s.set("L_f", lf);
    s.set("lambda_max", lambda_max);
    s.set("rho", t.rho);
    s.set("tau", t.tau);
    s.set("tau_L_f", t.tau * lf);
    s.set("sigma", t.sigma);
    s.set("alpha", t.alpha);
    s.set("delta_m", t.delta_m);
    s.set("eps", o.eps);
    s.set("C", o.c);
    s.set("target", o.target);
    s.set("iteration_budget", iteration_budget(o.eps, o.c, t.delta_m, lf, target));
    s.set("log_base", "natural");
    std::cout << s.str();
    return 0;
}

// ---------------------------------------------------------------------------

struct CertifyOptions {
    std::string objective = "quadratic";
    std::string point;
    std::optional<double> at;
    std::size_t dim = 1;
    std::string data;
    double radius = 1.0;
    double mu = 1.0;
    std::size_t samples = 2000;
    std::uint64_t seed = 1;
    double alpha = 0.25;
    double eps = 0.05;
};

int cmd_certify(const CertifyOptions& o) {
    Vector y;
    if (!o.point.empty()) y = read_signal_csv(o.point);
    else y = Vector::Constant(static_cast<Eigen::Index>(o.dim), o.at.value_or(0.0));

    SupportableFunction phi;
    if (o.objective == "quadratic") {
        phi = as_supportable(quadratic_fidelity(o.data.empty() ? y : read_signal_csv(o.data)));
    } else if (o.objective == "huber") {
        phi = huber_function(o.alpha);
    } else if (o.objective == "modified-huber") {
        phi = modified_huber_function(o.alpha, o.eps);
    } else if (o.objective == "gaussian-well") {
        phi = as_supportable(gaussian_well(static_cast<std::size_t>(y.size())));
    } else {
        throw InvalidParameter("objective must be quadratic, huber, modified-huber or gaussian-well");
    }
    if (static_cast<std::size_t>(y.size()) != phi.dim)
        throw InvalidDimension("point has dimension " + std::to_string(y.size()) + ", objective expects " +
                               std::to_string(phi.dim));

    const PqsCertificate c = pqs_certificate(phi, y, o.radius, o.mu, o.samples, o.seed);
    Summary s;
    s.set("command", "certify");
    s.set("objective", o.objective);
    s.set("dim", y.size());
    s.set("radius", c.radius);
    s.set("mu", c.mu);
    s.set("samples", c.samples);
    s.set("seed", o.seed);
    s.set("result", c.passed ? "pass" : "fail");
    s.set("worst_slack", c.worst_slack);
    std::cout << s.str();
    return 0;
}

// ---------------------------------------------------------------------------

/// Splices the key=value lines of a subcommand's --config file in front of the explicit
/// flags, so that flags given on the command line win.
std::vector<std::string> expand_config(const std::vector<std::string>& args) {
    std::vector<std::string> out;
    std::vector<std::string> from_file;
    std::size_t insert_at = std::string::npos;
    for (std::size_t i = 0; i < args.size(); ++i) {
        std::string path;
        if (args[i] == "--config") {
            if (i + 1 >= args.size()) throw CLI::ArgumentMismatch("--config requires a file path");
            path = args[++i];
        } else if (args[i].rfind("--config=", 0) == 0) {
            path = args[i].substr(9);
        } else {
            out.push_back(args[i]);
            continue;
        }
        std::ifstream in(path);
        if (!in) throw PersistenceError("cannot open config file '" + path + "'");
        for (const CLI::ConfigItem& item : CLI::ConfigINI().from_config(in)) {
            if (item.name == "++" || item.name == "--") continue;  // section markers
            from_file.push_back("--" + item.name);
            for (const auto& v : item.inputs) from_file.push_back(v);
        }
        if (insert_at == std::string::npos) insert_at = 2;
    }
    if (insert_at != std::string::npos && out.size() >= 2)
        out.insert(out.begin() + static_cast<std::ptrdiff_t>(insert_at), from_file.begin(), from_file.end());
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"PAPC primal-dual solver: experiments, tuning and certificates"};
    app.require_subcommand(1);
    app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

    DenoiseOptions den;
    auto* sub_den = app.add_subcommand("denoise-tv", "1D total-variation denoising, min lambda|grad x|_1 + |x-b|^2/2");
    add_solve_options(sub_den, den.solve, 0.05, 1000, 1e-10);
    sub_den->add_option("--n", den.n, "signal length (samples)")->capture_default_str();
    sub_den->add_option("--noise-sd", den.noise_sd, "Gaussian noise standard deviation (signal units)")->capture_default_str();
    sub_den->add_option("--lambda", den.lambda, "regularization weight (signal units)")->capture_default_str();
    sub_den->add_option("--signal", den.signal, "synthetic signal: blocks | ramp")->capture_default_str();
    sub_den->add_option("--input", den.input, "noisy signal CSV (one value per line); overrides --signal");
    sub_den->add_flag("--tuned", den.tuned, "use the rate-optimal tau, sigma and alpha instead of --tau/--sigma");

    SmreOptions s1;
    s1.n = 512;
    s1.levels = 10;
    s1.noise_sd = 0.02;
    s1.scale_f = 0.93;
    s1.objective = "quadratic";
    auto* sub_s1 = app.add_subcommand("smre1d", "1D multiresolution estimation with sliding-window constraints");
    add_solve_options(sub_s1, s1.solve, 0.2, 200000, 1e-6);
    sub_s1->add_option("--n", s1.n, "signal length (samples)")->capture_default_str();
    sub_s1->add_option("--levels", s1.levels, "window lengths 1..L (count)")->capture_default_str();
    sub_s1->add_option("--noise-sd", s1.noise_sd, "Gaussian noise standard deviation (signal units)")->capture_default_str();
    sub_s1->add_option("--q0", s1.q0, "level-1 threshold (signal units); default 3*noise-sd");
    sub_s1->add_option("--scale-f", s1.scale_f, "per-level threshold factor f, q_l = q0 f^(l-1)")->capture_default_str();
    sub_s1->add_option("--objective", s1.objective, "regularizer: quadratic | huber")->capture_default_str();
    sub_s1->add_option("--alpha", s1.alpha, "Huber width (signal units)")->capture_default_str();
    sub_s1->add_option("--input", s1.input, "noisy signal CSV; overrides the synthetic signal");

    SmreOptions s2;
    s2.n = 64;
    s2.levels = 3;
    s2.noise_sd = 0.02;
    s2.q0 = 0.07;
    s2.scale_f = 1.0;
    s2.objective = "huber";
    auto* sub_s2 = app.add_subcommand("smre2d", "2D multiresolution deconvolution with square-window constraints");
    add_solve_options(sub_s2, s2.solve, 0.02, 800, 0.0);
    sub_s2->add_option("--n", s2.n, "image side (pixels)")->capture_default_str();
    sub_s2->add_option("--levels", s2.levels, "window sizes 1..L (pixels)")->capture_default_str();
    sub_s2->add_option("--noise-sd", s2.noise_sd, "Gaussian noise standard deviation (intensity units)")->capture_default_str();
    sub_s2->add_option("--q0", s2.q0, "level-1 threshold (intensity units)")->capture_default_str();
    sub_s2->add_option("--scale-f", s2.scale_f, "per-level threshold factor f, q_l = q0 f^(l-1)")->capture_default_str();
    sub_s2->add_option("--objective", s2.objective, "regularizer: quadratic | huber")->capture_default_str();
    sub_s2->add_option("--alpha", s2.alpha, "Huber width (intensity units)")->capture_default_str();
    sub_s2->add_option("--input", s2.input, "image: binary graymap (P5) or raw float; overrides the phantom");
    sub_s2->add_option("--psf", s2.psf, "point spread function: gaussian | none")->capture_default_str();
    sub_s2->add_option("--psf-size", s2.psf_size, "Gaussian kernel side, odd (pixels)")->capture_default_str();
    sub_s2->add_option("--psf-width", s2.psf_width, "Gaussian kernel standard deviation (pixels)")->capture_default_str();
    sub_s2->add_option("--psf-file", s2.psf_file, "kernel CSV (k rows of k values); overrides --psf");

    TuneOptions tu;
    auto* sub_tu = app.add_subcommand("tune", "rate-optimal tau, sigma, alpha and the implied iteration budget");
    sub_tu->add_option("--kappa-a", tu.kappa_a, "condition number of A^T A (dimensionless, >= 1); default 1");
    sub_tu->add_option("--kappa-f", tu.kappa_f, "L_f/mu (dimensionless, >= 1)")->capture_default_str();
    sub_tu->add_option("--lf", tu.lf, "Lipschitz constant L_f of grad f")->capture_default_str();
    sub_tu->add_option("--lambda-max", tu.lambda_max, "largest eigenvalue of A^T A")->capture_default_str();
    sub_tu->add_option("--problem", tu.problem, "derive the constants from a problem: tv");
    sub_tu->add_option("--n", tu.n, "signal length for --problem tv (samples)")->capture_default_str();
    sub_tu->add_option("--eps", tu.eps, "target accuracy for the iteration budget")->capture_default_str();
    sub_tu->add_option("--c", tu.c, "constant C of the R-linear bound")->capture_default_str();
    sub_tu->add_option("--target", tu.target, "budget target: primal | dual")->capture_default_str();
    sub_tu->add_option("--config")->description(kConfigHelp);

    CertifyOptions ce;
    auto* sub_ce = app.add_subcommand("certify", "sampled check of pointwise quadratic supportability");
    sub_ce->add_option("--objective", ce.objective, "quadratic | huber | modified-huber | gaussian-well")->capture_default_str();
    sub_ce->add_option("--point", ce.point, "reference point CSV (one coordinate per line)");
    sub_ce->add_option("--at", ce.at, "reference point value, repeated --dim times (default 0)");
    sub_ce->add_option("--dim", ce.dim, "dimension used with --at (count)")->capture_default_str();
    sub_ce->add_option("--data", ce.data, "data vector b of the quadratic; default: the reference point");
    sub_ce->add_option("--radius", ce.radius, "radius of the sampled ball")->capture_default_str();
    sub_ce->add_option("--mu", ce.mu, "candidate supportability constant")->capture_default_str();
    sub_ce->add_option("--samples", ce.samples, "number of sample points (count)")->capture_default_str();
    sub_ce->add_option("--seed", ce.seed, "sampling seed")->capture_default_str();
    sub_ce->add_option("--alpha", ce.alpha, "Huber width")->capture_default_str();
    sub_ce->add_option("--eps", ce.eps, "modified-Huber inner offset, 0 < eps < alpha")->capture_default_str();
    sub_ce->add_option("--config")->description(kConfigHelp);

    try {
        std::vector<std::string> args(argv, argv + argc);
        args = expand_config(args);
        std::vector<std::string> rev(args.rbegin(), args.rend() - 1);
        app.parse(std::move(rev));
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitConfig;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitIo;
    }

    try {
        if (sub_den->parsed()) return cmd_denoise_tv(den);
        if (sub_s1->parsed()) return run_smre(s1, 1);
        if (sub_s2->parsed()) return run_smre(s2, 2);
        if (sub_tu->parsed()) return cmd_tune(tu);
        if (sub_ce->parsed()) return cmd_certify(ce);
    } catch (const DivergenceError& e) {
        std::cerr << "divergence: " << e.what() << "\n";
        return kExitDivergence;
    } catch (const MetricError& e) {
        std::cerr << "divergence: " << e.what() << "\n";
        return kExitDivergence;
    } catch (const ParseError& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return kExitIo;
    } catch (const FormatError& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return kExitIo;
    } catch (const PersistenceError& e) {
        std::cerr << "I/O error: " << e.what() << "\n";
        return kExitIo;
    } catch (const Error& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return kExitConfig;
    }
    return kExitConfig;
}
