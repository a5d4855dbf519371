#pragma once

// Application problems: 1D total-variation denoising and statistical multiresolution
// estimation (SMRE) over sliding-window constraint systems in 1D and 2D.

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "papc/errors.hpp"
#include "papc/functions.hpp"
#include "papc/linops.hpp"
#include "papc/prox.hpp"
#include "papc/solver.hpp"

namespace papc {

// ---------------------------------------------------------------------------
// TV-L2 denoising:  min_x  lambda ||grad x||_1 + 1/2 ||x - b||^2.

struct TvDenoiseSpec {
    Vector b;
    double lambda = 0.05;
};

/// Quadratic fidelity with one dual block (forward differences, l-infinity ball of radius lambda).
/// The spectrum of grad^T grad is taken in closed form, so the rate certificate is available.
inline SaddleProblem build_tv_denoise(const TvDenoiseSpec& spec) {
    if (spec.b.size() == 0) throw InvalidDimension("build_tv_denoise: empty signal");
    if (!(spec.lambda > 0.0)) throw InvalidParameter("build_tv_denoise: lambda must be positive");
    const auto n = static_cast<std::size_t>(spec.b.size());
    SaddleProblem prob;
    prob.f = quadratic_fidelity(spec.b);
    prob.blocks.push_back({make_linf_ball_block(n, spec.lambda), make_grad1d_dirichlet(n)});
    prob.spectral = grad1d_dirichlet_spectrum(n);
    return prob;
}

// ---------------------------------------------------------------------------
// Window systems.

/// Contiguous window: [start, start + extent) in 1D, or the extent x extent square with
/// top-left corner (row, col) in 2D.
struct Window {
    std::size_t row = 0;
    std::size_t col = 0;
    std::size_t extent = 1;
};

/// Pairwise disjoint windows of one size and one offset; one dual block of the SMRE problem.
struct Tiling {
    std::size_t level = 1;
    std::size_t offset_row = 0;
    std::size_t offset_col = 0;
    std::vector<Window> windows;
};

struct WindowSystem {
    std::size_t dims = 1;  // 1 for signals, 2 for n x n images
    std::size_t n = 0;
    std::size_t levels = 0;
    std::vector<Tiling> tilings;
    std::size_t total_constraints = 0;

    std::size_t signal_length() const { return dims == 1 ? n : n * n; }
    std::size_t window_size(const Window& w) const { return dims == 1 ? w.extent : w.extent * w.extent; }

    /// Calls fn(flat_index) for every pixel of `w` (column-major in 2D).
    template <class Fn>
    void for_each_pixel(const Window& w, Fn&& fn) const {
        if (dims == 1) {
            for (std::size_t i = w.row; i < w.row + w.extent; ++i) fn(i);
            return;
        }
        for (std::size_t c = w.col; c < w.col + w.extent; ++c)
            for (std::size_t r = w.row; r < w.row + w.extent; ++r) fn(r + c * n);
    }
};

/// All windows of length 1..L in a signal of length n, split into l offset tilings per length.
inline WindowSystem enumerate_windows(std::size_t n, std::size_t L) {
    if (n == 0) throw InvalidDimension("enumerate_windows: empty signal");
    if (L < 1 || L > n) throw InvalidParameter("enumerate_windows: need 1 <= L <= n, got L=" + std::to_string(L));
    WindowSystem ws;
    ws.dims = 1;
    ws.n = n;
    ws.levels = L;
    for (std::size_t l = 1; l <= L; ++l) {
        for (std::size_t o = 0; o < l; ++o) {
            Tiling t;
            t.level = l;
            t.offset_row = o;
            for (std::size_t s = o; s + l <= n; s += l) t.windows.push_back({s, 0, l});
            ws.total_constraints += t.windows.size();
            ws.tilings.push_back(std::move(t));
        }
    }
    return ws;
}

/// All l x l squares (l = 1..L) of an n x n image, split into l^2 offset tilings per size.
inline WindowSystem enumerate_windows_2d(std::size_t n, std::size_t L) {
    if (n == 0) throw InvalidDimension("enumerate_windows_2d: empty image");
    if (L < 1 || L > n) throw InvalidParameter("enumerate_windows_2d: need 1 <= L <= n, got L=" + std::to_string(L));
    WindowSystem ws;
    ws.dims = 2;
    ws.n = n;
    ws.levels = L;
    for (std::size_t l = 1; l <= L; ++l) {
        for (std::size_t orow = 0; orow < l; ++orow) {
            for (std::size_t ocol = 0; ocol < l; ++ocol) {
                Tiling t;
                t.level = l;
                t.offset_row = orow;
                t.offset_col = ocol;
                for (std::size_t c = ocol; c + l <= n; c += l)
                    for (std::size_t r = orow; r + l <= n; r += l) t.windows.push_back({r, c, l});
                ws.total_constraints += t.windows.size();
                ws.tilings.push_back(std::move(t));
            }
        }
    }
    return ws;
}

/// Level thresholds q_l = q0 * f^(l-1), l = 1..L.
inline std::vector<double> q_schedule(double q0, double scale_f, std::size_t L) {
    if (!(q0 > 0.0)) throw InvalidParameter("q_schedule: q0 must be positive");
    if (!(scale_f > 0.0 && scale_f <= 1.0)) throw InvalidParameter("q_schedule: scale factor must lie in (0, 1]");
    std::vector<double> q(L);
    double v = q0;
    for (std::size_t l = 0; l < L; ++l, v *= scale_f) q[l] = v;
    return q;
}

// ---------------------------------------------------------------------------
// SMRE:  min J(x)  s.t.  |<omega^s, A x - b>| <= q_l(s)  for every window s.

enum class SmreObjective { dirichlet_energy, smoothed_tv };

inline const char* to_string(SmreObjective o) {
    return o == SmreObjective::dirichlet_energy ? "dirichlet_energy" : "smoothed_tv";
}

struct SmreSpec {
    /// Data; for 2D an n x n field flattened column-major.
    Vector b;
    /// Forward operator; an empty handle means the identity.
    LinearOperator forward;
    double q0 = 0.06;
    double scale_f = 0.93;
    std::size_t levels = 10;
    SmreObjective objective = SmreObjective::dirichlet_energy;
    /// Huber width for the smoothed TV objective.
    double alpha = 0.25;
    std::size_t dims = 1;
    /// Power-iteration controls, used when the forward operator is not the identity.
    std::size_t power_iters = 20000;
    double power_tol = 1e-10;
    std::uint64_t seed = 1;
};

struct SmreProblem {
    SaddleProblem saddle;
    WindowSystem windows;
    std::vector<double> thresholds;
};

namespace detail {

/// Conjugate prox of the indicator of one tiling's slabs, with unit-mass uniform weights.
/// For a window s with r = mean((z/sigma - b)_s), the result is sigma * (r - sign(r) q) on s
/// when |r| > q and 0 otherwise; pixels outside every window of the tiling map to 0.
inline ProxableBlock make_tiling_block(std::shared_ptr<const WindowSystem> ws, std::size_t tiling,
                                       std::shared_ptr<const Vector> b, double q) {
    const std::size_t m = ws->signal_length();
    const Tiling& t = ws->tilings[tiling];
    std::string label = "tiling(l=" + std::to_string(t.level) + ",offset=" + std::to_string(t.offset_row);
    if (ws->dims == 2) label += "/" + std::to_string(t.offset_col);
    label += ")";
    return {m,
            [ws, tiling, b, q](const Vector& z, double sigma, Vector& out) {
                out = Vector::Zero(z.size());
                for (const Window& w : ws->tilings[tiling].windows) {
                    double sum = 0.0;
                    ws->for_each_pixel(w, [&](std::size_t i) { sum += z[static_cast<Eigen::Index>(i)] / sigma - (*b)[static_cast<Eigen::Index>(i)]; });
                    const double r = sum / static_cast<double>(ws->window_size(w));
                    if (std::abs(r) <= q) continue;
                    const double shift = sigma * (r - std::copysign(q, r));
                    ws->for_each_pixel(w, [&](std::size_t i) { out[static_cast<Eigen::Index>(i)] = shift; });
                }
            },
            std::move(label)};
}

inline void check_smre_spec(const SmreSpec& spec) {
    if (spec.dims != 1 && spec.dims != 2) throw InvalidParameter("SMRE: dims must be 1 or 2");
    if (spec.b.size() == 0) throw InvalidDimension("SMRE: empty data");
    if (spec.forward.valid()) {
        if (spec.forward.codomain_dim() != static_cast<std::size_t>(spec.b.size()))
            throw InvalidDimension("SMRE: forward operator codomain does not match the data length");
        if (spec.forward.domain_dim() != spec.forward.codomain_dim())
            throw InvalidDimension("SMRE: forward operator must map the image space to itself");
    }
    if (spec.objective == SmreObjective::smoothed_tv) check_huber_alpha(spec.alpha);
}

inline std::size_t side_length(const SmreSpec& spec) {
    const auto m = static_cast<std::size_t>(spec.b.size());
    if (spec.dims == 1) return m;
    const auto n = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(m))));
    if (n * n != m) throw InvalidDimension("SMRE 2D: data length " + std::to_string(m) + " is not a square");
    return n;
}

inline SmreProblem assemble_smre(const SmreSpec& spec, WindowSystem ws, SmoothObjective f) {
    SmreProblem out;
    out.thresholds = q_schedule(spec.q0, spec.scale_f, spec.levels);
    const std::size_t m = ws.signal_length();
    const LinearOperator A = spec.forward.valid() ? spec.forward : make_identity(m);

    double a_norm_sq = 1.0;
    bool certified = !spec.forward.valid();
    if (spec.forward.valid()) a_norm_sq = operator_norm_sq(A, spec.power_iters, spec.power_tol, spec.seed).upper_bound;

    auto shared_ws = std::make_shared<const WindowSystem>(ws);
    auto b = std::make_shared<const Vector>(spec.b);
    SaddleProblem& prob = out.saddle;
    prob.f = std::move(f);
    for (std::size_t t = 0; t < shared_ws->tilings.size(); ++t) {
        const double q = out.thresholds[shared_ws->tilings[t].level - 1];
        prob.blocks.push_back({make_tiling_block(shared_ws, t, b, q), A});
    }
    // Every block carries the same A, so the stacked Gram operator is (1 1^T) (x) A A^T.
    const double T = static_cast<double>(shared_ws->tilings.size());
    prob.spectral.lambda_max = T * a_norm_sq;
    prob.spectral.lambda_min = shared_ws->tilings.size() == 1 && certified ? 1.0 : 0.0;
    prob.spectral.certified = certified;

    const auto thresholds = out.thresholds;
    prob.max_violation = [shared_ws, b, A, thresholds](const Vector& x) {
        const Vector r = A.apply(x) - *b;
        double worst = 0.0;
        for (const Tiling& t : shared_ws->tilings)
            for (const Window& w : t.windows) {
                double sum = 0.0;
                shared_ws->for_each_pixel(w, [&](std::size_t i) { sum += r[static_cast<Eigen::Index>(i)]; });
                worst = std::max(worst, std::abs(sum) / static_cast<double>(shared_ws->window_size(w)) - thresholds[t.level - 1]);
            }
        return worst;
    };
    out.windows = std::move(ws);
    return out;
}

}  // namespace detail

/// 1D SMRE; the regularizer acts through forward differences with Dirichlet closure.
inline SmreProblem build_smre_1d(const SmreSpec& spec) {
    if (spec.dims != 1) throw InvalidParameter("build_smre_1d: spec.dims must be 1");
    detail::check_smre_spec(spec);
    const std::size_t n = detail::side_length(spec);
    WindowSystem ws = enumerate_windows(n, spec.levels);
    const LinearOperator grad = make_grad1d_dirichlet(n);
    const SpectralBounds gs = grad1d_dirichlet_spectrum(n);
    SmoothObjective f = spec.objective == SmreObjective::dirichlet_energy
                            ? dirichlet_energy(grad, gs.lambda_max, gs.lambda_min)
                            : smoothed_tv_objective(grad, spec.alpha, gs.lambda_max);
    return detail::assemble_smre(spec, std::move(ws), std::move(f));
}

/// 2D SMRE on an n x n image with Neumann differences; J has no quadratic support constant.
inline SmreProblem build_smre_2d(const SmreSpec& spec) {
    if (spec.dims != 2) throw InvalidParameter("build_smre_2d: spec.dims must be 2");
    detail::check_smre_spec(spec);
    const std::size_t n = detail::side_length(spec);
    if (n < 2) throw InvalidDimension("build_smre_2d: image side must be at least 2");
    WindowSystem ws = enumerate_windows_2d(n, spec.levels);
    const LinearOperator grad = make_grad2d_neumann(n);
    const double norm_sq = grad2d_neumann_norm_sq(n);
    SmoothObjective f = spec.objective == SmreObjective::dirichlet_energy ? dirichlet_energy(grad, norm_sq)
                                                                          : smoothed_tv_objective(grad, spec.alpha, norm_sq);
    return detail::assemble_smre(spec, std::move(ws), std::move(f));
}

/// Per-level max over windows of |<omega^s, A x - b>| - q_l, clamped below at 0.
inline std::vector<double> constraint_violation(const Vector& x, const SmreSpec& spec, const WindowSystem& windows) {
    const std::size_t m = windows.signal_length();
    if (static_cast<std::size_t>(x.size()) != m || static_cast<std::size_t>(spec.b.size()) != m)
        throw InvalidDimension("constraint_violation: x, b and the window system disagree in size");
    const std::vector<double> q = q_schedule(spec.q0, spec.scale_f, windows.levels);
    const Vector r = (spec.forward.valid() ? spec.forward.apply(x) : x) - spec.b;
    std::vector<double> out(windows.levels, 0.0);
    for (const Tiling& t : windows.tilings)
        for (const Window& w : t.windows) {
            double sum = 0.0;
            windows.for_each_pixel(w, [&](std::size_t i) { sum += r[static_cast<Eigen::Index>(i)]; });
            const double v = std::abs(sum) / static_cast<double>(windows.window_size(w)) - q[t.level - 1];
            out[t.level - 1] = std::max(out[t.level - 1], v);
        }
    return out;
}

}  // namespace papc
