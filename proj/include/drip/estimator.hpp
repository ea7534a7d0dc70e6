#ifndef DRIP_ESTIMATOR_HPP
#define DRIP_ESTIMATOR_HPP

// Adversarial estimation engine for linear inverse problems over RKHS balls.
//
// The empirical criterion being minimized is
//
//   L_n(h) + lambda E_n[(h(X) - center(X))^2],
//   L_n(h) = max_{f : ||f||_F^2 <= B} E_n[2 (m(W;f) - h(X) f(Z)) - f(Z)^2],
//
// optionally subject to the version-space constraint L_n(h) <= min L_n + mu_n.
// With h and f in representer form everything reduces to finite quadratics:
// the inner maximum is (M + mu K_F)^{-1} c1 for a scalar multiplier mu located
// by line search, and the outer minimum is a linear solve for each candidate
// pair of outer multipliers.  The same machinery fits the dual problem with
// the roles of the two data blocks swapped.

#include <cmath>
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "drip/common.hpp"
#include "drip/data.hpp"
#include "drip/kernels.hpp"
#include "drip/rng.hpp"

namespace drip::estimator {

enum class FitMode { plain, iterated, constrained, constrained_iterated };

inline std::string fit_mode_name(FitMode m) {
    switch (m) {
        case FitMode::plain: return "plain";
        case FitMode::iterated: return "iterated";
        case FitMode::constrained: return "constrained";
        case FitMode::constrained_iterated: return "constrained_iterated";
    }
    return "plain";
}

inline FitMode fit_mode_from_name(const std::string& s) {
    if (s == "plain") return FitMode::plain;
    if (s == "iterated") return FitMode::iterated;
    if (s == "constrained") return FitMode::constrained;
    if (s == "constrained_iterated") return FitMode::constrained_iterated;
    throw std::invalid_argument("unknown fit mode: " + s);
}

struct EstimatorConfig {
    FitMode mode = FitMode::plain;
    double lambda = 0.0;        // <= 0 requests the theory schedule
    int t_iters = 0;            // <= 0 requests the theory schedule
    double mu_mult = 2.0;       // version-space slack multiplier
    double norm_bound = 100.0;  // RKHS ball radius B (hypothesis and adversary)
    double delta_proxy = 0.0;   // <= 0 means n^{-1/2}
    double beta_assumed = 1.0;
    double gamma_smooth = 0.0;
    bool auto_schedule = true;
    bool paper_literal_schedule = false; // printed lambda exponent 1/(beta_t+2)
    int max_anchors = 2000;
};

struct Schedule {
    double lambda = 0.0;
    int t_iters = 1;
    double mu_n = 0.0;
    double delta = 0.0;
};

// Hyperparameter schedules as dictated by the rate analysis; delta is the
// critical-radius proxy.  The iterated lambda exponent is the one balancing
// the variance and bias terms, 2/(beta_t + 2); the literal switch restores
// the printed 1/(beta_t + 2) for comparison runs.
inline Schedule schedule_hyperparams(int n, double beta_assumed, double gamma_smooth, FitMode mode,
                                     bool paper_literal = false, double delta_override = 0.0,
                                     double mu_mult = 2.0) {
    require(n >= 8, "schedules need n >= 8");
    (void)gamma_smooth;
    Schedule s;
    s.delta = delta_override > 0.0 ? delta_override : 1.0 / std::sqrt(static_cast<double>(n));
    const double loglog = std::max(1.0, std::log(std::log(1.0 / s.delta)));
    const double bm = std::min(beta_assumed, 1.0);
    switch (mode) {
        case FitMode::plain:
        case FitMode::constrained:
            s.lambda = std::pow(s.delta, 2.0 / (1.0 + bm));
            s.t_iters = 1;
            break;
        case FitMode::iterated: {
            s.t_iters = std::max(1, static_cast<int>(std::ceil(std::min(beta_assumed / 2.0, loglog))));
            const double bt = std::min(beta_assumed, 2.0 * s.t_iters);
            s.lambda = std::pow(s.delta, (paper_literal ? 1.0 : 2.0) / (bt + 2.0));
            break;
        }
        case FitMode::constrained_iterated: {
            s.lambda = std::pow(s.delta, 2.0 / (beta_assumed + 1.0));
            const int t_src = static_cast<int>(std::ceil((beta_assumed + 1.0) / 2.0));
            s.t_iters = std::max(1, std::min(t_src, static_cast<int>(std::ceil(loglog))));
            break;
        }
    }
    if (mode == FitMode::plain || mode == FitMode::constrained) s.lambda = std::min(s.lambda, 1.99);
    else s.lambda = std::min(s.lambda, 1.0);
    s.mu_n = mu_mult * std::max(s.delta * s.delta,
                                std::pow(s.lambda, std::min(beta_assumed + 1.0, 2.0 * s.t_iters)));
    return s;
}

struct SaddleProblem {
    Eigen::MatrixXd hyp_gram;   // K_H on hypothesis anchors
    Eigen::MatrixXd adv_gram;   // K_F on adversary anchors
    Eigen::MatrixXd hyp_second; // E_n of hypothesis sections' outer product
    Eigen::MatrixXd adv_second; // E_n of adversary sections' outer product
    Eigen::MatrixXd cross_eval; // E_n pairing of hypothesis vs adversary sections
    Eigen::VectorXd moment_vec; // moment paired with adversary sections
    Eigen::VectorXd center_coeffs; // regularization center (hypothesis coeffs)
    int n = 0;
    Eigen::MatrixXd hyp_anchors, adv_anchors;
    KernelSpec hyp_kernel, adv_kernel;
    bool anchors_subsampled = false;

    int hyp_dim() const { return static_cast<int>(hyp_gram.rows()); }
    int adv_dim() const { return static_cast<int>(adv_gram.rows()); }
};

namespace detail {

inline Eigen::MatrixXd unique_then_subsample(const Eigen::MatrixXd& pts, int max_anchors,
                                             std::uint64_t seed, bool& subsampled) {
    std::vector<long> keep;
    std::unordered_set<std::string> seen;
    for (long i = 0; i < pts.rows(); ++i) {
        const Eigen::RowVectorXd row = pts.row(i); // contiguous copy for a stable byte key
        std::string key(reinterpret_cast<const char*>(row.data()), sizeof(double) * row.size());
        if (seen.insert(std::move(key)).second) keep.push_back(i);
        if (static_cast<int>(keep.size()) > 4 * max_anchors) break; // plenty to subsample from
    }
    subsampled = false;
    if (static_cast<int>(keep.size()) > max_anchors) {
        // deterministic uniform subsample without replacement
        Rng rng(derive_seed(seed, 0xA17C0125u));
        for (size_t i = keep.size() - 1; i > 0; --i)
            std::swap(keep[i], keep[rng.uniform_index(i + 1)]);
        keep.resize(max_anchors);
        std::sort(keep.begin(), keep.end());
        subsampled = true;
    }
    Eigen::MatrixXd out(static_cast<long>(keep.size()), pts.cols());
    for (size_t i = 0; i < keep.size(); ++i) out.row(static_cast<long>(i)) = pts.row(keep[i]);
    return out;
}

inline Eigen::VectorXd solve_psd(const Eigen::MatrixXd& s, const Eigen::VectorXd& b,
                                 const char* what) {
    double jit = default_jitter(s);
    for (int attempt = 0; attempt < 3; ++attempt) {
        Eigen::MatrixXd sj = s;
        sj.diagonal().array() += jit;
        Eigen::LDLT<Eigen::MatrixXd> ldlt(sj);
        if (ldlt.info() == Eigen::Success) {
            Eigen::VectorXd x = ldlt.solve(b);
            if (x.allFinite()) return x;
        }
        jit *= 10.0;
    }
    throw IllConditionedError(what);
}

inline Eigen::MatrixXd solve_psd_multi(const Eigen::MatrixXd& s, const Eigen::MatrixXd& b,
                                       const char* what) {
    double jit = default_jitter(s);
    for (int attempt = 0; attempt < 3; ++attempt) {
        Eigen::MatrixXd sj = s;
        sj.diagonal().array() += jit;
        Eigen::LDLT<Eigen::MatrixXd> ldlt(sj);
        if (ldlt.info() == Eigen::Success) {
            Eigen::MatrixXd x = ldlt.solve(b);
            if (x.allFinite()) return x;
        }
        jit *= 10.0;
    }
    throw IllConditionedError(what);
}

// Smallest nonnegative multiplier on a geometric grid (bisection-refined) for
// which `feasible` holds; feasibility must be monotone in the multiplier.
// Hitting the top of the standard grid escalates geometrically and reports a
// boundary flag.
template <class Feasible>
inline std::pair<double, bool> multiplier_line_search(const Feasible& feasible) {
    if (feasible(0.0)) return {0.0, false};
    constexpr int grid_points = 25;
    const double lo_exp = -8.0, hi_exp = 4.0;
    double prev = 0.0;
    double found = -1.0;
    bool boundary = false;
    for (int g = 0; g < grid_points; ++g) {
        const double mu = std::pow(10.0, lo_exp + (hi_exp - lo_exp) * g / (grid_points - 1.0));
        if (feasible(mu)) {
            found = mu;
            break;
        }
        prev = mu;
    }
    if (found < 0.0) {
        boundary = true;
        for (double mu = std::pow(10.0, hi_exp + 1.0); mu <= 1e16; mu *= 10.0) {
            if (feasible(mu)) {
                found = mu;
                break;
            }
            prev = mu;
        }
        if (found < 0.0) return {1e16, true};
    }
    double lo = prev, hi = found;
    for (int b = 0; b < 40; ++b) {
        const double mid = 0.5 * (lo + hi);
        if (feasible(mid)) hi = mid;
        else lo = mid;
    }
    return {hi, boundary};
}

} // namespace detail

// Assembles the finite saddle problem.  The hypothesis lives on one data
// block and the adversary on the other; the moment must pair with the
// adversary block.  Anchors are the deduplicated sample points (exact by the
// representer property), uniformly subsampled past max_anchors as a flagged
// speed knob.
inline SaddleProblem build_saddle(const Dataset& data, Block hyp_block, KernelSpec hyp_kernel,
                                  KernelSpec adv_kernel, const MomentFunctional& m,
                                  int max_anchors = 2000) {
    require(m.arg_block != hyp_block, "moment must pair with the adversary block");
    const Eigen::MatrixXd& hyp_pts = hyp_block == Block::x ? data.x : data.z;
    const Eigen::MatrixXd& adv_pts = hyp_block == Block::x ? data.z : data.x;

    SaddleProblem p;
    p.n = data.n();
    p.hyp_kernel = resolve_bandwidth(hyp_kernel, hyp_pts);
    p.adv_kernel = resolve_bandwidth(adv_kernel, adv_pts);
    bool sub_h = false, sub_f = false;
    p.hyp_anchors = detail::unique_then_subsample(hyp_pts, max_anchors, data.seed, sub_h);
    p.adv_anchors = detail::unique_then_subsample(adv_pts, max_anchors, data.seed + 1, sub_f);
    p.anchors_subsampled = sub_h || sub_f;

    const Eigen::MatrixXd phi = gram(p.hyp_kernel, hyp_pts, p.hyp_anchors);
    const Eigen::MatrixXd psi = gram(p.adv_kernel, adv_pts, p.adv_anchors);
    p.hyp_gram = symmetric_gram(p.hyp_kernel, p.hyp_anchors);
    p.adv_gram = symmetric_gram(p.adv_kernel, p.adv_anchors);
    p.hyp_second = phi.transpose() * phi / p.n;
    p.adv_second = psi.transpose() * psi / p.n;
    p.cross_eval = phi.transpose() * psi / p.n;
    p.moment_vec = moment_vector(m, data, p.adv_kernel, p.adv_anchors);
    p.center_coeffs = Eigen::VectorXd::Zero(p.hyp_dim());
    return p;
}

// The dual problem: hypothesis over the z block, adversary over the x block,
// moment m_tilde paired against the x-side kernel sections.  Downstream fits
// apply unchanged.
inline SaddleProblem dualize(const Dataset& data, KernelSpec hyp_kernel_z, KernelSpec adv_kernel_x,
                             const MomentFunctional& m_tilde, int max_anchors = 2000) {
    return build_saddle(data, Block::z, hyp_kernel_z, adv_kernel_x, m_tilde, max_anchors);
}

struct InnerSolution {
    Eigen::VectorXd adv_coeffs;
    double value = 0.0;
    double multiplier = 0.0;
    bool grid_exhausted = false;
};

// Ball-constrained concave quadratic in the adversary coefficients:
//   max_gamma 2 gamma'c1 - gamma'M gamma  s.t.  gamma'K_F gamma <= B
// solved by the scalar-multiplier line search.
inline InnerSolution inner_max(const SaddleProblem& p, const Eigen::VectorXd& h_coeffs, double b) {
    require(b > 0.0, "adversary norm bound must be positive");
    require(h_coeffs.size() == p.hyp_dim(), "hypothesis coefficient dimension mismatch");
    const Eigen::VectorXd c1 = p.moment_vec - p.cross_eval.transpose() * h_coeffs;

    InnerSolution sol;
    Eigen::VectorXd gamma_at;
    auto feasible = [&](double mu) {
        Eigen::MatrixXd a = p.adv_second + mu * p.adv_gram;
        gamma_at = detail::solve_psd(a, c1, "ill-conditioned adversary system");
        return gamma_at.dot(p.adv_gram * gamma_at) <= b * (1.0 + 1e-9);
    };
    auto [mu, exhausted] = detail::multiplier_line_search(feasible);
    feasible(mu); // recompute gamma at the returned multiplier
    sol.adv_coeffs = gamma_at;
    sol.multiplier = mu;
    sol.grid_exhausted = exhausted;
    sol.value = 2.0 * c1.dot(gamma_at) - gamma_at.dot(p.adv_second * gamma_at);
    if (sol.value < 0.0 && sol.value > -1e-9) sol.value = 0.0; // zero adversary is feasible
    return sol;
}

inline double empirical_loss(const SaddleProblem& p, const Eigen::VectorXd& h_coeffs, double b) {
    return inner_max(p, h_coeffs, b).value;
}

struct IterRecord {
    int iterate = 0;
    int alternation = 0;
    double inner_value = 0.0;
    double inner_multiplier = 0.0;
    double objective = 0.0;
};

struct Diagnostics {
    bool hyp_ball_active = false;
    bool adv_ball_active = false;
    bool version_active = false;
    bool multiplier_grid_exhausted = false;
    bool anchors_subsampled = false;
    double hyp_multiplier = 0.0;
    double version_multiplier = 0.0;
    int alternations = 0;
    double lambda_used = 0.0;
    int t_used = 1;
    double mu_n_used = 0.0;
    double delta_used = 0.0;
    double loss_gap = 0.0; // L_n(h_hat) - loss_min when a version space was used
};

struct FitResult {
    RepresentedFunction h_hat;
    std::vector<IterRecord> inner_history;
    double loss_empirical = 0.0;
    double loss_min = std::numeric_limits<double>::quiet_NaN();
    Eigen::VectorXd final_center; // regularization center of the last iterate
    Diagnostics diagnostics;
};

struct SaddleNonConvergence : NonConvergenceError {
    explicit SaddleNonConvergence(const std::string& msg, FitResult last_fit)
        : NonConvergenceError(msg), last(std::move(last_fit)) {}
    FitResult last;
};

namespace detail {

struct RegularizedSolveResult {
    Eigen::VectorXd coeffs;
    double objective = 0.0;
    double inner_value = 0.0;
    double inner_multiplier = 0.0;
    bool hyp_ball_active = false;
    bool adv_ball_active = false;
    bool version_active = false;
    bool grid_exhausted = false;
    double hyp_multiplier = 0.0;
    double version_multiplier = 0.0;
    int alternations = 0;
    std::vector<IterRecord> history;
};

// One regularized outer solve:
//   min_{beta in ball [, L_n(beta) <= loss_cap]} L_n(beta) + lambda |beta - center|^2_N
// by alternating exact inner maximization with exact minimization of the
// multiplier-frozen quadratic; both objectives are convex quadratics, so the
// alternation is a fixed-point iteration on the scalar multipliers only.
inline RegularizedSolveResult solve_regularized(const SaddleProblem& p, double lambda, double b,
                                                const Eigen::VectorXd& center,
                                                std::optional<double> loss_cap, int iterate_idx) {
    RegularizedSolveResult res;
    const int dh = p.hyp_dim();
    Eigen::VectorXd beta = center.size() ? center : Eigen::VectorXd::Zero(dh);
    if (!beta.size()) beta = Eigen::VectorXd::Zero(dh);

    const Eigen::VectorXd nc = lambda > 0.0 && center.size()
                                   ? Eigen::VectorXd(p.hyp_second * center)
                                   : Eigen::VectorXd::Zero(dh);

    double prev_obj = std::numeric_limits<double>::infinity();
    constexpr int max_alternations = 200;
    for (int it = 0; it < max_alternations; ++it) {
        InnerSolution inner = inner_max(p, beta, b);
        res.adv_ball_active = res.adv_ball_active || inner.multiplier > 0.0;
        res.grid_exhausted = res.grid_exhausted || inner.grid_exhausted;

        // freeze the adversary multiplier and minimize the resulting quadratic
        Eigen::MatrixXd a = p.adv_second + inner.multiplier * p.adv_gram;
        Eigen::MatrixXd rhs(p.adv_dim(), dh + 1);
        rhs.col(0) = p.moment_vec;
        rhs.rightCols(dh) = p.cross_eval.transpose();
        const Eigen::MatrixXd ainv_rhs =
            solve_psd_multi(a, rhs, "ill-conditioned adversary system");
        const Eigen::VectorXd g = p.cross_eval * ainv_rhs.col(0);     // C A^{-1} v
        const Eigen::MatrixXd gq = p.cross_eval * ainv_rhs.rightCols(dh); // C A^{-1} C'

        Eigen::VectorXd beta_cand;
        double nu_used = 0.0;
        bool version_active = false;

        auto outer_solve = [&](double nu, double mu_h) {
            Eigen::MatrixXd s = (1.0 + nu) * gq + lambda * p.hyp_second + mu_h * p.hyp_gram;
            s = ((s + s.transpose()) / 2.0).eval();
            const Eigen::VectorXd rhs_b = (1.0 + nu) * g + lambda * nc;
            return solve_psd(s, rhs_b, "ill-conditioned hypothesis system");
        };
        auto ball_search = [&](double nu) {
            Eigen::VectorXd local;
            auto feas = [&](double mu_h) {
                local = outer_solve(nu, mu_h);
                return local.dot(p.hyp_gram * local) <= b * (1.0 + 1e-9);
            };
            auto [mu_h, exhausted] = multiplier_line_search(feas);
            feas(mu_h);
            res.grid_exhausted = res.grid_exhausted || exhausted;
            res.hyp_ball_active = res.hyp_ball_active || mu_h > 0.0;
            res.hyp_multiplier = mu_h;
            return local;
        };

        if (!loss_cap) {
            beta_cand = ball_search(0.0);
        } else {
            auto version_feasible = [&](double nu) {
                beta_cand = ball_search(nu);
                return empirical_loss(p, beta_cand, b) <=
                       *loss_cap + 1e-12 + std::abs(*loss_cap) * 1e-9;
            };
            if (version_feasible(0.0)) {
                nu_used = 0.0;
            } else {
                auto [nu, boundary] = multiplier_line_search(version_feasible);
                res.grid_exhausted = res.grid_exhausted || boundary;
                if (!version_feasible(nu))
                    throw InfeasibleError("version space empty; increase mu_mult");
                nu_used = nu;
                version_active = true;
            }
        }
        beta = beta_cand;
        res.coeffs = beta;
        res.version_active = res.version_active || version_active;
        res.version_multiplier = nu_used;

        InnerSolution post = inner_max(p, beta, b);
        Eigen::VectorXd dev = beta - (center.size() ? center : Eigen::VectorXd::Zero(dh));
        const double obj = post.value + lambda * dev.dot(p.hyp_second * dev);
        res.history.push_back({iterate_idx, it, post.value, post.multiplier, obj});
        res.inner_value = post.value;
        res.inner_multiplier = post.multiplier;
        res.objective = obj;
        res.alternations = it + 1;
        if (std::abs(obj - prev_obj) < 1e-8) return res;
        prev_obj = obj;
    }
    throw SaddleNonConvergence("saddle solve did not converge",
                               FitResult{RepresentedFunction{p.hyp_anchors, beta, p.hyp_kernel, 0.0},
                                         res.history, res.inner_value,
                                         std::numeric_limits<double>::quiet_NaN(),
                                         center.size() ? center : Eigen::VectorXd::Zero(dh),
                                         Diagnostics{}});
}

} // namespace detail

inline FitResult fit(const SaddleProblem& problem, const EstimatorConfig& config) {
    EstimatorConfig cfg = config;
    Schedule sched;
    sched.delta = cfg.delta_proxy > 0.0 ? cfg.delta_proxy : 1.0 / std::sqrt(problem.n);
    if (cfg.auto_schedule && (cfg.lambda <= 0.0 || cfg.t_iters <= 0)) {
        sched = schedule_hyperparams(problem.n, cfg.beta_assumed, cfg.gamma_smooth, cfg.mode,
                                     cfg.paper_literal_schedule, cfg.delta_proxy, cfg.mu_mult);
        if (cfg.lambda <= 0.0) cfg.lambda = sched.lambda;
        if (cfg.t_iters <= 0) cfg.t_iters = sched.t_iters;
    } else if (cfg.t_iters <= 0) {
        cfg.t_iters = 1;
    }
    require(cfg.lambda > 0.0, "lambda must be positive");
    const bool iterated = cfg.mode == FitMode::iterated || cfg.mode == FitMode::constrained_iterated;
    if (iterated) require(cfg.lambda <= 1.0, "iterated modes need lambda <= 1");
    else require(cfg.lambda < 2.0, "plain mode needs lambda < 2");
    if (!iterated) cfg.t_iters = 1;
    require(cfg.t_iters >= 1, "iteration count must be at least 1");

    const bool constrained =
        cfg.mode == FitMode::constrained || cfg.mode == FitMode::constrained_iterated;

    FitResult out;
    Diagnostics& diag = out.diagnostics;
    diag.lambda_used = cfg.lambda;
    diag.t_used = cfg.t_iters;
    diag.delta_used = sched.delta;
    diag.anchors_subsampled = problem.anchors_subsampled;

    double loss_min = std::numeric_limits<double>::quiet_NaN();
    if (constrained) {
        // unregularized minimum over the ball defines the version space
        auto base = detail::solve_regularized(problem, 0.0, cfg.norm_bound,
                                              Eigen::VectorXd::Zero(problem.hyp_dim()),
                                              std::nullopt, 0);
        loss_min = base.inner_value;
        out.loss_min = loss_min;
    }

    Eigen::VectorXd center = problem.center_coeffs.size()
                                 ? problem.center_coeffs
                                 : Eigen::VectorXd::Zero(problem.hyp_dim());
    detail::RegularizedSolveResult last;
    Eigen::VectorXd last_center = center;
    for (int t = 1; t <= cfg.t_iters; ++t) {
        std::optional<double> cap;
        if (constrained) {
            const double mu_t =
                cfg.mu_mult * std::max(sched.delta * sched.delta,
                                       std::pow(cfg.lambda, std::min(cfg.beta_assumed + 1.0,
                                                                     2.0 * t)));
            cap = loss_min + mu_t;
            diag.mu_n_used = mu_t;
        }
        try {
            last = detail::solve_regularized(problem, cfg.lambda, cfg.norm_bound, center, cap, t);
        } catch (SaddleNonConvergence& e) {
            throw SaddleNonConvergence("saddle solve did not converge at iterate " +
                                           std::to_string(t),
                                       std::move(e.last));
        }
        last_center = center;
        center = last.coeffs;
        for (const auto& rec : last.history) out.inner_history.push_back(rec);
        diag.hyp_ball_active = diag.hyp_ball_active || last.hyp_ball_active;
        diag.adv_ball_active = diag.adv_ball_active || last.adv_ball_active;
        diag.version_active = diag.version_active || last.version_active;
        diag.multiplier_grid_exhausted = diag.multiplier_grid_exhausted || last.grid_exhausted;
        diag.hyp_multiplier = last.hyp_multiplier;
        diag.version_multiplier = last.version_multiplier;
        diag.alternations += last.alternations;
    }

    out.h_hat = RepresentedFunction{problem.hyp_anchors, last.coeffs, problem.hyp_kernel, 0.0};
    out.loss_empirical = last.inner_value;
    out.final_center = last_center;
    if (constrained) diag.loss_gap = out.loss_empirical - loss_min;
    return out;
}

inline FitResult fit_tikhonov(const SaddleProblem& p, EstimatorConfig cfg) {
    cfg.mode = FitMode::plain;
    return fit(p, cfg);
}

inline FitResult fit_iterated(const SaddleProblem& p, EstimatorConfig cfg) {
    cfg.mode = FitMode::iterated;
    return fit(p, cfg);
}

inline FitResult fit_constrained(const SaddleProblem& p, EstimatorConfig cfg) {
    if (cfg.mode != FitMode::constrained_iterated) cfg.mode = FitMode::constrained;
    return fit(p, cfg);
}

// First-order saddle certificate: no feasible hypothesis perturbation may
// decrease the regularized objective, and no feasible adversary perturbation
// may increase the inner objective, beyond the stated tolerance.
inline bool saddle_certificate(const SaddleProblem& p, const EstimatorConfig& cfg,
                               const FitResult& fit_res, std::uint64_t seed, int n_dirs = 10,
                               double step = 1e-3, double tol = 1e-6) {
    const double lambda = fit_res.diagnostics.lambda_used;
    const double b = cfg.norm_bound;
    const Eigen::VectorXd& beta = fit_res.h_hat.coeffs;
    // the final iterate solves the criterion centered at the previous one
    Eigen::VectorXd center = fit_res.final_center.size()
                                 ? fit_res.final_center
                                 : Eigen::VectorXd::Zero(beta.size());

    auto objective = [&](const Eigen::VectorXd& bc) {
        Eigen::VectorXd dev = bc - center;
        return empirical_loss(p, bc, b) + lambda * dev.dot(p.hyp_second * dev);
    };
    const double base = objective(beta);
    const double cap_slack = std::isnan(fit_res.loss_min)
                                 ? std::numeric_limits<double>::infinity()
                                 : fit_res.loss_min + fit_res.diagnostics.mu_n_used;

    Rng rng(seed);
    for (int d = 0; d < n_dirs; ++d) {
        Eigen::VectorXd dir(beta.size());
        for (int i = 0; i < dir.size(); ++i) dir[i] = rng.normal();
        dir.normalize();
        for (double sgn : {1.0, -1.0}) {
            Eigen::VectorXd cand = beta + sgn * step * dir;
            if (cand.dot(p.hyp_gram * cand) > b) continue; // infeasible direction
            if (empirical_loss(p, cand, b) > cap_slack * (1.0 + 1e-6) + 1e-12) continue;
            if (objective(cand) < base - tol) return false;
        }
    }

    // adversary side at the returned hypothesis
    InnerSolution inner = inner_max(p, beta, b);
    const Eigen::VectorXd c1 = p.moment_vec - p.cross_eval.transpose() * beta;
    auto inner_obj = [&](const Eigen::VectorXd& g) {
        return 2.0 * c1.dot(g) - g.dot(p.adv_second * g);
    };
    const double inner_base = inner_obj(inner.adv_coeffs);
    for (int d = 0; d < n_dirs; ++d) {
        Eigen::VectorXd dir(inner.adv_coeffs.size());
        for (int i = 0; i < dir.size(); ++i) dir[i] = rng.normal();
        dir.normalize();
        for (double sgn : {1.0, -1.0}) {
            Eigen::VectorXd cand = inner.adv_coeffs + sgn * step * dir;
            if (cand.dot(p.adv_gram * cand) > b) continue;
            if (inner_obj(cand) > inner_base + tol) return false;
        }
    }
    return true;
}

inline nlohmann::json fit_to_json(const FitResult& f) {
    nlohmann::json j;
    j["h_hat"] = represented_to_json(f.h_hat);
    j["loss_empirical"] = f.loss_empirical;
    if (std::isnan(f.loss_min)) j["loss_min"] = nullptr;
    else j["loss_min"] = f.loss_min;
    auto hist = nlohmann::json::array();
    for (const auto& r : f.inner_history)
        hist.push_back({{"iterate", r.iterate},
                        {"alternation", r.alternation},
                        {"inner_value", r.inner_value},
                        {"inner_multiplier", r.inner_multiplier},
                        {"objective", r.objective}});
    j["inner_history"] = hist;
    const Diagnostics& d = f.diagnostics;
    j["diagnostics"] = {{"hyp_ball_active", d.hyp_ball_active},
                        {"adv_ball_active", d.adv_ball_active},
                        {"version_active", d.version_active},
                        {"multiplier_grid_exhausted", d.multiplier_grid_exhausted},
                        {"anchors_subsampled", d.anchors_subsampled},
                        {"hyp_multiplier", d.hyp_multiplier},
                        {"version_multiplier", d.version_multiplier},
                        {"alternations", d.alternations},
                        {"lambda", d.lambda_used},
                        {"t_iters", d.t_used},
                        {"mu_n", d.mu_n_used},
                        {"delta", d.delta_used},
                        {"loss_gap", d.loss_gap}};
    return j;
}

} // namespace drip::estimator

#endif
