#ifndef DRIP_INFERENCE_HPP
#define DRIP_INFERENCE_HPP

// Debiased functional inference: cross-fit nuisances, the doubly robust
// score, influence-function variance, and the 95% confidence interval.
//
//   theta_hat = E_n[ m_tilde(W; h_hat) + m(W; q_hat) - q_hat(Z) h_hat(X) ]
//   sigma_hat^2 = E_n[ (score - theta_hat)^2 ],   CI = theta_hat +- 1.96 sigma_hat / sqrt(n)

#include <cmath>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "drip/data.hpp"
#include "drip/dgp.hpp"
#include "drip/estimator.hpp"
#include "drip/kernels.hpp"
#include "drip/rng.hpp"

namespace drip::inference {

inline constexpr const char* kSchemaVersion = "1";
inline constexpr double kNormalQuantile975 = 1.96;

struct InferenceConfig {
    estimator::EstimatorConfig primal;
    estimator::EstimatorConfig dual;
    KernelSpec kernel_x; // hypothesis kernel for h, adversary kernel for q
    KernelSpec kernel_z; // hypothesis kernel for q, adversary kernel for f
    int folds = 2;
    std::uint64_t seed = 0;
    double ci_scale = 1.0; // diagnostic knob; 1 is the honest interval
};

struct FoldReport {
    int fold = 0;
    double theta_fold = 0.0;
    int held_out = 0;
    estimator::Diagnostics primal_diag, dual_diag;
};

struct NuisanceErrors {
    double strong_primal_sq = 0.0, weak_primal_sq = 0.0;
    double strong_dual_sq = 0.0, weak_dual_sq = 0.0;
};

struct InferenceReport {
    double theta_hat = 0.0;
    double sigma_hat = 0.0;
    double ci_low = 0.0, ci_high = 0.0;
    int n = 0;
    int folds = 0;
    std::vector<FoldReport> per_fold;
    std::optional<bool> covered;
    std::optional<NuisanceErrors> nuisance_errors;
};

// Empirical doubly robust score average for fixed nuisance evaluators.
template <class HFn, class QFn>
double theta_plugin(const HFn& h, const QFn& q, const Dataset& data, const MomentFunctional& m,
                    const MomentFunctional& m_tilde) {
    double s = 0.0;
    for (int i = 0; i < data.n(); ++i) {
        const double hx = h(Eigen::RowVectorXd(data.x.row(i)));
        const double qz = q(Eigen::RowVectorXd(data.z.row(i)));
        s += m_tilde.eval_sample(data, i, h) + m.eval_sample(data, i, q) - hx * qz;
    }
    return s / data.n();
}

// (strong^2, weak^2) nuisance error through the exact metric evaluators.
inline std::pair<double, double> nuisance_error_report(const estimator::FitResult& fit,
                                                       const dgp::GroundTruth& truth,
                                                       bool primal_side) {
    const RepresentedFunction f = fit.h_hat;
    dgp::Fn eval = [f](const Eigen::RowVectorXd& r) { return f(r); };
    if (primal_side) return {truth.strong_primal_sq(eval), truth.weak_primal_sq(eval)};
    return {truth.strong_dual_sq(eval), truth.weak_dual_sq(eval)};
}

inline std::vector<std::vector<int>> fold_partition(int n, int folds, std::uint64_t seed) {
    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    Rng rng(derive_seed(seed, 0xF01D));
    for (int i = n - 1; i > 0; --i)
        std::swap(perm[i], perm[rng.uniform_index(static_cast<std::uint64_t>(i) + 1)]);
    std::vector<std::vector<int>> out(folds);
    for (int i = 0; i < n; ++i) out[i % folds].push_back(perm[i]);
    return out;
}

// Cross-fit debiased inference.  Nuisances are fit on each fold's complement
// and the score is evaluated on the held-out fold only; a fold failure aborts
// the whole call (partial inference would be misleading).
inline InferenceReport cross_fit_infer(const Dataset& data, const MomentFunctional& m,
                                       const MomentFunctional& m_tilde, const InferenceConfig& cfg,
                                       const dgp::GroundTruth* truth = nullptr) {
    const int n = data.n();
    require(cfg.folds >= 2, "cross-fitting needs at least 2 folds (nuisances on a separate sample)");
    require(n >= 10 * cfg.folds, "need at least 10 observations per fold");

    const auto folds = fold_partition(n, cfg.folds, cfg.seed);
    std::vector<double> scores(n, 0.0);
    InferenceReport rep;
    rep.n = n;
    rep.folds = cfg.folds;

    NuisanceErrors errs{};
    for (int k = 0; k < cfg.folds; ++k) {
        std::vector<int> train;
        train.reserve(n - folds[k].size());
        for (int j = 0; j < cfg.folds; ++j)
            if (j != k) train.insert(train.end(), folds[j].begin(), folds[j].end());
        std::sort(train.begin(), train.end());
        const Dataset fit_data = data.subset(train);

        estimator::FitResult h_fit, q_fit;
        try {
            auto primal = estimator::build_saddle(fit_data, Block::x, cfg.kernel_x, cfg.kernel_z,
                                                  m, cfg.primal.max_anchors);
            h_fit = estimator::fit(primal, cfg.primal);
            auto dual = estimator::dualize(fit_data, cfg.kernel_z, cfg.kernel_x, m_tilde,
                                           cfg.dual.max_anchors);
            q_fit = estimator::fit(dual, cfg.dual);
        } catch (const std::exception& e) {
            throw std::runtime_error("fold " + std::to_string(k) + " fit failed: " + e.what());
        }

        const RepresentedFunction h = h_fit.h_hat;
        const RepresentedFunction q = q_fit.h_hat;
        double fold_sum = 0.0;
        for (int idx : folds[k]) {
            const double hx = h(Eigen::RowVectorXd(data.x.row(idx)));
            const double qz = q(Eigen::RowVectorXd(data.z.row(idx)));
            const double sc = m_tilde.eval_sample(data, idx, h) + m.eval_sample(data, idx, q) -
                              hx * qz;
            scores[idx] = sc;
            fold_sum += sc;
        }

        FoldReport fr;
        fr.fold = k;
        fr.held_out = static_cast<int>(folds[k].size());
        fr.theta_fold = fold_sum / fr.held_out;
        fr.primal_diag = h_fit.diagnostics;
        fr.dual_diag = q_fit.diagnostics;
        rep.per_fold.push_back(fr);

        if (truth) {
            auto [sp, wp] = nuisance_error_report(h_fit, *truth, true);
            auto [sd, wd] = nuisance_error_report(q_fit, *truth, false);
            errs.strong_primal_sq += sp / cfg.folds;
            errs.weak_primal_sq += wp / cfg.folds;
            errs.strong_dual_sq += sd / cfg.folds;
            errs.weak_dual_sq += wd / cfg.folds;
        }
    }

    double mean = 0.0;
    for (double s : scores) mean += s;
    mean /= n;
    double var = 0.0;
    for (double s : scores) var += (s - mean) * (s - mean);
    var /= n;

    rep.theta_hat = mean;
    rep.sigma_hat = std::sqrt(var) * cfg.ci_scale;
    const double half = kNormalQuantile975 * rep.sigma_hat / std::sqrt(static_cast<double>(n));
    rep.ci_low = mean - half;
    rep.ci_high = mean + half;
    if (truth) {
        rep.covered = (truth->theta0 >= rep.ci_low && truth->theta0 <= rep.ci_high);
        rep.nuisance_errors = errs;
    }
    return rep;
}

inline nlohmann::json report_to_json(const InferenceReport& r) {
    nlohmann::json j;
    j["schema_version"] = kSchemaVersion;
    j["theta_hat"] = r.theta_hat;
    j["sigma_hat"] = r.sigma_hat;
    j["ci_low"] = r.ci_low;
    j["ci_high"] = r.ci_high;
    j["n"] = r.n;
    j["folds"] = r.folds;
    auto pf = nlohmann::json::array();
    for (const auto& f : r.per_fold)
        pf.push_back({{"fold", f.fold},
                      {"theta_fold", f.theta_fold},
                      {"held_out", f.held_out},
                      {"primal_lambda", f.primal_diag.lambda_used},
                      {"dual_lambda", f.dual_diag.lambda_used},
                      {"primal_alternations", f.primal_diag.alternations},
                      {"dual_alternations", f.dual_diag.alternations}});
    j["per_fold"] = pf;
    if (r.covered) j["covered"] = *r.covered;
    else j["covered"] = nullptr;
    if (r.nuisance_errors) {
        j["nuisance_errors"] = {{"strong_primal_sq", r.nuisance_errors->strong_primal_sq},
                                {"weak_primal_sq", r.nuisance_errors->weak_primal_sq},
                                {"strong_dual_sq", r.nuisance_errors->strong_dual_sq},
                                {"weak_dual_sq", r.nuisance_errors->weak_dual_sq}};
    } else {
        j["nuisance_errors"] = nullptr;
    }
    return j;
}

} // namespace drip::inference

#endif
