#ifndef DRIP_HARNESS_HPP
#define DRIP_HARNESS_HPP

// Experiment runner: simulate -> fit -> infer pipelines, replication loops
// for coverage and rate studies, and CSV/JSON emission.  Every experiment
// writes one directory: config.resolved.json, replications.csv, summary.json.
// Replications are independent, seeded by (base_seed, r) only, and may run in
// a worker pool; emission is ordered by replication index so outputs are
// byte-identical for a fixed config.

#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "drip/common.hpp"
#include "drip/config.hpp"
#include "drip/csv.hpp"
#include "drip/dgp.hpp"
#include "drip/estimator.hpp"
#include "drip/inference.hpp"
#include "drip/spectral.hpp"

namespace drip::harness {

using Json = nlohmann::json;

// ---------------------------------------------------------------------------
// Config-driven problem construction

struct ProblemBundle {
    std::function<Dataset(int, std::uint64_t)> sample;
    dgp::GroundTruth truth;
    MomentFunctional m, m_tilde;
    KernelSpec kernel_x, kernel_z;
    std::optional<dgp::DiscreteTruth> discrete;
};

namespace detail {

inline Eigen::VectorXd json_vector(const Json& j) {
    const auto v = j.get<std::vector<double>>();
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<long>(v.size()));
}

inline ProblemBundle bundle_from_discrete(dgp::DiscreteTruth t) {
    ProblemBundle b;
    b.truth = t.truth();
    b.m = t.moment_m();
    b.m_tilde = t.moment_m_tilde();
    b.kernel_x = {KernelFamily::discrete_delta, 1.0, 2, static_cast<int>(t.dgp.x_states.cols())};
    b.kernel_z = {KernelFamily::discrete_delta, 1.0, 2, static_cast<int>(t.dgp.z_states.cols())};
    auto shared = std::make_shared<dgp::DiscreteTruth>(std::move(t));
    b.sample = [shared](int n, std::uint64_t seed) { return shared->sample(n, seed); };
    b.discrete = *shared;
    return b;
}

} // namespace detail

// Builds the synthetic problem named by the [dgp] table.
inline ProblemBundle problem_from_config(const Json& dgp_cfg) {
    const std::string kind = dgp_cfg.value("kind", "spectral_table");
    if (kind == "spectral_table") {
        dgp::SpectralTableSpec spec;
        spec.sigma = detail::json_vector(dgp_cfg.at("sigma"));
        spec.beta_h = dgp_cfg.value("beta_h", 1.0);
        spec.beta_q = dgp_cfg.value("beta_q", 1.0);
        const int k = static_cast<int>(spec.sigma.size());
        spec.w_h = dgp_cfg.contains("w_h") ? detail::json_vector(dgp_cfg.at("w_h"))
                                           : Eigen::VectorXd::Ones(k).eval();
        spec.w_q = dgp_cfg.contains("w_q") ? detail::json_vector(dgp_cfg.at("w_q"))
                                           : Eigen::VectorXd::Ones(k).eval();
        spec.noise_eta = dgp_cfg.value("noise_eta", 0.2);
        spec.h_max = dgp_cfg.value("h_max", 0.75);
        return detail::bundle_from_discrete(
            dgp::discrete_ground_truth(dgp::make_spectral_table_dgp(spec)));
    }
    if (kind == "random_table") {
        Rng rng(dgp_cfg.value("table_seed", 1));
        const int kx = dgp_cfg.value("k_x", 4), kz = dgp_cfg.value("k_z", 4);
        dgp::DiscreteDGP d;
        d.pz.resize(kz);
        for (int z = 0; z < kz; ++z) d.pz[z] = 0.5 + rng.u01();
        d.pz /= d.pz.sum();
        d.cond_xz.resize(kx, kz);
        const double diag_boost = dgp_cfg.value("diag_boost", 1.0);
        for (int z = 0; z < kz; ++z) {
            for (int x = 0; x < kx; ++x)
                d.cond_xz(x, z) = 0.2 + rng.u01() + diag_boost * (x == z % kx);
            d.cond_xz.col(z) /= d.cond_xz.col(z).sum();
        }
        d.outcome_xz.resize(kx, 1);
        for (int x = 0; x < kx; ++x) d.outcome_xz(x, 0) = rng.uniform(-0.5, 0.5);
        d.noise_eta = dgp_cfg.value("noise_eta", 0.2);
        const std::string omega = dgp_cfg.value("omega", "random");
        if (omega == "random") {
            d.omega.resize(kx);
            for (int x = 0; x < kx; ++x) d.omega[x] = rng.uniform(-1.0, 1.0);
        }
        return detail::bundle_from_discrete(dgp::discrete_ground_truth(d));
    }
    if (kind == "proximal") {
        dgp::ProximalSpec spec;
        spec.n_u = dgp_cfg.value("n_u", 2);
        spec.n_q = dgp_cfg.value("n_q", 2);
        spec.n_z = dgp_cfg.value("n_z", 2);
        spec.seed = dgp_cfg.value("seed", 3);
        spec.null_effect = dgp_cfg.value("null_effect", false);
        spec.noise_eta = dgp_cfg.value("noise_eta", 0.1);
        spec.proxy_strength = dgp_cfg.value("proxy_strength", 0.35);
        return detail::bundle_from_discrete(dgp::make_proximal_model(spec).truth);
    }
    if (kind == "gaussian_pair") {
        dgp::GaussianPairSpec spec;
        spec.rho = dgp_cfg.value("rho", 0.9);
        spec.beta = dgp_cfg.value("beta_h", 1.0);
        spec.beta_q = dgp_cfg.value("beta_q", 1.0);
        if (dgp_cfg.contains("w_h")) spec.w = detail::json_vector(dgp_cfg.at("w_h"));
        else spec.w = (Eigen::VectorXd(4) << 0.0, 1.0, 0.6, 0.3).finished();
        if (dgp_cfg.contains("w_q")) spec.w_q = detail::json_vector(dgp_cfg.at("w_q"));
        spec.noise_eta = dgp_cfg.value("noise_eta", 0.2);
        spec.derivative_functional = dgp_cfg.value("derivative_functional", false);
        auto model = std::make_shared<dgp::GaussianPairModel>(dgp::make_gaussian_pair(spec));
        ProblemBundle b;
        b.truth = model->truth;
        b.m = model->m;
        b.m_tilde = model->m_tilde;
        b.kernel_x = {KernelFamily::gaussian, dgp_cfg.value("bandwidth", 0.0), 2, 1};
        b.kernel_z = b.kernel_x;
        b.sample = [model](int n, std::uint64_t seed) { return model->sample(n, seed); };
        return b;
    }
    throw std::invalid_argument("unknown dgp kind: " + kind);
}

inline KernelSpec kernel_from_config(const Json& j) {
    KernelSpec k;
    k.family = kernel_family_from_name(j.value("family", "gaussian"));
    k.bandwidth = j.value("bandwidth", 0.0); // gaussian default: median heuristic
    k.degree = j.value("degree", 2);
    return k;
}

// Standalone moment functionals for datasets that arrive without a synthetic
// model attached (fit/infer on a raw CSV).
inline MomentFunctional functional_from_config(const Json& j, Block arg_block) {
    MomentFunctional mf;
    mf.arg_block = arg_block;
    const std::string kind = j.value("kind", "outcome_product");
    if (kind == "outcome_product") {
        mf.kind = MomentKind::outcome_product;
        mf.outcome = j.value("outcome", "y");
    } else if (kind == "weighted_average") {
        mf.kind = MomentKind::weighted_average; // unit weight
    } else if (kind == "eval_difference") {
        mf.kind = MomentKind::eval_difference;
        const int col = j.value("shift_column", 0);
        mf.shift1.assignments = {{col, j.value("shift_value_1", 1.0)}};
        mf.shift0.assignments = {{col, j.value("shift_value_0", 0.0)}};
    } else if (kind == "avg_derivative") {
        mf.kind = MomentKind::avg_derivative;
        mf.deriv_coord = j.value("deriv_coord", 0);
    } else {
        throw std::invalid_argument("unknown functional kind: " + kind);
    }
    return mf;
}

inline estimator::EstimatorConfig estimator_from_config(const Json& j) {
    estimator::EstimatorConfig c;
    c.mode = estimator::fit_mode_from_name(j.value("mode", "plain"));
    c.lambda = j.value("lambda", 0.0);
    c.t_iters = j.value("t_iters", 0);
    c.mu_mult = j.value("mu_mult", 2.0);
    c.norm_bound = j.value("norm_bound", 100.0);
    c.delta_proxy = j.value("delta_proxy", 0.0);
    c.beta_assumed = j.value("beta_assumed", 1.0);
    c.gamma_smooth = j.value("gamma_smooth", 0.0);
    c.auto_schedule = j.value("schedule", "auto") != "manual";
    c.paper_literal_schedule = j.value("paper_literal_schedule", false);
    c.max_anchors = j.value("max_anchors", 2000);
    return c;
}

inline inference::InferenceConfig inference_from_config(const Json& root,
                                                        const ProblemBundle& bundle) {
    inference::InferenceConfig cfg;
    const Json est = root.value("estimator", Json::object());
    cfg.primal = estimator_from_config(est);
    cfg.dual = estimator_from_config(est);
    if (root.contains("estimator_primal")) {
        Json merged = est;
        merged.update(root.at("estimator_primal"));
        cfg.primal = estimator_from_config(merged);
    }
    if (root.contains("estimator_dual")) {
        Json merged = est;
        merged.update(root.at("estimator_dual"));
        cfg.dual = estimator_from_config(merged);
    }
    const Json inf = root.value("inference", Json::object());
    cfg.folds = inf.value("folds", 2);
    cfg.ci_scale = inf.value("ci_scale", 1.0);
    cfg.kernel_x = bundle.kernel_x;
    cfg.kernel_z = bundle.kernel_z;
    return cfg;
}

// ---------------------------------------------------------------------------
// Replication machinery

template <class Fn>
inline void parallel_for(int jobs, int count, const Fn& body) {
    jobs = std::max(1, jobs);
    if (jobs == 1) {
        for (int i = 0; i < count; ++i) body(i);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    pool.reserve(jobs);
    for (int w = 0; w < jobs; ++w)
        pool.emplace_back([&] {
            for (int i = next.fetch_add(1); i < count; i = next.fetch_add(1)) body(i);
        });
    for (auto& th : pool) th.join();
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    std::filesystem::create_directories(path.parent_path());
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for writing: " + path.string());
    f << text;
}

inline void emit_config(const Json& resolved, const std::filesystem::path& dir) {
    Json out = resolved;
    out.erase("jobs"); // execution detail; must not alter artifacts or their hash
    out["config_hash"] = fnv1a64(out.dump());
    write_text(dir / "config.resolved.json", out.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Coverage study

struct CoverageSummary {
    double coverage = 0.0;
    double mean_ci_width = 0.0;
    double mean_abs_error = 0.0;
    int replications = 0;
    int failures = 0;
    std::vector<inference::InferenceReport> reports;
};

inline CoverageSummary run_coverage(const ProblemBundle& bundle, const Json& cfg,
                                    const std::string& out_dir = "") {
    const int reps = cfg.value("replications", 100);
    const int n = cfg.value("n", 2000);
    const std::uint64_t base_seed = cfg.value("base_seed", 1);
    const int jobs = cfg.value("jobs", 1);
    require(reps >= 1, "replications must be >= 1");

    const auto inf_cfg = inference_from_config(cfg, bundle);
    struct Row {
        bool ok = false;
        std::string error;
        inference::InferenceReport rep;
        std::uint64_t seed = 0;
    };
    std::vector<Row> rows(reps);
    parallel_for(jobs, reps, [&](int r) {
        Row& row = rows[r];
        row.seed = base_seed + static_cast<std::uint64_t>(r);
        try {
            const Dataset data = bundle.sample(n, row.seed);
            auto local = inf_cfg;
            local.seed = derive_seed(row.seed, 1);
            row.rep = inference::cross_fit_infer(data, bundle.m, bundle.m_tilde, local,
                                                 &bundle.truth);
            row.ok = true;
        } catch (const std::exception& e) {
            row.error = e.what();
        }
    });

    CoverageSummary sum;
    sum.replications = reps;
    CsvWriter csv({"rep", "seed", "theta_hat", "sigma_hat", "ci_low", "ci_high", "covered",
                   "abs_error", "status"});
    int ok_count = 0;
    for (int r = 0; r < reps; ++r) {
        const Row& row = rows[r];
        if (!row.ok) {
            ++sum.failures;
            csv.add_row({std::to_string(r), std::to_string(row.seed), "", "", "", "", "", "",
                         row.error});
            continue;
        }
        const auto& rep = row.rep;
        const bool cov = rep.covered.value_or(false);
        const double abs_err = std::abs(rep.theta_hat - bundle.truth.theta0);
        sum.coverage += cov ? 1.0 : 0.0;
        sum.mean_ci_width += rep.ci_high - rep.ci_low;
        sum.mean_abs_error += abs_err;
        ++ok_count;
        sum.reports.push_back(rep);
        csv.add_row({std::to_string(r), std::to_string(row.seed), format_double(rep.theta_hat),
                     format_double(rep.sigma_hat), format_double(rep.ci_low),
                     format_double(rep.ci_high), cov ? "1" : "0", format_double(abs_err), "ok"});
    }
    if (ok_count > 0) {
        sum.coverage /= ok_count;
        sum.mean_ci_width /= ok_count;
        sum.mean_abs_error /= ok_count;
    }

    if (!out_dir.empty()) {
        const std::filesystem::path dir(out_dir);
        std::filesystem::create_directories(dir);
        emit_config(cfg, dir);
        write_text(dir / "replications.csv", csv.str());
        Json s{{"coverage", sum.coverage},
               {"mean_ci_width", sum.mean_ci_width},
               {"mean_abs_error", sum.mean_abs_error},
               {"replications", sum.replications},
               {"failures", sum.failures},
               {"theta0", bundle.truth.theta0}};
        write_text(dir / "summary.json", s.dump(2) + "\n");
    }
    return sum;
}

// ---------------------------------------------------------------------------
// Rate study

struct RateFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
    std::vector<std::pair<int, double>> points; // (n, mean squared error)
};

inline RateFit fit_rate(const std::vector<std::pair<int, double>>& points) {
    require(points.size() >= 3, "rate fit needs at least 3 sizes");
    RateFit out;
    out.points = points;
    const int k = static_cast<int>(points.size());
    double mx = 0, my = 0;
    for (const auto& [n, e] : points) {
        require(e > 0.0, "rate fit needs positive errors");
        mx += std::log(static_cast<double>(n));
        my += std::log(e);
    }
    mx /= k;
    my /= k;
    double sxx = 0, sxy = 0, syy = 0;
    for (const auto& [n, e] : points) {
        const double dx = std::log(static_cast<double>(n)) - mx;
        const double dy = std::log(e) - my;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    require(sxx > 0.0, "rate fit is degenerate in n");
    out.slope = sxy / sxx;
    out.intercept = my - out.slope * mx;
    out.r_squared = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
    return out;
}

inline RateFit run_rate_study(const ProblemBundle& bundle, const Json& cfg,
                              const std::string& metric, const std::string& side,
                              const std::string& out_dir = "") {
    const auto n_grid = cfg.value("n_grid", std::vector<int>{500, 2000, 8000});
    const int reps = cfg.value("replications", 20);
    const std::uint64_t base_seed = cfg.value("base_seed", 1);
    const int jobs = cfg.value("jobs", 1);
    require(n_grid.size() >= 3, "n_grid needs at least 3 sizes");
    for (size_t i = 1; i < n_grid.size(); ++i)
        require(n_grid[i] > n_grid[i - 1], "n_grid must be strictly increasing");
    const bool primal_side = side != "dual";
    const bool strong = metric != "weak";

    const auto inf_cfg = inference_from_config(cfg, bundle);
    CsvWriter csv({"n", "rep", "seed", "error_sq", "status"});
    std::vector<std::pair<int, double>> points;
    for (int n : n_grid) {
        std::vector<double> errs(reps, std::numeric_limits<double>::quiet_NaN());
        std::vector<std::string> status(reps, "ok");
        parallel_for(jobs, reps, [&](int r) {
            const std::uint64_t seed = base_seed + static_cast<std::uint64_t>(r);
            try {
                const Dataset data = bundle.sample(n, derive_seed(seed, n));
                estimator::FitResult res;
                if (primal_side) {
                    auto p = estimator::build_saddle(data, Block::x, inf_cfg.kernel_x,
                                                     inf_cfg.kernel_z, bundle.m,
                                                     inf_cfg.primal.max_anchors);
                    res = estimator::fit(p, inf_cfg.primal);
                } else {
                    auto p = estimator::dualize(data, inf_cfg.kernel_z, inf_cfg.kernel_x,
                                                bundle.m_tilde, inf_cfg.dual.max_anchors);
                    res = estimator::fit(p, inf_cfg.dual);
                }
                const RepresentedFunction f = res.h_hat;
                dgp::Fn eval = [f](const Eigen::RowVectorXd& r2) { return f(r2); };
                if (primal_side)
                    errs[r] = strong ? bundle.truth.strong_primal_sq(eval)
                                     : bundle.truth.weak_primal_sq(eval);
                else
                    errs[r] = strong ? bundle.truth.strong_dual_sq(eval)
                                     : bundle.truth.weak_dual_sq(eval);
            } catch (const std::exception& e) {
                status[r] = e.what();
            }
        });
        double mean = 0.0;
        int ok = 0;
        for (int r = 0; r < reps; ++r) {
            const std::uint64_t seed = base_seed + static_cast<std::uint64_t>(r);
            if (status[r] == "ok") {
                mean += errs[r];
                ++ok;
                csv.add_row({std::to_string(n), std::to_string(r), std::to_string(seed),
                             format_double(errs[r]), "ok"});
            } else {
                csv.add_row({std::to_string(n), std::to_string(r), std::to_string(seed), "",
                             status[r]});
            }
        }
        require(ok > 0, "all replications failed at n = " + std::to_string(n));
        points.emplace_back(n, mean / ok);
    }

    RateFit rate = fit_rate(points);
    if (!out_dir.empty()) {
        const std::filesystem::path dir(out_dir);
        std::filesystem::create_directories(dir);
        emit_config(cfg, dir);
        write_text(dir / "replications.csv", csv.str());
        Json pts = Json::array();
        for (const auto& [n, e] : rate.points) pts.push_back({{"n", n}, {"mean_error_sq", e}});
        Json s{{"slope", rate.slope},
               {"intercept", rate.intercept},
               {"r_squared", rate.r_squared},
               {"metric", metric},
               {"side", side},
               {"points", pts}};
        write_text(dir / "summary.json", s.dump(2) + "\n");
    }
    return rate;
}

// ---------------------------------------------------------------------------
// Source-condition double robustness study

struct SourceDrSummary {
    double coverage_constrained_primal_wellposed = 0.0;
    double coverage_constrained_dual_wellposed = 0.0;
    double coverage_plain_primal_wellposed = 0.0;
    double coverage_plain_dual_wellposed = 0.0;
};

// Builds the two hidden-side scenarios from a shared spectrum: the well-posed
// side gets the w_well loadings, the ill-posed side the w_ill loadings (mid
// spectrum by default, where over-regularization is visible to the weak
// metric).  Which side is which is invisible to the estimator configs.
inline std::pair<ProblemBundle, ProblemBundle> source_dr_scenarios(const Json& dgp_cfg) {
    Json a = dgp_cfg;
    a["kind"] = "spectral_table";
    const double beta_well = dgp_cfg.value("beta_well", 3.0);
    const double beta_ill = dgp_cfg.value("beta_ill", 0.25);
    const Json w_well =
        dgp_cfg.value("w_well", Json::array({0.3, 0.8, 0.8, 0.6, 0.3, 0.1}));
    const Json w_ill = dgp_cfg.value("w_ill", Json::array({0.2, 0.4, 1.5, 2.5, 1.0, 0.3}));
    Json b = a;
    a["beta_h"] = beta_well;
    a["beta_q"] = beta_ill;
    a["w_h"] = w_well;
    a["w_q"] = w_ill;
    b["beta_h"] = beta_ill;
    b["beta_q"] = beta_well;
    b["w_h"] = w_ill;
    b["w_q"] = w_well;
    return {problem_from_config(a), problem_from_config(b)};
}

inline SourceDrSummary run_source_dr_study(const Json& cfg, const std::string& out_dir = "") {
    auto [primal_well, dual_well] = source_dr_scenarios(cfg.value("dgp", Json::object()));

    // constrained runs use one shared config for both nuisances; the control
    // is plain mode at the same strong-rate lambda, which over-regularizes
    // whichever side is secretly the ill-posed one
    const double beta_well = cfg.value("dgp", Json::object()).value("beta_well", 3.0);
    const int n = cfg.value("n", 4000);
    const double delta = 1.0 / std::sqrt(static_cast<double>(n));
    const double lam_strong = std::pow(delta, 2.0 / (beta_well + 1.0));

    Json constrained_cfg = cfg;
    constrained_cfg["estimator"] = cfg.value("estimator", Json::object());
    if (!constrained_cfg["estimator"].contains("mode"))
        constrained_cfg["estimator"]["mode"] = "constrained_iterated";
    if (!constrained_cfg["estimator"].contains("beta_assumed"))
        constrained_cfg["estimator"]["beta_assumed"] = beta_well;
    constrained_cfg.erase("estimator_primal");
    constrained_cfg.erase("estimator_dual");

    Json plain_cfg = constrained_cfg;
    plain_cfg["estimator"]["mode"] = "plain";
    plain_cfg["estimator"]["lambda"] = lam_strong;
    plain_cfg["estimator"]["schedule"] = "manual";

    SourceDrSummary out;
    const auto run = [&](const ProblemBundle& bundle, const Json& run_cfg,
                         const std::string& sub) {
        const std::string dir = out_dir.empty() ? "" : out_dir + "/" + sub;
        return run_coverage(bundle, run_cfg, dir).coverage;
    };
    out.coverage_constrained_primal_wellposed =
        run(primal_well, constrained_cfg, "constrained_primal_wellposed");
    out.coverage_constrained_dual_wellposed =
        run(dual_well, constrained_cfg, "constrained_dual_wellposed");
    out.coverage_plain_primal_wellposed = run(primal_well, plain_cfg, "plain_primal_wellposed");
    out.coverage_plain_dual_wellposed = run(dual_well, plain_cfg, "plain_dual_wellposed");

    if (!out_dir.empty()) {
        const std::filesystem::path dir(out_dir);
        std::filesystem::create_directories(dir);
        emit_config(cfg, dir);
        Json s{{"coverage_constrained_primal_wellposed", out.coverage_constrained_primal_wellposed},
               {"coverage_constrained_dual_wellposed", out.coverage_constrained_dual_wellposed},
               {"coverage_plain_primal_wellposed", out.coverage_plain_primal_wellposed},
               {"coverage_plain_dual_wellposed", out.coverage_plain_dual_wellposed}};
        write_text(dir / "summary.json", s.dump(2) + "\n");
    }
    return out;
}

// ---------------------------------------------------------------------------
// Rate-exponent curves

// One CSV row per beta: the required critical-radius exponents, the
// strong-metric exponent, and the two prior-curve baselines drawn alongside
// them (piecewise constrained-optimization baseline and the saturating
// single-step analysis min(beta,2)/(2+min(beta,2))).
inline CsvWriter emit_curves(const std::vector<double>& beta_grid, double gamma) {
    CsvWriter csv({"beta", "alpha_unknown", "alpha_known", "alpha_smooth", "kappa",
                   "kappa_constrained_baseline", "kappa_saturating_baseline"});
    for (double beta : beta_grid) {
        require(beta > 0.0, "beta grid must be positive");
        const auto r = spectral::rate_exponents(beta, gamma);
        const double kc = beta < 1.0 ? 0.0 : 1.0;
        const double bs = std::min(beta, 2.0);
        csv.add_row({format_double(beta), format_double(r.alpha_unknown_side),
                     format_double(r.alpha_known_side), format_double(r.alpha_smooth),
                     format_double(r.kappa_strong), format_double(kc),
                     format_double(bs / (2.0 + bs))});
    }
    return csv;
}

inline void run_curves(const Json& cfg, const std::string& out_dir) {
    std::vector<double> grid;
    if (cfg.contains("beta_grid")) grid = cfg.at("beta_grid").get<std::vector<double>>();
    else
        for (int i = 1; i <= 200; ++i) grid.push_back(0.05 * i);
    const double gamma = cfg.value("gamma", 0.0);
    auto csv = emit_curves(grid, gamma);
    const std::filesystem::path dir(out_dir);
    std::filesystem::create_directories(dir);
    emit_config(cfg, dir);
    write_text(dir / "curves.csv", csv.str());
    Json s{{"rows", grid.size()}, {"gamma", gamma}};
    write_text(dir / "summary.json", s.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Oracle self-check: closed-form filters vs the coordinate recursion, and the
// analytic bias bounds over the full grid.

struct OracleCheckSummary {
    double max_filter_deviation = 0.0;
    int bias_violations = 0;
    int checks = 0;
    bool pass = false;
};

inline OracleCheckSummary run_oracle_check(const Json& cfg, const std::string& out_dir = "") {
    OracleCheckSummary sum;
    const int instances = cfg.value("instances", 100);
    Rng rng(cfg.value("base_seed", 20240501));
    for (int i = 0; i < instances; ++i) {
        const int k = 2 + static_cast<int>(rng.uniform_index(199));
        Eigen::VectorXd sv(k), w(k);
        for (int j = 0; j < k; ++j) {
            sv[j] = rng.u01();
            w[j] = rng.normal();
        }
        std::sort(sv.data(), sv.data() + k, std::greater<>());
        spectral::SpectralOperator op{sv, spectral::BasisId::coordinate};
        auto src = spectral::make_source_solution(op, rng.uniform(0.0, 4.0), w);
        const double lambda = rng.uniform(1e-4, 1.0);
        const int t = 1 + static_cast<int>(rng.uniform_index(8));
        Eigen::VectorXd rec = Eigen::VectorXd::Zero(k);
        for (int it = 0; it < t; ++it) rec = spectral::tikhonov_recursion_step(op, src, lambda, rec);
        const Eigen::VectorXd closed = spectral::iterated_tikhonov_coefficients(op, src, lambda, t);
        sum.max_filter_deviation =
            std::max(sum.max_filter_deviation, (rec - closed).cwiseAbs().maxCoeff());
        ++sum.checks;
    }

    const int kdim = 150;
    Eigen::VectorXd sv(kdim);
    for (int i = 0; i < kdim; ++i) sv[i] = std::pow(0.94, i);
    spectral::SpectralOperator op{sv, spectral::BasisId::coordinate};
    for (double beta : {0.25, 0.5, 1.0, 2.0, 4.0}) {
        for (int rep = 0; rep < 4; ++rep) {
            Eigen::VectorXd w(kdim);
            for (int i = 0; i < kdim; ++i) w[i] = rng.normal();
            w.normalize();
            auto src = spectral::make_source_solution(op, beta, w);
            for (double lam : {1e-4, 1e-3, 1e-2, 1e-1, 1.0}) {
                for (int t : {1, 2, 4, 8}) {
                    const auto coef = spectral::iterated_tikhonov_coefficients(op, src, lam, t);
                    const auto [ss, ww] = spectral::bias_norms(op, src, coef);
                    if (ss > spectral::strong_bias_bound(src, lam, t)) ++sum.bias_violations;
                    if (ww > spectral::weak_bias_bound(src, lam, t)) ++sum.bias_violations;
                    ++sum.checks;
                }
            }
        }
    }
    sum.pass = sum.max_filter_deviation < 1e-12 && sum.bias_violations == 0;

    if (!out_dir.empty()) {
        const std::filesystem::path dir(out_dir);
        std::filesystem::create_directories(dir);
        emit_config(cfg, dir);
        Json s{{"max_filter_deviation", sum.max_filter_deviation},
               {"bias_violations", sum.bias_violations},
               {"checks", sum.checks},
               {"pass", sum.pass}};
        write_text(dir / "summary.json", s.dump(2) + "\n");
    }
    return sum;
}

// ---------------------------------------------------------------------------
// Dataset emission for the simulate subcommand

inline void run_simulate(const Json& cfg, const std::string& out_dir) {
    auto bundle = problem_from_config(cfg.value("dgp", Json::object()));
    const int n = cfg.value("n", 1000);
    const std::uint64_t seed = cfg.value("base_seed", 1);
    const Dataset data = bundle.sample(n, seed);
    const std::filesystem::path dir(out_dir);
    std::filesystem::create_directories(dir);
    emit_config(cfg, dir);
    write_text(dir / "data.csv", dataset_to_csv(data));
    Json meta{{"seed", seed},
              {"n", n},
              {"theta0", bundle.truth.theta0},
              {"beta_h", bundle.truth.beta_h},
              {"beta_q", bundle.truth.beta_q},
              {"config_hash", fnv1a64(cfg.dump())}};
    write_text(dir / "meta.json", meta.dump(2) + "\n");
}

} // namespace drip::harness

#endif
