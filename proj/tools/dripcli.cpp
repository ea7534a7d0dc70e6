// Command-line front end: simulate / fit / infer / coverage / rates /
// source-dr / curves / oracle-check.  Configs are TOML (JSON accepted);
// experiment outputs land in one directory per run.

#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include <drip/config.hpp>
#include <drip/csv.hpp>
#include <drip/data.hpp>
#include <drip/estimator.hpp>
#include <drip/harness.hpp>
#include <drip/inference.hpp>

namespace {

using drip::Json;

struct GlobalArgs {
    std::string config_path;
    std::string out_dir = "out";
    std::uint64_t seed = 0;
    bool seed_set = false;
    int jobs = 0;
};

Json load_and_override(const GlobalArgs& g) {
    Json cfg = g.config_path.empty() ? Json::object() : drip::load_config(g.config_path);
    if (g.seed_set) cfg["base_seed"] = g.seed;
    if (g.jobs > 0) cfg["jobs"] = g.jobs;
    return cfg;
}

drip::Dataset load_dataset(const std::string& path) {
    return drip::dataset_from_csv(drip::read_csv(path));
}

int run_fit(const GlobalArgs& g, const std::string& data_path, const std::string& side,
            const std::string& out_file) {
    const Json cfg = load_and_override(g);
    const drip::Dataset data = load_dataset(data_path);
    auto est = drip::harness::estimator_from_config(cfg.value("estimator", Json::object()));
    auto kern_x = drip::harness::kernel_from_config(
        cfg.value("kernels", Json::object()).value("x", Json::object()));
    auto kern_z = drip::harness::kernel_from_config(
        cfg.value("kernels", Json::object()).value("z", Json::object()));

    drip::estimator::SaddleProblem problem;
    if (side == "dual") {
        auto m_tilde = drip::harness::functional_from_config(
            cfg.value("functional", Json::object()), drip::Block::x);
        problem = drip::estimator::dualize(data, kern_z, kern_x, m_tilde, est.max_anchors);
    } else {
        auto m = drip::harness::functional_from_config(cfg.value("moment", Json::object()),
                                                       drip::Block::z);
        problem = drip::estimator::build_saddle(data, drip::Block::x, kern_x, kern_z, m,
                                                est.max_anchors);
    }
    auto res = drip::estimator::fit(problem, est);
    drip::harness::write_text(out_file, drip::estimator::fit_to_json(res).dump(2) + "\n");
    std::cout << "wrote " << out_file << "\n";
    return 0;
}

int run_infer(const GlobalArgs& g, const std::string& data_path, const std::string& out_file) {
    const Json cfg = load_and_override(g);
    const drip::Dataset data = load_dataset(data_path);

    drip::MomentFunctional m, m_tilde;
    drip::inference::InferenceConfig inf_cfg;
    const drip::dgp::GroundTruth* truth = nullptr;
    drip::dgp::GroundTruth truth_store;
    if (cfg.contains("dgp")) {
        auto bundle = drip::harness::problem_from_config(cfg.at("dgp"));
        m = bundle.m;
        m_tilde = bundle.m_tilde;
        inf_cfg = drip::harness::inference_from_config(cfg, bundle);
        truth_store = bundle.truth;
        truth = &truth_store;
    } else {
        m = drip::harness::functional_from_config(cfg.value("moment", Json::object()),
                                                  drip::Block::z);
        m_tilde = drip::harness::functional_from_config(cfg.value("functional", Json::object()),
                                                        drip::Block::x);
        drip::harness::ProblemBundle shim;
        shim.kernel_x = drip::harness::kernel_from_config(
            cfg.value("kernels", Json::object()).value("x", Json::object()));
        shim.kernel_z = drip::harness::kernel_from_config(
            cfg.value("kernels", Json::object()).value("z", Json::object()));
        inf_cfg = drip::harness::inference_from_config(cfg, shim);
    }
    inf_cfg.seed = cfg.value("base_seed", 1);
    auto rep = drip::inference::cross_fit_infer(data, m, m_tilde, inf_cfg, truth);
    drip::harness::write_text(out_file, drip::inference::report_to_json(rep).dump(2) + "\n");
    std::cout << "wrote " << out_file << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"source-condition doubly robust inference for linear inverse problems"};
    app.require_subcommand(1);

    GlobalArgs g;
    app.add_option("--config", g.config_path, "config file (TOML or JSON)");
    app.add_option("--out", g.out_dir, "output directory");
    auto* seed_opt = app.add_option("--seed", g.seed, "base seed override");
    app.add_option("--jobs", g.jobs, "worker threads for replications");

    auto* sim = app.add_subcommand("simulate", "draw a dataset and write CSV + metadata");
    auto* fit = app.add_subcommand("fit", "fit one nuisance on a dataset CSV");
    std::string data_path, side = "primal", out_file;
    fit->add_option("--data", data_path, "dataset CSV")->required();
    fit->add_option("--side", side, "primal or dual");
    auto* infer = app.add_subcommand("infer", "cross-fit debiased inference on a dataset CSV");
    infer->add_option("--data", data_path, "dataset CSV");
    auto* coverage = app.add_subcommand("coverage", "Monte Carlo coverage study");
    auto* rates = app.add_subcommand("rates", "error-vs-n rate study");
    std::string metric = "strong", rate_side = "primal";
    rates->add_option("--metric", metric, "strong or weak");
    rates->add_option("--side", rate_side, "primal or dual");
    auto* source_dr = app.add_subcommand("source-dr", "hidden well-posed side study");
    auto* curves = app.add_subcommand("curves", "rate-exponent curves CSV");
    auto* oracle = app.add_subcommand("oracle-check", "spectral oracle self-checks");

    CLI11_PARSE(app, argc, argv);
    g.seed_set = seed_opt->count() > 0;

    try {
        if (sim->parsed()) {
            drip::harness::run_simulate(load_and_override(g), g.out_dir);
            std::cout << "wrote " << g.out_dir << "\n";
            return 0;
        }
        if (fit->parsed()) {
            if (out_file.empty()) out_file = g.out_dir + "/fit.json";
            return run_fit(g, data_path, side, out_file);
        }
        if (infer->parsed()) {
            if (data_path.empty()) throw std::invalid_argument("infer needs --data");
            if (out_file.empty()) out_file = g.out_dir + "/inference.json";
            return run_infer(g, data_path, out_file);
        }
        if (coverage->parsed()) {
            const Json cfg = load_and_override(g);
            auto bundle = drip::harness::problem_from_config(cfg.value("dgp", Json::object()));
            auto sum = drip::harness::run_coverage(bundle, cfg, g.out_dir);
            std::cout << "coverage " << sum.coverage << " width " << sum.mean_ci_width
                      << " failures " << sum.failures << "\n";
            return 0;
        }
        if (rates->parsed()) {
            const Json cfg = load_and_override(g);
            auto bundle = drip::harness::problem_from_config(cfg.value("dgp", Json::object()));
            auto rate = drip::harness::run_rate_study(bundle, cfg, metric, rate_side, g.out_dir);
            std::cout << "slope " << rate.slope << " r2 " << rate.r_squared << "\n";
            return 0;
        }
        if (source_dr->parsed()) {
            const Json cfg = load_and_override(g);
            auto sum = drip::harness::run_source_dr_study(cfg, g.out_dir);
            std::cout << "constrained coverage: primal-wellposed "
                      << sum.coverage_constrained_primal_wellposed << ", dual-wellposed "
                      << sum.coverage_constrained_dual_wellposed << "\n"
                      << "plain coverage:       primal-wellposed "
                      << sum.coverage_plain_primal_wellposed << ", dual-wellposed "
                      << sum.coverage_plain_dual_wellposed << "\n";
            return 0;
        }
        if (curves->parsed()) {
            drip::harness::run_curves(load_and_override(g), g.out_dir);
            std::cout << "wrote " << g.out_dir << "/curves.csv\n";
            return 0;
        }
        if (oracle->parsed()) {
            auto sum = drip::harness::run_oracle_check(load_and_override(g), g.out_dir);
            std::cout << "max filter deviation " << sum.max_filter_deviation
                      << ", bias violations " << sum.bias_violations << ", "
                      << (sum.pass ? "pass" : "FAIL") << "\n";
            return sum.pass ? 0 : 1;
        }
    } catch (const drip::NonConvergenceError& e) {
        std::cerr << "non-convergence: " << e.what() << "\n";
        return 2;
    } catch (const drip::InfeasibleError& e) {
        std::cerr << "infeasible: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
