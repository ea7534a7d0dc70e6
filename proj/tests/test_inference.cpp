#include <catch_amalgamated.hpp>

#include <drip/dgp.hpp>
#include <drip/inference.hpp>
#include <drip/rng.hpp>

using namespace drip;
using namespace drip::inference;
using Catch::Approx;

namespace {

KernelSpec delta_kernel() { return {KernelFamily::discrete_delta, 1.0, 2, 1}; }

dgp::DiscreteTruth simple_truth(std::uint64_t seed, int k = 4) {
    Rng rng(seed);
    dgp::DiscreteDGP d;
    d.pz.resize(k);
    for (int z = 0; z < k; ++z) d.pz[z] = 0.5 + rng.u01();
    d.pz /= d.pz.sum();
    d.cond_xz.resize(k, k);
    for (int z = 0; z < k; ++z) {
        for (int x = 0; x < k; ++x) d.cond_xz(x, z) = 0.2 + rng.u01() + 1.2 * (x == z);
        d.cond_xz.col(z) /= d.cond_xz.col(z).sum();
    }
    d.outcome_xz.resize(k, 1);
    for (int x = 0; x < k; ++x) d.outcome_xz(x, 0) = rng.uniform(-0.5, 0.5);
    d.noise_eta = 0.2;
    d.omega.resize(k);
    for (int x = 0; x < k; ++x) d.omega[x] = rng.uniform(-1.0, 1.0);
    return dgp::discrete_ground_truth(d);
}

InferenceConfig discrete_config(std::uint64_t seed) {
    InferenceConfig cfg;
    cfg.kernel_x = delta_kernel();
    cfg.kernel_z = delta_kernel();
    cfg.folds = 2;
    cfg.seed = seed;
    cfg.primal.beta_assumed = 1.0;
    cfg.dual.beta_assumed = 1.0;
    return cfg;
}

} // namespace

TEST_CASE("population doubly robust value is exact at the truth and robust to one side") {
    auto t = simple_truth(31);
    CHECK(t.theta_of(t.h0, t.q0) == Approx(t.theta0).margin(1e-12));

    Rng rng(4);
    for (int trial = 0; trial < 25; ++trial) {
        Eigen::VectorXd h(t.px.size()), q(t.pz.size());
        for (int i = 0; i < h.size(); ++i) h[i] = rng.uniform(-1, 1);
        for (int i = 0; i < q.size(); ++i) q[i] = rng.uniform(-1, 1);
        // one true nuisance suffices
        CHECK(t.theta_of(h, t.q0) == Approx(t.theta0).margin(1e-12));
        CHECK(t.theta_of(t.h0, q) == Approx(t.theta0).margin(1e-12));
        // mixed bias factorization
        CHECK(t.theta_of(h, q) - t.theta0 == Approx(t.mixed_bias(h, q)).margin(1e-12));
    }
}

TEST_CASE("theta invariance across primal solutions under a rank-deficient operator") {
    dgp::DiscreteDGP d;
    d.pz = Eigen::VectorXd::Constant(2, 0.5);
    d.cond_xz.resize(3, 2);
    d.cond_xz << 0.6, 0.2, 0.3, 0.5, 0.1, 0.3;
    d.outcome_xz = (Eigen::VectorXd(3) << 0.4, -0.2, 0.1).finished();
    // a0 in the range of the adjoint: use the image of some q
    dgp::DiscreteDGP probe = d;
    probe.omega = Eigen::VectorXd::Zero(3);
    auto t0 = dgp::discrete_ground_truth(probe);
    d.omega = t0.apply_adjoint((Eigen::VectorXd(2) << 0.8, -0.3).finished());
    auto t = dgp::discrete_ground_truth(d);

    // two distinct exact solutions: h0 plus a null-space direction
    const Eigen::VectorXd null_dir = t.v_basis.col(2);
    const Eigen::VectorXd h1 = t.h0;
    const Eigen::VectorXd h2 = t.h0 + 0.7 * null_dir;
    CHECK((t.apply_op(h2) - t.r0).cwiseAbs().maxCoeff() < 1e-10);
    CHECK(t.theta_of(h1, t.q0) == Approx(t.theta_of(h2, t.q0)).margin(1e-12));
}

TEST_CASE("empirical theta_plugin matches direct enumeration") {
    auto t = simple_truth(7);
    auto data = t.sample(200, 3);
    auto truth = t.truth();

    auto m = t.moment_m();
    auto mt = t.moment_m_tilde();
    const double v = theta_plugin(truth.h0_eval, truth.q0_eval, data, m, mt);

    double direct = 0.0;
    for (int i = 0; i < data.n(); ++i) {
        const double hx = truth.h0_eval(data.x.row(i));
        const double qz = truth.q0_eval(data.z.row(i));
        const double om = t.dgp.omega[t.x_index(data.x.row(i))];
        direct += om * hx + data.column("y")[i] * qz - hx * qz;
    }
    direct /= data.n();
    CHECK(v == Approx(direct).margin(1e-12));
}

TEST_CASE("cross-fit inference covers on a well-behaved discrete problem") {
    auto t = simple_truth(11);
    auto truth = t.truth();
    auto data = t.sample(2000, 11);
    auto rep = cross_fit_infer(data, t.moment_m(), t.moment_m_tilde(), discrete_config(11), &truth);

    CHECK(rep.n == 2000);
    CHECK(rep.folds == 2);
    CHECK(rep.ci_low <= rep.theta_hat);
    CHECK(rep.theta_hat <= rep.ci_high);
    CHECK(rep.ci_high - rep.ci_low ==
          Approx(2 * 1.96 * rep.sigma_hat / std::sqrt(2000.0)).margin(1e-12));
    CHECK(std::abs(rep.theta_hat - truth.theta0) <= 4.0 * rep.sigma_hat / std::sqrt(2000.0));
    CHECK(rep.covered.has_value());
    REQUIRE(rep.nuisance_errors.has_value());
    CHECK(rep.nuisance_errors->weak_primal_sq <=
          rep.nuisance_errors->strong_primal_sq + 1e-12);
    CHECK(rep.per_fold.size() == 2);

    auto j = report_to_json(rep);
    CHECK(j["schema_version"] == "1");
    CHECK(j["theta_hat"].get<double>() == rep.theta_hat);
    CHECK(j["per_fold"].size() == 2);
}

TEST_CASE("degenerate functional: q0 = 0 and the CI covers zero") {
    dgp::DiscreteDGP d = simple_truth(13).dgp;
    d.omega = Eigen::VectorXd::Zero(d.kx());
    auto t = dgp::discrete_ground_truth(d);
    CHECK(t.q0.cwiseAbs().maxCoeff() < 1e-12);
    CHECK(t.theta0 == 0.0);

    auto truth = t.truth();
    int covered = 0;
    const int reps = 100;
    for (int r = 0; r < reps; ++r) {
        auto data = t.sample(400, 1000 + r);
        auto rep =
            cross_fit_infer(data, t.moment_m(), t.moment_m_tilde(), discrete_config(r), &truth);
        if (rep.ci_low <= 0.0 && 0.0 <= rep.ci_high) ++covered;
    }
    CHECK(covered >= 90);
}

TEST_CASE("single fold is rejected") {
    auto t = simple_truth(17);
    auto data = t.sample(100, 1);
    auto cfg = discrete_config(1);
    cfg.folds = 1;
    CHECK_THROWS_AS(cross_fit_infer(data, t.moment_m(), t.moment_m_tilde(), cfg, nullptr),
                    std::invalid_argument);
}

TEST_CASE("nuisance error report is zero at the truth and ordered") {
    auto t = simple_truth(23);
    auto truth = t.truth();
    Eigen::MatrixXd anchors = t.dgp.x_states;
    estimator::FitResult fake;
    fake.h_hat = RepresentedFunction{anchors, t.h0, delta_kernel(), 0.0};
    auto [s, w] = nuisance_error_report(fake, truth, true);
    CHECK(s == Approx(0.0).margin(1e-14));
    CHECK(w == Approx(0.0).margin(1e-14));

    Rng rng(5);
    for (int trial = 0; trial < 10; ++trial) {
        Eigen::VectorXd c(anchors.rows());
        for (int i = 0; i < c.size(); ++i) c[i] = rng.uniform(-1, 1);
        fake.h_hat.coeffs = c;
        auto [ss, ww] = nuisance_error_report(fake, truth, true);
        CHECK(ww <= ss + 1e-12); // operator is a contraction
    }
}

TEST_CASE("score centering: pooled residuals average to zero") {
    auto t = simple_truth(29);
    auto truth = t.truth();
    auto data = t.sample(600, 2);
    auto rep = cross_fit_infer(data, t.moment_m(), t.moment_m_tilde(), discrete_config(2), &truth);
    double pooled = 0.0;
    int total = 0;
    for (const auto& f : rep.per_fold) {
        pooled += f.theta_fold * f.held_out;
        total += f.held_out;
    }
    CHECK(total == 600);
    CHECK(pooled / total == Approx(rep.theta_hat).margin(1e-12));
}

TEST_CASE("ci width shrinks roughly as root-n") {
    auto t = simple_truth(37);
    auto truth = t.truth();
    double w_small = 0.0, w_big = 0.0;
    const int reps = 12;
    for (int r = 0; r < reps; ++r) {
        auto d1 = t.sample(500, 40 + r);
        auto d2 = t.sample(2000, 400 + r);
        w_small += cross_fit_infer(d1, t.moment_m(), t.moment_m_tilde(), discrete_config(r), &truth)
                       .sigma_hat /
                   std::sqrt(500.0);
        w_big += cross_fit_infer(d2, t.moment_m(), t.moment_m_tilde(), discrete_config(r), &truth)
                     .sigma_hat /
                 std::sqrt(2000.0);
    }
    const double width_ratio = w_small / w_big;
    CHECK(width_ratio > 1.6);
    CHECK(width_ratio < 2.6);
}

TEST_CASE("cross-fit inference on the continuous gaussian pair") {
    dgp::GaussianPairSpec spec;
    spec.rho = 0.8;
    spec.beta = 1.0;
    spec.w = (Eigen::VectorXd(3) << 0.2, 1.0, 0.4).finished();
    spec.beta_q = 1.0;
    spec.w_q = (Eigen::VectorXd(3) << 0.3, 0.8, 0.3).finished();
    spec.noise_eta = 0.15;
    auto model = dgp::make_gaussian_pair(spec);
    auto data = model.sample(500, 29);

    InferenceConfig cfg;
    cfg.kernel_x = {KernelFamily::gaussian, 0.0, 2, 1};
    cfg.kernel_z = {KernelFamily::gaussian, 0.0, 2, 1};
    cfg.folds = 2;
    cfg.seed = 3;
    cfg.primal.beta_assumed = 1.0;
    cfg.dual.beta_assumed = 1.0;
    auto rep = cross_fit_infer(data, model.m, model.m_tilde, cfg, &model.truth);
    // loose sanity: the debiased estimate lands within a few interval widths
    CHECK(std::abs(rep.theta_hat - model.truth.theta0) <=
          6.0 * rep.sigma_hat / std::sqrt(500.0) + 0.05);
}

TEST_CASE("proximal bridge inference end to end") {
    dgp::ProximalSpec spec;
    spec.seed = 12;
    spec.noise_eta = 0.1;
    auto model = dgp::make_proximal_model(spec);
    const auto& t = model.truth;
    auto truth = t.truth();

    int covered = 0;
    const int reps = 30;
    for (int r = 0; r < reps; ++r) {
        auto data = t.sample(1200, 900 + r);
        InferenceConfig cfg = discrete_config(r);
        auto rep = cross_fit_infer(data, t.moment_m(), t.moment_m_tilde(), cfg, &truth);
        if (rep.covered.value_or(false)) ++covered;
    }
    CHECK(covered >= 24); // 80% of a nominal-95 interval at modest n
}
