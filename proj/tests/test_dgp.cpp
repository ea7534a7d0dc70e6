#include <catch_amalgamated.hpp>

#include <drip/dgp.hpp>
#include <drip/rng.hpp>

using namespace drip;
using namespace drip::dgp;
using Catch::Approx;

namespace {

DiscreteDGP random_positive_dgp(int kx, int kz, std::uint64_t seed) {
    Rng rng(seed);
    DiscreteDGP d;
    d.pz.resize(kz);
    for (int z = 0; z < kz; ++z) d.pz[z] = 0.4 + rng.u01();
    d.pz /= d.pz.sum();
    d.cond_xz.resize(kx, kz);
    for (int z = 0; z < kz; ++z) {
        for (int x = 0; x < kx; ++x) d.cond_xz(x, z) = 0.15 + rng.u01();
        d.cond_xz.col(z) /= d.cond_xz.col(z).sum();
    }
    d.outcome_xz.resize(kx, 1);
    for (int x = 0; x < kx; ++x) d.outcome_xz(x, 0) = rng.uniform(-0.5, 0.5);
    d.noise_eta = 0.2;
    d.omega.resize(kx);
    for (int x = 0; x < kx; ++x) d.omega[x] = rng.uniform(-1.0, 1.0);
    return d;
}

} // namespace

TEST_CASE("identity-supported operator gives back the outcome means") {
    DiscreteDGP d;
    d.pz = Eigen::VectorXd::Constant(2, 0.5);
    d.cond_xz = Eigen::MatrixXd::Identity(2, 2); // X = Z deterministically
    d.outcome_xz = (Eigen::VectorXd(2) << 0.2, -0.2).finished();
    d.noise_eta = 0.1;
    auto t = discrete_ground_truth(d);

    CHECK(t.h0[0] == Approx(0.2).margin(1e-12));
    CHECK(t.h0[1] == Approx(-0.2).margin(1e-12));
    // uniform-weight functional: a0 = 1, q0 = 1 in every coordinate
    CHECK(t.a0[0] == 1.0);
    CHECK(t.q0[0] == Approx(1.0).margin(1e-10));
    CHECK(t.q0[1] == Approx(1.0).margin(1e-10));
    CHECK(t.theta0 == Approx(0.0).margin(1e-12));
    CHECK(t.sigma[0] == Approx(1.0).margin(1e-12));
}

TEST_CASE("random 3x3 tables: theta0 by brute force and mixed-bias identity") {
    auto d = random_positive_dgp(3, 3, 7);
    auto t = discrete_ground_truth(d);

    // brute force: theta0 = sum_x P(x) omega(x) h0(x)
    double brute = 0.0;
    for (int x = 0; x < 3; ++x) brute += t.px[x] * d.omega[x] * t.h0[x];
    CHECK(t.theta0 == Approx(brute).margin(1e-12));

    // theta0 = E[m(W; q0)] two ways
    double via_r0 = 0.0;
    for (int z = 0; z < 3; ++z) via_r0 += t.pz[z] * t.r0[z] * t.q0[z];
    CHECK(t.theta0 == Approx(via_r0).margin(1e-11));

    // mixed bias identity for 100 random pairs
    Rng rng(17);
    for (int trial = 0; trial < 100; ++trial) {
        Eigen::VectorXd h(3), q(3);
        for (int i = 0; i < 3; ++i) {
            h[i] = rng.uniform(-1.0, 1.0);
            q[i] = rng.uniform(-1.0, 1.0);
        }
        const double lhs = t.theta_of(h, q) - t.theta0;
        const double rhs = -t.mixed_bias(h, q); // theta(h,q) - theta0 = E[(q0-q)(h-h0)]
        CHECK(lhs == Approx(t.mixed_bias(h, q)).margin(1e-12));
        (void)rhs;
    }
}

TEST_CASE("infeasible dual is reported") {
    // rank-deficient operator with weights on the null component
    DiscreteDGP d;
    d.pz = Eigen::VectorXd::Constant(2, 0.5);
    d.cond_xz.resize(3, 2);
    // both z states induce the same conditional: operator rank 1 on 3 x-states
    d.cond_xz << 0.5, 0.5, 0.3, 0.3, 0.2, 0.2;
    d.outcome_xz = (Eigen::VectorXd(3) << 0.1, 0.1, 0.1).finished();
    d.omega = (Eigen::VectorXd(3) << 1.0, -1.0, 0.5).finished(); // not in range(T*)
    CHECK_THROWS_WITH(discrete_ground_truth(d), Catch::Matchers::ContainsSubstring("dual solution"));
}

TEST_CASE("minimum-norm property: null-space perturbations only grow the norm") {
    DiscreteDGP d;
    d.pz = Eigen::VectorXd::Constant(2, 0.5);
    d.cond_xz.resize(3, 2);
    d.cond_xz << 0.6, 0.2, 0.3, 0.5, 0.1, 0.3;
    d.outcome_xz = (Eigen::VectorXd(3) << 0.4, -0.2, 0.1).finished();
    d.omega = Eigen::VectorXd::Zero(3); // a0 = 0 keeps the dual trivially solvable
    auto t = discrete_ground_truth(d);

    // null direction of the 2x3 operator
    Eigen::VectorXd null_dir = t.v_basis.col(2);
    for (double eps : {0.3, -0.4, 1.0}) {
        Eigen::VectorXd h = t.h0 + eps * null_dir;
        const Eigen::VectorXd lhs = t.apply_op(h);
        for (int z = 0; z < 2; ++z) CHECK(lhs[z] == Approx(t.r0[z]).margin(1e-10));
        double norm_h = 0.0, norm_h0 = 0.0;
        for (int x = 0; x < 3; ++x) {
            norm_h += t.px[x] * h[x] * h[x];
            norm_h0 += t.px[x] * t.h0[x] * t.h0[x];
        }
        CHECK(norm_h > norm_h0 + 1e-10);
    }
}

TEST_CASE("combined moment restrictions hold exactly on discrete supports") {
    auto d = random_positive_dgp(4, 5, 21);
    auto t = discrete_ground_truth(d);
    Rng rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        Eigen::VectorXd q(5), h(4);
        for (int i = 0; i < 5; ++i) q[i] = rng.normal();
        for (int i = 0; i < 4; ++i) h[i] = rng.normal();
        // E[m(W;q) - h0(X) q(Z)] = 0
        double resid = 0.0;
        for (int z = 0; z < 5; ++z) resid += t.pz[z] * t.r0[z] * q[z];
        for (int x = 0; x < 4; ++x)
            for (int z = 0; z < 5; ++z) resid -= t.joint(x, z) * t.h0[x] * q[z];
        CHECK(resid == Approx(0.0).margin(1e-12));
        // dual restriction E[m_tilde(W;h) - q0(Z) h(X)] = 0
        double dual_resid = t.functional_mean(h);
        for (int x = 0; x < 4; ++x)
            for (int z = 0; z < 5; ++z) dual_resid -= t.joint(x, z) * t.q0[z] * h[x];
        CHECK(dual_resid == Approx(0.0).margin(1e-12));
    }
}

TEST_CASE("sampling matches the population tables") {
    auto d = random_positive_dgp(3, 3, 5);
    auto t = discrete_ground_truth(d);
    const int n = 40000;
    auto data = t.sample(n, 99);
    CHECK(data.n() == n);
    // empirical z marginal close to pz
    Eigen::VectorXd freq = Eigen::VectorXd::Zero(3);
    for (int i = 0; i < n; ++i) freq[t.z_index(data.z.row(i))] += 1.0 / n;
    for (int z = 0; z < 3; ++z) CHECK(freq[z] == Approx(t.pz[z]).margin(0.02));
    // outcomes bounded and centered at the conditional means
    const auto& y = data.column("y");
    for (int i = 0; i < 20; ++i) CHECK(std::abs(y[i]) <= 1.0);
    // E_n[y f(z)] close to E[r0 f] for delta sections
    for (int z = 0; z < 3; ++z) {
        double emp = 0.0;
        for (int i = 0; i < n; ++i)
            if (t.z_index(data.z.row(i)) == z) emp += y[i];
        emp /= n;
        CHECK(emp == Approx(t.pz[z] * t.r0[z]).margin(0.02));
    }
}

TEST_CASE("spectral table construction hits the target spectrum") {
    SpectralTableSpec spec;
    spec.sigma = (Eigen::VectorXd(6) << 1.0, 0.8, 0.6, 0.4, 0.2, 0.0).finished();
    spec.beta_h = 1.0;
    spec.w_h = (Eigen::VectorXd(6) << 0.2, 1.0, 0.8, 0.6, 0.4, 0.0).finished();
    spec.beta_q = 1.0;
    spec.w_q = (Eigen::VectorXd(6) << 0.3, 0.9, 0.7, 0.5, 0.3, 0.0).finished();
    auto dgp = make_spectral_table_dgp(spec);
    auto t = discrete_ground_truth(dgp);
    for (int i = 0; i < 6; ++i) CHECK(t.sigma[i] == Approx(spec.sigma[i]).margin(1e-9));
    // uniform marginals by construction
    for (int x = 0; x < 6; ++x) CHECK(t.px[x] == Approx(1.0 / 6.0).margin(1e-12));
    // h0 has no weight on the null direction
    auto coords = t.coords_x(t.h0);
    CHECK(std::abs(coords[5]) < 1e-10);
    // outcome stays inside [-1, 1] with the noise
    CHECK(t.dgp.outcome_xz.cwiseAbs().maxCoeff() + dgp.noise_eta <= 1.0 + 1e-12);
}

TEST_CASE("exact metrics agree with Monte Carlo on random functions") {
    SpectralTableSpec spec;
    spec.sigma = (Eigen::VectorXd(4) << 1.0, 0.7, 0.5, 0.3).finished();
    spec.w_h = (Eigen::VectorXd(4) << 0.5, 1.0, 0.5, 0.25).finished();
    spec.w_q = (Eigen::VectorXd(4) << 0.5, 0.5, 0.5, 0.25).finished();
    auto t = discrete_ground_truth(make_spectral_table_dgp(spec));
    auto truth = t.truth();

    const int n = 200000;
    auto data = t.sample(n, 2024);
    Rng rng(8);
    for (int trial = 0; trial < 5; ++trial) {
        Eigen::VectorXd tab(4);
        for (int i = 0; i < 4; ++i) tab[i] = rng.uniform(-1.0, 1.0);
        Fn g = [&](const Eigen::RowVectorXd& r) { return tab[t.x_index(r)]; };
        const double exact = truth.norm_x_sq(g);
        double mc = 0.0, mc2 = 0.0;
        for (int i = 0; i < n; ++i) {
            const double v = g(data.x.row(i));
            mc += v * v;
            mc2 += v * v * v * v;
        }
        mc /= n;
        mc2 /= n;
        const double se = std::sqrt(std::max(mc2 - mc * mc, 0.0) / n);
        CHECK(std::abs(mc - exact) <= 3.0 * se + 1e-12);
    }
}

TEST_CASE("gaussian pair: spectrum, moment restriction, and metrics") {
    GaussianPairSpec spec;
    spec.rho = 0.9;
    spec.beta = 1.0;
    spec.w = (Eigen::VectorXd(6) << 0.0, 1.0, 0.5, 0.25, 0.1, 0.05).finished();
    auto model = make_gaussian_pair(spec);
    const auto& g = model.truth;

    // sigma_10 ratio between rho = 0.9 and rho = 0.5 constructions
    GaussianPairSpec s2 = spec;
    s2.rho = 0.5;
    auto m2 = make_gaussian_pair(s2);
    (void)m2;
    CHECK(std::pow(0.9, 10) / std::pow(0.5, 10) == Approx(std::pow(0.9 / 0.5, 10)));

    // beta = 0 with weight on one coordinate leaves that Hermite function
    GaussianPairSpec s0 = spec;
    s0.beta = 0.0;
    s0.w = (Eigen::VectorXd(3) << 0.0, 1.0, 0.0).finished();
    auto m0 = make_gaussian_pair(s0);
    const double xprobe = 0.73;
    Eigen::RowVectorXd row(1);
    row << squash(xprobe);
    CHECK(m0.truth.h0_eval(row) == Approx(m0.a_h[1] * xprobe).margin(1e-12));
    CHECK(m0.a_h[0] == 0.0);

    // E_n[Y f(Z)] vs quadrature E[r0(Z) f(Z)] for the first Hermite functions
    const int n = 1000;
    auto data = model.sample(n, 1);
    const GaussHermite quad(96);
    for (int k = 0; k < 5; ++k) {
        double emp = 0.0, emp2 = 0.0;
        for (int i = 0; i < n; ++i) {
            const double fz = hermite_fn(k, unsquash(data.z(i, 0)));
            const double v = data.column("y")[i] * fz;
            emp += v;
            emp2 += v * v;
        }
        emp /= n;
        emp2 /= n;
        const double se = std::sqrt(std::max(emp2 - emp * emp, 0.0) / n);
        const double pop = quad.integrate([&](double z) {
            Eigen::RowVectorXd zr(1);
            zr << squash(z);
            return model.truth.r0_eval(zr) * hermite_fn(k, z);
        });
        CHECK(std::abs(emp - pop) <= 3.5 * se + 1e-3);
    }

    // strong and weak metrics: ||h0||^2 matches coefficients, ||T h0|| matches filtered
    const double strong = g.norm_x_sq(g.h0_eval);
    CHECK(strong == Approx(model.a_h.squaredNorm()).margin(1e-8));
    const double weak = g.op_image_norm_sq(g.h0_eval);
    double expect = 0.0;
    for (int i = 0; i < model.a_h.size(); ++i)
        expect += std::pow(spec.rho, 2.0 * i) * model.a_h[i] * model.a_h[i];
    CHECK(weak == Approx(expect).margin(1e-8));

    // observables bounded by 1
    for (int i = 0; i < n; ++i) {
        CHECK(std::abs(data.x(i, 0)) <= 1.0);
        CHECK(std::abs(data.column("y")[i]) <= 1.0);
    }

    CHECK_THROWS_AS(make_gaussian_pair(GaussianPairSpec{0.99, 1.0}), std::invalid_argument);
}

TEST_CASE("gaussian pair derivative functional uses the Stein representer") {
    GaussianPairSpec spec;
    spec.rho = 0.8;
    spec.beta = 1.0;
    spec.w = (Eigen::VectorXd(4) << 0.0, 1.0, 0.6, 0.2).finished();
    spec.derivative_functional = true;
    auto model = make_gaussian_pair(spec);

    // theta0 = E[d/dx h0] = a_1 coefficient pairing  (Stein: E[X h0(X)])
    const GaussHermite quad(128);
    const double direct = quad.integrate([&](double x) {
        Eigen::RowVectorXd r(1);
        r << squash(x);
        return x * model.truth.h0_eval(r);
    });
    CHECK(model.truth.theta0 == Approx(direct).margin(1e-9));

    // m_tilde on a represented function equals the raw-coordinate derivative
    auto data = model.sample(200, 5);
    KernelSpec k{KernelFamily::gaussian, 0.4, 2, 1};
    Eigen::MatrixXd anchors = data.x.topRows(30);
    Rng rng(31);
    Eigen::VectorXd c(30);
    for (int i = 0; i < 30; ++i) c[i] = rng.normal();
    RepresentedFunction f{anchors, c, k, 0.0};
    auto v = moment_vector(model.m_tilde, data, k, anchors);
    // finite difference in the raw coordinate
    double fd = 0.0;
    for (int i = 0; i < data.n(); ++i) {
        const double xraw = unsquash(data.x(i, 0));
        const double h = 1e-5;
        Eigen::RowVectorXd up(1), dn(1);
        up << squash(xraw + h);
        dn << squash(xraw - h);
        fd += (f(up) - f(dn)) / (2 * h);
    }
    fd /= data.n();
    CHECK(v.dot(c) == Approx(fd).margin(1e-5));
}

TEST_CASE("proximal model: propensity formula, null effect, brute force theta0") {
    ProximalSpec spec;
    spec.seed = 3;
    auto model = make_proximal_model(spec);
    const auto& t = model.truth;

    // the generic shift-map representer equals the propensity formula
    auto a0_prop = proximal_a0_by_propensity(t);
    for (int x = 0; x < t.px.size(); ++x) CHECK(t.a0[x] == Approx(a0_prop[x]).margin(1e-10));

    // theta0 by exhaustive summation: E[h0(Q,1) - h0(Q,0)]
    double brute = 0.0;
    for (int x = 0; x < t.px.size(); ++x) {
        const Eigen::RowVectorXd row = t.dgp.x_states.row(x);
        brute += t.px[x] * (t.h0[t.x_index(t.dgp.shift1.apply(row))] -
                            t.h0[t.x_index(t.dgp.shift0.apply(row))]);
    }
    CHECK(t.theta0 == Approx(brute).margin(1e-12));

    // null effect
    ProximalSpec null_spec;
    null_spec.seed = 4;
    null_spec.null_effect = true;
    auto null_model = make_proximal_model(null_spec);
    CHECK(null_model.truth.theta0 == Approx(0.0).margin(1e-10));

    // overlap violation
    ProximalSpec bad;
    bad.treat_low = 0.01;
    bad.treat_high = 0.05;
    CHECK_THROWS_WITH(make_proximal_model(bad), Catch::Matchers::ContainsSubstring("overlap"));
}

TEST_CASE("source degrees are reported on the declared grid") {
    SpectralTableSpec spec;
    spec.sigma = (Eigen::VectorXd(5) << 1.0, 0.6, 0.3, 0.1, 0.02).finished();
    spec.beta_h = 2.0;
    spec.w_h = (Eigen::VectorXd(5) << 0.3, 1.0, 0.6, 0.3, 0.1).finished();
    spec.beta_q = 0.25;
    spec.w_q = (Eigen::VectorXd(5) << 0.3, 0.8, 0.6, 0.4, 0.5).finished();
    auto t = discrete_ground_truth(make_spectral_table_dgp(spec));
    // reported degree is a grid value and the dual is less well-posed
    CHECK(t.beta_h >= 0.0);
    CHECK(t.beta_h <= 8.0);
    CHECK(t.beta_q <= t.beta_h);
    CHECK(std::abs(t.beta_h / 0.05 - std::round(t.beta_h / 0.05)) < 1e-9);
}
