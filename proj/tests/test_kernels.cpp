#include <catch_amalgamated.hpp>

#include <drip/kernels.hpp>
#include <drip/rng.hpp>

using namespace drip;
using Catch::Approx;

namespace {

Dataset tiny_discrete() {
    Dataset d;
    d.x.resize(3, 1);
    d.x << -1.0, 0.0, 1.0;
    d.z.resize(3, 1);
    d.z << -1.0, -1.0, 1.0;
    d.extra["y"] = (Eigen::VectorXd(3) << 0.5, -0.25, 1.0).finished();
    return d;
}

} // namespace

TEST_CASE("gaussian kernel values") {
    KernelSpec k{KernelFamily::gaussian, 1.0, 2, 1};
    Eigen::MatrixXd p0(1, 1);
    p0 << 0.0;
    CHECK(gram(k, p0, p0)(0, 0) == 1.0);

    Eigen::MatrixXd pts(2, 1);
    pts << 0.0, std::sqrt(2.0 * std::log(2.0));
    auto g = gram(k, pts, pts);
    CHECK(g(0, 1) == Approx(0.5).epsilon(1e-12));
    CHECK(g(1, 0) == Approx(0.5).epsilon(1e-12));
}

TEST_CASE("delta kernel is permutation-similar to identity on distinct states") {
    KernelSpec k{KernelFamily::discrete_delta, 1.0, 2, 1};
    Eigen::MatrixXd states(3, 1);
    states << 2.0, 0.0, -1.0;
    auto g = gram(k, states, states);
    CHECK(g == Eigen::MatrixXd::Identity(3, 3));
}

TEST_CASE("gram rejects mismatched or non-finite inputs") {
    KernelSpec k{KernelFamily::gaussian, 1.0, 2, 1};
    Eigen::MatrixXd a(1, 1), b(1, 2);
    a << 0.0;
    b << 0.0, 1.0;
    CHECK_THROWS_AS(gram(k, a, b), std::invalid_argument);
    Eigen::MatrixXd c(1, 1);
    c << std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(gram(k, a, c), std::invalid_argument);
}

TEST_CASE("gram matrices are positive semidefinite on random point sets") {
    Rng rng(42);
    for (auto family : {KernelFamily::gaussian, KernelFamily::polynomial}) {
        KernelSpec k{family, 0.7, 3, 2};
        Eigen::MatrixXd pts(20, 2);
        for (long i = 0; i < pts.rows(); ++i) {
            pts(i, 0) = rng.normal();
            pts(i, 1) = rng.normal();
        }
        auto g = symmetric_gram(k, pts);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(g);
        CHECK(es.eigenvalues().minCoeff() >= -1e-8 * g.trace());
    }
}

TEST_CASE("represented function: evaluation, linearity, norm") {
    Rng rng(7);
    KernelSpec k{KernelFamily::gaussian, 0.8, 2, 1};
    Eigen::MatrixXd anchors(5, 1);
    for (int i = 0; i < 5; ++i) anchors(i, 0) = rng.normal();
    Eigen::VectorXd c1(5), c2(5);
    for (int i = 0; i < 5; ++i) {
        c1[i] = rng.normal();
        c2[i] = rng.normal();
    }
    RepresentedFunction f1{anchors, c1, k, 0.0};
    RepresentedFunction f2{anchors, c2, k, 0.0};
    const double alpha = 0.37;
    RepresentedFunction mix{anchors, alpha * c1 + c2, k, 0.0};
    for (int trial = 0; trial < 20; ++trial) {
        Eigen::RowVectorXd p(1);
        p << rng.normal();
        CHECK(mix(p) == Approx(alpha * f1(p) + f2(p)).margin(1e-12));
    }
    for (int trial = 0; trial < 20; ++trial) {
        Eigen::VectorXd c(5);
        for (int i = 0; i < 5; ++i) c[i] = rng.normal();
        RepresentedFunction f{anchors, c, k, 0.0};
        CHECK(f.rkhs_norm_sq() >= -1e-12);
    }
}

TEST_CASE("gaussian kernel gradient matches finite differences") {
    Rng rng(11);
    KernelSpec k{KernelFamily::gaussian, 1.3, 2, 2};
    for (int trial = 0; trial < 25; ++trial) {
        Eigen::RowVectorXd a(2), b(2);
        a << rng.normal(), rng.normal();
        b << rng.normal(), rng.normal();
        for (int c = 0; c < 2; ++c) {
            const double h = 1e-4;
            Eigen::RowVectorXd up = b, dn = b;
            up[c] += h;
            dn[c] -= h;
            const double fd = (kernel_eval(k, a, up) - kernel_eval(k, a, dn)) / (2 * h);
            CHECK(kernel_grad_second(k, a, b, c) == Approx(fd).margin(1e-6));
        }
    }
    CHECK_THROWS_AS(kernel_grad_second(KernelSpec{KernelFamily::discrete_delta, 1, 2, 1},
                                       Eigen::RowVectorXd::Zero(1), Eigen::RowVectorXd::Zero(1), 0),
                    std::invalid_argument);
}

TEST_CASE("moment_vector pairs the functional with kernel sections") {
    Dataset d = tiny_discrete();
    KernelSpec delta{KernelFamily::discrete_delta, 1.0, 2, 1};
    Eigen::MatrixXd anchors(2, 1);
    anchors << -1.0, 1.0;

    MomentFunctional m;
    m.kind = MomentKind::outcome_product;
    m.arg_block = Block::z;
    m.outcome = "y";
    auto v = moment_vector(m, d, delta, anchors);
    // direct enumeration over the three samples
    CHECK(v[0] == Approx((0.5 - 0.25) / 3.0).epsilon(1e-14));
    CHECK(v[1] == Approx(1.0 / 3.0).epsilon(1e-14));

    // zero outcome -> zero vector
    Dataset d0 = d;
    d0.extra["y"].setZero();
    CHECK(moment_vector(m, d0, delta, anchors).isZero());

    // identical shifts -> zero vector
    MomentFunctional diff;
    diff.kind = MomentKind::eval_difference;
    diff.arg_block = Block::x;
    diff.shift1.assignments = {{0, 1.0}};
    diff.shift0.assignments = {{0, 1.0}};
    Eigen::MatrixXd xanch(3, 1);
    xanch << -1.0, 0.0, 1.0;
    CHECK(moment_vector(diff, d, delta, xanch).isZero());
}

TEST_CASE("moment_vector is the representer of E_n[m(W; f)] over coefficients") {
    Rng rng(99);
    Dataset d;
    const int n = 40;
    d.x.resize(n, 1);
    d.z.resize(n, 1);
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) {
        d.x(i, 0) = rng.normal();
        d.z(i, 0) = rng.normal();
        y[i] = rng.uniform(-1.0, 1.0);
    }
    d.extra["y"] = y;

    KernelSpec k{KernelFamily::gaussian, 0.9, 2, 1};
    Eigen::MatrixXd anchors = d.z.topRows(12);

    MomentFunctional m;
    m.kind = MomentKind::outcome_product;
    m.arg_block = Block::z;
    auto v = moment_vector(m, d, k, anchors);
    for (int trial = 0; trial < 10; ++trial) {
        Eigen::VectorXd c(12);
        for (int i = 0; i < 12; ++i) c[i] = rng.normal();
        RepresentedFunction f{anchors, c, k, 0.0};
        const double via_vector = v.dot(c);
        const double direct = m.empirical_mean(d, f);
        CHECK(via_vector == Approx(direct).margin(1e-12));
    }

    // derivative moment: analytic section gradient vs finite differences
    MomentFunctional md;
    md.kind = MomentKind::avg_derivative;
    md.arg_block = Block::z;
    md.deriv_coord = 0;
    auto vd = moment_vector(md, d, k, anchors);
    for (int trial = 0; trial < 5; ++trial) {
        Eigen::VectorXd c(12);
        for (int i = 0; i < 12; ++i) c[i] = rng.normal();
        RepresentedFunction f{anchors, c, k, 0.0};
        CHECK(vd.dot(c) == Approx(md.empirical_mean(d, f)).margin(1e-6));
    }
    KernelSpec delta{KernelFamily::discrete_delta, 1.0, 2, 1};
    CHECK_THROWS_AS(moment_vector(md, d, delta, anchors), std::invalid_argument);
}

TEST_CASE("moment functionals are linear in the test function") {
    Rng rng(123);
    Dataset d = tiny_discrete();
    KernelSpec k{KernelFamily::gaussian, 1.1, 2, 1};
    Eigen::MatrixXd anchors(3, 1);
    anchors << -0.5, 0.1, 0.9;

    std::vector<MomentFunctional> mfs(3);
    mfs[0].kind = MomentKind::outcome_product;
    mfs[0].arg_block = Block::z;
    mfs[1].kind = MomentKind::weighted_average;
    mfs[1].arg_block = Block::x;
    mfs[1].weight = [](const Eigen::RowVectorXd& r) { return 0.5 + r[0]; };
    mfs[2].kind = MomentKind::eval_difference;
    mfs[2].arg_block = Block::x;
    mfs[2].shift1.assignments = {{0, 1.0}};
    mfs[2].shift0.assignments = {{0, -1.0}};

    for (const auto& mf : mfs) {
        for (int trial = 0; trial < 10; ++trial) {
            Eigen::VectorXd c1(3), c2(3);
            for (int i = 0; i < 3; ++i) {
                c1[i] = rng.normal();
                c2[i] = rng.normal();
            }
            const double a = rng.uniform(-2.0, 2.0);
            RepresentedFunction f1{anchors, c1, k, 0.0};
            RepresentedFunction f2{anchors, c2, k, 0.0};
            RepresentedFunction fmix{anchors, a * c1 + c2, k, 0.0};
            for (int i = 0; i < d.n(); ++i) {
                const double lhs = mf.eval_sample(d, i, fmix);
                const double rhs = a * mf.eval_sample(d, i, f1) + mf.eval_sample(d, i, f2);
                CHECK(lhs == Approx(rhs).margin(1e-12));
            }
        }
    }
}

TEST_CASE("represented function json round trip") {
    KernelSpec k{KernelFamily::polynomial, 1.0, 3, 2};
    Eigen::MatrixXd anchors(2, 2);
    anchors << 0.5, -1.0, 2.0, 0.25;
    RepresentedFunction f{anchors, (Eigen::VectorXd(2) << 1.5, -2.5).finished(), k, 0.75};
    auto f2 = represented_from_json(represented_to_json(f));
    CHECK(f2.anchors == f.anchors);
    CHECK(f2.coeffs == f.coeffs);
    CHECK(f2.offset == f.offset);
    CHECK(f2.kernel.degree == 3);
    Eigen::RowVectorXd p(2);
    p << 0.3, 0.6;
    CHECK(f2(p) == f(p));
}

TEST_CASE("median heuristic bandwidth") {
    Eigen::MatrixXd pts(3, 1);
    pts << 0.0, 1.0, 3.0;
    // pairwise distances {1, 2, 3}; median 2
    CHECK(median_heuristic_bandwidth(pts) == Approx(2.0));
    KernelSpec k{KernelFamily::gaussian, 0.0, 2, 1};
    CHECK(resolve_bandwidth(k, pts).bandwidth == Approx(2.0));
}
