#ifndef DRIP_DGP_HPP
#define DRIP_DGP_HPP

// Synthetic data-generating processes with fully known ground truth.
//
// Every DGP here attaches the exact primal solution h0, dual solution q0,
// Riesz representers a0 and r0, the target theta0, source degrees, and exact
// (or high-precision quadrature) evaluators of the strong and weak metrics.
// Discrete DGPs are finite contingency tables, so all population quantities
// reduce to finite linear algebra; the operator between the weighted L2
// spaces is diagonalized explicitly and minimum-norm solutions come from the
// distribution-weighted pseudo-inverse.

#include <functional>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include "drip/common.hpp"
#include "drip/data.hpp"
#include "drip/kernels.hpp"
#include "drip/quadrature.hpp"
#include "drip/rng.hpp"
#include "drip/spectral.hpp"

namespace drip::dgp {

using Fn = std::function<double(const Eigen::RowVectorXd&)>;
using MetricFn = std::function<double(const Fn&)>;

struct GroundTruth {
    Fn h0_eval, q0_eval, a0_eval, r0_eval;
    double theta0 = 0.0;
    double beta_h = 0.0;
    double beta_q = 0.0;

    // exact / quadrature norms for arbitrary evaluation maps
    MetricFn norm_x_sq;  // ||g||^2_{L2(X)}
    MetricFn norm_z_sq;  // ||f||^2_{L2(Z)}
    MetricFn op_image_norm_sq;   // ||T g||^2
    MetricFn adj_image_norm_sq;  // ||T* f||^2

    double strong_primal_sq(const Fn& g) const {
        return norm_x_sq([&](const Eigen::RowVectorXd& r) { return g(r) - h0_eval(r); });
    }
    double weak_primal_sq(const Fn& g) const {
        return op_image_norm_sq([&](const Eigen::RowVectorXd& r) { return g(r) - h0_eval(r); });
    }
    double strong_dual_sq(const Fn& f) const {
        return norm_z_sq([&](const Eigen::RowVectorXd& r) { return f(r) - q0_eval(r); });
    }
    double weak_dual_sq(const Fn& f) const {
        return adj_image_norm_sq([&](const Eigen::RowVectorXd& r) { return f(r) - q0_eval(r); });
    }
};

// ---------------------------------------------------------------------------
// Discrete (finite-support) DGPs

struct DiscreteDGP {
    Eigen::VectorXd pz;          // K_z, strictly positive
    Eigen::MatrixXd cond_xz;     // K_x x K_z, column-stochastic P(X|Z)
    Eigen::MatrixXd outcome_xz;  // E[Y | X=x, Z=z]; a column vector replicated when z-independent
    double noise_eta = 0.1;      // outcome noise uniform on [-eta, eta]
    Eigen::MatrixXd x_states;    // K_x x d_x state coordinates
    Eigen::MatrixXd z_states;    // K_z x d_z

    MomentKind functional_kind = MomentKind::weighted_average;
    Eigen::VectorXd omega;       // weighted_average weights per x-state; empty means 1
    ShiftSpec shift1, shift0;    // eval_difference shifts on x-state coordinates

    int kx() const { return static_cast<int>(cond_xz.rows()); }
    int kz() const { return static_cast<int>(cond_xz.cols()); }
};

// 1-d state grid on [-1, 1]
inline Eigen::MatrixXd state_grid(int k) {
    Eigen::MatrixXd s(k, 1);
    for (int i = 0; i < k; ++i) s(i, 0) = (k == 1) ? 0.0 : -1.0 + 2.0 * i / (k - 1.0);
    return s;
}

namespace detail {

inline int find_row(const Eigen::MatrixXd& states, const Eigen::RowVectorXd& row) {
    for (long i = 0; i < states.rows(); ++i)
        if (states.row(i) == row) return static_cast<int>(i);
    throw std::invalid_argument("point is not a state of this discrete support");
}

// Largest beta on the grid 0:0.05:8 whose source constant stays below 1e6.
inline double source_degree_by_grid(const Eigen::VectorXd& coefs, const Eigen::VectorXd& sigma) {
    const double sig_tol = 1e-12;
    double best = 0.0;
    for (int step = 0; step <= 160; ++step) {
        const double beta = 0.05 * step;
        double constant = 0.0;
        for (int i = 0; i < sigma.size(); ++i) {
            if (sigma[i] > sig_tol) constant += coefs[i] * coefs[i] / std::pow(sigma[i], 2.0 * beta);
        }
        if (constant <= 1e6) best = beta;
        else break;
    }
    return best;
}

} // namespace detail

// Exact population model induced by a DiscreteDGP: weighted SVD of the
// conditional-expectation operator, minimum-norm solutions to both inverse
// problems, and brute-force population evaluation tools.
struct DiscreteTruth {
    DiscreteDGP dgp;
    Eigen::VectorXd px, pz;
    Eigen::MatrixXd joint;    // K_x x K_z, P(x,z)
    Eigen::VectorXd sigma;    // padded to K_x with zeros
    Eigen::MatrixXd v_basis;  // K_x x K_x; column i = v_i state values, L2(P_X)-orthonormal
    Eigen::MatrixXd u_basis;  // K_z x K_z
    Eigen::VectorXd h0, q0, a0, r0;
    double theta0 = 0.0;
    double beta_h = 0.0, beta_q = 0.0;

    int x_index(const Eigen::RowVectorXd& row) const { return detail::find_row(dgp.x_states, row); }
    int z_index(const Eigen::RowVectorXd& row) const { return detail::find_row(dgp.z_states, row); }

    // population E[m_tilde(W; h)] for a state-value table
    double functional_mean(const Eigen::VectorXd& hvals) const {
        double s = 0.0;
        switch (dgp.functional_kind) {
            case MomentKind::weighted_average:
                for (int x = 0; x < px.size(); ++x)
                    s += px[x] * (dgp.omega.size() ? dgp.omega[x] : 1.0) * hvals[x];
                break;
            case MomentKind::eval_difference:
                for (int x = 0; x < px.size(); ++x) {
                    const Eigen::RowVectorXd row = dgp.x_states.row(x);
                    s += px[x] * (hvals[x_index(dgp.shift1.apply(row))] -
                                  hvals[x_index(dgp.shift0.apply(row))]);
                }
                break;
            default:
                throw std::invalid_argument("functional kind unsupported on discrete support");
        }
        return s;
    }

    // population doubly robust value theta(h, q) by exact summation
    double theta_of(const Eigen::VectorXd& hvals, const Eigen::VectorXd& qvals) const {
        double v = functional_mean(hvals);
        for (int z = 0; z < pz.size(); ++z) v += pz[z] * r0[z] * qvals[z];
        for (int x = 0; x < px.size(); ++x)
            for (int z = 0; z < pz.size(); ++z) v -= joint(x, z) * hvals[x] * qvals[z];
        return v;
    }

    double mixed_bias(const Eigen::VectorXd& hvals, const Eigen::VectorXd& qvals) const {
        double v = 0.0;
        for (int x = 0; x < px.size(); ++x)
            for (int z = 0; z < pz.size(); ++z)
                v += joint(x, z) * (q0[z] - qvals[z]) * (hvals[x] - h0[x]);
        return v;
    }

    // coordinates <g, v_i>_{L2(P_X)} of a state-value table
    Eigen::VectorXd coords_x(const Eigen::VectorXd& vals) const {
        Eigen::VectorXd c(v_basis.cols());
        for (int i = 0; i < c.size(); ++i) {
            double s = 0.0;
            for (int x = 0; x < px.size(); ++x) s += px[x] * vals[x] * v_basis(x, i);
            c[i] = s;
        }
        return c;
    }

    Eigen::VectorXd table_of(const Fn& g, bool x_side) const {
        const Eigen::MatrixXd& st = x_side ? dgp.x_states : dgp.z_states;
        Eigen::VectorXd v(st.rows());
        for (long i = 0; i < st.rows(); ++i) v[i] = g(st.row(i));
        return v;
    }

    Eigen::VectorXd apply_op(const Eigen::VectorXd& hvals) const {
        return dgp.cond_xz.transpose() * hvals; // (Th)(z) = sum_x P(x|z) h(x)
    }

    Eigen::VectorXd apply_adjoint(const Eigen::VectorXd& qvals) const {
        Eigen::VectorXd out(px.size());
        for (int x = 0; x < px.size(); ++x) {
            double s = 0.0;
            for (int z = 0; z < pz.size(); ++z) s += joint(x, z) * qvals[z];
            out[x] = s / px[x];
        }
        return out;
    }

    Dataset sample(int n, std::uint64_t seed) const {
        require(n >= 1, "sample size must be positive");
        Dataset data;
        data.seed = seed;
        data.x.resize(n, dgp.x_states.cols());
        data.z.resize(n, dgp.z_states.cols());
        Eigen::VectorXd y(n);
        Rng rng(seed);
        Eigen::VectorXd zcdf(pz.size());
        double acc = 0.0;
        for (int z = 0; z < pz.size(); ++z) zcdf[z] = (acc += pz[z]);
        for (int i = 0; i < n; ++i) {
            const double uz = rng.u01();
            int z = 0;
            while (z + 1 < zcdf.size() && uz > zcdf[z]) ++z;
            const double ux = rng.u01();
            double cx = 0.0;
            int x = 0;
            for (; x < dgp.cond_xz.rows(); ++x) {
                cx += dgp.cond_xz(x, z);
                if (ux <= cx || x + 1 == dgp.cond_xz.rows()) break;
            }
            data.x.row(i) = dgp.x_states.row(x);
            data.z.row(i) = dgp.z_states.row(z);
            y[i] = dgp.outcome_xz(x, z) + rng.uniform(-dgp.noise_eta, dgp.noise_eta);
        }
        data.extra["y"] = std::move(y);
        return data;
    }

    MomentFunctional moment_m() const {
        MomentFunctional m;
        m.kind = MomentKind::outcome_product;
        m.arg_block = Block::z;
        m.outcome = "y";
        return m;
    }

    MomentFunctional moment_m_tilde() const {
        MomentFunctional mt;
        mt.kind = dgp.functional_kind;
        mt.arg_block = Block::x;
        if (dgp.functional_kind == MomentKind::weighted_average) {
            if (dgp.omega.size()) {
                const Eigen::MatrixXd states = dgp.x_states;
                const Eigen::VectorXd om = dgp.omega;
                mt.weight = [states, om](const Eigen::RowVectorXd& r) {
                    return om[detail::find_row(states, r)];
                };
            }
        } else if (dgp.functional_kind == MomentKind::eval_difference) {
            mt.shift1 = dgp.shift1;
            mt.shift0 = dgp.shift0;
        }
        return mt;
    }

    GroundTruth truth() const;
};

inline DiscreteTruth discrete_ground_truth(const DiscreteDGP& dgp_in) {
    DiscreteTruth t;
    t.dgp = dgp_in;
    DiscreteDGP& dgp = t.dgp;
    const int kx = dgp.kx(), kz = dgp.kz();

    require(dgp.pz.size() == kz, "pz length mismatch");
    for (int z = 0; z < kz; ++z) require(dgp.pz[z] > 0.0, "pz must be strictly positive");
    require(std::abs(dgp.pz.sum() - 1.0) < 1e-10, "pz must sum to 1");
    for (int z = 0; z < kz; ++z) {
        double col = 0.0;
        for (int x = 0; x < kx; ++x) {
            require(dgp.cond_xz(x, z) >= 0.0, "cond_xz entries must be nonnegative");
            col += dgp.cond_xz(x, z);
        }
        require(std::abs(col - 1.0) < 1e-10, "cond_xz columns must sum to 1");
    }
    if (dgp.x_states.size() == 0) dgp.x_states = state_grid(kx);
    if (dgp.z_states.size() == 0) dgp.z_states = state_grid(kz);
    if (dgp.outcome_xz.cols() == 1 && kz > 1)
        dgp.outcome_xz = dgp.outcome_xz.col(0).replicate(1, kz).eval();

    t.pz = dgp.pz;
    t.px = dgp.cond_xz * dgp.pz;
    for (int x = 0; x < kx; ++x) require(t.px[x] > 0.0, "every x state needs positive mass");
    t.joint = dgp.cond_xz * dgp.pz.asDiagonal();

    // weighted SVD: T-tilde = Dz^{1/2} A' Dx^{-1/2}
    const Eigen::VectorXd sqx = t.px.cwiseSqrt(), sqz = t.pz.cwiseSqrt();
    Eigen::MatrixXd ttil = sqz.asDiagonal() * dgp.cond_xz.transpose() * sqx.cwiseInverse().asDiagonal();
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(ttil, Eigen::ComputeFullU | Eigen::ComputeFullV);
    t.sigma = Eigen::VectorXd::Zero(kx);
    t.sigma.head(svd.singularValues().size()) = svd.singularValues();
    for (int i = 0; i < t.sigma.size(); ++i)
        if (t.sigma[i] < 1e-12) t.sigma[i] = 0.0;
    require(t.sigma.size() == 0 || t.sigma[0] <= 1.0 + 1e-9, "operator norm exceeds 1");
    t.v_basis = sqx.cwiseInverse().asDiagonal() * svd.matrixV();
    t.u_basis = sqz.cwiseInverse().asDiagonal() * svd.matrixU();

    // r0 = E[Y | Z]; by construction it lies in the span of T's image of the
    // outcome table only when a bridge exists, so the range check is real.
    t.r0.resize(kz);
    for (int z = 0; z < kz; ++z) {
        double s = 0.0;
        for (int x = 0; x < kx; ++x) s += dgp.cond_xz(x, z) * dgp.outcome_xz(x, z);
        t.r0[z] = s;
    }

    // a0 from the functional spec
    t.a0 = Eigen::VectorXd::Ones(kx);
    if (dgp.functional_kind == MomentKind::weighted_average) {
        if (dgp.omega.size()) {
            require(dgp.omega.size() == kx, "omega length mismatch");
            t.a0 = dgp.omega;
        }
    } else if (dgp.functional_kind == MomentKind::eval_difference) {
        t.a0.setZero();
        for (int x = 0; x < kx; ++x) {
            const Eigen::RowVectorXd row = dgp.x_states.row(x);
            t.a0[detail::find_row(dgp.x_states, dgp.shift1.apply(row))] += t.px[x];
            t.a0[detail::find_row(dgp.x_states, dgp.shift0.apply(row))] -= t.px[x];
        }
        t.a0 = t.a0.cwiseQuotient(t.px);
    } else {
        throw std::invalid_argument("functional kind unsupported on discrete support");
    }

    // minimum-norm solves in the tilde coordinates (norms are L2 under the
    // data distribution, not Euclidean)
    const double sig_tol = 1e-12;
    auto pinv_apply = [&](bool primal, const Eigen::VectorXd& rhs_tilde) {
        Eigen::VectorXd sol = Eigen::VectorXd::Zero(primal ? kx : kz);
        const int r = static_cast<int>(svd.singularValues().size());
        for (int i = 0; i < r; ++i) {
            if (t.sigma[i] <= sig_tol) continue;
            if (primal) {
                const double c = svd.matrixU().col(i).dot(rhs_tilde) / t.sigma[i];
                sol += c * svd.matrixV().col(i);
            } else {
                const double c = svd.matrixV().col(i).dot(rhs_tilde) / t.sigma[i];
                sol += c * svd.matrixU().col(i);
            }
        }
        return sol;
    };

    const Eigen::VectorXd r0_tilde = sqz.asDiagonal() * t.r0;
    const Eigen::VectorXd h0_tilde = pinv_apply(true, r0_tilde);
    if ((ttil * h0_tilde - r0_tilde).norm() > 1e-8)
        throw std::invalid_argument("primal solution does not exist: r0 is outside the operator range");
    t.h0 = sqx.cwiseInverse().asDiagonal() * h0_tilde;

    const Eigen::VectorXd a0_tilde = sqx.asDiagonal() * t.a0;
    const Eigen::VectorXd q0_tilde = pinv_apply(false, a0_tilde);
    if ((ttil.transpose() * q0_tilde - a0_tilde).norm() > 1e-8)
        throw std::invalid_argument("dual solution does not exist: a0 is outside the adjoint range");
    t.q0 = sqz.cwiseInverse().asDiagonal() * q0_tilde;

    t.theta0 = 0.0;
    for (int x = 0; x < kx; ++x) t.theta0 += t.px[x] * t.a0[x] * t.h0[x];

    t.beta_h = detail::source_degree_by_grid(svd.matrixV().transpose() * h0_tilde, t.sigma);
    t.beta_q = detail::source_degree_by_grid(svd.matrixU().transpose() * q0_tilde, t.sigma);
    return t;
}

inline GroundTruth DiscreteTruth::truth() const {
    GroundTruth g;
    const DiscreteTruth self = *this; // value capture keeps evaluators self-contained
    g.theta0 = theta0;
    g.beta_h = beta_h;
    g.beta_q = beta_q;
    g.h0_eval = [self](const Eigen::RowVectorXd& r) { return self.h0[self.x_index(r)]; };
    g.q0_eval = [self](const Eigen::RowVectorXd& r) { return self.q0[self.z_index(r)]; };
    g.a0_eval = [self](const Eigen::RowVectorXd& r) { return self.a0[self.x_index(r)]; };
    g.r0_eval = [self](const Eigen::RowVectorXd& r) { return self.r0[self.z_index(r)]; };
    g.norm_x_sq = [self](const Fn& f) {
        double s = 0.0;
        for (int x = 0; x < self.px.size(); ++x) {
            const double v = f(self.dgp.x_states.row(x));
            s += self.px[x] * v * v;
        }
        return s;
    };
    g.norm_z_sq = [self](const Fn& f) {
        double s = 0.0;
        for (int z = 0; z < self.pz.size(); ++z) {
            const double v = f(self.dgp.z_states.row(z));
            s += self.pz[z] * v * v;
        }
        return s;
    };
    g.op_image_norm_sq = [self](const Fn& f) {
        const Eigen::VectorXd img = self.apply_op(self.table_of(f, true));
        double s = 0.0;
        for (int z = 0; z < self.pz.size(); ++z) s += self.pz[z] * img[z] * img[z];
        return s;
    };
    g.adj_image_norm_sq = [self](const Fn& f) {
        const Eigen::VectorXd img = self.apply_adjoint(self.table_of(f, false));
        double s = 0.0;
        for (int x = 0; x < self.px.size(); ++x) s += self.px[x] * img[x] * img[x];
        return s;
    };
    return g;
}

// ---------------------------------------------------------------------------
// Spectral contingency-table construction
//
// Joint P(x,z) = (1/K) V diag(sigma) V' with V the discrete cosine basis
// (first column constant) has uniform marginals and conditional-expectation
// operator with singular values exactly `sigma`.  Entries stay nonnegative
// for every spectrum used here; the constructor checks.

inline Eigen::MatrixXd dct_basis(int k) {
    Eigen::MatrixXd v(k, k);
    for (int x = 0; x < k; ++x) {
        v(x, 0) = 1.0 / std::sqrt(static_cast<double>(k));
        for (int i = 1; i < k; ++i)
            v(x, i) = std::sqrt(2.0 / k) * std::cos(M_PI * (x + 0.5) * i / k);
    }
    return v;
}

struct SpectralTableSpec {
    Eigen::VectorXd sigma;   // descending, sigma[0] = 1 is the constant direction
    double beta_h = 1.0;
    Eigen::VectorXd w_h;     // loadings of h0 in the singular basis (before sigma^beta)
    double beta_q = 1.0;
    Eigen::VectorXd w_q;     // dual loadings; a0 gets coefficients sigma^{beta_q+1} w_q
    double noise_eta = 0.2;
    double h_max = 0.75;     // rescale target so |outcome| stays inside [-1, 1]
    double a_max = 1.0;
};

inline DiscreteDGP make_spectral_table_dgp(const SpectralTableSpec& spec) {
    const int k = static_cast<int>(spec.sigma.size());
    require(k >= 2, "need at least two states");
    require(std::abs(spec.sigma[0] - 1.0) < 1e-12, "leading singular value must be 1");
    require(spec.w_h.size() == k && spec.w_q.size() == k, "loading length mismatch");
    require(spec.noise_eta >= 0.0 && spec.noise_eta < 1.0, "noise half-width must be in [0,1)");

    const Eigen::MatrixXd v = dct_basis(k);
    Eigen::MatrixXd joint = v * spec.sigma.asDiagonal() * v.transpose() / k;
    double minj = joint.minCoeff();
    require(minj > -1e-12, "spectrum is infeasible as a contingency table");
    joint = joint.cwiseMax(0.0);

    DiscreteDGP dgp;
    dgp.pz = Eigen::VectorXd::Constant(k, 1.0 / k);
    dgp.cond_xz = joint * static_cast<double>(k); // uniform pz
    // renormalize columns exactly
    for (int z = 0; z < k; ++z) dgp.cond_xz.col(z) /= dgp.cond_xz.col(z).sum();
    dgp.noise_eta = spec.noise_eta;

    spectral::SpectralOperator op{spec.sigma, spectral::BasisId::cosine};
    Eigen::VectorXd wh = spec.w_h, wq = spec.w_q;
    for (int i = 0; i < k; ++i)
        if (spec.sigma[i] == 0.0) { wh[i] = 0.0; wq[i] = 0.0; }
    const auto src_h = spectral::make_source_solution(op, spec.beta_h, wh);
    const auto src_a = spectral::make_source_solution(op, spec.beta_q + 1.0, wq);

    // state-value tables: functions are sum_i coef_i v_i with v_i = sqrt(K) V_i
    const Eigen::MatrixXd vfun = std::sqrt(static_cast<double>(k)) * v;
    Eigen::VectorXd h_tab = vfun * src_h.coefficients;
    Eigen::VectorXd a_tab = vfun * src_a.coefficients;
    const double hmax = h_tab.cwiseAbs().maxCoeff();
    if (hmax > 0) h_tab *= std::min(1.0, (spec.h_max - spec.noise_eta) / hmax);
    const double amax = a_tab.cwiseAbs().maxCoeff();
    if (amax > spec.a_max) a_tab *= spec.a_max / amax;

    dgp.outcome_xz = h_tab;
    dgp.functional_kind = MomentKind::weighted_average;
    dgp.omega = a_tab;
    return dgp;
}

// ---------------------------------------------------------------------------
// Jointly Gaussian pair with geometric spectrum
//
// (X, Z) standard bivariate normal with correlation rho; the conditional
// expectation operator is diagonal in the normalized Hermite basis with
// singular values rho^i.  Observables are squashed through tanh(x/2), and the
// squashing is folded into the basis so the spectrum is untouched.

struct GaussianPairSpec {
    double rho = 0.9;
    double beta = 1.0;
    Eigen::VectorXd w;       // Hermite loadings of h0 (before sigma^beta); index 0 = constant
    double beta_q = 1.0;
    Eigen::VectorXd w_q;     // dual loadings; empty disables the dual (a0 = omega = 1)
    double noise_eta = 0.2;
    int quad_nodes = 64;
    bool derivative_functional = false; // average raw-coordinate derivative
};

inline double squash(double x) { return std::tanh(x / 2.0); }
inline double unsquash(double s) { return 2.0 * std::atanh(std::clamp(s, -1.0 + 1e-15, 1.0 - 1e-15)); }

struct GaussianPairModel {
    GaussianPairSpec spec;
    Eigen::VectorXd a_h; // Hermite coefficients of h0 (post scaling)
    Eigen::VectorXd c_a; // Hermite coefficients of a0
    GroundTruth truth;
    MomentFunctional m, m_tilde;

    Dataset sample(int n, std::uint64_t seed) const {
        Dataset data;
        data.seed = seed;
        data.x.resize(n, 1);
        data.z.resize(n, 1);
        Eigen::VectorXd y(n);
        Rng rng(seed);
        const double rho = spec.rho;
        const double resid = std::sqrt(1.0 - rho * rho);
        for (int i = 0; i < n; ++i) {
            const double zraw = rng.normal();
            const double xraw = rho * zraw + resid * rng.normal();
            data.x(i, 0) = squash(xraw);
            data.z(i, 0) = squash(zraw);
            double h = 0.0;
            for (int k = 0; k < a_h.size(); ++k) h += a_h[k] * hermite_fn(k, xraw);
            y[i] = std::clamp(h + rng.uniform(-spec.noise_eta, spec.noise_eta), -1.0, 1.0);
        }
        data.extra["y"] = std::move(y);
        return data;
    }
};

inline GaussianPairModel make_gaussian_pair(const GaussianPairSpec& spec_in) {
    GaussianPairModel model;
    model.spec = spec_in;
    GaussianPairSpec& spec = model.spec;
    require(spec.rho > 0.1 && spec.rho < 0.95, "rho must lie in (0.1, 0.95)");
    require(spec.w.size() >= 1, "h0 needs at least one Hermite loading");
    require(spec.quad_nodes >= 64, "quadrature needs at least 64 nodes");

    const int k = static_cast<int>(spec.w.size());
    Eigen::VectorXd sig(k);
    for (int i = 0; i < k; ++i) sig[i] = std::pow(spec.rho, i);
    spectral::SpectralOperator op{sig, spectral::BasisId::hermite};
    auto src = spectral::make_source_solution(op, spec.beta, spec.w);
    model.a_h = src.coefficients;

    // scale so |h0| + eta <= 1 on |x| <= 6
    double hmax = 0.0;
    for (int g = 0; g <= 600; ++g) {
        const double x = -6.0 + g * 0.02;
        double h = 0.0;
        for (int i = 0; i < k; ++i) h += model.a_h[i] * hermite_fn(i, x);
        hmax = std::max(hmax, std::abs(h));
    }
    if (hmax > 0) model.a_h *= std::min(1.0, (0.98 - spec.noise_eta) / hmax);

    const Eigen::VectorXd a_h = model.a_h;
    const double rho = spec.rho;
    auto h0_raw = [a_h](double x) {
        double v = 0.0;
        for (int i = 0; i < a_h.size(); ++i) v += a_h[i] * hermite_fn(i, x);
        return v;
    };

    GroundTruth& g = model.truth;
    g.beta_h = spec.beta;
    g.h0_eval = [h0_raw](const Eigen::RowVectorXd& r) { return h0_raw(unsquash(r[0])); };
    g.r0_eval = [a_h, rho](const Eigen::RowVectorXd& r) {
        const double z = unsquash(r[0]);
        double v = 0.0;
        for (int i = 0; i < a_h.size(); ++i) v += a_h[i] * std::pow(rho, i) * hermite_fn(i, z);
        return v;
    };

    model.m.kind = MomentKind::outcome_product;
    model.m.arg_block = Block::z;
    model.m.outcome = "y";

    if (spec.derivative_functional) {
        // average derivative with respect to the raw coordinate; the squash
        // Jacobian rides along as a per-sample weight
        model.m_tilde.kind = MomentKind::avg_derivative;
        model.m_tilde.arg_block = Block::x;
        model.m_tilde.deriv_coord = 0;
        model.m_tilde.weight = [](const Eigen::RowVectorXd& r) {
            const double s = r[0];
            return (1.0 - s * s) / 2.0; // d squash / d x at the sample
        };
        // Stein identity: E[d/dx h(X)] = E[X h(X)], so a0(x) = x = first
        // Hermite function and q0 = a0 / rho.
        model.c_a = Eigen::VectorXd::Zero(std::max(2, k));
        model.c_a[1] = 1.0;
        g.beta_q = detail::source_degree_by_grid(
            (Eigen::VectorXd(2) << 0.0, 1.0 / rho).finished(),
            (Eigen::VectorXd(2) << 1.0, rho).finished());
    } else {
        model.m_tilde.kind = MomentKind::weighted_average;
        model.m_tilde.arg_block = Block::x;
        if (spec.w_q.size()) {
            require(spec.w_q.size() == k, "dual loading length mismatch");
            auto src_a = spectral::make_source_solution(op, spec.beta_q + 1.0, spec.w_q);
            model.c_a = src_a.coefficients;
            g.beta_q = spec.beta_q;
        } else {
            model.c_a = Eigen::VectorXd::Zero(k);
            model.c_a[0] = 1.0;
            g.beta_q = 8.0;
        }
        const Eigen::VectorXd c_a = model.c_a;
        model.m_tilde.weight = [c_a](const Eigen::RowVectorXd& r) {
            const double x = unsquash(r[0]);
            double v = 0.0;
            for (int i = 0; i < c_a.size(); ++i) v += c_a[i] * hermite_fn(i, x);
            return v;
        };
    }

    const Eigen::VectorXd c_a = model.c_a;
    g.a0_eval = [c_a, spec](const Eigen::RowVectorXd& r) {
        if (spec.derivative_functional) return unsquash(r[0]);
        const double x = unsquash(r[0]);
        double v = 0.0;
        for (int i = 0; i < c_a.size(); ++i) v += c_a[i] * hermite_fn(i, x);
        return v;
    };
    g.q0_eval = [c_a, rho](const Eigen::RowVectorXd& r) {
        const double z = unsquash(r[0]);
        double v = 0.0;
        for (int i = 0; i < c_a.size(); ++i) v += c_a[i] / std::pow(rho, i) * hermite_fn(i, z);
        return v;
    };

    double theta = 0.0;
    for (int i = 0; i < std::min<long>(a_h.size(), c_a.size()); ++i) theta += a_h[i] * c_a[i];
    g.theta0 = theta;

    const GaussHermite quad(spec.quad_nodes);
    g.norm_x_sq = [quad](const Fn& f) {
        return quad.integrate([&](double x) {
            const double v = f((Eigen::RowVectorXd(1) << squash(x)).finished());
            return v * v;
        });
    };
    g.norm_z_sq = g.norm_x_sq;
    const double resid = std::sqrt(1.0 - rho * rho);
    g.op_image_norm_sq = [quad, rho, resid](const Fn& f) {
        return quad.integrate([&](double z) {
            const double img = quad.integrate([&](double e) {
                return f((Eigen::RowVectorXd(1) << squash(rho * z + resid * e)).finished());
            });
            return img * img;
        });
    };
    g.adj_image_norm_sq = g.op_image_norm_sq; // symmetric joint law
    return model;
}

// ---------------------------------------------------------------------------
// Finite-support proximal model
//
// Latent confounder U with proxies Q (outcome side) and Z (treatment side),
// binary treatment D, outcome Y = g(U, D) + noise.  The estimator sees the
// bridge problem between (Q, D) and (Z, D); ground truth comes from
// discrete_ground_truth on the induced operator.

struct ProximalSpec {
    int n_u = 2, n_q = 2, n_z = 2;
    double proxy_strength = 0.35;       // P(proxy = u | U = u) = 0.5 + strength (binary case)
    double treat_low = 0.25, treat_high = 0.75; // P(D=1|U) range
    double noise_eta = 0.1;
    std::uint64_t seed = 3;
    bool null_effect = false;
    double effect_size = 0.3;
};

struct ProximalModel {
    DiscreteTruth truth;   // induced (Q,D) x (Z,D) problem
    Eigen::VectorXd pu;
    Eigen::MatrixXd pq_u, pz_u; // proxy conditionals, n_q x n_u etc.
    Eigen::VectorXd pd_u;       // P(D=1|U)
    Eigen::MatrixXd g_ud;       // n_u x 2 outcome means
};

inline ProximalModel make_proximal_model(const ProximalSpec& spec) {
    require(spec.n_u >= 2 && spec.n_q >= spec.n_u && spec.n_z >= spec.n_u,
            "proxies need at least as many states as the confounder");
    ProximalModel model;
    Rng rng(spec.seed);

    model.pu.resize(spec.n_u);
    for (int u = 0; u < spec.n_u; ++u) model.pu[u] = 0.5 + rng.u01();
    model.pu /= model.pu.sum();

    auto proxy_table = [&](int rows) {
        Eigen::MatrixXd p(rows, spec.n_u);
        for (int u = 0; u < spec.n_u; ++u) {
            for (int r = 0; r < rows; ++r) p(r, u) = 0.15 + 0.7 * rng.u01();
            p(u % rows, u) += spec.proxy_strength * rows;
            p.col(u) /= p.col(u).sum();
        }
        return p;
    };
    model.pq_u = proxy_table(spec.n_q);
    model.pz_u = proxy_table(spec.n_z);

    model.pd_u.resize(spec.n_u);
    for (int u = 0; u < spec.n_u; ++u)
        model.pd_u[u] = spec.treat_low + (spec.treat_high - spec.treat_low) * rng.u01();

    model.g_ud.resize(spec.n_u, 2);
    for (int u = 0; u < spec.n_u; ++u) {
        const double base = rng.uniform(-0.4, 0.4);
        model.g_ud(u, 0) = base;
        model.g_ud(u, 1) = spec.null_effect ? base : base + spec.effect_size * (0.5 + rng.u01());
    }

    // observable overlap on (Q): P(D=1|Q=q) within [0.1, 0.9]
    for (int q = 0; q < spec.n_q; ++q) {
        double pd = 0.0, pq = 0.0;
        for (int u = 0; u < spec.n_u; ++u) {
            pd += model.pu[u] * model.pq_u(q, u) * model.pd_u[u];
            pq += model.pu[u] * model.pq_u(q, u);
        }
        const double prop = pd / pq;
        if (prop < 0.1 || prop > 0.9)
            throw std::invalid_argument("overlap violation: treatment propensity outside [0.1, 0.9]");
    }

    // induced discrete problem on x = (q, d), z = (z, d)
    const int kx = spec.n_q * 2, kz = spec.n_z * 2;
    auto xid = [&](int q, int d) { return q * 2 + d; };
    auto zid = [&](int z, int d) { return z * 2 + d; };

    Eigen::MatrixXd joint = Eigen::MatrixXd::Zero(kx, kz);   // P(q,d ; z,d)
    Eigen::MatrixXd ymean = Eigen::MatrixXd::Zero(kx, kz);   // E[Y | q,z,d]
    for (int u = 0; u < spec.n_u; ++u)
        for (int q = 0; q < spec.n_q; ++q)
            for (int z = 0; z < spec.n_z; ++z)
                for (int d = 0; d < 2; ++d) {
                    const double pd = d ? model.pd_u[u] : 1.0 - model.pd_u[u];
                    const double mass = model.pu[u] * model.pq_u(q, u) * model.pz_u(z, u) * pd;
                    joint(xid(q, d), zid(z, d)) += mass;
                    ymean(xid(q, d), zid(z, d)) += mass * model.g_ud(u, d);
                }
    for (int x = 0; x < kx; ++x)
        for (int z = 0; z < kz; ++z)
            if (joint(x, z) > 0) ymean(x, z) /= joint(x, z);

    DiscreteDGP dgp;
    dgp.pz = joint.colwise().sum();
    dgp.cond_xz = joint * dgp.pz.cwiseInverse().asDiagonal();
    dgp.outcome_xz = ymean;
    dgp.noise_eta = spec.noise_eta;
    dgp.x_states.resize(kx, 2);
    for (int q = 0; q < spec.n_q; ++q)
        for (int d = 0; d < 2; ++d) {
            dgp.x_states(xid(q, d), 0) = (spec.n_q == 1) ? 0.0 : -1.0 + 2.0 * q / (spec.n_q - 1.0);
            dgp.x_states(xid(q, d), 1) = d;
        }
    dgp.z_states.resize(kz, 2);
    for (int z = 0; z < spec.n_z; ++z)
        for (int d = 0; d < 2; ++d) {
            dgp.z_states(zid(z, d), 0) = (spec.n_z == 1) ? 0.0 : -1.0 + 2.0 * z / (spec.n_z - 1.0);
            dgp.z_states(zid(z, d), 1) = d;
        }
    dgp.functional_kind = MomentKind::eval_difference;
    dgp.shift1.assignments = {{1, 1.0}};
    dgp.shift0.assignments = {{1, 0.0}};

    model.truth = discrete_ground_truth(dgp);
    return model;
}

// observable propensity formula route to a0 (treatment over its probability)
inline Eigen::VectorXd proximal_a0_by_propensity(const DiscreteTruth& t) {
    const int kx = static_cast<int>(t.px.size());
    Eigen::VectorXd a0(kx);
    for (int x = 0; x < kx; ++x) {
        const Eigen::RowVectorXd row = t.dgp.x_states.row(x);
        const int other = t.x_index(row[1] > 0.5 ? t.dgp.shift0.apply(row) : t.dgp.shift1.apply(row));
        const double p_state = t.px[x] / (t.px[x] + t.px[other]); // P(D = d | Q = q)
        a0[x] = (row[1] > 0.5 ? 1.0 : -1.0) / p_state;
    }
    return a0;
}

} // namespace drip::dgp

#endif
