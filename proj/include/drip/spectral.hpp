#ifndef DRIP_SPECTRAL_HPP
#define DRIP_SPECTRAL_HPP

// Exact finite-dimensional spectral model of a linear inverse problem T h = r.
//
// The operator is a truncated singular system {sigma_i, u_i, v_i} with
// 1 >= sigma_1 >= ... >= sigma_K >= 0.  Everything here works directly on the
// coordinates of functions in the right singular basis, where regularization
// has closed form:
//
//   Tikhonov           a_i* = sigma_i^2 / (sigma_i^2 + lambda) * a_i0
//   iterated Tikhonov  a_i* = [1 - (lambda / (sigma_i^2 + lambda))^t] * a_i0
//
// A source function of degree beta is a_i0 = sigma_i^beta * w_i, which makes
// the bias of either filter analytically computable.  These closed forms are
// the oracle against which the sample-based estimators are tested.

#include <algorithm>
#include <cmath>
#include <utility>

#include <Eigen/Dense>
#include <json.hpp>

#include "drip/common.hpp"

namespace drip::spectral {

enum class BasisId { coordinate, cosine, hermite };

inline std::string basis_name(BasisId b) {
    switch (b) {
        case BasisId::coordinate: return "coordinate";
        case BasisId::cosine: return "cosine";
        case BasisId::hermite: return "hermite";
    }
    return "coordinate";
}

inline BasisId basis_from_name(const std::string& s) {
    if (s == "coordinate") return BasisId::coordinate;
    if (s == "cosine") return BasisId::cosine;
    if (s == "hermite") return BasisId::hermite;
    throw std::invalid_argument("unknown basis id: " + s);
}

struct SpectralOperator {
    Eigen::VectorXd singular_values; // descending, in [0,1]
    BasisId basis = BasisId::coordinate;

    int dim() const { return static_cast<int>(singular_values.size()); }

    void validate() const {
        require(singular_values.size() > 0, "operator needs at least one singular value");
        for (int i = 0; i < dim(); ++i) {
            double s = singular_values[i];
            require(s >= 0.0 && s <= 1.0, "singular values must lie in [0,1]");
            if (i > 0) require(singular_values[i - 1] >= s, "singular values must be descending");
        }
    }
};

// Coordinates of h0 = (T*T)^{beta/2} w in the right singular basis, together
// with the source degree and ||w||^2 (the constant appearing in bias bounds).
struct SourceFunction {
    Eigen::VectorXd coefficients; // a_i0
    double beta = 0.0;
    double w_norm_sq = 0.0;
};

struct RateExponents {
    double alpha_unknown_side = 0.0;
    double alpha_known_side = 0.0;
    double alpha_smooth = 0.0;
    double kappa_strong = 0.0;
    double beta = 0.0;
    double gamma = 0.0;
};

inline SourceFunction make_source_solution(const SpectralOperator& op, double beta,
                                           const Eigen::VectorXd& w) {
    op.validate();
    require(beta >= 0.0, "beta must be nonnegative");
    require(w.size() == op.singular_values.size(), "w length must match operator dimension");
    SourceFunction src;
    src.beta = beta;
    src.coefficients.resize(w.size());
    for (int i = 0; i < w.size(); ++i) {
        const double s = op.singular_values[i];
        if (s == 0.0) {
            require(w[i] == 0.0, "w must vanish on zero singular values");
            src.coefficients[i] = 0.0;
        } else {
            // beta = 0 is the exact identity power
            src.coefficients[i] = (beta == 0.0) ? w[i] : std::pow(s, beta) * w[i];
        }
    }
    src.w_norm_sq = w.squaredNorm();
    return src;
}

inline double tikhonov_filter(double sigma, double lambda) {
    const double s2 = sigma * sigma;
    return s2 / (s2 + lambda);
}

inline double iterated_tikhonov_filter(double sigma, double lambda, int t) {
    if (t == 1) return tikhonov_filter(sigma, lambda); // recursion base, bit-exact
    const double s2 = sigma * sigma;
    return 1.0 - std::pow(lambda / (s2 + lambda), t);
}

inline Eigen::VectorXd tikhonov_coefficients(const SpectralOperator& op,
                                             const SourceFunction& src, double lambda) {
    require(lambda > 0.0, "lambda must be positive");
    require(src.coefficients.size() == op.singular_values.size(), "source/operator dimension mismatch");
    Eigen::VectorXd out(src.coefficients.size());
    for (int i = 0; i < out.size(); ++i)
        out[i] = tikhonov_filter(op.singular_values[i], lambda) * src.coefficients[i];
    return out;
}

inline Eigen::VectorXd iterated_tikhonov_coefficients(const SpectralOperator& op,
                                                      const SourceFunction& src, double lambda,
                                                      int t) {
    require(lambda > 0.0, "lambda must be positive");
    require(t >= 1, "iteration count must be at least 1");
    require(src.coefficients.size() == op.singular_values.size(), "source/operator dimension mismatch");
    Eigen::VectorXd out(src.coefficients.size());
    for (int i = 0; i < out.size(); ++i)
        out[i] = iterated_tikhonov_filter(op.singular_values[i], lambda, t) * src.coefficients[i];
    return out;
}

// One-step update of the regularized criterion solved coordinatewise:
//   a_i <- (sigma_i^2 a_i0 + lambda a_i^{prev}) / (sigma_i^2 + lambda).
// Iterating from zero must reproduce iterated_tikhonov_coefficients; tests use
// this recursion as the independent route to the closed-form filter.
inline Eigen::VectorXd tikhonov_recursion_step(const SpectralOperator& op,
                                               const SourceFunction& src, double lambda,
                                               const Eigen::VectorXd& prev) {
    require(prev.size() == op.singular_values.size(), "center dimension mismatch");
    Eigen::VectorXd out(prev.size());
    for (int i = 0; i < prev.size(); ++i) {
        const double s2 = op.singular_values[i] * op.singular_values[i];
        out[i] = (s2 * src.coefficients[i] + lambda * prev[i]) / (s2 + lambda);
    }
    return out;
}

// (strong, weak) squared bias of a candidate coefficient vector:
//   strong = sum (a_i - a_i0)^2,   weak = sum sigma_i^2 (a_i - a_i0)^2.
inline std::pair<double, double> bias_norms(const SpectralOperator& op, const SourceFunction& src,
                                            const Eigen::VectorXd& reg_coeffs) {
    require(reg_coeffs.size() == op.singular_values.size(), "coefficient dimension mismatch");
    double strong = 0.0, weak = 0.0;
    for (int i = 0; i < reg_coeffs.size(); ++i) {
        const double d = reg_coeffs[i] - src.coefficients[i];
        strong += d * d;
        weak += op.singular_values[i] * op.singular_values[i] * d * d;
    }
    return {strong, weak};
}

// Analytic bias bounds ||w||^2 lambda^{min(beta,2t)} / ||w||^2 lambda^{min(beta+1,2t)}.
inline double strong_bias_bound(const SourceFunction& src, double lambda, int t) {
    return src.w_norm_sq * std::pow(lambda, std::min(src.beta, 2.0 * t));
}

inline double weak_bias_bound(const SourceFunction& src, double lambda, int t) {
    return src.w_norm_sq * std::pow(lambda, std::min(src.beta + 1.0, 2.0 * t));
}

// Required critical-radius exponents and the strong-metric rate exponent as
// functions of the source degree.  The floor guards only the (1+beta)/(4 beta)
// branch against division by zero; that branch is inactive for small beta, so
// the curves stay exact in the beta -> 0 limit.
inline RateExponents rate_exponents(double beta, double gamma) {
    require(beta >= 0.0, "beta must be nonnegative");
    require(gamma >= 0.0 && gamma <= 1.0, "gamma must lie in [0,1]");
    const double bm = std::min(beta, 1.0);
    const double b_div = std::max(beta, 1e-6);
    RateExponents r;
    r.beta = beta;
    r.gamma = gamma;
    r.alpha_unknown_side =
        std::min((1.0 + bm) / (2.0 + 4.0 * bm), (1.0 + b_div) / (4.0 * b_div));
    r.alpha_known_side =
        std::min((1.0 + bm) / (2.0 + 4.0 * bm), (2.0 + beta) / (4.0 + 4.0 * beta));
    r.alpha_smooth = (1.0 + beta) / (2.0 + 4.0 * beta);
    r.kappa_strong = 2.0 * std::max(bm / (1.0 + bm), beta / (2.0 + beta));
    return r;
}

inline nlohmann::json to_json(const SpectralOperator& op, const SourceFunction& src,
                              const Eigen::VectorXd& w) {
    nlohmann::json j;
    j["singular_values"] = std::vector<double>(op.singular_values.begin(), op.singular_values.end());
    j["basis"] = basis_name(op.basis);
    j["beta"] = src.beta;
    j["w"] = std::vector<double>(w.begin(), w.end());
    return j;
}

inline std::pair<SpectralOperator, SourceFunction> from_json(const nlohmann::json& j) {
    SpectralOperator op;
    const auto sv = j.at("singular_values").get<std::vector<double>>();
    op.singular_values = Eigen::Map<const Eigen::VectorXd>(sv.data(), static_cast<long>(sv.size()));
    op.basis = basis_from_name(j.value("basis", "coordinate"));
    const auto wv = j.at("w").get<std::vector<double>>();
    Eigen::VectorXd w = Eigen::Map<const Eigen::VectorXd>(wv.data(), static_cast<long>(wv.size()));
    SourceFunction src = make_source_solution(op, j.at("beta").get<double>(), w);
    return {op, src};
}

} // namespace drip::spectral

#endif
