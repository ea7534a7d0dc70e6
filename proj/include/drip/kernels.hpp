#ifndef DRIP_KERNELS_HPP
#define DRIP_KERNELS_HPP

// Kernel machinery: Gram assembly, functions in representer form, and the
// linear moment functionals paired against kernel sections.

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "drip/common.hpp"
#include "drip/data.hpp"

namespace drip {

enum class KernelFamily { gaussian, polynomial, discrete_delta };

inline std::string kernel_family_name(KernelFamily f) {
    switch (f) {
        case KernelFamily::gaussian: return "gaussian";
        case KernelFamily::polynomial: return "polynomial";
        case KernelFamily::discrete_delta: return "discrete_delta";
    }
    return "gaussian";
}

inline KernelFamily kernel_family_from_name(const std::string& s) {
    if (s == "gaussian") return KernelFamily::gaussian;
    if (s == "polynomial") return KernelFamily::polynomial;
    if (s == "discrete_delta") return KernelFamily::discrete_delta;
    throw std::invalid_argument("unknown kernel family: " + s);
}

struct KernelSpec {
    KernelFamily family = KernelFamily::gaussian;
    double bandwidth = 1.0; // gaussian; <= 0 requests the median heuristic
    int degree = 2;         // polynomial
    int input_dim = 1;
};

inline double kernel_eval(const KernelSpec& k, const Eigen::RowVectorXd& a,
                          const Eigen::RowVectorXd& b) {
    switch (k.family) {
        case KernelFamily::gaussian: {
            const double d2 = (a - b).squaredNorm();
            return std::exp(-d2 / (2.0 * k.bandwidth * k.bandwidth));
        }
        case KernelFamily::polynomial: {
            return std::pow(1.0 + a.dot(b), k.degree);
        }
        case KernelFamily::discrete_delta: {
            return a == b ? 1.0 : 0.0;
        }
    }
    return 0.0;
}

// d/d b_coord of k(a, b); closed form exists for the gaussian family only.
inline double kernel_grad_second(const KernelSpec& k, const Eigen::RowVectorXd& a,
                                 const Eigen::RowVectorXd& b, int coord) {
    require(k.family == KernelFamily::gaussian,
            "analytic kernel gradient only available for the gaussian family");
    const double v = kernel_eval(k, a, b);
    return v * (a[coord] - b[coord]) / (k.bandwidth * k.bandwidth);
}

inline Eigen::MatrixXd gram(const KernelSpec& k, const Eigen::MatrixXd& pts_a,
                            const Eigen::MatrixXd& pts_b) {
    require(pts_a.cols() == pts_b.cols(), "gram: point dimension mismatch");
    require(pts_a.allFinite() && pts_b.allFinite(), "gram: non-finite inputs");
    Eigen::MatrixXd m(pts_a.rows(), pts_b.rows());
    for (long i = 0; i < pts_a.rows(); ++i)
        for (long j = 0; j < pts_b.rows(); ++j)
            m(i, j) = kernel_eval(k, pts_a.row(i), pts_b.row(j));
    return m;
}

// Relative diagonal jitter applied to every symmetric Gram-type matrix before
// factorization; clustered samples make these numerically rank-deficient.
inline double default_jitter(const Eigen::MatrixXd& m) {
    const double tr = m.trace();
    const double base = tr > 0 ? tr / static_cast<double>(m.rows()) : 1.0;
    return 1e-10 * base;
}

inline Eigen::MatrixXd symmetric_gram(const KernelSpec& k, const Eigen::MatrixXd& pts) {
    Eigen::MatrixXd m = gram(k, pts, pts);
    m = ((m + m.transpose()) / 2.0).eval();
    return m;
}

// Median pairwise distance, the default bandwidth.  Rows are strided down to
// at most 2000 before the O(n^2) scan.
inline double median_heuristic_bandwidth(const Eigen::MatrixXd& pts) {
    const long n = pts.rows();
    if (n < 2) return 1.0;
    const long stride = (n > 2000) ? (n + 1999) / 2000 : 1;
    std::vector<long> idx;
    for (long i = 0; i < n; i += stride) idx.push_back(i);
    std::vector<double> d;
    d.reserve(idx.size() * (idx.size() - 1) / 2);
    for (size_t i = 0; i < idx.size(); ++i)
        for (size_t j = i + 1; j < idx.size(); ++j)
            d.push_back((pts.row(idx[i]) - pts.row(idx[j])).norm());
    if (d.empty()) return 1.0;
    std::nth_element(d.begin(), d.begin() + static_cast<long>(d.size() / 2), d.end());
    double med = d[d.size() / 2];
    return med > 0 ? med : 1.0;
}

inline KernelSpec resolve_bandwidth(KernelSpec k, const Eigen::MatrixXd& pts) {
    if (k.family == KernelFamily::gaussian && k.bandwidth <= 0.0)
        k.bandwidth = median_heuristic_bandwidth(pts);
    k.input_dim = static_cast<int>(pts.cols());
    return k;
}

struct RepresentedFunction {
    Eigen::MatrixXd anchors;
    Eigen::VectorXd coeffs;
    KernelSpec kernel;
    double offset = 0.0;

    double operator()(const Eigen::RowVectorXd& p) const {
        double v = offset;
        for (long j = 0; j < anchors.rows(); ++j)
            v += coeffs[j] * kernel_eval(kernel, anchors.row(j), p);
        return v;
    }

    Eigen::VectorXd eval_rows(const Eigen::MatrixXd& pts) const {
        return (gram(kernel, pts, anchors) * coeffs).array() + offset;
    }

    double rkhs_norm_sq() const {
        return coeffs.dot(symmetric_gram(kernel, anchors) * coeffs);
    }
};

inline nlohmann::json kernel_to_json(const KernelSpec& k) {
    return {{"family", kernel_family_name(k.family)},
            {"bandwidth", k.bandwidth},
            {"degree", k.degree},
            {"input_dim", k.input_dim}};
}

inline KernelSpec kernel_from_json(const nlohmann::json& j) {
    KernelSpec k;
    k.family = kernel_family_from_name(j.at("family").get<std::string>());
    k.bandwidth = j.value("bandwidth", 1.0);
    k.degree = j.value("degree", 2);
    k.input_dim = j.value("input_dim", 1);
    return k;
}

inline nlohmann::json represented_to_json(const RepresentedFunction& f) {
    nlohmann::json j;
    j["kernel"] = kernel_to_json(f.kernel);
    j["offset"] = f.offset;
    j["coeffs"] = std::vector<double>(f.coeffs.begin(), f.coeffs.end());
    auto rows = nlohmann::json::array();
    for (long i = 0; i < f.anchors.rows(); ++i)
        rows.push_back(std::vector<double>(f.anchors.row(i).begin(), f.anchors.row(i).end()));
    j["anchors"] = rows;
    return j;
}

inline RepresentedFunction represented_from_json(const nlohmann::json& j) {
    RepresentedFunction f;
    f.kernel = kernel_from_json(j.at("kernel"));
    f.offset = j.value("offset", 0.0);
    const auto cv = j.at("coeffs").get<std::vector<double>>();
    f.coeffs = Eigen::Map<const Eigen::VectorXd>(cv.data(), static_cast<long>(cv.size()));
    const auto& rows = j.at("anchors");
    require(rows.size() == cv.size(), "anchors/coeffs length mismatch");
    if (!rows.empty()) {
        f.anchors.resize(static_cast<long>(rows.size()), static_cast<long>(rows[0].size()));
        for (size_t i = 0; i < rows.size(); ++i) {
            const auto rv = rows[i].get<std::vector<double>>();
            f.anchors.row(static_cast<long>(i)) =
                Eigen::Map<const Eigen::RowVectorXd>(rv.data(), static_cast<long>(rv.size()));
        }
    }
    return f;
}

// ---------------------------------------------------------------------------
// Moment functionals

enum class MomentKind { outcome_product, weighted_average, eval_difference, avg_derivative };
enum class Block { x, z };

// Column overrides applied to a row, e.g. "set the treatment column to 1".
struct ShiftSpec {
    std::vector<std::pair<int, double>> assignments;

    Eigen::RowVectorXd apply(Eigen::RowVectorXd row) const {
        for (const auto& [c, v] : assignments) row[c] = v;
        return row;
    }

    bool operator==(const ShiftSpec&) const = default;
};

// A linear functional w -> m(W; f) of a test function f reading one data
// block.  The pairing with kernel sections (moment_vector) turns it into a
// vector so that E_n[m(W; f)] = <moment_vector, coeffs> for represented f.
struct MomentFunctional {
    MomentKind kind = MomentKind::outcome_product;
    Block arg_block = Block::z;
    std::string outcome = "y";                        // outcome_product
    std::function<double(const Eigen::RowVectorXd&)> weight; // weighted_average
    ShiftSpec shift1, shift0;                         // eval_difference
    int deriv_coord = 0;                              // avg_derivative

    const Eigen::MatrixXd& block(const Dataset& d) const {
        return arg_block == Block::x ? d.x : d.z;
    }

    template <class Fn>
    double eval_sample(const Dataset& d, int i, const Fn& f) const {
        const Eigen::RowVectorXd row = block(d).row(i);
        switch (kind) {
            case MomentKind::outcome_product:
                return d.column(outcome)[i] * f(row);
            case MomentKind::weighted_average:
                return (weight ? weight(row) : 1.0) * f(row);
            case MomentKind::eval_difference:
                return f(shift1.apply(row)) - f(shift0.apply(row));
            case MomentKind::avg_derivative: {
                // central difference; represented functions go through the
                // analytic kernel gradient in moment_vector instead.  An
                // optional weight multiplies the derivative per sample
                // (e.g. a change-of-variables Jacobian).
                const double h = 1e-5;
                Eigen::RowVectorXd up = row, dn = row;
                up[deriv_coord] += h;
                dn[deriv_coord] -= h;
                const double w = weight ? weight(row) : 1.0;
                return w * (f(up) - f(dn)) / (2.0 * h);
            }
        }
        return 0.0;
    }

    template <class Fn>
    double empirical_mean(const Dataset& d, const Fn& f) const {
        double s = 0.0;
        for (int i = 0; i < d.n(); ++i) s += eval_sample(d, i, f);
        return s / d.n();
    }
};

// v_j = E_n[m(W; k(anchor_j, .))]; the empirical pairing of the functional
// with each kernel section.
inline Eigen::VectorXd moment_vector(const MomentFunctional& mf, const Dataset& data,
                                     const KernelSpec& kernel, const Eigen::MatrixXd& anchors) {
    const Eigen::MatrixXd& pts = mf.block(data);
    require(pts.cols() == anchors.cols(), "moment_vector: anchor dimension mismatch");
    const int n = data.n();
    Eigen::VectorXd v = Eigen::VectorXd::Zero(anchors.rows());
    switch (mf.kind) {
        case MomentKind::outcome_product: {
            const Eigen::VectorXd& y = data.column(mf.outcome);
            for (long j = 0; j < anchors.rows(); ++j) {
                double s = 0.0;
                for (int i = 0; i < n; ++i) s += y[i] * kernel_eval(kernel, anchors.row(j), pts.row(i));
                v[j] = s / n;
            }
            break;
        }
        case MomentKind::weighted_average: {
            for (long j = 0; j < anchors.rows(); ++j) {
                double s = 0.0;
                for (int i = 0; i < n; ++i) {
                    const double w = mf.weight ? mf.weight(pts.row(i)) : 1.0;
                    s += w * kernel_eval(kernel, anchors.row(j), pts.row(i));
                }
                v[j] = s / n;
            }
            break;
        }
        case MomentKind::eval_difference: {
            for (long j = 0; j < anchors.rows(); ++j) {
                double s = 0.0;
                for (int i = 0; i < n; ++i) {
                    const Eigen::RowVectorXd row = pts.row(i);
                    s += kernel_eval(kernel, anchors.row(j), mf.shift1.apply(row)) -
                         kernel_eval(kernel, anchors.row(j), mf.shift0.apply(row));
                }
                v[j] = s / n;
            }
            break;
        }
        case MomentKind::avg_derivative: {
            require(kernel.family == KernelFamily::gaussian,
                    "avg_derivative requires a kernel with an analytic gradient (gaussian)");
            for (long j = 0; j < anchors.rows(); ++j) {
                double s = 0.0;
                for (int i = 0; i < n; ++i) {
                    const double w = mf.weight ? mf.weight(pts.row(i)) : 1.0;
                    s += w * kernel_grad_second(kernel, anchors.row(j), pts.row(i), mf.deriv_coord);
                }
                v[j] = s / n;
            }
            break;
        }
    }
    return v;
}

} // namespace drip

#endif
