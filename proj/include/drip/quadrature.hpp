#ifndef DRIP_QUADRATURE_HPP
#define DRIP_QUADRATURE_HPP

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "drip/common.hpp"

namespace drip {

// Gauss-Hermite rule for the standard normal measure (Golub-Welsch on the
// probabilists' recurrence).  Weights sum to one.
struct GaussHermite {
    Eigen::VectorXd nodes;
    Eigen::VectorXd weights;

    explicit GaussHermite(int n) {
        require(n >= 1, "quadrature order must be positive");
        Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(n, n);
        for (int i = 1; i < n; ++i) {
            const double b = std::sqrt(static_cast<double>(i));
            jac(i, i - 1) = b;
            jac(i - 1, i) = b;
        }
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(jac);
        nodes = es.eigenvalues();
        weights.resize(n);
        for (int i = 0; i < n; ++i) {
            const double v = es.eigenvectors()(0, i);
            weights[i] = v * v;
        }
    }

    template <class Fn>
    double integrate(const Fn& f) const {
        double s = 0.0;
        for (int i = 0; i < nodes.size(); ++i) s += weights[i] * f(nodes[i]);
        return s;
    }
};

// Normalized probabilists' Hermite polynomials: orthonormal under N(0,1).
inline double hermite_fn(int k, double x) {
    double prev = 1.0; // He_0
    if (k == 0) return 1.0;
    double cur = x; // He_1
    for (int i = 2; i <= k; ++i) {
        const double next = x * cur - (i - 1) * prev;
        prev = cur;
        cur = next;
    }
    double fact = 1.0;
    for (int i = 2; i <= k; ++i) fact *= i;
    return cur / std::sqrt(fact);
}

} // namespace drip

#endif
