#ifndef SMSRECON_LSTSQ_HPP
#define SMSRECON_LSTSQ_HPP

// Regularized complex least squares via SVD filter factors.
//
// Solves min_X ||A X - B||_F^2 + lambda ||X||_F^2 for lambda > 0, and the
// minimum-norm least-squares solution (truncated pseudoinverse) for
// lambda = 0. Both cases reduce to X = V f(S) U^H B with filter factors
// f(s) = s / (s^2 + lambda), where singular values below rcond * s_max are
// dropped when lambda = 0.

#include <Eigen/Dense>

#include "smsrecon/errors.hpp"

namespace smsrecon {

using CMat = Eigen::MatrixXcd;
using CVec = Eigen::VectorXcd;

inline CMat solve_regularized_lstsq(const CMat& A, const CMat& B, double lambda,
                                    double rcond = 1e-12) {
    if (A.rows() != B.rows())
        throw ShapeError("solve_regularized_lstsq: A and B row counts differ");
    if (A.rows() == 0 || A.cols() == 0)
        throw ArgumentError("solve_regularized_lstsq: empty system");
    if (lambda < 0.0) throw ArgumentError("solve_regularized_lstsq: lambda must be >= 0");

    Eigen::BDCSVD<CMat> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::VectorXd& s = svd.singularValues();
    const double smax = s.size() > 0 ? s(0) : 0.0;

    Eigen::VectorXd f = Eigen::VectorXd::Zero(s.size());
    for (Eigen::Index i = 0; i < s.size(); ++i) {
        if (lambda > 0.0)
            f(i) = s(i) / (s(i) * s(i) + lambda);
        else if (s(i) > rcond * smax && s(i) > 0.0)
            f(i) = 1.0 / s(i);
    }
    return svd.matrixV() * (f.asDiagonal() * (svd.matrixU().adjoint() * B));
}

/// Scale-invariant default Tikhonov weight: 1e-6 x mean diagonal of A^H A.
inline double default_tikhonov(const CMat& A) {
    if (A.cols() == 0) return 0.0;
    return 1e-6 * A.squaredNorm() / static_cast<double>(A.cols());
}

} // namespace smsrecon

#endif
