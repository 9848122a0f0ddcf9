#pragma once

#include <Eigen/Dense>

namespace heenet {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

enum class Exec { serial, parallel };

// V - X (X'X)^- X' V, rank-safe; avoids forming the n x n projector.
inline Matrix project_out(const Matrix& X, const Matrix& V) {
    if (X.size() == 0 || X.isZero(0.0)) return V;
    Eigen::CompleteOrthogonalDecomposition<Matrix> cod(X);
    return V - X * cod.solve(V);
}

inline Vector project_out(const Matrix& X, const Vector& v) {
    if (X.size() == 0 || X.isZero(0.0)) return v;
    Eigen::CompleteOrthogonalDecomposition<Matrix> cod(X);
    return v - X * cod.solve(v);
}

// 1-norm condition estimate from a partial-pivot LU.
inline double condition_estimate(const Matrix& A) {
    Eigen::PartialPivLU<Matrix> lu(A);
    const double rc = lu.rcond();
    if (rc <= 0.0) return std::numeric_limits<double>::infinity();
    return 1.0 / rc;
}

}  // namespace heenet
