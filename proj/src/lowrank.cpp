#include "tcert/lowrank.hpp"

#include <algorithm>
#include <stdexcept>

#include "tcert/moments.hpp"

namespace tcert {

Svd svd(const Mat& X)
{
    Eigen::JacobiSVD<Mat> s(X, Eigen::ComputeThinU | Eigen::ComputeThinV);
    return {s.matrixU(), s.singularValues(), s.matrixV()};
}

namespace {

void check_rank(const Mat& X, int r)
{
    if (r < 1 || r > std::min(X.rows(), X.cols())) throw std::invalid_argument("rank out of range");
}

}  // namespace

ProjectionResult project_rank(const Mat& X, int r, double tol_tie)
{
    check_rank(X, r);
    auto d = svd(X);
    ProjectionResult p;
    p.singular_values = d.s;
    p.projector = d.U.leftCols(r) * d.s.head(r).asDiagonal() * d.V.leftCols(r).transpose();
    p.residual_sq = d.s.tail(d.s.size() - r).squaredNorm();
    p.theta = 0.5 * d.s.head(r).squaredNorm();
    if (r < d.s.size()) p.tie_flag = d.s(r - 1) - d.s(r) <= tol_tie * std::max(d.s(0), 1e-300);
    return p;
}

double kyfan_norm(const Mat& X, int r)
{
    check_rank(X, r);
    return svd(X).s.head(r).sum();
}

double nuclear_norm(const Mat& X) { return svd(X).s.sum(); }

double spectral_norm(const Mat& X)
{
    if (X.size() == 0) return 0.0;
    return svd(X).s(0);
}

Mat kyfan_subgradient(const Mat& X, int r)
{
    check_rank(X, r);
    auto d = svd(X);
    Mat C = Mat::Zero(X.rows(), X.cols());
    for (int i = 0; i < r; ++i)
        if (d.s(i) > 0.0) C += d.U.col(i) * d.V.col(i).transpose();
    return C;
}

Mat soft_threshold(const Mat& A, double t)
{
    if (!(t > 0.0)) throw std::invalid_argument("threshold must be positive");
    auto d = svd(A);
    Vec s = (d.s.array() - t).max(0.0);
    return d.U * s.asDiagonal() * d.V.transpose();
}

int matrix_rank(const Mat& X, double tol_rank)
{
    if (X.size() == 0) return 0;
    return numerical_rank(svd(X).s, tol_rank);
}

bool membership_test(const Mat& Y, const Mat& X, int r, double tol, double tol_rank)
{
    if (Y.rows() != X.rows() || Y.cols() != X.cols()) throw std::invalid_argument("shape mismatch");
    auto p = project_rank(X, r);
    bool value_ok = 0.5 * (X - Y).squaredNorm() <= 0.5 * p.residual_sq + tol;
    return value_ok && matrix_rank(Y, tol_rank) <= r;
}

}  // namespace tcert
