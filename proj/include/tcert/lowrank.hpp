#pragma once

#include "tcert/tensor_core.hpp"

namespace tcert {

struct Svd {
    Mat U;
    Vec s;
    Mat V;
};

// Thin SVD shared by every routine here; deterministic for identical input.
Svd svd(const Mat& X);

struct ProjectionResult {
    Mat projector;
    double residual_sq = 0.0;
    double theta = 0.0;
    Vec singular_values;
    bool tie_flag = false;
};

ProjectionResult project_rank(const Mat& X, int r, double tol_tie = 1e-9);

double kyfan_norm(const Mat& X, int r);
double nuclear_norm(const Mat& X);
double spectral_norm(const Mat& X);

Mat kyfan_subgradient(const Mat& X, int r);

// U diag(max(d - t, 0)) V^T
Mat soft_threshold(const Mat& A, double t);

// Optimal value attained and rank(Y) <= r.
bool membership_test(const Mat& Y, const Mat& X, int r, double tol, double tol_rank = 1e-6);

int matrix_rank(const Mat& X, double tol_rank = 1e-6);

}  // namespace tcert
