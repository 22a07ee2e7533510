#include <doctest.h>

#include <cmath>
#include <random>

#include "tcert/lowrank.hpp"

using namespace tcert;

namespace {

Mat random_mat(int r, int c, std::mt19937_64& rng)
{
    std::normal_distribution<double> g;
    Mat M(r, c);
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) M(i, j) = g(rng);
    return M;
}

Mat diag3(double a, double b, double c)
{
    Vec d(3);
    d << a, b, c;
    return d.asDiagonal();
}

double theta(const Mat& X, int r) { return project_rank(X, r).theta; }

// prox of t * nuclear norm at A as a fixed point check: X = argmin 1/2||X - A||^2 + t||X||_*
// satisfies A - X in t * subdifferential of the nuclear norm at X
double prox_optimality_gap(const Mat& A, const Mat& X, double t)
{
    Mat G = (A - X) / t;
    double opnorm = svd(G).s.size() ? svd(G).s(0) : 0.0;
    double align = std::abs((G.array() * X.array()).sum() - nuclear_norm(X));
    return std::max(opnorm - 1.0, 0.0) + align;
}

}  // namespace

TEST_CASE("project_rank on a diagonal matrix")
{
    auto p = project_rank(diag3(3, 2, 1), 2);
    CHECK(p.projector.isApprox(diag3(3, 2, 0)));
    CHECK(p.residual_sq == doctest::Approx(1.0));
    CHECK(p.theta == doctest::Approx(6.5));
    CHECK_FALSE(p.tie_flag);
    CHECK(p.singular_values.size() == 3);
}

TEST_CASE("project_rank fixed point and ties")
{
    std::mt19937_64 rng(1);
    Mat X = random_mat(4, 2, rng) * random_mat(2, 6, rng);
    auto p = project_rank(X, 2);
    CHECK((p.projector - X).norm() <= 1e-12 * X.norm());
    CHECK(p.residual_sq <= 1e-20 * X.squaredNorm());

    auto t = project_rank(diag3(2, 1, 1), 1);
    CHECK_FALSE(t.tie_flag);
    auto t2 = project_rank(diag3(2, 1, 1), 2);
    CHECK(t2.tie_flag);

    CHECK_THROWS(project_rank(X, 0));
    CHECK_THROWS(project_rank(X, 5));
}

TEST_CASE("Eckart-Young residual")
{
    std::mt19937_64 rng(2);
    for (int t = 0; t < 20; ++t) {
        int m = 2 + t % 4, n = m * m;
        Mat X = random_mat(m, n, rng);
        auto s = svd(X).s;
        for (int r = 1; r <= m; ++r) {
            auto p = project_rank(X, r);
            double tail = 0.0;
            for (int i = r; i < s.size(); ++i) tail += s(i) * s(i);
            double d = (X - p.projector).squaredNorm();
            CHECK(std::abs(d - tail) <= 1e-10 * std::max(tail, 1e-300) + 1e-24);
            CHECK(std::abs(p.residual_sq - tail) <= 1e-10 * std::max(tail, 1.0));
            CHECK(p.theta == doctest::Approx(0.5 * X.squaredNorm() - 0.5 * p.residual_sq).epsilon(1e-12));
            CHECK(matrix_rank(p.projector) <= r);
        }
    }
}

TEST_CASE("theta convexity and subgradient inequality")
{
    std::mt19937_64 rng(3);
    for (int t = 0; t < 20; ++t) {
        Mat X1 = random_mat(3, 9, rng), X2 = random_mat(3, 9, rng), H = random_mat(3, 9, rng);
        for (int r = 1; r <= 2; ++r) {
            for (double l : {0.25, 0.5, 0.75})
                CHECK(theta(l * X1 + (1 - l) * X2, r) <= l * theta(X1, r) + (1 - l) * theta(X2, r) + 1e-9);
            Mat Y = project_rank(X1, r).projector;
            CHECK(theta(X1 + H, r) >= theta(X1, r) + (Y.array() * H.array()).sum() - 1e-9);
        }
    }
}

TEST_CASE("norms")
{
    CHECK(kyfan_norm(diag3(3, 2, 1), 2) == doctest::Approx(5.0));
    CHECK(nuclear_norm(diag3(3, 2, 1)) == doctest::Approx(6.0));
    CHECK(spectral_norm(diag3(3, 2, 1)) == doctest::Approx(3.0));
    CHECK(kyfan_norm(diag3(3, 2, 1), 3) == doctest::Approx(nuclear_norm(diag3(3, 2, 1))));
}

TEST_CASE("Ky Fan subgradient")
{
    CHECK(kyfan_subgradient(diag3(3, 2, 1), 2).isApprox(diag3(1, 1, 0)));
    CHECK(kyfan_subgradient(Mat::Zero(3, 4), 2).isZero(0));
    std::mt19937_64 rng(4);
    for (int t = 0; t < 10; ++t) {
        Mat X = random_mat(3, 9, rng), Y = random_mat(3, 9, rng);
        Mat C = kyfan_subgradient(X, 2);
        CHECK((C.array() * X.array()).sum() == doctest::Approx(kyfan_norm(X, 2)).epsilon(1e-12));
        CHECK(spectral_norm(C) <= 1.0 + 1e-12);
        CHECK(kyfan_norm(Y, 2) >= kyfan_norm(X, 2) + (C.array() * (Y - X).array()).sum() - 1e-12);
    }
}

TEST_CASE("soft threshold")
{
    CHECK(soft_threshold(diag3(3, 2, 1), 1.5).isApprox(diag3(1.5, 0.5, 0)));
    CHECK(soft_threshold(diag3(3, 2, 1), 3.0).isZero(1e-15));
    CHECK(soft_threshold(diag3(3, 2, 1), 4.0).isZero(1e-15));
    CHECK_THROWS(soft_threshold(diag3(3, 2, 1), 0.0));

    std::mt19937_64 rng(5);
    for (int t = 0; t < 20; ++t) {
        Mat A1 = random_mat(3, 9, rng), A2 = random_mat(3, 9, rng);
        double th = 0.2 + 0.3 * (t % 5);
        CHECK((soft_threshold(A1, th) - soft_threshold(A2, th)).norm() <= (A1 - A2).norm() + 1e-9);
        // agreement with the prox optimality condition
        CHECK(prox_optimality_gap(A1, soft_threshold(A1, th), th) <= 1e-8);
    }
}

TEST_CASE("membership test")
{
    std::mt19937_64 rng(6);
    Mat X = random_mat(3, 9, rng);
    for (int r = 1; r <= 3; ++r) CHECK(membership_test(project_rank(X, r).projector, X, r, 1e-9));
    CHECK_FALSE(membership_test(X, X, 2, 1e-9));
    CHECK(membership_test(diag3(2, 0, 0), diag3(2, 1, 1), 1, 1e-9));
    CHECK_FALSE(membership_test(diag3(0, 1, 0), diag3(2, 1, 1), 1, 1e-9));
}
