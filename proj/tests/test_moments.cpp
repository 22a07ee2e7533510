#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "tcert/moments.hpp"
#include "tcert/pipeline.hpp"

using namespace tcert;

namespace {

Vec random_unit(int n, std::mt19937_64& rng)
{
    std::normal_distribution<double> g;
    Vec x(n);
    for (int i = 0; i < n; ++i) x(i) = g(rng);
    return x.normalized();
}

Vec random_vec(int m, std::mt19937_64& rng)
{
    std::normal_distribution<double> g;
    Vec v(m);
    for (int i = 0; i < m; ++i) v(i) = g(rng);
    return v;
}

Mat random_mat(int r, int c, std::mt19937_64& rng)
{
    std::normal_distribution<double> g;
    Mat M(r, c);
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) M(i, j) = g(rng);
    return M;
}

// atoms with pairwise distance at least `sep`
AtomicMeasure separated_measure(int n, int r, double sep, std::mt19937_64& rng)
{
    std::uniform_real_distribution<double> w(0.5, 2.0);
    AtomicMeasure mu;
    while (static_cast<int>(mu.atoms.size()) < r) {
        Vec x = random_unit(n, rng);
        bool ok = true;
        for (const auto& a : mu.atoms) ok = ok && (a.vector - x).norm() >= sep;
        if (ok) mu.atoms.push_back({w(rng), x});
    }
    return mu;
}

double monomial(const Vec& x, const Exponent& a)
{
    double v = 1.0;
    for (std::size_t i = 0; i < a.size(); ++i) v *= std::pow(x(i), a[i]);
    return v;
}

// max over atoms of a of min over atoms b of distance and weight difference
double measure_distance(const AtomicMeasure& a, const AtomicMeasure& b)
{
    if (a.atoms.size() != b.atoms.size()) return 1e300;
    double worst = 0.0;
    for (const auto& p : a.atoms) {
        double best = 1e300;
        for (const auto& q : b.atoms)
            best = std::min(best, std::max((p.vector - q.vector).norm(), std::abs(p.weight - q.weight)));
        worst = std::max(worst, best);
    }
    return worst;
}

Vec sorted_nonzero_eigs(const Mat& M, double tol)
{
    Eigen::SelfAdjointEigenSolver<Mat> es(M);
    std::vector<double> v;
    for (int i = 0; i < es.eigenvalues().size(); ++i)
        if (es.eigenvalues()(i) > tol) v.push_back(es.eigenvalues()(i));
    std::sort(v.begin(), v.end());
    return Eigen::Map<Vec>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

TEST_CASE("graded lex order")
{
    auto m = graded_lex(2, 2);
    std::vector<Exponent> want = {{0, 0}, {1, 0}, {0, 1}, {2, 0}, {1, 1}, {0, 2}};
    CHECK(m == want);
    for (int n = 1; n <= 4; ++n)
        for (int d = 0; d <= 4; ++d) {
            auto e = graded_lex(n, d);
            CHECK(e.size() == zeta(n + 1, d));
            for (std::size_t i = 1; i < e.size(); ++i) {
                int d0 = 0, d1 = 0;
                for (int v : e[i - 1]) d0 += v;
                for (int v : e[i]) d1 += v;
                CHECK((d0 < d1 || (d0 == d1 && e[i - 1] > e[i])));
            }
        }
}

TEST_CASE("index table counts")
{
    for (int n = 2; n <= 4; ++n)
        for (int s = 1; s <= 4; ++s) {
            IndexTable t(n, s);
            CHECK(t.monomials.size() == zeta(n + 1, s));
            CHECK(t.words.size() == nu(n, s));
            CHECK(t.distinct_words_of_length(s) == zeta(n, s));
            for (std::size_t i = 0; i < t.monomials.size(); ++i) CHECK(t.index_of(t.monomials[i]) == static_cast<int>(i));
        }
}

TEST_CASE("moment matrix structure")
{
    for (int k : {2, 3}) {
        for (int n = 2; n <= 3; ++n) {
            MomentOps ops(n, k);
            CHECK(ops.ny() == static_cast<int>(zeta(n + 1, 2 * k)));
            CHECK(ops.dim_m() == static_cast<int>(zeta(n + 1, k)));
            std::mt19937_64 rng(10 * n + k);
            // sum_a x^a A_a = v v^T, checked through a Dirac at a random non-unit point
            Vec x = random_vec(n, rng);
            Vec y(ops.ny());
            for (int i = 0; i < ops.ny(); ++i) y(i) = monomial(x, ops.table().monomials[i]);
            Vec v = ops.monomial_vector(x, k);
            CHECK((ops.moment_matrix(y) - v * v.transpose()).norm() <= 1e-12 * std::max(1.0, v.squaredNorm()));
            CHECK(ops.moment_matrix(Vec::Zero(ops.ny())).isZero(0));
        }
    }
}

TEST_CASE("moment matrix of a unit Dirac")
{
    MomentOps ops(3, 2);
    AtomicMeasure mu;
    mu.atoms.push_back({1.0, Vec::Unit(3, 0)});
    Vec y = ops.moments_from_atoms(mu);
    for (int i = 0; i < ops.ny(); ++i) {
        const auto& a = ops.table().monomials[i];
        bool on_first = a[1] == 0 && a[2] == 0;
        CHECK(y(i) == (on_first ? 1.0 : 0.0));
    }
    Mat M = ops.moment_matrix(y);
    Vec v = ops.monomial_vector(Vec::Unit(3, 0), 2);
    CHECK((M - v * v.transpose()).norm() == 0.0);
    Eigen::JacobiSVD<Mat> svd(M);
    CHECK(numerical_rank(svd.singularValues(), 1e-6) == 1);
}

TEST_CASE("adjoint identities")
{
    std::mt19937_64 rng(77);
    for (int n = 2; n <= 4; ++n) {
        for (int k : {2, 3}) {
            if (n == 4 && k == 3) continue;
            MomentOps ops(n, k);
            for (int t = 0; t < 3; ++t) {
                Vec y = random_vec(ops.ny(), rng);
                Mat Z = random_mat(ops.dim_m(), ops.dim_m(), rng);
                Mat U = random_mat(n, n * n, rng);
                Mat W = random_mat(ops.dim_l(), ops.dim_l(), rng);
                double sm = (y.norm() + 1.0) * (Z.norm() + 1.0);
                CHECK(std::abs(ops.adjoint_M(Z).dot(y) - (Z.array() * ops.moment_matrix(y).array()).sum()) <= 1e-12 * sm);
                double sp = (y.norm() + 1.0) * (U.norm() + 1.0);
                CHECK(std::abs(ops.adjoint_P(U).dot(y) - (U.array() * ops.block_P(y).array()).sum()) <= 1e-12 * sp);
                double sl = (y.norm() + 1.0) * (W.norm() + 1.0);
                CHECK(std::abs(ops.adjoint_L(W).dot(y) - (W.array() * ops.localizing_matrix(y).array()).sum()) <=
                      1e-12 * sl);
                // compressed form of the localizing adjoint
                Vec w = ops.compress_W(W);
                CHECK((ops.localizing_constraints().transpose() * w - ops.adjoint_L(W)).norm() <= 1e-12 * sl);
            }
            CHECK_THROWS(ops.adjoint_M(Mat::Zero(2, 2)));
        }
    }
}

TEST_CASE("block P equals the flattened assembled tensor")
{
    std::mt19937_64 rng(8);
    for (int n = 2; n <= 4; ++n) {
        MomentOps ops(n, 2);
        AtomicMeasure mu = separated_measure(n, 3, 0.1, rng);
        Vec y = ops.moments_from_atoms(mu);
        CHECK((ops.block_P(y) - flatten(assemble(mu, n))).cwiseAbs().maxCoeff() <= 1e-12);
        CHECK(ops.block_P(Vec::Zero(ops.ny())).isZero(0));
    }
}

TEST_CASE("extended moment matrix rank matches the moment matrix rank")
{
    std::mt19937_64 rng(12);
    for (int n = 2; n <= 3; ++n) {
        MomentOps ops(n, 2);
        for (int r = 1; r <= 3; ++r) {
            AtomicMeasure mu = separated_measure(n, r, 0.3, rng);
            Vec y = ops.moments_from_atoms(mu);
            Eigen::JacobiSVD<Mat> a(ops.moment_matrix(y)), b(ops.extended_moment_matrix(y));
            CHECK(numerical_rank(a.singularValues(), 1e-9) == numerical_rank(b.singularValues(), 1e-9));
        }
        Vec y = random_vec(ops.ny(), rng);
        Eigen::JacobiSVD<Mat> a(ops.moment_matrix(y)), b(ops.extended_moment_matrix(y));
        CHECK(numerical_rank(a.singularValues(), 1e-9) == numerical_rank(b.singularValues(), 1e-9));
    }
}

TEST_CASE("localizing matrix")
{
    std::mt19937_64 rng(13);
    SUBCASE("sphere supported measures")
    {
        for (int n = 2; n <= 4; ++n) {
            MomentOps ops(n, 2);
            Vec y = ops.moments_from_atoms(separated_measure(n, 3, 0.1, rng));
            CHECK(ops.localizing_matrix(y).cwiseAbs().maxCoeff() <= 1e-12);
            CHECK((ops.localizing_constraints() * y).cwiseAbs().maxCoeff() <= 1e-12);
        }
    }
    SUBCASE("off sphere point mass")
    {
        MomentOps ops(2, 2);
        Vec x = 2.0 * Vec::Unit(2, 0);
        Vec y(ops.ny());
        for (int i = 0; i < ops.ny(); ++i) y(i) = monomial(x, ops.table().monomials[i]);
        Mat L = ops.localizing_matrix(y);
        CHECK(L(0, 0) == doctest::Approx(-3.0));
        CHECK(L.norm() > 0.0);
    }
    SUBCASE("zero") { CHECK(MomentOps(3, 2).localizing_matrix(Vec::Zero(35)).isZero(0)); }
}

TEST_CASE("moments of sphere measures are psd with rank equal to the support size")
{
    std::mt19937_64 rng(14);
    for (int n = 2; n <= 4; ++n) {
        MomentOps ops(n, 2);
        for (int r = 1; r <= n; ++r) {
            Vec y = ops.moments_from_atoms(separated_measure(n, r, 0.3, rng));
            Mat M = ops.moment_matrix(y);
            Eigen::SelfAdjointEigenSolver<Mat> es(M);
            CHECK(es.eigenvalues().minCoeff() >= -1e-12);
            Eigen::JacobiSVD<Mat> svd(M);
            CHECK(numerical_rank(svd.singularValues(), 1e-8) == r);
        }
    }
}

TEST_CASE("flatness")
{
    MomentOps ops(2, 2);
    SUBCASE("two atoms")
    {
        AtomicMeasure mu;
        Vec a(2);
        a << 0.6, 0.8;
        mu.atoms.push_back({1.0, Vec::Unit(2, 0)});
        mu.atoms.push_back({2.0, a});
        auto f = flatness(ops, ops.moments_from_atoms(mu));
        CHECK(f.rank_prev == 2);
        CHECK(f.rank_k == 2);
        CHECK(f.flat);
    }
    SUBCASE("zero")
    {
        auto f = flatness(ops, Vec::Zero(ops.ny()));
        CHECK(f.rank_prev == 0);
        CHECK(f.rank_k == 0);
        CHECK(f.flat);
    }
    SUBCASE("four atoms exceed the order one rank")
    {
        std::mt19937_64 rng(15);
        auto f = flatness(ops, ops.moments_from_atoms(separated_measure(2, 4, 0.3, rng)));
        CHECK(f.rank_prev == 3);
        CHECK(f.rank_k == 4);
        CHECK_FALSE(f.flat);
    }
}

TEST_CASE("atom extraction round trip")
{
    SUBCASE("single Dirac")
    {
        std::mt19937_64 rng(16);
        for (int n = 2; n <= 4; ++n) {
            MomentOps ops(n, 2);
            AtomicMeasure mu;
            mu.atoms.push_back({1.0, random_unit(n, rng)});
            auto res = extract_atoms(ops, ops.moments_from_atoms(mu));
            CHECK(measure_distance(res.atoms, mu) <= 1e-8);
        }
    }
    SUBCASE("random separated measures")
    {
        std::mt19937_64 rng(17);
        for (int n = 2; n <= 4; ++n) {
            MomentOps ops(n, 2);
            for (int r = 1; r <= std::min(3, n + 1); ++r) {
                for (int t = 0; t < 3; ++t) {
                    AtomicMeasure mu = separated_measure(n, r, 0.5, rng);
                    ExtractionOptions eo;
                    eo.seed = static_cast<std::uint64_t>(t);
                    auto res = extract_atoms(ops, ops.moments_from_atoms(mu), eo);
                    CHECK(measure_distance(res.atoms, mu) <= 1e-8);
                    CHECK(res.moment_error <= 1e-8);
                }
            }
        }
    }
    SUBCASE("non flat input")
    {
        MomentOps ops(2, 2);
        std::mt19937_64 rng(18);
        Vec y = ops.moments_from_atoms(separated_measure(2, 4, 0.3, rng));
        CHECK_THROWS_AS(extract_atoms(ops, y), ExtractionError);
    }
}

TEST_CASE("printed moment vectors")
{
    const std::string dir = TCERT_DATA_DIR;
    SUBCASE("rank two example in the plane")
    {
        auto ex = load_example(dir, 4);
        MomentOps ops(2, 2);
        Vec y = vec_from_json(ex.golden["y"]);
        REQUIRE(y.size() == ops.ny());
        // P block against the printed approximant
        Mat P = ops.block_P(y);
        auto b = ex.golden["B"].get<std::vector<double>>();
        CHECK(std::abs(P(0, 0) - b[0]) <= 1e-3);
        CHECK(std::abs(P(0, 1) - b[1]) <= 1e-3);
        CHECK(std::abs(P(0, 3) - b[2]) <= 1e-3);
        CHECK(std::abs(P(1, 3) - b[3]) <= 1e-3);
        // printed decomposition against the printed y
        AtomicMeasure mu = atoms_from_json(ex.golden["atoms"]);
        Vec ym = ops.moments_from_atoms(mu);
        CHECK((ym - y).cwiseAbs().maxCoeff() <= 1e-3);
        // the printed y is rounded to four digits, so ranks are read at a matching threshold
        ExtractionOptions eo;
        eo.tol_rank = 1e-3;
        eo.tol_feas = 1e-3;
        eo.tol_psd = 1e-3;
        eo.tol_sphere = 1e-2;
        auto res = extract_atoms(ops, y, eo);
        CHECK(measure_distance(res.atoms, mu) <= 1e-3);
        auto f = flatness(ops, y, 1e-3, 1e-3, 1e-3);
        CHECK(f.rank_prev == 2);
        CHECK(f.rank_k == 2);
        CHECK(f.flat);
    }
    SUBCASE("rank two example in three dimensions")
    {
        auto ex = load_example(dir, 5);
        MomentOps ops(3, 2);
        Vec y = vec_from_json(ex.golden["y"]);
        REQUIRE(y.size() == 35);
        auto f = flatness(ops, y, 1e-3, 1e-3, 1e-3);
        CHECK(f.rank_prev == 2);
        CHECK(f.rank_k == 2);
        CHECK(f.flat);
        // the printed pairs carry swapped labels: the smaller matrix interlaces inside the larger one
        Vec m1 = sorted_nonzero_eigs(ops.moment_matrix(y, 1), 1e-2);
        Vec m2 = sorted_nonzero_eigs(ops.moment_matrix(y), 1e-2);
        auto p1 = ex.golden["M1_eigs"].get<std::vector<double>>();
        auto p2 = ex.golden["M2_eigs"].get<std::vector<double>>();
        REQUIRE(m1.size() == 2);
        REQUIRE(m2.size() == 2);
        for (int i = 0; i < 2; ++i) {
            CHECK(std::abs(m1(i) - p2[i]) <= 1e-2);
            CHECK(std::abs(m2(i) - p1[i]) <= 1e-2);
        }
    }
}

TEST_CASE("moment sequence json")
{
    MomentSequence m{2, 2, Vec::LinSpaced(15, 0.0, 1.4)};
    MomentSequence b = moments_from_json_string(moments_to_json_string(m));
    CHECK(b.n == 2);
    CHECK(b.k == 2);
    CHECK(b.y == m.y);
    CHECK_THROWS(moments_from_json_string(R"({"n":2,"k":2,"y":[1,2,3]})"));
}
