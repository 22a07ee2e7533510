#include "tcert/moments.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <json.hpp>

namespace tcert {

namespace {

Exponent add(const Exponent& a, const Exponent& b)
{
    Exponent c(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) c[i] = a[i] + b[i];
    return c;
}

Exponent unit(int n, int i, int p = 1)
{
    Exponent e(n, 0);
    e[i] = p;
    return e;
}

int degree(const Exponent& a)
{
    int d = 0;
    for (int v : a) d += v;
    return d;
}

void compositions(int n, int deg, int pos, Exponent& cur, std::vector<Exponent>& out)
{
    if (pos == n - 1) {
        cur[pos] = deg;
        out.push_back(cur);
        return;
    }
    for (int v = deg; v >= 0; --v) {
        cur[pos] = v;
        compositions(n, deg - v, pos + 1, cur, out);
    }
}

}  // namespace

std::vector<Exponent> graded_lex(int n, int d)
{
    std::vector<Exponent> out;
    Exponent cur(n, 0);
    for (int deg = 0; deg <= d; ++deg) compositions(n, deg, 0, cur, out);
    return out;
}

IndexTable::IndexTable(int n_, int s_) : n(n_), s(s_), monomials(graded_lex(n_, s_))
{
    for (std::size_t i = 0; i < monomials.size(); ++i) position[monomials[i]] = static_cast<int>(i);
    words.push_back({});
    std::size_t begin = 0;
    for (int len = 1; len <= s; ++len) {
        std::size_t end = words.size();
        for (std::size_t w = begin; w < end; ++w) {
            if (static_cast<int>(words[w].size()) != len - 1) continue;
            for (int i = 0; i < n; ++i) {
                auto nw = words[w];
                nw.push_back(i);
                words.push_back(nw);
            }
        }
        begin = end;
    }
}

int IndexTable::index_of(const Exponent& a) const
{
    auto it = position.find(a);
    return it == position.end() ? -1 : it->second;
}

Exponent IndexTable::exponent_of_word(const std::vector<int>& w) const
{
    Exponent e(n, 0);
    for (int i : w) ++e[i];
    return e;
}

std::size_t IndexTable::distinct_words_of_length(int len) const
{
    std::map<Exponent, int> seen;
    for (const auto& w : words)
        if (static_cast<int>(w.size()) == len) seen[exponent_of_word(w)] = 1;
    return seen.size();
}

MomentOps::MomentOps(int n, int k) : n_(n), k_(k), ytab_(n, 2 * k)
{
    if (n < 1 || k < 1) throw std::invalid_argument("moment operators need n >= 1, k >= 1");
    const auto& mons = ytab_.monomials;
    for (std::size_t i = 0; i < mons.size(); ++i) {
        if (degree(mons[i]) <= k) mk_.push_back(static_cast<int>(i));
        if (degree(mons[i]) <= k - 1) ml_.push_back(static_cast<int>(i));
    }
    const int N = dim_m(), Nl = dim_l(), m = ny();

    midx_.resize(N, N);
    for (int a = 0; a < N; ++a)
        for (int b = 0; b < N; ++b) midx_(a, b) = ytab_.index_of(add(mons[mk_[a]], mons[mk_[b]]));

    pidx_.resize(n, n * n);
    for (int r = 0; r < n; ++r)
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                pidx_(r, i * n + j) = ytab_.index_of(add(add(unit(n, r), unit(n, i)), unit(n, j)));

    IndexTable wt(n, k);
    gw_ = wt.words;
    const int G = dim_g();
    gidx_.resize(G, G);
    for (int a = 0; a < G; ++a)
        for (int b = 0; b < G; ++b)
            gidx_(a, b) = ytab_.index_of(add(wt.exponent_of_word(gw_[a]), wt.exponent_of_word(gw_[b])));

    lidx_.resize(Nl, Nl);
    lidx2_.assign(n, Eigen::MatrixXi(Nl, Nl));
    for (int a = 0; a < Nl; ++a)
        for (int b = 0; b < Nl; ++b) {
            auto g = add(mons[ml_[a]], mons[ml_[b]]);
            lidx_(a, b) = ytab_.index_of(g);
            for (int i = 0; i < n; ++i) lidx2_[i](a, b) = ytab_.index_of(add(g, unit(n, i, 2)));
        }

    dm_ = Vec::Zero(m);
    dp_ = Vec::Zero(m);
    for (int a = 0; a < N; ++a)
        for (int b = 0; b < N; ++b) dm_(midx_(a, b)) += 1.0;
    for (int a = 0; a < pidx_.rows(); ++a)
        for (int b = 0; b < pidx_.cols(); ++b) dp_(pidx_(a, b)) += 1.0;

    auto gam = graded_lex(n, 2 * k - 2);
    lc_ = Mat::Zero(static_cast<Eigen::Index>(gam.size()), m);
    std::map<Exponent, int> row_of;
    for (std::size_t r = 0; r < gam.size(); ++r) {
        row_of[gam[r]] = static_cast<int>(r);
        lgam_.push_back(ytab_.index_of(gam[r]));
        lc_(r, ytab_.index_of(gam[r])) += 1.0;
        for (int i = 0; i < n; ++i) lc_(r, ytab_.index_of(add(gam[r], unit(n, i, 2)))) -= 1.0;
    }
    lgam_of_entry_.resize(Nl, Nl);
    lgam_count_ = Vec::Zero(static_cast<Eigen::Index>(gam.size()));
    for (int a = 0; a < Nl; ++a)
        for (int b = 0; b < Nl; ++b) {
            int r = row_of.at(add(mons[ml_[a]], mons[ml_[b]]));
            lgam_of_entry_(a, b) = r;
            lgam_count_(r) += 1.0;
        }
}

Mat MomentOps::moment_matrix(const Vec& y) const
{
    const int N = dim_m();
    Mat X(N, N);
    for (int a = 0; a < N; ++a)
        for (int b = 0; b < N; ++b) X(a, b) = y(midx_(a, b));
    return X;
}

Mat MomentOps::moment_matrix(const Vec& y, int s) const
{
    int N = static_cast<int>(zeta(n_ + 1, s));
    return moment_matrix(y).topLeftCorner(N, N);
}

Mat MomentOps::extended_moment_matrix(const Vec& y) const
{
    const int G = dim_g();
    Mat X(G, G);
    for (int a = 0; a < G; ++a)
        for (int b = 0; b < G; ++b) X(a, b) = y(gidx_(a, b));
    return X;
}

Mat MomentOps::block_P(const Vec& y) const
{
    Mat P(pidx_.rows(), pidx_.cols());
    for (int a = 0; a < P.rows(); ++a)
        for (int b = 0; b < P.cols(); ++b) P(a, b) = y(pidx_(a, b));
    return P;
}

Mat MomentOps::localizing_matrix(const Vec& y) const
{
    const int Nl = dim_l();
    Mat L(Nl, Nl);
    for (int a = 0; a < Nl; ++a)
        for (int b = 0; b < Nl; ++b) {
            double v = y(lidx_(a, b));
            for (int i = 0; i < n_; ++i) v -= y(lidx2_[i](a, b));
            L(a, b) = v;
        }
    return L;
}

Vec MomentOps::adjoint_M(const Mat& Z) const
{
    if (Z.rows() != dim_m() || Z.cols() != dim_m()) throw std::invalid_argument("adjoint_M: shape mismatch");
    Vec out = Vec::Zero(ny());
    for (int a = 0; a < Z.rows(); ++a)
        for (int b = 0; b < Z.cols(); ++b) out(midx_(a, b)) += Z(a, b);
    return out;
}

Vec MomentOps::adjoint_P(const Mat& U) const
{
    if (U.rows() != pidx_.rows() || U.cols() != pidx_.cols()) throw std::invalid_argument("adjoint_P: shape mismatch");
    Vec out = Vec::Zero(ny());
    for (int a = 0; a < U.rows(); ++a)
        for (int b = 0; b < U.cols(); ++b) out(pidx_(a, b)) += U(a, b);
    return out;
}

Vec MomentOps::adjoint_L(const Mat& W) const
{
    if (W.rows() != dim_l() || W.cols() != dim_l()) throw std::invalid_argument("adjoint_L: shape mismatch");
    Vec out = Vec::Zero(ny());
    for (int a = 0; a < W.rows(); ++a)
        for (int b = 0; b < W.cols(); ++b) {
            out(lidx_(a, b)) += W(a, b);
            for (int i = 0; i < n_; ++i) out(lidx2_[i](a, b)) -= W(a, b);
        }
    return out;
}

Mat MomentOps::E0() const
{
    Mat E = Mat::Zero(dim_m(), dim_m());
    E(0, 0) = 1.0;
    return E;
}

Vec MomentOps::compress_W(const Mat& W) const
{
    Vec w = Vec::Zero(lc_.rows());
    for (int a = 0; a < W.rows(); ++a)
        for (int b = 0; b < W.cols(); ++b) w(lgam_of_entry_(a, b)) += W(a, b);
    return w;
}

Mat MomentOps::expand_w(const Vec& w) const
{
    const int Nl = dim_l();
    Mat W(Nl, Nl);
    for (int a = 0; a < Nl; ++a)
        for (int b = 0; b < Nl; ++b) {
            int r = lgam_of_entry_(a, b);
            W(a, b) = w(r) / lgam_count_(r);
        }
    return W;
}

Vec MomentOps::monomial_vector(const Vec& x, int d) const
{
    auto mons = graded_lex(n_, d);
    Vec v(static_cast<Eigen::Index>(mons.size()));
    for (std::size_t i = 0; i < mons.size(); ++i) {
        double p = 1.0;
        for (int j = 0; j < n_; ++j)
            for (int e = 0; e < mons[i][j]; ++e) p *= x(j);
        v(static_cast<Eigen::Index>(i)) = p;
    }
    return v;
}

Vec MomentOps::moments_from_atoms(const AtomicMeasure& mu) const
{
    Vec y = Vec::Zero(ny());
    for (const auto& a : mu.atoms) {
        if (a.vector.size() != n_) throw std::invalid_argument("atom dimension mismatch");
        y += a.weight * monomial_vector(a.vector, 2 * k_);
    }
    return y;
}

std::string moments_to_json_string(const MomentSequence& m)
{
    nlohmann::json j;
    j["n"] = m.n;
    j["k"] = m.k;
    j["y"] = std::vector<double>(m.y.data(), m.y.data() + m.y.size());
    return j.dump(2);
}

MomentSequence moments_from_json_string(const std::string& text)
{
    auto j = nlohmann::json::parse(text);
    MomentSequence m;
    m.n = j.at("n").get<int>();
    m.k = j.at("k").get<int>();
    auto v = j.at("y").get<std::vector<double>>();
    if (v.size() != zeta(m.n + 1, 2 * m.k)) throw std::invalid_argument("moment vector has wrong length");
    m.y = Eigen::Map<Vec>(v.data(), static_cast<Eigen::Index>(v.size()));
    return m;
}

int numerical_rank(const Vec& singular_values, double tol_rank)
{
    if (singular_values.size() == 0) return 0;
    double top = singular_values.cwiseAbs().maxCoeff();
    double thr = tol_rank * std::max(top, 1.0);
    int r = 0;
    for (Eigen::Index i = 0; i < singular_values.size(); ++i)
        if (std::abs(singular_values(i)) > thr) ++r;
    return r;
}

FlatnessResult flatness(const MomentOps& ops, const Vec& y, double tol_rank, double tol_psd, double tol_feas)
{
    FlatnessResult f;
    Mat Mk = ops.moment_matrix(y);
    Mat Mp = ops.moment_matrix(y, ops.k() - 1);
    Eigen::SelfAdjointEigenSolver<Mat> ek(Mk, Eigen::EigenvaluesOnly);
    Eigen::SelfAdjointEigenSolver<Mat> ep(Mp, Eigen::EigenvaluesOnly);
    f.rank_k = numerical_rank(ek.eigenvalues(), tol_rank);
    f.rank_prev = numerical_rank(ep.eigenvalues(), tol_rank);
    f.min_eig = ek.eigenvalues().minCoeff();
    f.localizing_norm = ops.localizing_matrix(y).norm();
    double scale = std::max(1.0, ek.eigenvalues().cwiseAbs().maxCoeff());
    f.flat = f.rank_k == f.rank_prev && f.min_eig >= -tol_psd * scale && f.localizing_norm <= tol_feas * scale;
    return f;
}

ExtractionResult extract_atoms(const MomentOps& ops, const Vec& y, const ExtractionOptions& opts)
{
    auto fl = flatness(ops, y, opts.tol_rank, opts.tol_psd, opts.tol_feas);
    if (!fl.flat) throw ExtractionError("not flat");
    ExtractionResult res;
    const int r = fl.rank_k;
    const int n = ops.n();
    if (r == 0) return res;

    Mat Mk = ops.moment_matrix(y);
    Eigen::SelfAdjointEigenSolver<Mat> es(Mk);
    const int N = static_cast<int>(Mk.rows());
    Mat V(N, r);
    for (int j = 0; j < r; ++j) {
        int c = N - 1 - j;
        V.col(j) = es.eigenvectors().col(c) * std::sqrt(std::max(es.eigenvalues()(c), 0.0));
    }

    // column echelon form of V, pivoting greedily in monomial order
    Mat W = V.transpose();
    double wmax = W.cwiseAbs().maxCoeff();
    std::vector<int> pivots;
    double min_piv = std::numeric_limits<double>::infinity();
    int row = 0;
    for (int c = 0; c < N && row < r; ++c) {
        Eigen::Index p;
        double best = W.col(c).segment(row, r - row).cwiseAbs().maxCoeff(&p);
        if (best <= 1e-6 * wmax) continue;
        p += row;
        W.row(row).swap(W.row(p));
        W.row(row) /= W(row, c);
        for (int i = 0; i < r; ++i)
            if (i != row) W.row(i) -= W(i, c) * W.row(row);
        pivots.push_back(c);
        min_piv = std::min(min_piv, best);
        ++row;
    }
    if (static_cast<int>(pivots.size()) < r) throw ExtractionError("extraction failed: rank deficient echelon form");
    res.pivot_condition = wmax / min_piv;
    Mat U = W.transpose();

    const auto& mons = ops.table().monomials;
    const auto& mk = ops.m_basis();
    std::map<Exponent, int> row_of;
    for (int a = 0; a < N; ++a) row_of[mons[mk[a]]] = a;

    std::vector<Mat> mult(n, Mat(r, r));
    for (int j = 0; j < r; ++j) {
        const auto& base = mons[mk[pivots[j]]];
        for (int i = 0; i < n; ++i) {
            auto e = base;
            ++e[i];
            auto it = row_of.find(e);
            if (it == row_of.end())
                throw ExtractionError("extraction failed: pivot monomial degree too high");
            mult[i].row(j) = U.row(it->second);
        }
    }

    std::mt19937_64 rng(opts.seed);
    std::uniform_real_distribution<double> uni(0.1, 1.0);
    Mat Nc = Mat::Zero(r, r);
    double csum = 0.0;
    for (int i = 0; i < n; ++i) {
        double c = uni(rng);
        Nc += c * mult[i];
        csum += c;
    }
    Nc /= csum;
    Eigen::RealSchur<Mat> schur(Nc);
    Mat Q = schur.matrixU();

    std::vector<Vec> pts(r, Vec(n));
    for (int j = 0; j < r; ++j)
        for (int i = 0; i < n; ++i) pts[j](i) = Q.col(j).dot(mult[i] * Q.col(j));

    // weights by least squares on the moments of degree <= k
    Mat Vd(N, r);
    for (int j = 0; j < r; ++j) Vd.col(j) = ops.monomial_vector(pts[j], ops.k());
    Vec rhs(N);
    for (int a = 0; a < N; ++a) rhs(a) = y(mk[a]);
    Vec lam = Vd.colPivHouseholderQr().solve(rhs);

    for (int j = 0; j < r; ++j) {
        res.sphere_error = std::max(res.sphere_error, std::abs(pts[j].norm() - 1.0));
        if (!(lam(j) > 0.0)) throw ExtractionError("extraction failed: nonpositive weight");
        res.atoms.atoms.push_back({lam(j), pts[j].normalized()});
    }
    if (res.sphere_error > opts.tol_sphere) throw ExtractionError("extraction failed: atoms off the sphere");
    res.atoms.merge();
    res.atoms.sort_by_weight();
    res.moment_error = (ops.moments_from_atoms(res.atoms) - y).norm();
    return res;
}

}  // namespace tcert
