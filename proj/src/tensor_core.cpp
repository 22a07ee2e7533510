#include "tcert/tensor_core.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace tcert {

std::size_t binom(int a, int b)
{
    if (b < 0 || a < b) return 0;
    std::size_t r = 1;
    for (int i = 1; i <= b; ++i) r = r * static_cast<std::size_t>(a - b + i) / static_cast<std::size_t>(i);
    return r;
}

std::size_t zeta(int n, int s) { return binom(n + s - 1, s); }

std::size_t nu(int n, int s)
{
    std::size_t total = 0, p = 1;
    for (int i = 0; i <= s; ++i) {
        total += p;
        p *= static_cast<std::size_t>(n);
    }
    return total;
}

SymTensor3::SymTensor3(int n) : n_(n)
{
    if (n < 1) throw std::invalid_argument("tensor dimension must be positive");
    lookup_.assign(static_cast<std::size_t>(n) * n * n, 0);
    for (int i = 0; i < n; ++i)
        for (int j = i; j < n; ++j)
            for (int k = j; k < n; ++k) idx_.push_back({i, j, k});
    for (std::size_t s = 0; s < idx_.size(); ++s) {
        auto t = idx_[s];
        std::sort(t.begin(), t.end());
        do {
            lookup_[(static_cast<std::size_t>(t[0]) * n + t[1]) * n + t[2]] = s;
        } while (std::next_permutation(t.begin(), t.end()));
    }
    v_.assign(idx_.size(), 0.0);
}

std::size_t SymTensor3::slot(int i, int j, int k) const
{
    return lookup_[(static_cast<std::size_t>(i) * n_ + j) * n_ + k];
}

int SymTensor3::multiplicity(std::size_t s) const
{
    const auto& t = idx_[s];
    if (t[0] == t[1] && t[1] == t[2]) return 1;
    if (t[0] == t[1] || t[1] == t[2]) return 3;
    return 6;
}

std::vector<double> SymTensor3::full() const
{
    std::vector<double> out(lookup_.size());
    for (std::size_t p = 0; p < lookup_.size(); ++p) out[p] = v_[lookup_[p]];
    return out;
}

SymTensor3& SymTensor3::operator+=(const SymTensor3& o)
{
    if (o.n_ != n_) throw std::invalid_argument("dimension mismatch");
    for (std::size_t s = 0; s < v_.size(); ++s) v_[s] += o.v_[s];
    return *this;
}

SymTensor3& SymTensor3::operator-=(const SymTensor3& o)
{
    if (o.n_ != n_) throw std::invalid_argument("dimension mismatch");
    for (std::size_t s = 0; s < v_.size(); ++s) v_[s] -= o.v_[s];
    return *this;
}

SymTensor3& SymTensor3::operator*=(double c)
{
    for (auto& v : v_) v *= c;
    return *this;
}

bool SymTensor3::is_zero() const
{
    return std::all_of(v_.begin(), v_.end(), [](double v) { return v == 0.0; });
}

bool SymTensor3::all_finite() const
{
    return std::all_of(v_.begin(), v_.end(), [](double v) { return std::isfinite(v); });
}

SymTensor3 operator+(SymTensor3 a, const SymTensor3& b) { return a += b; }
SymTensor3 operator-(SymTensor3 a, const SymTensor3& b) { return a -= b; }
SymTensor3 operator*(double c, SymTensor3 a) { return a *= c; }

void AtomicMeasure::merge(double tol)
{
    std::vector<Atom> out;
    for (const auto& a : atoms) {
        bool merged = false;
        for (auto& b : out) {
            if ((a.vector - b.vector).norm() <= tol) {
                b.weight += a.weight;
                merged = true;
                break;
            }
        }
        if (!merged) out.push_back(a);
    }
    out.erase(std::remove_if(out.begin(), out.end(), [](const Atom& a) { return !(a.weight > 0.0); }),
              out.end());
    atoms = std::move(out);
}

void AtomicMeasure::sort_by_weight()
{
    std::stable_sort(atoms.begin(), atoms.end(),
                     [](const Atom& a, const Atom& b) { return a.weight > b.weight; });
}

Mat flatten(const SymTensor3& A)
{
    const int n = A.dim();
    Mat M(n, n * n);
    for (int k = 0; k < n; ++k)
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) M(k, i * n + j) = A.at(i, j, k);
    return M;
}

SymTensor3 unflatten(const Mat& M)
{
    const int n = static_cast<int>(M.rows());
    if (M.cols() != static_cast<Eigen::Index>(n) * n) throw std::invalid_argument("flattening must be n x n^2");
    SymTensor3 A(n);
    std::vector<int> count(A.size(), 0);
    std::vector<double> acc(A.size(), 0.0);
    for (int k = 0; k < n; ++k)
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                auto s = A.slot(i, j, k);
                acc[s] += M(k, i * n + j);
                ++count[s];
            }
    for (std::size_t s = 0; s < A.size(); ++s) A.values()[s] = acc[s] / count[s];
    return A;
}

SymTensor3 rank_one(double weight, const Vec& x)
{
    const int n = static_cast<int>(x.size());
    SymTensor3 T(n);
    for (std::size_t s = 0; s < T.size(); ++s) {
        auto t = T.index(s);
        T.values()[s] = weight * x(t[0]) * x(t[1]) * x(t[2]);
    }
    return T;
}

SymTensor3 assemble(const AtomicMeasure& mu, int n)
{
    SymTensor3 T(n);
    for (const auto& a : mu.atoms) {
        if (a.vector.size() != n) throw std::invalid_argument("atom dimension mismatch");
        T += rank_one(a.weight, a.vector);
    }
    return T;
}

double hs_inner(const SymTensor3& A, const SymTensor3& B)
{
    if (A.dim() != B.dim()) throw std::invalid_argument("dimension mismatch");
    double s = 0.0;
    for (std::size_t p = 0; p < A.size(); ++p) s += A.multiplicity(p) * A.values()[p] * B.values()[p];
    return s;
}

double hs_norm(const SymTensor3& A) { return std::sqrt(hs_inner(A, A)); }

double eval_cubic(const SymTensor3& A, const Vec& x)
{
    double s = 0.0;
    for (std::size_t p = 0; p < A.size(); ++p) {
        auto t = A.index(p);
        s += A.multiplicity(p) * A.values()[p] * x(t[0]) * x(t[1]) * x(t[2]);
    }
    return s;
}

Vec contract2(const SymTensor3& A, const Vec& x)
{
    const int n = A.dim();
    Vec g = Vec::Zero(n);
    for (int k = 0; k < n; ++k)
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) g(k) += A.at(i, j, k) * x(i) * x(j);
    return g;
}

SymTensor3 rotate(const Mat& Q, const SymTensor3& A)
{
    const int n = A.dim();
    if (Q.rows() != n || Q.cols() != n) throw std::invalid_argument("rotation has wrong shape");
    if ((Q.transpose() * Q - Mat::Identity(n, n)).norm() > 1e-10)
        throw std::invalid_argument("rotation matrix is not orthogonal");
    // contract one mode at a time on the full array
    std::vector<double> a = A.full(), b(a.size());
    auto at = [n](int i, int j, int k) { return (static_cast<std::size_t>(i) * n + j) * n + k; };
    for (int mode = 0; mode < 3; ++mode) {
        std::fill(b.begin(), b.end(), 0.0);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                for (int k = 0; k < n; ++k)
                    for (int m = 0; m < n; ++m) {
                        if (mode == 0) b[at(i, j, k)] += Q(i, m) * a[at(m, j, k)];
                        else if (mode == 1) b[at(i, j, k)] += Q(j, m) * a[at(i, m, k)];
                        else b[at(i, j, k)] += Q(k, m) * a[at(i, j, m)];
                    }
        std::swap(a, b);
    }
    SymTensor3 R(n);
    for (std::size_t s = 0; s < R.size(); ++s) {
        auto t = R.index(s);
        R.values()[s] = a[at(t[0], t[1], t[2])];
    }
    return R;
}

Vec power_ascent(const SymTensor3& A, Vec x, double tol, int max_iter)
{
    // shift keeps the iteration monotone for order three
    const double alpha = 2.0 * hs_norm(A);
    x.normalize();
    if (eval_cubic(A, x) < 0) x = -x;
    for (int it = 0; it < max_iter; ++it) {
        Vec g = contract2(A, x) + alpha * x;
        double nrm = g.norm();
        if (nrm == 0.0) break;
        Vec xn = g / nrm;
        double step = (xn - x).norm();
        x = xn;
        if (step < tol) break;
    }
    return x;
}

SpectralResult spectral_radius(const SymTensor3& A, const SpectralOptions& opts)
{
    if (A.is_zero()) throw std::invalid_argument("zero tensor has no spectral direction");
    const int n = A.dim();
    std::mt19937_64 rng(opts.seed);
    std::normal_distribution<double> g;
    SpectralResult best;
    best.value = -std::numeric_limits<double>::infinity();
    for (int s = 0; s < opts.starts; ++s) {
        Vec x(n);
        for (int i = 0; i < n; ++i) x(i) = g(rng);
        if (x.norm() == 0.0) x(0) = 1.0;
        x = power_ascent(A, x, opts.tol, opts.max_iter);
        double v = eval_cubic(A, x);
        if (v > best.value) {
            best.value = v;
            best.x = x;
        }
    }
    best.starts = opts.starts;
    return best;
}

double coherence(const std::vector<Vec>& vectors)
{
    if (vectors.size() < 2) throw std::invalid_argument("coherence needs at least two vectors");
    double mu = 0.0;
    for (std::size_t i = 0; i < vectors.size(); ++i)
        for (std::size_t j = i + 1; j < vectors.size(); ++j) mu = std::max(mu, std::abs(vectors[i].dot(vectors[j])));
    return mu;
}

TauResult tau(const AtomicMeasure& mu, int r)
{
    if (mu.atoms.empty()) throw std::invalid_argument("tau needs atoms");
    TauResult out;
    if (r == 1) return out;
    const int m = std::min<int>(r, static_cast<int>(mu.atoms.size()));
    const int n = static_cast<int>(mu.atoms[0].vector.size());
    Mat F(n, m);
    std::vector<Vec> vs;
    for (int i = 0; i < m; ++i) {
        F.col(i) = mu.atoms[i].vector;
        vs.push_back(mu.atoms[i].vector);
    }
    Eigen::JacobiSVD<Mat> svd(F);
    Vec sv = svd.singularValues();
    out.kappa = (m < r || sv.size() < r) ? 0.0 : sv(r - 1);
    out.nonsingular = out.kappa > 1e-12;
    out.mu = m >= 2 ? coherence(vs) : 0.0;
    out.incoherent = out.mu < std::cbrt(1.0 / (r - 1));
    double t1 = std::pow(out.kappa, 6);
    double t2 = 1.0 - (r - 1) * out.mu * out.mu * out.mu;
    if (out.nonsingular && out.incoherent) out.tau = std::max(t1, t2);
    else if (out.nonsingular) out.tau = t1;
    else if (out.incoherent) out.tau = t2;
    else throw std::domain_error("ill-conditioned decomposition");
    return out;
}

SymTensor3 tensor_from_json_string(const std::string& text)
{
    auto j = nlohmann::json::parse(text);
    if (!j.contains("n") || !j["n"].is_number_integer()) throw std::invalid_argument("tensor file needs integer n");
    int n = j["n"].get<int>();
    if (n < 1) throw std::invalid_argument("tensor dimension must be positive");
    SymTensor3 A(n);
    std::set<std::size_t> seen;
    for (const auto& e : j.value("entries", nlohmann::json::array())) {
        auto idx = e.at("idx").get<std::vector<int>>();
        if (idx.size() != 3) throw std::invalid_argument("entry index must have three components");
        if (!(idx[0] <= idx[1] && idx[1] <= idx[2])) throw std::invalid_argument("entry index must be sorted");
        if (idx[0] < 1 || idx[2] > n) throw std::invalid_argument("entry index out of range");
        double v = e.at("val").get<double>();
        if (!std::isfinite(v)) throw std::invalid_argument("entry value not finite");
        auto s = A.slot(idx[0] - 1, idx[1] - 1, idx[2] - 1);
        if (!seen.insert(s).second) throw std::invalid_argument("duplicate entry index");
        A.values()[s] = v;
    }
    return A;
}

std::string tensor_to_json_string(const SymTensor3& A)
{
    nlohmann::json j;
    j["n"] = A.dim();
    j["entries"] = nlohmann::json::array();
    for (std::size_t s = 0; s < A.size(); ++s) {
        auto t = A.index(s);
        j["entries"].push_back({{"idx", {t[0] + 1, t[1] + 1, t[2] + 1}}, {"val", A.values()[s]}});
    }
    return j.dump(2);
}

SymTensor3 read_tensor_file(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return tensor_from_json_string(ss.str());
}

}  // namespace tcert
