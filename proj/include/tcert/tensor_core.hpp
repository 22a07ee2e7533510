#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace tcert {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

// Binomial coefficient C(a, b) as a count.
std::size_t binom(int a, int b);

// Number of distinct sorted multi-indices of length s over n symbols, C(n+s-1, s).
std::size_t zeta(int n, int s);

// Number of words of length <= s over n symbols, (n^{s+1}-1)/(n-1).
std::size_t nu(int n, int s);

// Third-order symmetric tensor stored by its sorted entries a_{ijk}, i <= j <= k,
// in lexicographic order. Indices are 0-based.
class SymTensor3 {
public:
    SymTensor3() = default;
    explicit SymTensor3(int n);

    int dim() const { return n_; }
    std::size_t size() const { return v_.size(); }

    double at(int i, int j, int k) const { return v_[slot(i, j, k)]; }
    double& at(int i, int j, int k) { return v_[slot(i, j, k)]; }

    std::size_t slot(int i, int j, int k) const;
    std::array<int, 3> index(std::size_t s) const { return idx_[s]; }
    // number of distinct permutations of the sorted triple at slot s
    int multiplicity(std::size_t s) const;

    const std::vector<double>& values() const { return v_; }
    std::vector<double>& values() { return v_; }

    // full n^3 array, row-major (i*n+j)*n+k
    std::vector<double> full() const;

    SymTensor3& operator+=(const SymTensor3& o);
    SymTensor3& operator-=(const SymTensor3& o);
    SymTensor3& operator*=(double c);

    bool is_zero() const;
    bool all_finite() const;

private:
    int n_ = 0;
    std::vector<double> v_;
    std::vector<std::array<int, 3>> idx_;
    std::vector<std::size_t> lookup_;
};

SymTensor3 operator+(SymTensor3 a, const SymTensor3& b);
SymTensor3 operator-(SymTensor3 a, const SymTensor3& b);
SymTensor3 operator*(double c, SymTensor3 a);

struct Atom {
    double weight = 0.0;
    Vec vector;
};

struct AtomicMeasure {
    std::vector<Atom> atoms;

    std::size_t cardinality() const { return atoms.size(); }
    // merge atoms whose vectors lie within tol; drop nonpositive weights
    void merge(double tol = 1e-8);
    // order atoms by decreasing weight
    void sort_by_weight();
};

// M(A): n x n^2 with entry (k, i*n+j) = a_{ijk}
Mat flatten(const SymTensor3& A);
// Inverse of flatten, symmetrizing over the permutations of each triple.
SymTensor3 unflatten(const Mat& M);

SymTensor3 assemble(const AtomicMeasure& mu, int n);
SymTensor3 rank_one(double weight, const Vec& x);

double hs_inner(const SymTensor3& A, const SymTensor3& B);
double hs_norm(const SymTensor3& A);

// <A, x^{⊗3}>
double eval_cubic(const SymTensor3& A, const Vec& x);
// (A x^2)_k = sum_{ij} a_{ijk} x_i x_j
Vec contract2(const SymTensor3& A, const Vec& x);

SymTensor3 rotate(const Mat& Q, const SymTensor3& A);

struct SpectralOptions {
    int starts = 50;
    double tol = 1e-12;
    int max_iter = 10000;
    std::uint64_t seed = 0;
};

struct SpectralResult {
    double value = 0.0;
    Vec x;
    int starts = 0;
};

// Multistart shifted power ascent; value is a lower bound on the spectral radius.
SpectralResult spectral_radius(const SymTensor3& A, const SpectralOptions& opts = {});

// Projected ascent from one start, returning a local maximizer of <A, x^3>.
Vec power_ascent(const SymTensor3& A, Vec x, double tol, int max_iter);

double coherence(const std::vector<Vec>& vectors);

struct TauResult {
    double tau = 1.0;
    double kappa = 1.0;          // r-th singular value of the factor matrix
    double mu = 0.0;             // coherence
    bool nonsingular = true;
    bool incoherent = true;
};

// Conditioning constant from the leading r atoms; throws std::domain_error when
// neither the singular value nor the coherence condition holds.
TauResult tau(const AtomicMeasure& mu, int r);

// JSON tensor file: {"n": int, "entries": [{"idx": [i,j,k], "val": x}, ...]}, 1-based
SymTensor3 tensor_from_json_string(const std::string& text);
std::string tensor_to_json_string(const SymTensor3& A);
SymTensor3 read_tensor_file(const std::string& path);

}  // namespace tcert
