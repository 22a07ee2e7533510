#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "tcert/tensor_core.hpp"

namespace tcert {

using Exponent = std::vector<int>;

// Exponents of degree <= d: degree ascending, and within a degree the
// exponent tuples in descending lexicographic order (x1^2, x1x2, x2^2, ...).
std::vector<Exponent> graded_lex(int n, int d);

struct IndexTable {
    int n = 0;
    int s = 0;
    std::vector<Exponent> monomials;       // N^n_{<=s}
    std::vector<std::vector<int>> words;   // I^{<=s}, words of length 0..s
    std::map<Exponent, int> position;

    IndexTable(int n, int s);
    int index_of(const Exponent& a) const;  // -1 when |a| > s
    Exponent exponent_of_word(const std::vector<int>& w) const;
    std::size_t distinct_words_of_length(int len) const;
};

// Moment operators for fixed (n, k). All operators act on a moment vector y of
// length zeta(n+1, 2k) in graded-lex order.
class MomentOps {
public:
    MomentOps(int n, int k);

    int n() const { return n_; }
    int k() const { return k_; }
    int ny() const { return static_cast<int>(ytab_.monomials.size()); }
    int dim_m() const { return static_cast<int>(mk_.size()); }
    int dim_l() const { return static_cast<int>(ml_.size()); }
    int dim_g() const { return static_cast<int>(gw_.size()); }
    const IndexTable& table() const { return ytab_; }
    const std::vector<int>& m_basis() const { return mk_; }

    Mat moment_matrix(const Vec& y) const;
    // leading block over monomials of degree <= s
    Mat moment_matrix(const Vec& y, int s) const;
    Mat extended_moment_matrix(const Vec& y) const;
    Mat block_P(const Vec& y) const;
    Mat localizing_matrix(const Vec& y) const;

    Vec adjoint_M(const Mat& Z) const;
    Vec adjoint_P(const Mat& U) const;
    Vec adjoint_L(const Mat& W) const;

    Mat E0() const;

    // index masks: y-position of entry (a,b)
    const Eigen::MatrixXi& m_mask() const { return midx_; }
    const Eigen::MatrixXi& p_mask() const { return pidx_; }
    const Eigen::MatrixXi& g_mask() const { return gidx_; }

    // diagonal of M^*M and P^*P
    const Vec& m_counts() const { return dm_; }
    const Vec& p_counts() const { return dp_; }

    // distinct localizing constraints y_g - sum_i y_{g+2e_i}, |g| <= 2k-2
    const Mat& localizing_constraints() const { return lc_; }
    // w_g = sum over (a,b) with a+b=g of W_ab, so that adjoint_L(W) = Lc^T w
    Vec compress_W(const Mat& W) const;
    Mat expand_w(const Vec& w) const;

    // monomial vector of x of degree <= d, in graded-lex order
    Vec monomial_vector(const Vec& x, int d) const;
    Vec moments_from_atoms(const AtomicMeasure& mu) const;

private:
    int n_, k_;
    IndexTable ytab_;
    std::vector<int> mk_, ml_;                   // y-positions of the degree<=k, <=k-1 monomials
    std::vector<std::vector<int>> gw_;           // words of I^{<=k}
    Eigen::MatrixXi midx_, pidx_, gidx_, lidx_;
    std::vector<Eigen::MatrixXi> lidx2_;
    Vec dm_, dp_;
    Mat lc_;
    std::vector<int> lgam_;                      // y-position of gamma for each row of lc_
    Eigen::MatrixXi lgam_of_entry_;              // row of lc_ for entry (a,b) of W
    Vec lgam_count_;
};

struct MomentSequence {
    int n = 0;
    int k = 2;
    Vec y;
};

std::string moments_to_json_string(const MomentSequence& m);
MomentSequence moments_from_json_string(const std::string& text);

int numerical_rank(const Vec& singular_values, double tol_rank);

struct FlatnessResult {
    int rank_prev = 0;   // rank M_{k-1}(y)
    int rank_k = 0;      // rank M_k(y)
    double min_eig = 0.0;
    double localizing_norm = 0.0;
    bool flat = false;
};

FlatnessResult flatness(const MomentOps& ops, const Vec& y, double tol_rank = 1e-6, double tol_psd = 1e-8,
                        double tol_feas = 1e-6);

class ExtractionError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct ExtractionOptions {
    double tol_rank = 1e-6;
    double tol_psd = 1e-8;
    double tol_feas = 1e-6;
    double tol_sphere = 1e-5;
    std::uint64_t seed = 0;
};

struct ExtractionResult {
    AtomicMeasure atoms;
    double moment_error = 0.0;    // ||moments_from_atoms(atoms) - y||
    double sphere_error = 0.0;    // max | ||x_i|| - 1 | before normalization
    double pivot_condition = 0.0;
};

// Atoms of the unique representing measure of a flat y.
ExtractionResult extract_atoms(const MomentOps& ops, const Vec& y, const ExtractionOptions& opts = {});

}  // namespace tcert
