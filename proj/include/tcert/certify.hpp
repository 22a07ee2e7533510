#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tcert/moments.hpp"
#include "tcert/solver.hpp"
#include "tcert/tensor_core.hpp"

namespace tcert {

enum class Status { BestRankR, QuasiOptimalAlpha, Uncertified };

std::string to_string(Status s);
Status status_from_string(const std::string& s);

struct CertifyTolerances {
    double dual_feas = 1e-6;
    double psd = 1e-8;           // relative to scale
    double complementarity = 1e-6;
    double projection = 1e-6;
    double gap = 1e-6;
    double primal_feas = 1e-6;
    double rank = 1e-6;
    SpectralOptions spectral;
    std::uint64_t extraction_seed = 0;
};

struct Gate {
    std::string name;
    bool passed = false;
    double value = 0.0;
    double threshold = 0.0;
};

struct Diagnostics {
    double psi = 0.0;
    double phi = 0.0;
    double duality_gap = 0.0;
    double dual_feas_residual = 0.0;
    double psd_min_eig = 0.0;      // of Z
    double moment_min_eig = 0.0;   // of M_2(y)
    double complementarity = 0.0;
    double projection_gap = 0.0;
    bool projection_tie = false;
    double primal_feas = 0.0;
    int rank_B = 0;
    int rank_M1 = 0;
    int rank_M2 = 0;
    bool flat = false;
    double rho_hat = 0.0;
    std::string rho_hat_provenance = "multistart power ascent lower bound";
    double sigma = 0.0;
    std::optional<double> tau;
    std::string tau_provenance;
    std::optional<double> alpha;
    std::optional<double> refined_residual;
    std::optional<double> rank_r1_bound;
    double residual_hs = 0.0;        // ||A - B||
    double residual_spectral = 0.0;  // spectral norm of M(A) - B
};

struct RankOneRefinement {
    double lambda = 0.0;
    Vec x;
    double residual = 0.0;
    bool justified = false;
};

struct Certificate {
    Status status = Status::Uncertified;
    std::string reason;
    Diagnostics diagnostics;
    std::vector<Gate> gates;
    std::optional<AtomicMeasure> atoms;
    std::optional<RankOneRefinement> rank_one;
};

double dual_objective(const Mat& U, const SymTensor3& A, int r);

struct DualFeasibility {
    double residual = 0.0;
    double min_eig = 0.0;
};

// || M*(Z) + P*(U) - L*(W) - sigma M*(E0) || and the smallest eigenvalue of Z.
DualFeasibility dual_feasibility(const MomentOps& ops, const Mat& U, const Mat& W, const Mat& Z, double sigma);

Certificate certify(const SymTensor3& A, int r, const PrimalSolution& sol, const CertifyTolerances& tols = {});

double quasi_alpha(double norm_A, int r, double sigma, double tau);

RankOneRefinement rank_one_refine(const SymTensor3& A, const PrimalSolution& sol, double sigma, double rho_hat);

struct CoefficientRefinement {
    Vec weights;
    double residual = 0.0;
    bool all_positive = true;
};

CoefficientRefinement refine_coefficients(const SymTensor3& A, const std::vector<Vec>& vectors);

struct OdecoPair {
    SymTensor3 A;
    AtomicMeasure measure;   // (lambda_i - sigma) on the leading r atoms
    AtomicMeasure best;      // lambda_i on the leading r atoms
    PrimalSolution solution;
    Mat Z;
};

// Analytic primal-dual pair for an orthogonally decomposable tensor.
OdecoPair odeco_certificate(const AtomicMeasure& atoms, int r, double sigma);

}  // namespace tcert
