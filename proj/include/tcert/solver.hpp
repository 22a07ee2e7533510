#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tcert/moments.hpp"
#include "tcert/tensor_core.hpp"

namespace tcert {

enum class InitKind { Zero, RandomAtoms, WarmStart };

struct SolverOptions {
    double sigma = 1e-5;
    double rho_pen = 1.0;
    double steplength = 1.5;
    double admm_penalty = 1.0;
    double proximal = 1e-3;
    double tol_kkt = 1e-7;
    double tol_admm = 1e-10;   // inner stopping on scaled ADMM residuals
    double tol_dca = 1e-8;
    int max_admm_iters = 20000;
    int max_dca_iters = 500;
    bool adaptive_penalty = true;
    bool escalate_rho = true;
    double rho_max = 1e3;
    std::uint64_t seed = 0;
    InitKind init = InitKind::RandomAtoms;
    Vec warm_y;

    void validate() const;
};

struct Residuals {
    double primal_feas = 0.0;
    double dual_feas = 0.0;
    double psd_residual = 0.0;
    double rank_residual = 0.0;
    double dca_gap = 0.0;
};

struct PrimalSolution {
    int n = 0;
    int r = 0;
    double sigma = 0.0;
    double rho = 1.0;       // penalty at termination
    Mat B, X;
    Vec y;
    Mat U, V, W;            // Z = sigma E0 - V
    Mat C;                  // last Ky-Fan subgradient
    double psi = 0.0;
    Residuals residuals;
    bool converged = false;
    int admm_iters = 0;
    int dca_iters = 0;
    std::vector<double> dca_objective;
    std::vector<double> dca_rho;      // penalty in force at each DCA iteration
};

struct KktResiduals {
    double psd = 0.0;            // violation of Z >= 0, X >= 0
    double complementarity = 0.0;
    double subgradient = 0.0;    // C + (M(A) - U - B)/rho in the nuclear-norm subdifferential at B
    double adjoint = 0.0;        // M*(Z) + P*(U) - L*(W) - sigma M*(E0)
    double primal = 0.0;
    double max() const;
};

// Penalized DC reformulation with k = 2, solved by DCA with an ADMM inner loop.
PrimalSolution solve(const SymTensor3& A, int r, const SolverOptions& opts = {});

KktResiduals kkt_residuals(const MomentOps& ops, const SymTensor3& A, const PrimalSolution& sol, const Mat& C);

// W from the adjoint equation in the least-squares sense; returns the residual.
double fit_localizing_multiplier(const MomentOps& ops, const Mat& U, const Mat& V, double sigma, Mat& W);

double primal_objective(const Mat& MA, const Mat& B, const Mat& X, double sigma);

}  // namespace tcert
