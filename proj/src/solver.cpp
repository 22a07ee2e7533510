#include "tcert/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

#include "tcert/lowrank.hpp"

namespace tcert {

void SolverOptions::validate() const
{
    if (!(sigma >= 0.0)) throw std::invalid_argument("sigma must be nonnegative");
    if (!(rho_pen > 0.0) || !(steplength > 0.0) || !(admm_penalty > 0.0) || !(proximal >= 0.0))
        throw std::invalid_argument("penalty parameters must be positive");
    if (!(tol_kkt > 0.0) || !(tol_admm > 0.0) || !(tol_dca > 0.0)) throw std::invalid_argument("tolerances must be positive");
    if (max_admm_iters < 1 || max_dca_iters < 1) throw std::invalid_argument("iteration budgets must be positive");
}

double KktResiduals::max() const
{
    return std::max({psd, complementarity, subgradient, adjoint, primal});
}

double primal_objective(const Mat& MA, const Mat& B, const Mat& X, double sigma)
{
    return 0.5 * (MA - B).squaredNorm() + sigma * X(0, 0);
}

namespace {

Mat psd_part(const Mat& X)
{
    Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (X + X.transpose()));
    Vec w = es.eigenvalues().cwiseMax(0.0);
    return es.eigenvectors() * w.asDiagonal() * es.eigenvectors().transpose();
}

double min_eig(const Mat& X)
{
    Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (X + X.transpose()), Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

struct YStep {
    Vec dinv;
    Eigen::LDLT<Mat> K;
};

YStep factor_ystep(const MomentOps& ops, double kappa, double gamma)
{
    YStep f;
    f.dinv = (kappa * (ops.p_counts() + ops.m_counts()).array() + gamma).inverse();
    const Mat& Lc = ops.localizing_constraints();
    f.K.compute(Lc * f.dinv.asDiagonal() * Lc.transpose());
    return f;
}

Vec initial_moments(const MomentOps& ops, const SymTensor3& A, int r, const SolverOptions& opts)
{
    switch (opts.init) {
    case InitKind::Zero:
        return Vec::Zero(ops.ny());
    case InitKind::WarmStart:
        if (opts.warm_y.size() != ops.ny()) throw std::invalid_argument("warm start has wrong length");
        return opts.warm_y;
    case InitKind::RandomAtoms:
    default: {
        std::mt19937_64 rng(opts.seed);
        std::normal_distribution<double> g;
        AtomicMeasure mu;
        for (int i = 0; i < r; ++i) {
            Vec x(ops.n());
            for (int j = 0; j < ops.n(); ++j) x(j) = g(rng);
            x.normalize();
            // a positive atom on the negative side of A sits in the basin of B = 0
            if (eval_cubic(A, x) < 0.0) x = -x;
            mu.atoms.push_back({1.0, x});
        }
        return ops.moments_from_atoms(mu);
    }
    }
}

}  // namespace

double fit_localizing_multiplier(const MomentOps& ops, const Mat& U, const Mat& V, double sigma, Mat& W)
{
    (void)sigma;
    // L*(W) = P*(U) - M*(V), with Z = sigma E0 - V
    Vec rhs = ops.adjoint_P(U) - ops.adjoint_M(V);
    const Mat& Lc = ops.localizing_constraints();
    Vec w = Lc.transpose().colPivHouseholderQr().solve(rhs);
    W = ops.expand_w(w);
    return (Lc.transpose() * w - rhs).norm();
}

PrimalSolution solve(const SymTensor3& A, int r, const SolverOptions& opts)
{
    opts.validate();
    const int n = A.dim();
    if (n < 2) throw std::invalid_argument("solver needs n >= 2");
    if (r < 1 || r > n) throw std::invalid_argument("rank out of range");
    if (!A.all_finite()) throw std::invalid_argument("tensor has non-finite entries");

    MomentOps ops(n, 2);
    const Mat MA = flatten(A);
    const double scaleA = 1.0 + MA.norm();
    const double sigma = opts.sigma;
    const double tau = opts.steplength;
    const double gamma = opts.proximal;
    const Mat E0 = ops.E0();
    const Mat& Lc = ops.localizing_constraints();

    Vec y = initial_moments(ops, A, r, opts);
    // start from the nearest point of the sphere constraint
    {
        YStep f = factor_ystep(ops, 1.0, 0.0);
        y -= f.dinv.asDiagonal() * (Lc.transpose() * f.K.solve(Lc * y));
    }
    Mat B = ops.block_P(y), X = ops.moment_matrix(y);
    Mat U = Mat::Zero(B.rows(), B.cols()), S = Mat::Zero(X.rows(), X.cols());
    Mat Uh = U, Sh = S;

    double rho = opts.rho_pen;
    double kappa = opts.admm_penalty;
    double obj_prev = std::numeric_limits<double>::infinity();
    int stall = 0;
    PrimalSolution sol;
    Mat C;
    bool dca_done = false;

    for (int t = 0; t < opts.max_dca_iters; ++t) {
        C = kyfan_subgradient(B, r);
        YStep f = factor_ystep(ops, kappa, gamma);
        Mat PY = ops.block_P(y), MY = ops.moment_matrix(y);
        int it = 0;
        for (; it < opts.max_admm_iters; ++it) {
            Mat H = (MA + rho * C + kappa * PY - U) / (1.0 + kappa);
            B = soft_threshold(H, rho / (1.0 + kappa));
            Uh = U + kappa * (B - PY);
            X = psd_part(MY - (S + sigma * E0) / kappa);
            Sh = S + kappa * (X - MY);

            Vec rhs = kappa * ops.adjoint_P(B + U / kappa) + kappa * ops.adjoint_M(X + S / kappa) + gamma * y;
            Vec yh = f.dinv.cwiseProduct(rhs);
            Vec yn = yh - f.dinv.cwiseProduct(Lc.transpose() * f.K.solve(Lc * yh));
            Mat PYn = ops.block_P(yn), MYn = ops.moment_matrix(yn);

            U += tau * kappa * (B - PYn);
            S += tau * kappa * (X - MYn);
            double rp = std::max((B - PYn).norm(), (X - MYn).norm()) / (1.0 + std::max(B.norm(), X.norm()));
            double rd = kappa * std::sqrt((PYn - PY).squaredNorm() + (MYn - MY).squaredNorm()) / scaleA;
            y = yn;
            PY = PYn;
            MY = MYn;
            if (std::max(rp, rd) < opts.tol_admm) break;
            if (opts.adaptive_penalty && it % 20 == 19) {
                if (rp > 5.0 * rd) {
                    kappa *= 2.0;
                    f = factor_ystep(ops, kappa, gamma);
                } else if (rd > 5.0 * rp) {
                    kappa /= 2.0;
                    f = factor_ystep(ops, kappa, gamma);
                }
            }
        }
        sol.admm_iters += std::min(it + 1, opts.max_admm_iters);
        sol.dca_iters = t + 1;

        Vec sv = svd(B).s;
        double gap = sv.sum() - sv.head(r).sum();
        double obj = primal_objective(MA, B, X, sigma) + rho * gap;
        sol.dca_objective.push_back(obj);
        sol.dca_rho.push_back(rho);
        double dC = (kyfan_subgradient(B, r) - C).norm();
        if (obj_prev - obj < opts.tol_dca && gap < opts.tol_dca && dC < opts.tol_dca) {
            dca_done = true;
            break;
        }
        // the penalty is not exact at this rho: the DCA has settled with B off rank r
        if (opts.escalate_rho && gap > opts.tol_dca && (dC < 1e-4 || stall >= 5) && rho < opts.rho_max) {
            rho = std::min(rho * 10.0, opts.rho_max);
            stall = 0;
            obj_prev = std::numeric_limits<double>::infinity();
            continue;
        }
        stall = (obj_prev - obj < 1e-6 * std::abs(obj)) ? stall + 1 : 0;
        obj_prev = obj;
    }

    sol.n = n;
    sol.r = r;
    sol.sigma = sigma;
    sol.rho = rho;
    sol.B = B;
    sol.X = X;
    sol.y = y;
    sol.U = Uh;
    sol.V = -Sh;
    sol.C = C;
    sol.psi = primal_objective(MA, B, X, sigma);

    Residuals& res = sol.residuals;
    res.dual_feas = fit_localizing_multiplier(ops, sol.U, sol.V, sigma, sol.W);
    res.primal_feas = std::max({(B - ops.block_P(y)).norm(), (X - ops.moment_matrix(y)).norm(),
                                ops.localizing_matrix(y).norm()});
    Mat Z = sigma * E0 - sol.V;
    res.psd_residual = std::max({0.0, -min_eig(Z), -min_eig(X), std::abs((Z.array() * X.array()).sum())});
    Vec sv = svd(B).s;
    res.dca_gap = sv.sum() - sv.head(r).sum();
    res.rank_residual = res.dca_gap;

    auto kkt = kkt_residuals(ops, A, sol, C);
    sol.converged = dca_done && kkt.max() <= opts.tol_kkt * scaleA;
    return sol;
}

KktResiduals kkt_residuals(const MomentOps& ops, const SymTensor3& A, const PrimalSolution& sol, const Mat& C)
{
    KktResiduals k;
    const Mat MA = flatten(A);
    const Mat E0 = ops.E0();
    Mat Z = sol.sigma * E0 - sol.V;
    k.psd = std::max({0.0, -min_eig(Z), -min_eig(sol.X)});
    k.complementarity = std::abs((Z.array() * sol.X.array()).sum());

    Mat G = C + (MA - sol.U - sol.B) / sol.rho;
    auto d = svd(G);
    double over = d.s.size() ? std::max(0.0, d.s(0) - 1.0) : 0.0;
    double align = std::abs((G.array() * sol.B.array()).sum() - svd(sol.B).s.sum());
    k.subgradient = std::max(over, align);

    Vec adj = ops.adjoint_M(Z) + ops.adjoint_P(sol.U) - ops.adjoint_L(sol.W) - sol.sigma * ops.adjoint_M(E0);
    k.adjoint = adj.norm();

    k.primal = std::max({(sol.B - ops.block_P(sol.y)).norm(), (sol.X - ops.moment_matrix(sol.y)).norm(),
                         ops.localizing_matrix(sol.y).norm()});
    return k;
}

}  // namespace tcert
