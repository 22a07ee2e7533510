#include "tcert/certify.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "tcert/lowrank.hpp"

namespace tcert {

std::string to_string(Status s)
{
    switch (s) {
    case Status::BestRankR: return "BestRankR";
    case Status::QuasiOptimalAlpha: return "QuasiOptimalAlpha";
    default: return "Uncertified";
    }
}

Status status_from_string(const std::string& s)
{
    if (s == "BestRankR") return Status::BestRankR;
    if (s == "QuasiOptimalAlpha") return Status::QuasiOptimalAlpha;
    if (s == "Uncertified") return Status::Uncertified;
    throw std::invalid_argument("unknown status " + s);
}

double dual_objective(const Mat& U, const SymTensor3& A, int r)
{
    Mat MA = flatten(A);
    return 0.5 * MA.squaredNorm() - project_rank(MA - U, r).theta;
}

DualFeasibility dual_feasibility(const MomentOps& ops, const Mat& U, const Mat& W, const Mat& Z, double sigma)
{
    DualFeasibility d;
    Vec res = ops.adjoint_M(Z) + ops.adjoint_P(U) - ops.adjoint_L(W) - sigma * ops.adjoint_M(ops.E0());
    d.residual = res.norm();
    Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (Z + Z.transpose()), Eigen::EigenvaluesOnly);
    d.min_eig = es.eigenvalues().minCoeff();
    return d;
}

double quasi_alpha(double norm_A, int r, double sigma, double tau)
{
    if (!(tau > 0.0) || tau > 1.0) throw std::invalid_argument("tau must lie in (0, 1]");
    if (r < 1 || sigma < 0.0) throw std::invalid_argument("invalid rank or sigma");
    double q = std::sqrt(r / tau);
    return 2.0 * q * ((1.0 - std::sqrt(tau / r)) * norm_A + 2.0 * sigma) * sigma;
}

RankOneRefinement rank_one_refine(const SymTensor3& A, const PrimalSolution& sol, double sigma, double rho_hat)
{
    RankOneRefinement out;
    auto d = svd(sol.B);
    Vec x = d.U.col(0);
    if (eval_cubic(A, x) < 0) x = -x;
    out.x = x;
    out.justified = sigma < rho_hat;
    out.lambda = out.justified ? sol.X(0, 0) + sigma : sol.X(0, 0);
    double a2 = hs_inner(A, A);
    out.residual = std::sqrt(std::max(0.0, a2 - 2.0 * out.lambda * eval_cubic(A, x) + out.lambda * out.lambda));
    return out;
}

CoefficientRefinement refine_coefficients(const SymTensor3& A, const std::vector<Vec>& vectors)
{
    const int s = static_cast<int>(vectors.size());
    if (s == 0) throw std::invalid_argument("no vectors to refine");
    Mat C(s, s);
    Vec u(s);
    for (int i = 0; i < s; ++i) {
        u(i) = eval_cubic(A, vectors[i]);
        for (int j = 0; j < s; ++j) C(i, j) = std::pow(vectors[i].dot(vectors[j]), 3);
    }
    Eigen::JacobiSVD<Mat> sv(C);
    double cond = sv.singularValues()(0) / sv.singularValues()(s - 1);
    if (!std::isfinite(cond) || cond > 1e12) throw std::domain_error("refinement unavailable");
    CoefficientRefinement out;
    out.weights = C.ldlt().solve(u);
    out.residual = std::sqrt(std::max(0.0, hs_inner(A, A) - u.dot(out.weights)));
    out.all_positive = (out.weights.array() > 0.0).all();
    return out;
}

namespace {

Gate gate(const std::string& name, double value, double threshold, bool passed)
{
    return Gate{name, passed, value, threshold};
}

Gate gate_le(const std::string& name, double value, double threshold)
{
    return gate(name, value, threshold, value <= threshold);
}

}  // namespace

Certificate certify(const SymTensor3& A, int r, const PrimalSolution& sol, const CertifyTolerances& tols)
{
    const int n = A.dim();
    MomentOps ops(n, 2);
    if (sol.y.size() != ops.ny() || sol.U.rows() != n || sol.U.cols() != n * n || sol.V.rows() != ops.dim_m() ||
        sol.W.rows() != ops.dim_l())
        throw std::invalid_argument("solution shapes do not match the tensor");
    Certificate cert;
    Diagnostics& dg = cert.diagnostics;
    const double sigma = sol.sigma;
    const Mat MA = flatten(A);
    const double scale = std::max(1.0, MA.norm());

    // the primal point is the one generated by y
    const Mat PY = ops.block_P(sol.y);
    const Mat MY = ops.moment_matrix(sol.y);
    const Mat Z = sigma * ops.E0() - sol.V;

    dg.sigma = sigma;
    dg.psi = primal_objective(MA, PY, MY, sigma);
    dg.phi = dual_objective(sol.U, A, r);
    dg.duality_gap = dg.psi - dg.phi;
    auto df = dual_feasibility(ops, sol.U, sol.W, Z, sigma);
    dg.dual_feas_residual = df.residual;
    dg.psd_min_eig = df.min_eig;
    {
        Eigen::SelfAdjointEigenSolver<Mat> es(MY, Eigen::EigenvaluesOnly);
        dg.moment_min_eig = es.eigenvalues().minCoeff();
    }
    dg.complementarity = (Z.array() * MY.array()).sum();
    auto proj = project_rank(MA - sol.U, r);
    dg.projection_gap = (PY - proj.projector).norm();
    dg.projection_tie = proj.tie_flag;
    dg.primal_feas = ops.localizing_matrix(sol.y).norm();
    dg.rank_B = matrix_rank(PY, tols.rank);
    auto fl = flatness(ops, sol.y, tols.rank, tols.psd, tols.primal_feas);
    dg.rank_M1 = fl.rank_prev;
    dg.rank_M2 = fl.rank_k;
    dg.flat = fl.flat;
    SymTensor3 Bt = unflatten(PY);
    dg.residual_hs = hs_norm(A - Bt);
    dg.residual_spectral = spectral_norm(MA - PY);

    bool zeroA = A.is_zero();
    if (!zeroA) dg.rho_hat = spectral_radius(A, tols.spectral).value;

    bool member = membership_test(PY, MA - sol.U, r, tols.projection * scale * scale, tols.rank);
    cert.gates.push_back(gate_le("dual feasibility", dg.dual_feas_residual, tols.dual_feas));
    cert.gates.push_back(gate("dual psd", dg.psd_min_eig, -tols.psd * scale, dg.psd_min_eig >= -tols.psd * scale));
    cert.gates.push_back(gate("primal psd", dg.moment_min_eig, -tols.psd * scale * 100.0,
                              dg.moment_min_eig >= -tols.psd * scale * 100.0));
    cert.gates.push_back(gate_le("primal feasibility", dg.primal_feas, tols.primal_feas * scale));
    cert.gates.push_back(gate_le("complementarity", std::abs(dg.complementarity), tols.complementarity * scale));
    cert.gates.push_back(gate("projection", dg.projection_gap, tols.projection * scale,
                              member && (dg.projection_tie || dg.projection_gap <= tols.projection * scale)));
    cert.gates.push_back(gate_le("rank gate", dg.rank_B, r));
    cert.gates.push_back(gate_le("duality gap", std::abs(dg.duality_gap), tols.gap * scale));

    for (const auto& g : cert.gates) {
        if (!g.passed) {
            cert.status = Status::Uncertified;
            cert.reason = g.name;
            break;
        }
    }
    bool core = cert.reason.empty();

    if (fl.flat) {
        try {
            ExtractionOptions eo;
            eo.tol_rank = tols.rank;
            eo.tol_psd = tols.psd;
            eo.tol_feas = tols.primal_feas;
            eo.seed = tols.extraction_seed;
            cert.atoms = extract_atoms(ops, sol.y, eo).atoms;
        } catch (const ExtractionError&) {
        }
    }

    if (r == 1 && !zeroA) {
        auto ref = rank_one_refine(A, sol, sigma, dg.rho_hat);
        dg.refined_residual = ref.residual;
        cert.rank_one = ref;
    } else if (cert.atoms && !cert.atoms->atoms.empty()) {
        std::vector<Vec> vs;
        for (const auto& a : cert.atoms->atoms) vs.push_back(a.vector);
        try {
            dg.refined_residual = refine_coefficients(A, vs).residual;
        } catch (const std::domain_error&) {
        }
    }

    auto fail = [&](const std::string& why) {
        cert.status = Status::Uncertified;
        cert.reason = why;
    };

    if (!core) {
        // keep the first failing gate as the reason
    } else if (r == 1 && sigma < dg.rho_hat) {
        cert.status = Status::BestRankR;
    } else if (r == 1 && sigma > 0.0) {
        cert.gates.push_back(gate("sigma threshold", sigma, dg.rho_hat, false));
        fail("sigma threshold");
    } else if (dg.rank_M1 == dg.rank_M2 && dg.rank_M2 == r + 1) {
        SymTensor3 R = A - Bt;
        dg.rank_r1_bound = R.is_zero() ? 0.0 : std::pow(spectral_radius(R, tols.spectral).value, 2);
        fail("rank r+1 case: only the constructive bound applies");
    } else if (!fl.flat) {
        cert.gates.push_back(gate("flatness", dg.rank_M2 - dg.rank_M1, 0, false));
        fail("flatness");
    } else if (sigma == 0.0) {
        cert.gates.push_back(gate("flatness", 0, 0, true));
        cert.status = Status::BestRankR;
    } else {
        cert.gates.push_back(gate("flatness", 0, 0, true));
        if (dg.rank_M1 > r) {
            cert.gates.push_back(gate_le("rank M1", dg.rank_M1, r));
            fail("rank M1");
        } else if (!cert.atoms) {
            fail("extraction failed");
        } else {
            try {
                auto t = tau(*cert.atoms, r);
                dg.tau = t.tau;
                dg.tau_provenance = "computed from candidate decomposition";
                double thr = t.tau * dg.rho_hat / (2.0 * r);
                cert.gates.push_back(gate("sigma threshold", sigma, thr, sigma < thr));
                if (sigma < thr) {
                    dg.alpha = quasi_alpha(hs_norm(A), r, sigma, t.tau);
                    cert.status = Status::QuasiOptimalAlpha;
                } else {
                    fail("sigma threshold");
                }
            } catch (const std::domain_error&) {
                fail("ill-conditioned decomposition");
            }
        }
    }
    return cert;
}

namespace {

// Coefficients of the monomials of t = Q^T x, degree <= 2, in the monomials of x.
Mat monomial_transform(const Mat& Q, const MomentOps& ops)
{
    const int n = ops.n();
    const int N = ops.dim_m();
    const auto& mons = ops.table().monomials;
    const auto& mk = ops.m_basis();
    std::map<Exponent, int> row_of;
    for (int a = 0; a < N; ++a) row_of[mons[mk[a]]] = a;
    Mat T = Mat::Zero(N, N);
    for (int a = 0; a < N; ++a) {
        const auto& e = mons[mk[a]];
        std::vector<int> vars;
        for (int i = 0; i < n; ++i)
            for (int p = 0; p < e[i]; ++p) vars.push_back(i);
        if (vars.empty()) {
            T(a, 0) = 1.0;
        } else if (vars.size() == 1) {
            for (int i = 0; i < n; ++i) {
                Exponent f(n, 0);
                f[i] = 1;
                T(a, row_of.at(f)) += Q(i, vars[0]);
            }
        } else {
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j) {
                    Exponent f(n, 0);
                    ++f[i];
                    ++f[j];
                    T(a, row_of.at(f)) += Q(i, vars[0]) * Q(j, vars[1]);
                }
        }
    }
    return T;
}

}  // namespace

OdecoPair odeco_certificate(const AtomicMeasure& atoms_in, int r, double sigma)
{
    AtomicMeasure atoms = atoms_in;
    atoms.sort_by_weight();
    const int s = static_cast<int>(atoms.atoms.size());
    if (s == 0) throw std::invalid_argument("odeco certificate needs atoms");
    const int n = static_cast<int>(atoms.atoms[0].vector.size());
    if (r < 1 || r > s) throw std::invalid_argument("rank out of range");
    Mat F(n, s);
    for (int i = 0; i < s; ++i) F.col(i) = atoms.atoms[i].vector;
    if ((F.transpose() * F - Mat::Identity(s, s)).cwiseAbs().maxCoeff() > 1e-10)
        throw std::invalid_argument("atoms are not orthonormal");
    double lr = atoms.atoms[r - 1].weight;
    double lnext = r < s ? atoms.atoms[r].weight : 0.0;
    if (sigma < 0.0 || sigma > lr - lnext) throw std::invalid_argument("sigma out of range");

    OdecoPair out;
    out.A = assemble(atoms, n);
    for (int i = 0; i < r; ++i) {
        out.best.atoms.push_back(atoms.atoms[i]);
        if (atoms.atoms[i].weight - sigma > 0.0)
            out.measure.atoms.push_back({atoms.atoms[i].weight - sigma, atoms.atoms[i].vector});
    }

    MomentOps ops(n, 2);
    const int N = ops.dim_m();
    PrimalSolution& sol = out.solution;
    sol.n = n;
    sol.r = r;
    sol.sigma = sigma;
    sol.y = ops.moments_from_atoms(out.measure);
    sol.B = ops.block_P(sol.y);
    sol.X = ops.moment_matrix(sol.y);
    sol.U = Mat::Zero(n, n * n);
    for (int i = 0; i < r; ++i) {
        const Vec& x = atoms.atoms[i].vector;
        Vec xx(n * n);
        for (int a = 0; a < n; ++a)
            for (int b = 0; b < n; ++b) xx(a * n + b) = x(a) * x(b);
        sol.U += sigma * x * xx.transpose();
    }
    // w(x) = -(3 sigma / 2) |x|^2 on the basis (1, x)
    sol.W = Mat::Zero(ops.dim_l(), ops.dim_l());
    for (int i = 1; i < ops.dim_l(); ++i) sol.W(i, i) = -1.5 * sigma;

    // Gram matrix of z / sigma in rotated coordinates t = Q^T x, with x_i = e_i
    Mat Q = F.householderQr().householderQ();
    Q.leftCols(s) = F;
    const auto& mons = ops.table().monomials;
    const auto& mk = ops.m_basis();
    std::map<Exponent, int> row_of;
    for (int a = 0; a < N; ++a) row_of[mons[mk[a]]] = a;
    auto lin = [&](int i) { Exponent e(n, 0); e[i] = 1; return row_of.at(e); };
    auto quad = [&](int i, int j) { Exponent e(n, 0); ++e[i]; ++e[j]; return row_of.at(e); };
    Mat Zr = Mat::Zero(N, N);
    for (int i = 0; i < n; ++i) {
        int a = lin(i), b = quad(i, i);
        if (i < r) {
            // (t_i - t_i^2)^2 / 2
            Zr(a, a) += 0.5;
            Zr(b, b) += 0.5;
            Zr(a, b) -= 0.5;
            Zr(b, a) -= 0.5;
        } else {
            // t_j^2 / 2 + t_j^4 / 2
            Zr(a, a) += 0.5;
            Zr(b, b) += 0.5;
        }
        for (int j = i + 1; j < n; ++j) Zr(quad(i, j), quad(i, j)) += 1.0;
    }
    // (1 - |t|^2)^2
    Vec c = Vec::Zero(N);
    c(0) = 1.0;
    for (int i = 0; i < n; ++i) c(quad(i, i)) = -1.0;
    Zr += c * c.transpose();

    Mat T = monomial_transform(Q, ops);
    out.Z = sigma * T.transpose() * Zr * T;
    sol.V = sigma * ops.E0() - out.Z;
    sol.rho = 1.0;
    sol.C = kyfan_subgradient(sol.B, r);
    sol.psi = primal_objective(flatten(out.A), sol.B, sol.X, sigma);
    sol.converged = true;
    return out;
}

}  // namespace tcert
