// Command-line front end: approx, examples, oracle, certify.
// Exit codes: 0 certified (or all checks passed), 2 uncertified (or a check failed), 1 error.

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "tcert/certify.hpp"
#include "tcert/lowrank.hpp"
#include "tcert/oracle.hpp"
#include "tcert/pipeline.hpp"

using namespace tcert;
using nlohmann::json;

namespace {

std::uint64_t seed_fallback(std::uint64_t given, bool explicit_seed)
{
    if (explicit_seed) return given;
    if (const char* env = std::getenv("TENSOR_CERT_SEED")) {
        try {
            return std::stoull(env);
        } catch (const std::exception&) {
            throw std::invalid_argument("TENSOR_CERT_SEED is not an unsigned integer");
        }
    }
    return given;
}

std::string read_file(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void print_text(const RunReport& rep, std::ostream& os)
{
    const auto& c = rep.certificate;
    const auto& d = c.diagnostics;
    os << std::setprecision(6);
    os << "status            " << to_string(c.status);
    if (c.status == Status::QuasiOptimalAlpha && d.alpha) os << " (alpha = " << *d.alpha << ")";
    if (!c.reason.empty()) os << " [" << c.reason << "]";
    os << "\n";
    if (c.rank_one) {
        os << "lambda            " << c.rank_one->lambda << "\n";
        os << "x                 " << c.rank_one->x.transpose() << "\n";
    }
    if (c.atoms) {
        for (const auto& a : c.atoms->atoms) os << "atom              " << a.weight << "  " << a.vector.transpose() << "\n";
    }
    os << "psi / phi         " << d.psi << " / " << d.phi << "\n";
    os << "duality gap       " << d.duality_gap << "\n";
    os << "dual feasibility  " << d.dual_feas_residual << "\n";
    os << "psd min eig (Z)   " << d.psd_min_eig << "\n";
    os << "complementarity   " << d.complementarity << "\n";
    os << "projection gap    " << d.projection_gap << "\n";
    os << "rank B            " << d.rank_B << "\n";
    os << "ranks (M1, M2)    " << d.rank_M1 << ", " << d.rank_M2 << (d.flat ? "  flat" : "  not flat") << "\n";
    os << "rho_hat           " << d.rho_hat << "  (" << d.rho_hat_provenance << ")\n";
    os << "residual (HS)     " << d.residual_hs << "\n";
    os << "residual (spec.)  " << d.residual_spectral << "\n";
    if (d.refined_residual) os << "refined residual  " << *d.refined_residual << "\n";
    if (d.tau) os << "tau               " << *d.tau << "  (" << d.tau_provenance << ")\n";
    os << "iterations        dca " << rep.solution.dca_iters << ", admm " << rep.solution.admm_iters
       << ", rho " << rep.solution.rho << "\n";
    for (const auto& g : c.gates)
        os << "  gate " << std::left << std::setw(20) << g.name << (g.passed ? "pass  " : "FAIL  ") << g.value
           << " vs " << g.threshold << "\n";
}

int exit_for(Status s) { return s == Status::Uncertified ? 2 : 0; }

struct Check {
    std::string what;
    bool pass;
    std::string detail;
};

std::string fmt(double v)
{
    std::ostringstream os;
    os << std::setprecision(6) << v;
    return os.str();
}

Check near(const std::string& what, double got, double want, double tol)
{
    return {what, std::abs(got - want) <= tol, fmt(got) + " vs " + fmt(want) + " (tol " + fmt(tol) + ")"};
}

double spectral_residual(const SymTensor3& A, const SymTensor3& B) { return spectral_norm(flatten(A) - flatten(B)); }

std::vector<Check> run_example(int id, const std::string& data, const std::string& out, const SolverOptions& base,
                               int starts)
{
    std::vector<Check> cs;
    auto save = [&](const std::string& name, const std::string& text) {
        if (out.empty()) return;
        std::filesystem::create_directories(out);
        std::ofstream(out + "/" + name) << text;
    };
    if (id == 2) {
        auto rows = run_sweep(base);
        save("example2_sweep.csv", sweep_csv(rows));
        int cert = 0;
        double kink = 0.0;
        for (std::size_t i = 0; i < rows.size(); ++i) {
            if (rows[i].status != Status::Uncertified) ++cert;
            if (i > 0)
                kink = std::max({kink, std::abs(rows[i].lambda - rows[i - 1].lambda),
                                 std::abs(rows[i].x1 - rows[i - 1].x1), std::abs(rows[i].x2 - rows[i - 1].x2)});
        }
        cs.push_back({"ex2 rows", rows.size() == 100, std::to_string(rows.size())});
        cs.push_back({"ex2 certified rows", cert == 100, std::to_string(cert) + "/100"});
        cs.push_back({"ex2 continuity", kink <= 0.1, "max jump " + fmt(kink)});
        return cs;
    }
    if (id == 7) {
        for (int n : {3, 4, 5}) {
            auto r = run_random_protocol(n, 100, base.seed + 1000 * n, base);
            cs.push_back({"ex7 n=" + std::to_string(n), r.certified >= 95, std::to_string(r.certified) + "/100"});
        }
        return cs;
    }
    auto ex = load_example(data, id);
    const auto& g = ex.golden;
    const auto& A = ex.tensor;
    if (id == 1 || id == 3) {
        auto rep = run_approx(A, 1, base, starts);
        save("example" + std::to_string(id) + ".json", to_json(rep).dump(2));
        const auto& c = rep.certificate;
        auto want_x = g["x"].get<std::vector<double>>();
        cs.push_back({"ex" + std::to_string(id) + " status", c.status == Status::BestRankR, to_string(c.status)});
        if (c.rank_one) {
            cs.push_back(near("ex" + std::to_string(id) + " lambda", c.rank_one->lambda, g["lambda"].get<double>(), 1e-3));
            double dx = 0.0;
            for (std::size_t i = 0; i < want_x.size(); ++i) dx = std::max(dx, std::abs(c.rank_one->x(i) - want_x[i]));
            cs.push_back({"ex" + std::to_string(id) + " x", dx <= 1e-3, "max diff " + fmt(dx)});
            cs.push_back(near("ex" + std::to_string(id) + " residual", spectral_residual(A, approximant(rep)),
                              g["residual"].get<double>(), 1e-3));
        }
        cs.push_back({"ex" + std::to_string(id) + " gap", std::abs(c.diagnostics.duality_gap) <= 1e-6,
                      fmt(c.diagnostics.duality_gap)});
        return cs;
    }
    if (id == 4 || id == 5) {
        auto rep = run_approx(A, 2, base, starts);
        save("example" + std::to_string(id) + ".json", to_json(rep).dump(2));
        const auto& d = rep.certificate.diagnostics;
        std::string p = "ex" + std::to_string(id);
        if (id == 4) {
            auto want = g["B"].get<std::vector<double>>();
            SymTensor3 B = approximant(rep);
            double db = 0.0;
            for (std::size_t s = 0; s < 4; ++s) db = std::max(db, std::abs(B.values()[s] - want[s]));
            cs.push_back({p + " B entries", db <= 1e-3, "max diff " + fmt(db)});
        }
        cs.push_back(near(p + " residual", d.residual_spectral, g["residual"].get<double>(), 1e-3));
        cs.push_back(near(p + " dual", d.phi, g["dual"].get<double>(), 1e-3));
        cs.push_back({p + " ranks", d.rank_M1 == 2 && d.rank_M2 == 2 && d.flat,
                      std::to_string(d.rank_M1) + "," + std::to_string(d.rank_M2)});
        cs.push_back({p + " status", rep.certificate.status != Status::Uncertified, to_string(rep.certificate.status)});
        return cs;
    }
    if (id == 6) {
        auto r2 = run_approx(A, 2, base, starts);
        cs.push_back({"ex6 r=2 residual", r2.certificate.diagnostics.residual_hs <= g["residual_r2_max"].get<double>(),
                      fmt(r2.certificate.diagnostics.residual_hs)});
        auto r1 = run_approx(A, 1, base, 10);
        cs.push_back({"ex6 r=1 status", r1.certificate.status == Status::BestRankR, to_string(r1.certificate.status)});
        if (r1.certificate.rank_one)
            cs.push_back(near("ex6 r=1 lambda", r1.certificate.rank_one->lambda, g["lambda_r1"].get<double>(), 1e-3));
        MomentOps ops(2, 2);
        AtomicMeasure local;
        Vec x = vec_from_json(g["local_x"]).normalized();
        local.atoms.push_back({g["local_lambda"].get<double>(), x});
        SolverOptions o = base;
        o.init = InitKind::WarmStart;
        o.warm_y = ops.moments_from_atoms(local);
        auto loc = run_approx(A, 1, o);
        cs.push_back({"ex6 local status", loc.certificate.status == Status::Uncertified, to_string(loc.certificate.status)});
        cs.push_back(near("ex6 local gap", loc.certificate.diagnostics.duality_gap, g["local_gap"].get<double>(), 1e-2));
        for (double eps : {1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6}) {
            auto pr = run_perturbation_protocol(A, eps, 100, base.seed, base);
            cs.push_back({"ex6 perturbed eps=" + fmt(eps), pr.global_hits >= 60, std::to_string(pr.global_hits) + "/100"});
        }
        return cs;
    }
    throw std::invalid_argument("unknown example " + std::to_string(id));
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Low-rank approximation of symmetric third-order tensors with optimality certificates"};
    app.require_subcommand(1);

    std::string file, format = "text", dump_moments, solution_file, data_dir = default_data_dir(), out_dir, which = "all",
                mode = "one";
    int rank = 1, starts = 1;
    double sigma = 1e-5, tol = 1e-7;
    std::uint64_t seed = 0;
    bool timings = false;

    auto* approx = app.add_subcommand("approx", "approximate and certify a tensor");
    approx->add_option("file", file, "tensor JSON file")->required();
    approx->add_option("--rank,-r", rank, "target rank")->check(CLI::PositiveNumber);
    approx->add_option("--sigma", sigma, "control parameter")->check(CLI::NonNegativeNumber);
    approx->add_option("--tol", tol, "KKT tolerance")->check(CLI::PositiveNumber);
    auto* seed_opt = approx->add_option("--seed", seed, "random seed (default: TENSOR_CERT_SEED or 0)");
    approx->add_option("--starts", starts, "number of random starts")->check(CLI::PositiveNumber);
    approx->add_option("--format", format, "json or text")->check(CLI::IsMember({"json", "text"}));
    approx->add_option("--dump-moments", dump_moments, "write the moment vector to this path");
    approx->add_flag("--timings", timings, "include wall-clock time in the JSON report");

    auto* examples = app.add_subcommand("examples", "reproduce the bundled examples and compare to golden values");
    examples->add_option("--which", which, "1..7 or all");
    examples->add_option("--out", out_dir, "directory for reports and the sweep CSV");
    examples->add_option("--data", data_dir, "data directory");
    auto* ex_seed = examples->add_option("--seed", seed, "random seed");
    int ex_starts = 8;
    examples->add_option("--starts", ex_starts, "random starts per solve")->check(CLI::PositiveNumber);

    auto* oracle = app.add_subcommand("oracle", "brute-force baselines");
    oracle->add_option("file", file, "tensor JSON file")->required();
    oracle->add_option("--rank,-r", rank, "target rank for mode als")->check(CLI::PositiveNumber);
    oracle->add_option("--mode", mode, "one or als")->check(CLI::IsMember({"one", "als"}));
    auto* or_seed = oracle->add_option("--seed", seed, "random seed");
    oracle->add_option("--starts", starts, "starts for mode als")->check(CLI::PositiveNumber);

    auto* cert = app.add_subcommand("certify", "certify a given solution without solving");
    cert->add_option("file", file, "tensor JSON file")->required();
    cert->add_option("--solution", solution_file, "report or solution JSON")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    try {
        if (*approx) {
            seed = seed_fallback(seed, seed_opt->count() > 0);
            SymTensor3 A = read_tensor_file(file);
            if (A.is_zero()) throw std::invalid_argument("zero tensor has no spectral direction");
            SolverOptions opts;
            opts.sigma = sigma;
            opts.tol_kkt = tol;
            opts.seed = seed;
            RunReport rep = run_approx(A, rank, opts, starts);
            rep.input = file;
            if (!timings) rep.seconds.reset();
            if (!dump_moments.empty()) {
                MomentSequence m{A.dim(), 2, rep.solution.y};
                std::ofstream(dump_moments) << moments_to_json_string(m) << "\n";
            }
            if (format == "json") std::cout << to_json(rep).dump(2) << "\n";
            else print_text(rep, std::cout);
            return exit_for(rep.certificate.status);
        }
        if (*examples) {
            SolverOptions opts;
            opts.seed = seed_fallback(seed, ex_seed->count() > 0);
            std::vector<int> ids;
            if (which == "all") ids = {1, 2, 3, 4, 5, 6, 7};
            else ids = {std::stoi(which)};
            bool all = true;
            for (int id : ids) {
                for (const auto& c : run_example(id, data_dir, out_dir, opts, ex_starts)) {
                    std::cout << (c.pass ? "PASS  " : "FAIL  ") << std::left << std::setw(26) << c.what << c.detail << "\n";
                    all = all && c.pass;
                }
            }
            return all ? 0 : 2;
        }
        if (*oracle) {
            seed = seed_fallback(seed, or_seed->count() > 0);
            SymTensor3 A = read_tensor_file(file);
            OracleResult res = mode == "one" ? brute_rank_one(A, 0, 10000, seed) : baseline_rank_r(A, rank, starts < 2 ? 20 : starts, seed);
            json j = {{"method", res.method}, {"value", res.value}, {"samples", res.samples}, {"seed", res.seed},
                      {"atoms", to_json(res.atoms)}};
            if (res.argmax.size()) j["argmax"] = to_json(res.argmax);
            std::cout << j.dump(2) << "\n";
            return 0;
        }
        if (*cert) {
            SymTensor3 A = read_tensor_file(file);
            json j = json::parse(read_file(solution_file));
            bool multipliers = true;
            PrimalSolution sol;
            int r = 1;
            if (j.contains("solution")) {
                sol = solution_from_json(j["solution"]);
                r = j.at("r").get<int>();
            } else if (j.contains("y")) {
                sol = solution_from_json(j);
                r = sol.r;
            } else if (j.contains("atoms")) {
                MomentOps ops(A.dim(), 2);
                AtomicMeasure mu = atoms_from_json(j["atoms"]);
                r = j.value("r", static_cast<int>(mu.atoms.size()));
                sol.n = A.dim();
                sol.r = r;
                sol.sigma = j.value("sigma", 1e-5);
                sol.y = ops.moments_from_atoms(mu);
            } else {
                throw std::invalid_argument("solution file has neither a solution nor atoms");
            }
            MomentOps ops(A.dim(), 2);
            if (sol.y.size() != ops.ny()) throw std::invalid_argument("solution does not match the tensor dimension");
            if (sol.U.size() == 0 || sol.V.size() == 0 || sol.W.size() == 0) {
                multipliers = false;
                sol.U = Mat::Zero(A.dim(), A.dim() * A.dim());
                sol.V = Mat::Zero(ops.dim_m(), ops.dim_m());
                sol.W = Mat::Zero(ops.dim_l(), ops.dim_l());
            }
            sol.B = ops.block_P(sol.y);
            sol.X = ops.moment_matrix(sol.y);
            Certificate c = certify(A, r, sol);
            if (!multipliers) {
                c.status = Status::Uncertified;
                c.reason = "multipliers missing: gap-only diagnostics";
            }
            std::cout << to_json(c).dump(2) << "\n";
            return exit_for(c.status);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
