#include "tcert/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "tcert/oracle.hpp"

namespace tcert {

using nlohmann::json;

bool better_run(const Certificate& a, const Certificate& b)
{
    bool ca = a.status != Status::Uncertified, cb = b.status != Status::Uncertified;
    if (ca != cb) return ca;
    double ga = std::abs(a.diagnostics.duality_gap), gb = std::abs(b.diagnostics.duality_gap);
    if (ga != gb) return ga < gb;
    return a.diagnostics.psi < b.diagnostics.psi;
}

RunReport run_approx(const SymTensor3& A, int r, const SolverOptions& opts, int starts, const CertifyTolerances& tols)
{
    if (starts < 1) throw std::invalid_argument("starts must be positive");
    if (A.is_zero()) throw std::invalid_argument("zero tensor has no spectral direction");
    auto t0 = std::chrono::steady_clock::now();
    std::vector<PrimalSolution> sols(starts);
    std::vector<Certificate> certs(starts);
    std::vector<std::string> errors(starts);
    std::atomic<int> next{0};
    auto work = [&]() {
        for (int i = next++; i < starts; i = next++) {
            try {
                SolverOptions o = opts;
                o.seed = opts.seed + static_cast<std::uint64_t>(i);
                sols[i] = solve(A, r, o);
                certs[i] = certify(A, r, sols[i], tols);
            } catch (const std::exception& e) {
                errors[i] = e.what();
            }
        }
    };
    unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    unsigned nthreads = std::min<unsigned>(hw, static_cast<unsigned>(starts));
    if (nthreads <= 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (unsigned t = 0; t < nthreads; ++t) pool.emplace_back(work);
        for (auto& th : pool) th.join();
    }
    int best = -1;
    for (int i = 0; i < starts; ++i) {
        if (!errors[i].empty()) continue;
        if (best < 0 || better_run(certs[i], certs[best])) best = i;
    }
    if (best < 0) throw std::runtime_error(errors[0]);

    RunReport rep;
    rep.n = A.dim();
    rep.r = r;
    rep.options = opts;
    rep.starts = starts;
    rep.best_start = best;
    rep.solution = std::move(sols[best]);
    rep.certificate = std::move(certs[best]);
    rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return rep;
}

json to_json(const Mat& M)
{
    json j = json::array();
    for (Eigen::Index i = 0; i < M.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index k = 0; k < M.cols(); ++k) row.push_back(M(i, k));
        j.push_back(row);
    }
    return j;
}

Mat mat_from_json(const json& j)
{
    if (!j.is_array()) throw std::invalid_argument("matrix must be an array of rows");
    const auto rows = static_cast<Eigen::Index>(j.size());
    const auto cols = rows ? static_cast<Eigen::Index>(j[0].size()) : 0;
    Mat M(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        if (static_cast<Eigen::Index>(j[i].size()) != cols) throw std::invalid_argument("ragged matrix");
        for (Eigen::Index k = 0; k < cols; ++k) M(i, k) = j[i][k].get<double>();
    }
    return M;
}

json to_json(const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Vec vec_from_json(const json& j)
{
    auto v = j.get<std::vector<double>>();
    return Eigen::Map<Vec>(v.data(), static_cast<Eigen::Index>(v.size()));
}

json to_json(const AtomicMeasure& mu)
{
    json j = json::array();
    for (const auto& a : mu.atoms) j.push_back({{"weight", a.weight}, {"x", to_json(a.vector)}});
    return j;
}

AtomicMeasure atoms_from_json(const json& j)
{
    AtomicMeasure mu;
    for (const auto& a : j) mu.atoms.push_back({a.at("weight").get<double>(), vec_from_json(a.at("x"))});
    return mu;
}

namespace {

std::string init_name(InitKind k)
{
    switch (k) {
    case InitKind::Zero: return "zero";
    case InitKind::WarmStart: return "warm";
    default: return "random_atoms";
    }
}

InitKind init_kind(const std::string& s)
{
    if (s == "zero") return InitKind::Zero;
    if (s == "warm") return InitKind::WarmStart;
    if (s == "random_atoms") return InitKind::RandomAtoms;
    throw std::invalid_argument("unknown init " + s);
}

template <class T>
void put_opt(json& j, const char* key, const std::optional<T>& v)
{
    if (v) j[key] = *v;
}

template <class T>
std::optional<T> get_opt(const json& j, const char* key)
{
    if (j.contains(key) && !j[key].is_null()) return j[key].get<T>();
    return std::nullopt;
}

}  // namespace

json to_json(const SolverOptions& o)
{
    json j = {{"sigma", o.sigma},
              {"rho_pen", o.rho_pen},
              {"steplength", o.steplength},
              {"admm_penalty", o.admm_penalty},
              {"proximal", o.proximal},
              {"tol_kkt", o.tol_kkt},
              {"tol_admm", o.tol_admm},
              {"tol_dca", o.tol_dca},
              {"max_admm_iters", o.max_admm_iters},
              {"max_dca_iters", o.max_dca_iters},
              {"adaptive_penalty", o.adaptive_penalty},
              {"escalate_rho", o.escalate_rho},
              {"rho_max", o.rho_max},
              {"seed", o.seed},
              {"init", init_name(o.init)}};
    if (o.init == InitKind::WarmStart) j["warm_y"] = to_json(o.warm_y);
    return j;
}

SolverOptions options_from_json(const json& j)
{
    SolverOptions o;
    o.sigma = j.value("sigma", o.sigma);
    o.rho_pen = j.value("rho_pen", o.rho_pen);
    o.steplength = j.value("steplength", o.steplength);
    o.admm_penalty = j.value("admm_penalty", o.admm_penalty);
    o.proximal = j.value("proximal", o.proximal);
    o.tol_kkt = j.value("tol_kkt", o.tol_kkt);
    o.tol_admm = j.value("tol_admm", o.tol_admm);
    o.tol_dca = j.value("tol_dca", o.tol_dca);
    o.max_admm_iters = j.value("max_admm_iters", o.max_admm_iters);
    o.max_dca_iters = j.value("max_dca_iters", o.max_dca_iters);
    o.adaptive_penalty = j.value("adaptive_penalty", o.adaptive_penalty);
    o.escalate_rho = j.value("escalate_rho", o.escalate_rho);
    o.rho_max = j.value("rho_max", o.rho_max);
    o.seed = j.value("seed", o.seed);
    o.init = init_kind(j.value("init", std::string("random_atoms")));
    if (j.contains("warm_y")) o.warm_y = vec_from_json(j["warm_y"]);
    return o;
}

json to_json(const PrimalSolution& s)
{
    return {{"n", s.n},
            {"r", s.r},
            {"sigma", s.sigma},
            {"rho", s.rho},
            {"B", to_json(s.B)},
            {"X", to_json(s.X)},
            {"y", to_json(s.y)},
            {"U", to_json(s.U)},
            {"V", to_json(s.V)},
            {"W", to_json(s.W)},
            {"C", to_json(s.C)},
            {"psi", s.psi},
            {"residuals",
             {{"primal_feas", s.residuals.primal_feas},
              {"dual_feas", s.residuals.dual_feas},
              {"psd_residual", s.residuals.psd_residual},
              {"rank_residual", s.residuals.rank_residual},
              {"dca_gap", s.residuals.dca_gap}}},
            {"converged", s.converged},
            {"admm_iters", s.admm_iters},
            {"dca_iters", s.dca_iters},
            {"dca_objective", s.dca_objective},
            {"dca_rho", s.dca_rho}};
}

PrimalSolution solution_from_json(const json& j)
{
    PrimalSolution s;
    s.n = j.at("n").get<int>();
    s.r = j.at("r").get<int>();
    s.sigma = j.at("sigma").get<double>();
    s.rho = j.value("rho", 1.0);
    s.y = vec_from_json(j.at("y"));
    if (j.contains("B")) s.B = mat_from_json(j["B"]);
    if (j.contains("X")) s.X = mat_from_json(j["X"]);
    if (j.contains("U")) s.U = mat_from_json(j["U"]);
    if (j.contains("V")) s.V = mat_from_json(j["V"]);
    if (j.contains("W")) s.W = mat_from_json(j["W"]);
    if (j.contains("C")) s.C = mat_from_json(j["C"]);
    s.psi = j.value("psi", 0.0);
    if (j.contains("residuals")) {
        const auto& r = j["residuals"];
        s.residuals.primal_feas = r.value("primal_feas", 0.0);
        s.residuals.dual_feas = r.value("dual_feas", 0.0);
        s.residuals.psd_residual = r.value("psd_residual", 0.0);
        s.residuals.rank_residual = r.value("rank_residual", 0.0);
        s.residuals.dca_gap = r.value("dca_gap", 0.0);
    }
    s.converged = j.value("converged", false);
    s.admm_iters = j.value("admm_iters", 0);
    s.dca_iters = j.value("dca_iters", 0);
    s.dca_objective = j.value("dca_objective", std::vector<double>{});
    s.dca_rho = j.value("dca_rho", std::vector<double>{});
    return s;
}

json to_json(const Certificate& c)
{
    const auto& d = c.diagnostics;
    json dj = {{"psi", d.psi},
               {"phi", d.phi},
               {"duality_gap", d.duality_gap},
               {"dual_feas_residual", d.dual_feas_residual},
               {"psd_min_eig", d.psd_min_eig},
               {"moment_min_eig", d.moment_min_eig},
               {"complementarity", d.complementarity},
               {"projection_gap", d.projection_gap},
               {"projection_tie", d.projection_tie},
               {"primal_feas", d.primal_feas},
               {"rank_B", d.rank_B},
               {"ranks", {d.rank_M1, d.rank_M2}},
               {"flat", d.flat},
               {"rho_hat", d.rho_hat},
               {"rho_hat_provenance", d.rho_hat_provenance},
               {"sigma", d.sigma},
               {"residual_hs", d.residual_hs},
               {"residual_spectral", d.residual_spectral}};
    put_opt(dj, "tau", d.tau);
    if (d.tau) dj["tau_provenance"] = d.tau_provenance;
    put_opt(dj, "alpha", d.alpha);
    put_opt(dj, "refined_residual", d.refined_residual);
    put_opt(dj, "rank_r1_bound", d.rank_r1_bound);

    json gates = json::array();
    for (const auto& g : c.gates)
        gates.push_back({{"name", g.name}, {"passed", g.passed}, {"value", g.value}, {"threshold", g.threshold}});
    json j = {{"status", to_string(c.status)}, {"reason", c.reason}, {"diagnostics", dj}, {"gates", gates}};
    if (c.atoms) j["atoms"] = to_json(*c.atoms);
    if (c.rank_one)
        j["rank_one"] = {{"lambda", c.rank_one->lambda},
                         {"x", to_json(c.rank_one->x)},
                         {"residual", c.rank_one->residual},
                         {"justified", c.rank_one->justified}};
    return j;
}

Certificate certificate_from_json(const json& j)
{
    Certificate c;
    c.status = status_from_string(j.at("status").get<std::string>());
    c.reason = j.value("reason", std::string());
    const auto& dj = j.at("diagnostics");
    auto& d = c.diagnostics;
    d.psi = dj.at("psi").get<double>();
    d.phi = dj.at("phi").get<double>();
    d.duality_gap = dj.at("duality_gap").get<double>();
    d.dual_feas_residual = dj.at("dual_feas_residual").get<double>();
    d.psd_min_eig = dj.at("psd_min_eig").get<double>();
    d.moment_min_eig = dj.at("moment_min_eig").get<double>();
    d.complementarity = dj.at("complementarity").get<double>();
    d.projection_gap = dj.at("projection_gap").get<double>();
    d.projection_tie = dj.at("projection_tie").get<bool>();
    d.primal_feas = dj.at("primal_feas").get<double>();
    d.rank_B = dj.at("rank_B").get<int>();
    d.rank_M1 = dj.at("ranks")[0].get<int>();
    d.rank_M2 = dj.at("ranks")[1].get<int>();
    d.flat = dj.at("flat").get<bool>();
    d.rho_hat = dj.at("rho_hat").get<double>();
    d.rho_hat_provenance = dj.at("rho_hat_provenance").get<std::string>();
    d.sigma = dj.at("sigma").get<double>();
    d.residual_hs = dj.at("residual_hs").get<double>();
    d.residual_spectral = dj.at("residual_spectral").get<double>();
    d.tau = get_opt<double>(dj, "tau");
    d.tau_provenance = dj.value("tau_provenance", std::string());
    d.alpha = get_opt<double>(dj, "alpha");
    d.refined_residual = get_opt<double>(dj, "refined_residual");
    d.rank_r1_bound = get_opt<double>(dj, "rank_r1_bound");
    for (const auto& g : j.at("gates"))
        c.gates.push_back({g.at("name").get<std::string>(), g.at("passed").get<bool>(), g.at("value").get<double>(),
                           g.at("threshold").get<double>()});
    if (j.contains("atoms")) c.atoms = atoms_from_json(j["atoms"]);
    if (j.contains("rank_one")) {
        const auto& ro = j["rank_one"];
        c.rank_one = RankOneRefinement{ro.at("lambda").get<double>(), vec_from_json(ro.at("x")),
                                       ro.at("residual").get<double>(), ro.at("justified").get<bool>()};
    }
    return c;
}

json to_json(const RunReport& r)
{
    json j = {{"input", r.input},
              {"n", r.n},
              {"r", r.r},
              {"options", to_json(r.options)},
              {"seed", r.options.seed},
              {"starts", r.starts},
              {"best_start", r.best_start},
              {"solution", to_json(r.solution)},
              {"certificate", to_json(r.certificate)}};
    if (r.certificate.atoms) j["atoms"] = to_json(*r.certificate.atoms);
    if (r.seconds) j["seconds"] = *r.seconds;
    return j;
}

RunReport report_from_json(const json& j)
{
    RunReport r;
    r.input = j.value("input", std::string());
    r.n = j.at("n").get<int>();
    r.r = j.at("r").get<int>();
    r.options = options_from_json(j.at("options"));
    r.starts = j.value("starts", 1);
    r.best_start = j.value("best_start", 0);
    r.solution = solution_from_json(j.at("solution"));
    r.certificate = certificate_from_json(j.at("certificate"));
    r.seconds = get_opt<double>(j, "seconds");
    return r;
}

SymTensor3 approximant(const RunReport& rep)
{
    if (rep.r == 1 && rep.certificate.rank_one) return rank_one(rep.certificate.rank_one->lambda, rep.certificate.rank_one->x);
    return unflatten(rep.solution.B);
}

ExampleData load_example(const std::string& dir, int id)
{
    std::string path = dir + "/examples/ex" + std::to_string(id) + ".json";
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    auto j = json::parse(ss.str());
    ExampleData ex;
    ex.id = id;
    ex.name = j.value("name", std::string());
    ex.rank = j.value("rank", 1);
    ex.golden = j.value("golden", json::object());
    ex.tensor = tensor_from_json_string(ss.str());
    return ex;
}

std::string default_data_dir()
{
#ifdef TCERT_DATA_DIR
    return TCERT_DATA_DIR;
#else
    return "data";
#endif
}

SymTensor3 perturbed_example1(double eps)
{
    SymTensor3 A(2);
    A.at(0, 0, 0) = 2.0;
    A.at(0, 0, 1) = 1.0;
    A.at(0, 1, 1) = 1.0 - eps;
    A.at(1, 1, 1) = 1.0 + eps;
    return A;
}

std::vector<double> sweep_epsilons()
{
    std::vector<double> e;
    for (int i = 0; i < 100; ++i) e.push_back(1e-6 + 1e-3 * i);
    return e;
}

SymTensor3 perturbed_tensor(const SymTensor3& A, double eps)
{
    SymTensor3 B = A;
    for (auto& v : B.values()) v += eps;
    return B;
}

SymTensor3 random_unit_tensor(int n, std::mt19937_64& rng)
{
    std::uniform_real_distribution<double> u(0.0, 1.0);
    SymTensor3 A(n);
    for (auto& v : A.values()) v = u(rng);
    return A;
}

std::vector<SweepRow> run_sweep(const SolverOptions& opts)
{
    std::vector<SweepRow> rows;
    for (double eps : sweep_epsilons()) {
        auto rep = run_approx(perturbed_example1(eps), 1, opts, 1);
        SweepRow row;
        row.epsilon = eps;
        row.status = rep.certificate.status;
        row.gap = rep.certificate.diagnostics.duality_gap;
        if (rep.certificate.rank_one) {
            row.lambda = rep.certificate.rank_one->lambda;
            row.x1 = rep.certificate.rank_one->x(0);
            row.x2 = rep.certificate.rank_one->x(1);
        }
        rows.push_back(row);
    }
    return rows;
}

std::string sweep_csv(const std::vector<SweepRow>& rows)
{
    std::ostringstream os;
    os << "epsilon,lambda,x1,x2\n" << std::setprecision(10);
    for (const auto& r : rows) os << r.epsilon << ',' << r.lambda << ',' << r.x1 << ',' << r.x2 << '\n';
    return os.str();
}

namespace {

template <class F>
void parallel_for(int count, F&& body)
{
    std::atomic<int> next{0};
    auto work = [&]() {
        for (int i = next++; i < count; i = next++) body(i);
    };
    unsigned nthreads = std::min<unsigned>(std::max(1u, std::thread::hardware_concurrency()),
                                           static_cast<unsigned>(std::max(count, 1)));
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < nthreads; ++t) pool.emplace_back(work);
    for (auto& th : pool) th.join();
}

}  // namespace

RandomProtocolResult run_random_protocol(int n, int instances, std::uint64_t seed, const SolverOptions& opts,
                                         double gap_tol)
{
    auto t0 = std::chrono::steady_clock::now();
    std::mt19937_64 rng(seed);
    std::vector<SymTensor3> tensors;
    for (int i = 0; i < instances; ++i) tensors.push_back(random_unit_tensor(n, rng));
    std::vector<Certificate> certs(instances);
    parallel_for(instances, [&](int i) {
        SolverOptions o = opts;
        o.seed = seed + static_cast<std::uint64_t>(i);
        auto sol = solve(tensors[i], 1, o);
        certs[i] = certify(tensors[i], 1, sol);
    });
    RandomProtocolResult res;
    res.n = n;
    res.instances = instances;
    for (const auto& c : certs) {
        double g = std::abs(c.diagnostics.duality_gap);
        if (c.status != Status::Uncertified && g <= gap_tol) {
            ++res.certified;
            res.max_certified_gap = std::max(res.max_certified_gap, g);
        }
    }
    res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return res;
}

PerturbationProtocolResult run_perturbation_protocol(const SymTensor3& base, double eps, int starts,
                                                     std::uint64_t seed, const SolverOptions& opts, double hit_tol)
{
    SymTensor3 A = perturbed_tensor(base, eps);
    PerturbationProtocolResult res;
    res.epsilon = eps;
    res.starts = starts;
    res.global_lambda = brute_rank_one(A).value;
    res.lambdas.assign(starts, 0.0);
    res.gaps.assign(starts, 0.0);
    std::vector<Status> status(starts);
    parallel_for(starts, [&](int i) {
        SolverOptions o = opts;
        o.seed = seed + static_cast<std::uint64_t>(i);
        auto sol = solve(A, 1, o);
        auto c = certify(A, 1, sol);
        res.lambdas[i] = c.rank_one ? c.rank_one->lambda : 0.0;
        res.gaps[i] = c.diagnostics.duality_gap;
        status[i] = c.status;
    });
    for (int i = 0; i < starts; ++i) {
        if (std::abs(res.lambdas[i] - res.global_lambda) <= hit_tol) ++res.global_hits;
        if (status[i] != Status::Uncertified) ++res.certified;
    }
    return res;
}

}  // namespace tcert
