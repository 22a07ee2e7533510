#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "tcert/certify.hpp"
#include "tcert/solver.hpp"
#include "tcert/tensor_core.hpp"

namespace tcert {

struct RunReport {
    std::string input;
    int n = 0;
    int r = 0;
    SolverOptions options;
    int starts = 1;
    int best_start = 0;
    PrimalSolution solution;
    Certificate certificate;
    std::optional<double> seconds;
};

// Runs `starts` solves concurrently (seeds opts.seed + i), certifies each and keeps
// the best: certified before uncertified, then smallest |gap|, then smallest psi.
RunReport run_approx(const SymTensor3& A, int r, const SolverOptions& opts, int starts = 1,
                     const CertifyTolerances& tols = {});

// Strict order used for the multistart reduction.
bool better_run(const Certificate& a, const Certificate& b);

nlohmann::json to_json(const Mat& M);
Mat mat_from_json(const nlohmann::json& j);
nlohmann::json to_json(const Vec& v);
Vec vec_from_json(const nlohmann::json& j);
nlohmann::json to_json(const AtomicMeasure& mu);
AtomicMeasure atoms_from_json(const nlohmann::json& j);
nlohmann::json to_json(const SolverOptions& o);
SolverOptions options_from_json(const nlohmann::json& j);
nlohmann::json to_json(const PrimalSolution& s);
PrimalSolution solution_from_json(const nlohmann::json& j);
nlohmann::json to_json(const Certificate& c);
Certificate certificate_from_json(const nlohmann::json& j);
nlohmann::json to_json(const RunReport& r);
RunReport report_from_json(const nlohmann::json& j);

// Best approximant as a tensor: the refined rank-one term when r = 1, else B.
SymTensor3 approximant(const RunReport& rep);

// Example data shipped under data/examples.
struct ExampleData {
    int id = 0;
    std::string name;
    SymTensor3 tensor;
    int rank = 1;
    nlohmann::json golden;
};

ExampleData load_example(const std::string& dir, int id);
std::string default_data_dir();

// a111 = 2, a112 = 1, a122 = 1 - eps, a222 = 1 + eps
SymTensor3 perturbed_example1(double eps);
std::vector<double> sweep_epsilons();
// eps added to every independent entry
SymTensor3 perturbed_tensor(const SymTensor3& A, double eps);
// independent entries uniform in [0, 1]
SymTensor3 random_unit_tensor(int n, std::mt19937_64& rng);

struct SweepRow {
    double epsilon = 0.0;
    double lambda = 0.0;
    double x1 = 0.0;
    double x2 = 0.0;
    Status status = Status::Uncertified;
    double gap = 0.0;
};

std::vector<SweepRow> run_sweep(const SolverOptions& opts);
std::string sweep_csv(const std::vector<SweepRow>& rows);

struct RandomProtocolResult {
    int n = 0;
    int instances = 0;
    int certified = 0;         // non-Uncertified with |gap| <= gap_tol
    double max_certified_gap = 0.0;
    double seconds = 0.0;
};

// Random tensors with entries in [0, 1], r = 1, one start each.
RandomProtocolResult run_random_protocol(int n, int instances, std::uint64_t seed, const SolverOptions& opts,
                                         double gap_tol = 1e-5);

struct PerturbationProtocolResult {
    double epsilon = 0.0;
    double global_lambda = 0.0;   // oracle value
    int starts = 0;
    int global_hits = 0;
    int certified = 0;
    std::vector<double> lambdas;
    std::vector<double> gaps;
};

// Independent random starts on the perturbed odeco example, r = 1.
PerturbationProtocolResult run_perturbation_protocol(const SymTensor3& base, double eps, int starts,
                                                     std::uint64_t seed, const SolverOptions& opts,
                                                     double hit_tol = 1e-3);

}  // namespace tcert
