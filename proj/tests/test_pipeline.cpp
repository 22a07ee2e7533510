#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "tcert/pipeline.hpp"

using namespace tcert;
using nlohmann::json;

namespace {

SymTensor3 example1() { return perturbed_example1(0.0); }

RunReport quiet_run(const SymTensor3& A, int r, const SolverOptions& o, int starts = 1)
{
    RunReport rep = run_approx(A, r, o, starts);
    rep.seconds.reset();
    return rep;
}

}  // namespace

TEST_CASE("report round trip")
{
    RunReport rep = quiet_run(example1(), 1, SolverOptions{});
    rep.input = "example.json";
    json j = to_json(rep);
    RunReport back = report_from_json(json::parse(j.dump()));
    CHECK(to_json(back).dump() == j.dump());
    CHECK(back.solution.y == rep.solution.y);
    CHECK(back.solution.U == rep.solution.U);
    CHECK(back.certificate.status == rep.certificate.status);
    REQUIRE(back.certificate.rank_one);
    CHECK(back.certificate.rank_one->x == rep.certificate.rank_one->x);

    RunReport timed = run_approx(example1(), 1, SolverOptions{});
    REQUIRE(timed.seconds);
    CHECK(report_from_json(to_json(timed)).seconds == timed.seconds);
}

TEST_CASE("reports are deterministic")
{
    auto ex = load_example(TCERT_DATA_DIR, 3);
    SolverOptions o;
    o.seed = 5;
    std::string a = to_json(quiet_run(ex.tensor, 1, o, 3)).dump();
    std::string b = to_json(quiet_run(ex.tensor, 1, o, 3)).dump();
    CHECK(a == b);
}

TEST_CASE("certifying a report again gives the same certificate")
{
    for (int id : {1, 6}) {
        auto ex = load_example(TCERT_DATA_DIR, id);
        RunReport rep = quiet_run(ex.tensor, id == 6 ? 2 : 1, SolverOptions{});
        RunReport back = report_from_json(json::parse(to_json(rep).dump()));
        Certificate again = certify(ex.tensor, back.r, back.solution);
        CHECK(to_json(again).dump() == to_json(rep.certificate).dump());
    }
}

TEST_CASE("serialized odeco pair certifies")
{
    std::mt19937_64 rng(1);
    std::normal_distribution<double> g;
    Mat G(3, 3);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) G(i, j) = g(rng);
    Mat Q = Eigen::HouseholderQR<Mat>(G).householderQ() * Mat::Identity(3, 3);
    AtomicMeasure mu;
    mu.atoms.push_back({3.0, Q.col(0)});
    mu.atoms.push_back({2.0, Q.col(1)});
    mu.atoms.push_back({1.0, Q.col(2)});
    for (double sigma : {0.0, 0.5}) {
        auto pair = odeco_certificate(mu, 2, sigma);
        PrimalSolution s = solution_from_json(json::parse(to_json(pair.solution).dump()));
        auto cert = certify(pair.A, 2, s);
        CHECK(cert.status == (sigma == 0.0 ? Status::BestRankR : Status::QuasiOptimalAlpha));
    }
    auto one = odeco_certificate(mu, 1, 0.5);
    auto c1 = certify(one.A, 1, solution_from_json(json::parse(to_json(one.solution).dump())));
    CHECK(c1.status == Status::BestRankR);
}

TEST_CASE("multistart reduction")
{
    Certificate good, bad, better;
    good.status = Status::BestRankR;
    good.diagnostics.duality_gap = 1e-8;
    better = good;
    better.diagnostics.duality_gap = -1e-9;
    bad.status = Status::Uncertified;
    bad.diagnostics.duality_gap = 0.0;
    CHECK(better_run(good, bad));
    CHECK_FALSE(better_run(bad, good));
    CHECK(better_run(better, good));
    Certificate tie = good;
    tie.diagnostics.psi = good.diagnostics.psi - 1.0;
    CHECK(better_run(tie, good));

    CHECK_THROWS_WITH(run_approx(SymTensor3(2), 1, SolverOptions{}), "zero tensor has no spectral direction");
    CHECK_THROWS(run_approx(example1(), 1, SolverOptions{}, 0));
}

TEST_CASE("example data")
{
    for (int id : {1, 3, 4, 5, 6}) {
        auto ex = load_example(TCERT_DATA_DIR, id);
        CHECK(ex.id == id);
        CHECK_FALSE(ex.name.empty());
        CHECK(ex.golden.is_object());
        CHECK_FALSE(ex.tensor.is_zero());
    }
    CHECK(load_example(TCERT_DATA_DIR, 1).tensor.values() == example1().values());
    CHECK(hs_norm(load_example(TCERT_DATA_DIR, 3).tensor) > 0.0);
    CHECK_THROWS(load_example(TCERT_DATA_DIR, 42));
}

TEST_CASE("sweep helpers")
{
    auto eps = sweep_epsilons();
    REQUIRE(eps.size() == 100);
    CHECK(eps.front() == doctest::Approx(1e-6));
    CHECK(eps.back() == doctest::Approx(1e-6 + 0.099));
    SymTensor3 A = perturbed_example1(0.25);
    CHECK(A.at(0, 0, 0) == 2.0);
    CHECK(A.at(0, 0, 1) == 1.0);
    CHECK(A.at(0, 1, 1) == 0.75);
    CHECK(A.at(1, 1, 1) == 1.25);

    SymTensor3 P = perturbed_tensor(A, 0.1);
    for (std::size_t s = 0; s < A.size(); ++s) CHECK(P.values()[s] == doctest::Approx(A.values()[s] + 0.1));

    std::mt19937_64 rng(3);
    SymTensor3 R = random_unit_tensor(4, rng);
    for (double v : R.values()) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
    }

    std::vector<SweepRow> rows = {{1e-6, 3.25, 0.8, 0.6, Status::BestRankR, 0.0}};
    std::string csv = sweep_csv(rows);
    std::istringstream in(csv);
    std::string header, line;
    std::getline(in, header);
    std::getline(in, line);
    CHECK(header == "epsilon,lambda,x1,x2");
    CHECK(line.rfind("1e-06,3.25,0.8,0.6", 0) == 0);
}

TEST_CASE("approximant")
{
    RunReport rep = quiet_run(example1(), 1, SolverOptions{});
    SymTensor3 B = approximant(rep);
    REQUIRE(rep.certificate.rank_one);
    CHECK(hs_norm(B - rank_one(rep.certificate.rank_one->lambda, rep.certificate.rank_one->x)) == 0.0);
    CHECK(hs_norm(example1() - B) == doctest::Approx(rep.certificate.rank_one->residual).epsilon(1e-12));
}
