#include "tcert/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <queue>
#include <random>
#include <stdexcept>

#include "tcert/certify.hpp"

namespace tcert {

namespace {

long default_density(int n)
{
    switch (n) {
    case 2: return 100000;
    case 3: return 200000;
    default: return 1000000;
    }
}

}  // namespace

OracleResult brute_rank_one(const SymTensor3& A, long grid_density, int polish_iters, std::uint64_t seed,
                            int polish_top)
{
    const int n = A.dim();
    if (n > 4) throw std::invalid_argument("brute force oracle supports n <= 4");
    if (grid_density <= 0) grid_density = default_density(n);

    using Cand = std::pair<double, Vec>;
    auto worse = [](const Cand& a, const Cand& b) { return a.first > b.first; };
    std::priority_queue<Cand, std::vector<Cand>, decltype(worse)> top(worse);
    auto offer = [&](const Vec& x) {
        double v = eval_cubic(A, x);
        if (static_cast<int>(top.size()) < polish_top) top.emplace(v, x);
        else if (v > top.top().first) {
            top.pop();
            top.emplace(v, x);
        }
    };

    std::mt19937_64 rng(seed);
    Vec x(n);
    if (n == 1) {
        x(0) = 1.0;
        offer(x);
        x(0) = -1.0;
        offer(x);
    } else if (n == 2) {
        for (long i = 0; i < grid_density; ++i) {
            double th = 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(grid_density);
            x << std::cos(th), std::sin(th);
            offer(x);
        }
    } else if (n == 3) {
        const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
        for (long i = 0; i < grid_density; ++i) {
            double z = 1.0 - 2.0 * (static_cast<double>(i) + 0.5) / static_cast<double>(grid_density);
            double rad = std::sqrt(std::max(0.0, 1.0 - z * z));
            double ph = golden * static_cast<double>(i);
            x << rad * std::cos(ph), rad * std::sin(ph), z;
            offer(x);
        }
    } else {
        std::normal_distribution<double> g;
        for (long i = 0; i < grid_density; ++i) {
            for (int j = 0; j < n; ++j) x(j) = g(rng);
            offer(x.normalized());
        }
    }

    OracleResult out;
    out.method = "grid+polish";
    out.samples = grid_density;
    out.seed = seed;
    out.value = -std::numeric_limits<double>::infinity();
    while (!top.empty()) {
        Vec start = top.top().second;
        double raw = top.top().first;
        top.pop();
        Vec p = power_ascent(A, start, 1e-14, polish_iters);
        double v = eval_cubic(A, p);
        if (raw > v) {
            v = raw;
            p = start;
        }
        if (v > out.value) {
            out.value = v;
            out.argmax = p;
        }
    }
    out.atoms.atoms.push_back({out.value, out.argmax});
    return out;
}

OracleResult baseline_rank_r(const SymTensor3& A, int r, int starts, std::uint64_t seed, int sweeps)
{
    const int n = A.dim();
    if (r < 1) throw std::invalid_argument("rank must be positive");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g;
    OracleResult best;
    best.method = "multistart-als";
    best.seed = seed;
    best.samples = starts;
    best.value = std::numeric_limits<double>::infinity();
    const double normA = hs_norm(A);

    for (int s = 0; s < starts; ++s) {
        std::vector<Vec> xs(r, Vec(n));
        for (auto& v : xs) {
            for (int j = 0; j < n; ++j) v(j) = g(rng);
            v.normalize();
        }
        Vec mu = Vec::Zero(r);
        double prev = std::numeric_limits<double>::infinity(), res = normA;
        for (int sweep = 0; sweep < sweeps; ++sweep) {
            for (int i = 0; i < r; ++i) {
                SymTensor3 R = A;
                for (int j = 0; j < r; ++j)
                    if (j != i) R -= rank_one(mu(j), xs[j]);
                if (R.is_zero()) continue;
                // best signed rank-one direction of the residual
                Vec xp = power_ascent(R, xs[i], 1e-13, 200);
                Vec xm = power_ascent(-1.0 * R, xs[i], 1e-13, 200);
                xs[i] = std::abs(eval_cubic(R, xp)) >= std::abs(eval_cubic(R, xm)) ? xp : xm;
                mu(i) = eval_cubic(R, xs[i]);
            }
            try {
                auto ref = refine_coefficients(A, xs);
                mu = ref.weights;
                res = ref.residual;
            } catch (const std::domain_error&) {
                SymTensor3 B(n);
                for (int j = 0; j < r; ++j) B += rank_one(mu(j), xs[j]);
                res = hs_norm(A - B);
            }
            if (prev - res < 1e-15 * std::max(1.0, normA)) break;
            prev = res;
        }
        // recompute directly: the closed form can lose digits near zero
        SymTensor3 B(n);
        for (int j = 0; j < r; ++j) B += rank_one(mu(j), xs[j]);
        res = hs_norm(A - B);
        if (res < best.value) {
            best.value = res;
            best.atoms.atoms.clear();
            for (int j = 0; j < r; ++j) {
                if (mu(j) >= 0) best.atoms.atoms.push_back({mu(j), xs[j]});
                else best.atoms.atoms.push_back({-mu(j), -xs[j]});
            }
        }
    }
    best.atoms.merge(0.0);
    return best;
}

}  // namespace tcert
