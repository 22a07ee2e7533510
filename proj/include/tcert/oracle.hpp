#pragma once

#include <cstdint>
#include <string>

#include "tcert/tensor_core.hpp"

namespace tcert {

struct OracleResult {
    double value = 0.0;      // rank one: max <A, x^3>; rank r: residual ||A - B||
    Vec argmax;
    AtomicMeasure atoms;
    std::string method;
    long samples = 0;
    std::uint64_t seed = 0;
};

// Dense sphere sampling followed by projected ascent on the best candidates.
// grid_density <= 0 selects the default for n.
OracleResult brute_rank_one(const SymTensor3& A, long grid_density = 0, int polish_iters = 10000,
                            std::uint64_t seed = 0, int polish_top = 20);

// Multistart alternating optimization over r atoms; an upper bound on the best residual.
OracleResult baseline_rank_r(const SymTensor3& A, int r, int starts = 20, std::uint64_t seed = 0,
                             int sweeps = 500);

}  // namespace tcert
