#pragma once

#include <cstdint>
#include <random>

namespace fwdopt {

using Engine = std::mt19937_64;

/// Independent sub-streams used by the path generators. Drawing W and N with the
/// same seed yields independent noises because each has its own stream tag.
enum class Stream : std::uint32_t {
    wiener = 1,
    poisson = 2,
    poisson_lookahead = 3,
    default_jumps = 4,
    hidden_state = 5,
    aux = 6,
};

inline Engine make_engine(std::uint64_t seed, Stream stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffu),
                      static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream)};
    return Engine(seq);
}

/// Seed splitting rule for ensembles: path p uses master + p.
inline std::uint64_t path_seed(std::uint64_t master, std::uint64_t path_index) {
    return master + path_index;
}

}  // namespace fwdopt
