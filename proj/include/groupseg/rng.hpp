#pragma once

#include <array>
#include <cstdint>

namespace groupseg {

// xoshiro256++ with splitmix64 seeding. Small, fast, and the full state is
// four u64 words, so it serializes into checkpoints exactly.
class Rng {
public:
    explicit Rng(std::uint64_t seed);

    std::uint64_t next_u64();

    // uniform in [0, 1)
    double uniform();
    // uniform in (0, 1) -- safe as a log() argument
    double uniform_open();

    // standard normal via Box-Muller (no cached spare, so the state alone
    // determines the stream)
    double normal();

    // normal truncated to two standard deviations, then scaled
    double truncated_normal(double stddev);

    // Gumbel(0, 1)
    double gumbel();

    // uniform integer in [0, n)
    std::uint64_t below(std::uint64_t n);

    std::array<std::uint64_t, 4> state() const { return state_; }
    void set_state(const std::array<std::uint64_t, 4>& s) { state_ = s; }

private:
    std::array<std::uint64_t, 4> state_;
};

// Mixes a seed with a domain tag so independent streams can be derived from
// one user seed.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t tag);

}  // namespace groupseg
