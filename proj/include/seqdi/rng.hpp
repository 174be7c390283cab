#pragma once

#include <array>
#include <cstdint>

namespace seqdi {

// Reproducible random stream keyed by (seed, stream_id).
//
// The generator is xoshiro256** whose state is filled by SplitMix64 from a
// mix of both keys, so distinct stream ids give unrelated sequences. Uniform
// and normal variates are produced here rather than through <random>
// distributions, whose output differs between standard libraries.
//
// Single consumer: share a stream id across threads and results stop being
// schedule independent.
class RngStream {
public:
    RngStream(std::uint64_t seed, std::uint64_t stream_id);

    std::uint64_t seed() const { return seed_; }
    std::uint64_t stream_id() const { return stream_id_; }

    std::uint64_t next_u64();
    // Uniform on [0, 1) with 53 random bits.
    double uniform();
    // Standard normal by the Marsaglia polar method.
    double normal();
    double normal(double mean, double sd) { return mean + sd * normal(); }
    bool bernoulli(double p) { return uniform() < p; }

private:
    std::uint64_t seed_;
    std::uint64_t stream_id_;
    std::array<std::uint64_t, 4> state_{};
    double spare_normal_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace seqdi
