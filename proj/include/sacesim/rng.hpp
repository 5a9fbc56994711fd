#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>

namespace sacesim {

/// Philox4x32-10 block function (Salmon et al. 2011).
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key);

std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t fnv1a64(std::string_view text);

struct StreamLineage {
    std::uint64_t master_seed = 0;
    std::string scenario_id;
    std::uint64_t sim_index = 0;
    std::string purpose;
};

/// Counter-based random stream. The key is derived from (master_seed, purpose),
/// the upper counter words from (sim_index, scenario_id), and the lower 64 counter
/// bits advance per block, so streams with different lineage never share a block.
///
/// Single owner: copy it to fork an identical sequence, never share across threads.
class RngStream {
public:
    explicit RngStream(StreamLineage lineage);

    const StreamLineage& lineage() const { return lineage_; }

    std::uint64_t next_u64();
    /// Uniform on [0, 1) with 53 bits of resolution.
    double uniform();
    /// Standard normal by Box-Muller; consumes exactly two 64-bit draws.
    double normal();
    bool bernoulli(double p);
    /// Uniform integer on [0, k).
    std::uint64_t uniform_index(std::uint64_t k);
    /// Gamma(shape, 1) by Marsaglia-Tsang.
    double gamma(double shape);
    double chi_squared(double df);

    /// Independent child stream, e.g. one per bootstrap replicate.
    RngStream split(std::uint64_t index) const;

private:
    void refill();

    StreamLineage lineage_;
    std::array<std::uint32_t, 2> key_{};
    std::uint32_t upper_[2]{};
    std::uint64_t block_ = 0;
    std::array<std::uint32_t, 4> buffer_{};
    int used_ = 4;  // number of 32-bit words consumed from buffer_
};

RngStream spawn_stream(std::uint64_t master_seed, std::string_view scenario_id,
                       std::uint64_t sim_index, std::string_view purpose);

}  // namespace sacesim
