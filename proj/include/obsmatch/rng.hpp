#pragma once

#include <array>
#include <cstdint>

namespace obsmatch {

// xoshiro256** with the reference 2^128 jump. Streams for a (run, trajectory)
// cell are derived as: state = splitmix64 expansion of (master_seed ^ run),
// then `trajectory` applications of jump().
class Rng {
public:
    using result_type = std::uint64_t;

    explicit Rng(std::uint64_t seed = 0) noexcept;

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return ~result_type{0}; }

    result_type operator()() noexcept;

    // Uniform on [0, 1) with 53 random bits.
    double uniform() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

    void jump() noexcept;

    bool operator==(const Rng&) const = default;

private:
    std::array<std::uint64_t, 4> s_{};
};

std::uint64_t splitmix64(std::uint64_t& state) noexcept;

Rng stream_for(std::uint64_t master_seed, std::uint64_t run, std::uint64_t trajectory) noexcept;

} // namespace obsmatch
