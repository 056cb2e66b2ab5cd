// Counter-based random numbers (Philox4x32-10). Every draw is a pure function
// of (seed, path, substep, slot), so simulations are reproducible bit-for-bit
// for any thread count and paths can be generated in any order.
#pragma once

#include <array>
#include <cstdint>

#include "sgbm/common.hpp"

namespace sgbm {

struct Philox4x32 {
    static constexpr std::uint32_t M0 = 0xD2511F53u;
    static constexpr std::uint32_t M1 = 0xCD9E8D57u;
    static constexpr std::uint32_t W0 = 0x9E3779B9u;
    static constexpr std::uint32_t W1 = 0xBB67AE85u;

    static std::array<std::uint32_t, 4> block(std::array<std::uint32_t, 4> ctr,
                                              std::array<std::uint32_t, 2> key) {
        for (int round = 0; round < 10; ++round) {
            const std::uint64_t p0 = static_cast<std::uint64_t>(M0) * ctr[0];
            const std::uint64_t p1 = static_cast<std::uint64_t>(M1) * ctr[2];
            const std::uint32_t hi0 = static_cast<std::uint32_t>(p0 >> 32);
            const std::uint32_t lo0 = static_cast<std::uint32_t>(p0);
            const std::uint32_t hi1 = static_cast<std::uint32_t>(p1 >> 32);
            const std::uint32_t lo1 = static_cast<std::uint32_t>(p1);
            ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
            key[0] += W0;
            key[1] += W1;
        }
        return ctr;
    }
};

// Keyed access to uniforms/normals on the (path, substep) lattice. Each
// (path, substep, block) counter yields two independent variates (slots 0,1).
class RngStream {
public:
    explicit RngStream(std::uint64_t seed)
        : key_{static_cast<std::uint32_t>(seed),
               static_cast<std::uint32_t>(seed >> 32)} {}

    std::uint64_t bits64(std::uint64_t path, std::uint32_t substep,
                         std::uint32_t block, int slot) const {
        const auto out = Philox4x32::block(
            {static_cast<std::uint32_t>(path),
             static_cast<std::uint32_t>(path >> 32) ^ (substep * 0x85EBCA6Bu),
             substep, block},
            key_);
        return slot == 0
                   ? (static_cast<std::uint64_t>(out[0]) << 32) | out[1]
                   : (static_cast<std::uint64_t>(out[2]) << 32) | out[3];
    }

    // Uniform in the open interval (0,1), 53-bit resolution.
    double uniform(std::uint64_t path, std::uint32_t substep,
                   std::uint32_t block, int slot) const {
        const std::uint64_t b = bits64(path, substep, block, slot);
        return (static_cast<double>(b >> 11) + 0.5) * 0x1.0p-53;
    }

    double normal(std::uint64_t path, std::uint32_t substep,
                  std::uint32_t block, int slot) const {
        return norm_inv(uniform(path, substep, block, slot));
    }

private:
    std::array<std::uint32_t, 2> key_;
};

}  // namespace sgbm
