#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace cableperc {

// Philox4x32-10 counter-based generator (Salmon et al., SC'11 constants).
// A stream is addressed by (key, stream): the key carries the master seed,
// the stream id occupies the high counter words, and the draw counter the
// low words. Distinct (key, stream) pairs give independent sequences, so
// replicas can be seeded as (master_seed, replica_index) with no
// coordination.
class Philox {
public:
    Philox() : Philox(0, 0) {}

    Philox(uint64_t key, uint64_t stream) {
        key_[0] = static_cast<uint32_t>(key);
        key_[1] = static_cast<uint32_t>(key >> 32);
        ctr_[0] = 0;
        ctr_[1] = 0;
        ctr_[2] = static_cast<uint32_t>(stream);
        ctr_[3] = static_cast<uint32_t>(stream >> 32);
    }

    uint32_t next_u32() {
        if (idx_ == 4) {
            out_ = block(ctr_, key_);
            bump_counter();
            idx_ = 0;
        }
        return out_[idx_++];
    }

    uint64_t next_u64() {
        uint64_t lo = next_u32();
        uint64_t hi = next_u32();
        return (hi << 32) | lo;
    }

    // Uniform on [0,1) with 53 random bits.
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // Uniform on (0,1]; safe as a log() argument.
    double next_open() { return 1.0 - next_double(); }

    // Standard normal via Box-Muller; consumes uniforms in pairs and caches
    // the second variate, so the draw sequence is a pure function of the
    // stream position.
    double next_normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = next_open();
        double u2 = next_double();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    // One Philox4x32-10 block; exposed for known-answer tests.
    static std::array<uint32_t, 4> block(std::array<uint32_t, 4> ctr,
                                         std::array<uint32_t, 2> key) {
        for (int round = 0; round < 10; ++round) {
            ctr = single_round(ctr, key);
            key[0] += 0x9E3779B9u;
            key[1] += 0xBB67AE85u;
        }
        return ctr;
    }

private:
    static void mulhilo(uint32_t a, uint32_t b, uint32_t& hi, uint32_t& lo) {
        uint64_t p = static_cast<uint64_t>(a) * b;
        hi = static_cast<uint32_t>(p >> 32);
        lo = static_cast<uint32_t>(p);
    }

    static std::array<uint32_t, 4> single_round(const std::array<uint32_t, 4>& x,
                                                const std::array<uint32_t, 2>& k) {
        uint32_t hi0, lo0, hi1, lo1;
        mulhilo(0xD2511F53u, x[0], hi0, lo0);
        mulhilo(0xCD9E8D57u, x[2], hi1, lo1);
        return {hi1 ^ x[1] ^ k[0], lo1, hi0 ^ x[3] ^ k[1], lo0};
    }

    void bump_counter() {
        if (++ctr_[0] == 0 && ++ctr_[1] == 0) {
            // stream words act as counter overflow space; a single stream
            // would need 2^64 blocks to get here
            ++ctr_[2];
        }
    }

    std::array<uint32_t, 4> ctr_{};
    std::array<uint32_t, 2> key_{};
    std::array<uint32_t, 4> out_{};
    int idx_ = 4;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

// Generator family identifier recorded in outputs.
inline const char* rng_family() { return "philox4x32-10"; }

}  // namespace cableperc
