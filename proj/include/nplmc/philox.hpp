#pragma once

#include <array>
#include <cstdint>

namespace nplmc {

/// Key and counter of the Philox4x32-10 counter-based generator.
struct PhiloxKey {
    std::uint32_t k0 = 0;
    std::uint32_t k1 = 0;

    static constexpr PhiloxKey from_seed(std::uint64_t seed) noexcept {
        return {static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
    }
};
using PhiloxBlock = std::array<std::uint32_t, 4>;

inline constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
inline constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
inline constexpr std::uint32_t kPhiloxW0 = 0x9E3779B9u;
inline constexpr std::uint32_t kPhiloxW1 = 0xBB67AE85u;
inline constexpr int kPhiloxRounds = 10;

constexpr PhiloxBlock philox4x32(PhiloxBlock c, PhiloxKey k) noexcept {
    for (int round = 0; round < kPhiloxRounds; ++round) {
        const std::uint64_t p0 = std::uint64_t{kPhiloxM0} * c[0];
        const std::uint64_t p1 = std::uint64_t{kPhiloxM1} * c[2];
        c = {static_cast<std::uint32_t>(p1 >> 32) ^ c[1] ^ k.k0, static_cast<std::uint32_t>(p1),
             static_cast<std::uint32_t>(p0 >> 32) ^ c[3] ^ k.k1, static_cast<std::uint32_t>(p0)};
        k.k0 += kPhiloxW0;
        k.k1 += kPhiloxW1;
    }
    return c;
}

/// Maps two 32-bit words onto [0, 1) with 52 bits of resolution.
constexpr double unit_from_words(std::uint32_t hi, std::uint32_t lo) noexcept {
    const std::uint64_t bits = ((std::uint64_t{hi} << 32) | lo) >> 12;
    return static_cast<double>(bits) * 0x1p-52;
}

/// As unit_from_words, shifted to the cell midpoint so the result lies in (0, 1).
constexpr double open_unit_from_words(std::uint32_t hi, std::uint32_t lo) noexcept {
    const std::uint64_t bits = ((std::uint64_t{hi} << 32) | lo) >> 12;
    return (static_cast<double>(bits) + 0.5) * 0x1p-52;
}

/// Purpose tags keep the random numbers of different experiment stages disjoint.
enum class Stream : std::uint32_t {
    population = 1,
    estimation = 2,
    truth = 3,
    pilot = 4,
    training = 5,
    reference = 6,
    validation = 7,
    design = 8,
};

/// Random numbers for one (seed, stream, unit, realisation) key.
///
/// Draw `i` comes from Philox block `i / 2` with counter
/// (i / 2, realisation, unit, stream); even draws use words 0-1, odd draws
/// words 2-3. Any draw can be computed without generating the ones before it,
/// which is what makes results independent of scheduling.
class CounterStream {
  public:
    CounterStream(std::uint64_t seed, Stream stream, std::uint32_t unit,
                  std::uint32_t realisation) noexcept
        : key_(PhiloxKey::from_seed(seed)), stream_(static_cast<std::uint32_t>(stream)),
          unit_(unit), realisation_(realisation) {}

    /// Uniform on [0, 1).
    double uniform(std::uint32_t index) noexcept {
        const auto &w = fetch(index / 2);
        return (index & 1u) ? unit_from_words(w[2], w[3]) : unit_from_words(w[0], w[1]);
    }

    /// Uniform on (0, 1), safe for inverse-CDF sampling.
    double open_uniform(std::uint32_t index) noexcept {
        const auto &w = fetch(index / 2);
        return (index & 1u) ? open_unit_from_words(w[2], w[3])
                            : open_unit_from_words(w[0], w[1]);
    }

  private:
    const PhiloxBlock &fetch(std::uint32_t block) noexcept {
        if (!cached_ || block != cached_block_) {
            words_ = philox4x32({block, realisation_, unit_, stream_}, key_);
            cached_block_ = block;
            cached_ = true;
        }
        return words_;
    }

    PhiloxKey key_;
    std::uint32_t stream_;
    std::uint32_t unit_;
    std::uint32_t realisation_;
    PhiloxBlock words_{};
    std::uint32_t cached_block_ = 0;
    bool cached_ = false;
};

/// SplitMix64 finaliser; used to derive independent seeds from a master seed.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) noexcept {
    return mix64(seed ^ mix64(tag));
}

} // namespace nplmc
