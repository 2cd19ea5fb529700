#include "arbkit/rng.hpp"

#include <cmath>

namespace arbkit {

namespace {

constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
constexpr std::uint32_t kPhiloxW0 = 0x9E3779B9u;
constexpr std::uint32_t kPhiloxW1 = 0xBB67AE85u;

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

struct Block {
    std::uint32_t x[4];
};

inline Block philox4x32_10(std::uint32_t c0, std::uint32_t c1, std::uint32_t c2,
                           std::uint32_t c3, std::uint32_t k0, std::uint32_t k1) {
    for (int round = 0; round < 10; ++round) {
        const std::uint64_t p0 = static_cast<std::uint64_t>(kPhiloxM0) * c0;
        const std::uint64_t p1 = static_cast<std::uint64_t>(kPhiloxM1) * c2;
        const std::uint32_t hi0 = static_cast<std::uint32_t>(p0 >> 32);
        const std::uint32_t lo0 = static_cast<std::uint32_t>(p0);
        const std::uint32_t hi1 = static_cast<std::uint32_t>(p1 >> 32);
        const std::uint32_t lo1 = static_cast<std::uint32_t>(p1);
        const std::uint32_t n0 = hi1 ^ c1 ^ k0;
        const std::uint32_t n2 = hi0 ^ c3 ^ k1;
        c0 = n0;
        c1 = lo1;
        c2 = n2;
        c3 = lo0;
        k0 += kPhiloxW0;
        k1 += kPhiloxW1;
    }
    return Block{{c0, c1, c2, c3}};
}

}  // namespace

RngStream::RngStream(std::uint64_t root_seed, std::uint64_t stream_id)
    : root_seed_(root_seed), stream_id_(stream_id) {
    const std::uint64_t k = splitmix64(root_seed);
    key_[0] = static_cast<std::uint32_t>(k);
    key_[1] = static_cast<std::uint32_t>(k >> 32);
}

std::uint64_t RngStream::u64_at(std::uint64_t root_seed, std::uint64_t stream_id,
                                std::uint64_t position) {
    const std::uint64_t k = splitmix64(root_seed);
    const std::uint64_t block = position >> 1;
    const Block b = philox4x32_10(static_cast<std::uint32_t>(block),
                                  static_cast<std::uint32_t>(block >> 32),
                                  static_cast<std::uint32_t>(stream_id),
                                  static_cast<std::uint32_t>(stream_id >> 32),
                                  static_cast<std::uint32_t>(k),
                                  static_cast<std::uint32_t>(k >> 32));
    const int half = static_cast<int>(position & 1u) * 2;
    return (static_cast<std::uint64_t>(b.x[half + 1]) << 32) | b.x[half];
}

std::uint64_t RngStream::next_u64() {
    const std::uint64_t block = position_ >> 1;
    const Block b = philox4x32_10(static_cast<std::uint32_t>(block),
                                  static_cast<std::uint32_t>(block >> 32),
                                  static_cast<std::uint32_t>(stream_id_),
                                  static_cast<std::uint32_t>(stream_id_ >> 32),
                                  key_[0], key_[1]);
    const int half = static_cast<int>(position_ & 1u) * 2;
    ++position_;
    return (static_cast<std::uint64_t>(b.x[half + 1]) << 32) | b.x[half];
}

double RngStream::uniform01() {
    // 53-bit mantissa, offset keeps the value strictly positive
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53 + 0x1.0p-54;
}

double RngStream::normal() {
    const double u1 = uniform01();
    const double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
}

double RngStream::exponential() { return -std::log(uniform01()); }

}  // namespace arbkit
