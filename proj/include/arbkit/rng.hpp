#pragma once

#include <cstdint>

namespace arbkit {

// Counter-based stream: every output is a pure function of
// (root_seed, stream_id, position), so streams can be created in any order,
// consumed in parallel, and replayed exactly.  Core is Philox 4x32-10.
class RngStream {
  public:
    RngStream(std::uint64_t root_seed, std::uint64_t stream_id);

    std::uint64_t next_u64();
    double uniform01();      // strictly inside (0, 1)
    double normal();         // standard normal, Box-Muller
    double exponential();    // rate 1

    std::uint64_t root_seed() const { return root_seed_; }
    std::uint64_t stream_id() const { return stream_id_; }
    std::uint64_t position() const { return position_; }
    void seek(std::uint64_t position) { position_ = position; }

    // Stateless access: the value this stream yields at a given position.
    static std::uint64_t u64_at(std::uint64_t root_seed, std::uint64_t stream_id,
                                std::uint64_t position);

  private:
    std::uint64_t root_seed_;
    std::uint64_t stream_id_;
    std::uint64_t position_ = 0;
    std::uint32_t key_[2];
};

inline RngStream derive_stream(std::uint64_t root_seed, std::uint64_t stream_id) {
    return RngStream(root_seed, stream_id);
}

}  // namespace arbkit
