#include "fedq/rng.hpp"

#include <string>

#include "fedq/error.hpp"

namespace fedq {

RandomStream::RandomStream(std::uint64_t master_seed, StreamKey key)
    : gen_({static_cast<std::uint32_t>(master_seed), static_cast<std::uint32_t>(master_seed >> 32)}) {
    if (key.agent >= kMaxAgents) {
        throw ValidationError("stream key: agent id " + std::to_string(key.agent) + " exceeds 2^20");
    }
    if (key.step >= kMaxStep) {
        throw ValidationError("stream key: step " + std::to_string(key.step) + " exceeds 2^36");
    }
    // tag layout: [purpose:8][agent:20][step:36]
    const std::uint64_t tag = (std::uint64_t{static_cast<std::uint8_t>(key.purpose)} << 56) |
                              (std::uint64_t{key.agent} << 36) | key.step;
    tag_lo_ = static_cast<std::uint32_t>(tag);
    tag_hi_ = static_cast<std::uint32_t>(tag >> 32);
}

void RandomStream::refill() noexcept {
    buffer_ = gen_({static_cast<std::uint32_t>(block_), static_cast<std::uint32_t>(block_ >> 32),
                    tag_lo_, tag_hi_});
    ++block_;
    lane_ = 0;
}

}  // namespace fedq
