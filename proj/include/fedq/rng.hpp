#pragma once

// Keyed, counter-based random streams.
//
// Every random quantity in a run is drawn from a stream identified by
// (master_seed, agent, step, purpose). A stream is Philox4x32-10 evaluated on
// the counter (block_index, tag), where the tag packs the key injectively, so
// distinct keys never share a counter and the values an agent sees do not
// depend on the order in which agents or seeds are scheduled.

#include <array>
#include <cstdint>

namespace fedq {

/// Philox4x32 with 10 rounds (Salmon et al., SC 2011).
class Philox4x32 {
public:
    using Counter = std::array<std::uint32_t, 4>;
    using Key = std::array<std::uint32_t, 2>;

    explicit constexpr Philox4x32(Key key) noexcept : key_(key) {}

    constexpr Counter operator()(Counter ctr) const noexcept {
        Key k = key_;
        for (int round = 0; round < 10; ++round) {
            const std::uint64_t p0 = std::uint64_t{kMul0} * ctr[0];
            const std::uint64_t p1 = std::uint64_t{kMul1} * ctr[2];
            ctr = {static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ k[0],
                   static_cast<std::uint32_t>(p1),
                   static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ k[1],
                   static_cast<std::uint32_t>(p0)};
            k[0] += kWeyl0;
            k[1] += kWeyl1;
        }
        return ctr;
    }

private:
    static constexpr std::uint32_t kMul0 = 0xD2511F53u;
    static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
    static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
    static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

    Key key_;
};

/// What a stream is used for. Part of the stream key.
enum class StreamPurpose : std::uint8_t {
    kSyncMinibatch = 1,
    kRecenterSamples = 2,
    kRecenterQuantize = 3,
    kIterationBatch = 4,
    kIterationQuantize = 5,
    kSubsample = 6,
    kTest = 255,
};

struct StreamKey {
    std::uint32_t agent = 0;   // < 2^20
    std::uint64_t step = 0;    // < 2^36
    StreamPurpose purpose = StreamPurpose::kTest;
};

inline constexpr std::uint32_t kMaxAgents = 1u << 20;
inline constexpr std::uint64_t kMaxStep = std::uint64_t{1} << 36;

/// A single random stream. Value type; copying forks the position.
class RandomStream {
public:
    RandomStream(std::uint64_t master_seed, StreamKey key);

    std::uint32_t next_u32() noexcept {
        if (lane_ == 4) refill();
        return buffer_[lane_++];
    }

    /// Uniform on the open interval (0, 1) with 2^-32 resolution.
    double uniform() noexcept { return (static_cast<double>(next_u32()) + 0.5) * 0x1p-32; }

    /// Uniform integer in [0, n). Multiply-shift reduction, one draw per call.
    std::uint32_t below(std::uint32_t n) noexcept {
        return static_cast<std::uint32_t>((std::uint64_t{next_u32()} * n) >> 32);
    }

    /// Number of 32-bit values consumed so far.
    std::uint64_t position() const noexcept { return block_ * 4 - (4 - lane_); }

private:
    void refill() noexcept;

    Philox4x32 gen_;
    std::uint32_t tag_lo_;
    std::uint32_t tag_hi_;
    std::uint64_t block_ = 0;
    Philox4x32::Counter buffer_{};
    int lane_ = 4;
};

/// Master seed plus the keying convention. Cheap to copy and share.
class RngPlan {
public:
    explicit RngPlan(std::uint64_t master_seed) noexcept : master_seed_(master_seed) {}

    RandomStream stream(StreamKey key) const { return RandomStream(master_seed_, key); }
    RandomStream stream(std::uint32_t agent, std::uint64_t step, StreamPurpose purpose) const {
        return RandomStream(master_seed_, StreamKey{agent, step, purpose});
    }

    std::uint64_t master_seed() const noexcept { return master_seed_; }

private:
    std::uint64_t master_seed_;
};

}  // namespace fedq
