#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "fedq/rng.hpp"

namespace fedq {

/// Stochastic quantizer C(.; D, J): 2^J equally spaced levels over [-D, D].
struct QuantizerConfig {
    double bound = 1.0;   // D
    unsigned bits = 8;    // J, in [1, 62]

    void validate() const;
    std::uint64_t levels() const noexcept { return std::uint64_t{1} << bits; }
    /// Distance between adjacent levels, 2D / (2^J - 1).
    double spacing() const noexcept { return 2.0 * bound / static_cast<double>(levels() - 1); }
    double level_value(std::uint64_t index) const noexcept {
        return -bound + 2.0 * bound * static_cast<double>(index) / static_cast<double>(levels() - 1);
    }
};

struct CompressedMessage {
    std::size_t dim = 0;
    std::vector<std::uint64_t> level_indices;
    /// Sorted coordinate ids; empty unless the message is subsampled.
    std::vector<std::uint32_t> coordinate_ids;
    bool subsampled = false;
    std::uint64_t bit_cost = 0;
};

/// Unbiased stochastic rounding of every coordinate to one of its two
/// bracketing levels. Consumes one uniform per coordinate. Throws
/// CompressorBoundError if any |v[n]| > D.
CompressedMessage quantize(std::span<const double> v, const QuantizerConfig& cfg, RandomStream& stream);

/// Level index j maps to -D + 2D j / (2^J - 1); untransmitted coordinates of
/// a subsampled message decode to 0.
std::vector<double> decode(const CompressedMessage& msg, const QuantizerConfig& cfg, std::size_t dim);

/// Number of coordinates a subsampled message carries, ceil(alpha * dim).
std::size_t subsample_count(std::size_t dim, double alpha);
/// Bits spent on one coordinate id, ceil(log2 dim).
unsigned coordinate_id_bits(std::size_t dim) noexcept;

/// Sends ceil(alpha * dim) coordinates chosen uniformly without replacement.
/// Selected values are scaled by dim / count before quantization so the
/// decoded vector is unbiased for v; the caller sizes D for the scaled input.
/// Costs count * (J + ceil(log2 dim)) bits.
CompressedMessage subsample_quantize(std::span<const double> v, const QuantizerConfig& cfg, double alpha,
                                     RandomStream& stream);

// Wire layout: a little-endian bit stream, least significant bit first. A
// dense message is dim fields of J bits. A subsampled message is `count`
// records of [id: ceil(log2 dim) bits][level: J bits]. The stream length in
// bits equals bit_cost; the final byte is zero padded.
std::vector<std::uint8_t> pack_message(const CompressedMessage& msg, const QuantizerConfig& cfg);
CompressedMessage unpack_message(std::span<const std::uint8_t> bytes, const QuantizerConfig& cfg, std::size_t dim,
                                 bool subsampled, std::size_t count);

}  // namespace fedq
