#include "fedq/compression.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <string>

#include "fedq/error.hpp"

namespace fedq {

CompressorBoundError::CompressorBoundError(std::size_t coordinate, double value, double bound,
                                           const std::string& context)
    : Error("compressor input out of bound: |v[" + std::to_string(coordinate) + "]| = " +
            std::to_string(std::abs(value)) + " > D = " + std::to_string(bound) +
            (context.empty() ? std::string() : " (" + context + ")")),
      coordinate_(coordinate),
      value_(value),
      bound_(bound) {}

void QuantizerConfig::validate() const {
    if (!(bound > 0.0) || !std::isfinite(bound)) throw ValidationError("quantizer: bound D must be positive and finite");
    if (bits < 1 || bits > 62) throw ValidationError("quantizer: bits J must lie in [1, 62]");
}

namespace {

std::uint64_t round_stochastically(double value, const QuantizerConfig& cfg, double u) {
    const std::uint64_t top = cfg.levels() - 1;
    const double position = (value + cfg.bound) / (2.0 * cfg.bound) * static_cast<double>(top);
    const double floor_pos = std::floor(position);
    std::uint64_t lower = floor_pos <= 0.0 ? 0 : static_cast<std::uint64_t>(floor_pos);
    if (lower >= top) lower = top - 1;
    const double frac = position - static_cast<double>(lower);
    return u < frac ? lower + 1 : lower;
}

void check_bound(std::span<const double> v, double scale, double bound) {
    for (std::size_t n = 0; n < v.size(); ++n) {
        const double x = v[n] * scale;
        if (!(std::abs(x) <= bound)) throw CompressorBoundError(n, x, bound);
    }
}

class BitWriter {
public:
    void put(std::uint64_t value, unsigned width) {
        for (unsigned b = 0; b < width; ++b, ++pos_) {
            if (pos_ % 8 == 0) bytes_.push_back(0);
            if ((value >> b) & 1u) bytes_.back() |= static_cast<std::uint8_t>(1u << (pos_ % 8));
        }
    }
    std::vector<std::uint8_t> take() { return std::move(bytes_); }

private:
    std::vector<std::uint8_t> bytes_;
    std::uint64_t pos_ = 0;
};

class BitReader {
public:
    explicit BitReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}
    std::uint64_t get(unsigned width) {
        std::uint64_t value = 0;
        for (unsigned b = 0; b < width; ++b, ++pos_) {
            if (pos_ / 8 >= bytes_.size()) throw ValidationError("unpack_message: message truncated");
            if ((bytes_[pos_ / 8] >> (pos_ % 8)) & 1u) value |= std::uint64_t{1} << b;
        }
        return value;
    }

private:
    std::span<const std::uint8_t> bytes_;
    std::uint64_t pos_ = 0;
};

}  // namespace

CompressedMessage quantize(std::span<const double> v, const QuantizerConfig& cfg, RandomStream& stream) {
    cfg.validate();
    check_bound(v, 1.0, cfg.bound);
    CompressedMessage msg;
    msg.dim = v.size();
    msg.level_indices.resize(v.size());
    for (std::size_t n = 0; n < v.size(); ++n) msg.level_indices[n] = round_stochastically(v[n], cfg, stream.uniform());
    msg.bit_cost = std::uint64_t{cfg.bits} * v.size();
    return msg;
}

std::vector<double> decode(const CompressedMessage& msg, const QuantizerConfig& cfg, std::size_t dim) {
    cfg.validate();
    if (msg.dim != dim) throw DimensionError("decode: message dimension does not match");
    std::vector<double> out(dim, 0.0);
    const std::uint64_t levels = cfg.levels();
    for (std::uint64_t idx : msg.level_indices) {
        if (idx >= levels) throw ValidationError("decode: level index " + std::to_string(idx) + " out of range");
    }
    if (!msg.subsampled) {
        if (msg.level_indices.size() != dim) throw DimensionError("decode: dense message has wrong length");
        for (std::size_t n = 0; n < dim; ++n) out[n] = cfg.level_value(msg.level_indices[n]);
        return out;
    }
    if (msg.coordinate_ids.size() != msg.level_indices.size()) {
        throw DimensionError("decode: subsampled message ids and levels differ in length");
    }
    for (std::size_t i = 0; i < msg.coordinate_ids.size(); ++i) {
        const std::uint32_t id = msg.coordinate_ids[i];
        if (id >= dim) throw ValidationError("decode: coordinate id " + std::to_string(id) + " out of range");
        out[id] = cfg.level_value(msg.level_indices[i]);
    }
    return out;
}

std::size_t subsample_count(std::size_t dim, double alpha) {
    if (!(alpha > 0.0 && alpha <= 1.0)) throw ValidationError("subsample: alpha must lie in (0, 1]");
    const auto count = static_cast<std::size_t>(std::ceil(alpha * static_cast<double>(dim)));
    return std::min(count, dim);
}

unsigned coordinate_id_bits(std::size_t dim) noexcept {
    return dim <= 1 ? 0u : static_cast<unsigned>(std::bit_width(dim - 1));
}

CompressedMessage subsample_quantize(std::span<const double> v, const QuantizerConfig& cfg, double alpha,
                                     RandomStream& stream) {
    cfg.validate();
    const std::size_t dim = v.size();
    const std::size_t count = subsample_count(dim, alpha);
    if (dim > 0xFFFFFFFFull) throw ValidationError("subsample: dimension exceeds 32-bit ids");

    // Partial Fisher-Yates: the first `count` slots are a uniform subset.
    std::vector<std::uint32_t> ids(dim);
    std::iota(ids.begin(), ids.end(), 0u);
    for (std::size_t i = 0; i < count; ++i) {
        const std::size_t j = i + stream.below(static_cast<std::uint32_t>(dim - i));
        std::swap(ids[i], ids[j]);
    }
    ids.resize(count);
    std::sort(ids.begin(), ids.end());

    const double scale = count == 0 ? 1.0 : static_cast<double>(dim) / static_cast<double>(count);
    CompressedMessage msg;
    msg.dim = dim;
    msg.subsampled = true;
    msg.level_indices.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
        const double x = v[ids[i]] * scale;
        if (!(std::abs(x) <= cfg.bound)) throw CompressorBoundError(ids[i], x, cfg.bound, "subsampled, scaled input");
        msg.level_indices[i] = round_stochastically(x, cfg, stream.uniform());
    }
    msg.coordinate_ids = std::move(ids);
    msg.bit_cost = std::uint64_t{count} * (cfg.bits + coordinate_id_bits(dim));
    return msg;
}

std::vector<std::uint8_t> pack_message(const CompressedMessage& msg, const QuantizerConfig& cfg) {
    cfg.validate();
    BitWriter writer;
    const unsigned id_bits = coordinate_id_bits(msg.dim);
    for (std::size_t i = 0; i < msg.level_indices.size(); ++i) {
        if (msg.subsampled) writer.put(msg.coordinate_ids[i], id_bits);
        writer.put(msg.level_indices[i], cfg.bits);
    }
    return writer.take();
}

CompressedMessage unpack_message(std::span<const std::uint8_t> bytes, const QuantizerConfig& cfg, std::size_t dim,
                                 bool subsampled, std::size_t count) {
    cfg.validate();
    CompressedMessage msg;
    msg.dim = dim;
    msg.subsampled = subsampled;
    const std::size_t records = subsampled ? count : dim;
    const unsigned id_bits = coordinate_id_bits(dim);
    BitReader reader(bytes);
    for (std::size_t i = 0; i < records; ++i) {
        if (subsampled) msg.coordinate_ids.push_back(static_cast<std::uint32_t>(reader.get(id_bits)));
        msg.level_indices.push_back(reader.get(cfg.bits));
    }
    msg.bit_cost = std::uint64_t{records} * (cfg.bits + (subsampled ? id_bits : 0u));
    return msg;
}

}  // namespace fedq
