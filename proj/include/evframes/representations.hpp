#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "evframes/image.hpp"
#include "evframes/windowing.hpp"

namespace evframes {

enum class RepKind { event_frame, frequency, decay, fusion, reconstruction };

std::string_view to_string(RepKind kind);
/// Accepts the short CLI names: frame, freq, decay, fusion, recon.
RepKind parse_rep_kind(std::string_view name);

/// Value range of a real-valued channel.
enum class ChannelRange { signed_unit, byte_range };

struct Channel {
    SensorGeometry geometry;
    ChannelRange range = ChannelRange::signed_unit;
    std::vector<double> values;

    double at(std::uint32_t x, std::uint32_t y) const { return values[std::size_t{y} * geometry.width + x]; }
};

/// What the frequency channel sums: the signed polarity sum, or the unsigned event count.
enum class FrequencyMode { signed_sum, event_count };

using FusionOrder = std::array<RepKind, 3>;
inline constexpr FusionOrder default_fusion_order{RepKind::event_frame, RepKind::frequency, RepKind::decay};

/// Parses "frame,freq,decay" style permutations. Throws InvalidConfig.
FusionOrder parse_fusion_order(std::string_view text);

struct RenderOptions {
    FusionOrder order = default_fusion_order;
    FrequencyMode frequency_mode = FrequencyMode::signed_sum;
};

// Per-pixel formulas. Every channel and every fused plane goes through these, so
// the dense and per-channel paths agree bit for bit.

inline double event_frame_value(const PixelState& px) { return px.has_event() ? static_cast<double>(px.last_p) : 0.0; }

/// p * exp(-age / tau), with age = t_ref - last_t in integer µs.
inline double decay_value(std::int8_t p, std::uint64_t age_us, std::uint64_t tau_us) {
    return static_cast<double>(p) * std::exp(-static_cast<double>(age_us) / static_cast<double>(tau_us));
}

/// 255 / (1 + exp(-x / 2)).
inline double frequency_value(std::int64_t x) { return 255.0 / (1.0 + std::exp(-static_cast<double>(x) / 2.0)); }

inline double decay_value(const PixelState& px, std::uint64_t t_ref, std::uint64_t tau_us) {
    return px.has_event() ? decay_value(px.last_p, t_ref - px.last_t, tau_us) : 0.0;
}

inline double frequency_value(const PixelState& px, FrequencyMode mode) {
    return frequency_value(mode == FrequencyMode::signed_sum ? std::int64_t{px.pol_sum} : std::int64_t{px.count});
}

/// 127 + 128 v, rounded half away from zero and clamped: -1 -> 0, 0 -> 127, +1 -> 255.
inline std::uint8_t quantize_signed_value(double v) {
    const double b = std::round(127.0 + v * 128.0);
    return static_cast<std::uint8_t>(b < 0.0 ? 0.0 : (b > 255.0 ? 255.0 : b));
}

inline std::uint8_t quantize_byte_value(double v) {
    const double b = std::round(v);
    return static_cast<std::uint8_t>(b < 0.0 ? 0.0 : (b > 255.0 ? 255.0 : b));
}

Channel event_frame(const PixelStateMap& m);
/// Reference time is the window end; tau is the window span.
Channel decaying_time_surface(const PixelStateMap& m);
Channel event_frequency(const PixelStateMap& m, FrequencyMode mode = FrequencyMode::signed_sum);

/// Throws RangeViolation if any value is outside [-1, 1] or not finite.
Image quantize_signed(const Channel& c);
/// Throws RangeViolation if any value is outside [0, 255] or not finite.
Image quantize_byte(const Channel& c);

struct FusedFrame {
    SensorGeometry geometry;
    FusionOrder order = default_fusion_order;
    std::array<std::vector<std::uint8_t>, 3> planes;

    /// Interleaves the planes into a 3-channel image.
    Image interleaved() const;
};

FusedFrame fuse(const PixelStateMap& m, const RenderOptions& opts = {});

/// 8-bit image for one representation: 1 channel for frame/freq/decay, 3 for fusion.
Image render(const PixelStateMap& m, RepKind kind, const RenderOptions& opts = {});

/// Raw 64-bit float plane for a single-channel representation.
Channel raw_channel(const PixelStateMap& m, RepKind kind, const RenderOptions& opts = {});

}  // namespace evframes
