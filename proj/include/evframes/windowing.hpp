#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "evframes/event.hpp"

namespace evframes {

/// Tumbling windows [origin + k*tau, origin + (k+1)*tau), times in µs.
struct WindowConfig {
    std::uint64_t tau = 10000;
    std::uint64_t origin = 0;
};

void require_valid(const WindowConfig& cfg);

/// floor((t - origin) / tau). Throws TimeBeforeOrigin when t < origin.
std::uint64_t window_index(std::uint64_t t, const WindowConfig& cfg);

/// Per-pixel accumulator for one window. `last_p == 0` encodes "no event yet".
struct PixelState {
    std::uint64_t last_t = 0;
    std::int32_t pol_sum = 0;
    std::uint32_t count = 0;
    std::int8_t last_p = 0;

    bool has_event() const { return count != 0; }
    std::optional<std::uint64_t> last_time() const {
        return has_event() ? std::optional<std::uint64_t>(last_t) : std::nullopt;
    }
    std::optional<std::int8_t> last_polarity() const {
        return has_event() ? std::optional<std::int8_t>(last_p) : std::nullopt;
    }

    friend bool operator==(const PixelState&, const PixelState&) = default;
};

class PixelStateMap {
public:
    PixelStateMap() = default;
    PixelStateMap(SensorGeometry g, std::uint64_t window_start, std::uint64_t window_end, std::uint64_t ordinal = 0);

    SensorGeometry geometry() const { return geometry_; }
    std::uint64_t window_start() const { return window_start_; }
    std::uint64_t window_end() const { return window_end_; }
    std::uint64_t tau() const { return window_end_ - window_start_; }
    std::uint64_t ordinal() const { return ordinal_; }
    std::uint64_t total_events() const { return total_events_; }

    const PixelState& at(std::uint32_t x, std::uint32_t y) const { return pixels_[std::size_t{y} * geometry_.width + x]; }
    std::span<const PixelState> pixels() const { return pixels_; }

    /// Clears every pixel and moves the map to a new window span. Keeps its allocation.
    void reset(std::uint64_t window_start, std::uint64_t window_end, std::uint64_t ordinal);

    /// O(1) update. The caller guarantees the event is validated and inside the span.
    /// The latest timestamp wins; equal timestamps go to the later call.
    void record(const Event& e) {
        auto& px = pixels_[std::size_t{e.y} * geometry_.width + e.x];
        if (px.count == 0 || e.t >= px.last_t) {
            px.last_t = e.t;
            px.last_p = e.p;
        }
        px.pol_sum += e.p;
        ++px.count;
        ++total_events_;
    }

    bool contains_time(std::uint64_t t) const { return t >= window_start_ && t < window_end_; }

    /// Bytes held by the dense pixel array.
    std::size_t state_bytes() const { return pixels_.capacity() * sizeof(PixelState); }

    friend bool operator==(const PixelStateMap&, const PixelStateMap&) = default;

private:
    SensorGeometry geometry_{};
    std::uint64_t window_start_ = 0;
    std::uint64_t window_end_ = 0;
    std::uint64_t ordinal_ = 0;
    std::uint64_t total_events_ = 0;
    std::vector<PixelState> pixels_;
};

/// Builds the map of window `ordinal` from events that all fall inside it.
/// Throws EventOutsideWindow, OutOfBounds or IllegalPolarity.
PixelStateMap accumulate(std::span<const Event> events, SensorGeometry g, const WindowConfig& cfg,
                         std::uint64_t ordinal);

/// Single-pass tumbling-window accumulator. Holds exactly one PixelStateMap; each
/// completed window (including empty gap windows) is handed to the sink by const
/// reference and then reused for the next window.
class WindowStreamer {
public:
    using Sink = std::function<void(const PixelStateMap&)>;

    WindowStreamer(SensorGeometry g, WindowConfig cfg, Sink sink);

    /// Validates and records one event. Events must arrive in non-decreasing window order.
    void push(const Event& e);
    void push(std::span<const Event> events);

    /// Emits the open window, if any. Further pushes start a fresh sequence of windows.
    void finish();

    std::uint64_t events_seen() const { return events_seen_; }
    std::uint64_t windows_emitted() const { return windows_emitted_; }
    std::size_t state_bytes() const { return map_.state_bytes(); }
    const PixelStateMap& state() const { return map_; }

private:
    void open_window(std::uint64_t ordinal);

    SensorGeometry geometry_;
    WindowConfig cfg_;
    Sink sink_;
    PixelStateMap map_;
    bool open_ = false;
    std::uint64_t current_ = 0;
    std::uint64_t events_seen_ = 0;
    std::uint64_t windows_emitted_ = 0;
};

/// Convenience wrapper collecting every window of a normalized stream.
std::vector<PixelStateMap> stream_windows(const EventStream& s, const WindowConfig& cfg);

}  // namespace evframes
