#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace evframes {

/// One sensor event: timestamp (µs), pixel column/row, polarity in {-1, +1}.
struct Event {
    std::uint64_t t = 0;
    std::uint16_t x = 0;
    std::uint16_t y = 0;
    std::int8_t p = 1;

    friend bool operator==(const Event&, const Event&) = default;
};

struct SensorGeometry {
    std::uint32_t width = 0;
    std::uint32_t height = 0;

    std::size_t pixel_count() const { return std::size_t{width} * height; }
    bool contains(std::uint32_t x, std::uint32_t y) const { return x < width && y < height; }

    friend bool operator==(const SensorGeometry&, const SensorGeometry&) = default;
};

/// Throws InvalidGeometry unless width >= 1 and height >= 1.
void require_valid(SensorGeometry g);

struct EventStream {
    SensorGeometry geometry;
    /// Absolute time (µs) that t = 0 refers to. Informational; window phase comes from WindowConfig.
    std::uint64_t origin = 0;
    std::vector<Event> events;
};

inline bool is_legal_polarity(std::int8_t p) { return p == 1 || p == -1; }

/// Returns `e` unchanged or throws OutOfBounds / IllegalPolarity.
Event validate_event(const Event& e, SensorGeometry g);

struct NormalizedStream {
    EventStream stream;
    /// Events whose timestamp was below the running maximum of the events before them.
    std::size_t reordered = 0;
};

/// Stable sort by timestamp; equal timestamps keep stream order.
NormalizedStream normalize_stream(EventStream s);

}  // namespace evframes
