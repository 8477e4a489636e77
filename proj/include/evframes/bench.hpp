#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>

#include "evframes/event.hpp"
#include "evframes/representations.hpp"
#include "evframes/windowing.hpp"

namespace evframes {

struct BenchReport {
    std::uint64_t events = 0;
    std::uint64_t wall_us = 0;
    double meps = 0.0;
    std::uint64_t frames = 0;
    double fps_equiv = 0.0;
    /// Resident accumulator bytes (one PixelStateMap per worker).
    std::size_t state_bytes = 0;

    /// `key=value` lines: events, wall_us, meps, frames, fps_equiv.
    std::string to_text() const;
};

/// Million events per second. A zero duration is treated as one microsecond so the value stays finite.
double meps(std::uint64_t events, double wall_us);

struct BenchOptions {
    WindowConfig window;
    RenderOptions render;
    /// Worker threads fusing completed windows; 1 keeps everything on the calling thread.
    unsigned jobs = 1;
};

/// Pull-style event source: fills the span, returns the count, 0 at end.
using EventSource = std::function<std::size_t(std::span<Event>)>;

/// Runs windowing + fusion over the source. Time spent inside the source is excluded.
BenchReport bench_throughput(SensorGeometry g, const EventSource& source, const BenchOptions& opts);
BenchReport bench_throughput(const EventStream& s, const BenchOptions& opts);

}  // namespace evframes
