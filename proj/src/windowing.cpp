#include "evframes/windowing.hpp"

#include <algorithm>
#include <string>

#include "evframes/error.hpp"

namespace evframes {

void require_valid(const WindowConfig& cfg) {
    if (cfg.tau < 1) {
        throw Error(ErrorKind::invalid_config, "tau must be >= 1 us");
    }
}

std::uint64_t window_index(std::uint64_t t, const WindowConfig& cfg) {
    if (t < cfg.origin) {
        throw Error(ErrorKind::time_before_origin,
                    "t=" + std::to_string(t) + " precedes origin " + std::to_string(cfg.origin));
    }
    return (t - cfg.origin) / cfg.tau;
}

PixelStateMap::PixelStateMap(SensorGeometry g, std::uint64_t window_start, std::uint64_t window_end,
                             std::uint64_t ordinal)
    : geometry_(g), window_start_(window_start), window_end_(window_end), ordinal_(ordinal), pixels_(g.pixel_count()) {
    require_valid(g);
}

void PixelStateMap::reset(std::uint64_t window_start, std::uint64_t window_end, std::uint64_t ordinal) {
    if (total_events_ != 0) {
        std::fill(pixels_.begin(), pixels_.end(), PixelState{});
    }
    window_start_ = window_start;
    window_end_ = window_end;
    ordinal_ = ordinal;
    total_events_ = 0;
}

PixelStateMap accumulate(std::span<const Event> events, SensorGeometry g, const WindowConfig& cfg,
                         std::uint64_t ordinal) {
    require_valid(cfg);
    const std::uint64_t start = cfg.origin + ordinal * cfg.tau;
    PixelStateMap map(g, start, start + cfg.tau, ordinal);
    for (const auto& e : events) {
        validate_event(e, g);
        if (!map.contains_time(e.t)) {
            throw Error(ErrorKind::event_outside_window, "t=" + std::to_string(e.t) + " outside [" +
                                                             std::to_string(map.window_start()) + "," +
                                                             std::to_string(map.window_end()) + ")");
        }
        map.record(e);
    }
    return map;
}

WindowStreamer::WindowStreamer(SensorGeometry g, WindowConfig cfg, Sink sink)
    : geometry_(g), cfg_(cfg), sink_(std::move(sink)), map_(g, cfg.origin, cfg.origin + cfg.tau, 0) {
    require_valid(cfg_);
}

void WindowStreamer::open_window(std::uint64_t ordinal) {
    const std::uint64_t start = cfg_.origin + ordinal * cfg_.tau;
    map_.reset(start, start + cfg_.tau, ordinal);
    current_ = ordinal;
    open_ = true;
}

void WindowStreamer::push(const Event& e) {
    validate_event(e, geometry_);
    const std::uint64_t k = window_index(e.t, cfg_);
    if (!open_) {
        open_window(k);
    } else if (k != current_) {
        if (k < current_) {
            throw Error(ErrorKind::event_outside_window,
                        "t=" + std::to_string(e.t) + " belongs to already closed window " + std::to_string(k));
        }
        while (current_ < k) {
            sink_(map_);
            ++windows_emitted_;
            open_window(current_ + 1);
        }
    }
    map_.record(e);
    ++events_seen_;
}

void WindowStreamer::push(std::span<const Event> events) {
    for (const auto& e : events) {
        push(e);
    }
}

void WindowStreamer::finish() {
    if (open_) {
        sink_(map_);
        ++windows_emitted_;
        open_ = false;
    }
}

std::vector<PixelStateMap> stream_windows(const EventStream& s, const WindowConfig& cfg) {
    std::vector<PixelStateMap> out;
    WindowStreamer streamer(s.geometry, cfg, [&out](const PixelStateMap& m) { out.push_back(m); });
    streamer.push(s.events);
    streamer.finish();
    return out;
}

}  // namespace evframes
