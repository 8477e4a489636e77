#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "evframes/event.hpp"
#include "evframes/io.hpp"

namespace evframes {

/// A full-height vertical bar sweeping horizontally with wrap-around. Crossing k
/// happens at t_k = floor(k * 1e6 / |velocity|) µs: the leading edge enters one
/// column (+1 events) and, once the bar is fully on the plane (k >= bar_width),
/// the trailing edge leaves the column bar_width behind it (-1 events). The bar
/// enters at column 0 (moving right) or width-1 (moving left) at t = 0.
struct MovingBarScenario {
    SensorGeometry geometry{64, 64};
    std::uint32_t bar_width = 4;
    /// Pixels per second; the sign gives the direction.
    double velocity = 1000.0;
    std::uint64_t duration_us = 100000;
    std::uint32_t events_per_crossing = 1;
    std::uint64_t seed = 0;
    /// Uniform background noise, events per pixel per second.
    double noise_rate = 0.0;
};

/// Throws InvalidConfig for a zero velocity, bar width outside [1, width), etc.
void require_valid(const MovingBarScenario& sc);

std::uint64_t crossing_time(const MovingBarScenario& sc, std::uint64_t k);
std::uint32_t leading_column(const MovingBarScenario& sc, std::uint64_t k);
std::uint32_t trailing_column(const MovingBarScenario& sc, std::uint64_t k);

/// Box enclosing the bar-edge events of one window (noise excluded).
struct WindowTruth {
    std::uint64_t ordinal = 0;
    AnnotationRecord box;
};

/// Lazy, sorted event source for a scenario. Only one time slice of events is
/// buffered at a time, so arbitrarily long streams run in constant memory.
class MovingBarGenerator {
public:
    static constexpr std::uint64_t slice_us = 1000;

    /// With `truth_tau`, per-window ground-truth boxes (origin 0) are tracked as events are produced.
    explicit MovingBarGenerator(const MovingBarScenario& sc, std::optional<std::uint64_t> truth_tau = std::nullopt,
                                int truth_class_id = 0);

    std::size_t read(std::span<Event> out);
    bool next(Event& e) { return read(std::span<Event>(&e, 1)) == 1; }

    const std::vector<WindowTruth>& truths() const { return truths_; }
    std::uint64_t bar_events() const { return bar_events_; }
    std::uint64_t noise_events() const { return noise_events_; }

private:
    void fill_slice();
    void note_truth(std::uint64_t t, std::uint32_t column);

    MovingBarScenario sc_;
    std::optional<std::uint64_t> truth_tau_;
    int truth_class_id_;
    std::mt19937_64 rng_;
    std::uint64_t slice_start_ = 0;
    std::uint64_t next_crossing_ = 0;
    std::vector<Event> slice_;
    std::size_t cursor_ = 0;
    std::vector<WindowTruth> truths_;
    std::uint64_t bar_events_ = 0;
    std::uint64_t noise_events_ = 0;
};

struct SyntheticSequence {
    EventStream stream;
    std::vector<WindowTruth> truth;
};

SyntheticSequence generate_moving_bar(const MovingBarScenario& sc, std::uint64_t tau_us = 10000, int class_id = 0);

}  // namespace evframes
