#include "evframes/synth.hpp"

#include <algorithm>
#include <cmath>

#include "evframes/error.hpp"

namespace evframes {

void require_valid(const MovingBarScenario& sc) {
    require_valid(sc.geometry);
    if (!std::isfinite(sc.velocity) || sc.velocity == 0.0) {
        throw Error(ErrorKind::invalid_config, "bar velocity must be finite and non-zero");
    }
    if (sc.bar_width < 1 || sc.bar_width >= sc.geometry.width) {
        throw Error(ErrorKind::invalid_config, "bar width must be in [1, sensor width)");
    }
    if (sc.events_per_crossing < 1) {
        throw Error(ErrorKind::invalid_config, "events per crossing must be >= 1");
    }
    if (!std::isfinite(sc.noise_rate) || sc.noise_rate < 0.0) {
        throw Error(ErrorKind::invalid_config, "noise rate must be >= 0");
    }
}

std::uint64_t crossing_time(const MovingBarScenario& sc, std::uint64_t k) {
    return static_cast<std::uint64_t>(std::floor(static_cast<double>(k) * 1e6 / std::abs(sc.velocity)));
}

std::uint32_t leading_column(const MovingBarScenario& sc, std::uint64_t k) {
    const std::uint64_t w = sc.geometry.width;
    const std::uint64_t step = k % w;
    return static_cast<std::uint32_t>(sc.velocity > 0 ? step : w - 1 - step);
}

std::uint32_t trailing_column(const MovingBarScenario& sc, std::uint64_t k) {
    const std::uint64_t w = sc.geometry.width;
    // The trailing edge is bar_width columns behind the leading one.
    const std::uint64_t behind = (k % w + w - sc.bar_width) % w;
    return static_cast<std::uint32_t>(sc.velocity > 0 ? behind : w - 1 - behind);
}

MovingBarGenerator::MovingBarGenerator(const MovingBarScenario& sc, std::optional<std::uint64_t> truth_tau,
                                       int truth_class_id)
    : sc_(sc), truth_tau_(truth_tau), truth_class_id_(truth_class_id), rng_(sc.seed) {
    require_valid(sc_);
    if (truth_tau_ && *truth_tau_ < 1) {
        throw Error(ErrorKind::invalid_config, "tau must be >= 1 us");
    }
}

void MovingBarGenerator::note_truth(std::uint64_t t, std::uint32_t column) {
    const std::uint64_t ordinal = t / *truth_tau_;
    if (truths_.empty() || truths_.back().ordinal != ordinal) {
        WindowTruth wt;
        wt.ordinal = ordinal;
        wt.box.t = ordinal * *truth_tau_ + *truth_tau_ / 2;
        wt.box.x = column;
        wt.box.y = 0;
        wt.box.w = 1;
        wt.box.h = sc_.geometry.height;
        wt.box.class_id = truth_class_id_;
        wt.box.track_id = 0;
        wt.box.confidence = 1.0;
        truths_.push_back(wt);
        return;
    }
    auto& box = truths_.back().box;
    const double x0 = std::min<double>(box.x, column);
    const double x1 = std::max<double>(box.x + box.w, column + 1.0);
    box.x = x0;
    box.w = x1 - x0;
}

void MovingBarGenerator::fill_slice() {
    slice_.clear();
    cursor_ = 0;
    while (slice_.empty() && slice_start_ < sc_.duration_us) {
        const std::uint64_t end = std::min(slice_start_ + slice_us, sc_.duration_us);
        for (std::uint64_t t = crossing_time(sc_, next_crossing_); t < end; t = crossing_time(sc_, ++next_crossing_)) {
            const auto lead = static_cast<std::uint16_t>(leading_column(sc_, next_crossing_));
            const auto trail = static_cast<std::uint16_t>(trailing_column(sc_, next_crossing_));
            for (std::uint32_t y = 0; y < sc_.geometry.height; ++y) {
                for (std::uint32_t n = 0; n < sc_.events_per_crossing; ++n) {
                    slice_.push_back({t, lead, static_cast<std::uint16_t>(y), 1});
                }
            }
            const bool has_trailing = next_crossing_ >= sc_.bar_width;
            if (has_trailing) {
                for (std::uint32_t y = 0; y < sc_.geometry.height; ++y) {
                    for (std::uint32_t n = 0; n < sc_.events_per_crossing; ++n) {
                        slice_.push_back({t, trail, static_cast<std::uint16_t>(y), -1});
                    }
                }
            }
            if (truth_tau_) {
                note_truth(t, lead);
                if (has_trailing) note_truth(t, trail);
            }
        }
        bar_events_ += slice_.size();
        if (sc_.noise_rate > 0.0) {
            const double mean = sc_.noise_rate * static_cast<double>(sc_.geometry.pixel_count()) *
                                static_cast<double>(end - slice_start_) / 1e6;
            std::poisson_distribution<std::uint64_t> count(mean);
            std::uniform_int_distribution<std::uint64_t> when(slice_start_, end - 1);
            std::uniform_int_distribution<std::uint32_t> col(0, sc_.geometry.width - 1);
            std::uniform_int_distribution<std::uint32_t> row(0, sc_.geometry.height - 1);
            std::bernoulli_distribution positive(0.5);
            const auto n = count(rng_);
            for (std::uint64_t i = 0; i < n; ++i) {
                const auto t = when(rng_);
                const auto x = static_cast<std::uint16_t>(col(rng_));
                const auto y = static_cast<std::uint16_t>(row(rng_));
                slice_.push_back({t, x, y, static_cast<std::int8_t>(positive(rng_) ? 1 : -1)});
            }
            noise_events_ += n;
            std::stable_sort(slice_.begin(), slice_.end(), [](const Event& a, const Event& b) { return a.t < b.t; });
        }
        slice_start_ = end;
    }
}

std::size_t MovingBarGenerator::read(std::span<Event> out) {
    std::size_t n = 0;
    while (n < out.size()) {
        if (cursor_ == slice_.size()) {
            fill_slice();
            if (slice_.empty()) break;
        }
        const auto take = std::min(out.size() - n, slice_.size() - cursor_);
        std::copy_n(slice_.begin() + static_cast<std::ptrdiff_t>(cursor_), take, out.begin() + static_cast<std::ptrdiff_t>(n));
        cursor_ += take;
        n += take;
    }
    return n;
}

SyntheticSequence generate_moving_bar(const MovingBarScenario& sc, std::uint64_t tau_us, int class_id) {
    MovingBarGenerator gen(sc, tau_us, class_id);
    SyntheticSequence seq;
    seq.stream.geometry = sc.geometry;
    std::vector<Event> buf(8192);
    while (const auto n = gen.read(buf)) {
        seq.stream.events.insert(seq.stream.events.end(), buf.begin(), buf.begin() + static_cast<std::ptrdiff_t>(n));
    }
    seq.truth = gen.truths();
    return seq;
}

}  // namespace evframes
