#include <doctest.h>

#include <random>

#include "evframes/error.hpp"
#include "evframes/windowing.hpp"
#include "oracle.hpp"
#include "test_support.hpp"

using namespace evframes;

namespace {

void check_matches_oracle(const PixelStateMap& m, const std::vector<Event>& events) {
    const auto truth = oracle::recompute(events, m.geometry(), m.window_start(), m.window_end());
    const auto px = m.pixels();
    REQUIRE(px.size() == truth.size());
    for (std::size_t i = 0; i < px.size(); ++i) {
        CHECK(px[i].has_event() == truth[i].any);
        CHECK(px[i].count == truth[i].count);
        CHECK(px[i].pol_sum == truth[i].pol_sum);
        if (truth[i].any) {
            CHECK(px[i].last_t == truth[i].last_t);
            CHECK(px[i].last_p == truth[i].last_p);
        }
    }
}

}  // namespace

TEST_CASE("window_index uses half-open tumbling windows") {
    const WindowConfig cfg{10000, 0};
    CHECK(window_index(0, cfg) == 0);
    CHECK(window_index(9999, cfg) == 0);
    CHECK(window_index(10000, cfg) == 1);
    CHECK(window_index(25000, cfg) == 2);
    const WindowConfig shifted{10000, 500};
    CHECK(window_index(500, shifted) == 0);
    CHECK(window_index(10499, shifted) == 0);
    CHECK(window_index(10500, shifted) == 1);
    try {
        window_index(499, shifted);
        FAIL("expected TimeBeforeOrigin");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::time_before_origin);
    }
}

TEST_CASE("accumulate keeps the last event and the signed sum") {
    const SensorGeometry g{8, 8};
    const std::vector<Event> ev{{100, 3, 4, 1}, {200, 3, 4, -1}};
    const auto m = accumulate(ev, g, {10000, 0}, 0);
    const auto& px = m.at(3, 4);
    CHECK(px.last_t == 200);
    CHECK(px.last_p == -1);
    CHECK(px.pol_sum == 0);
    CHECK(px.count == 2);
    CHECK(m.total_events() == 2);
    CHECK_FALSE(m.at(0, 0).last_time().has_value());
}

TEST_CASE("accumulate of an empty window is all-empty") {
    const auto m = accumulate({}, {16, 8}, {10000, 0}, 3);
    CHECK(m.window_start() == 30000);
    CHECK(m.window_end() == 40000);
    for (const auto& px : m.pixels()) {
        CHECK(px.count == 0);
        CHECK_FALSE(px.last_time().has_value());
        CHECK_FALSE(px.last_polarity().has_value());
    }
}

TEST_CASE("accumulate rejects events outside its window") {
    const std::vector<Event> ev{{10000, 0, 0, 1}};
    try {
        accumulate(ev, {4, 4}, {10000, 0}, 0);
        FAIL("expected EventOutsideWindow");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::event_outside_window);
    }
}

TEST_CASE("accumulate equals brute-force recomputation on random windows") {
    std::mt19937_64 rng(1234);
    for (int trial = 0; trial < 10; ++trial) {
        const auto s = testing::random_stream(rng, {64, 64}, 1000, 20000, 10000);
        const auto m = accumulate(s.events, s.geometry, {10000, 0}, 2);
        check_matches_oracle(m, s.events);
        for (const auto& px : m.pixels()) {
            CHECK(std::abs(px.pol_sum) <= static_cast<std::int64_t>(px.count));
            CHECK(px.has_event() == px.last_time().has_value());
            CHECK(px.has_event() == px.last_polarity().has_value());
        }
    }
}

TEST_CASE("stream_windows emits empty gap windows") {
    EventStream s{{8, 8}, 0, {{500, 1, 1, 1}, {25000, 2, 2, -1}}};
    const auto maps = stream_windows(s, {10000, 0});
    REQUIRE(maps.size() == 3);
    CHECK(maps[0].ordinal() == 0);
    CHECK(maps[1].ordinal() == 1);
    CHECK(maps[2].ordinal() == 2);
    CHECK(maps[0].total_events() == 1);
    CHECK(maps[1].total_events() == 0);
    CHECK(maps[2].total_events() == 1);

    EventStream one{{8, 8}, 0, {{10, 0, 0, 1}, {20, 0, 0, 1}, {9999, 7, 7, -1}}};
    CHECK(stream_windows(one, {10000, 0}).size() == 1);
    CHECK(stream_windows(EventStream{{8, 8}, 0, {}}, {10000, 0}).empty());
}

TEST_CASE("streaming equals batch accumulation per window") {
    std::mt19937_64 rng(99);
    for (std::uint64_t tau : {1000u, 3333u, 10000u}) {
        const auto s = testing::random_stream(rng, {32, 24}, 20000, 0, 200000);
        const WindowConfig cfg{tau, 0};
        const auto maps = stream_windows(s, cfg);
        std::map<std::uint64_t, std::vector<Event>> groups;
        for (const auto& e : s.events) groups[window_index(e.t, cfg)].push_back(e);
        std::uint64_t total = 0;
        REQUIRE(maps.front().ordinal() == groups.begin()->first);
        for (const auto& m : maps) {
            CHECK(m == accumulate(groups[m.ordinal()], s.geometry, cfg, m.ordinal()));
            for (const auto& px : m.pixels()) total += px.count;
        }
        CHECK(total == s.events.size());
    }
}

TEST_CASE("WindowStreamer reuses one geometry-sized map") {
    const SensorGeometry g{40, 30};
    const PixelStateMap* seen = nullptr;
    bool same_buffer = true;
    WindowStreamer streamer(g, {1000, 0}, [&](const PixelStateMap& m) {
        if (seen && seen != &m) same_buffer = false;
        seen = &m;
    });
    const auto bytes = streamer.state_bytes();
    CHECK(bytes == g.pixel_count() * sizeof(PixelState));
    std::mt19937_64 rng(5);
    const auto s = testing::random_stream(rng, g, 50000, 0, 100000);
    streamer.push(s.events);
    streamer.finish();
    CHECK(same_buffer);
    CHECK(streamer.state_bytes() == bytes);
    CHECK(streamer.events_seen() == s.events.size());
    CHECK(streamer.windows_emitted() == window_index(s.events.back().t, {1000, 0}) - window_index(s.events.front().t, {1000, 0}) + 1);
}

TEST_CASE("WindowStreamer rejects events from closed windows and invalid events") {
    WindowStreamer streamer({4, 4}, {100, 0}, [](const PixelStateMap&) {});
    streamer.push(Event{250, 0, 0, 1});
    try {
        streamer.push(Event{150, 0, 0, 1});
        FAIL("expected EventOutsideWindow");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::event_outside_window);
    }
    CHECK_THROWS_AS(streamer.push(Event{260, 4, 0, 1}), Error);
    CHECK_THROWS_AS(streamer.push(Event{260, 0, 0, 0}), Error);
    // Earlier timestamps inside the open window are still accepted.
    CHECK_NOTHROW(streamer.push(Event{240, 1, 1, -1}));
}

TEST_CASE("tau must be positive") {
    CHECK_THROWS_AS(require_valid(WindowConfig{0, 0}), Error);
    CHECK_THROWS_AS(WindowStreamer({4, 4}, {0, 0}, [](const PixelStateMap&) {}), Error);
}
