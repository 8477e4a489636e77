#include "evframes/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <future>
#include <vector>

namespace evframes {

std::string BenchReport::to_text() const {
    char buf[256];
    std::snprintf(buf, sizeof(buf), "events=%llu\nwall_us=%llu\nmeps=%.6f\nframes=%llu\nfps_equiv=%.3f\n",
                  static_cast<unsigned long long>(events), static_cast<unsigned long long>(wall_us), meps,
                  static_cast<unsigned long long>(frames), fps_equiv);
    return buf;
}

double meps(std::uint64_t events, double wall_us) {
    return static_cast<double>(events) / std::max(wall_us, 1.0);
}

BenchReport bench_throughput(SensorGeometry g, const EventSource& source, const BenchOptions& opts) {
    using clock = std::chrono::steady_clock;
    const unsigned jobs = std::max(1u, opts.jobs);

    std::uint64_t checksum = 0;
    std::vector<PixelStateMap> batch;
    auto flush_batch = [&] {
        std::vector<std::future<std::uint64_t>> work;
        work.reserve(batch.size());
        for (const auto& m : batch) {
            work.push_back(std::async(std::launch::async, [&m, &opts] {
                const auto f = fuse(m, opts.render);
                return std::uint64_t{f.planes[0][0]} + f.planes[1][0] + f.planes[2][0];
            }));
        }
        for (auto& w : work) checksum += w.get();
        batch.clear();
    };

    WindowStreamer streamer(g, opts.window, [&](const PixelStateMap& m) {
        if (jobs == 1) {
            const auto f = fuse(m, opts.render);
            checksum += f.planes[0][0] + f.planes[1][0] + f.planes[2][0];
            return;
        }
        batch.push_back(m);
        if (batch.size() == jobs) flush_batch();
    });

    std::vector<Event> buf(1 << 16);
    clock::duration busy{};
    for (;;) {
        const auto n = source(buf);
        if (n == 0) break;
        const auto start = clock::now();
        streamer.push(std::span<const Event>(buf.data(), n));
        busy += clock::now() - start;
    }
    const auto start = clock::now();
    streamer.finish();
    if (!batch.empty()) flush_batch();
    busy += clock::now() - start;

    // Keep the fused output observable so the work is not elided.
    static volatile std::uint64_t sink;
    sink = sink + checksum;

    BenchReport r;
    const double wall = std::chrono::duration<double, std::micro>(busy).count();
    r.events = streamer.events_seen();
    r.wall_us = static_cast<std::uint64_t>(wall);
    r.meps = meps(r.events, wall);
    r.frames = streamer.windows_emitted();
    r.fps_equiv = static_cast<double>(r.frames) / (std::max(wall, 1.0) / 1e6);
    // The batch holds up to `jobs` window copies next to the live accumulator.
    r.state_bytes = streamer.state_bytes() * (jobs == 1 ? 1 : jobs + 1);
    return r;
}

BenchReport bench_throughput(const EventStream& s, const BenchOptions& opts) {
    std::size_t pos = 0;
    return bench_throughput(
        s.geometry,
        [&](std::span<Event> out) {
            const auto n = std::min(out.size(), s.events.size() - pos);
            std::copy_n(s.events.begin() + static_cast<std::ptrdiff_t>(pos), n, out.begin());
            pos += n;
            return n;
        },
        opts);
}

}  // namespace evframes
