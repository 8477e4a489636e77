#include "evframes/event.hpp"

#include <algorithm>
#include <string>

#include "evframes/error.hpp"

namespace evframes {

void require_valid(SensorGeometry g) {
    if (g.width < 1 || g.height < 1) {
        throw Error(ErrorKind::invalid_geometry,
                    "geometry " + std::to_string(g.width) + "x" + std::to_string(g.height) + " is empty");
    }
}

Event validate_event(const Event& e, SensorGeometry g) {
    if (!is_legal_polarity(e.p)) {
        throw Error(ErrorKind::illegal_polarity, "polarity " + std::to_string(int{e.p}) + " at t=" + std::to_string(e.t));
    }
    if (!g.contains(e.x, e.y)) {
        throw Error(ErrorKind::out_of_bounds, "(" + std::to_string(e.x) + "," + std::to_string(e.y) + ") outside " +
                                                  std::to_string(g.width) + "x" + std::to_string(g.height));
    }
    return e;
}

NormalizedStream normalize_stream(EventStream s) {
    NormalizedStream out;
    std::uint64_t running_max = 0;
    bool first = true;
    for (const auto& e : s.events) {
        if (!first && e.t < running_max) {
            ++out.reordered;
        }
        running_max = first ? e.t : std::max(running_max, e.t);
        first = false;
    }
    if (out.reordered > 0) {
        std::stable_sort(s.events.begin(), s.events.end(),
                         [](const Event& a, const Event& b) { return a.t < b.t; });
    }
    out.stream = std::move(s);
    return out;
}

}  // namespace evframes
