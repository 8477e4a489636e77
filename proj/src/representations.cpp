#include "evframes/representations.hpp"

#include <algorithm>
#include <sstream>

#include "evframes/error.hpp"

namespace evframes {

std::string_view to_string(RepKind kind) {
    switch (kind) {
        case RepKind::event_frame: return "frame";
        case RepKind::frequency: return "freq";
        case RepKind::decay: return "decay";
        case RepKind::fusion: return "fusion";
        case RepKind::reconstruction: return "recon";
    }
    return "unknown";
}

RepKind parse_rep_kind(std::string_view name) {
    for (auto k : {RepKind::event_frame, RepKind::frequency, RepKind::decay, RepKind::fusion, RepKind::reconstruction}) {
        if (name == to_string(k)) {
            return k;
        }
    }
    throw Error(ErrorKind::invalid_config, "unknown representation '" + std::string(name) + "'");
}

FusionOrder parse_fusion_order(std::string_view text) {
    FusionOrder order{};
    std::size_t n = 0;
    std::istringstream in{std::string(text)};
    std::string item;
    while (std::getline(in, item, ',')) {
        if (n == 3) {
            throw Error(ErrorKind::invalid_config, "fusion order takes exactly three channels");
        }
        order[n++] = parse_rep_kind(item);
    }
    auto sorted = order;
    std::sort(sorted.begin(), sorted.end());
    if (n != 3 || sorted != FusionOrder{RepKind::event_frame, RepKind::frequency, RepKind::decay}) {
        throw Error(ErrorKind::invalid_config, "fusion order must be a permutation of frame,freq,decay");
    }
    return order;
}

namespace {

template <class F>
Channel make_channel(const PixelStateMap& m, ChannelRange range, F&& value) {
    Channel c{m.geometry(), range, {}};
    const auto px = m.pixels();
    c.values.resize(px.size());
    std::transform(px.begin(), px.end(), c.values.begin(), value);
    return c;
}

template <class Q>
Image quantize(const Channel& c, double lo, double hi, Q&& q) {
    Image img(c.geometry.width, c.geometry.height, 1);
    for (std::size_t i = 0; i < c.values.size(); ++i) {
        const double v = c.values[i];
        if (!std::isfinite(v) || v < lo || v > hi) {
            throw Error(ErrorKind::range_violation, "channel value " + std::to_string(v) + " outside [" +
                                                        std::to_string(lo) + "," + std::to_string(hi) + "]");
        }
        img.data[i] = q(v);
    }
    return img;
}

// Byte value of one single-channel representation at one pixel.
std::uint8_t plane_byte(const PixelState& px, RepKind kind, std::uint64_t t_ref, std::uint64_t tau,
                        FrequencyMode mode) {
    switch (kind) {
        case RepKind::event_frame: return quantize_signed_value(event_frame_value(px));
        case RepKind::frequency: return quantize_byte_value(frequency_value(px, mode));
        case RepKind::decay: return quantize_signed_value(decay_value(px, t_ref, tau));
        default: break;
    }
    throw Error(ErrorKind::invalid_config, "not a single-channel representation: " + std::string(to_string(kind)));
}

}  // namespace

Channel event_frame(const PixelStateMap& m) {
    return make_channel(m, ChannelRange::signed_unit, [](const PixelState& px) { return event_frame_value(px); });
}

Channel decaying_time_surface(const PixelStateMap& m) {
    const auto t_ref = m.window_end();
    const auto tau = m.tau();
    return make_channel(m, ChannelRange::signed_unit,
                        [=](const PixelState& px) { return decay_value(px, t_ref, tau); });
}

Channel event_frequency(const PixelStateMap& m, FrequencyMode mode) {
    return make_channel(m, ChannelRange::byte_range, [=](const PixelState& px) { return frequency_value(px, mode); });
}

Image quantize_signed(const Channel& c) { return quantize(c, -1.0, 1.0, quantize_signed_value); }

Image quantize_byte(const Channel& c) { return quantize(c, 0.0, 255.0, quantize_byte_value); }

Image FusedFrame::interleaved() const {
    Image img(geometry.width, geometry.height, 3);
    const std::size_t n = geometry.pixel_count();
    for (std::size_t i = 0; i < n; ++i) {
        img.data[3 * i + 0] = planes[0][i];
        img.data[3 * i + 1] = planes[1][i];
        img.data[3 * i + 2] = planes[2][i];
    }
    return img;
}

FusedFrame fuse(const PixelStateMap& m, const RenderOptions& opts) {
    FusedFrame f{m.geometry(), opts.order, {}};
    const auto px = m.pixels();
    const auto t_ref = m.window_end();
    const auto tau = m.tau();
    for (std::size_t c = 0; c < 3; ++c) {
        auto& plane = f.planes[c];
        plane.resize(px.size());
        const auto empty = plane_byte(PixelState{}, opts.order[c], t_ref, tau, opts.frequency_mode);
        for (std::size_t i = 0; i < px.size(); ++i) {
            plane[i] = px[i].has_event() ? plane_byte(px[i], opts.order[c], t_ref, tau, opts.frequency_mode) : empty;
        }
    }
    return f;
}

Image render(const PixelStateMap& m, RepKind kind, const RenderOptions& opts) {
    if (kind == RepKind::fusion) {
        return fuse(m, opts).interleaved();
    }
    Image img(m.geometry().width, m.geometry().height, 1);
    const auto px = m.pixels();
    const auto empty = plane_byte(PixelState{}, kind, m.window_end(), m.tau(), opts.frequency_mode);
    for (std::size_t i = 0; i < px.size(); ++i) {
        img.data[i] = px[i].has_event() ? plane_byte(px[i], kind, m.window_end(), m.tau(), opts.frequency_mode) : empty;
    }
    return img;
}

Channel raw_channel(const PixelStateMap& m, RepKind kind, const RenderOptions& opts) {
    switch (kind) {
        case RepKind::event_frame: return event_frame(m);
        case RepKind::frequency: return event_frequency(m, opts.frequency_mode);
        case RepKind::decay: return decaying_time_surface(m);
        default: break;
    }
    throw Error(ErrorKind::invalid_config, "no raw plane for representation " + std::string(to_string(kind)));
}

}  // namespace evframes
