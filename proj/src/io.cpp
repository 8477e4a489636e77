#include "evframes/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <sstream>

#include "evframes/error.hpp"

namespace evframes {

namespace {

constexpr std::array<char, 4> evt1_magic{'E', 'V', 'T', '1'};

template <class T>
void put_le(char* dst, T value) {
    using U = std::make_unsigned_t<T>;
    auto u = static_cast<U>(value);
    for (std::size_t i = 0; i < sizeof(T); ++i) {
        dst[i] = static_cast<char>(u & 0xFF);
        u = static_cast<U>(u >> 8);
    }
}

template <class T>
T get_le(const char* src) {
    using U = std::make_unsigned_t<T>;
    U u = 0;
    for (std::size_t i = sizeof(T); i-- > 0;) {
        u = static_cast<U>((u << 8) | static_cast<unsigned char>(src[i]));
    }
    return static_cast<T>(u);
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    for (;;) {
        const auto comma = line.find(',', start);
        fields.push_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return fields;
}

[[noreturn]] void parse_fail(std::size_t line_no, const std::string& what) {
    throw Error(ErrorKind::parse_error, "line " + std::to_string(line_no) + ": " + what);
}

template <class T>
T parse_number(std::string_view field, std::size_t line_no, const char* name) {
    T value{};
    const auto* end = field.data() + field.size();
    auto [ptr, ec] = std::from_chars(field.data(), end, value);
    if (ec != std::errc{} || ptr != end || field.empty()) {
        parse_fail(line_no, std::string("bad ") + name + " '" + std::string(field) + "'");
    }
    return value;
}

// Calls `row(fields, line_no)` for each non-empty data line after checking the header.
template <class F>
void for_each_csv_row(std::istream& in, std::string_view header, std::size_t columns, F&& row) {
    std::string line;
    std::size_t line_no = 0;
    bool seen_header = false;
    while (std::getline(in, line)) {
        ++line_no;
        const auto text = trim(line);
        if (text.empty()) continue;
        if (!seen_header) {
            if (text != header) {
                parse_fail(line_no, "expected header '" + std::string(header) + "'");
            }
            seen_header = true;
            continue;
        }
        const auto fields = split_fields(text);
        if (fields.size() != columns) {
            parse_fail(line_no, "expected " + std::to_string(columns) + " fields, got " + std::to_string(fields.size()));
        }
        row(fields, line_no);
    }
    if (!seen_header) {
        parse_fail(line_no, "missing header '" + std::string(header) + "'");
    }
}

std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

void check_geometry_fits_evt1(SensorGeometry g) {
    require_valid(g);
    if (g.width > 0xFFFF || g.height > 0xFFFF) {
        throw Error(ErrorKind::invalid_geometry, "EVT1 geometry is limited to 16-bit width/height");
    }
}

void encode_record(char* dst, const Event& e) {
    put_le<std::uint64_t>(dst, e.t);
    put_le<std::uint16_t>(dst + 8, e.x);
    put_le<std::uint16_t>(dst + 10, e.y);
    put_le<std::int8_t>(dst + 12, e.p);
    dst[13] = dst[14] = dst[15] = 0;
}

}  // namespace

// --- CSV events -------------------------------------------------------------

EventStream read_events_csv(std::istream& in, const CsvReadOptions& opts) {
    EventStream s;
    std::uint32_t max_x = 0;
    std::uint32_t max_y = 0;
    for_each_csv_row(in, "t_us,x,y,p", 4, [&](const std::vector<std::string_view>& f, std::size_t line_no) {
        Event e;
        e.t = parse_number<std::uint64_t>(f[0], line_no, "t_us");
        e.x = parse_number<std::uint16_t>(f[1], line_no, "x");
        e.y = parse_number<std::uint16_t>(f[2], line_no, "y");
        const int p = parse_number<int>(f[3], line_no, "p");
        if (p == 0 && opts.zero_is_negative) {
            e.p = -1;
        } else if (p == 1 || p == -1) {
            e.p = static_cast<std::int8_t>(p);
        } else {
            throw Error(ErrorKind::illegal_polarity, "line " + std::to_string(line_no) + ": polarity " + std::to_string(p));
        }
        max_x = std::max<std::uint32_t>(max_x, e.x);
        max_y = std::max<std::uint32_t>(max_y, e.y);
        s.events.push_back(e);
    });
    s.geometry = opts.geometry ? *opts.geometry : SensorGeometry{max_x + 1, max_y + 1};
    return s;
}

EventStream read_events_csv(std::string_view text, const CsvReadOptions& opts) {
    std::istringstream in{std::string(text)};
    return read_events_csv(in, opts);
}

void write_events_csv(const EventStream& s, std::ostream& out) {
    out << "t_us,x,y,p\n";
    std::string line;
    for (const auto& e : s.events) {
        line.clear();
        line += std::to_string(e.t);
        line += ',';
        line += std::to_string(e.x);
        line += ',';
        line += std::to_string(e.y);
        line += ',';
        line += std::to_string(int{e.p});
        line += '\n';
        out << line;
    }
}

std::string write_events_csv(const EventStream& s) {
    std::ostringstream out;
    write_events_csv(s, out);
    return out.str();
}

// --- EVT1 -------------------------------------------------------------------

Evt1Reader::Evt1Reader(std::istream& in) : in_(in) {
    char header[evt1_header_size];
    in_.read(header, evt1_header_size);
    const auto got = static_cast<std::size_t>(in_.gcount());
    if (got >= 4 && std::memcmp(header, evt1_magic.data(), 4) != 0) {
        throw Error(ErrorKind::bad_magic, "missing EVT1 magic");
    }
    if (got < evt1_header_size) {
        throw Error(ErrorKind::truncated_file, "EVT1 header is " + std::to_string(got) + " bytes, need 16");
    }
    geometry_ = {get_le<std::uint16_t>(header + 4), get_le<std::uint16_t>(header + 6)};
    count_ = get_le<std::uint64_t>(header + 8);
    buffer_.resize(buffer_records * evt1_record_size);
}

std::size_t Evt1Reader::fill() {
    const std::uint64_t fetched = read_ + (buffered_ - cursor_) / evt1_record_size;
    const std::uint64_t remaining = count_ - fetched;
    if (remaining == 0) {
        if (in_.peek() != std::char_traits<char>::eof()) {
            throw Error(ErrorKind::count_mismatch,
                        "data continues after the declared " + std::to_string(count_) + " records");
        }
        return 0;
    }
    const auto want = static_cast<std::size_t>(std::min<std::uint64_t>(remaining, buffer_records)) * evt1_record_size;
    in_.read(buffer_.data(), static_cast<std::streamsize>(want));
    const auto got = static_cast<std::size_t>(in_.gcount());
    if (got != want) {
        throw Error(ErrorKind::truncated_file, "file ends after " + std::to_string(read_ + got / evt1_record_size) +
                                                   " of " + std::to_string(count_) + " records");
    }
    buffered_ = got;
    cursor_ = 0;
    return got;
}

std::size_t Evt1Reader::read(std::span<Event> out) {
    std::size_t n = 0;
    while (n < out.size()) {
        if (cursor_ == buffered_ && fill() == 0) {
            break;
        }
        const char* rec = buffer_.data() + cursor_;
        Event& e = out[n];
        e.t = get_le<std::uint64_t>(rec);
        e.x = get_le<std::uint16_t>(rec + 8);
        e.y = get_le<std::uint16_t>(rec + 10);
        e.p = get_le<std::int8_t>(rec + 12);
        if (!is_legal_polarity(e.p)) {
            throw Error(ErrorKind::illegal_polarity, "record " + std::to_string(read_) + ": polarity " + std::to_string(int{e.p}));
        }
        cursor_ += evt1_record_size;
        ++read_;
        ++n;
    }
    return n;
}

bool Evt1Reader::next(Event& e) { return read(std::span<Event>(&e, 1)) == 1; }

Evt1Writer::Evt1Writer(std::ostream& out, SensorGeometry g) : out_(out) {
    check_geometry_fits_evt1(g);
    header_pos_ = out_.tellp();
    char header[evt1_header_size];
    std::memcpy(header, evt1_magic.data(), 4);
    put_le<std::uint16_t>(header + 4, static_cast<std::uint16_t>(g.width));
    put_le<std::uint16_t>(header + 6, static_cast<std::uint16_t>(g.height));
    put_le<std::uint64_t>(header + 8, 0);
    out_.write(header, evt1_header_size);
}

void Evt1Writer::write(const Event& e) {
    if (!is_legal_polarity(e.p)) {
        throw Error(ErrorKind::illegal_polarity, "cannot write polarity " + std::to_string(int{e.p}));
    }
    char rec[evt1_record_size];
    encode_record(rec, e);
    out_.write(rec, evt1_record_size);
    ++count_;
}

void Evt1Writer::finish() {
    if (finished_) return;
    finished_ = true;
    const auto end = out_.tellp();
    char count[8];
    put_le<std::uint64_t>(count, count_);
    out_.seekp(header_pos_ + std::streamoff{8});
    out_.write(count, 8);
    out_.seekp(end);
    out_.flush();
    if (!out_) {
        throw Error(ErrorKind::io_error, "failed writing EVT1 stream");
    }
}

EventStream read_events_binary(std::istream& in) {
    Evt1Reader reader(in);
    EventStream s;
    s.geometry = reader.geometry();
    s.events.resize(static_cast<std::size_t>(std::min<std::uint64_t>(reader.declared_count(), 1u << 20)));
    std::size_t filled = 0;
    for (;;) {
        if (filled == s.events.size()) {
            s.events.resize(std::max<std::size_t>(16, s.events.size() * 2));
        }
        const auto n = reader.read(std::span<Event>(s.events).subspan(filled));
        if (n == 0) break;
        filled += n;
    }
    s.events.resize(filled);
    return s;
}

EventStream read_events_binary(std::string_view bytes) {
    std::istringstream in{std::string(bytes)};
    return read_events_binary(in);
}

void write_events_binary(const EventStream& s, std::ostream& out) {
    check_geometry_fits_evt1(s.geometry);
    char header[evt1_header_size];
    std::memcpy(header, evt1_magic.data(), 4);
    put_le<std::uint16_t>(header + 4, static_cast<std::uint16_t>(s.geometry.width));
    put_le<std::uint16_t>(header + 6, static_cast<std::uint16_t>(s.geometry.height));
    put_le<std::uint64_t>(header + 8, s.events.size());
    out.write(header, evt1_header_size);
    char rec[evt1_record_size];
    for (const auto& e : s.events) {
        if (!is_legal_polarity(e.p)) {
            throw Error(ErrorKind::illegal_polarity, "cannot write polarity " + std::to_string(int{e.p}));
        }
        encode_record(rec, e);
        out.write(rec, evt1_record_size);
    }
}

std::string write_events_binary(const EventStream& s) {
    std::ostringstream out;
    write_events_binary(s, out);
    return out.str();
}

EventFileFormat detect_event_format(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorKind::io_error, "cannot open " + path.string());
    }
    char magic[4] = {};
    in.read(magic, 4);
    return in.gcount() == 4 && std::memcmp(magic, evt1_magic.data(), 4) == 0 ? EventFileFormat::evt1
                                                                              : EventFileFormat::csv;
}

EventFileFormat format_for_extension(const std::filesystem::path& path) {
    const auto ext = path.extension().string();
    if (ext == ".csv") return EventFileFormat::csv;
    if (ext == ".evt1" || ext == ".bin") return EventFileFormat::evt1;
    throw Error(ErrorKind::invalid_config, "cannot tell event format from extension of " + path.string());
}

EventStream load_events(const std::filesystem::path& path, const CsvReadOptions& opts) {
    const auto fmt = detect_event_format(path);
    std::ifstream in(path, std::ios::binary);
    if (fmt == EventFileFormat::evt1) {
        return read_events_binary(in);
    }
    return read_events_csv(in, opts);
}

void save_events(const EventStream& s, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error(ErrorKind::io_error, "cannot create " + path.string());
    }
    if (format_for_extension(path) == EventFileFormat::evt1) {
        write_events_binary(s, out);
    } else {
        write_events_csv(s, out);
    }
    if (!out.flush()) {
        throw Error(ErrorKind::io_error, "failed writing " + path.string());
    }
}

// --- annotations ------------------------------------------------------------

std::vector<AnnotationRecord> read_annotations_csv(std::istream& in) {
    std::vector<AnnotationRecord> boxes;
    for_each_csv_row(in, "t_us,x,y,w,h,class_id,track_id,confidence", 8,
                     [&](const std::vector<std::string_view>& f, std::size_t line_no) {
                         AnnotationRecord r;
                         r.t = parse_number<std::uint64_t>(f[0], line_no, "t_us");
                         r.x = parse_number<double>(f[1], line_no, "x");
                         r.y = parse_number<double>(f[2], line_no, "y");
                         r.w = parse_number<double>(f[3], line_no, "w");
                         r.h = parse_number<double>(f[4], line_no, "h");
                         r.class_id = parse_number<int>(f[5], line_no, "class_id");
                         r.track_id = parse_number<std::int64_t>(f[6], line_no, "track_id");
                         r.confidence = parse_number<double>(f[7], line_no, "confidence");
                         if (!(r.w >= 1.0) || !(r.h >= 1.0)) {
                             parse_fail(line_no, "box size must be at least 1x1");
                         }
                         if (!(r.confidence >= 0.0 && r.confidence <= 1.0)) {
                             parse_fail(line_no, "confidence outside [0,1]");
                         }
                         if (!std::isfinite(r.x) || !std::isfinite(r.y) || !std::isfinite(r.w) || !std::isfinite(r.h)) {
                             parse_fail(line_no, "non-finite box");
                         }
                         boxes.push_back(r);
                     });
    return boxes;
}

std::vector<AnnotationRecord> read_annotations_csv(std::string_view text) {
    std::istringstream in{std::string(text)};
    return read_annotations_csv(in);
}

std::vector<AnnotationRecord> load_annotations(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorKind::io_error, "cannot open " + path.string());
    }
    return read_annotations_csv(in);
}

void write_annotations_csv(std::span<const AnnotationRecord> boxes, std::ostream& out) {
    out << "t_us,x,y,w,h,class_id,track_id,confidence\n";
    for (const auto& b : boxes) {
        out << b.t << ',' << format_double(b.x) << ',' << format_double(b.y) << ',' << format_double(b.w) << ','
            << format_double(b.h) << ',' << b.class_id << ',' << b.track_id << ',' << format_double(b.confidence)
            << '\n';
    }
}

ClippedBox clip_box(const AnnotationRecord& box, SensorGeometry g) {
    ClippedBox c{std::max(0.0, box.x), std::max(0.0, box.y), std::min<double>(g.width, box.x + box.w),
                 std::min<double>(g.height, box.y + box.h)};
    if (!(c.width() > 0.0) || !(c.height() > 0.0)) {
        throw Error(ErrorKind::degenerate_box, "box at (" + format_double(box.x) + "," + format_double(box.y) +
                                                   ") size " + format_double(box.w) + "x" + format_double(box.h) +
                                                   " has no area on the sensor plane");
    }
    return c;
}

PixelRect pixel_rect(const AnnotationRecord& box, SensorGeometry g) {
    const auto c = clip_box(box, g);
    return {static_cast<std::uint32_t>(std::floor(c.x0)), static_cast<std::uint32_t>(std::floor(c.y0)),
            static_cast<std::uint32_t>(std::ceil(c.x1)), static_cast<std::uint32_t>(std::ceil(c.y1))};
}

YoloBox normalize_box(const AnnotationRecord& box, SensorGeometry g) {
    require_valid(g);
    const auto c = clip_box(box, g);
    const double W = g.width;
    const double H = g.height;
    return {box.class_id, (c.x0 + c.x1) / 2.0 / W, (c.y0 + c.y1) / 2.0 / H, c.width() / W, c.height() / H};
}

AnnotationRecord denormalize_box(const YoloBox& yb, SensorGeometry g) {
    AnnotationRecord r;
    r.class_id = yb.class_id;
    r.w = yb.w * g.width;
    r.h = yb.h * g.height;
    r.x = yb.cx * g.width - r.w / 2.0;
    r.y = yb.cy * g.height - r.h / 2.0;
    return r;
}

std::string write_yolo_labels(std::span<const AnnotationRecord> boxes, SensorGeometry g) {
    std::string out;
    char line[160];
    for (const auto& b : boxes) {
        const auto y = normalize_box(b, g);
        const int n = std::snprintf(line, sizeof(line), "%d %.6f %.6f %.6f %.6f\n", y.class_id, y.cx, y.cy, y.w, y.h);
        out.append(line, static_cast<std::size_t>(n));
    }
    return out;
}

void export_raw_channel(const Channel& c, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    char buf[8];
    for (double v : c.values) {
        std::uint64_t bits;
        std::memcpy(&bits, &v, 8);
        put_le<std::uint64_t>(buf, bits);
        out.write(buf, 8);
    }
    if (!out.flush()) {
        throw Error(ErrorKind::io_error, "failed writing " + path.string());
    }
}

}  // namespace evframes
