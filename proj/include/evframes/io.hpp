#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "evframes/event.hpp"
#include "evframes/representations.hpp"

namespace evframes {

// ---------------------------------------------------------------------------
// Event CSV: header `t_us,x,y,p`, one event per line.

struct CsvReadOptions {
    /// Geometry to attach; inferred as max coordinate + 1 when absent.
    std::optional<SensorGeometry> geometry;
    /// Accept p = 0 as the negative polarity (vendor dumps with {0,1}).
    bool zero_is_negative = false;
};

EventStream read_events_csv(std::istream& in, const CsvReadOptions& opts = {});
EventStream read_events_csv(std::string_view text, const CsvReadOptions& opts = {});
void write_events_csv(const EventStream& s, std::ostream& out);
std::string write_events_csv(const EventStream& s);

// ---------------------------------------------------------------------------
// EVT1 binary container, little-endian:
//   "EVT1" | u16 width | u16 height | u64 count | count x { u64 t | u16 x | u16 y | i8 p | 3 zero bytes }

inline constexpr std::size_t evt1_header_size = 16;
inline constexpr std::size_t evt1_record_size = 16;

/// Streaming reader; memory use is one fixed record buffer regardless of file size.
class Evt1Reader {
public:
    static constexpr std::size_t buffer_records = 4096;

    explicit Evt1Reader(std::istream& in);

    SensorGeometry geometry() const { return geometry_; }
    std::uint64_t declared_count() const { return count_; }
    std::uint64_t records_read() const { return read_; }

    /// Fills `out` with up to out.size() events; returns how many. 0 means end of data.
    /// Throws TruncatedFile, CountMismatch or IllegalPolarity.
    std::size_t read(std::span<Event> out);
    bool next(Event& e);

    std::size_t buffer_bytes() const { return buffer_.size(); }

private:
    std::size_t fill();

    std::istream& in_;
    SensorGeometry geometry_{};
    std::uint64_t count_ = 0;
    std::uint64_t read_ = 0;
    std::vector<char> buffer_;
    std::size_t buffered_ = 0;
    std::size_t cursor_ = 0;
};

/// Writes the header up front and patches the record count on finish(). Needs a seekable stream.
class Evt1Writer {
public:
    Evt1Writer(std::ostream& out, SensorGeometry g);
    void write(const Event& e);
    void finish();
    std::uint64_t count() const { return count_; }

private:
    std::ostream& out_;
    std::streampos header_pos_;
    std::uint64_t count_ = 0;
    bool finished_ = false;
};

EventStream read_events_binary(std::istream& in);
EventStream read_events_binary(std::string_view bytes);
void write_events_binary(const EventStream& s, std::ostream& out);
std::string write_events_binary(const EventStream& s);

enum class EventFileFormat { csv, evt1 };

/// Sniffs the EVT1 magic; anything else is treated as CSV.
EventFileFormat detect_event_format(const std::filesystem::path& path);
/// Picks the format from the extension (.csv or .evt1/.bin).
EventFileFormat format_for_extension(const std::filesystem::path& path);

EventStream load_events(const std::filesystem::path& path, const CsvReadOptions& opts = {});
void save_events(const EventStream& s, const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Annotations: header `t_us,x,y,w,h,class_id,track_id,confidence`.

struct AnnotationRecord {
    std::uint64_t t = 0;
    double x = 0;
    double y = 0;
    double w = 1;
    double h = 1;
    int class_id = 0;
    std::int64_t track_id = 0;
    double confidence = 1.0;

    friend bool operator==(const AnnotationRecord&, const AnnotationRecord&) = default;
};

std::vector<AnnotationRecord> read_annotations_csv(std::istream& in);
std::vector<AnnotationRecord> read_annotations_csv(std::string_view text);
std::vector<AnnotationRecord> load_annotations(const std::filesystem::path& path);
void write_annotations_csv(std::span<const AnnotationRecord> boxes, std::ostream& out);

/// Box clipped to the sensor plane, in pixel units.
struct ClippedBox {
    double x0 = 0;
    double y0 = 0;
    double x1 = 0;
    double y1 = 0;

    double width() const { return x1 - x0; }
    double height() const { return y1 - y0; }
};

/// Throws DegenerateBox if nothing of the box remains on the plane.
ClippedBox clip_box(const AnnotationRecord& box, SensorGeometry g);

/// Integer pixel span [x0, x1) x [y0, y1) covered by a clipped box.
struct PixelRect {
    std::uint32_t x0 = 0;
    std::uint32_t y0 = 0;
    std::uint32_t x1 = 0;
    std::uint32_t y1 = 0;

    std::uint32_t width() const { return x1 - x0; }
    std::uint32_t height() const { return y1 - y0; }
    std::size_t area() const { return std::size_t{width()} * height(); }
};

PixelRect pixel_rect(const AnnotationRecord& box, SensorGeometry g);

/// YOLO box: class, center and size normalized to [0,1].
struct YoloBox {
    int class_id = 0;
    double cx = 0;
    double cy = 0;
    double w = 0;
    double h = 0;
};

YoloBox normalize_box(const AnnotationRecord& box, SensorGeometry g);
AnnotationRecord denormalize_box(const YoloBox& yb, SensorGeometry g);

/// One `class cx cy w h` line per box, six decimals. Throws DegenerateBox.
std::string write_yolo_labels(std::span<const AnnotationRecord> boxes, SensorGeometry g);

// ---------------------------------------------------------------------------
// Raw channel dump: little-endian IEEE-754 doubles, row-major, no header.

void export_raw_channel(const Channel& c, const std::filesystem::path& path);

}  // namespace evframes
