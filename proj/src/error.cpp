#include "evframes/error.hpp"

namespace evframes {

std::string_view to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::out_of_bounds: return "OutOfBounds";
        case ErrorKind::illegal_polarity: return "IllegalPolarity";
        case ErrorKind::time_before_origin: return "TimeBeforeOrigin";
        case ErrorKind::event_outside_window: return "EventOutsideWindow";
        case ErrorKind::range_violation: return "RangeViolation";
        case ErrorKind::parse_error: return "ParseError";
        case ErrorKind::bad_magic: return "BadMagic";
        case ErrorKind::truncated_file: return "TruncatedFile";
        case ErrorKind::count_mismatch: return "CountMismatch";
        case ErrorKind::degenerate_box: return "DegenerateBox";
        case ErrorKind::invalid_geometry: return "InvalidGeometry";
        case ErrorKind::io_error: return "IoError";
        case ErrorKind::unknown_reference: return "UnknownReference";
        case ErrorKind::invalid_config: return "InvalidConfig";
    }
    return "Unknown";
}

Error::Error(ErrorKind kind, const std::string& message)
    : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

}  // namespace evframes
