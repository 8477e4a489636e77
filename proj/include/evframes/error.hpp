#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace evframes {

enum class ErrorKind {
    out_of_bounds,
    illegal_polarity,
    time_before_origin,
    event_outside_window,
    range_violation,
    parse_error,
    bad_magic,
    truncated_file,
    count_mismatch,
    degenerate_box,
    invalid_geometry,
    io_error,
    unknown_reference,
    invalid_config,
};

std::string_view to_string(ErrorKind kind);

/// Every failure the library reports carries exactly one ErrorKind.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message);

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

}  // namespace evframes
