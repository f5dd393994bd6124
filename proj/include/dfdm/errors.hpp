#pragma once

#include <stdexcept>
#include <string>

namespace dfdm {

// Error families map onto the CLI exit-code vocabulary:
// 2 config, 3 data, 4 numeric, 5 checkpoint.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class CheckpointFault {
    truncated,
    bad_magic,
    bad_version,
    bad_crc,
    bad_header,
    bad_length,
};

struct CheckpointError : std::runtime_error {
    CheckpointFault fault;
    CheckpointError(CheckpointFault f, const std::string& msg)
        : std::runtime_error(msg), fault(f) {}
};

// Shape and precondition violations inside the numeric core.
struct ShapeError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

}  // namespace dfdm
