#pragma once

#include <string>
#include <string_view>

#include "dfdm/errors.hpp"

namespace dfdm {

enum class Label { real, deepfake };

inline const char* label_name(Label l) {
    return l == Label::real ? "real" : "deepfake";
}

inline Label parse_label(std::string_view s) {
    if (s == "real") return Label::real;
    if (s == "deepfake") return Label::deepfake;
    throw ConfigError("unknown label '" + std::string(s) + "' (expected real or deepfake)");
}

enum class Split { train, valid, test };

inline const char* split_name(Split s) {
    switch (s) {
        case Split::train: return "train";
        case Split::valid: return "valid";
        default: return "test";
    }
}

inline Split parse_split(std::string_view s) {
    if (s == "train") return Split::train;
    if (s == "valid") return Split::valid;
    if (s == "test") return Split::test;
    throw ConfigError("unknown split '" + std::string(s) + "' (expected train, valid or test)");
}

}  // namespace dfdm
