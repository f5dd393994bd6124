#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

namespace dfdm {

/// Effective run configuration. Every field has a default; the post-default
/// values are echoed verbatim into every report so a published number can be
/// re-derived from its report alone.
struct RunConfig {
    std::string model = "cnn_sigmoid";
    std::size_t input_h = 64;
    std::size_t input_w = 64;
    int kernel = 3;
    int hidden = 128;
    double l2 = 0.01;
    double dropout = 0.2;
    double lr = 0.001;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::size_t epochs = 10;
    std::size_t batch = 64;
    std::uint64_t seed = 42;
    double flip_prob = 0.5;
    double shear_max = 0.2;
    double zoom_lo = 0.8;
    double zoom_hi = 1.2;
    bool augment = true;
    std::string data;
    std::string positive_class = "deepfake";
};

/// Applies one `key = value` assignment; unknown keys and unparsable values
/// raise ConfigError naming the key.
void apply_config_entry(RunConfig& cfg, const std::string& key, const std::string& value);

/// Flat `key = value` file, `#` comments and blank lines allowed.
void load_config_file(RunConfig& cfg, const std::filesystem::path& path);

void validate_config(const RunConfig& cfg);

nlohmann::ordered_json config_json(const RunConfig& cfg);

}  // namespace dfdm
