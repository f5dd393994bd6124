#pragma once

#include <filesystem>

#include "dfdm/rng.hpp"

namespace dfdm {

/// Synthetic separable dataset: "real" images are bright (pixels around
/// bright_mean), "deepfake" images dark, with independent uniform noise per
/// pixel. Written as PPM files under root/{train,valid,test}/{real,fake}/ so
/// the whole toolchain can be exercised without any external dataset.
struct FixtureSpec {
    std::size_t train_per_class = 16;
    std::size_t valid_per_class = 10;
    std::size_t test_per_class = 100;
    std::size_t size = 16;  // square images
    std::uint64_t seed = 7;
    double bright_mean = 0.75;
    double dark_mean = 0.25;
    double noise = 0.15;
};

void generate_fixture(const std::filesystem::path& root, const FixtureSpec& spec);

}  // namespace dfdm
