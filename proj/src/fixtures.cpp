#include "dfdm/fixtures.hpp"

#include <algorithm>

#include "dfdm/image.hpp"
#include "dfdm/label.hpp"

namespace dfdm {

namespace fs = std::filesystem;

namespace {

Tensor<float> noisy_image(std::size_t size, double mean, double noise, Rng& rng) {
    Tensor<float> img({size, size, 3});
    for (std::size_t i = 0; i < img.size(); ++i) {
        img[i] = static_cast<float>(std::clamp(mean + rng.uniform(-noise, noise), 0.0, 1.0));
    }
    return img;
}

}  // namespace

void generate_fixture(const fs::path& root, const FixtureSpec& spec) {
    const Rng base(spec.seed);
    const std::pair<const char*, std::size_t> splits[] = {
        {"train", spec.train_per_class},
        {"valid", spec.valid_per_class},
        {"test", spec.test_per_class},
    };
    for (const auto& [split, count] : splits) {
        for (const char* cls : {"real", "fake"}) {
            const fs::path dir = root / split / cls;
            fs::create_directories(dir);
            const bool bright = std::string(cls) == "real";
            const double mean = bright ? spec.bright_mean : spec.dark_mean;
            for (std::size_t i = 0; i < count; ++i) {
                Rng rng = base.split("fixture").split(split).split(cls).split(i);
                char name[32];
                std::snprintf(name, sizeof(name), "img_%04zu.ppm", i);
                write_ppm(dir / name, noisy_image(spec.size, mean, spec.noise, rng));
            }
        }
    }
}

}  // namespace dfdm
