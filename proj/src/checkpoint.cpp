#include "dfdm/checkpoint.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <vector>

#include <json.hpp>

namespace dfdm {

static_assert(std::endian::native == std::endian::little,
              "checkpoint serialization assumes a little-endian host");

namespace {

constexpr char kMagic[4] = {'D', 'F', 'D', 'M'};

void append_u32(std::vector<std::uint8_t>& buf, std::uint32_t v) {
    const std::size_t at = buf.size();
    buf.resize(at + 4);
    std::memcpy(buf.data() + at, &v, 4);
}

std::uint32_t read_u32(const std::vector<std::uint8_t>& buf, std::size_t at) {
    std::uint32_t v;
    std::memcpy(&v, buf.data() + at, 4);
    return v;
}

std::string header_json(const Model<float>& m) {
    nlohmann::json h;  // alphabetical keys: canonical
    h["dropout"] = m.hyper.dropout;
    h["filters"] = m.hyper.filters;
    h["hidden"] = m.hyper.hidden;
    h["input"] = {m.in_h, m.in_w, m.in_c};
    h["kernel"] = m.hyper.kernel;
    h["kind"] = model_kind_name(m.kind);
    h["l2"] = m.hyper.l2;
    return h.dump();
}

}  // namespace

void save_checkpoint(const Model<float>& model, const std::filesystem::path& path) {
    std::vector<std::uint8_t> buf;
    buf.insert(buf.end(), kMagic, kMagic + 4);
    append_u32(buf, kCheckpointVersion);

    const std::string header = header_json(model);
    append_u32(buf, static_cast<std::uint32_t>(header.size()));
    buf.insert(buf.end(), header.begin(), header.end());

    for (const Tensor<float>* p : model.params()) {
        const std::size_t at = buf.size();
        const std::size_t bytes = p->size() * sizeof(float);
        buf.resize(at + bytes);
        std::memcpy(buf.data() + at, p->data(), bytes);
    }

    const std::uint32_t crc =
        static_cast<std::uint32_t>(::crc32(0L, buf.data(), static_cast<uInt>(buf.size())));
    append_u32(buf, crc);

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw CheckpointError(CheckpointFault::truncated,
                              "cannot open checkpoint for writing: " + path.string());
    }
    out.write(reinterpret_cast<const char*>(buf.data()),
              static_cast<std::streamsize>(buf.size()));
    if (!out) {
        throw CheckpointError(CheckpointFault::truncated,
                              "short write to checkpoint: " + path.string());
    }
}

Model<float> load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw CheckpointError(CheckpointFault::truncated,
                              "cannot open checkpoint: " + path.string());
    }
    std::vector<std::uint8_t> buf((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());

    if (buf.size() < 16) {
        throw CheckpointError(CheckpointFault::truncated,
                              "checkpoint is too short: " + path.string());
    }
    if (std::memcmp(buf.data(), kMagic, 4) != 0) {
        throw CheckpointError(CheckpointFault::bad_magic,
                              "not a checkpoint (bad magic): " + path.string());
    }
    const std::uint32_t version = read_u32(buf, 4);
    if (version != kCheckpointVersion) {
        throw CheckpointError(CheckpointFault::bad_version,
                              "unsupported checkpoint version " + std::to_string(version));
    }
    const std::uint32_t header_len = read_u32(buf, 8);
    if (12 + static_cast<std::size_t>(header_len) + 4 > buf.size()) {
        throw CheckpointError(CheckpointFault::truncated,
                              "checkpoint header overruns file: " + path.string());
    }

    const std::uint32_t stored_crc = read_u32(buf, buf.size() - 4);
    const std::uint32_t crc = static_cast<std::uint32_t>(
        ::crc32(0L, buf.data(), static_cast<uInt>(buf.size() - 4)));
    if (crc != stored_crc) {
        throw CheckpointError(CheckpointFault::bad_crc,
                              "checkpoint CRC mismatch: " + path.string());
    }

    nlohmann::json h;
    try {
        h = nlohmann::json::parse(buf.begin() + 12, buf.begin() + 12 + header_len);
        ModelHyper hyper;
        hyper.dropout = h.at("dropout").get<double>();
        hyper.filters = h.at("filters").get<int>();
        hyper.hidden = h.at("hidden").get<int>();
        hyper.kernel = h.at("kernel").get<int>();
        hyper.l2 = h.at("l2").get<double>();
        const auto input = h.at("input").get<std::vector<std::size_t>>();
        const ModelKind kind = parse_model_kind(h.at("kind").get<std::string>());
        if (input.size() != 3) throw std::runtime_error("input shape");

        Model<float> m = build_model<float>(kind, input[0], input[1], input[2], hyper, 0);
        std::size_t at = 12 + header_len;
        for (Tensor<float>* p : m.params()) {
            const std::size_t bytes = p->size() * sizeof(float);
            if (at + bytes > buf.size() - 4) {
                throw CheckpointError(CheckpointFault::bad_length,
                                      "checkpoint payload is shorter than the declared model");
            }
            std::memcpy(p->data(), buf.data() + at, bytes);
            at += bytes;
        }
        if (at != buf.size() - 4) {
            throw CheckpointError(CheckpointFault::bad_length,
                                  "checkpoint payload is longer than the declared model");
        }
        return m;
    } catch (const CheckpointError&) {
        throw;
    } catch (const std::exception& e) {
        throw CheckpointError(CheckpointFault::bad_header,
                              std::string("malformed checkpoint header: ") + e.what());
    }
}

}  // namespace dfdm
