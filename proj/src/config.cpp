#include "dfdm/config.hpp"

#include <fstream>

#include "dfdm/errors.hpp"
#include "dfdm/label.hpp"
#include "dfdm/model.hpp"

namespace dfdm {

namespace {

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
    try {
        std::size_t used = 0;
        if constexpr (std::is_floating_point_v<T>) {
            const double v = std::stod(value, &used);
            if (used != value.size()) throw std::invalid_argument(value);
            return static_cast<T>(v);
        } else {
            const long long v = std::stoll(value, &used);
            if (used != value.size() || v < 0) throw std::invalid_argument(value);
            return static_cast<T>(v);
        }
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': cannot parse value '" + value + "'");
    }
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1" || value == "on") return true;
    if (value == "false" || value == "0" || value == "off") return false;
    throw ConfigError("config key '" + key + "': cannot parse boolean '" + value + "'");
}

}  // namespace

void apply_config_entry(RunConfig& cfg, const std::string& key, const std::string& value) {
    if (key == "model") cfg.model = value;
    else if (key == "input_h") cfg.input_h = parse_number<std::size_t>(key, value);
    else if (key == "input_w") cfg.input_w = parse_number<std::size_t>(key, value);
    else if (key == "kernel") cfg.kernel = parse_number<int>(key, value);
    else if (key == "hidden") cfg.hidden = parse_number<int>(key, value);
    else if (key == "l2") cfg.l2 = parse_number<double>(key, value);
    else if (key == "dropout") cfg.dropout = parse_number<double>(key, value);
    else if (key == "lr") cfg.lr = parse_number<double>(key, value);
    else if (key == "beta1") cfg.beta1 = parse_number<double>(key, value);
    else if (key == "beta2") cfg.beta2 = parse_number<double>(key, value);
    else if (key == "epsilon") cfg.epsilon = parse_number<double>(key, value);
    else if (key == "epochs") cfg.epochs = parse_number<std::size_t>(key, value);
    else if (key == "batch") cfg.batch = parse_number<std::size_t>(key, value);
    else if (key == "seed") cfg.seed = parse_number<std::uint64_t>(key, value);
    else if (key == "flip_prob") cfg.flip_prob = parse_number<double>(key, value);
    else if (key == "shear_max") cfg.shear_max = parse_number<double>(key, value);
    else if (key == "zoom_lo") cfg.zoom_lo = parse_number<double>(key, value);
    else if (key == "zoom_hi") cfg.zoom_hi = parse_number<double>(key, value);
    else if (key == "augment") cfg.augment = parse_bool(key, value);
    else if (key == "data") cfg.data = value;
    else if (key == "positive_class") cfg.positive_class = value;
    else throw ConfigError("unknown config key '" + key + "'");
}

void load_config_file(RunConfig& cfg, const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path.string());
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        const auto trim = [](const std::string& s) {
            const std::size_t b = s.find_first_not_of(" \t\r");
            if (b == std::string::npos) return std::string();
            const std::size_t e = s.find_last_not_of(" \t\r");
            return s.substr(b, e - b + 1);
        };
        const std::string t = trim(line);
        if (t.empty()) continue;
        const std::size_t eq = t.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(path.string() + ":" + std::to_string(lineno) +
                              ": expected 'key = value'");
        }
        try {
            apply_config_entry(cfg, trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
        } catch (const ConfigError& e) {
            throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
}

void validate_config(const RunConfig& cfg) {
    parse_model_kind(cfg.model);
    parse_label(cfg.positive_class);
    if (cfg.batch == 0) throw ConfigError("batch must be at least 1");
    if (cfg.kernel < 1) throw ConfigError("kernel must be at least 1");
    if (cfg.hidden < 1) throw ConfigError("hidden must be at least 1");
    if (!(cfg.dropout >= 0.0 && cfg.dropout < 1.0))
        throw ConfigError("dropout must be in [0,1)");
    if (cfg.l2 < 0.0) throw ConfigError("l2 must be nonnegative");
}

nlohmann::ordered_json config_json(const RunConfig& cfg) {
    nlohmann::ordered_json j;
    j["model"] = cfg.model;
    j["input_h"] = cfg.input_h;
    j["input_w"] = cfg.input_w;
    j["kernel"] = cfg.kernel;
    j["hidden"] = cfg.hidden;
    j["l2"] = cfg.l2;
    j["dropout"] = cfg.dropout;
    j["lr"] = cfg.lr;
    j["beta1"] = cfg.beta1;
    j["beta2"] = cfg.beta2;
    j["epsilon"] = cfg.epsilon;
    j["epochs"] = cfg.epochs;
    j["batch"] = cfg.batch;
    j["seed"] = cfg.seed;
    j["flip_prob"] = cfg.flip_prob;
    j["shear_max"] = cfg.shear_max;
    j["zoom_lo"] = cfg.zoom_lo;
    j["zoom_hi"] = cfg.zoom_hi;
    j["augment"] = cfg.augment;
    j["data"] = cfg.data;
    j["positive_class"] = cfg.positive_class;
    return j;
}

}  // namespace dfdm
