#include "dfdm/data.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "dfdm/errors.hpp"

namespace dfdm {

namespace fs = std::filesystem;

namespace {

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

Label parse_manifest_label(const std::string& token, std::size_t row) {
    if (token == "real") return Label::real;
    if (token == "deepfake" || token == "fake") return Label::deepfake;
    throw DataError("manifest row " + std::to_string(row) + ": unknown label '" + token + "'");
}

Split parse_manifest_split(const std::string& token, std::size_t row) {
    if (token == "train") return Split::train;
    if (token == "valid") return Split::valid;
    if (token == "test") return Split::test;
    throw DataError("manifest row " + std::to_string(row) + ": unknown split '" + token + "'");
}

Manifest load_from_tree(const fs::path& root) {
    Manifest m;
    m.root = root;
    const std::pair<const char*, Split> splits[] = {
        {"train", Split::train}, {"valid", Split::valid}, {"test", Split::test}};
    const std::pair<const char*, Label> classes[] = {{"real", Label::real},
                                                     {"fake", Label::deepfake}};
    for (const auto& [sname, split] : splits) {
        for (const auto& [cname, label] : classes) {
            const fs::path dir = root / sname / cname;
            if (!fs::is_directory(dir)) continue;
            std::vector<std::string> files;
            for (const auto& entry : fs::directory_iterator(dir)) {
                if (entry.is_regular_file()) {
                    files.push_back((fs::path(sname) / cname / entry.path().filename()).string());
                }
            }
            std::sort(files.begin(), files.end());  // directory order is not stable
            for (std::string& f : files) m.rows.push_back({std::move(f), label, split});
        }
    }
    return m;
}

Manifest load_from_csv(const fs::path& csv) {
    std::ifstream in(csv);
    if (!in) throw DataError("cannot open manifest: " + csv.string());
    Manifest m;
    m.root = csv.parent_path();
    std::string line;
    if (!std::getline(in, line)) {
        throw DataError("manifest " + csv.string() + " is empty");
    }
    if (line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);  // UTF-8 BOM
    if (trim(line) != "path,label,split") {
        throw DataError("manifest " + csv.string() + " must start with header 'path,label,split'");
    }
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        const std::string t = trim(line);
        if (t.empty()) continue;
        std::istringstream ss(t);
        std::string path, label, split, extra;
        if (!std::getline(ss, path, ',') || !std::getline(ss, label, ',') ||
            !std::getline(ss, split, ',')) {
            throw DataError("manifest row " + std::to_string(row) + ": expected 3 fields");
        }
        if (std::getline(ss, extra, ',')) {
            throw DataError("manifest row " + std::to_string(row) + ": too many fields");
        }
        m.rows.push_back(
            {trim(path), parse_manifest_label(trim(label), row), parse_manifest_split(trim(split), row)});
    }
    return m;
}

}  // namespace

std::size_t Manifest::count(Split s) const {
    std::size_t n = 0;
    for (const ManifestRow& r : rows) n += r.split == s;
    return n;
}

std::size_t Manifest::count(Split s, Label l) const {
    std::size_t n = 0;
    for (const ManifestRow& r : rows) n += r.split == s && r.label == l;
    return n;
}

std::string Manifest::summary() const {
    std::ostringstream os;
    for (Split s : {Split::train, Split::valid, Split::test}) {
        const std::size_t real = count(s, Label::real);
        const std::size_t fake = count(s, Label::deepfake);
        os << split_name(s) << ": " << (real + fake) << " samples (" << real << " real, " << fake
           << " deepfake)";
        if (real + fake == 0) os << " [warning: empty split]";
        os << '\n';
    }
    return os.str();
}

Manifest load_manifest(const fs::path& dir_or_csv) {
    Manifest m;
    if (fs::is_directory(dir_or_csv)) {
        m = load_from_tree(dir_or_csv);
    } else if (fs::is_regular_file(dir_or_csv)) {
        m = load_from_csv(dir_or_csv);
    } else {
        throw DataError("no such dataset directory or manifest: " + dir_or_csv.string());
    }

    std::set<std::string> seen;
    for (std::size_t i = 0; i < m.rows.size(); ++i) {
        const ManifestRow& r = m.rows[i];
        if (!seen.insert(r.path).second) {
            throw DataError("manifest row " + std::to_string(i + 1) + ": duplicate path '" +
                            r.path + "'");
        }
        if (!fs::is_regular_file(m.resolve(r))) {
            throw DataError("manifest row " + std::to_string(i + 1) + ": missing file '" +
                            m.resolve(r).string() + "'");
        }
    }
    return m;
}

DataPipeline::DataPipeline(const Manifest& manifest, PipelineOptions options)
    : manifest_(&manifest), options_(options) {
    if (options_.batch_size == 0) throw ConfigError("batch_size must be at least 1");
    options_.aug.validate();
    for (std::size_t i = 0; i < manifest.rows.size(); ++i) {
        if (manifest.rows[i].split == options_.split) rows_.push_back(i);
    }
}

std::size_t DataPipeline::batch_count() const {
    return (rows_.size() + options_.batch_size - 1) / options_.batch_size;
}

std::vector<std::size_t> DataPipeline::epoch_order(std::uint64_t epoch) const {
    std::vector<std::size_t> order(rows_.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    if (options_.shuffle && order.size() > 1) {
        Rng rng = Rng(options_.seed).split("shuffle").split(epoch);
        for (std::size_t i = order.size() - 1; i > 0; --i) {
            const std::size_t j = static_cast<std::size_t>(rng.below(i + 1));
            std::swap(order[i], order[j]);
        }
    }
    return order;
}

Sample DataPipeline::load_sample(std::size_t index, std::uint64_t epoch) const {
    const ManifestRow& row = manifest_->rows[rows_[index]];
    Tensor<float> img = decode_image(manifest_->resolve(row));
    img = resize_bilinear(img, options_.height, options_.width);
    if (options_.augment && options_.split == Split::train) {
        Rng rng = Rng(options_.seed).split("augment").split(epoch).split(index);
        img = augment_image(img, options_.aug, rng);
    }
    return {std::move(img), row.label, row.path};
}

bool DataPipeline::EpochBatches::next(Batch& out) {
    if (at_ >= order_.size()) return false;
    const PipelineOptions& opt = pipeline_->options();
    const std::size_t n = std::min(opt.batch_size, order_.size() - at_);
    out.images = Tensor<float>({n, opt.height, opt.width, 3});
    out.labels.assign(n, Label::real);
    const std::size_t stride = opt.height * opt.width * 3;
    for (std::size_t i = 0; i < n; ++i) {
        const Sample s = pipeline_->load_sample(order_[at_ + i], epoch_);
        std::copy(s.image.data(), s.image.data() + stride, out.images.data() + i * stride);
        out.labels[i] = s.label;
    }
    at_ += n;
    return true;
}

}  // namespace dfdm
