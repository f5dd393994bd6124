#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "dfdm/image.hpp"
#include "dfdm/label.hpp"
#include "dfdm/tensor.hpp"

namespace dfdm {

struct ManifestRow {
    std::string path;  // relative to the manifest root
    Label label = Label::real;
    Split split = Split::train;
};

/// Dataset index: one row per image. Built either from a CSV with header
/// `path,label,split` or from a directory tree `root/{train,valid,test}/
/// {real,fake}/*`. Paths must be unique and every file must exist at load
/// time. Class balance is reported, not enforced.
struct Manifest {
    std::filesystem::path root;
    std::vector<ManifestRow> rows;

    std::size_t count(Split s) const;
    std::size_t count(Split s, Label l) const;
    std::filesystem::path resolve(const ManifestRow& row) const { return root / row.path; }

    /// Per-split class counts, with a warning line for empty splits.
    std::string summary() const;
};

Manifest load_manifest(const std::filesystem::path& dir_or_csv);

struct Sample {
    Tensor<float> image;  // HxWx3 in [0,1]
    Label label = Label::real;
    std::string path;
};

struct Batch {
    Tensor<float> images;  // NxHxWx3
    std::vector<Label> labels;
};

struct PipelineOptions {
    Split split = Split::train;
    std::size_t height = 64;
    std::size_t width = 64;
    std::size_t batch_size = 64;
    std::uint64_t seed = 0;
    bool shuffle = false;
    bool augment = false;  // honored for the train split only
    AugmentConfig aug;
};

/// Deterministic decode/resize/augment/batch stage over one manifest split.
/// Per-sample augmentation streams derive from (seed, epoch, row index), so
/// the emitted batches are a pure function of (manifest, options, epoch).
class DataPipeline {
public:
    DataPipeline(const Manifest& manifest, PipelineOptions options);

    std::size_t sample_count() const { return rows_.size(); }
    std::size_t batch_count() const;
    const PipelineOptions& options() const { return options_; }

    /// Shuffled (or manifest-ordered) row indices for one epoch.
    std::vector<std::size_t> epoch_order(std::uint64_t epoch) const;

    Sample load_sample(std::size_t index, std::uint64_t epoch) const;

    class EpochBatches {
    public:
        bool next(Batch& out);

    private:
        friend class DataPipeline;
        EpochBatches(const DataPipeline* p, std::uint64_t epoch)
            : pipeline_(p), epoch_(epoch), order_(p->epoch_order(epoch)) {}
        const DataPipeline* pipeline_;
        std::uint64_t epoch_;
        std::vector<std::size_t> order_;
        std::size_t at_ = 0;
    };

    EpochBatches batches(std::uint64_t epoch) const { return EpochBatches(this, epoch); }

private:
    const Manifest* manifest_;
    PipelineOptions options_;
    std::vector<std::size_t> rows_;  // indices into manifest_->rows for the split
};

}  // namespace dfdm
