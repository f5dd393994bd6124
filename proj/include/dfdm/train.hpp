#pragma once

#include <optional>
#include <string>
#include <vector>

#include "dfdm/data.hpp"
#include "dfdm/model.hpp"

namespace dfdm {

struct TrainOptions {
    std::size_t epochs = 10;
    double lr = 0.001;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::uint64_t seed = 42;
};

struct EpochStats {
    std::size_t epoch = 0;            // 1-based
    double train_loss = 0.0;          // sample-weighted mean objective
    std::optional<double> valid_accuracy;
};

struct TrainResult {
    std::vector<EpochStats> history;
    bool aborted = false;
    std::size_t abort_epoch = 0;
    std::size_t abort_batch = 0;
    std::string abort_message;
};

/// Shuffled-minibatch training with Adam. All randomness (shuffle, dropout,
/// augmentation) derives from the pipeline/option seeds, so identical inputs
/// give bit-identical parameters. On a non-finite loss the loop stops and
/// returns the history collected so far with the abort location recorded.
TrainResult train_model(Model<float>& model, const DataPipeline& train,
                        const DataPipeline* valid, const TrainOptions& options);

/// Classification accuracy of the model over every sample in the pipeline.
double evaluate_accuracy(const Model<float>& model, const DataPipeline& data);

}  // namespace dfdm
