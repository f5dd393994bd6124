#include "dfdm/train.hpp"

#include <cmath>

namespace dfdm {

TrainResult train_model(Model<float>& model, const DataPipeline& train,
                        const DataPipeline* valid, const TrainOptions& options) {
    TrainResult result;
    Adam<float> adam(options.lr, options.beta1, options.beta2, options.epsilon);
    const Rng dropout_root = Rng(options.seed).split("dropout");
    const std::vector<Tensor<float>*> params = model.params();

    for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
        double loss_sum = 0.0;
        std::size_t seen = 0;
        std::size_t batch_index = 0;
        auto batches = train.batches(epoch);
        Batch batch;
        while (batches.next(batch)) {
            const Tensor<float> targets = loss_targets<float>(model.loss, batch.labels);
            const Rng rng = dropout_root.split(epoch).split(batch_index);
            const float loss = model_step(model, batch.images, targets, rng);
            if (!std::isfinite(loss)) {
                result.aborted = true;
                result.abort_epoch = epoch + 1;
                result.abort_batch = batch_index;
                result.abort_message = "non-finite loss at epoch " + std::to_string(epoch + 1) +
                                       ", batch " + std::to_string(batch_index);
                return result;
            }
            adam.apply(params, model.grads());
            loss_sum += static_cast<double>(loss) * static_cast<double>(batch.labels.size());
            seen += batch.labels.size();
            ++batch_index;
        }

        EpochStats stats;
        stats.epoch = epoch + 1;
        stats.train_loss = seen ? loss_sum / static_cast<double>(seen) : 0.0;
        if (valid && valid->sample_count() > 0) {
            stats.valid_accuracy = evaluate_accuracy(model, *valid);
        }
        result.history.push_back(stats);
    }
    return result;
}

double evaluate_accuracy(const Model<float>& model, const DataPipeline& data) {
    std::size_t correct = 0, total = 0;
    auto batches = data.batches(0);
    Batch batch;
    while (batches.next(batch)) {
        const std::vector<Label> predicted = classify(model, batch.images);
        for (std::size_t i = 0; i < predicted.size(); ++i) {
            correct += predicted[i] == batch.labels[i];
        }
        total += predicted.size();
    }
    return total ? static_cast<double>(correct) / static_cast<double>(total) : 0.0;
}

}  // namespace dfdm
