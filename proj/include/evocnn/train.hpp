#pragma once

#include <cstddef>
#include <cstdint>

#include "evocnn/data.hpp"
#include "evocnn/genome.hpp"
#include "evocnn/network.hpp"

namespace evocnn {

struct TrainOptions {
    std::size_t epochs = 25;
    std::size_t batch_size = 50;
    double momentum = 0.9;
    std::size_t classes = 10;
    std::uint64_t seed = 0;
};

struct TrainReport {
    std::size_t epochs_run = 0;
    double final_train_loss = 0.0;
    /// Validation accuracy for classifiers, validation reconstruction accuracy for autoencoders.
    double metric = 0.0;
    double wall_seconds = 0.0;
    bool diverged = false;
};

struct TrainData {
    const Dataset& train;
    const Dataset& val;
};

struct TrainResult {
    Network net;
    TrainReport report;
};

/// Minibatch SGD with momentum on `net` (already initialized or inherited) using the genome's
/// learning rate. Deterministic for a fixed seed, genome, data and initial parameters. A
/// non-finite loss stops training and yields metric 0 with `diverged` set.
TrainResult train_individual(const Genome& genome, Network net, const TrainData& data, const TrainOptions& opt);

/// Builds the genome's network, initializes it from opt.seed and trains it.
TrainResult train_individual(const Genome& genome, const TrainData& data, const TrainOptions& opt);

/// Fraction of correctly classified samples.
double evaluate_accuracy(const Network& classifier, const Dataset& ds, std::size_t batch_size = 100);
/// clamp(1 - MSE, 0, 1) of the reconstruction over the whole dataset.
double evaluate_reconstruction(const Network& autoencoder, const Dataset& ds, std::size_t batch_size = 100);
/// Predicted class per sample.
std::vector<std::uint8_t> predict(const Network& classifier, const Dataset& ds, std::size_t batch_size = 100);

}  // namespace evocnn
