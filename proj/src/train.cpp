#include "evocnn/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "evocnn/error.hpp"
#include "evocnn/loss.hpp"
#include "evocnn/rng.hpp"

namespace evocnn {

namespace {

double step(Network& net, const Tensor4& x, std::span<const std::uint8_t> labels, GenomeKind kind, double lr,
            double momentum, std::vector<LayerCache>& caches, std::vector<ParamGrads>& grads) {
    const Tensor4 out = net.forward_train(x, caches);
    LossResult loss = kind == GenomeKind::Classifier ? softmax_cross_entropy(out, labels) : mse_loss(out, x);
    net.backward(loss.grad, caches, grads);
    auto& layers = net.layers();
    for (std::size_t i = 0; i < layers.size(); ++i) {
        LayerState& l = layers[i];
        if (!l.has_params()) continue;
        sgd_momentum_step(l.weights, grads[i].weights, l.weight_velocity, lr, momentum);
        sgd_momentum_step(l.bias, grads[i].bias, l.bias_velocity, lr, momentum);
    }
    return loss.loss;
}

bool params_finite(const Network& net) {
    for (const auto& l : net.layers()) {
        for (double v : l.weights)
            if (!std::isfinite(v)) return false;
        for (double v : l.bias)
            if (!std::isfinite(v)) return false;
    }
    return true;
}

}  // namespace

TrainResult train_individual(const Genome& genome, Network net, const TrainData& data, const TrainOptions& opt) {
    if (opt.epochs < 1) throw PreconditionError("epochs must be >= 1");
    if (opt.batch_size < 1) throw PreconditionError("batch size must be >= 1");
    if (data.train.shape != net.input_shape())
        throw StructuralError("training samples " + to_string(data.train.shape) + " do not match network input " +
                              to_string(net.input_shape()));
    const auto t0 = std::chrono::steady_clock::now();
    TrainReport report;
    net.reset_velocity();

    std::vector<LayerCache> caches;
    std::vector<ParamGrads> grads;
    std::vector<std::uint8_t> labels(opt.batch_size);
    try {
        for (std::size_t epoch = 0; epoch < opt.epochs; ++epoch) {
            const auto batches = make_batches(data.train.size(), opt.batch_size, derive_seed(opt.seed, epoch));
            double epoch_loss = 0.0;
            for (const auto& idx : batches) {
                for (std::size_t b = 0; b < idx.size(); ++b) labels[b] = data.train.labels[idx[b]];
                const Tensor4 x = data.train.gather(idx);
                epoch_loss += step(net, x, labels, genome.kind, genome.learning_rate, opt.momentum, caches, grads);
            }
            if (!batches.empty()) report.final_train_loss = epoch_loss / static_cast<double>(batches.size());
            report.epochs_run = epoch + 1;
            if (!params_finite(net)) throw TrainingDiverged("parameters became non-finite");
        }
        report.metric = genome.kind == GenomeKind::Classifier ? evaluate_accuracy(net, data.val, opt.batch_size)
                                                              : evaluate_reconstruction(net, data.val, opt.batch_size);
        if (!std::isfinite(report.metric)) throw TrainingDiverged("non-finite validation metric");
    } catch (const TrainingDiverged&) {
        report.diverged = true;
        report.metric = 0.0;
    }
    report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return {std::move(net), report};
}

TrainResult train_individual(const Genome& genome, const TrainData& data, const TrainOptions& opt) {
    Network net = build_network(genome, data.train.shape, opt.classes);
    Rng rng(derive_seed(opt.seed, 0xC0FFEE));
    net.init_params(rng);
    return train_individual(genome, std::move(net), data, opt);
}

std::vector<std::uint8_t> predict(const Network& classifier, const Dataset& ds, std::size_t batch_size) {
    std::vector<std::uint8_t> out;
    out.reserve(ds.size());
    for (std::size_t first = 0; first < ds.size(); first += batch_size) {
        const std::size_t count = std::min(batch_size, ds.size() - first);
        const Tensor4 logits = classifier.forward(ds.slice(first, count));
        for (std::size_t n = 0; n < count; ++n) {
            auto row = logits.sample(n);
            out.push_back(static_cast<std::uint8_t>(std::max_element(row.begin(), row.end()) - row.begin()));
        }
    }
    return out;
}

double evaluate_accuracy(const Network& classifier, const Dataset& ds, std::size_t batch_size) {
    if (ds.size() == 0) return 0.0;
    const auto pred = predict(classifier, ds, batch_size);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == ds.labels[i];
    return static_cast<double>(correct) / static_cast<double>(ds.size());
}

double evaluate_reconstruction(const Network& autoencoder, const Dataset& ds, std::size_t batch_size) {
    if (ds.size() == 0) return 0.0;
    double sq = 0.0;
    std::size_t count_values = 0;
    for (std::size_t first = 0; first < ds.size(); first += batch_size) {
        const std::size_t count = std::min(batch_size, ds.size() - first);
        const Tensor4 x = ds.slice(first, count);
        const Tensor4 r = autoencoder.forward(x);
        if (!r.same_dims(x)) throw StructuralError("reconstruction has dims " + dims_string(r));
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double d = x.data()[i] - r.data()[i];
            sq += d * d;
        }
        count_values += x.size();
    }
    const double mse = sq / static_cast<double>(count_values);
    if (!std::isfinite(mse)) return 0.0;
    return std::clamp(1.0 - mse, 0.0, 1.0);
}

}  // namespace evocnn
