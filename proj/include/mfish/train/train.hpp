#pragma once

#include <cmath>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <spdlog/spdlog.h>

#include "mfish/data/augment.hpp"
#include "mfish/data/batch.hpp"
#include "mfish/metrics/ccr.hpp"
#include "mfish/nn/adam.hpp"
#include "mfish/nn/loss.hpp"
#include "mfish/segnet/network.hpp"
#include "mfish/segnet/predict.hpp"
#include "mfish/train/config.hpp"

namespace mfish::train {

struct EpochRecord {
    int epoch = 0;          ///< 1-based
    double mean_loss = 0.0; ///< averaged over every masked-in pixel of the epoch
    std::size_t pixels = 0;
};

struct TrainLog {
    std::vector<EpochRecord> epochs;
};

/// What an epoch hook sees after each completed epoch.
template <class T>
struct EpochContext {
    const EpochRecord& record;
    segnet::Network<T>& net;
    const nn::AdamState<T>& optimizer;
};

/// Returning false ends training after the current epoch.
template <class T>
using EpochHook = std::function<bool(const EpochContext<T>&)>;

template <class T>
struct TrainResult {
    segnet::Network<T> net;
    nn::AdamState<T> optimizer;
    TrainLog log;
};

/// Seed of the augmentation stream used by train_model.
inline std::uint64_t augmentation_seed(const TrainConfig& config)
{
    return mix_seed({config.seed, config.augmentation.seed, 0x617567});
}

struct StepLoss {
    double loss = 0.0;
    std::size_t count = 0;
};

/// One optimisation step on a batch. The parameters are left untouched when
/// the loss is not finite.
template <class T>
StepLoss train_step(segnet::Network<T>& net, const std::vector<nn::Tensor4<T>*>& params, nn::AdamState<T>& optimizer,
                    const data::Batch<T>& batch)
{
    net.zero_grad();
    const auto logits = net.forward(batch.inputs, nn::Mode::train);
    const auto loss = nn::softmax_cross_entropy(logits, batch.targets, batch.mask);
    if (!std::isfinite(static_cast<double>(loss.loss))) {
        net.release_cache();
        return {static_cast<double>(loss.loss), loss.count};
    }
    net.backward(loss.grad);
    net.release_cache();
    nn::adam_step<T>(std::span<nn::Tensor4<T>* const>(params), optimizer);
    return {static_cast<double>(loss.loss), loss.count};
}

/// Trains a freshly initialised network end to end: augment, batch, forward,
/// softmax cross entropy over chromosome pixels, backward, Adam step.
/// Throws DivergenceError as soon as a batch loss is not finite.
template <class T = float>
TrainResult<T> train_model(std::span<const data::MfishSample> samples, const data::LabelCoding& coding,
                           const TrainConfig& config, const segnet::NetworkConfig& net_config,
                           const EpochHook<T>& hook = {})
{
    config.validate(false);
    TrainResult<T> result{segnet::Network<T>(net_config, config.seed), nn::AdamState<T>{config.optimizer, 0, {}, {}},
                          {}};
    if (config.epochs == 0)
        return result;
    if (samples.empty())
        throw ValidationError("train_model: no training samples");

    typename data::BatchStream<T>::Transform transform;
    if (config.augmentation.enabled) {
        auto aug = config.augmentation;
        aug.seed = augmentation_seed(config);
        transform = [aug, &coding](const data::MfishSample& s, std::uint64_t epoch) {
            return data::augment(s, aug, coding, epoch);
        };
    }
    const data::BatchStream<T> stream(samples, coding, config.batch_size, config.seed, std::move(transform),
                                      config.workers);
    auto& net = result.net;
    const auto params = net.parameters();

    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        double loss_sum = 0.0;
        std::size_t pixels = 0;
        int batch_index = 0;
        stream.for_each_batch(static_cast<std::uint64_t>(epoch), [&](const data::Batch<T>& batch) {
            ++batch_index;
            bool any = false;
            for (std::size_t i = 0; i < batch.mask.size() && !any; ++i)
                any = batch.mask[i] != T(0);
            if (!any) {
                spdlog::warn("epoch {} batch {}: no chromosome pixels, skipped", epoch, batch_index);
                return;
            }
            const auto loss = train_step(net, params, result.optimizer, batch);
            if (!std::isfinite(static_cast<double>(loss.loss)))
                throw DivergenceError("training diverged at epoch " + std::to_string(epoch) + ", batch " +
                                      std::to_string(batch_index) + ": loss is not finite");
            loss_sum += static_cast<double>(loss.loss) * static_cast<double>(loss.count);
            pixels += loss.count;
        });
        if (pixels == 0)
            throw ValidationError("train_model: the training set has no chromosome pixels");
        result.log.epochs.push_back({epoch, loss_sum / static_cast<double>(pixels), pixels});
        spdlog::debug("epoch {}/{} loss {:.6f}", epoch, config.epochs, result.log.epochs.back().mean_loss);
        if (hook && !hook(EpochContext<T>{result.log.epochs.back(), net, result.optimizer}))
            break;
    }
    return result;
}

/// Pooled (micro-averaged) evaluation over a test set.
struct Evaluation {
    metrics::ConfusionMatrix confusion;
    metrics::CcrReport report;
    std::vector<std::pair<std::string, double>> per_sample; ///< per-image CCR
    std::vector<std::string> skipped;                       ///< samples without chromosome pixels
};

using Predictor = std::function<data::LabelMap(const data::MfishSample&)>;

/// Aggregates pixel counts over all samples before dividing. Samples without
/// chromosome pixels are skipped with a warning.
inline Evaluation evaluate_predictions(std::span<const data::MfishSample> samples, const data::LabelCoding& coding,
                                       const Predictor& predict)
{
    if (samples.empty())
        throw ValidationError("evaluate: empty test set");
    Evaluation ev{metrics::ConfusionMatrix(coding.num_classes()), {}, {}, {}};
    for (const auto& s : samples) {
        bool any = false;
        for (int code : s.labels.pixels)
            if (coding.is_chromosome(code)) {
                any = true;
                break;
            }
        if (!any) {
            spdlog::warn("evaluate: {} has no chromosome pixels, excluded", s.id);
            ev.skipped.push_back(s.id);
            continue;
        }
        const auto m = metrics::confusion(predict(s), s.labels, coding);
        ev.per_sample.emplace_back(s.id, m.report().ccr);
        ev.confusion.merge(m);
    }
    if (ev.per_sample.empty())
        throw ValidationError("evaluate: no test sample has chromosome pixels");
    ev.report = ev.confusion.report();
    return ev;
}

/// Evaluates `net` in inference mode (running batch-norm statistics).
template <class T>
Evaluation evaluate_model(segnet::Network<T>& net, std::span<const data::MfishSample> samples,
                          const data::LabelCoding& coding)
{
    return evaluate_predictions(samples, coding,
                                [&](const data::MfishSample& s) { return segnet::predict_labels(net, s, coding); });
}

} // namespace mfish::train
