#pragma once

#include <cstdint>
#include <string>

#include <nlohmann/json.hpp>

#include "mfish/core/error.hpp"
#include "mfish/data/augment.hpp"
#include "mfish/nn/adam.hpp"

namespace mfish::train {

struct TrainConfig {
    int epochs = 150;
    int batch_size = 16;
    int eval_last_k = 5;
    nn::AdamConfig optimizer{};
    data::AugmentationConfig augmentation{};
    std::uint64_t seed = 0;
    int workers = 1; ///< threads preparing batches; results do not depend on it

    /// `require_eval_window` enforces eval_last_k <= epochs, which only
    /// matters when per-epoch evaluation is requested.
    void validate(bool require_eval_window = true) const
    {
        if (epochs < 0)
            throw ValidationError("TrainConfig: epochs must be non-negative");
        if (batch_size < 1)
            throw ValidationError("TrainConfig: batch_size must be positive");
        if (eval_last_k < 1 || (require_eval_window && eval_last_k > epochs))
            throw ValidationError("TrainConfig: eval_last_k must lie in [1, epochs], got " +
                                  std::to_string(eval_last_k) + " with " + std::to_string(epochs) + " epochs");
        if (!(optimizer.lr > 0.0) || !(optimizer.epsilon > 0.0) || optimizer.beta1 < 0.0 || optimizer.beta1 >= 1.0 ||
            optimizer.beta2 < 0.0 || optimizer.beta2 >= 1.0)
            throw ValidationError("TrainConfig: invalid Adam hyperparameters");
        if (workers < 1)
            throw ValidationError("TrainConfig: workers must be positive");
        augmentation.validate();
    }
};

inline void to_json(nlohmann::json& j, const TrainConfig& c)
{
    const auto& a = c.augmentation;
    j = {{"epochs", c.epochs},
         {"batch_size", c.batch_size},
         {"eval_last_k", c.eval_last_k},
         {"optimizer",
          {{"lr", c.optimizer.lr},
           {"beta1", c.optimizer.beta1},
           {"beta2", c.optimizer.beta2},
           {"epsilon", c.optimizer.epsilon}}},
         {"augmentation",
          {{"enabled", a.enabled},
           {"rotation_deg", {a.rotation_deg.lo, a.rotation_deg.hi}},
           {"scale", {a.scale.lo, a.scale.hi}},
           {"translation_frac", {a.translation_frac.lo, a.translation_frac.hi}},
           {"seed", a.seed}}},
         {"seed", c.seed},
         {"workers", c.workers}};
}

/// Missing keys keep their defaults.
inline void from_json(const nlohmann::json& j, TrainConfig& c)
{
    c.epochs = j.value("epochs", c.epochs);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.eval_last_k = j.value("eval_last_k", c.eval_last_k);
    c.seed = j.value("seed", c.seed);
    c.workers = j.value("workers", c.workers);
    if (j.contains("optimizer")) {
        const auto& o = j.at("optimizer");
        c.optimizer.lr = o.value("lr", c.optimizer.lr);
        c.optimizer.beta1 = o.value("beta1", c.optimizer.beta1);
        c.optimizer.beta2 = o.value("beta2", c.optimizer.beta2);
        c.optimizer.epsilon = o.value("epsilon", c.optimizer.epsilon);
    }
    if (j.contains("augmentation")) {
        const auto& a = j.at("augmentation");
        auto interval = [&](const char* key, data::Interval& iv) {
            if (a.contains(key)) {
                const auto& v = a.at(key);
                if (!v.is_array() || v.size() != 2)
                    throw ValidationError(std::string("TrainConfig: augmentation.") + key + " must be [lo, hi]");
                iv = {v[0].get<double>(), v[1].get<double>()};
            }
        };
        c.augmentation.enabled = a.value("enabled", c.augmentation.enabled);
        c.augmentation.seed = a.value("seed", c.augmentation.seed);
        interval("rotation_deg", c.augmentation.rotation_deg);
        interval("scale", c.augmentation.scale);
        interval("translation_frac", c.augmentation.translation_frac);
    }
}

} // namespace mfish::train
