#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "qfs/model.hpp"

namespace qfs {

struct AdamWConfig {
    double learning_rate = 5e-5;
    double weight_decay = 0.01;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// Adam with decoupled weight decay. Decay is skipped for biases and
/// normalization parameters (names ending in ".bias" or containing "norm").
class AdamW {
public:
    explicit AdamW(AdamWConfig config = {}) : config_(config) {}

    void step(ParameterStore& params);

    std::int64_t step_count() const { return steps_; }
    const AdamWConfig& config() const { return config_; }

    struct Moments {
        ag::Matrix first;
        ag::Matrix second;
    };
    const std::map<std::string, Moments>& state() const { return state_; }
    void restore(std::int64_t steps, std::map<std::string, Moments> state);

    static bool decays(const std::string& name);

private:
    AdamWConfig config_;
    std::int64_t steps_ = 0;
    std::map<std::string, Moments> state_;
};

/// Rescales all gradients so their global L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
double clip_grad_norm(ParameterStore& params, double max_norm);

double global_grad_norm(const ParameterStore& params);

}  // namespace qfs
