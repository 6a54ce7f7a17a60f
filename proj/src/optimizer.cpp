#include "qfs/optimizer.hpp"

#include <cmath>

namespace qfs {

bool AdamW::decays(const std::string& name) {
    const bool is_bias = name.size() >= 5 && name.compare(name.size() - 5, 5, ".bias") == 0;
    return !is_bias && name.find("norm") == std::string::npos;
}

void AdamW::step(ParameterStore& params) {
    ++steps_;
    const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(steps_));
    const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(steps_));
    const double lr = config_.learning_rate;
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto& p = params[i];
        if (!p.has_grad()) continue;
        const auto& name = params.name(i);
        auto [it, inserted] = state_.try_emplace(name);
        auto& m = it->second;
        if (inserted) {
            m.first = ag::Matrix::Zero(p.rows(), p.cols());
            m.second = ag::Matrix::Zero(p.rows(), p.cols());
        }
        const ag::Matrix& g = p.grad();
        m.first = config_.beta1 * m.first + (1.0 - config_.beta1) * g;
        m.second = config_.beta2 * m.second + (1.0 - config_.beta2) * g.cwiseProduct(g);
        if (lr == 0.0) continue;
        ag::Matrix& value = p.mutable_value();
        if (decays(name) && config_.weight_decay != 0.0) value *= (1.0 - lr * config_.weight_decay);
        const ag::Matrix update =
            (m.first.array() / bc1) / ((m.second.array() / bc2).sqrt() + config_.epsilon);
        value -= lr * update;
    }
}

void AdamW::restore(std::int64_t steps, std::map<std::string, Moments> state) {
    steps_ = steps;
    state_ = std::move(state);
}

double global_grad_norm(const ParameterStore& params) {
    double sq = 0.0;
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (params[i].has_grad()) sq += params[i].grad().squaredNorm();
    }
    return std::sqrt(sq);
}

double clip_grad_norm(ParameterStore& params, double max_norm) {
    const double norm = global_grad_norm(params);
    if (norm > max_norm && norm > 0.0) {
        const double factor = max_norm / norm;
        for (std::size_t i = 0; i < params.size(); ++i) {
            if (params[i].has_grad()) params[i].mutable_grad() *= factor;
        }
    }
    return norm;
}

}  // namespace qfs
