#include "qfs/losses.hpp"

#include <array>
#include <cmath>
#include <vector>

#include "qfs/errors.hpp"

namespace qfs {

TokenIds shifted_labels(std::span<const TokenId> target) {
    TokenIds labels;
    if (target.empty()) return labels;
    labels.assign(target.begin() + 1, target.end());
    labels.push_back(SpecialTokens::kEnd);
    return labels;
}

ag::Var generation_loss(const ag::Var& logits, std::span<const TokenId> target) {
    const TokenIds labels = shifted_labels(target);
    const std::vector<int> idx(labels.begin(), labels.end());
    return ag::cross_entropy_sum(logits, idx, SpecialTokens::kPad);
}

double generation_loss(const ag::Matrix& logits, std::span<const TokenId> target) {
    ag::NoGradGuard no_grad;
    return generation_loss(ag::Var(logits), target).item();
}

ag::Var classification_loss(const ag::Var& probs, std::span<const bool> labels) {
    std::vector<double> y(labels.begin(), labels.end());
    return ag::binary_cross_entropy_sum(probs, y, kProbabilityClamp);
}

double classification_loss(std::span<const double> probs, std::span<const bool> labels) {
    ag::NoGradGuard no_grad;
    ag::Matrix p(static_cast<Eigen::Index>(probs.size()), 1);
    for (std::size_t i = 0; i < probs.size(); ++i) p(static_cast<Eigen::Index>(i), 0) = probs[i];
    return classification_loss(ag::Var(p), labels).item();
}

void LossWeights::validate() const {
    if (generation < 0 || classification < 0 || contrastive < 0) {
        throw ConfigError("lambda_gen, lambda_cls and lambda_cont must be non-negative");
    }
    const double sum = generation + classification + contrastive;
    if (std::abs(sum - 1.0) > 1e-9) {
        throw ConfigError("lambda_gen + lambda_cls + lambda_cont must equal 1 (got " + std::to_string(sum) + ")");
    }
}

bool LossBreakdown::finite() const {
    return std::isfinite(generation) && std::isfinite(classification) && std::isfinite(contrastive) &&
           std::isfinite(joint);
}

LossBreakdown joint_loss(double generation, double classification, double contrastive, const LossWeights& w) {
    w.validate();
    return {generation, classification, contrastive,
            w.generation * generation + w.classification * classification + w.contrastive * contrastive};
}

ag::Var joint_loss(const ag::Var& generation, const ag::Var& classification, const ag::Var& contrastive,
                   const LossWeights& w) {
    w.validate();
    const std::array<ag::Var, 3> parts{generation, classification, contrastive};
    const std::array<double, 3> weights{w.generation, w.classification, w.contrastive};
    return ag::sum_scalars(parts, weights);
}

nlohmann::json to_json(const LossBreakdown& b) {
    return {{"generation", b.generation},
            {"classification", b.classification},
            {"contrastive", b.contrastive},
            {"joint", b.joint}};
}

}  // namespace qfs
