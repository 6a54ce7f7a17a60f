#pragma once

#include <span>

#include <nlohmann/json.hpp>

#include "qfs/autograd.hpp"
#include "qfs/tokenizer.hpp"

namespace qfs {

inline constexpr double kProbabilityClamp = 1e-7;

/// Next-token labels for a teacher-forced target: target[1:] followed by </s>.
TokenIds shifted_labels(std::span<const TokenId> target);

/// Summed negative log-likelihood of the shifted labels; positions whose
/// label is <pad> are skipped.
ag::Var generation_loss(const ag::Var& logits, std::span<const TokenId> target);
double generation_loss(const ag::Matrix& logits, std::span<const TokenId> target);

/// Binary cross-entropy summed over segments, probabilities clamped to
/// [1e-7, 1 - 1e-7].
ag::Var classification_loss(const ag::Var& probs, std::span<const bool> labels);
double classification_loss(std::span<const double> probs, std::span<const bool> labels);

struct LossWeights {
    double generation = 0.6;
    double classification = 0.2;
    double contrastive = 0.2;

    /// Non-negative and summing to 1 within 1e-9.
    void validate() const;
};

struct LossBreakdown {
    double generation = 0.0;
    double classification = 0.0;
    double contrastive = 0.0;
    double joint = 0.0;

    bool finite() const;
    friend bool operator==(const LossBreakdown&, const LossBreakdown&) = default;
};

LossBreakdown joint_loss(double generation, double classification, double contrastive, const LossWeights& weights);
ag::Var joint_loss(const ag::Var& generation, const ag::Var& classification, const ag::Var& contrastive,
                   const LossWeights& weights);

nlohmann::json to_json(const LossBreakdown& b);

}  // namespace qfs
