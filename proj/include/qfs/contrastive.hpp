#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "qfs/autograd.hpp"
#include "qfs/labeler.hpp"

namespace qfs {

/// Gold segment ordinals in segment order.
std::vector<std::size_t> select_positives(const SegmentLabels& labels);

/// The min(n_pos, #non-gold) non-gold segments with the highest
/// probability, in descending probability order; ties go to the lower
/// index. Candidates below `min_probability` are skipped (0 disables).
std::vector<std::size_t> select_negatives(std::span<const double> segment_probs, const SegmentLabels& labels,
                                          std::size_t n_pos, double min_probability = 0.0);

/// Mean cosine over the shared prefix of positions. Zero-norm rows count 0.
double tokenwise_cosine(const ag::Matrix& q, const ag::Matrix& s);

/// -log(exp(sim_positive / tau) / sum_s exp(s / tau)); `sim_positive` must
/// be one of `sims_all`.
double info_nce(double sim_positive, std::span<const double> sims_all, double temperature);

struct ContrastiveBatch {
    std::vector<std::size_t> positive_indices;
    std::vector<std::size_t> negative_indices;
    ag::Var query_embedding;
    /// Positives first (in positive_indices order), then negatives.
    std::vector<ag::Var> instance_embeddings;
    double temperature = 0.6;

    /// Throws StructuralError when the selection contract is broken.
    void validate(const SegmentLabels& labels) const;
};

struct ContrastiveOutput {
    ag::Var loss;  // 1x1, exactly 0 when skipped
    std::vector<double> positive_sims;
    std::vector<double> negative_sims;
    bool skipped = true;

    /// True when every positive similarity exceeds every negative one.
    bool ranked_correctly() const;
};

/// Mean over positives of InfoNCE against {that positive} + all negatives.
ContrastiveOutput contrastive_loss(const ContrastiveBatch& batch);

}  // namespace qfs
