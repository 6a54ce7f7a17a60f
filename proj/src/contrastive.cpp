#include "qfs/contrastive.hpp"

#include <algorithm>
#include <numeric>

#include "qfs/errors.hpp"

namespace qfs {

std::vector<std::size_t> select_positives(const SegmentLabels& labels) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < labels.flags.size(); ++i) {
        if (labels.flags[i]) out.push_back(i);
    }
    return out;
}

std::vector<std::size_t> select_negatives(std::span<const double> segment_probs, const SegmentLabels& labels,
                                          std::size_t n_pos, double min_probability) {
    if (segment_probs.size() != labels.flags.size()) {
        throw StructuralError("select_negatives: " + std::to_string(segment_probs.size()) + " probabilities for " +
                              std::to_string(labels.flags.size()) + " labels");
    }
    std::vector<std::size_t> candidates;
    for (std::size_t i = 0; i < labels.flags.size(); ++i) {
        if (!labels.flags[i] && segment_probs[i] >= min_probability) candidates.push_back(i);
    }
    std::stable_sort(candidates.begin(), candidates.end(),
                     [&](std::size_t a, std::size_t b) { return segment_probs[a] > segment_probs[b]; });
    candidates.resize(std::min(candidates.size(), n_pos));
    return candidates;
}

double tokenwise_cosine(const ag::Matrix& q, const ag::Matrix& s) {
    ag::NoGradGuard no_grad;
    return ag::tokenwise_cosine(ag::Var(q), ag::Var(s)).item();
}

double info_nce(double sim_positive, std::span<const double> sims_all, double temperature) {
    if (!(temperature > 0.0)) throw ConfigError("temperature must be > 0");
    const auto it = std::find(sims_all.begin(), sims_all.end(), sim_positive);
    if (it == sims_all.end()) throw StructuralError("info_nce: positive similarity missing from the denominator set");
    ag::NoGradGuard no_grad;
    ag::Matrix sims(static_cast<Eigen::Index>(sims_all.size()), 1);
    for (std::size_t i = 0; i < sims_all.size(); ++i) sims(static_cast<Eigen::Index>(i), 0) = sims_all[i];
    return ag::info_nce(ag::Var(sims), it - sims_all.begin(), temperature).item();
}

void ContrastiveBatch::validate(const SegmentLabels& labels) const {
    for (auto i : positive_indices) {
        if (i >= labels.flags.size() || !labels.flags[i]) throw StructuralError("positive index is not a gold segment");
    }
    for (auto i : negative_indices) {
        if (i >= labels.flags.size() || labels.flags[i]) throw StructuralError("negative index is a gold segment");
        if (std::find(positive_indices.begin(), positive_indices.end(), i) != positive_indices.end()) {
            throw StructuralError("index selected as both positive and negative");
        }
    }
    if (negative_indices.size() > positive_indices.size()) {
        throw StructuralError("more negatives than positives");
    }
    if (instance_embeddings.size() != positive_indices.size() + negative_indices.size()) {
        throw StructuralError("one instance embedding per selected index is required");
    }
}

bool ContrastiveOutput::ranked_correctly() const {
    if (positive_sims.empty() || negative_sims.empty()) return false;
    return *std::min_element(positive_sims.begin(), positive_sims.end()) >
           *std::max_element(negative_sims.begin(), negative_sims.end());
}

ContrastiveOutput contrastive_loss(const ContrastiveBatch& batch) {
    if (!(batch.temperature > 0.0)) throw ConfigError("temperature must be > 0");
    ContrastiveOutput out;
    const std::size_t n_pos = batch.positive_indices.size();
    const std::size_t n_neg = batch.negative_indices.size();
    if (n_pos == 0 || n_neg == 0) {
        out.loss = ag::Var::scalar(0.0);
        return out;
    }
    if (batch.instance_embeddings.size() != n_pos + n_neg) {
        throw StructuralError("one instance embedding per selected index is required");
    }
    out.skipped = false;
    std::vector<ag::Var> sims;
    sims.reserve(n_pos + n_neg);
    for (const auto& emb : batch.instance_embeddings) sims.push_back(ag::tokenwise_cosine(emb, batch.query_embedding));
    for (std::size_t i = 0; i < n_pos; ++i) out.positive_sims.push_back(sims[i].item());
    for (std::size_t i = 0; i < n_neg; ++i) out.negative_sims.push_back(sims[n_pos + i].item());

    std::vector<ag::Var> terms;
    terms.reserve(n_pos);
    for (std::size_t p = 0; p < n_pos; ++p) {
        std::vector<ag::Var> set{sims[p]};
        set.insert(set.end(), sims.begin() + static_cast<std::ptrdiff_t>(n_pos), sims.end());
        terms.push_back(ag::info_nce(ag::stack_scalars(set), 0, batch.temperature));
    }
    out.loss = ag::mean_scalars(terms);
    return out;
}

}  // namespace qfs
