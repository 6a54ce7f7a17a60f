#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "qfs/corpus.hpp"
#include "qfs/segmenter.hpp"

namespace qfs {

enum class LabelSource { kAnnotated, kBigram };

struct SegmentLabels {
    std::string instance_id;
    std::vector<bool> flags;
    LabelSource source = LabelSource::kAnnotated;

    std::size_t positives() const;
    friend bool operator==(const SegmentLabels&, const SegmentLabels&) = default;
};

inline constexpr int kDefaultBigramThreshold = 6;

/// Flag i is set when segment i shares at least one token with any span.
SegmentLabels label_by_gold_spans(std::span<const Span> segments, std::span<const Span> gold_spans);

/// Number of distinct bigram types present in both sequences.
template <typename Token>
std::size_t bigram_overlap_count(std::span<const Token> a, std::span<const Token> b) {
    if (a.size() < 2 || b.size() < 2) return 0;
    std::set<std::pair<Token, Token>> in_a;
    for (std::size_t i = 0; i + 1 < a.size(); ++i) in_a.emplace(a[i], a[i + 1]);
    std::set<std::pair<Token, Token>> shared;
    for (std::size_t i = 0; i + 1 < b.size(); ++i) {
        std::pair<Token, Token> bg{b[i], b[i + 1]};
        if (in_a.contains(bg)) shared.insert(std::move(bg));
    }
    return shared.size();
}

/// A segment is positive when it clears `threshold` shared bigrams with at
/// least one of the summaries.
SegmentLabels label_by_bigram_overlap(std::span<const Span> segments, std::span<const std::string> document,
                                      std::span<const Tokens> summaries, int threshold = kDefaultBigramThreshold);

enum class LabelMode { kSpans, kBigram };

/// Labels every instance of a split. Spans mode rejects instances that
/// carry no gold spans, listing all offending ids in one error.
std::vector<SegmentLabels> label_split(const DatasetSplit& split, const SegmentationConfig& segmentation,
                                       LabelMode mode, int threshold = kDefaultBigramThreshold);

std::string_view to_string(LabelSource source);
LabelSource parse_label_source(std::string_view text);

void write_labels(const std::filesystem::path& path, std::span<const SegmentLabels> labels);
std::vector<SegmentLabels> read_labels(const std::filesystem::path& path);

/// Keyed by instance id.
std::map<std::string, SegmentLabels> index_labels(std::vector<SegmentLabels> labels);

}  // namespace qfs
