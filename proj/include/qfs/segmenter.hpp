#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "qfs/tokenizer.hpp"

namespace qfs {

struct SegmentationConfig {
    std::size_t segment_length = 512;
    double overlap_fraction = 0.5;
    std::size_t max_query_length = 128;

    /// floor(segment_length * (1 - overlap)), at least 1.
    std::size_t stride() const;
    void validate() const;
};

/// Half-open token interval [start, end).
struct Span {
    std::size_t start = 0;
    std::size_t end = 0;

    std::size_t length() const { return end - start; }
    bool intersects(const Span& other) const { return start < other.end && other.start < end; }
    friend bool operator==(const Span&, const Span&) = default;
};

struct Segment {
    std::size_t index = 0;
    TokenIds token_ids;
    std::size_t doc_start = 0;
    std::size_t doc_end = 0;
    bool is_gold = false;

    Span span() const { return {doc_start, doc_end}; }
};

/// Window boundaries only; shared by segment_document and the labeler.
std::vector<Span> segment_bounds(std::size_t doc_length, const SegmentationConfig& config);

std::vector<Segment> segment_document(std::span<const TokenId> doc, const SegmentationConfig& config);

/// <s> query[:max_query_length] <sep> segment </s>. Position 0 carries the
/// segment's classification representation.
TokenIds build_model_input(std::span<const TokenId> query, const Segment& segment, std::size_t max_query_length);

}  // namespace qfs
