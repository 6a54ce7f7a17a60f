#include "qfs/segmenter.hpp"

#include <algorithm>
#include <cmath>

#include "qfs/errors.hpp"

namespace qfs {

std::size_t SegmentationConfig::stride() const {
    const auto raw = std::floor(static_cast<double>(segment_length) * (1.0 - overlap_fraction));
    return std::max<std::size_t>(1, static_cast<std::size_t>(raw));
}

void SegmentationConfig::validate() const {
    if (segment_length < 2) throw ConfigError("segment_length must be >= 2");
    if (!(overlap_fraction >= 0.0 && overlap_fraction < 1.0)) {
        throw ConfigError("overlap_fraction must be in [0, 1)");
    }
    if (max_query_length < 1) throw ConfigError("max_query_length must be >= 1");
}

std::vector<Span> segment_bounds(std::size_t doc_length, const SegmentationConfig& config) {
    config.validate();
    if (doc_length == 0) throw DataError("cannot segment an empty document");
    std::vector<Span> out;
    const std::size_t stride = config.stride();
    for (std::size_t start = 0;; start += stride) {
        const std::size_t end = std::min(doc_length, start + config.segment_length);
        out.push_back({start, end});
        if (end == doc_length) break;
    }
    return out;
}

std::vector<Segment> segment_document(std::span<const TokenId> doc, const SegmentationConfig& config) {
    const auto bounds = segment_bounds(doc.size(), config);
    std::vector<Segment> out;
    out.reserve(bounds.size());
    for (std::size_t i = 0; i < bounds.size(); ++i) {
        Segment seg;
        seg.index = i;
        seg.doc_start = bounds[i].start;
        seg.doc_end = bounds[i].end;
        seg.token_ids.assign(doc.begin() + static_cast<std::ptrdiff_t>(seg.doc_start),
                             doc.begin() + static_cast<std::ptrdiff_t>(seg.doc_end));
        out.push_back(std::move(seg));
    }
    return out;
}

TokenIds build_model_input(std::span<const TokenId> query, const Segment& segment, std::size_t max_query_length) {
    const std::size_t q = std::min(query.size(), max_query_length);
    TokenIds out;
    out.reserve(q + segment.token_ids.size() + 3);
    out.push_back(SpecialTokens::kBegin);
    out.insert(out.end(), query.begin(), query.begin() + static_cast<std::ptrdiff_t>(q));
    out.push_back(SpecialTokens::kSeparator);
    out.insert(out.end(), segment.token_ids.begin(), segment.token_ids.end());
    out.push_back(SpecialTokens::kEnd);
    return out;
}

}  // namespace qfs
