#include "qfs/labeler.hpp"

#include <algorithm>
#include <fstream>

#include <nlohmann/json.hpp>

#include "qfs/errors.hpp"

namespace qfs {

using nlohmann::json;

std::size_t SegmentLabels::positives() const {
    return static_cast<std::size_t>(std::count(flags.begin(), flags.end(), true));
}

SegmentLabels label_by_gold_spans(std::span<const Span> segments, std::span<const Span> gold_spans) {
    SegmentLabels labels;
    labels.source = LabelSource::kAnnotated;
    labels.flags.reserve(segments.size());
    for (const auto& seg : segments) {
        const bool hit = std::any_of(gold_spans.begin(), gold_spans.end(),
                                     [&](const Span& g) { return seg.intersects(g); });
        labels.flags.push_back(hit);
    }
    return labels;
}

SegmentLabels label_by_bigram_overlap(std::span<const Span> segments, std::span<const std::string> document,
                                      std::span<const Tokens> summaries, int threshold) {
    if (threshold < 1) throw ConfigError("bigram threshold must be >= 1");
    SegmentLabels labels;
    labels.source = LabelSource::kBigram;
    labels.flags.reserve(segments.size());
    for (const auto& seg : segments) {
        if (seg.end > document.size()) throw DataError("segment extends past document end");
        const auto window = document.subspan(seg.start, seg.length());
        const bool hit = std::any_of(summaries.begin(), summaries.end(), [&](const Tokens& summary) {
            return bigram_overlap_count<std::string>(window, summary) >= static_cast<std::size_t>(threshold);
        });
        labels.flags.push_back(hit);
    }
    return labels;
}

std::vector<SegmentLabels> label_split(const DatasetSplit& split, const SegmentationConfig& segmentation,
                                       LabelMode mode, int threshold) {
    if (threshold < 1) throw ConfigError("bigram threshold must be >= 1");
    if (mode == LabelMode::kSpans) {
        std::vector<std::string> missing;
        for (const auto& inst : split.instances) {
            if (inst.gold_spans.empty()) missing.push_back(inst.id);
        }
        if (!missing.empty()) {
            std::string msg = "spans mode requires gold spans; instances without spans:";
            for (const auto& id : missing) msg += " " + id;
            throw DataError(msg);
        }
    }
    std::vector<SegmentLabels> out;
    out.reserve(split.instances.size());
    for (const auto& inst : split.instances) {
        const auto bounds = segment_bounds(inst.document.size(), segmentation);
        SegmentLabels labels = mode == LabelMode::kSpans
                                   ? label_by_gold_spans(bounds, inst.gold_spans)
                                   : label_by_bigram_overlap(bounds, inst.document, inst.references, threshold);
        labels.instance_id = inst.id;
        out.push_back(std::move(labels));
    }
    return out;
}

std::string_view to_string(LabelSource source) {
    return source == LabelSource::kAnnotated ? "annotated" : "bigram";
}

LabelSource parse_label_source(std::string_view text) {
    if (text == "annotated") return LabelSource::kAnnotated;
    if (text == "bigram") return LabelSource::kBigram;
    throw DataError("unknown label source '" + std::string(text) + "'");
}

void write_labels(const std::filesystem::path& path, std::span<const SegmentLabels> labels) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write labels file " + path.string());
    for (const auto& l : labels) {
        json flags = json::array();
        for (bool f : l.flags) flags.push_back(f);
        out << json{{"instance_id", l.instance_id}, {"flags", flags}, {"source", to_string(l.source)}}.dump() << '\n';
    }
    if (!out) throw DataError("write failed for " + path.string());
}

std::vector<SegmentLabels> read_labels(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot read labels file " + path.string());
    std::vector<SegmentLabels> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            const auto j = json::parse(line);
            SegmentLabels l;
            l.instance_id = j.at("instance_id").get<std::string>();
            for (const auto& f : j.at("flags")) l.flags.push_back(f.get<bool>());
            l.source = parse_label_source(j.at("source").get<std::string>());
            out.push_back(std::move(l));
        } catch (const json::exception& e) {
            throw DataError(path.string() + ":" + std::to_string(line_no) + ": malformed label record: " + e.what());
        }
    }
    return out;
}

std::map<std::string, SegmentLabels> index_labels(std::vector<SegmentLabels> labels) {
    std::map<std::string, SegmentLabels> out;
    for (auto& l : labels) {
        auto id = l.instance_id;
        if (!out.emplace(id, std::move(l)).second) throw DataError("duplicate labels for instance '" + id + "'");
    }
    return out;
}

}  // namespace qfs
