#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "qfs/corpus.hpp"

namespace qfs {

struct RougeScore {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;

    static RougeScore from_counts(double matches, double candidate_total, double reference_total);
    friend bool operator==(const RougeScore&, const RougeScore&) = default;
};

enum class RougeMetric { kRouge1, kRouge2, kRougeL };

/// Clipped n-gram multiset overlap.
RougeScore rouge_n(std::span<const std::string> candidate, std::span<const std::string> reference, int n);

/// Length of the longest common subsequence (dynamic programming).
std::size_t lcs_length(std::span<const std::string> a, std::span<const std::string> b);

/// Whole-sequence LCS; no sentence splitting.
RougeScore rouge_l(std::span<const std::string> candidate, std::span<const std::string> reference);

RougeScore rouge(RougeMetric metric, std::span<const std::string> candidate, std::span<const std::string> reference);

/// Best f1 over references, reported with that reference's precision and
/// recall. The first reference wins ties.
RougeScore score_multi_reference(std::span<const std::string> candidate, std::span<const Tokens> references,
                                 RougeMetric metric);

/// Lowercases every token before scoring.
Tokens rouge_preprocess(std::span<const std::string> tokens);

struct InstanceScore {
    std::string id;
    Tokens generation;
    RougeScore rouge1;
    RougeScore rouge2;
    RougeScore rougeL;
};

struct EvalReport {
    std::vector<InstanceScore> instances;
    double rouge1 = 0.0;
    double rouge2 = 0.0;
    double rougeL = 0.0;
    double mean_rouge = 0.0;
};

/// Produces a summary for one instance.
class Summarizer {
public:
    virtual ~Summarizer() = default;
    virtual Tokens summarize(const TrainingInstance& instance) = 0;
};

/// Returns the first reference verbatim.
class CopyReferenceSummarizer : public Summarizer {
public:
    Tokens summarize(const TrainingInstance& instance) override { return instance.references.front(); }
};

class EmptySummarizer : public Summarizer {
public:
    Tokens summarize(const TrainingInstance&) override { return {}; }
};

/// Scores every instance in split order; corpus means are plain averages of
/// per-instance f1 values.
EvalReport evaluate_split(Summarizer& summarizer, const DatasetSplit& split);

/// Aggregates already-generated outputs (aligned with split.instances).
EvalReport score_generations(const DatasetSplit& split, std::span<const Tokens> generations);

nlohmann::json to_json(const EvalReport& report, bool include_instances = true);
std::string format_table(const EvalReport& report);

/// Writes report.json, report.txt and generations.jsonl into `dir`.
void write_eval_report(const std::filesystem::path& dir, const EvalReport& report);

}  // namespace qfs
