#include "qfs/evaluation.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

#include "qfs/errors.hpp"

namespace qfs {

using nlohmann::json;

RougeScore RougeScore::from_counts(double matches, double candidate_total, double reference_total) {
    RougeScore s;
    s.precision = candidate_total > 0 ? matches / candidate_total : 0.0;
    s.recall = reference_total > 0 ? matches / reference_total : 0.0;
    s.f1 = s.precision + s.recall > 0 ? 2.0 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
    return s;
}

namespace {

std::map<std::vector<std::string>, int> ngram_counts(std::span<const std::string> tokens, int n) {
    std::map<std::vector<std::string>, int> counts;
    const auto un = static_cast<std::size_t>(n);
    if (tokens.size() < un) return counts;
    for (std::size_t i = 0; i + un <= tokens.size(); ++i) {
        ++counts[std::vector<std::string>(tokens.begin() + static_cast<std::ptrdiff_t>(i),
                                          tokens.begin() + static_cast<std::ptrdiff_t>(i + un))];
    }
    return counts;
}

}  // namespace

RougeScore rouge_n(std::span<const std::string> candidate, std::span<const std::string> reference, int n) {
    if (n < 1) throw ConfigError("rouge_n requires n >= 1");
    const auto cand = ngram_counts(candidate, n);
    const auto ref = ngram_counts(reference, n);
    double matches = 0;
    for (const auto& [gram, count] : cand) {
        if (auto it = ref.find(gram); it != ref.end()) matches += std::min(count, it->second);
    }
    const auto total = [n](std::span<const std::string> t) {
        return t.size() >= static_cast<std::size_t>(n) ? static_cast<double>(t.size() - static_cast<std::size_t>(n) + 1)
                                                       : 0.0;
    };
    return RougeScore::from_counts(matches, total(candidate), total(reference));
}

std::size_t lcs_length(std::span<const std::string> a, std::span<const std::string> b) {
    std::vector<std::size_t> prev(b.size() + 1, 0);
    std::vector<std::size_t> cur(b.size() + 1, 0);
    for (std::size_t i = 1; i <= a.size(); ++i) {
        for (std::size_t j = 1; j <= b.size(); ++j) {
            cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
        }
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

RougeScore rouge_l(std::span<const std::string> candidate, std::span<const std::string> reference) {
    const auto l = static_cast<double>(lcs_length(candidate, reference));
    return RougeScore::from_counts(l, static_cast<double>(candidate.size()), static_cast<double>(reference.size()));
}

RougeScore rouge(RougeMetric metric, std::span<const std::string> candidate, std::span<const std::string> reference) {
    switch (metric) {
        case RougeMetric::kRouge1:
            return rouge_n(candidate, reference, 1);
        case RougeMetric::kRouge2:
            return rouge_n(candidate, reference, 2);
        case RougeMetric::kRougeL:
            return rouge_l(candidate, reference);
    }
    return {};
}

RougeScore score_multi_reference(std::span<const std::string> candidate, std::span<const Tokens> references,
                                 RougeMetric metric) {
    if (references.empty()) throw DataError("score_multi_reference: no references");
    RougeScore best = rouge(metric, candidate, references.front());
    for (std::size_t i = 1; i < references.size(); ++i) {
        const auto s = rouge(metric, candidate, references[i]);
        if (s.f1 > best.f1) best = s;
    }
    return best;
}

Tokens rouge_preprocess(std::span<const std::string> tokens) {
    Tokens out;
    out.reserve(tokens.size());
    for (const auto& t : tokens) {
        std::string lower = t;
        std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) {
            return c < 0x80 ? static_cast<char>(std::tolower(c)) : static_cast<char>(c);
        });
        out.push_back(std::move(lower));
    }
    return out;
}

EvalReport score_generations(const DatasetSplit& split, std::span<const Tokens> generations) {
    if (generations.size() != split.instances.size()) {
        throw StructuralError("generation count does not match split size");
    }
    EvalReport report;
    for (std::size_t i = 0; i < split.instances.size(); ++i) {
        const auto& inst = split.instances[i];
        InstanceScore s;
        s.id = inst.id;
        s.generation = generations[i];
        const Tokens cand = rouge_preprocess(generations[i]);
        std::vector<Tokens> refs;
        for (const auto& r : inst.references) refs.push_back(rouge_preprocess(r));
        s.rouge1 = score_multi_reference(cand, refs, RougeMetric::kRouge1);
        s.rouge2 = score_multi_reference(cand, refs, RougeMetric::kRouge2);
        s.rougeL = score_multi_reference(cand, refs, RougeMetric::kRougeL);
        report.rouge1 += s.rouge1.f1;
        report.rouge2 += s.rouge2.f1;
        report.rougeL += s.rougeL.f1;
        report.instances.push_back(std::move(s));
    }
    if (!report.instances.empty()) {
        const auto n = static_cast<double>(report.instances.size());
        report.rouge1 /= n;
        report.rouge2 /= n;
        report.rougeL /= n;
    }
    report.mean_rouge = (report.rouge1 + report.rouge2 + report.rougeL) / 3.0;
    return report;
}

EvalReport evaluate_split(Summarizer& summarizer, const DatasetSplit& split) {
    if (split.instances.empty()) throw ConfigError("cannot evaluate an empty split");
    std::vector<Tokens> generations;
    generations.reserve(split.instances.size());
    for (const auto& inst : split.instances) generations.push_back(summarizer.summarize(inst));
    return score_generations(split, generations);
}

namespace {

json score_json(const RougeScore& s) { return json{{"precision", s.precision}, {"recall", s.recall}, {"f1", s.f1}}; }

}  // namespace

json to_json(const EvalReport& report, bool include_instances) {
    json j{{"rouge1", report.rouge1},
           {"rouge2", report.rouge2},
           {"rougeL", report.rougeL},
           {"mean_rouge", report.mean_rouge},
           {"num_instances", report.instances.size()}};
    if (include_instances) {
        json per = json::array();
        for (const auto& s : report.instances) {
            per.push_back({{"id", s.id},
                           {"rouge1", score_json(s.rouge1)},
                           {"rouge2", score_json(s.rouge2)},
                           {"rougeL", score_json(s.rougeL)}});
        }
        j["instances"] = per;
    }
    return j;
}

std::string format_table(const EvalReport& report) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(4);
    os << "instances   " << report.instances.size() << '\n';
    os << "ROUGE-1 F   " << report.rouge1 << '\n';
    os << "ROUGE-2 F   " << report.rouge2 << '\n';
    os << "ROUGE-L F   " << report.rougeL << '\n';
    os << "mean ROUGE  " << report.mean_rouge << '\n';
    return os.str();
}

void write_eval_report(const std::filesystem::path& dir, const EvalReport& report) {
    std::filesystem::create_directories(dir);
    {
        std::ofstream out(dir / "report.json", std::ios::binary);
        if (!out) throw DataError("cannot write " + (dir / "report.json").string());
        out << to_json(report).dump(2) << '\n';
    }
    {
        std::ofstream out(dir / "report.txt", std::ios::binary);
        out << format_table(report);
    }
    std::ofstream out(dir / "generations.jsonl", std::ios::binary);
    for (const auto& s : report.instances) {
        out << json{{"id", s.id}, {"generation", join_tokens(s.generation)}, {"tokens", s.generation}}.dump() << '\n';
    }
    if (!out) throw DataError("cannot write generations into " + dir.string());
}

}  // namespace qfs
