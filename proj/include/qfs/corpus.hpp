#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "qfs/segmenter.hpp"
#include "qfs/tokenizer.hpp"

namespace qfs {

struct TrainingInstance {
    std::string id;
    Tokens query;
    Tokens document;
    std::vector<Tokens> references;
    std::vector<Span> gold_spans;

    friend bool operator==(const TrainingInstance&, const TrainingInstance&) = default;
};

enum class SplitName { kTrain, kValidation, kTest };

struct DatasetSplit {
    SplitName name = SplitName::kTrain;
    std::vector<TrainingInstance> instances;
};

enum class DatasetFormat { kQmsum, kSquality, kNormalized };

DatasetFormat parse_dataset_format(std::string_view text);
std::string_view to_string(SplitName name);

/// Sorts spans by start and merges overlapping ones. Touching spans
/// ([a,b) and [b,c)) stay separate.
std::vector<Span> normalize_spans(std::vector<Span> spans);

/// Throws DataError naming the instance if any invariant fails.
void validate_instance(const TrainingInstance& instance);

/// One instance per query (general and specific lists). Each transcript
/// turn contributes `speaker : utterance` tokens; relevant turn spans
/// [first, last] (inclusive turn indices) become the token interval
/// covering those turns.
std::vector<TrainingInstance> adapt_qmsum(const nlohmann::json& record, const Tokenizer& tokenizer,
                                          const std::string& fallback_id = "");

/// One instance per question, holding every reference response. No gold
/// spans; the bigram labeler supplies segment labels for this data.
std::vector<TrainingInstance> adapt_squality(const nlohmann::json& record, const Tokenizer& tokenizer,
                                             const std::string& fallback_id = "");

nlohmann::json to_json(const TrainingInstance& instance);
TrainingInstance instance_from_json(const nlohmann::json& j);

struct LoadedSplit {
    DatasetSplit split;
    std::vector<std::string> warnings;
};

/// Reads line-delimited records. For the upstream formats each line is a
/// raw record and ids fall back to `<file stem>-<line>` when absent.
LoadedSplit load_split(const std::filesystem::path& path, DatasetFormat format,
                       SplitName name = SplitName::kTrain, const Tokenizer& tokenizer = Tokenizer{});

/// Reads every *.json / *.jsonl file in a directory (sorted by name). A
/// `.json` file is one record; a `.jsonl` file holds one per line.
LoadedSplit load_directory(const std::filesystem::path& dir, DatasetFormat format,
                           const Tokenizer& tokenizer = Tokenizer{});

void write_split(const std::filesystem::path& path, const DatasetSplit& split);

}  // namespace qfs
