#include "qfs/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "qfs/errors.hpp"

namespace qfs {

using nlohmann::json;

namespace {

const json& require_field(const json& obj, const char* field, const std::string& record_id) {
    if (!obj.is_object() || !obj.contains(field) || obj.at(field).is_null()) {
        throw DataError("record '" + record_id + "': missing field '" + field + "'");
    }
    return obj.at(field);
}

std::string require_string(const json& obj, const char* field, const std::string& record_id) {
    const auto& v = require_field(obj, field, record_id);
    if (!v.is_string()) throw DataError("record '" + record_id + "': field '" + field + "' is not a string");
    return v.get<std::string>();
}

std::size_t as_index(const json& v, const std::string& record_id) {
    if (v.is_number_unsigned() || v.is_number_integer()) {
        const auto n = v.get<long long>();
        if (n < 0) throw DataError("record '" + record_id + "': negative turn index");
        return static_cast<std::size_t>(n);
    }
    if (v.is_string()) {
        try {
            std::size_t used = 0;
            const auto s = v.get<std::string>();
            const auto n = std::stoll(s, &used);
            if (used != s.size() || n < 0) throw std::invalid_argument(s);
            return static_cast<std::size_t>(n);
        } catch (const std::exception&) {
            throw DataError("record '" + record_id + "': bad turn index '" + v.get<std::string>() + "'");
        }
    }
    throw DataError("record '" + record_id + "': turn index must be a number or numeric string");
}

std::string record_id_of(const json& record, const std::string& fallback) {
    for (const char* key : {"id", "meeting_id"}) {
        if (record.is_object() && record.contains(key) && record.at(key).is_string()) {
            return record.at(key).get<std::string>();
        }
    }
    if (record.is_object() && record.contains("metadata") && record.at("metadata").is_object()) {
        const auto& meta = record.at("metadata");
        if (meta.contains("passage_id")) {
            const auto& pid = meta.at("passage_id");
            return pid.is_string() ? pid.get<std::string>() : pid.dump();
        }
    }
    return fallback;
}

Tokens tokens_from_json(const json& j, const std::string& id, const char* field) {
    if (!j.is_array()) throw DataError("instance '" + id + "': field '" + field + "' must be an array of tokens");
    Tokens out;
    out.reserve(j.size());
    for (const auto& t : j) {
        if (!t.is_string()) throw DataError("instance '" + id + "': field '" + field + "' holds a non-string token");
        out.push_back(t.get<std::string>());
    }
    return out;
}

}  // namespace

DatasetFormat parse_dataset_format(std::string_view text) {
    if (text == "qmsum") return DatasetFormat::kQmsum;
    if (text == "squality") return DatasetFormat::kSquality;
    if (text == "normalized") return DatasetFormat::kNormalized;
    throw ConfigError("unknown dataset format '" + std::string(text) + "' (expected qmsum, squality or normalized)");
}

std::string_view to_string(SplitName name) {
    switch (name) {
        case SplitName::kTrain:
            return "train";
        case SplitName::kValidation:
            return "validation";
        case SplitName::kTest:
            return "test";
    }
    return "train";
}

std::vector<Span> normalize_spans(std::vector<Span> spans) {
    std::sort(spans.begin(), spans.end(),
              [](const Span& a, const Span& b) { return a.start != b.start ? a.start < b.start : a.end < b.end; });
    std::vector<Span> out;
    for (const auto& s : spans) {
        if (!out.empty() && s.start < out.back().end) {
            out.back().end = std::max(out.back().end, s.end);
        } else {
            out.push_back(s);
        }
    }
    return out;
}

void validate_instance(const TrainingInstance& inst) {
    auto fail = [&](const std::string& what) { throw DataError("instance '" + inst.id + "': " + what); };
    if (inst.id.empty()) throw DataError("instance with empty id");
    if (inst.query.empty()) fail("empty query");
    if (inst.document.empty()) fail("empty document");
    if (inst.references.empty()) fail("no references");
    const std::size_t n = inst.document.size();
    for (std::size_t i = 0; i < inst.gold_spans.size(); ++i) {
        const auto& s = inst.gold_spans[i];
        if (!(s.start < s.end && s.end <= n)) {
            fail("gold span (" + std::to_string(s.start) + ", " + std::to_string(s.end) +
                 ") outside document of length " + std::to_string(n));
        }
        if (i > 0 && s.start < inst.gold_spans[i - 1].end) fail("gold spans unsorted or overlapping");
    }
}

std::vector<TrainingInstance> adapt_qmsum(const json& record, const Tokenizer& tokenizer, const std::string& fallback_id) {
    const std::string rid = record_id_of(record, fallback_id);
    const auto& turns = require_field(record, "meeting_transcripts", rid);
    if (!turns.is_array()) throw DataError("record '" + rid + "': field 'meeting_transcripts' is not a list");

    Tokens document;
    std::vector<std::size_t> turn_start;
    turn_start.reserve(turns.size() + 1);
    for (const auto& turn : turns) {
        turn_start.push_back(document.size());
        auto speaker = tokenizer.tokenize(require_string(turn, "speaker", rid));
        auto words = tokenizer.tokenize(require_string(turn, "content", rid));
        document.insert(document.end(), speaker.begin(), speaker.end());
        document.emplace_back(":");
        document.insert(document.end(), words.begin(), words.end());
    }
    turn_start.push_back(document.size());

    std::vector<TrainingInstance> out;
    auto add_queries = [&](const char* list_name, bool has_spans) {
        if (!record.contains(list_name)) return;
        const auto& list = record.at(list_name);
        if (!list.is_array()) throw DataError("record '" + rid + "': field '" + list_name + "' is not a list");
        for (const auto& q : list) {
            TrainingInstance inst;
            inst.id = rid + "#q" + std::to_string(out.size());
            inst.query = tokenizer.tokenize(require_string(q, "query", rid));
            inst.document = document;
            inst.references.push_back(tokenizer.tokenize(require_string(q, "answer", rid)));
            if (has_spans && q.contains("relevant_text_span")) {
                std::vector<Span> spans;
                for (const auto& pair : q.at("relevant_text_span")) {
                    if (!pair.is_array() || pair.size() != 2) {
                        throw DataError("record '" + rid + "': relevant_text_span entries must be [first, last] pairs");
                    }
                    const auto first = as_index(pair[0], rid);
                    const auto last = as_index(pair[1], rid);
                    if (first > last || last >= turns.size()) {
                        throw DataError("record '" + rid + "': turn span [" + std::to_string(first) + ", " +
                                        std::to_string(last) + "] outside transcript of " +
                                        std::to_string(turns.size()) + " turns");
                    }
                    spans.push_back({turn_start[first], turn_start[last + 1]});
                }
                inst.gold_spans = normalize_spans(std::move(spans));
            }
            out.push_back(std::move(inst));
        }
    };
    add_queries("general_query_list", false);
    add_queries("specific_query_list", true);
    if (out.empty() && record.contains("query_list")) add_queries("query_list", true);

    for (const auto& inst : out) validate_instance(inst);
    return out;
}

std::vector<TrainingInstance> adapt_squality(const json& record, const Tokenizer& tokenizer,
                                             const std::string& fallback_id) {
    const std::string rid = record_id_of(record, fallback_id);
    const Tokens document = tokenizer.tokenize(require_string(record, "document", rid));
    const auto& questions = require_field(record, "questions", rid);
    if (!questions.is_array()) throw DataError("record '" + rid + "': field 'questions' is not a list");

    std::vector<TrainingInstance> out;
    for (std::size_t k = 0; k < questions.size(); ++k) {
        const auto& q = questions[k];
        TrainingInstance inst;
        std::string number = std::to_string(k);
        if (q.contains("question_number")) {
            const auto& n = q.at("question_number");
            number = n.is_string() ? n.get<std::string>() : n.dump();
        }
        inst.id = rid + "#q" + number;
        inst.query = tokenizer.tokenize(require_string(q, "question_text", rid));
        inst.document = document;
        const auto& responses = require_field(q, "responses", rid);
        if (!responses.is_array() || responses.empty()) {
            throw DataError("record '" + rid + "': question " + number + " has no responses");
        }
        for (const auto& r : responses) {
            inst.references.push_back(tokenizer.tokenize(require_string(r, "response_text", rid)));
        }
        out.push_back(std::move(inst));
    }
    for (const auto& inst : out) validate_instance(inst);
    return out;
}

json to_json(const TrainingInstance& inst) {
    json spans = json::array();
    for (const auto& s : inst.gold_spans) spans.push_back({s.start, s.end});
    return json{{"id", inst.id},
                {"query", inst.query},
                {"document", inst.document},
                {"references", inst.references},
                {"gold_spans", spans}};
}

TrainingInstance instance_from_json(const json& j) {
    TrainingInstance inst;
    if (!j.is_object()) throw DataError("normalized record is not an object");
    inst.id = require_string(j, "id", "<unknown>");
    inst.query = tokens_from_json(require_field(j, "query", inst.id), inst.id, "query");
    inst.document = tokens_from_json(require_field(j, "document", inst.id), inst.id, "document");
    const auto& refs = require_field(j, "references", inst.id);
    if (!refs.is_array()) throw DataError("instance '" + inst.id + "': field 'references' must be an array");
    for (const auto& r : refs) inst.references.push_back(tokens_from_json(r, inst.id, "references"));
    if (j.contains("gold_spans")) {
        std::vector<Span> spans;
        for (const auto& s : j.at("gold_spans")) {
            if (!s.is_array() || s.size() != 2 || !s[0].is_number_integer() || !s[1].is_number_integer() ||
                s[0].get<long long>() < 0 || s[1].get<long long>() < 0) {
                throw DataError("instance '" + inst.id + "': gold_spans entries must be [start, end] pairs");
            }
            spans.push_back({s[0].get<std::size_t>(), s[1].get<std::size_t>()});
        }
        // Range checks run on the raw spans so that a bad end is reported
        // as such rather than merged away.
        for (const auto& s : spans) {
            if (!(s.start < s.end && s.end <= inst.document.size())) {
                throw DataError("instance '" + inst.id + "': gold span (" + std::to_string(s.start) + ", " +
                                std::to_string(s.end) + ") outside document of length " +
                                std::to_string(inst.document.size()));
            }
        }
        inst.gold_spans = normalize_spans(std::move(spans));
    }
    return inst;
}

LoadedSplit load_split(const std::filesystem::path& path, DatasetFormat format, SplitName name,
                       const Tokenizer& tokenizer) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot read dataset file " + path.string());
    LoadedSplit result;
    result.split.name = name;
    std::set<std::string> seen;
    std::string line;
    std::size_t line_no = 0;
    const std::string stem = path.stem().string();
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json record;
        try {
            record = json::parse(line);
        } catch (const json::parse_error& e) {
            throw DataError(path.string() + ":" + std::to_string(line_no) + ": malformed record: " + e.what());
        }
        std::vector<TrainingInstance> batch;
        const std::string fallback = stem + "-" + std::to_string(line_no);
        try {
            switch (format) {
                case DatasetFormat::kQmsum:
                    batch = adapt_qmsum(record, tokenizer, fallback);
                    break;
                case DatasetFormat::kSquality:
                    batch = adapt_squality(record, tokenizer, fallback);
                    break;
                case DatasetFormat::kNormalized:
                    batch.push_back(instance_from_json(record));
                    validate_instance(batch.back());
                    break;
            }
        } catch (const DataError& e) {
            throw DataError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
        for (auto& inst : batch) {
            if (!seen.insert(inst.id).second) {
                throw DataError(path.string() + ":" + std::to_string(line_no) + ": duplicate instance id '" +
                                inst.id + "'");
            }
            result.split.instances.push_back(std::move(inst));
        }
    }
    if (result.split.instances.empty()) result.warnings.push_back(path.string() + ": no instances (empty split)");
    return result;
}

LoadedSplit load_directory(const std::filesystem::path& dir, DatasetFormat format, const Tokenizer& tokenizer) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) {
        if (fs::is_regular_file(dir)) return load_split(dir, format, SplitName::kTrain, tokenizer);
        throw DataError("input directory " + dir.string() + " does not exist");
    }
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        const auto ext = entry.path().extension();
        if (entry.is_regular_file() && (ext == ".json" || ext == ".jsonl")) files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());

    LoadedSplit result;
    std::set<std::string> seen;
    for (const auto& file : files) {
        LoadedSplit part;
        if (file.extension() == ".jsonl") {
            part = load_split(file, format, SplitName::kTrain, tokenizer);
        } else {
            std::ifstream in(file);
            json record;
            try {
                record = json::parse(in);
            } catch (const json::parse_error& e) {
                throw DataError(file.string() + ": malformed record: " + e.what());
            }
            const auto fallback = file.stem().string();
            try {
                if (format == DatasetFormat::kQmsum) {
                    part.split.instances = adapt_qmsum(record, tokenizer, fallback);
                } else if (format == DatasetFormat::kSquality) {
                    part.split.instances = adapt_squality(record, tokenizer, fallback);
                } else {
                    part.split.instances.push_back(instance_from_json(record));
                    validate_instance(part.split.instances.back());
                }
            } catch (const DataError& e) {
                throw DataError(file.string() + ": " + e.what());
            }
        }
        for (auto& inst : part.split.instances) {
            if (!seen.insert(inst.id).second) {
                throw DataError(file.string() + ": duplicate instance id '" + inst.id + "'");
            }
            result.split.instances.push_back(std::move(inst));
        }
    }
    if (files.empty()) result.warnings.push_back(dir.string() + ": no .json/.jsonl files found");
    if (result.split.instances.empty()) result.warnings.push_back(dir.string() + ": no instances (empty split)");
    return result;
}

void write_split(const std::filesystem::path& path, const DatasetSplit& split) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write dataset file " + path.string());
    for (const auto& inst : split.instances) out << to_json(inst).dump() << '\n';
    if (!out) throw DataError("write failed for " + path.string());
}

}  // namespace qfs
