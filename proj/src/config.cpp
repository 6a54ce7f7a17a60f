#include "qfs/config.hpp"

#include <cmath>
#include <fstream>
#include <initializer_list>
#include <set>

#include "qfs/errors.hpp"

namespace qfs {

using nlohmann::json;

namespace {

void reject_unknown(const json& j, const char* section, std::initializer_list<const char*> known) {
    if (!j.is_object()) throw ConfigError(std::string("config section '") + section + "' must be an object");
    const std::set<std::string> names(known.begin(), known.end());
    for (const auto& [key, value] : j.items()) {
        if (!names.contains(key)) throw ConfigError(std::string("unknown field '") + section + "." + key + "'");
    }
}

std::string to_string(EmbeddingSource s) { return s == EmbeddingSource::kTeacherForced ? "teacher_forced" : "generated"; }

EmbeddingSource parse_embedding_source(const std::string& s) {
    if (s == "teacher_forced") return EmbeddingSource::kTeacherForced;
    if (s == "generated") return EmbeddingSource::kGenerated;
    throw ConfigError("embedding source must be 'teacher_forced' or 'generated', got '" + s + "'");
}

}  // namespace

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0)) throw ConfigError("train.learning_rate must be > 0");
    if (weight_decay < 0.0) throw ConfigError("train.weight_decay must be >= 0");
    if (epochs < 1) throw ConfigError("train.epochs must be >= 1");
    if (lambda_gen < 0 || lambda_cls < 0 || lambda_cont < 0) {
        throw ConfigError("train.lambda_gen, train.lambda_cls and train.lambda_cont must be non-negative");
    }
    const double sum = lambda_gen + lambda_cls + lambda_cont;
    if (std::abs(sum - 1.0) > 1e-9) {
        throw ConfigError("train.lambda_gen + train.lambda_cls + train.lambda_cont must sum to 1 (got " +
                          std::to_string(sum) + ")");
    }
    if (!(temperature > 0.0)) throw ConfigError("train.temperature must be > 0");
    if (batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
    if (!(gradient_clip_norm > 0.0)) throw ConfigError("train.gradient_clip_norm must be > 0");
    if (max_generation_length < 1) throw ConfigError("train.max_generation_length must be >= 1");
    if (max_target_length < 1) throw ConfigError("train.max_target_length must be >= 1");
    if (!(adam_beta1 >= 0 && adam_beta1 < 1 && adam_beta2 >= 0 && adam_beta2 < 1 && adam_epsilon > 0)) {
        throw ConfigError("train.adam_beta1/adam_beta2 must be in [0, 1) and adam_epsilon > 0");
    }
}

void RunConfig::validate() const {
    segmentation.validate();
    train.validate();
    if (data.min_frequency < 1) throw ConfigError("data.min_frequency must be >= 1");
    // vocab_size may be 0 here: it is filled from the vocabulary at train time.
    ModelConfig probe = model;
    if (probe.vocab_size == 0) probe.vocab_size = SpecialTokens::kCount;
    probe.validate();
}

void to_json(json& j, const SegmentationConfig& c) {
    j = json{{"segment_length", c.segment_length},
             {"overlap_fraction", c.overlap_fraction},
             {"max_query_length", c.max_query_length}};
}

void from_json(const json& j, SegmentationConfig& c) {
    reject_unknown(j, "segmentation", {"segment_length", "overlap_fraction", "max_query_length"});
    c.segment_length = j.value("segment_length", c.segment_length);
    c.overlap_fraction = j.value("overlap_fraction", c.overlap_fraction);
    c.max_query_length = j.value("max_query_length", c.max_query_length);
}

void to_json(json& j, const TrainConfig& c) {
    j = json{{"learning_rate", c.learning_rate},
             {"weight_decay", c.weight_decay},
             {"epochs", c.epochs},
             {"lambda_gen", c.lambda_gen},
             {"lambda_cls", c.lambda_cls},
             {"lambda_cont", c.lambda_cont},
             {"temperature", c.temperature},
             {"batch_size", c.batch_size},
             {"gradient_clip_norm", c.gradient_clip_norm},
             {"seed", c.seed},
             {"adam_beta1", c.adam_beta1},
             {"adam_beta2", c.adam_beta2},
             {"adam_epsilon", c.adam_epsilon},
             {"max_generation_length", c.max_generation_length},
             {"max_target_length", c.max_target_length},
             {"query_embedding", to_string(c.query_embedding)},
             {"instance_embedding", to_string(c.instance_embedding)},
             {"negative_min_probability", c.negative_min_probability},
             {"shuffle", c.shuffle}};
}

void from_json(const json& j, TrainConfig& c) {
    reject_unknown(j, "train",
                   {"learning_rate", "weight_decay", "epochs", "lambda_gen", "lambda_cls", "lambda_cont",
                    "temperature", "batch_size", "gradient_clip_norm", "seed", "adam_beta1", "adam_beta2",
                    "adam_epsilon", "max_generation_length", "max_target_length", "query_embedding",
                    "instance_embedding", "negative_min_probability", "shuffle"});
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.weight_decay = j.value("weight_decay", c.weight_decay);
    c.epochs = j.value("epochs", c.epochs);
    c.lambda_gen = j.value("lambda_gen", c.lambda_gen);
    c.lambda_cls = j.value("lambda_cls", c.lambda_cls);
    c.lambda_cont = j.value("lambda_cont", c.lambda_cont);
    c.temperature = j.value("temperature", c.temperature);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.gradient_clip_norm = j.value("gradient_clip_norm", c.gradient_clip_norm);
    c.seed = j.value("seed", c.seed);
    c.adam_beta1 = j.value("adam_beta1", c.adam_beta1);
    c.adam_beta2 = j.value("adam_beta2", c.adam_beta2);
    c.adam_epsilon = j.value("adam_epsilon", c.adam_epsilon);
    c.max_generation_length = j.value("max_generation_length", c.max_generation_length);
    c.max_target_length = j.value("max_target_length", c.max_target_length);
    if (j.contains("query_embedding")) c.query_embedding = parse_embedding_source(j.at("query_embedding"));
    if (j.contains("instance_embedding")) c.instance_embedding = parse_embedding_source(j.at("instance_embedding"));
    c.negative_min_probability = j.value("negative_min_probability", c.negative_min_probability);
    c.shuffle = j.value("shuffle", c.shuffle);
}

void to_json(json& j, const DataConfig& c) {
    j = json{{"train", c.train},
             {"validation", c.validation},
             {"train_labels", c.train_labels},
             {"vocabulary", c.vocabulary},
             {"min_frequency", c.min_frequency},
             {"lowercase", c.lowercase}};
}

void from_json(const json& j, DataConfig& c) {
    reject_unknown(j, "data", {"train", "validation", "train_labels", "vocabulary", "min_frequency", "lowercase"});
    c.train = j.value("train", c.train);
    c.validation = j.value("validation", c.validation);
    c.train_labels = j.value("train_labels", c.train_labels);
    c.vocabulary = j.value("vocabulary", c.vocabulary);
    c.min_frequency = j.value("min_frequency", c.min_frequency);
    c.lowercase = j.value("lowercase", c.lowercase);
}

void to_json(json& j, const RunConfig& c) {
    j = json{{"data", c.data},
             {"segmentation", c.segmentation},
             {"model", c.model},
             {"train", c.train},
             {"output_dir", c.output_dir}};
}

void from_json(const json& j, RunConfig& c) {
    reject_unknown(j, "<root>", {"data", "segmentation", "model", "train", "output_dir"});
    if (j.contains("data")) c.data = j.at("data").get<DataConfig>();
    if (j.contains("segmentation")) c.segmentation = j.at("segmentation").get<SegmentationConfig>();
    if (j.contains("model")) c.model = j.at("model").get<ModelConfig>();
    if (j.contains("train")) c.train = j.at("train").get<TrainConfig>();
    c.output_dir = j.value("output_dir", c.output_dir);
}

RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file " + path.string());
    RunConfig config;
    try {
        config = json::parse(in).get<RunConfig>();
    } catch (const json::exception& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    const auto base = path.parent_path();
    auto resolve = [&](std::string& p) {
        if (!p.empty() && std::filesystem::path(p).is_relative()) p = (base / p).lexically_normal().string();
    };
    resolve(config.data.train);
    resolve(config.data.validation);
    resolve(config.data.train_labels);
    resolve(config.data.vocabulary);
    resolve(config.output_dir);
    config.validate();
    return config;
}

}  // namespace qfs
