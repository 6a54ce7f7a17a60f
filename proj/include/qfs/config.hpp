#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "qfs/losses.hpp"
#include "qfs/model.hpp"
#include "qfs/optimizer.hpp"
#include "qfs/segmenter.hpp"

namespace qfs {

/// How the decoder input for a projected embedding is obtained.
enum class EmbeddingSource {
    kTeacherForced,  // gold summary
    kGenerated,      // greedy generation from the same memory
};

struct TrainConfig {
    double learning_rate = 5e-5;
    double weight_decay = 0.01;
    int epochs = 10;
    double lambda_gen = 0.6;
    double lambda_cls = 0.2;
    double lambda_cont = 0.2;
    double temperature = 0.6;
    int batch_size = 1;
    double gradient_clip_norm = 1.0;
    std::uint64_t seed = 0;

    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_epsilon = 1e-8;
    int max_generation_length = 128;
    int max_target_length = 512;
    EmbeddingSource query_embedding = EmbeddingSource::kTeacherForced;
    EmbeddingSource instance_embedding = EmbeddingSource::kTeacherForced;
    /// Non-gold segments below this probability are never negatives.
    double negative_min_probability = 0.0;
    bool shuffle = true;

    void validate() const;
    LossWeights weights() const { return {lambda_gen, lambda_cls, lambda_cont}; }
    AdamWConfig adam() const { return {learning_rate, weight_decay, adam_beta1, adam_beta2, adam_epsilon}; }
    friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

struct DataConfig {
    std::string train;
    std::string validation;
    std::string train_labels;
    /// Optional vocabulary file; empty builds one from the training split.
    std::string vocabulary;
    int min_frequency = 1;
    bool lowercase = true;
};

/// Everything a training run reads from its config file.
struct RunConfig {
    DataConfig data;
    SegmentationConfig segmentation;
    ModelConfig model;
    TrainConfig train;
    std::string output_dir = "runs/default";

    void validate() const;
};

void to_json(nlohmann::json& j, const SegmentationConfig& c);
void from_json(const nlohmann::json& j, SegmentationConfig& c);
void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);
void to_json(nlohmann::json& j, const DataConfig& c);
void from_json(const nlohmann::json& j, DataConfig& c);
void to_json(nlohmann::json& j, const RunConfig& c);
void from_json(const nlohmann::json& j, RunConfig& c);

/// Parses and validates a config file. Relative data paths resolve against
/// the file's directory.
RunConfig load_run_config(const std::filesystem::path& path);

}  // namespace qfs
