#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "qfs/config.hpp"
#include "qfs/contrastive.hpp"
#include "qfs/corpus.hpp"
#include "qfs/evaluation.hpp"
#include "qfs/labeler.hpp"
#include "qfs/losses.hpp"
#include "qfs/model.hpp"

namespace qfs {

/// One (instance, reference) pair in model-ready form.
struct PreparedExample {
    std::string id;
    std::vector<TokenIds> inputs;  // one per segment
    SegmentLabels labels;
    TokenIds target;               // <s> + reference tokens
};

/// Expands every instance into one example per reference. Labels must
/// exist for every instance and match its segment count.
std::vector<PreparedExample> prepare_examples(const DatasetSplit& split,
                                              const std::map<std::string, SegmentLabels>& labels,
                                              const Tokenizer& tokenizer, const SegmentationConfig& segmentation,
                                              std::size_t max_target_length);

std::vector<TokenIds> build_segment_inputs(const TrainingInstance& instance, const Tokenizer& tokenizer,
                                           const SegmentationConfig& segmentation);

struct InstanceLoss {
    LossBreakdown losses;
    ag::Var joint;
    std::vector<double> segment_probs;
    std::vector<std::size_t> positives;
    std::vector<std::size_t> negatives;
    ContrastiveOutput contrastive;
};

/// Full forward pass for one example: encode segments, score them, decode
/// the gold summary over the concatenated memory, select contrastive
/// instances and combine the three losses.
InstanceLoss compute_instance_loss(Seq2SeqModel& model, const PreparedExample& example, const TrainConfig& config);

/// Greedy summaries from a trained model.
class ModelSummarizer : public Summarizer {
public:
    ModelSummarizer(Seq2SeqModel& model, const Tokenizer& tokenizer, SegmentationConfig segmentation,
                    std::size_t max_length)
        : model_(model), tokenizer_(tokenizer), segmentation_(segmentation), max_length_(max_length) {}

    Tokens summarize(const TrainingInstance& instance) override;

private:
    Seq2SeqModel& model_;
    const Tokenizer& tokenizer_;
    SegmentationConfig segmentation_;
    std::size_t max_length_;
};

struct EpochReport {
    int epoch = 0;
    LossBreakdown train_loss;  // mean over training examples
    double rouge1 = 0.0;
    double rouge2 = 0.0;
    double rougeL = 0.0;
    double mean_rouge = 0.0;
    std::string checkpoint_path;

    // Training-time diagnostics.
    double ranking_accuracy = 0.0;  // contrastive steps with every positive above every negative
    double classification_accuracy = 0.0;
    std::size_t contrastive_steps = 0;

    friend bool operator==(const EpochReport&, const EpochReport&) = default;
};

nlohmann::json to_json(const EpochReport& r);

struct TrainOutputs {
    /// Empty: nothing is written (no checkpoints, no event log).
    std::filesystem::path output_dir;
    bool save_checkpoints = true;
};

struct TrainInputs {
    const DatasetSplit* train = nullptr;
    const DatasetSplit* validation = nullptr;
    const std::map<std::string, SegmentLabels>* labels = nullptr;
    const Tokenizer* tokenizer = nullptr;
};

class Trainer {
public:
    /// A zero `model.vocab_size` is filled from the tokenizer.
    Trainer(TrainConfig config, SegmentationConfig segmentation, ModelConfig model, const Tokenizer& tokenizer);

    std::vector<EpochReport> fit(const TrainInputs& inputs, const TrainOutputs& outputs);

    Seq2SeqModel& model() { return model_; }
    const AdamW& optimizer() const { return optimizer_; }

    /// Called after every epoch's report is built.
    std::function<void(const EpochReport&)> on_epoch;

private:
    EvalReport validate(const DatasetSplit& validation);

    TrainConfig config_;
    SegmentationConfig segmentation_;
    const Tokenizer& tokenizer_;
    Seq2SeqModel model_;
    AdamW optimizer_;
};

/// Convenience wrapper: builds a Trainer and runs fit().
std::vector<EpochReport> train(const TrainConfig& config, const SegmentationConfig& segmentation,
                               const ModelConfig& model, const TrainInputs& inputs, const TrainOutputs& outputs);

/// Report with the highest mean ROUGE; the earliest epoch wins ties.
const EpochReport& select_checkpoint(std::span<const EpochReport> reports);

struct SweepRow {
    double temperature = 0.0;
    double mean_rouge = 0.0;  // of the selected checkpoint
    int best_epoch = 0;
    bool ok = false;
    std::string error;
};

/// One full train + validate run per temperature, rows sorted by
/// temperature. A failing cell is recorded and the sweep continues.
std::vector<SweepRow> sweep_temperature(const TrainConfig& config, const SegmentationConfig& segmentation,
                                        const ModelConfig& model, const TrainInputs& inputs,
                                        std::span<const double> grid, const std::filesystem::path& output_dir);

std::string format_sweep_table(std::span<const SweepRow> rows);

}  // namespace qfs
