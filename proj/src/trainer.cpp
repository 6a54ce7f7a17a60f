#include "qfs/trainer.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <memory>
#include <numeric>
#include <random>
#include <sstream>

#include "qfs/checkpoint.hpp"
#include "qfs/errors.hpp"

namespace qfs {

using nlohmann::json;

std::vector<TokenIds> build_segment_inputs(const TrainingInstance& instance, const Tokenizer& tokenizer,
                                           const SegmentationConfig& segmentation) {
    const TokenIds query = tokenizer.encode(instance.query);
    const TokenIds doc = tokenizer.encode(instance.document);
    std::vector<TokenIds> inputs;
    for (const auto& seg : segment_document(doc, segmentation)) {
        inputs.push_back(build_model_input(query, seg, segmentation.max_query_length));
    }
    return inputs;
}

std::vector<PreparedExample> prepare_examples(const DatasetSplit& split,
                                              const std::map<std::string, SegmentLabels>& labels,
                                              const Tokenizer& tokenizer, const SegmentationConfig& segmentation,
                                              std::size_t max_target_length) {
    std::vector<PreparedExample> out;
    for (const auto& inst : split.instances) {
        auto it = labels.find(inst.id);
        if (it == labels.end()) throw DataError("no segment labels for instance '" + inst.id + "'");
        auto inputs = build_segment_inputs(inst, tokenizer, segmentation);
        if (it->second.flags.size() != inputs.size()) {
            throw DataError("instance '" + inst.id + "': " + std::to_string(it->second.flags.size()) +
                            " label flags for " + std::to_string(inputs.size()) +
                            " segments (labels built with a different segmentation?)");
        }
        for (std::size_t r = 0; r < inst.references.size(); ++r) {
            PreparedExample ex;
            ex.id = inst.references.size() == 1 ? inst.id : inst.id + "/ref" + std::to_string(r);
            ex.inputs = inputs;
            ex.labels = it->second;
            ex.target.push_back(SpecialTokens::kBegin);
            const TokenIds ref = tokenizer.encode(inst.references[r]);
            const std::size_t keep = std::min(ref.size(), max_target_length > 0 ? max_target_length - 1 : 0);
            ex.target.insert(ex.target.end(), ref.begin(), ref.begin() + static_cast<std::ptrdiff_t>(keep));
            out.push_back(std::move(ex));
        }
    }
    return out;
}

namespace {

TokenIds generated_target(Seq2SeqModel& model, const ag::Var& memory, std::size_t max_length) {
    TokenIds target{SpecialTokens::kBegin};
    for (TokenId id : model.generate(memory, max_length)) {
        if (id == SpecialTokens::kEnd) break;
        target.push_back(id);
    }
    return target;
}

}  // namespace

InstanceLoss compute_instance_loss(Seq2SeqModel& model, const PreparedExample& example, const TrainConfig& config) {
    InstanceLoss out;
    const SegEncState state = model.segenc(example.inputs);
    const MemoryCache full = model.prepare_memory(state.memory);
    const ag::Var logits = model.decode_teacher_forced(full, example.target);
    const ag::Var gen = generation_loss(logits, example.target);
    const std::size_t n_segments = example.labels.flags.size();
    auto flags = std::make_unique<bool[]>(n_segments);
    std::copy(example.labels.flags.begin(), example.labels.flags.end(), flags.get());
    const ag::Var cls = classification_loss(state.segment_probs, std::span<const bool>(flags.get(), n_segments));

    const auto& p = state.segment_probs.value();
    out.segment_probs.assign(p.data(), p.data() + p.size());
    out.positives = select_positives(example.labels);
    out.negatives = select_negatives(out.segment_probs, example.labels, out.positives.size(),
                                     config.negative_min_probability);

    ag::Var cont = ag::Var::scalar(0.0);
    // With a zero contrastive weight the term cannot affect training, so the
    // extra decoder passes are skipped.
    if (config.lambda_cont > 0.0 && !out.positives.empty() && !out.negatives.empty()) {
        const auto max_len = static_cast<std::size_t>(config.max_generation_length);
        ContrastiveBatch batch;
        batch.positive_indices = out.positives;
        batch.negative_indices = out.negatives;
        batch.temperature = config.temperature;
        const ag::Var query_logits =
            config.query_embedding == EmbeddingSource::kGenerated
                ? model.decode_teacher_forced(full, generated_target(model, state.memory, max_len))
                : logits;
        batch.query_embedding = model.project(query_logits);
        std::vector<std::size_t> selected = out.positives;
        selected.insert(selected.end(), out.negatives.begin(), out.negatives.end());
        for (std::size_t idx : selected) {
            const ag::Var& seg_memory = state.per_segment[idx].token_states;
            const TokenIds target = config.instance_embedding == EmbeddingSource::kGenerated
                                        ? generated_target(model, seg_memory, max_len)
                                        : example.target;
            batch.instance_embeddings.push_back(model.project(model.decode_teacher_forced(seg_memory, target)));
        }
        batch.validate(example.labels);
        out.contrastive = contrastive_loss(batch);
        cont = out.contrastive.loss;
    } else {
        out.contrastive.loss = cont;
    }

    out.joint = joint_loss(gen, cls, cont, config.weights());
    out.losses = {gen.item(), cls.item(), cont.item(), out.joint.item()};
    return out;
}

Tokens ModelSummarizer::summarize(const TrainingInstance& instance) {
    ag::NoGradGuard no_grad;
    EvalModeGuard eval(model_);
    const auto inputs = build_segment_inputs(instance, tokenizer_, segmentation_);
    const auto encoded = model_.encode_segments(inputs);
    const auto ids = model_.generate(Seq2SeqModel::concat_memory(encoded), max_length_);
    return tokenizer_.decode(ids);
}

json to_json(const EpochReport& r) {
    return json{{"epoch", r.epoch},
                {"train_loss", to_json(r.train_loss)},
                {"rouge1", r.rouge1},
                {"rouge2", r.rouge2},
                {"rougeL", r.rougeL},
                {"mean_rouge", r.mean_rouge},
                {"checkpoint_path", r.checkpoint_path},
                {"ranking_accuracy", r.ranking_accuracy},
                {"classification_accuracy", r.classification_accuracy},
                {"contrastive_steps", r.contrastive_steps}};
}

namespace {

ModelConfig resolve_vocab(ModelConfig model, const Tokenizer& tokenizer) {
    if (model.vocab_size == 0) model.vocab_size = tokenizer.vocab_size();
    if (model.vocab_size != tokenizer.vocab_size()) {
        throw ConfigError("model.vocab_size " + std::to_string(model.vocab_size) + " does not match vocabulary size " +
                          std::to_string(tokenizer.vocab_size()));
    }
    return model;
}

// Shortest text that parses back to the same double.
std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

}  // namespace

Trainer::Trainer(TrainConfig config, SegmentationConfig segmentation, ModelConfig model, const Tokenizer& tokenizer)
    : config_(config),
      segmentation_(segmentation),
      tokenizer_(tokenizer),
      model_((config.validate(), segmentation.validate(), resolve_vocab(model, tokenizer))),
      optimizer_(config.adam()) {}

EvalReport Trainer::validate(const DatasetSplit& validation) {
    ModelSummarizer summarizer(model_, tokenizer_, segmentation_,
                               static_cast<std::size_t>(config_.max_generation_length));
    return evaluate_split(summarizer, validation);
}

std::vector<EpochReport> Trainer::fit(const TrainInputs& inputs, const TrainOutputs& outputs) {
    if (!inputs.train || !inputs.labels) throw ConfigError("training split and labels are required");
    const auto examples = prepare_examples(*inputs.train, *inputs.labels, tokenizer_, segmentation_,
                                           static_cast<std::size_t>(config_.max_target_length));
    if (examples.empty()) throw DataError("training split is empty");

    const bool write = !outputs.output_dir.empty();
    std::ofstream events;
    if (write) {
        std::filesystem::create_directories(outputs.output_dir);
        if (outputs.save_checkpoints) std::filesystem::create_directories(outputs.output_dir / "checkpoints");
        events.open(outputs.output_dir / "events.jsonl", std::ios::binary | std::ios::trunc);
        if (!events) throw DataError("cannot write event log in " + outputs.output_dir.string());
    }

    std::mt19937_64 order_rng(config_.seed);
    std::vector<std::size_t> order(examples.size());
    std::iota(order.begin(), order.end(), 0);
    const auto batch = static_cast<std::size_t>(config_.batch_size);
    std::vector<EpochReport> reports;
    std::int64_t step = 0;

    for (int epoch = 1; epoch <= config_.epochs; ++epoch) {
        model_.set_training(true);
        if (config_.shuffle) std::shuffle(order.begin(), order.end(), order_rng);

        LossBreakdown sum;
        std::size_t ranked = 0;
        std::size_t contrastive_steps = 0;
        std::size_t segments_correct = 0;
        std::size_t segments_total = 0;

        for (std::size_t start = 0; start < order.size(); start += batch) {
            const std::size_t end = std::min(order.size(), start + batch);
            model_.parameters().zero_grad();
            ++step;
            for (std::size_t k = start; k < end; ++k) {
                const auto& ex = examples[order[k]];
                InstanceLoss r = compute_instance_loss(model_, ex, config_);
                if (!r.losses.finite()) {
                    throw NumericError("non-finite loss at step " + std::to_string(step) + " on instance '" + ex.id +
                                       "': " + to_json(r.losses).dump());
                }
                ag::scale(r.joint, 1.0 / static_cast<double>(end - start)).backward();

                sum.generation += r.losses.generation;
                sum.classification += r.losses.classification;
                sum.contrastive += r.losses.contrastive;
                sum.joint += r.losses.joint;
                if (!r.contrastive.skipped) {
                    ++contrastive_steps;
                    if (r.contrastive.ranked_correctly()) ++ranked;
                }
                for (std::size_t i = 0; i < r.segment_probs.size(); ++i) {
                    segments_correct += (r.segment_probs[i] >= 0.5) == ex.labels.flags[i];
                    ++segments_total;
                }
                if (write) {
                    events << json{{"step", step},
                                   {"epoch", epoch},
                                   {"instance_id", ex.id},
                                   {"loss", to_json(r.losses)},
                                   {"n_pos", r.positives.size()},
                                   {"n_neg", r.negatives.size()}}
                                  .dump()
                           << '\n';
                }
            }
            const double norm = clip_grad_norm(model_.parameters(), config_.gradient_clip_norm);
            if (!std::isfinite(norm)) {
                throw NumericError("non-finite gradient norm at step " + std::to_string(step));
            }
            optimizer_.step(model_.parameters());
        }

        EpochReport report;
        report.epoch = epoch;
        const auto n = static_cast<double>(examples.size());
        report.train_loss = {sum.generation / n, sum.classification / n, sum.contrastive / n, sum.joint / n};
        report.contrastive_steps = contrastive_steps;
        report.ranking_accuracy =
            contrastive_steps ? static_cast<double>(ranked) / static_cast<double>(contrastive_steps) : 0.0;
        report.classification_accuracy =
            segments_total ? static_cast<double>(segments_correct) / static_cast<double>(segments_total) : 0.0;

        if (inputs.validation && !inputs.validation->instances.empty()) {
            const EvalReport eval = validate(*inputs.validation);
            report.rouge1 = eval.rouge1;
            report.rouge2 = eval.rouge2;
            report.rougeL = eval.rougeL;
            report.mean_rouge = (eval.rouge1 + eval.rouge2 + eval.rougeL) / 3.0;
        }
        if (write && outputs.save_checkpoints) {
            std::ostringstream name;
            name << "epoch-" << std::setw(3) << std::setfill('0') << epoch << ".ckpt";
            const auto path = outputs.output_dir / "checkpoints" / name.str();
            save_checkpoint(path, model_, tokenizer_, segmentation_, config_, &optimizer_, epoch);
            report.checkpoint_path = path.string();
        }
        reports.push_back(report);
        if (on_epoch) on_epoch(report);
    }

    if (write) {
        json all = json::array();
        for (const auto& r : reports) all.push_back(to_json(r));
        std::ofstream(outputs.output_dir / "reports.json", std::ios::binary) << all.dump(2) << '\n';
        const auto& best = select_checkpoint(reports);
        std::ofstream(outputs.output_dir / "best.json", std::ios::binary)
            << json{{"epoch", best.epoch}, {"checkpoint_path", best.checkpoint_path}, {"mean_rouge", best.mean_rouge}}
                   .dump(2)
            << '\n';
    }
    return reports;
}

std::vector<EpochReport> train(const TrainConfig& config, const SegmentationConfig& segmentation,
                               const ModelConfig& model, const TrainInputs& inputs, const TrainOutputs& outputs) {
    if (!inputs.tokenizer) throw ConfigError("a tokenizer is required");
    Trainer trainer(config, segmentation, model, *inputs.tokenizer);
    return trainer.fit(inputs, outputs);
}

const EpochReport& select_checkpoint(std::span<const EpochReport> reports) {
    if (reports.empty()) throw ConfigError("select_checkpoint: no epoch reports");
    const EpochReport* best = &reports.front();
    for (const auto& r : reports) {
        if (r.mean_rouge > best->mean_rouge) best = &r;
    }
    return *best;
}

std::vector<SweepRow> sweep_temperature(const TrainConfig& config, const SegmentationConfig& segmentation,
                                        const ModelConfig& model, const TrainInputs& inputs,
                                        std::span<const double> grid, const std::filesystem::path& output_dir) {
    std::vector<double> taus(grid.begin(), grid.end());
    for (double t : taus) {
        if (!(t > 0.0)) throw ConfigError("temperature grid values must be > 0");
    }
    std::sort(taus.begin(), taus.end());
    std::vector<SweepRow> rows;
    for (double tau : taus) {
        SweepRow row;
        row.temperature = tau;
        try {
            TrainConfig cell = config;
            cell.temperature = tau;
            TrainOutputs outputs;
            if (!output_dir.empty()) outputs.output_dir = output_dir / ("tau-" + format_double(tau));
            const auto reports = train(cell, segmentation, model, inputs, outputs);
            const auto& best = select_checkpoint(reports);
            row.mean_rouge = best.mean_rouge;
            row.best_epoch = best.epoch;
            row.ok = true;
        } catch (const std::exception& e) {
            row.mean_rouge = std::nan("");
            row.error = e.what();
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

std::string format_sweep_table(std::span<const SweepRow> rows) {
    std::ostringstream os;
    os << "tau\tmean_rouge\tbest_epoch\tstatus\n";
    for (const auto& r : rows) {
        os << format_double(r.temperature) << '\t';
        if (r.ok) {
            os << format_double(r.mean_rouge) << '\t' << r.best_epoch << "\tok\n";
        } else {
            os << "nan\t-\tfailed: " << r.error << '\n';
        }
    }
    return os.str();
}

}  // namespace qfs
