#include "qfs/cli.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "qfs/checkpoint.hpp"
#include "qfs/config.hpp"
#include "qfs/corpus.hpp"
#include "qfs/errors.hpp"
#include "qfs/evaluation.hpp"
#include "qfs/labeler.hpp"
#include "qfs/manifest.hpp"
#include "qfs/synthetic.hpp"
#include "qfs/trainer.hpp"

namespace qfs::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path sidecar_manifest(const fs::path& output) { return fs::path(output.string() + ".manifest.json"); }

void ensure_parent(const fs::path& path) {
    if (path.has_parent_path()) {
        std::error_code ec;
        fs::create_directories(path.parent_path(), ec);
        if (ec) throw DataError("cannot create directory " + path.parent_path().string() + ": " + ec.message());
    }
}

DatasetSplit read_dataset(const fs::path& path, SplitName name, std::ostream& err) {
    if (!fs::exists(path)) throw DataError("dataset not found: " + path.string());
    auto loaded = load_split(path, DatasetFormat::kNormalized, name);
    for (const auto& w : loaded.warnings) err << "warning: " << w << '\n';
    return std::move(loaded.split);
}

// ---------------------------------------------------------------- ingest

struct IngestArgs {
    std::string input;
    std::string format;
    std::string output;
    bool no_lowercase = false;
};

void cmd_ingest(const IngestArgs& a, std::ostream& out, std::ostream& err) {
    RunManifest manifest{"ingest", {}, {a.input}, {a.output}, 0, utc_timestamp(), {}, {}};
    const DatasetFormat format = parse_dataset_format(a.format);
    if (format == DatasetFormat::kNormalized) throw ConfigError("ingest --format must be 'qmsum' or 'squality'");
    if (!fs::exists(a.input)) throw DataError("input not found: " + a.input);
    const Tokenizer tokenizer(!a.no_lowercase);
    LoadedSplit loaded = fs::is_directory(a.input) ? load_directory(a.input, format, tokenizer)
                                                  : load_split(a.input, format, SplitName::kTrain, tokenizer);
    for (const auto& w : loaded.warnings) err << "warning: " << w << '\n';
    ensure_parent(a.output);
    write_split(a.output, loaded.split);
    out << loaded.split.instances.size() << " instances written to " << a.output << '\n';
    manifest.config = {{"format", a.format}, {"lowercase", !a.no_lowercase}};
    manifest.finished_at = utc_timestamp();
    write_manifest(sidecar_manifest(a.output), manifest);
}

// ----------------------------------------------------------------- label

struct LabelArgs {
    std::string dataset;
    std::string output;
    std::string mode;
    int threshold = kDefaultBigramThreshold;
    std::string config;
    std::optional<std::size_t> segment_length;
    std::optional<double> overlap;
};

double quantile(std::vector<double> v, double q) {
    std::sort(v.begin(), v.end());
    const double pos = q * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(pos);
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

void cmd_label(const LabelArgs& a, std::ostream& out, std::ostream& err) {
    RunManifest manifest{"label", {}, {a.dataset}, {a.output}, 0, utc_timestamp(), {}, {}};
    if (a.threshold < 1) throw ConfigError("--threshold must be >= 1 (got " + std::to_string(a.threshold) + ")");
    LabelMode mode;
    if (a.mode == "spans") {
        mode = LabelMode::kSpans;
    } else if (a.mode == "bigram") {
        mode = LabelMode::kBigram;
    } else {
        throw ConfigError("--mode must be 'spans' or 'bigram', got '" + a.mode + "'");
    }
    SegmentationConfig seg;
    if (!a.config.empty()) {
        seg = load_run_config(a.config).segmentation;
        manifest.inputs.push_back(a.config);
    }
    if (a.segment_length) seg.segment_length = *a.segment_length;
    if (a.overlap) seg.overlap_fraction = *a.overlap;
    seg.validate();

    const DatasetSplit split = read_dataset(a.dataset, SplitName::kTrain, err);
    const auto labels = label_split(split, seg, mode, a.threshold);
    ensure_parent(a.output);
    write_labels(a.output, labels);

    std::vector<double> rates;
    std::size_t segments = 0;
    std::size_t positives = 0;
    std::size_t without = 0;
    for (const auto& l : labels) {
        segments += l.flags.size();
        positives += l.positives();
        without += l.positives() == 0;
        rates.push_back(static_cast<double>(l.positives()) / static_cast<double>(l.flags.size()));
    }
    json stats{{"instances", labels.size()},
               {"segments", segments},
               {"positive_segments", positives},
               {"instances_without_positives", without}};
    out << "instances            " << labels.size() << '\n'
        << "segments             " << segments << '\n'
        << "positive segments    " << positives << '\n'
        << "instances w/o gold   " << without << '\n';
    if (!rates.empty()) {
        double mean = 0.0;
        for (double r : rates) mean += r;
        mean /= static_cast<double>(rates.size());
        stats["positive_rate"] = {{"mean", mean},          {"min", quantile(rates, 0.0)}, {"p25", quantile(rates, 0.25)},
                                  {"median", quantile(rates, 0.5)}, {"p75", quantile(rates, 0.75)},
                                  {"max", quantile(rates, 1.0)}};
        out << std::fixed << std::setprecision(4) << "positive rate        mean " << mean << "  min "
            << quantile(rates, 0.0) << "  p25 " << quantile(rates, 0.25) << "  median " << quantile(rates, 0.5)
            << "  p75 " << quantile(rates, 0.75) << "  max " << quantile(rates, 1.0) << '\n';
        out.unsetf(std::ios::floatfield);
    }
    manifest.config = {{"mode", a.mode}, {"threshold", a.threshold}, {"segmentation", seg}, {"statistics", stats}};
    manifest.finished_at = utc_timestamp();
    write_manifest(sidecar_manifest(a.output), manifest);
}

// ----------------------------------------------------------------- train

struct TrainOverrides {
    std::string config;
    std::optional<std::string> train;
    std::optional<std::string> validation;
    std::optional<std::string> labels;
    std::optional<std::string> vocabulary;
    std::optional<std::string> output_dir;
    std::optional<int> epochs;
    std::optional<double> learning_rate;
    std::optional<double> weight_decay;
    std::optional<double> temperature;
    std::optional<double> lambda_gen;
    std::optional<double> lambda_cls;
    std::optional<double> lambda_cont;
    std::optional<int> batch_size;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> segment_length;
    std::optional<double> overlap;
};

RunConfig resolve_run_config(const TrainOverrides& o) {
    RunConfig c = o.config.empty() ? RunConfig{} : load_run_config(o.config);
    if (o.train) c.data.train = *o.train;
    if (o.validation) c.data.validation = *o.validation;
    if (o.labels) c.data.train_labels = *o.labels;
    if (o.vocabulary) c.data.vocabulary = *o.vocabulary;
    if (o.output_dir) c.output_dir = *o.output_dir;
    if (o.epochs) c.train.epochs = *o.epochs;
    if (o.learning_rate) c.train.learning_rate = *o.learning_rate;
    if (o.weight_decay) c.train.weight_decay = *o.weight_decay;
    if (o.temperature) c.train.temperature = *o.temperature;
    if (o.lambda_gen) c.train.lambda_gen = *o.lambda_gen;
    if (o.lambda_cls) c.train.lambda_cls = *o.lambda_cls;
    if (o.lambda_cont) c.train.lambda_cont = *o.lambda_cont;
    if (o.batch_size) c.train.batch_size = *o.batch_size;
    if (o.seed) {
        c.train.seed = *o.seed;
        c.model.seed = *o.seed;
    }
    if (o.segment_length) c.segmentation.segment_length = *o.segment_length;
    if (o.overlap) c.segmentation.overlap_fraction = *o.overlap;
    c.validate();
    if (c.data.train.empty()) throw ConfigError("data.train is required (config file or --train)");
    if (c.data.train_labels.empty()) throw ConfigError("data.train_labels is required (config file or --labels)");
    return c;
}

struct TrainingData {
    DatasetSplit train;
    std::optional<DatasetSplit> validation;
    std::map<std::string, SegmentLabels> labels;
    Tokenizer tokenizer;
    std::vector<std::string> inputs;
};

TrainingData load_training_data(RunConfig& c, std::ostream& err) {
    TrainingData d;
    d.train = read_dataset(c.data.train, SplitName::kTrain, err);
    d.inputs.push_back(c.data.train);
    if (!c.data.validation.empty()) {
        d.validation = read_dataset(c.data.validation, SplitName::kValidation, err);
        d.inputs.push_back(c.data.validation);
    }
    if (!fs::exists(c.data.train_labels)) throw DataError("labels not found: " + c.data.train_labels);
    d.labels = index_labels(read_labels(c.data.train_labels));
    d.inputs.push_back(c.data.train_labels);
    if (!c.data.vocabulary.empty()) {
        if (!fs::exists(c.data.vocabulary)) throw DataError("vocabulary not found: " + c.data.vocabulary);
        d.tokenizer = Tokenizer::load_vocabulary(c.data.vocabulary, c.data.lowercase);
        d.inputs.push_back(c.data.vocabulary);
    } else {
        std::vector<Tokens> streams;
        for (const auto& inst : d.train.instances) {
            streams.push_back(inst.query);
            streams.push_back(inst.document);
            for (const auto& r : inst.references) streams.push_back(r);
        }
        d.tokenizer = Tokenizer::build(streams, c.data.min_frequency, c.data.lowercase);
    }
    if (c.model.vocab_size == 0) c.model.vocab_size = d.tokenizer.vocab_size();
    return d;
}

void print_epoch(std::ostream& out, const EpochReport& r) {
    out << "epoch " << r.epoch << "  joint " << r.train_loss.joint << "  gen " << r.train_loss.generation << "  cls "
        << r.train_loss.classification << "  cont " << r.train_loss.contrastive << "  mean_rouge " << r.mean_rouge
        << "  rank_acc " << r.ranking_accuracy << "  cls_acc " << r.classification_accuracy << '\n';
}

void cmd_train(const TrainOverrides& o, std::ostream& out, std::ostream& err) {
    const std::string started = utc_timestamp();
    RunConfig c = resolve_run_config(o);
    TrainingData d = load_training_data(c, err);
    const fs::path dir(c.output_dir);
    fs::create_directories(dir);
    d.tokenizer.save_vocabulary(dir / "vocab.txt");
    std::ofstream(dir / "config.json", std::ios::binary) << json(c).dump(2) << '\n';

    Trainer trainer(c.train, c.segmentation, c.model, d.tokenizer);
    trainer.on_epoch = [&](const EpochReport& r) { print_epoch(out, r); };
    const TrainInputs inputs{&d.train, d.validation ? &*d.validation : nullptr, &d.labels, &d.tokenizer};
    const auto reports = trainer.fit(inputs, TrainOutputs{dir, true});
    const auto& best = select_checkpoint(reports);
    out << "best epoch " << best.epoch << " (mean_rouge " << best.mean_rouge << "): " << best.checkpoint_path << '\n';

    RunManifest manifest{"train", json(c), d.inputs, {dir.string()}, c.train.seed, started, utc_timestamp(), {}};
    write_manifest(dir / "manifest.json", manifest);
}

// ------------------------------------------------------------- sweep-tau

void cmd_sweep(const TrainOverrides& o, std::vector<double> grid, std::ostream& out, std::ostream& err) {
    const std::string started = utc_timestamp();
    RunConfig c = resolve_run_config(o);
    if (grid.empty()) throw ConfigError("--grid must list at least one temperature");
    TrainingData d = load_training_data(c, err);
    const fs::path dir(c.output_dir);
    fs::create_directories(dir);
    const TrainInputs inputs{&d.train, d.validation ? &*d.validation : nullptr, &d.labels, &d.tokenizer};
    const auto rows = sweep_temperature(c.train, c.segmentation, c.model, inputs, grid, dir);
    const std::string table = format_sweep_table(rows);
    out << table;
    std::ofstream(dir / "sweep.tsv", std::ios::binary) << table;
    json data = json::array();
    for (const auto& r : rows) {
        json row{{"temperature", r.temperature}, {"ok", r.ok}, {"best_epoch", r.best_epoch}};
        row["mean_rouge"] = r.ok ? json(r.mean_rouge) : json(nullptr);
        if (!r.ok) row["error"] = r.error;
        data.push_back(row);
    }
    std::ofstream(dir / "sweep.json", std::ios::binary) << data.dump(2) << '\n';
    json snapshot(c);
    snapshot["grid"] = grid;
    RunManifest manifest{"sweep-tau", snapshot, d.inputs, {dir.string()}, c.train.seed, started, utc_timestamp(), {}};
    write_manifest(dir / "manifest.json", manifest);
}

// -------------------------------------------------------------- generate

struct GenerateArgs {
    std::string checkpoint;
    std::string dataset;
    std::string output;
    std::optional<std::size_t> max_length;
};

Checkpoint open_checkpoint(const std::string& path) {
    if (!fs::exists(path)) throw DataError("checkpoint not found: " + path);
    return load_checkpoint(path);
}

void cmd_generate(const GenerateArgs& a, std::ostream& out, std::ostream& err) {
    RunManifest manifest{"generate", {}, {a.checkpoint, a.dataset}, {a.output}, 0, utc_timestamp(), {}, {}};
    Checkpoint ckpt = open_checkpoint(a.checkpoint);
    const DatasetSplit split = read_dataset(a.dataset, SplitName::kTest, err);
    const std::size_t max_length =
        a.max_length.value_or(static_cast<std::size_t>(ckpt.train.max_generation_length));
    ModelSummarizer summarizer(ckpt.model, ckpt.tokenizer, ckpt.segmentation, max_length);
    ensure_parent(a.output);
    std::ofstream file(a.output, std::ios::binary | std::ios::trunc);
    if (!file) throw DataError("cannot write " + a.output);
    for (const auto& inst : split.instances) {
        const Tokens tokens = summarizer.summarize(inst);
        file << json{{"id", inst.id}, {"generation", join_tokens(tokens)}, {"tokens", tokens}}.dump() << '\n';
    }
    file.close();
    if (!file) throw DataError("write failed for " + a.output);
    out << split.instances.size() << " generations written to " << a.output << '\n';
    manifest.config = {{"max_length", max_length}, {"epoch", ckpt.epoch}};
    manifest.seed = ckpt.train.seed;
    manifest.finished_at = utc_timestamp();
    write_manifest(sidecar_manifest(a.output), manifest);
}

// -------------------------------------------------------------- evaluate

struct EvaluateArgs {
    std::string checkpoint;
    std::string dataset;
    std::string output_dir;
    bool copy_stub = false;
    bool empty_stub = false;
    std::optional<std::size_t> max_length;
};

void cmd_evaluate(const EvaluateArgs& a, std::ostream& out, std::ostream& err) {
    RunManifest manifest{"evaluate", {}, {a.dataset}, {a.output_dir}, 0, utc_timestamp(), {}, {}};
    const int sources = int(!a.checkpoint.empty()) + int(a.copy_stub) + int(a.empty_stub);
    if (sources != 1) throw ConfigError("evaluate needs exactly one of --checkpoint, --copy-stub, --empty-stub");
    const DatasetSplit split = read_dataset(a.dataset, SplitName::kTest, err);
    EvalReport report;
    json snapshot;
    if (a.copy_stub) {
        CopyReferenceSummarizer s;
        report = evaluate_split(s, split);
        snapshot["summarizer"] = "copy-stub";
    } else if (a.empty_stub) {
        EmptySummarizer s;
        report = evaluate_split(s, split);
        snapshot["summarizer"] = "empty-stub";
    } else {
        if (split.instances.empty()) throw ConfigError("cannot evaluate an empty split");
        Checkpoint ckpt = open_checkpoint(a.checkpoint);
        const std::size_t max_length =
            a.max_length.value_or(static_cast<std::size_t>(ckpt.train.max_generation_length));
        ModelSummarizer s(ckpt.model, ckpt.tokenizer, ckpt.segmentation, max_length);
        report = evaluate_split(s, split);
        snapshot = {{"summarizer", "checkpoint"}, {"max_length", max_length}, {"epoch", ckpt.epoch}};
        manifest.inputs.push_back(a.checkpoint);
        manifest.seed = ckpt.train.seed;
    }
    write_eval_report(a.output_dir, report);
    out << format_table(report);
    manifest.config = snapshot;
    manifest.finished_at = utc_timestamp();
    write_manifest(fs::path(a.output_dir) / "manifest.json", manifest);
}

// --------------------------------------------------------- make-synthetic

struct SyntheticArgs {
    std::string output_dir;
    int instances = 20;
    int validation_instances = 20;
    int document_length = 200;
    std::uint64_t seed = 0;
};

void cmd_make_synthetic(const SyntheticArgs& a, std::ostream& out, std::ostream&) {
    RunManifest manifest{"make-synthetic", {}, {}, {a.output_dir}, a.seed, utc_timestamp(), {}, {}};
    SyntheticConfig sc;
    sc.instances = a.instances;
    sc.document_length = a.document_length;
    sc.seed = a.seed;
    SyntheticConfig vc = sc;
    vc.instances = a.validation_instances;
    vc.seed = a.seed + 1;
    const fs::path dir(a.output_dir);
    fs::create_directories(dir);
    write_split(dir / "train.jsonl", make_copy_corpus(sc, SplitName::kTrain));
    write_split(dir / "validation.jsonl", make_copy_corpus(vc, SplitName::kValidation));
    synthetic_tokenizer(sc).save_vocabulary(dir / "vocab.txt");

    RunConfig rc = synthetic_run_config(a.seed);
    rc.data.train = "train.jsonl";
    rc.data.validation = "validation.jsonl";
    rc.data.train_labels = "train.labels.jsonl";
    rc.data.vocabulary = "vocab.txt";
    rc.output_dir = "run";
    std::ofstream(dir / "config.json", std::ios::binary) << json(rc).dump(2) << '\n';
    out << "wrote " << a.instances << " train and " << a.validation_instances << " validation instances to "
        << a.output_dir << '\n';
    manifest.config = {{"instances", a.instances},
                       {"validation_instances", a.validation_instances},
                       {"document_length", a.document_length}};
    manifest.finished_at = utc_timestamp();
    write_manifest(dir / "manifest.json", manifest);
}

// ------------------------------------------------------------------ setup

void add_train_overrides(CLI::App* cmd, TrainOverrides& o) {
    cmd->add_option("-c,--config", o.config, "Run config JSON; flags override its values")->check(CLI::ExistingFile);
    cmd->add_option("--train", o.train, "Normalized training split (data.train)");
    cmd->add_option("--validation", o.validation, "Normalized validation split (data.validation)");
    cmd->add_option("--labels", o.labels, "Segment labels for the training split (data.train_labels)");
    cmd->add_option("--vocabulary", o.vocabulary, "Vocabulary file; default builds one from the training split");
    cmd->add_option("-o,--output-dir", o.output_dir, "Run directory (default: runs/default)");
    cmd->add_option("--epochs", o.epochs, "Training epochs (default: 10)");
    cmd->add_option("--lr", o.learning_rate, "AdamW learning rate (default: 5e-5)");
    cmd->add_option("--weight-decay", o.weight_decay, "AdamW decoupled weight decay (default: 0.01)");
    cmd->add_option("--temperature", o.temperature, "InfoNCE temperature tau (default: 0.6)");
    cmd->add_option("--lambda-gen", o.lambda_gen, "Generation loss weight (default: 0.6)");
    cmd->add_option("--lambda-cls", o.lambda_cls, "Classification loss weight (default: 0.2)");
    cmd->add_option("--lambda-cont", o.lambda_cont, "Contrastive loss weight (default: 0.2)");
    cmd->add_option("--batch-size", o.batch_size, "Instances per optimizer step (default: 1)");
    cmd->add_option("--seed", o.seed, "Seed for model init, dropout and shuffling (default: 0)");
    cmd->add_option("--segment-length", o.segment_length, "Tokens per segment (default: 512)");
    cmd->add_option("--overlap", o.overlap, "Overlap fraction between segments (default: 0.5)");
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Query-focused summarization with segment scoring and contrastive training", "qfs"};
    app.require_subcommand(1);
    app.option_defaults()->always_capture_default();

    IngestArgs ingest;
    auto* c_ingest = app.add_subcommand("ingest", "Convert upstream QMSum/SQuALITY files into normalized JSONL");
    c_ingest->add_option("-i,--input", ingest.input, "Directory of *.json/*.jsonl records, or one JSONL file")->required();
    c_ingest->add_option("-f,--format", ingest.format, "Upstream format: qmsum or squality")->required();
    c_ingest->add_option("-o,--output", ingest.output, "Normalized dataset file to write")->required();
    c_ingest->add_flag("--no-lowercase", ingest.no_lowercase, "Keep original casing when tokenizing");

    LabelArgs label;
    auto* c_label = app.add_subcommand("label", "Assign gold/non-gold flags to every segment");
    c_label->add_option("-d,--dataset", label.dataset, "Normalized dataset file")->required();
    c_label->add_option("-o,--output", label.output, "Labels file to write")->required();
    c_label->add_option("-m,--mode", label.mode, "spans (annotated relevant text) or bigram (reference overlap)")
        ->required();
    c_label->add_option("-t,--threshold", label.threshold, "Bigram mode: distinct shared bigrams needed for gold");
    c_label->add_option("-c,--config", label.config, "Run config; its segmentation section is used")
        ->check(CLI::ExistingFile);
    c_label->add_option("--segment-length", label.segment_length, "Tokens per segment (default: 512)");
    c_label->add_option("--overlap", label.overlap, "Overlap fraction between segments (default: 0.5)");

    TrainOverrides train;
    auto* c_train = app.add_subcommand("train", "Train a model and write per-epoch checkpoints and reports");
    add_train_overrides(c_train, train);

    GenerateArgs generate;
    auto* c_generate = app.add_subcommand("generate", "Write one greedy summary per instance");
    c_generate->add_option("-k,--checkpoint", generate.checkpoint, "Checkpoint file")->required();
    c_generate->add_option("-d,--dataset", generate.dataset, "Normalized dataset file")->required();
    c_generate->add_option("-o,--output", generate.output, "Generations JSONL to write")->required();
    c_generate->add_option("--max-length", generate.max_length,
                           "Maximum generated tokens (default: train.max_generation_length, 128)");

    EvaluateArgs evaluate;
    auto* c_evaluate = app.add_subcommand("evaluate", "Score a summarizer with ROUGE-1/2/L");
    c_evaluate->add_option("-d,--dataset", evaluate.dataset, "Normalized dataset file")->required();
    c_evaluate->add_option("-o,--output-dir", evaluate.output_dir, "Report directory")->required();
    c_evaluate->add_option("-k,--checkpoint", evaluate.checkpoint, "Checkpoint to generate summaries with");
    c_evaluate->add_flag("--copy-stub", evaluate.copy_stub, "Score the first reference against itself");
    c_evaluate->add_flag("--empty-stub", evaluate.empty_stub, "Score empty summaries");
    c_evaluate->add_option("--max-length", evaluate.max_length,
                           "Maximum generated tokens (default: train.max_generation_length, 128)");

    TrainOverrides sweep;
    std::vector<double> grid{0.2, 0.4, 0.6, 0.8};
    auto* c_sweep = app.add_subcommand("sweep-tau", "Train once per temperature and tabulate mean ROUGE");
    add_train_overrides(c_sweep, sweep);
    c_sweep->add_option("--grid", grid, "Temperatures to try")->delimiter(',');

    SyntheticArgs synthetic;
    auto* c_synth = app.add_subcommand("make-synthetic", "Write the copy-task corpus with a ready-to-train config");
    c_synth->add_option("-o,--output-dir", synthetic.output_dir, "Directory to write into")->required();
    c_synth->add_option("--instances", synthetic.instances, "Training instances");
    c_synth->add_option("--validation-instances", synthetic.validation_instances, "Validation instances");
    c_synth->add_option("--document-length", synthetic.document_length, "Tokens per document");
    c_synth->add_option("--seed", synthetic.seed, "Generator seed (validation uses seed + 1)");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    if (!reversed.empty()) reversed.pop_back();  // program name
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kUsage;
    }

    try {
        if (*c_ingest) cmd_ingest(ingest, out, err);
        if (*c_label) cmd_label(label, out, err);
        if (*c_train) cmd_train(train, out, err);
        if (*c_generate) cmd_generate(generate, out, err);
        if (*c_evaluate) cmd_evaluate(evaluate, out, err);
        if (*c_sweep) cmd_sweep(sweep, grid, out, err);
        if (*c_synth) cmd_make_synthetic(synthetic, out, err);
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << '\n';
        return kUsage;
    } catch (const NumericError& e) {
        err << "numeric failure: " << e.what() << '\n';
        return kNumeric;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kData;
    }
    return kOk;
}

}  // namespace qfs::cli
