#include "qfs/synthetic.hpp"

#include <algorithm>
#include <numeric>
#include <random>

#include "qfs/errors.hpp"

namespace qfs {

namespace {

std::string filler(int i) { return "f" + std::to_string(i); }
std::string content(int i) { return "c" + std::to_string(i); }

// mt19937_64 output is fixed by the standard; distributions are not, so
// draws go through this helper instead of std::uniform_int_distribution.
int draw(std::mt19937_64& rng, int lo, int hi) {
    const auto range = static_cast<std::uint64_t>(hi - lo + 1);
    return lo + static_cast<int>(rng() % range);
}

}  // namespace

void SyntheticConfig::validate() const {
    if (instances < 1) throw ConfigError("synthetic.instances must be >= 1");
    if (filler_words < 1 || content_words < 1) throw ConfigError("synthetic word pools must be non-empty");
    if (min_summary_length < 1 || max_summary_length < min_summary_length) {
        throw ConfigError("synthetic summary lengths must satisfy 1 <= min <= max");
    }
    if (max_summary_length > content_words) {
        throw ConfigError("synthetic.max_summary_length cannot exceed content_words");
    }
    if (document_length < max_summary_length) {
        throw ConfigError("synthetic.document_length must be >= max_summary_length");
    }
}

DatasetSplit make_copy_corpus(const SyntheticConfig& config, SplitName name) {
    config.validate();
    std::mt19937_64 rng(config.seed);
    DatasetSplit split;
    split.name = name;
    for (int n = 0; n < config.instances; ++n) {
        TrainingInstance inst;
        inst.id = std::string(to_string(name)) + "-" + std::to_string(n);
        inst.query = {"copy"};

        const int length = draw(rng, config.min_summary_length, config.max_summary_length);
        std::vector<int> pool(static_cast<std::size_t>(config.content_words));
        std::iota(pool.begin(), pool.end(), 0);
        for (int i = 0; i < length; ++i) {
            std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(draw(rng, i, config.content_words - 1))]);
        }
        Tokens summary;
        for (int i = 0; i < length; ++i) summary.push_back(content(pool[static_cast<std::size_t>(i)]));

        const int offset = draw(rng, 0, config.document_length - length);
        for (int i = 0; i < config.document_length; ++i) {
            if (i >= offset && i < offset + length) {
                inst.document.push_back(summary[static_cast<std::size_t>(i - offset)]);
            } else {
                inst.document.push_back(filler(draw(rng, 0, config.filler_words - 1)));
            }
        }
        inst.references.push_back(std::move(summary));
        inst.gold_spans.push_back({static_cast<std::size_t>(offset), static_cast<std::size_t>(offset + length)});
        split.instances.push_back(std::move(inst));
    }
    return split;
}

Tokenizer synthetic_tokenizer(const SyntheticConfig& config) {
    std::vector<std::string> words{"copy"};
    for (int i = 0; i < config.content_words; ++i) words.push_back(content(i));
    for (int i = 0; i < config.filler_words; ++i) words.push_back(filler(i));
    return Tokenizer::from_tokens(words, true);
}

RunConfig synthetic_run_config(std::uint64_t seed) {
    RunConfig c;
    c.segmentation.segment_length = 32;
    c.segmentation.overlap_fraction = 0.5;
    c.model.model_dim = 64;
    c.model.feedforward_dim = 128;
    c.model.num_heads = 2;
    c.model.encoder_layers = 2;
    c.model.decoder_layers = 2;
    c.model.max_positions = 512;
    c.model.dropout_rate = 0.0;
    c.model.projection_hidden_dim = 32;
    c.model.projection_out_dim = 32;
    c.model.seed = seed;
    c.train.learning_rate = 1e-3;
    c.train.weight_decay = 0.01;
    c.train.epochs = 30;
    c.train.seed = seed;
    c.train.max_generation_length = 16;
    c.train.max_target_length = 16;
    return c;
}

}  // namespace qfs
