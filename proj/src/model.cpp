#include "qfs/model.hpp"

#include <algorithm>
#include <cmath>

#include "qfs/errors.hpp"

namespace qfs {

using ag::Matrix;
using ag::Var;

void ModelConfig::validate() const {
    auto positive = [](std::size_t v, const char* name) {
        if (v == 0) throw ConfigError(std::string("model.") + name + " must be positive");
    };
    positive(vocab_size, "vocab_size");
    positive(model_dim, "model_dim");
    positive(feedforward_dim, "feedforward_dim");
    positive(num_heads, "num_heads");
    positive(encoder_layers, "encoder_layers");
    positive(decoder_layers, "decoder_layers");
    positive(max_positions, "max_positions");
    positive(projection_hidden_dim, "projection_hidden_dim");
    positive(projection_out_dim, "projection_out_dim");
    if (model_dim % num_heads != 0) throw ConfigError("model.model_dim must be divisible by model.num_heads");
    if (vocab_size < static_cast<std::size_t>(SpecialTokens::kCount)) {
        throw ConfigError("model.vocab_size must cover the reserved tokens");
    }
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw ConfigError("model.dropout_rate must be in [0, 1)");
}

void to_json(nlohmann::json& j, const ModelConfig& c) {
    j = nlohmann::json{{"vocab_size", c.vocab_size},
                       {"model_dim", c.model_dim},
                       {"feedforward_dim", c.feedforward_dim},
                       {"num_heads", c.num_heads},
                       {"encoder_layers", c.encoder_layers},
                       {"decoder_layers", c.decoder_layers},
                       {"max_positions", c.max_positions},
                       {"dropout_rate", c.dropout_rate},
                       {"projection_hidden_dim", c.projection_hidden_dim},
                       {"projection_out_dim", c.projection_out_dim},
                       {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, ModelConfig& c) {
    static const char* const known[] = {"vocab_size",     "model_dim",    "feedforward_dim",      "num_heads",
                                        "encoder_layers", "decoder_layers", "max_positions",      "dropout_rate",
                                        "projection_hidden_dim", "projection_out_dim", "seed"};
    for (const auto& [key, value] : j.items()) {
        if (std::find(std::begin(known), std::end(known), key) == std::end(known)) {
            throw ConfigError("unknown model config field '" + key + "'");
        }
    }
    c.vocab_size = j.value("vocab_size", c.vocab_size);
    c.model_dim = j.value("model_dim", c.model_dim);
    c.feedforward_dim = j.value("feedforward_dim", c.feedforward_dim);
    c.num_heads = j.value("num_heads", c.num_heads);
    c.encoder_layers = j.value("encoder_layers", c.encoder_layers);
    c.decoder_layers = j.value("decoder_layers", c.decoder_layers);
    c.max_positions = j.value("max_positions", c.max_positions);
    c.dropout_rate = j.value("dropout_rate", c.dropout_rate);
    c.projection_hidden_dim = j.value("projection_hidden_dim", c.projection_hidden_dim);
    c.projection_out_dim = j.value("projection_out_dim", c.projection_out_dim);
    c.seed = j.value("seed", c.seed);
}

Var& ParameterStore::add(const std::string& name, Matrix init) {
    if (index_.contains(name)) throw StructuralError("duplicate parameter name " + name);
    index_.emplace(name, entries_.size());
    entries_.emplace_back(name, Var(std::move(init), true));
    return entries_.back().second;
}

Var& ParameterStore::at(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw StructuralError("unknown parameter " + name);
    return entries_[it->second].second;
}

const Var& ParameterStore::at(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw StructuralError("unknown parameter " + name);
    return entries_[it->second].second;
}

std::size_t ParameterStore::element_count() const {
    std::size_t n = 0;
    for (const auto& [name, v] : entries_) n += static_cast<std::size_t>(v.value().size());
    return n;
}

void ParameterStore::zero_grad() {
    for (auto& [name, v] : entries_) v.zero_grad();
}

Matrix sinusoidal_positions(std::size_t max_positions, std::size_t dim) {
    Matrix pe(static_cast<Eigen::Index>(max_positions), static_cast<Eigen::Index>(dim));
    for (std::size_t pos = 0; pos < max_positions; ++pos) {
        for (std::size_t i = 0; i < dim; ++i) {
            const double rate = std::pow(10000.0, static_cast<double>(2 * (i / 2)) / static_cast<double>(dim));
            const double angle = static_cast<double>(pos) / rate;
            pe(static_cast<Eigen::Index>(pos), static_cast<Eigen::Index>(i)) =
                i % 2 == 0 ? std::sin(angle) : std::cos(angle);
        }
    }
    return pe;
}

namespace layers {

Var BatchNorm::forward(const Var& x, bool training) {
    if (!training) return ag::batch_norm_eval(x, gamma, beta, running_mean, running_var, eps);
    ag::BatchStats stats;
    Var y = ag::batch_norm_train(x, gamma, beta, eps, &stats);
    if (track_running_stats) {
        const double n = static_cast<double>(x.rows());
        const ag::RowVector unbiased = n > 1 ? ag::RowVector(stats.variance * (n / (n - 1.0))) : stats.variance;
        running_mean = (1.0 - momentum) * running_mean + momentum * stats.mean;
        running_var = (1.0 - momentum) * running_var + momentum * unbiased;
    }
    return y;
}

}  // namespace layers

Seq2SeqModel::Seq2SeqModel(const ModelConfig& config)
    : config_(config), init_rng_(config.seed), dropout_rng_(config.seed ^ 0x9e3779b97f4a7c15ULL) {
    config_.validate();
    const auto d = config_.model_dim;
    const auto v = config_.vocab_size;

    std::normal_distribution<double> unit(0.0, 1.0);
    Matrix emb(static_cast<Eigen::Index>(v), static_cast<Eigen::Index>(d));
    for (Eigen::Index i = 0; i < emb.size(); ++i) emb(i) = unit(init_rng_);
    token_embedding_ = params_.add("embed_tokens.weight", std::move(emb));
    positions_ = sinusoidal_positions(config_.max_positions, d);
    encoder_embed_norm_ = make_layer_norm("encoder.embed_norm", d);
    decoder_embed_norm_ = make_layer_norm("decoder.embed_norm", d);

    for (std::size_t l = 0; l < config_.encoder_layers; ++l) {
        const std::string p = "encoder.layers." + std::to_string(l) + ".";
        layers::EncoderLayer layer;
        layer.self_attn = make_attention(p + "self_attn");
        layer.norm1 = make_layer_norm(p + "self_attn_norm", d);
        layer.ff.in = make_linear(p + "ff.in", d, config_.feedforward_dim);
        layer.ff.out = make_linear(p + "ff.out", config_.feedforward_dim, d);
        layer.norm2 = make_layer_norm(p + "ff_norm", d);
        encoder_.push_back(std::move(layer));
    }
    for (std::size_t l = 0; l < config_.decoder_layers; ++l) {
        const std::string p = "decoder.layers." + std::to_string(l) + ".";
        layers::DecoderLayer layer;
        layer.self_attn = make_attention(p + "self_attn");
        layer.norm1 = make_layer_norm(p + "self_attn_norm", d);
        layer.cross_attn = make_attention(p + "cross_attn");
        layer.norm2 = make_layer_norm(p + "cross_attn_norm", d);
        layer.ff.in = make_linear(p + "ff.in", d, config_.feedforward_dim);
        layer.ff.out = make_linear(p + "ff.out", config_.feedforward_dim, d);
        layer.norm3 = make_layer_norm(p + "ff_norm", d);
        decoder_.push_back(std::move(layer));
    }
    lm_head_ = make_linear("lm_head", d, v, 0.02);
    scorer_ = make_linear("scorer", d, 1);
    projection_in_ = make_linear("projection.in", v, config_.projection_hidden_dim);
    const auto h = static_cast<Eigen::Index>(config_.projection_hidden_dim);
    projection_norm_.gamma = params_.add("projection.norm.weight", Matrix::Ones(1, h));
    projection_norm_.beta = params_.add("projection.norm.bias", Matrix::Zero(1, h));
    projection_norm_.running_mean = ag::RowVector::Zero(h);
    projection_norm_.running_var = ag::RowVector::Ones(h);
    projection_out_ = make_linear("projection.out", config_.projection_hidden_dim, config_.projection_out_dim);
}

layers::Linear Seq2SeqModel::make_linear(const std::string& name, std::size_t in, std::size_t out, double init_std) {
    Matrix w(static_cast<Eigen::Index>(in), static_cast<Eigen::Index>(out));
    if (init_std > 0) {
        std::normal_distribution<double> dist(0.0, init_std);
        for (Eigen::Index i = 0; i < w.size(); ++i) w(i) = dist(init_rng_);
    } else {
        const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
        std::uniform_real_distribution<double> dist(-limit, limit);
        for (Eigen::Index i = 0; i < w.size(); ++i) w(i) = dist(init_rng_);
    }
    layers::Linear lin;
    lin.weight = params_.add(name + ".weight", std::move(w));
    lin.bias = params_.add(name + ".bias", Matrix::Zero(1, static_cast<Eigen::Index>(out)));
    return lin;
}

layers::LayerNorm Seq2SeqModel::make_layer_norm(const std::string& name, std::size_t dim) {
    const auto n = static_cast<Eigen::Index>(dim);
    return {params_.add(name + ".weight", Matrix::Ones(1, n)), params_.add(name + ".bias", Matrix::Zero(1, n))};
}

layers::Attention Seq2SeqModel::make_attention(const std::string& name) {
    const auto d = config_.model_dim;
    layers::Attention a;
    a.q = make_linear(name + ".q", d, d);
    a.k = make_linear(name + ".k", d, d);
    a.v = make_linear(name + ".v", d, d);
    a.out = make_linear(name + ".out", d, d);
    a.num_heads = static_cast<int>(config_.num_heads);
    return a;
}

void Seq2SeqModel::check_length(std::size_t length, const std::string& what) const {
    if (length > config_.max_positions) {
        throw LengthError(what + " has length " + std::to_string(length) + " exceeding max_positions " +
                          std::to_string(config_.max_positions));
    }
    if (length == 0) throw LengthError(what + " is empty");
}

Var Seq2SeqModel::dropout(const Var& x) {
    const double p = config_.dropout_rate;
    if (!training_ || p <= 0.0) return x;
    Matrix mask(x.rows(), x.cols());
    const double keep_scale = 1.0 / (1.0 - p);
    for (Eigen::Index i = 0; i < mask.size(); ++i) {
        const double u = static_cast<double>(dropout_rng_() >> 11) * 0x1.0p-53;
        mask(i) = u < p ? 0.0 : keep_scale;
    }
    return ag::multiply_mask(x, mask);
}

Var Seq2SeqModel::embed(std::span<const TokenId> ids, const layers::LayerNorm& norm) {
    std::vector<int> idx(ids.begin(), ids.end());
    Var x = ag::embedding(token_embedding_, idx);
    x = ag::add_constant(x, positions_.topRows(static_cast<Eigen::Index>(ids.size())));
    return dropout(norm(x));
}

Var Seq2SeqModel::attend(const layers::Attention& attn, const Var& x, const Var& keys, const Var& values,
                         bool causal) {
    Var q = attn.q(x);
    Var ctx = ag::multi_head_attention(q, keys, values, attn.num_heads, causal);
    return attn.out(ctx);
}

Var Seq2SeqModel::feed_forward(const layers::FeedForward& ff, const Var& x) {
    return ff.out(dropout(ag::gelu(ff.in(x))));
}

std::vector<EncodedSegment> Seq2SeqModel::encode_segments(std::span<const TokenIds> inputs) {
    std::vector<EncodedSegment> out;
    out.reserve(inputs.size());
    for (std::size_t s = 0; s < inputs.size(); ++s) {
        check_length(inputs[s].size(), "segment input " + std::to_string(s));
        Var x = embed(inputs[s], encoder_embed_norm_);
        for (const auto& layer : encoder_) {
            Var a = attend(layer.self_attn, x, layer.self_attn.k(x), layer.self_attn.v(x), false);
            x = layer.norm1(ag::add(x, dropout(a)));
            x = layer.norm2(ag::add(x, dropout(feed_forward(layer.ff, x))));
        }
        out.push_back({x});
    }
    return out;
}

Var Seq2SeqModel::score_segments(std::span<const EncodedSegment> segments) const {
    std::vector<Var> heads;
    heads.reserve(segments.size());
    for (const auto& seg : segments) heads.push_back(seg.head_state());
    return ag::sigmoid(scorer_(ag::concat_rows(heads)));
}

Var Seq2SeqModel::concat_memory(std::span<const EncodedSegment> segments) {
    std::vector<Var> parts;
    parts.reserve(segments.size());
    for (const auto& seg : segments) parts.push_back(seg.token_states);
    return ag::concat_rows(parts);
}

SegEncState Seq2SeqModel::segenc(std::span<const TokenIds> inputs) {
    SegEncState state;
    state.per_segment = encode_segments(inputs);
    state.memory = concat_memory(state.per_segment);
    state.segment_probs = score_segments(state.per_segment);
    return state;
}

MemoryCache Seq2SeqModel::prepare_memory(const Var& memory) const {
    if (memory.cols() != static_cast<Eigen::Index>(config_.model_dim)) {
        throw StructuralError("memory width " + std::to_string(memory.cols()) + " does not match model_dim " +
                              std::to_string(config_.model_dim));
    }
    MemoryCache cache;
    for (const auto& layer : decoder_) {
        cache.keys.push_back(layer.cross_attn.k(memory));
        cache.values.push_back(layer.cross_attn.v(memory));
    }
    return cache;
}

Var Seq2SeqModel::decode_teacher_forced(const Var& memory, std::span<const TokenId> target) {
    return decode_teacher_forced(prepare_memory(memory), target);
}

Var Seq2SeqModel::decode_teacher_forced(const MemoryCache& cache, std::span<const TokenId> target) {
    check_length(target.size(), "decoder target");
    if (target.front() != SpecialTokens::kBegin) throw StructuralError("decoder target must start with <s>");
    Var x = embed(target, decoder_embed_norm_);
    for (std::size_t l = 0; l < decoder_.size(); ++l) {
        const auto& layer = decoder_[l];
        Var a = attend(layer.self_attn, x, layer.self_attn.k(x), layer.self_attn.v(x), true);
        x = layer.norm1(ag::add(x, dropout(a)));
        Var c = attend(layer.cross_attn, x, cache.keys[l], cache.values[l], false);
        x = layer.norm2(ag::add(x, dropout(c)));
        x = layer.norm3(ag::add(x, dropout(feed_forward(layer.ff, x))));
    }
    return lm_head_(x);
}

TokenIds Seq2SeqModel::generate(const Var& memory, std::size_t max_length) {
    ag::NoGradGuard no_grad;
    EvalModeGuard eval(*this);
    const MemoryCache cache = prepare_memory(memory);
    TokenIds prefix{SpecialTokens::kBegin};
    TokenIds out;
    const std::size_t limit = std::min(max_length, config_.max_positions - 1);
    while (out.size() < limit) {
        const Var logits = decode_teacher_forced(cache, prefix);
        Eigen::Index best = 0;
        logits.value().row(logits.rows() - 1).maxCoeff(&best);
        const auto next = static_cast<TokenId>(best);
        out.push_back(next);
        prefix.push_back(next);
        if (next == SpecialTokens::kEnd) break;
    }
    return out;
}

Var Seq2SeqModel::project(const Var& decoder_outputs) {
    if (decoder_outputs.cols() != static_cast<Eigen::Index>(config_.vocab_size)) {
        throw StructuralError("projection expects vocab-width decoder logits");
    }
    Var h = ag::relu(projection_norm_.forward(projection_in_(decoder_outputs), training_));
    return projection_out_(h);
}

}  // namespace qfs
