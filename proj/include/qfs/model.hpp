#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "qfs/autograd.hpp"
#include "qfs/tokenizer.hpp"

namespace qfs {

struct ModelConfig {
    std::size_t vocab_size = 0;
    std::size_t model_dim = 64;
    std::size_t feedforward_dim = 256;
    std::size_t num_heads = 2;
    std::size_t encoder_layers = 2;
    std::size_t decoder_layers = 2;
    std::size_t max_positions = 1024;
    double dropout_rate = 0.1;
    std::size_t projection_hidden_dim = 128;
    std::size_t projection_out_dim = 128;
    std::uint64_t seed = 0;

    void validate() const;
    friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);

/// Named trainable tensors in registration order.
class ParameterStore {
public:
    ag::Var& add(const std::string& name, ag::Matrix init);
    ag::Var& at(const std::string& name);
    const ag::Var& at(const std::string& name) const;
    bool contains(const std::string& name) const { return index_.contains(name); }

    std::size_t size() const { return entries_.size(); }
    std::size_t element_count() const;
    const std::string& name(std::size_t i) const { return entries_[i].first; }
    ag::Var& operator[](std::size_t i) { return entries_[i].second; }
    const ag::Var& operator[](std::size_t i) const { return entries_[i].second; }

    void zero_grad();

private:
    std::vector<std::pair<std::string, ag::Var>> entries_;
    std::map<std::string, std::size_t> index_;
};

struct EncodedSegment {
    ag::Var token_states;  // input length x model_dim

    ag::Var head_state() const { return ag::slice_rows(token_states, 0, 1); }
    std::size_t length() const { return static_cast<std::size_t>(token_states.rows()); }
};

struct SegEncState {
    std::vector<EncodedSegment> per_segment;
    ag::Var memory;          // concatenated token states, segment order
    ag::Var segment_probs;   // one row per segment
};

namespace layers {

struct Linear {
    ag::Var weight;  // in x out
    ag::Var bias;    // 1 x out
    ag::Var operator()(const ag::Var& x) const { return ag::linear(x, weight, bias); }
};

struct LayerNorm {
    ag::Var gamma;
    ag::Var beta;
    ag::Var operator()(const ag::Var& x) const { return ag::layer_norm(x, gamma, beta); }
};

/// Normalizes each feature over the token positions of a sequence. Running
/// statistics are tracked in training mode and used in eval mode.
struct BatchNorm {
    ag::Var gamma;
    ag::Var beta;
    ag::RowVector running_mean;
    ag::RowVector running_var;
    double momentum = 0.1;
    double eps = 1e-5;
    bool track_running_stats = true;

    ag::Var forward(const ag::Var& x, bool training);
};

struct Attention {
    Linear q, k, v, out;
    int num_heads = 1;
};

struct FeedForward {
    Linear in, out;
};

struct EncoderLayer {
    Attention self_attn;
    LayerNorm norm1;
    FeedForward ff;
    LayerNorm norm2;
};

struct DecoderLayer {
    Attention self_attn;
    LayerNorm norm1;
    Attention cross_attn;
    LayerNorm norm2;
    FeedForward ff;
    LayerNorm norm3;
};

}  // namespace layers

/// Cross-attention keys and values for one memory, computed once per
/// decode call (or once per generation).
struct MemoryCache {
    std::vector<ag::Var> keys;
    std::vector<ag::Var> values;
};

/// Transformer encoder-decoder with post-norm blocks, GELU feed-forward,
/// fixed sinusoidal positions, a segment scorer over the first encoder
/// position, and a projection head over decoder logits.
class Seq2SeqModel {
public:
    explicit Seq2SeqModel(const ModelConfig& config);

    Seq2SeqModel(const Seq2SeqModel&) = delete;
    Seq2SeqModel& operator=(const Seq2SeqModel&) = delete;
    Seq2SeqModel(Seq2SeqModel&&) = default;
    Seq2SeqModel& operator=(Seq2SeqModel&&) = default;

    const ModelConfig& config() const { return config_; }
    ParameterStore& parameters() { return params_; }
    const ParameterStore& parameters() const { return params_; }

    void set_training(bool training) { training_ = training; }
    bool training() const { return training_; }

    /// Encodes every input independently with the shared encoder.
    std::vector<EncodedSegment> encode_segments(std::span<const TokenIds> inputs);
    /// Column of sigmoid(head_state * w + b), one row per segment.
    ag::Var score_segments(std::span<const EncodedSegment> segments) const;
    static ag::Var concat_memory(std::span<const EncodedSegment> segments);
    SegEncState segenc(std::span<const TokenIds> inputs);

    MemoryCache prepare_memory(const ag::Var& memory) const;
    /// Logits (target length x vocab). Row t predicts the token after target[t].
    ag::Var decode_teacher_forced(const ag::Var& memory, std::span<const TokenId> target);
    ag::Var decode_teacher_forced(const MemoryCache& cache, std::span<const TokenId> target);
    /// Greedy decoding from <s>; stops after emitting </s> or max_length tokens.
    /// The returned tokens exclude <s> and include </s> when emitted.
    TokenIds generate(const ag::Var& memory, std::size_t max_length);

    /// relu(batchnorm(logits * W1 + b1)) * W2 + b2, per position.
    ag::Var project(const ag::Var& decoder_outputs);

    layers::BatchNorm& projection_norm() { return projection_norm_; }
    const layers::BatchNorm& projection_norm() const { return projection_norm_; }

    /// Reseeds the dropout stream (used when restoring training state).
    void reseed_dropout(std::uint64_t seed) { dropout_rng_.seed(seed); }

private:
    layers::Linear make_linear(const std::string& name, std::size_t in, std::size_t out, double init_std = -1.0);
    layers::LayerNorm make_layer_norm(const std::string& name, std::size_t dim);
    layers::Attention make_attention(const std::string& name);

    ag::Var embed(std::span<const TokenId> ids, const layers::LayerNorm& norm);
    ag::Var attend(const layers::Attention& attn, const ag::Var& x, const ag::Var& keys, const ag::Var& values,
                   bool causal);
    ag::Var feed_forward(const layers::FeedForward& ff, const ag::Var& x);
    ag::Var dropout(const ag::Var& x);
    void check_length(std::size_t length, const std::string& what) const;

    ModelConfig config_;
    ParameterStore params_;
    bool training_ = true;
    std::mt19937_64 init_rng_;
    std::mt19937_64 dropout_rng_;

    ag::Var token_embedding_;
    ag::Matrix positions_;
    layers::LayerNorm encoder_embed_norm_;
    layers::LayerNorm decoder_embed_norm_;
    std::vector<layers::EncoderLayer> encoder_;
    std::vector<layers::DecoderLayer> decoder_;
    layers::Linear lm_head_;
    layers::Linear scorer_;
    layers::Linear projection_in_;
    layers::BatchNorm projection_norm_;
    layers::Linear projection_out_;
};

/// Switches a model to eval mode for the guard's lifetime.
class EvalModeGuard {
public:
    explicit EvalModeGuard(Seq2SeqModel& model) : model_(model), previous_(model.training()) {
        model_.set_training(false);
    }
    ~EvalModeGuard() { model_.set_training(previous_); }
    EvalModeGuard(const EvalModeGuard&) = delete;
    EvalModeGuard& operator=(const EvalModeGuard&) = delete;

private:
    Seq2SeqModel& model_;
    bool previous_;
};

/// Sinusoidal position table, rows = positions.
ag::Matrix sinusoidal_positions(std::size_t max_positions, std::size_t dim);

}  // namespace qfs
