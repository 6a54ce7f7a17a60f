#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace qfs {

using TokenId = std::int32_t;
using Tokens = std::vector<std::string>;
using TokenIds = std::vector<TokenId>;

/// Reserved ids occupy the first block of every vocabulary, in this order.
struct SpecialTokens {
    static constexpr TokenId kPad = 0;
    static constexpr TokenId kBegin = 1;
    static constexpr TokenId kEnd = 2;
    static constexpr TokenId kUnknown = 3;
    static constexpr TokenId kSeparator = 4;
    static constexpr TokenId kCount = 5;

    static constexpr std::string_view kPadText = "<pad>";
    static constexpr std::string_view kBeginText = "<s>";
    static constexpr std::string_view kEndText = "</s>";
    static constexpr std::string_view kUnknownText = "<unk>";
    static constexpr std::string_view kSeparatorText = "<sep>";
};

/// Word-level tokenizer. Text is split on whitespace, and every ASCII
/// punctuation character becomes its own token. Bytes >= 0x80 are treated
/// as word characters so UTF-8 words stay intact.
class Tokenizer {
public:
    explicit Tokenizer(bool lowercase = true);

    /// Builds the vocabulary from token streams. Tokens seen fewer than
    /// `min_frequency` times map to <unk>. Ids after the reserved block are
    /// assigned by descending frequency, ties broken lexicographically.
    static Tokenizer build(std::span<const Tokens> corpus, int min_frequency = 1, bool lowercase = true);

    /// Reads a vocabulary file: one token per line; line k gets id kCount + k.
    static Tokenizer load_vocabulary(const std::filesystem::path& path, bool lowercase = true);
    void save_vocabulary(const std::filesystem::path& path) const;

    static Tokenizer from_tokens(const std::vector<std::string>& regular_tokens, bool lowercase = true);

    Tokens tokenize(std::string_view text) const;

    TokenIds encode(std::span<const std::string> tokens) const;
    Tokens decode(std::span<const TokenId> ids, bool skip_special = true) const;

    TokenId id_of(const std::string& token) const;
    const std::string& token_of(TokenId id) const;

    std::size_t vocab_size() const { return id_to_token_.size(); }
    bool lowercase() const { return lowercase_; }

    /// Regular (non-reserved) tokens in id order.
    std::vector<std::string> regular_tokens() const;

private:
    void add_token(const std::string& token);

    bool lowercase_;
    std::vector<std::string> id_to_token_;
    std::unordered_map<std::string, TokenId> token_to_id_;
};

/// Default text policy, usable without a vocabulary.
Tokens tokenize_text(std::string_view text, bool lowercase = true);

std::string join_tokens(std::span<const std::string> tokens);

}  // namespace qfs
