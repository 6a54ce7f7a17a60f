#include "qfs/tokenizer.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>

#include "qfs/errors.hpp"

namespace qfs {

namespace {

bool is_space(unsigned char c) { return std::isspace(c) != 0; }

bool is_punct(unsigned char c) { return c < 0x80 && std::ispunct(c) != 0; }

}  // namespace

Tokens tokenize_text(std::string_view text, bool lowercase) {
    Tokens out;
    std::string current;
    auto flush = [&] {
        if (!current.empty()) {
            out.push_back(std::move(current));
            current.clear();
        }
    };
    for (char ch : text) {
        const auto c = static_cast<unsigned char>(ch);
        if (is_space(c)) {
            flush();
        } else if (is_punct(c)) {
            flush();
            out.emplace_back(1, ch);
        } else {
            current.push_back(lowercase && c < 0x80 ? static_cast<char>(std::tolower(c)) : ch);
        }
    }
    flush();
    return out;
}

std::string join_tokens(std::span<const std::string> tokens) {
    std::string out;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (i > 0) out.push_back(' ');
        out += tokens[i];
    }
    return out;
}

Tokenizer::Tokenizer(bool lowercase) : lowercase_(lowercase) {
    for (auto text : {SpecialTokens::kPadText, SpecialTokens::kBeginText, SpecialTokens::kEndText,
                      SpecialTokens::kUnknownText, SpecialTokens::kSeparatorText}) {
        add_token(std::string(text));
    }
}

void Tokenizer::add_token(const std::string& token) {
    if (token_to_id_.contains(token)) {
        throw DataError("duplicate vocabulary entry '" + token + "'");
    }
    token_to_id_.emplace(token, static_cast<TokenId>(id_to_token_.size()));
    id_to_token_.push_back(token);
}

Tokenizer Tokenizer::build(std::span<const Tokens> corpus, int min_frequency, bool lowercase) {
    std::map<std::string, long> counts;
    for (const auto& seq : corpus) {
        for (const auto& tok : seq) ++counts[tok];
    }
    std::vector<std::pair<std::string, long>> entries;
    for (auto& [tok, n] : counts) {
        if (n >= min_frequency) entries.emplace_back(tok, n);
    }
    std::stable_sort(entries.begin(), entries.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
    Tokenizer tok(lowercase);
    for (const auto& [text, n] : entries) {
        if (!tok.token_to_id_.contains(text)) tok.add_token(text);
    }
    return tok;
}

Tokenizer Tokenizer::from_tokens(const std::vector<std::string>& regular_tokens, bool lowercase) {
    Tokenizer tok(lowercase);
    for (const auto& t : regular_tokens) tok.add_token(t);
    return tok;
}

Tokenizer Tokenizer::load_vocabulary(const std::filesystem::path& path, bool lowercase) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot read vocabulary file " + path.string());
    std::vector<std::string> tokens;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        tokens.push_back(line);
    }
    return from_tokens(tokens, lowercase);
}

void Tokenizer::save_vocabulary(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write vocabulary file " + path.string());
    for (const auto& t : regular_tokens()) out << t << '\n';
}

std::vector<std::string> Tokenizer::regular_tokens() const {
    return {id_to_token_.begin() + SpecialTokens::kCount, id_to_token_.end()};
}

Tokens Tokenizer::tokenize(std::string_view text) const { return tokenize_text(text, lowercase_); }

TokenId Tokenizer::id_of(const std::string& token) const {
    auto it = token_to_id_.find(token);
    return it == token_to_id_.end() ? SpecialTokens::kUnknown : it->second;
}

const std::string& Tokenizer::token_of(TokenId id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= id_to_token_.size()) {
        return id_to_token_[SpecialTokens::kUnknown];
    }
    return id_to_token_[static_cast<std::size_t>(id)];
}

TokenIds Tokenizer::encode(std::span<const std::string> tokens) const {
    TokenIds ids;
    ids.reserve(tokens.size());
    for (const auto& t : tokens) ids.push_back(id_of(t));
    return ids;
}

Tokens Tokenizer::decode(std::span<const TokenId> ids, bool skip_special) const {
    Tokens out;
    out.reserve(ids.size());
    for (TokenId id : ids) {
        if (skip_special && id >= 0 && id < SpecialTokens::kCount && id != SpecialTokens::kUnknown) continue;
        out.push_back(token_of(id));
    }
    return out;
}

}  // namespace qfs
