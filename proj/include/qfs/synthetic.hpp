#pragma once

#include <cstdint>

#include "qfs/config.hpp"
#include "qfs/corpus.hpp"
#include "qfs/tokenizer.hpp"

namespace qfs {

/// Copy-task corpus: each document is filler words with one planted run of
/// content words. The reference is that run and the gold span covers it.
struct SyntheticConfig {
    int instances = 20;
    int document_length = 200;
    int filler_words = 34;
    int content_words = 10;
    int min_summary_length = 6;
    int max_summary_length = 8;
    std::uint64_t seed = 0;

    void validate() const;
};

DatasetSplit make_copy_corpus(const SyntheticConfig& config, SplitName name = SplitName::kTrain);

/// Every word the generator can emit, so the vocabulary size is fixed at
/// kCount + 1 + filler_words + content_words (the 1 is the query word).
Tokenizer synthetic_tokenizer(const SyntheticConfig& config);

/// Small-model settings that train on the copy corpus in minutes on one
/// CPU core. Data paths are left empty.
RunConfig synthetic_run_config(std::uint64_t seed = 0);

}  // namespace qfs
