#pragma once

#include <filesystem>
#include <optional>

#include <nlohmann/json.hpp>

#include "qfs/config.hpp"
#include "qfs/model.hpp"
#include "qfs/optimizer.hpp"
#include "qfs/tokenizer.hpp"

namespace qfs {

// Layout (all integers little-endian):
//   8 bytes   magic "QFSCKPT\0"
//   u32       format version
//   u64       header length H, then H bytes of UTF-8 JSON
//   u64       tensor count N, then N blocks of
//               u32 name length, name bytes,
//               u64 rows, u64 cols, rows*cols f64 values (row-major)
// Tensor names: "param/<name>", "buffer/<name>", "adam.m/<name>", "adam.v/<name>".
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
    Seq2SeqModel model;
    Tokenizer tokenizer;
    SegmentationConfig segmentation;
    TrainConfig train;
    AdamW optimizer;
    int epoch = 0;
};

void save_checkpoint(const std::filesystem::path& path, const Seq2SeqModel& model, const Tokenizer& tokenizer,
                     const SegmentationConfig& segmentation, const TrainConfig& train, const AdamW* optimizer,
                     int epoch);

/// Throws StructuralError when `expected` is given and disagrees with the
/// stored model config, or when tensor shapes do not fit the config.
Checkpoint load_checkpoint(const std::filesystem::path& path, const std::optional<ModelConfig>& expected = {});

}  // namespace qfs
