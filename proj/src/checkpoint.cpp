#include "qfs/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>

#include "qfs/errors.hpp"

namespace qfs {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

using nlohmann::json;

namespace {

constexpr char kMagic[8] = {'Q', 'F', 'S', 'C', 'K', 'P', 'T', '\0'};

template <typename T>
void put(std::ostream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in, const std::filesystem::path& path) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw StructuralError(path.string() + ": truncated checkpoint");
    return v;
}

void put_tensor(std::ostream& out, const std::string& name, const ag::Matrix& m) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put<std::uint64_t>(out, static_cast<std::uint64_t>(m.rows()));
    put<std::uint64_t>(out, static_cast<std::uint64_t>(m.cols()));
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) put<double>(out, m(r, c));
    }
}

ag::Matrix row_matrix(const ag::RowVector& v) { return ag::Matrix(v); }

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Seq2SeqModel& model, const Tokenizer& tokenizer,
                     const SegmentationConfig& segmentation, const TrainConfig& train, const AdamW* optimizer,
                     int epoch) {
    json header{{"model", model.config()},
                {"segmentation", segmentation},
                {"train", train},
                {"tokenizer", {{"lowercase", tokenizer.lowercase()}, {"vocabulary", tokenizer.regular_tokens()}}},
                {"epoch", epoch},
                {"optimizer_steps", optimizer ? optimizer->step_count() : 0}};
    const std::string header_text = header.dump();

    std::vector<std::pair<std::string, ag::Matrix>> tensors;
    const auto& params = model.parameters();
    for (std::size_t i = 0; i < params.size(); ++i) tensors.emplace_back("param/" + params.name(i), params[i].value());
    const auto& bn = model.projection_norm();
    tensors.emplace_back("buffer/projection.norm.running_mean", row_matrix(bn.running_mean));
    tensors.emplace_back("buffer/projection.norm.running_var", row_matrix(bn.running_var));
    if (optimizer) {
        for (const auto& [name, m] : optimizer->state()) {
            tensors.emplace_back("adam.m/" + name, m.first);
            tensors.emplace_back("adam.v/" + name, m.second);
        }
    }

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write checkpoint " + path.string());
    out.write(kMagic, sizeof(kMagic));
    put<std::uint32_t>(out, kCheckpointVersion);
    put<std::uint64_t>(out, header_text.size());
    out.write(header_text.data(), static_cast<std::streamsize>(header_text.size()));
    put<std::uint64_t>(out, tensors.size());
    for (const auto& [name, m] : tensors) put_tensor(out, name, m);
    if (!out) throw DataError("write failed for checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path, const std::optional<ModelConfig>& expected) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot read checkpoint " + path.string());
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
        throw StructuralError(path.string() + ": not a checkpoint file");
    }
    const auto version = get<std::uint32_t>(in, path);
    if (version != kCheckpointVersion) {
        throw StructuralError(path.string() + ": unsupported checkpoint version " + std::to_string(version));
    }
    const auto header_len = get<std::uint64_t>(in, path);
    std::string header_text(header_len, '\0');
    in.read(header_text.data(), static_cast<std::streamsize>(header_len));
    if (!in) throw StructuralError(path.string() + ": truncated checkpoint header");

    json header;
    ModelConfig model_config;
    SegmentationConfig segmentation;
    TrainConfig train;
    std::vector<std::string> vocabulary;
    bool lowercase = true;
    int epoch = 0;
    std::int64_t steps = 0;
    try {
        header = json::parse(header_text);
        model_config = header.at("model").get<ModelConfig>();
        segmentation = header.at("segmentation").get<SegmentationConfig>();
        train = header.at("train").get<TrainConfig>();
        lowercase = header.at("tokenizer").at("lowercase").get<bool>();
        vocabulary = header.at("tokenizer").at("vocabulary").get<std::vector<std::string>>();
        epoch = header.at("epoch").get<int>();
        steps = header.at("optimizer_steps").get<std::int64_t>();
    } catch (const json::exception& e) {
        throw StructuralError(path.string() + ": bad checkpoint header: " + e.what());
    }
    if (expected && !(*expected == model_config)) {
        throw StructuralError(path.string() + ": checkpoint model config " + json(model_config).dump() +
                              " does not match expected " + json(*expected).dump());
    }

    Checkpoint ckpt{Seq2SeqModel(model_config), Tokenizer::from_tokens(vocabulary, lowercase), segmentation, train,
                    AdamW(train.adam()), epoch};
    if (ckpt.tokenizer.vocab_size() != model_config.vocab_size) {
        throw StructuralError(path.string() + ": vocabulary has " + std::to_string(ckpt.tokenizer.vocab_size()) +
                              " entries but model vocab_size is " + std::to_string(model_config.vocab_size));
    }

    std::map<std::string, AdamW::Moments> moments;
    std::size_t params_seen = 0;
    const auto count = get<std::uint64_t>(in, path);
    auto& params = ckpt.model.parameters();
    for (std::uint64_t t = 0; t < count; ++t) {
        const auto name_len = get<std::uint32_t>(in, path);
        std::string name(name_len, '\0');
        in.read(name.data(), name_len);
        const auto rows = static_cast<Eigen::Index>(get<std::uint64_t>(in, path));
        const auto cols = static_cast<Eigen::Index>(get<std::uint64_t>(in, path));
        ag::Matrix m(rows, cols);
        for (Eigen::Index r = 0; r < rows; ++r) {
            for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = get<double>(in, path);
        }
        auto expect_shape = [&](const ag::Matrix& target) {
            if (target.rows() != rows || target.cols() != cols) {
                throw StructuralError(path.string() + ": tensor " + name + " has shape " + std::to_string(rows) + "x" +
                                      std::to_string(cols) + ", model expects " + std::to_string(target.rows()) + "x" +
                                      std::to_string(target.cols()));
            }
        };
        if (name.starts_with("param/")) {
            const auto pname = name.substr(6);
            if (!params.contains(pname)) throw StructuralError(path.string() + ": unknown parameter " + pname);
            auto& p = params.at(pname);
            expect_shape(p.value());
            p.mutable_value() = std::move(m);
            ++params_seen;
        } else if (name == "buffer/projection.norm.running_mean") {
            expect_shape(row_matrix(ckpt.model.projection_norm().running_mean));
            ckpt.model.projection_norm().running_mean = m.row(0);
        } else if (name == "buffer/projection.norm.running_var") {
            expect_shape(row_matrix(ckpt.model.projection_norm().running_var));
            ckpt.model.projection_norm().running_var = m.row(0);
        } else if (name.starts_with("adam.m/")) {
            moments[name.substr(7)].first = std::move(m);
        } else if (name.starts_with("adam.v/")) {
            moments[name.substr(7)].second = std::move(m);
        } else {
            throw StructuralError(path.string() + ": unknown tensor block " + name);
        }
    }
    if (params_seen != params.size()) {
        throw StructuralError(path.string() + ": checkpoint holds " + std::to_string(params_seen) + " of " +
                              std::to_string(params.size()) + " parameters");
    }
    ckpt.optimizer.restore(steps, std::move(moments));
    return ckpt;
}

}  // namespace qfs
