#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "qfs/checkpoint.hpp"
#include "qfs/errors.hpp"
#include "qfs/optimizer.hpp"
#include "qfs/trainer.hpp"
#include "support/generators.hpp"
#include "support/gradcheck.hpp"

namespace qfs {
namespace {

using ag::Matrix;
using testing::Gen;
namespace fs = std::filesystem;

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("qfs_ckpt_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

Tokenizer toy_tokenizer(std::size_t regular) {
    std::vector<std::string> tokens;
    for (std::size_t i = 0; i < regular; ++i) tokens.push_back("t" + std::to_string(i));
    return Tokenizer::from_tokens(tokens);
}

void backprop_toy(Seq2SeqModel& m, Gen& g) {
    m.parameters().zero_grad();
    compute_instance_loss(m, testing::toy_example(g, 16), TrainConfig{}).joint.backward();
}

TEST(AdamW, DecayExclusions) {
    EXPECT_TRUE(AdamW::decays("decoder.layers.0.self_attn.q.weight"));
    EXPECT_TRUE(AdamW::decays("lm_head.weight"));
    EXPECT_FALSE(AdamW::decays("encoder.0.attn.q.bias"));
    EXPECT_FALSE(AdamW::decays("encoder.0.norm1.weight"));
    EXPECT_FALSE(AdamW::decays("projection.norm.weight"));
    EXPECT_FALSE(AdamW::decays("scorer.bias"));
}

TEST(AdamW, ZeroLearningRateLeavesParametersUntouched) {
    Gen g(1);
    Seq2SeqModel m(testing::tiny_config(1));
    std::vector<Matrix> before;
    for (std::size_t i = 0; i < m.parameters().size(); ++i) before.push_back(m.parameters()[i].value());
    AdamW opt(AdamWConfig{0.0, 0.01});
    for (int s = 0; s < 3; ++s) {
        backprop_toy(m, g);
        opt.step(m.parameters());
    }
    EXPECT_EQ(opt.step_count(), 3);
    for (std::size_t i = 0; i < before.size(); ++i) {
        EXPECT_EQ(std::memcmp(before[i].data(), m.parameters()[i].value().data(),
                              sizeof(double) * static_cast<std::size_t>(before[i].size())),
                  0)
            << m.parameters().name(i);
    }
}

TEST(AdamW, FirstStepClosedForm) {
    ParameterStore params;
    params.add("w.weight", Matrix{{1.0, -2.0}});
    params.add("w.bias", Matrix{{0.5}});
    params.at("w.weight").mutable_grad() = Matrix{{0.3, -4.0}};
    params.at("w.bias").mutable_grad() = Matrix{{-0.2}};
    const double lr = 0.1, wd = 0.5;
    AdamW opt(AdamWConfig{lr, wd});
    opt.step(params);
    // Bias-corrected first step moves each element by lr * g / (|g| + eps).
    const double eps = 1e-8;
    const auto& w = params.at("w.weight").value();
    EXPECT_NEAR(w(0, 0), 1.0 * (1 - lr * wd) - lr * 0.3 / (0.3 + eps), 1e-12);
    EXPECT_NEAR(w(0, 1), -2.0 * (1 - lr * wd) + lr * 4.0 / (4.0 + eps), 1e-12);
    EXPECT_NEAR(params.at("w.bias").value()(0, 0), 0.5 + lr * 0.2 / (0.2 + eps), 1e-12);
}

TEST(AdamW, DecayOnlyWithZeroGradient) {
    ParameterStore params;
    params.add("a.weight", Matrix::Constant(2, 2, 3.0));
    params.add("a.norm.weight", Matrix::Constant(1, 2, 3.0));
    params.at("a.weight").mutable_grad() = Matrix::Zero(2, 2);
    params.at("a.norm.weight").mutable_grad() = Matrix::Zero(1, 2);
    AdamW opt(AdamWConfig{0.1, 0.2});
    opt.step(params);
    EXPECT_NEAR(params.at("a.weight").value()(0, 0), 3.0 * (1 - 0.02), 1e-12);
    EXPECT_EQ(params.at("a.norm.weight").value()(0, 0), 3.0);
}

TEST(Clipping, BoundsGlobalNorm) {
    Gen g(2);
    for (int trial = 0; trial < 50; ++trial) {
        ParameterStore params;
        const int n = g.integer(1, 5);
        for (int k = 0; k < n; ++k) {
            auto& v = params.add("p" + std::to_string(k), g.matrix(g.integer(1, 4), g.integer(1, 4)));
            v.mutable_grad() = g.matrix(v.rows(), v.cols(), g.real(0.01, 20.0));
        }
        std::vector<Matrix> before;
        for (std::size_t i = 0; i < params.size(); ++i) before.push_back(params[i].grad());
        const double clip = g.real(0.1, 5.0);
        const double pre = clip_grad_norm(params, clip);
        const double post = global_grad_norm(params);
        EXPECT_LE(post, clip + 1e-6);
        if (pre <= clip) {
            EXPECT_EQ(post, pre);
        } else {
            EXPECT_NEAR(post, clip, 1e-9);
            // Direction is preserved.
            for (std::size_t i = 0; i < params.size(); ++i) {
                EXPECT_LT((params[i].grad() - before[i] * (clip / pre)).norm(), 1e-12);
            }
        }
    }
}

TEST(Checkpoint, RoundTrip) {
    Gen g(3);
    const auto dir = scratch("roundtrip");
    Seq2SeqModel m(testing::tiny_config(3));
    AdamW opt(AdamWConfig{1e-3, 0.01});
    backprop_toy(m, g);
    opt.step(m.parameters());
    backprop_toy(m, g);
    opt.step(m.parameters());
    const auto tok = toy_tokenizer(11);
    SegmentationConfig seg;
    seg.segment_length = 24;
    seg.overlap_fraction = 0.25;
    TrainConfig tc;
    tc.temperature = 0.4;
    save_checkpoint(dir / "a.ckpt", m, tok, seg, tc, &opt, 7);

    const auto c = load_checkpoint(dir / "a.ckpt", m.config());
    EXPECT_EQ(c.epoch, 7);
    EXPECT_EQ(c.tokenizer.regular_tokens(), tok.regular_tokens());
    EXPECT_EQ(c.segmentation.segment_length, 24u);
    EXPECT_EQ(c.segmentation.overlap_fraction, 0.25);
    EXPECT_EQ(c.train.temperature, 0.4);
    ASSERT_EQ(c.model.parameters().size(), m.parameters().size());
    for (std::size_t i = 0; i < m.parameters().size(); ++i) {
        EXPECT_EQ(c.model.parameters().name(i), m.parameters().name(i));
        EXPECT_EQ(c.model.parameters()[i].value(), m.parameters()[i].value());
    }
    EXPECT_EQ(c.model.projection_norm().running_mean, m.projection_norm().running_mean);
    EXPECT_EQ(c.model.projection_norm().running_var, m.projection_norm().running_var);
    EXPECT_EQ(c.optimizer.step_count(), 2);
    ASSERT_EQ(c.optimizer.state().size(), opt.state().size());
    for (const auto& [name, mom] : opt.state()) {
        EXPECT_EQ(c.optimizer.state().at(name).first, mom.first);
        EXPECT_EQ(c.optimizer.state().at(name).second, mom.second);
    }

    // Saving the loaded checkpoint reproduces the file byte for byte.
    save_checkpoint(dir / "b.ckpt", c.model, c.tokenizer, c.segmentation, c.train, &c.optimizer, c.epoch);
    std::ifstream a(dir / "a.ckpt", std::ios::binary), b(dir / "b.ckpt", std::ios::binary);
    const std::string sa((std::istreambuf_iterator<char>(a)), {}), sb((std::istreambuf_iterator<char>(b)), {});
    EXPECT_EQ(sa, sb);
    fs::remove_all(dir);
}

TEST(Checkpoint, Errors) {
    const auto dir = scratch("errors");
    Seq2SeqModel m(testing::tiny_config(4));
    save_checkpoint(dir / "m.ckpt", m, toy_tokenizer(11), SegmentationConfig{}, TrainConfig{}, nullptr, 1);
    EXPECT_NO_THROW(load_checkpoint(dir / "m.ckpt"));

    auto other = testing::tiny_config(4);
    other.model_dim = 32;
    EXPECT_THROW(load_checkpoint(dir / "m.ckpt", other), StructuralError);
    EXPECT_THROW(load_checkpoint(dir / "missing.ckpt"), DataError);

    {
        std::ofstream out(dir / "junk.ckpt", std::ios::binary);
        out << "not a checkpoint at all";
    }
    EXPECT_THROW(load_checkpoint(dir / "junk.ckpt"), StructuralError);

    std::ifstream in(dir / "m.ckpt", std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)), {});
    {
        std::ofstream out(dir / "cut.ckpt", std::ios::binary);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 2));
    }
    EXPECT_THROW(load_checkpoint(dir / "cut.ckpt"), StructuralError);

    // A tokenizer that disagrees with the stored vocab size is rejected.
    EXPECT_THROW(save_checkpoint(dir / "bad.ckpt", m, toy_tokenizer(3), SegmentationConfig{}, TrainConfig{}, nullptr, 1);
                 load_checkpoint(dir / "bad.ckpt"), StructuralError);
    EXPECT_THROW(save_checkpoint(dir / "no_such_dir" / "x" / "y.ckpt", m, toy_tokenizer(11), SegmentationConfig{},
                                 TrainConfig{}, nullptr, 1),
                 DataError);
    fs::remove_all(dir);
}

TEST(Checkpoint, LoadedModelGeneratesIdentically) {
    Gen g(5);
    const auto dir = scratch("generate");
    Seq2SeqModel m(testing::tiny_config(5));
    save_checkpoint(dir / "m.ckpt", m, toy_tokenizer(11), SegmentationConfig{}, TrainConfig{}, nullptr, 1);
    auto c = load_checkpoint(dir / "m.ckpt");
    const auto ex = testing::toy_example(g, 16);
    const auto ma = Seq2SeqModel::concat_memory(m.encode_segments(ex.inputs));
    const auto mb = Seq2SeqModel::concat_memory(c.model.encode_segments(ex.inputs));
    EXPECT_EQ(m.generate(ma, 8), c.model.generate(mb, 8));
    fs::remove_all(dir);
}

}  // namespace
}  // namespace qfs
