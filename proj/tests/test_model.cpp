#include <gtest/gtest.h>

#include <cmath>

#include "qfs/errors.hpp"
#include "qfs/losses.hpp"
#include "qfs/model.hpp"
#include "qfs/trainer.hpp"
#include "support/generators.hpp"
#include "support/gradcheck.hpp"

namespace qfs {
namespace {

using ag::Matrix;
using testing::Gen;
using testing::tiny_config;

std::vector<TokenIds> random_inputs(Gen& g, std::size_t n, std::size_t len, int vocab) {
    std::vector<TokenIds> out;
    for (std::size_t i = 0; i < n; ++i) {
        TokenIds in{SpecialTokens::kBegin};
        for (int t : g.ids(len, SpecialTokens::kCount, vocab - 1)) in.push_back(t);
        in.push_back(SpecialTokens::kEnd);
        out.push_back(in);
    }
    return out;
}

TokenIds random_target(Gen& g, std::size_t len, int vocab) {
    TokenIds t{SpecialTokens::kBegin};
    for (int id : g.ids(len - 1, SpecialTokens::kCount, vocab - 1)) t.push_back(id);
    return t;
}

TEST(Model, ConfigValidation) {
    auto c = tiny_config(0);
    c.num_heads = 3;
    EXPECT_THROW(c.validate(), ConfigError);
    c = tiny_config(0, 4);
    EXPECT_THROW(c.validate(), ConfigError);
    c = tiny_config(0);
    c.model_dim = 0;
    EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Model, InitializationIsSeeded) {
    Seq2SeqModel a(tiny_config(3)), b(tiny_config(3)), c(tiny_config(4));
    ASSERT_EQ(a.parameters().size(), b.parameters().size());
    bool any_diff = false;
    for (std::size_t i = 0; i < a.parameters().size(); ++i) {
        EXPECT_EQ(a.parameters().name(i), b.parameters().name(i));
        EXPECT_EQ(a.parameters()[i].value(), b.parameters()[i].value());
        any_diff = any_diff || a.parameters()[i].value() != c.parameters()[i].value();
    }
    EXPECT_TRUE(any_diff);
}

TEST(Model, EncoderShapesAndIndependence) {
    Gen g(1);
    Seq2SeqModel m(tiny_config(1));
    m.set_training(false);
    auto inputs = random_inputs(g, 3, 6, 16);
    inputs.push_back(inputs[0]);
    const auto enc = m.encode_segments(inputs);
    ASSERT_EQ(enc.size(), 4u);
    for (std::size_t i = 0; i < enc.size(); ++i) {
        EXPECT_EQ(enc[i].token_states.rows(), static_cast<Eigen::Index>(inputs[i].size()));
        EXPECT_EQ(enc[i].token_states.cols(), 16);
        EXPECT_EQ(enc[i].head_state().value(), enc[i].token_states.value().row(0));
    }
    EXPECT_EQ(enc[0].token_states.value(), enc[3].token_states.value());

    // k segments together equal k single-segment calls, in any order.
    const std::vector<TokenIds> reversed(inputs.rbegin(), inputs.rend());
    const auto rev = m.encode_segments(reversed);
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        const auto single = m.encode_segments(std::span<const TokenIds>(&inputs[i], 1));
        EXPECT_EQ(single[0].token_states.value(), enc[i].token_states.value());
        EXPECT_EQ(rev[inputs.size() - 1 - i].token_states.value(), enc[i].token_states.value());
    }
}

TEST(Model, SegEncStateShapes) {
    Gen g(2);
    Seq2SeqModel m(tiny_config(2));
    const auto inputs = random_inputs(g, 3, 4, 16);
    const auto state = m.segenc(inputs);
    EXPECT_EQ(state.memory.rows(), 18);
    EXPECT_EQ(state.segment_probs.rows(), 3);
    for (Eigen::Index i = 0; i < 3; ++i) {
        EXPECT_GT(state.segment_probs.value()(i, 0), 0.0);
        EXPECT_LT(state.segment_probs.value()(i, 0), 1.0);
    }
}

TEST(Model, LengthErrorsNameTheSegment) {
    auto c = tiny_config(0);
    c.max_positions = 8;
    Seq2SeqModel m(c);
    std::vector<TokenIds> inputs{TokenIds(5, 6), TokenIds(9, 6)};
    try {
        m.encode_segments(inputs);
        FAIL();
    } catch (const LengthError& e) {
        EXPECT_NE(std::string(e.what()).find("segment input 1"), std::string::npos);
    }
    const auto enc = m.encode_segments(std::span<const TokenIds>(inputs.data(), 1));
    EXPECT_THROW(m.decode_teacher_forced(enc[0].token_states, TokenIds(9, 1)), LengthError);
    EXPECT_THROW(m.decode_teacher_forced(enc[0].token_states, TokenIds{6, 7}), StructuralError);
}

TEST(Model, ZeroScorerGivesHalf) {
    Gen g(3);
    Seq2SeqModel m(tiny_config(3));
    m.parameters().at("scorer.weight").mutable_value().setZero();
    m.parameters().at("scorer.bias").mutable_value().setZero();
    const auto enc = m.encode_segments(random_inputs(g, 4, 5, 16));
    const auto p = m.score_segments(enc).value();
    for (Eigen::Index i = 0; i < p.rows(); ++i) EXPECT_EQ(p(i, 0), 0.5);

    m.parameters().at("scorer.bias").mutable_value().setConstant(3.0);
    const auto up = m.score_segments(enc).value();
    for (Eigen::Index i = 0; i < p.rows(); ++i) EXPECT_GT(up(i, 0), 0.95);
}

TEST(Model, ScorerGradientMatchesFiniteDifferences) {
    Gen g(4);
    Seq2SeqModel m(tiny_config(4));
    const auto inputs = random_inputs(g, 3, 4, 16);
    const Matrix w = g.matrix(3, 1);
    auto& weight = m.parameters().at("scorer.weight");
    auto& bias = m.parameters().at("scorer.bias");
    auto f = [&] {
        const auto enc = m.encode_segments(inputs);
        const auto p = m.score_segments(enc);
        return ag::matmul(ag::Var(Matrix(w.transpose())), p);
    };
    m.parameters().zero_grad();
    f().backward();
    const Matrix analytic_w = weight.grad();
    const Matrix analytic_b = bias.grad();
    ag::NoGradGuard guard;
    Matrix numeric_w(analytic_w.rows(), analytic_w.cols());
    for (Eigen::Index k = 0; k < weight.value().size(); ++k) {
        const double s = weight.value().data()[k];
        weight.mutable_value().data()[k] = s + 1e-3;
        const double plus = f().item();
        weight.mutable_value().data()[k] = s - 1e-3;
        const double minus = f().item();
        weight.mutable_value().data()[k] = s;
        numeric_w.data()[k] = (plus - minus) / 2e-3;
    }
    const double rel = (analytic_w - numeric_w).norm() / (analytic_w.norm() + numeric_w.norm());
    EXPECT_LT(rel, 1e-4);
    const double b0 = bias.value()(0, 0);
    bias.mutable_value()(0, 0) = b0 + 1e-3;
    const double plus = f().item();
    bias.mutable_value()(0, 0) = b0 - 1e-3;
    const double minus = f().item();
    bias.mutable_value()(0, 0) = b0;
    EXPECT_NEAR(analytic_b(0, 0), (plus - minus) / 2e-3, 1e-4 * std::abs(analytic_b(0, 0)) + 1e-9);
}

TEST(Model, DecoderIsCausal) {
    Gen g(5);
    Seq2SeqModel m(tiny_config(5));
    m.set_training(false);
    const auto enc = m.encode_segments(random_inputs(g, 2, 5, 16));
    const auto memory = Seq2SeqModel::concat_memory(enc);
    const TokenIds target = random_target(g, 8, 16);
    const Matrix base = m.decode_teacher_forced(memory, target).value();
    EXPECT_EQ(base.rows(), 8);
    EXPECT_EQ(base.cols(), 16);
    for (std::size_t t = 1; t < target.size(); ++t) {
        TokenIds changed = target;
        changed[t] = changed[t] == 7 ? 8 : 7;
        const Matrix moved = m.decode_teacher_forced(memory, changed).value();
        for (std::size_t r = 0; r < target.size(); ++r) {
            const bool same = base.row(static_cast<Eigen::Index>(r)) == moved.row(static_cast<Eigen::Index>(r));
            if (r < t) {
                EXPECT_TRUE(same) << "row " << r << " changed after editing position " << t;
            } else {
                EXPECT_FALSE(same) << "row " << r << " ignored position " << t;
            }
        }
    }
}

TEST(Model, CrossAttentionIsLive) {
    Gen g(6);
    Seq2SeqModel m(tiny_config(6));
    m.set_training(false);
    const auto enc = m.encode_segments(random_inputs(g, 2, 5, 16));
    const auto memory = Seq2SeqModel::concat_memory(enc);
    const TokenIds target = random_target(g, 4, 16);
    const Matrix a = m.decode_teacher_forced(memory, target).value();
    const Matrix b = m.decode_teacher_forced(ag::Var(Matrix::Zero(memory.rows(), memory.cols())), target).value();
    EXPECT_GT((a - b).norm(), 1e-6);
    // The cached and uncached paths agree.
    const Matrix c = m.decode_teacher_forced(m.prepare_memory(memory), target).value();
    EXPECT_EQ(a, c);
}

// Four regular tokens on top of the reserved block.
ModelConfig small_vocab_config(std::uint64_t seed) { return tiny_config(seed, SpecialTokens::kCount + 4); }

TEST(Model, GreedyMatchesTwoStepEnumeration) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        Gen g(seed);
        Seq2SeqModel m(small_vocab_config(seed));
        const int vocab = static_cast<int>(m.config().vocab_size);
        const auto memory = Seq2SeqModel::concat_memory(m.encode_segments(random_inputs(g, 2, 3, vocab)));
        const auto generated = m.generate(memory, 2);

        ag::NoGradGuard guard;
        m.set_training(false);
        auto log_softmax_row = [](const Matrix& logits, Eigen::Index row) {
            const Eigen::RowVectorXd r = logits.row(row);
            const double z = std::log((r.array() - r.maxCoeff()).exp().sum()) + r.maxCoeff();
            return Eigen::RowVectorXd(r.array() - z);
        };
        const auto first = log_softmax_row(m.decode_teacher_forced(memory, TokenIds{1}).value(), 0);
        // Enumerate every (a, b) continuation, keep the joint log-probs.
        int best_a = -1;
        for (int a = 0; a < vocab; ++a) {
            if (best_a < 0 || first(a) > first(best_a)) best_a = a;
        }
        ASSERT_FALSE(generated.empty());
        EXPECT_EQ(generated[0], best_a);
        if (best_a == SpecialTokens::kEnd) {
            EXPECT_EQ(generated.size(), 1u);
            continue;
        }
        std::vector<double> second_best(static_cast<std::size_t>(vocab), 0.0);
        int best_b = -1;
        for (int a = 0; a < vocab; ++a) {
            const auto second = log_softmax_row(m.decode_teacher_forced(memory, TokenIds{1, a}).value(), 1);
            for (int b = 0; b < vocab; ++b) {
                if (a == best_a && (best_b < 0 || second(b) > second(best_b))) best_b = b;
            }
        }
        ASSERT_EQ(generated.size(), 2u);
        EXPECT_EQ(generated[1], best_b);
    }
}

TEST(Model, GenerateLengthAndStop) {
    Gen g(7);
    Seq2SeqModel m(tiny_config(7));
    const auto memory = Seq2SeqModel::concat_memory(m.encode_segments(random_inputs(g, 2, 4, 16)));
    EXPECT_EQ(m.generate(memory, 1).size(), 1u);
    EXPECT_EQ(m.generate(memory, 5), m.generate(memory, 5));
    EXPECT_TRUE(m.training());

    // Force </s> at every step through the lm_head bias.
    auto& bias = m.parameters().at("lm_head.bias");
    bias.mutable_value().setZero();
    bias.mutable_value()(0, SpecialTokens::kEnd) = 1e6;
    EXPECT_EQ(m.generate(memory, 10), (TokenIds{SpecialTokens::kEnd}));
}

TEST(Model, ProjectionClosedFormInEvalMode) {
    auto c = tiny_config(8, 6);
    c.projection_hidden_dim = 3;
    c.projection_out_dim = 2;
    Seq2SeqModel m(c);
    auto& p = m.parameters();
    p.at("projection.in.weight").mutable_value().setConstant(0.7);
    p.at("projection.in.bias").mutable_value() = Matrix{{0.5, -1.0, 2.0}};
    p.at("projection.norm.weight").mutable_value() = Matrix{{2.0, 1.0, 0.5}};
    p.at("projection.norm.bias").mutable_value() = Matrix{{0.1, 0.2, -0.3}};
    p.at("projection.out.weight").mutable_value() = Matrix{{1.0, -1.0}, {0.5, 0.5}, {-2.0, 3.0}};
    p.at("projection.out.bias").mutable_value() = Matrix{{0.25, -0.25}};
    auto& bn = m.projection_norm();
    bn.running_mean = Eigen::RowVectorXd{{0.1, 0.0, 1.0}};
    bn.running_var = Eigen::RowVectorXd{{4.0, 1.0, 0.25}};
    m.set_training(false);

    const Matrix out = m.project(ag::Var(Matrix::Zero(3, 6))).value();
    // h_j = relu(gamma_j * (b_j - mean_j) / sqrt(var_j + eps) + beta_j)
    const double eps = 1e-5;
    const double h0 = std::max(0.0, 2.0 * (0.5 - 0.1) / std::sqrt(4.0 + eps) + 0.1);
    const double h1 = std::max(0.0, 1.0 * (-1.0 - 0.0) / std::sqrt(1.0 + eps) + 0.2);
    const double h2 = std::max(0.0, 0.5 * (2.0 - 1.0) / std::sqrt(0.25 + eps) - 0.3);
    const double o0 = h0 * 1.0 + h1 * 0.5 + h2 * -2.0 + 0.25;
    const double o1 = h0 * -1.0 + h1 * 0.5 + h2 * 3.0 - 0.25;
    ASSERT_EQ(out.rows(), 3);
    ASSERT_EQ(out.cols(), 2);
    for (Eigen::Index r = 0; r < 3; ++r) {
        EXPECT_NEAR(out(r, 0), o0, 1e-12);
        EXPECT_NEAR(out(r, 1), o1, 1e-12);
    }
    EXPECT_THROW(m.project(ag::Var(Matrix::Zero(3, 5))), StructuralError);
}

TEST(Model, ProjectionGradientsMatchFiniteDifferences) {
    Gen g(9);
    Seq2SeqModel m(tiny_config(9));
    const ag::Var logits(g.matrix(5, 16, 2.0));
    const Matrix w = g.matrix(5, 8);
    auto f = [&] {
        const auto out = m.project(logits);
        return ag::matmul(ag::matmul(ag::Var(Matrix::Ones(1, 5)), ag::multiply_mask(out, w)),
                          ag::Var(Matrix::Ones(8, 1)));
    };
    for (const auto& check : testing::check_gradients(m.parameters(), f, 1e-6)) {
        if (check.name.rfind("projection.", 0) != 0) continue;
        if (check.name == "projection.in.bias") {
            // Batch normalization removes any per-column shift.
            EXPECT_LT(check.max_abs_error, 1e-6);
            EXPECT_LT(check.analytic_norm, 1e-10);
            continue;
        }
        EXPECT_GT(check.analytic_norm, 0.0) << check.name;
        EXPECT_LT(check.relative_error, 1e-4) << check.name;
    }
}

TEST(Model, RunningStatisticsTrackTraining) {
    Gen g(10);
    Seq2SeqModel m(tiny_config(10));
    const auto before = m.projection_norm().running_mean;
    m.project(ag::Var(g.matrix(4, 16)));
    EXPECT_NE(m.projection_norm().running_mean, before);
    m.set_training(false);
    const auto frozen = m.projection_norm().running_mean;
    m.project(ag::Var(g.matrix(4, 16)));
    EXPECT_EQ(m.projection_norm().running_mean, frozen);
}

TEST(Model, EvalForwardIsDeterministic) {
    Gen g(11);
    auto c = tiny_config(11);
    c.dropout_rate = 0.3;
    Seq2SeqModel a(c), b(c);
    a.set_training(false);
    b.set_training(false);
    const auto inputs = random_inputs(g, 2, 5, 16);
    const auto target = random_target(g, 4, 16);
    const auto ma = Seq2SeqModel::concat_memory(a.encode_segments(inputs));
    const auto mb = Seq2SeqModel::concat_memory(b.encode_segments(inputs));
    EXPECT_EQ(a.decode_teacher_forced(ma, target).value(), b.decode_teacher_forced(mb, target).value());
}

TEST(Model, EveryParameterReceivesGradient) {
    Gen g(12);
    Seq2SeqModel m(tiny_config(12));
    TrainConfig tc;
    std::vector<bool> touched(m.parameters().size(), false);
    for (int k = 0; k < 3; ++k) {
        const auto ex = testing::toy_example(g, 16);
        m.parameters().zero_grad();
        compute_instance_loss(m, ex, tc).joint.backward();
        for (std::size_t i = 0; i < m.parameters().size(); ++i) {
            const auto& p = m.parameters()[i];
            if (p.has_grad() && p.grad().cwiseAbs().maxCoeff() > 0) touched[i] = true;
        }
    }
    for (std::size_t i = 0; i < touched.size(); ++i) EXPECT_TRUE(touched[i]) << m.parameters().name(i);
}

TEST(Model, InitialLossNearUniform) {
    Gen g(13);
    auto c = tiny_config(13, 50);
    c.model_dim = 64;
    c.num_heads = 2;
    Seq2SeqModel m(c);
    double total = 0.0;
    std::size_t tokens = 0;
    for (int k = 0; k < 8; ++k) {
        const auto inputs = random_inputs(g, 3, 10, 50);
        const auto target = random_target(g, 8, 50);
        const auto memory = Seq2SeqModel::concat_memory(m.encode_segments(inputs));
        total += generation_loss(m.decode_teacher_forced(memory, target), target).item();
        tokens += target.size();
    }
    const double per_token = total / static_cast<double>(tokens);
    EXPECT_NEAR(per_token, std::log(50.0), 0.2 * std::log(50.0));
}

}  // namespace
}  // namespace qfs
