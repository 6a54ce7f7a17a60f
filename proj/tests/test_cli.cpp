#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "qfs/cli.hpp"

namespace qfs {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct Result {
    int code;
    std::string out;
    std::string err;
};

Result run(std::vector<std::string> args) {
    args.insert(args.begin(), "qfs");
    std::ostringstream out, err;
    const int code = cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

std::vector<json> read_jsonl(const fs::path& path) {
    std::ifstream in(path);
    std::vector<json> out;
    for (std::string line; std::getline(in, line);) {
        if (!line.empty()) out.push_back(json::parse(line));
    }
    return out;
}

json read_json(const fs::path& path) {
    std::ifstream in(path);
    return json::parse(in);
}

class CliTest : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() /
               ("qfs_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    std::string path(const std::string& name) const { return (dir_ / name).string(); }

    void write(const std::string& name, const std::string& text) const {
        std::ofstream(dir_ / name, std::ios::binary) << text;
    }

    /// Small synthetic corpus plus labels for its training split.
    void make_corpus() {
        ASSERT_EQ(run({"make-synthetic", "-o", path("data"), "--instances", "3", "--validation-instances", "2",
                       "--document-length", "40"})
                      .code,
                  0);
        ASSERT_EQ(run({"label", "-d", path("data/train.jsonl"), "-o", path("data/labels.jsonl"), "-m", "spans",
                       "--segment-length", "16"})
                      .code,
                  0);
    }

    std::vector<std::string> train_args(const std::string& out) const {
        return {"train",          "-c",           path("data/config.json"), "--labels", path("data/labels.jsonl"),
                "-o",             path(out),      "--epochs",               "1",        "--segment-length",
                "16"};
    }

    fs::path dir_;
};

TEST_F(CliTest, HelpAndUsageErrors) {
    EXPECT_EQ(run({"--help"}).code, cli::kOk);
    EXPECT_EQ(run({"train", "--help"}).code, cli::kOk);
    EXPECT_EQ(run({"no-such-command"}).code, cli::kUsage);
    EXPECT_EQ(run({"ingest", "-i", path("x")}).code, cli::kUsage);
    EXPECT_EQ(run({"label", "-d", path("x"), "-o", path("y"), "--threshold", "abc"}).code, cli::kUsage);
}

TEST_F(CliTest, IngestErrors) {
    write("one.jsonl", "{}\n");
    const auto bad_format = run({"ingest", "-i", path("one.jsonl"), "-f", "xml", "-o", path("out.jsonl")});
    EXPECT_EQ(bad_format.code, cli::kUsage) << bad_format.err;
    EXPECT_EQ(run({"ingest", "-i", path("missing"), "-f", "qmsum", "-o", path("out.jsonl")}).code, cli::kData);
    EXPECT_EQ(run({"ingest", "-i", path("one.jsonl"), "-f", "qmsum", "-o", path("out.jsonl")}).code, cli::kData);
}

TEST_F(CliTest, IngestQmsumWritesManifest) {
    json turns = json::array({{{"speaker", "A"}, {"content", "we should ship the remote"}},
                              {{"speaker", "B"}, {"content", "the budget is tight"}}});
    json rec{{"meeting_transcripts", turns},
             {"general_query_list", json::array({{{"query", "Summarize"}, {"answer", "Remote and budget."}}})},
             {"specific_query_list", json::array({{{"query", "Budget?"},
                                                   {"answer", "Tight."},
                                                   {"relevant_text_span", json::array({json::array({1, 1})})}}})}};
    fs::create_directories(dir_ / "raw");
    write("raw/m1.json", rec.dump());
    const auto r = run({"ingest", "-i", path("raw"), "-f", "qmsum", "-o", path("norm/all.jsonl")});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(read_jsonl(path("norm/all.jsonl")).size(), 2u);
    const auto manifest = read_json(path("norm/all.jsonl.manifest.json"));
    EXPECT_EQ(manifest.at("command"), "ingest");
    EXPECT_EQ(manifest.at("checksums").size(), 1u);
}

TEST_F(CliTest, LabelErrors) {
    make_corpus();
    const auto zero = run({"label", "-d", path("data/train.jsonl"), "-o", path("l.jsonl"), "-m", "bigram", "-t", "0"});
    EXPECT_EQ(zero.code, cli::kUsage);
    EXPECT_NE(zero.err.find("threshold"), std::string::npos) << zero.err;
    EXPECT_EQ(run({"label", "-d", path("nope.jsonl"), "-o", path("l.jsonl"), "-m", "spans"}).code, cli::kData);
    const auto bigram = run({"label", "-d", path("data/train.jsonl"), "-o", path("l.jsonl"), "-m", "bigram",
                             "--segment-length", "16"});
    EXPECT_EQ(bigram.code, 0) << bigram.err;
    EXPECT_EQ(read_jsonl(path("l.jsonl")).size(), 3u);
}

TEST_F(CliTest, TrainRejectsBadWeights) {
    make_corpus();
    auto args = train_args("run");
    args.insert(args.end(), {"--lambda-gen", "0.9"});
    const auto r = run(args);
    EXPECT_EQ(r.code, cli::kUsage);
    for (const char* field : {"lambda_gen", "lambda_cls", "lambda_cont"}) {
        EXPECT_NE(r.err.find(field), std::string::npos) << r.err;
    }
    EXPECT_FALSE(fs::exists(path("run/checkpoints")));
}

TEST_F(CliTest, TrainDivergenceExitsNumeric) {
    make_corpus();
    auto args = train_args("run");
    args[8] = "3";
    args.insert(args.end(), {"--lr", "1e308", "--weight-decay", "0"});
    const auto r = run(args);
    EXPECT_EQ(r.code, cli::kNumeric) << r.err;
    EXPECT_NE(r.err.find("non-finite"), std::string::npos) << r.err;
}

TEST_F(CliTest, EndToEnd) {
    make_corpus();
    const auto t = run(train_args("run"));
    ASSERT_EQ(t.code, 0) << t.err;
    for (const char* f : {"config.json", "vocab.txt", "manifest.json", "events.jsonl", "reports.json", "best.json",
                          "checkpoints/epoch-001.ckpt"}) {
        EXPECT_TRUE(fs::exists(dir_ / "run" / f)) << f;
    }
    const auto manifest = read_json(path("run/manifest.json"));
    EXPECT_EQ(manifest.at("command"), "train");
    EXPECT_TRUE(manifest.at("checksums").contains("checkpoints/epoch-001.ckpt"));
    EXPECT_EQ(read_json(path("run/config.json")).at("train").at("epochs"), 1);

    const auto g = run({"generate", "-k", path("run/checkpoints/epoch-001.ckpt"), "-d", path("data/validation.jsonl"),
                        "-o", path("gen.jsonl"), "--max-length", "5"});
    ASSERT_EQ(g.code, 0) << g.err;
    const auto gens = read_jsonl(path("gen.jsonl"));
    ASSERT_EQ(gens.size(), 2u);
    for (const auto& line : gens) EXPECT_LE(line.at("tokens").size(), 5u);

    const auto e = run({"evaluate", "-d", path("data/validation.jsonl"), "-o", path("eval"), "-k",
                        path("run/checkpoints/epoch-001.ckpt")});
    ASSERT_EQ(e.code, 0) << e.err;
    EXPECT_TRUE(fs::exists(dir_ / "eval" / "report.json"));
}

TEST_F(CliTest, EvaluateStubsAndErrors) {
    make_corpus();
    const auto copy = run({"evaluate", "-d", path("data/validation.jsonl"), "-o", path("copy"), "--copy-stub"});
    ASSERT_EQ(copy.code, 0) << copy.err;
    const auto report = read_json(path("copy/report.json"));
    for (const char* k : {"rouge1", "rouge2", "rougeL", "mean_rouge"}) EXPECT_EQ(report.at(k).get<double>(), 1.0) << k;
    const auto empty = run({"evaluate", "-d", path("data/validation.jsonl"), "-o", path("empty"), "--empty-stub"});
    ASSERT_EQ(empty.code, 0);
    EXPECT_EQ(read_json(path("empty/report.json")).at("mean_rouge").get<double>(), 0.0);

    EXPECT_EQ(run({"evaluate", "-d", path("data/validation.jsonl"), "-o", path("x")}).code, cli::kUsage);
    EXPECT_EQ(run({"evaluate", "-d", path("data/validation.jsonl"), "-o", path("x"), "--copy-stub", "--empty-stub"})
                  .code,
              cli::kUsage);
    EXPECT_EQ(run({"evaluate", "-d", path("data/validation.jsonl"), "-o", path("x"), "-k", path("missing.ckpt")}).code,
              cli::kData);
    write("empty.jsonl", "");
    EXPECT_EQ(run({"evaluate", "-d", path("empty.jsonl"), "-o", path("x"), "--copy-stub"}).code, cli::kUsage);
}

TEST_F(CliTest, GenerateErrors) {
    make_corpus();
    write("junk.ckpt", "junk");
    EXPECT_EQ(run({"generate", "-k", path("missing.ckpt"), "-d", path("data/validation.jsonl"), "-o", path("g")}).code,
              cli::kData);
    EXPECT_EQ(run({"generate", "-k", path("junk.ckpt"), "-d", path("data/validation.jsonl"), "-o", path("g")}).code,
              cli::kData);
}

TEST_F(CliTest, SweepWritesTable) {
    make_corpus();
    auto args = train_args("sweep");
    args[0] = "sweep-tau";
    args.insert(args.end(), {"--grid", "0.6,0.2"});
    const auto r = run(args);
    ASSERT_EQ(r.code, 0) << r.err;
    std::ifstream in(path("sweep/sweep.tsv"));
    std::string header, first, second;
    std::getline(in, header);
    std::getline(in, first);
    std::getline(in, second);
    EXPECT_EQ(header, "tau\tmean_rouge\tbest_epoch\tstatus");
    EXPECT_EQ(first.rfind("0.2\t", 0), 0u) << first;
    EXPECT_EQ(second.rfind("0.6\t", 0), 0u) << second;
    EXPECT_TRUE(fs::exists(dir_ / "sweep" / "sweep.json"));
}

}  // namespace
}  // namespace qfs
