#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

namespace {

namespace fs = std::filesystem;

struct CmdResult {
    int code = -1;
    std::string out;
    std::string err;
};

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::ostringstream os;
    os << f.rdbuf();
    return os.str();
}

// runs the installed binary inside `dir` so relative output paths land there
CmdResult run_cli(const fs::path& dir, const std::string& args) {
    const auto out_path = dir / "_stdout.txt";
    const auto err_path = dir / "_stderr.txt";
    const std::string cmd = "cd " + dir.string() + " && " + CTPE_CLI_PATH + " " + args + " > " +
                            out_path.string() + " 2> " + err_path.string();
    const int rc = std::system(cmd.c_str());
    CmdResult r;
    r.code = WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
    r.out = slurp(out_path);
    r.err = slurp(err_path);
    return r;
}

fs::path fresh_dir(const std::string& name) {
    fs::path dir = fs::path(testing::TempDir()) / ("ctpe_cli_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

// tiny corpus + training config shared by the pipeline tests
const char* kGen = "generate --topics 2 --candidates 12 --test-docs 3 --vocab-per-topic 20 "
                   "--shared-vocab 4 --noise 0.1 --seed 5 --corpus raw.jsonl --qrels qrels.txt";
const char* kPrep = "preprocess --input raw.jsonl --output corpus.bin --l-max 30";
const char* kTrain = "train --corpus corpus.bin --dim 8 --l 20 --n-f 2 --widths 1,2 --batch 10 "
                     "--epochs 2 --seed 5 --model ctpe.ckpt --table table.vec --log train.log";
const char* kEmbed = "embed --corpus corpus.bin --model ctpe.ckpt --table table.vec "
                     "--output emb.bin";
const char* kRetrieve = "retrieve --embeddings emb.bin --topn 24 --output run.txt";
const char* kEvaluate = "evaluate --run run.txt --qrels qrels.txt --topn 5 --report report.txt "
                        "--json report.json";

void run_pipeline(const fs::path& dir) {
    for (const char* step : {kGen, kPrep, kTrain, kEmbed, kRetrieve, kEvaluate}) {
        auto r = run_cli(dir, step);
        ASSERT_EQ(r.code, 0) << step << "\n" << r.err;
    }
}

TEST(Pipeline, EndToEndProducesReportAndManifests) {
    auto dir = fresh_dir("pipeline");
    run_pipeline(dir);

    auto report = slurp(dir / "report.txt");
    EXPECT_NE(report.find("bpref"), std::string::npos);
    EXPECT_NE(report.find("all"), std::string::npos);
    EXPECT_NE(report.find("queries 6"), std::string::npos);

    auto json = nlohmann::json::parse(slurp(dir / "report.json"));
    EXPECT_EQ(json["per_query"].size(), 6u);
    EXPECT_TRUE(json["mean"].contains("bpref"));

    // every artifact is described by a manifest with fingerprints
    for (const char* name : {"raw.jsonl", "corpus.bin", "ctpe.ckpt", "emb.bin", "run.txt"}) {
        auto manifest_path = dir / (std::string(name) + ".manifest.json");
        ASSERT_TRUE(fs::exists(manifest_path)) << name;
        auto manifest = nlohmann::json::parse(slurp(manifest_path));
        EXPECT_TRUE(manifest.contains("command"));
        EXPECT_TRUE(manifest.contains("elapsed_seconds"));
        for (auto& [key, value] : manifest["outputs"].items())
            EXPECT_EQ(value["fingerprint"].get<std::string>().size(), 16u) << key;
    }

    // the train log carries one line per epoch
    auto log = slurp(dir / "train.log");
    EXPECT_NE(log.find("epoch 1 mean_loss"), std::string::npos);
    EXPECT_NE(log.find("epoch 2 mean_loss"), std::string::npos);
}

TEST(Pipeline, RerunIsByteIdentical) {
    auto dir1 = fresh_dir("rerun1");
    auto dir2 = fresh_dir("rerun2");
    run_pipeline(dir1);
    run_pipeline(dir2);
    // logs and manifests carry wall-clock timings; every data artifact must match exactly
    for (const char* name : {"raw.jsonl", "qrels.txt", "corpus.bin", "ctpe.ckpt", "table.vec",
                             "emb.bin", "run.txt", "report.txt", "report.json"}) {
        EXPECT_EQ(slurp(dir1 / name), slurp(dir2 / name)) << name;
    }
}

TEST(Pipeline, EpochsZeroSavesTheInitializedEncoder) {
    auto dir = fresh_dir("untrained");
    ASSERT_EQ(run_cli(dir, kGen).code, 0);
    ASSERT_EQ(run_cli(dir, kPrep).code, 0);
    auto r = run_cli(dir, "train --corpus corpus.bin --dim 8 --l 20 --n-f 2 --widths 1,2 "
                          "--epochs 0 --seed 5 --model a.ckpt --table a.vec");
    ASSERT_EQ(r.code, 0);
    EXPECT_NE(r.err.find("no_training"), std::string::npos);
    ASSERT_EQ(run_cli(dir, "train --corpus corpus.bin --dim 8 --l 20 --n-f 2 --widths 1,2 "
                           "--epochs 0 --seed 5 --model b.ckpt --table b.vec")
                  .code,
              0);
    EXPECT_EQ(slurp(dir / "a.ckpt"), slurp(dir / "b.ckpt"));
    ASSERT_EQ(run_cli(dir, kTrain).code, 0);
    EXPECT_NE(slurp(dir / "a.ckpt"), slurp(dir / "ctpe.ckpt"));  // training moved the weights
}

TEST(Pipeline, ConfigFileMirrorsFlagsAndCommandLineWins) {
    auto dir = fresh_dir("config");
    ASSERT_EQ(run_cli(dir, kGen).code, 0);
    ASSERT_EQ(run_cli(dir, kPrep).code, 0);
    {
        std::ofstream f(dir / "train.cfg");
        f << "dim = 8\nl = 20\nn-f = 2\nwidths = 1,2\nbatch = 10\nepochs = 2\nseed = 5\n";
    }
    ASSERT_EQ(run_cli(dir, "train --corpus corpus.bin --config train.cfg --model c.ckpt "
                           "--table c.vec --log c.log")
                  .code,
              0);
    ASSERT_EQ(run_cli(dir, kTrain).code, 0);
    EXPECT_EQ(slurp(dir / "c.ckpt"), slurp(dir / "ctpe.ckpt"));

    // a flag on the command line beats the same key in the file
    auto r = run_cli(dir, "train --corpus corpus.bin --config train.cfg --epochs 0 "
                          "--model d.ckpt --table d.vec");
    ASSERT_EQ(r.code, 0);
    EXPECT_NE(r.err.find("no_training"), std::string::npos);

    auto bad = run_cli(dir, "train --corpus corpus.bin --config missing.cfg --model e --table f");
    EXPECT_EQ(bad.code, 3);
    {
        std::ofstream f(dir / "bad.cfg");
        f << "not-a-key = 1\n";
    }
    auto unknown =
        run_cli(dir, "train --corpus corpus.bin --config bad.cfg --model e --table f");
    EXPECT_EQ(unknown.code, 2);
    EXPECT_NE(unknown.err.find("not-a-key"), std::string::npos);
}

TEST(ExitCodes, ConfigDataAndUsageErrors) {
    auto dir = fresh_dir("errors");
    // unknown flag -> usage/config error
    EXPECT_EQ(run_cli(dir, "train --no-such-flag").code, 2);
    // pretrained backend without vectors -> config error
    ASSERT_EQ(run_cli(dir, kGen).code, 0);
    ASSERT_EQ(run_cli(dir, kPrep).code, 0);
    EXPECT_EQ(run_cli(dir, "train --corpus corpus.bin --backend pretrained --model m --table t")
                  .code,
              2);
    // missing input file -> data error
    EXPECT_EQ(run_cli(dir, "retrieve --embeddings missing.bin").code, 3);
    // malformed JSON surfaces the line number on stderr
    {
        std::ofstream f(dir / "bad.jsonl");
        f << "{\"id\": \"a\", \"parts\": {\"x\": \"hello there\", \"y\": \"more text\"}}\n{oops\n";
    }
    auto r = run_cli(dir, "preprocess --input bad.jsonl --output x.bin");
    EXPECT_EQ(r.code, 3);
    EXPECT_NE(r.err.find("line 2"), std::string::npos);
    // help exits cleanly
    EXPECT_EQ(run_cli(dir, "--help").code, 0);
    EXPECT_EQ(run_cli(dir, "train --help").code, 0);
}

TEST(ExitCodes, MismatchedTableIsRejected) {
    auto dir = fresh_dir("mismatch");
    ASSERT_EQ(run_cli(dir, kGen).code, 0);
    ASSERT_EQ(run_cli(dir, kPrep).code, 0);
    ASSERT_EQ(run_cli(dir, kTrain).code, 0);
    ASSERT_EQ(run_cli(dir, "train --corpus corpus.bin --dim 8 --l 20 --n-f 2 --widths 1,2 "
                           "--epochs 0 --seed 99 --model other.ckpt --table other.vec")
                  .code,
              0);
    auto r = run_cli(dir, "embed --corpus corpus.bin --model ctpe.ckpt --table other.vec "
                          "--output emb.bin");
    EXPECT_EQ(r.code, 3);
    EXPECT_NE(r.err.find("table"), std::string::npos);
}

TEST(Evaluate, TopnChangesPrfButNotFullRankingMetrics) {
    auto dir = fresh_dir("cutoffs");
    run_pipeline(dir);
    ASSERT_EQ(run_cli(dir, "evaluate --run run.txt --qrels qrels.txt --topn 10 "
                           "--report r10.txt --json r10.json")
                  .code,
              0);
    auto j5 = nlohmann::json::parse(slurp(dir / "report.json"));
    auto j10 = nlohmann::json::parse(slurp(dir / "r10.json"));
    EXPECT_NE(j5["mean"]["p"].get<double>(), j10["mean"]["p"].get<double>());
    EXPECT_EQ(j5["mean"]["ap"].get<double>(), j10["mean"]["ap"].get<double>());
    EXPECT_EQ(j5["mean"]["bpref"].get<double>(), j10["mean"]["bpref"].get<double>());
    EXPECT_EQ(j5["mean"]["ndcg"].get<double>(), j10["mean"]["ndcg"].get<double>());
}

TEST(Retrieve, BaselinesProduceRuns) {
    auto dir = fresh_dir("baselines");
    ASSERT_EQ(run_cli(dir, kGen).code, 0);
    ASSERT_EQ(run_cli(dir, kPrep).code, 0);
    ASSERT_EQ(run_cli(dir, kTrain).code, 0);
    ASSERT_EQ(run_cli(dir, "retrieve --baseline tfidf --corpus corpus.bin --topn 24 "
                           "--output tfidf.txt")
                  .code,
              0);
    ASSERT_EQ(run_cli(dir, "retrieve --baseline avg --corpus corpus.bin --table table.vec "
                           "--topn 24 --output avg.txt")
                  .code,
              0);
    ASSERT_EQ(run_cli(dir, "evaluate --run tfidf.txt --qrels qrels.txt --json t.json").code, 0);
    ASSERT_EQ(run_cli(dir, "evaluate --run avg.txt --qrels qrels.txt --json a.json").code, 0);
    auto t = nlohmann::json::parse(slurp(dir / "t.json"));
    EXPECT_GT(t["mean"]["ap"].get<double>(), 0.5);  // tf-idf separates clean topics easily
    // baseline mode without its inputs is a config error
    EXPECT_EQ(run_cli(dir, "retrieve --baseline avg --corpus corpus.bin").code, 2);
    EXPECT_EQ(run_cli(dir, "retrieve --baseline tfidf").code, 2);
}

TEST(SweepPos, EmitsTableWithMeaningfulRow) {
    auto dir = fresh_dir("sweep");
    ASSERT_EQ(run_cli(dir, kGen).code, 0);
    ASSERT_EQ(run_cli(dir, kPrep).code, 0);
    auto r = run_cli(dir, "sweep-pos --corpus corpus.bin --qrels qrels.txt --positions 0.3,0.7 "
                          "--dim 8 --l 20 --n-f 2 --widths 1,2 --batch 10 --epochs 2 --seed 5 "
                          "--topn 24 --output sweep.txt --json sweep.json");
    ASSERT_EQ(r.code, 0) << r.err;
    auto table = slurp(dir / "sweep.txt");
    EXPECT_NE(table.find("30%"), std::string::npos);
    EXPECT_NE(table.find("70%"), std::string::npos);
    EXPECT_NE(table.find("\nm "), std::string::npos);
    EXPECT_EQ(std::count(table.begin(), table.end(), '\n'), 4);  // header + 3 rows
    auto json = nlohmann::json::parse(slurp(dir / "sweep.json"));
    ASSERT_EQ(json.size(), 3u);
    for (const auto& row : json) {
        EXPECT_TRUE(row.contains("map"));
        EXPECT_GE(row["map"].get<double>(), 0.0);
        EXPECT_LE(row["map"].get<double>(), 1.0);
    }
}

}  // namespace
