#include <filesystem>
#include <sstream>

#include <gtest/gtest.h>

#include "overrec/cli.hpp"
#include "overrec/dataset.hpp"
#include "overrec/gram.hpp"
#include "synthetic.hpp"

using namespace overrec;
namespace fs = std::filesystem;

namespace {

struct CliRun {
    int code;
    std::string out;
    std::string err;
};

CliRun cli(std::vector<std::string> args) {
    args.insert(args.begin(), "overrec");
    std::ostringstream out;
    std::ostringstream err;
    const int code = run_cli(args, out, err);
    return {code, out.str(), err.str()};
}

class CliTest : public ::testing::Test {
  protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() / ("overrec_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(dir_);
        fs::create_directories(dir_);
        raw_ = dir_ / "ratings.dat";
        write_file(raw_, synthetic_movielens(60, 30, 5));
        split_ = (dir_ / "split").string();
    }
    void TearDown() override { fs::remove_all(dir_); }

    void preprocess() {
        const CliRun r = cli({"preprocess", "--in", raw_.string(), "--out", split_});
        ASSERT_EQ(r.code, 0) << r.err;
    }

    fs::path dir_;
    fs::path raw_;
    std::string split_;
};

}  // namespace

TEST_F(CliTest, PreprocessWritesManifest) {
    const CliRun r = cli({"preprocess", "--in", raw_.string(), "--format", "movielens_dat", "--out", split_});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("users=60"), std::string::npos) << r.out;
    const std::string manifest = read_file(SplitFiles(split_).manifest);
    EXPECT_NE(manifest.find("users=60\n"), std::string::npos);
    EXPECT_NE(manifest.find("five_core=fixedpoint\n"), std::string::npos);
    EXPECT_NE(manifest.find("actions="), std::string::npos);
}

TEST_F(CliTest, MissingInputNamesThePath) {
    const CliRun r = cli({"preprocess", "--in", (dir_ / "nope.dat").string(), "--out", split_});
    EXPECT_EQ(r.code, kExitInput);
    EXPECT_NE(r.err.find("nope.dat"), std::string::npos) << r.err;
}

TEST_F(CliTest, MalformedInputIsInputError) {
    write_file(raw_, "1::2::3::4\n1::2\n");
    const CliRun r = cli({"preprocess", "--in", raw_.string(), "--out", split_});
    EXPECT_EQ(r.code, kExitInput);
    EXPECT_NE(r.err.find("line 2"), std::string::npos) << r.err;
}

TEST_F(CliTest, AmazonToyFixtureIsDeterministic) {
    std::string csv;
    for (int u = 0; u < 8; ++u) {
        for (int k = 0; k < 6; ++k) {
            csv += "user" + std::to_string(u) + ",item" + std::to_string((u + k) % 6) + ",5.0," + std::to_string(100 * u + k) + "\n";
        }
    }
    write_file(raw_, csv);
    const std::string a = (dir_ / "a").string();
    const std::string b = (dir_ / "b").string();
    ASSERT_EQ(cli({"preprocess", "--in", raw_.string(), "--format", "amazon_csv", "--out", a}).code, 0);
    ASSERT_EQ(cli({"preprocess", "--in", raw_.string(), "--format", "amazon_csv", "--out", b}).code, 0);
    for (const char* f : {"queries.tsv", "corpus.tsv", "items.tsv", "manifest.txt"}) {
        EXPECT_EQ(read_file(fs::path(a) / f), read_file(fs::path(b) / f)) << f;
    }
    const SplitDataset s = read_split(a);
    EXPECT_EQ(s.user_count, 8u);
    EXPECT_EQ(s.item_count, 6u);
    EXPECT_EQ(s.queries.size(), 8u);
}

TEST_F(CliTest, GramRoundTripsAndRepeats) {
    preprocess();
    const std::string g1 = (dir_ / "g1.bin").string();
    const std::string g2 = (dir_ / "g2.bin").string();
    const CliRun r = cli({"gram", "--in", split_, "--out", g1, "--mode", "rntk", "--layers", "2"});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.err.find("pairs/s"), std::string::npos);
    ASSERT_EQ(cli({"gram", "--in", split_, "--out", g2, "--mode", "rntk", "--layers", "2", "--threads", "3"}).code, 0);
    EXPECT_EQ(read_file(g1), read_file(g2));

    const SplitDataset s = read_split(split_);
    HyperParams p;
    p.layers = 2;
    const GramMatrix loaded = load_gram(g1, params_digest(p, KernelMode::RNTK));
    const GramMatrix direct = compute_gram(s.query_inputs(), s.corpus_inputs(), p, KernelMode::RNTK);
    EXPECT_TRUE(loaded.identical(direct));
}

TEST_F(CliTest, SknnGramHoldsCosines) {
    preprocess();
    const std::string g = (dir_ / "g.bin").string();
    ASSERT_EQ(cli({"gram", "--in", split_, "--out", g, "--mode", "sknn"}).code, 0);
    const GramMatrix m = load_gram(g);
    EXPECT_EQ(m.mode, KernelMode::SKNN);
    EXPECT_GE(m.values.minCoeff(), 0.0);
    EXPECT_LE(m.values.maxCoeff(), 1.0);
}

TEST_F(CliTest, GramValidatesParameters) {
    preprocess();
    const std::string g = (dir_ / "g.bin").string();
    EXPECT_EQ(cli({"gram", "--in", split_, "--out", g, "--sigma-b", "0.3"}).code, kExitInput);
    EXPECT_EQ(cli({"gram", "--in", split_, "--out", g, "--sigma-v", "0"}).code, kExitInput);
    EXPECT_EQ(cli({"gram", "--in", split_, "--out", g, "--mode", "cosine"}).code, kExitInput);
    EXPECT_EQ(cli({"gram", "--in", split_, "--out", g, "--max-cells", "10"}).code, kExitCapacity);
    EXPECT_EQ(cli({"gram", "--in", (dir_ / "missing").string(), "--out", g}).code, kExitInput);
}

TEST_F(CliTest, EvaluatePerfectNeighbours) {
    // Every query has an identical corpus sequence whose target is the query's target.
    SplitDataset s;
    s.item_count = 6;
    s.user_count = 4;
    s.action_count = 12;
    s.max_len = 50;
    s.item_names = {"a", "b", "c", "d", "e", "f"};
    s.queries = {{ItemSequence("q1", {0, 1}), 2}, {ItemSequence("q2", {3, 4}), 5}};
    s.corpus = {{ItemSequence("c1", {3, 4}), 5}, {ItemSequence("c2", {0, 1}), 2}, {ItemSequence("c3", {1, 4}), 0}};
    write_split(s, split_);
    const std::string g = (dir_ / "g.bin").string();
    const std::string rep = (dir_ / "report.txt").string();
    ASSERT_EQ(cli({"gram", "--in", split_, "--out", g, "--mode", "sknn"}).code, 0);
    const CliRun r = cli({"evaluate", "--in", split_, "--gram", g, "--k", "1", "--out", rep});
    ASSERT_EQ(r.code, 0) << r.err;
    const std::string kv = read_file(rep);
    for (const char* key : {"mrr@5=1\n", "mrr@10=1\n", "ndcg@5=1\n", "ndcg@10=1\n", "n_queries=2\n", "k=1\n"}) {
        EXPECT_NE(kv.find(key), std::string::npos) << key << " in\n" << kv;
    }
    EXPECT_EQ(kv.find("seconds"), std::string::npos);
}

TEST_F(CliTest, EvaluateIsRepeatableAndThreadIndependent) {
    preprocess();
    const std::string g = (dir_ / "g.bin").string();
    ASSERT_EQ(cli({"gram", "--in", split_, "--out", g}).code, 0);
    const std::string r1 = (dir_ / "r1.txt").string();
    const std::string r2 = (dir_ / "r2.txt").string();
    ASSERT_EQ(cli({"evaluate", "--in", split_, "--gram", g, "--out", r1}).code, 0);
    ASSERT_EQ(cli({"evaluate", "--in", split_, "--gram", g, "--out", r2, "--threads", "4"}).code, 0);
    EXPECT_EQ(read_file(r1), read_file(r2));
    EXPECT_NE(read_file(r1).find("k=cutoff\n"), std::string::npos);

    const std::string r3 = (dir_ / "r3.txt").string();
    ASSERT_EQ(cli({"evaluate", "--in", split_, "--gram", g, "--out", r3, "--k", "10", "--prediction", "equal-item",
                   "--exclude-self-user", "--cutoffs", "1,5,20"})
                  .code,
              0);
    const std::string kv = read_file(r3);
    EXPECT_NE(kv.find("mrr@20="), std::string::npos);
    EXPECT_NE(kv.find("exclude_self_user=true\n"), std::string::npos);
}

TEST_F(CliTest, EvaluateDetectsMismatches) {
    preprocess();
    const std::string g = (dir_ / "g.bin").string();
    ASSERT_EQ(cli({"gram", "--in", split_, "--out", g, "--mode", "rntk"}).code, 0);
    // Parameters that do not match the Gram's digest.
    EXPECT_EQ(cli({"evaluate", "--in", split_, "--gram", g, "--mode", "nngp"}).code, kExitConsistency);
    EXPECT_EQ(cli({"evaluate", "--in", split_, "--gram", g, "--mode", "rntk", "--sigma-w", "0.5"}).code, kExitConsistency);
    EXPECT_EQ(cli({"evaluate", "--in", split_, "--gram", g, "--mode", "rntk"}).code, 0);

    // A Gram built from a different split.
    const fs::path other_raw = dir_ / "other.dat";
    write_file(other_raw, synthetic_movielens(50, 30, 6));
    const std::string other = (dir_ / "other").string();
    ASSERT_EQ(cli({"preprocess", "--in", other_raw.string(), "--out", other}).code, 0);
    const std::string og = (dir_ / "og.bin").string();
    ASSERT_EQ(cli({"gram", "--in", other, "--out", og}).code, 0);
    EXPECT_EQ(cli({"evaluate", "--in", split_, "--gram", og}).code, kExitConsistency);

    // Truncated Gram file is an input error.
    std::string bytes = read_file(g);
    write_file(g, bytes.substr(0, bytes.size() - 5));
    EXPECT_EQ(cli({"evaluate", "--in", split_, "--gram", g}).code, kExitInput);
}

TEST_F(CliTest, ConfigFileWithFlagOverride) {
    preprocess();
    const fs::path cfg = dir_ / "run.ini";
    write_file(cfg, "[gram]\nmode=nngp\nlayers=2\nsigma-w=0.8\n");
    const std::string g = (dir_ / "g.bin").string();
    ASSERT_EQ(cli({"--config", cfg.string(), "gram", "--in", split_, "--out", g}).code, 0);
    HyperParams p;
    p.layers = 2;
    p.sigma_w = 0.8;
    EXPECT_NO_THROW(load_gram(g, params_digest(p, KernelMode::NNGP)));

    ASSERT_EQ(cli({"--config", cfg.string(), "gram", "--in", split_, "--out", g, "--layers", "3"}).code, 0);
    p.layers = 3;
    EXPECT_NO_THROW(load_gram(g, params_digest(p, KernelMode::NNGP)));
}

TEST(Cli, UsageErrors) {
    EXPECT_EQ(cli({}).code, kExitInput);
    EXPECT_EQ(cli({"frobnicate"}).code, kExitInput);
    EXPECT_EQ(cli({"--help"}).code, kExitOk);
    EXPECT_EQ(cli({"gram", "--out", "x"}).code, kExitInput);
}

TEST(Cli, VerifySingleWidthIsInformational) {
    const CliRun r = cli({"verify", "--width", "32", "--trials", "10", "--layers", "1", "--widths", "64"});
    EXPECT_TRUE(r.code == kExitOk || r.code == kExitVerification) << r.err;
    EXPECT_NE(r.out.find("[INFO] single width"), std::string::npos) << r.out;
    EXPECT_NE(r.out.find("matched variant"), std::string::npos);
    EXPECT_NE(r.out.find("nngp_mean"), std::string::npos);
    EXPECT_EQ(cli({"verify", "--widths", "256,64"}).code, kExitInput);
}

TEST(Cli, SelftestPasses) {
    const CliRun r = cli({"selftest", "--samples", "200000"});
    EXPECT_EQ(r.code, kExitOk) << r.out;
    EXPECT_NE(r.out.find("RESULT: PASS"), std::string::npos);
}
