#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "nfgnn/cli.hpp"
#include "nfgnn/errors.hpp"
#include "nfgnn/flow_ingest.hpp"
#include "support.hpp"

namespace nfgnn {
namespace {

namespace fs = std::filesystem;

struct CliRun {
  int code;
  std::string out;
  std::string err;
};

CliRun cli(std::vector<std::string> args) {
  args.push_back("-q");
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

// Small classes-mode dataset shared by the tests below.
class CliTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    root_ = new fs::path(testing::scratch_dir("cli"));
    const CliRun r = cli({"synth", "--out", (*root_ / "data").string(), "--seed", "4", "--set",
                       "synth={\"samples_per_class\":40,\"dim\":2,\"max_nodes\":6}"});
    ASSERT_EQ(r.code, 0) << r.err;
  }
  static void TearDownTestSuite() { delete root_; }

  static fs::path dir(const std::string& name) { return *root_ / name; }
  static std::string manifest() { return (*root_ / "data" / "manifest.json").string(); }

  static std::vector<std::string> train_args(const std::string& out, const std::string& model = "nfgnn-clf") {
    return {"train",  "--out", out,        "--seed", "2", "--set", "data=" + manifest(), "model=" + model,
            "quota=10", "train={\"max_epochs\":5,\"num_hidden\":8}"};
  }

  static fs::path* root_;
};

fs::path* CliTest::root_ = nullptr;

TEST(Cli, UsageErrorsExitTwo) {
  EXPECT_EQ(cli({}).code, 2);
  EXPECT_EQ(cli({"dance"}).code, 2);
  EXPECT_EQ(cli({"train", "--workers", "many"}).code, 2);
  EXPECT_EQ(cli({"extract", "--out", "/tmp/x", "--set", "manifest=/nonexistent/manifest.json"}).code, 2);
  EXPECT_EQ(cli({"train", "--set", "colour=blue"}).code, 2);
  EXPECT_EQ(cli({"evaluate", "--set", "checkpoint=/nonexistent/ckpt.json"}).code, 2);
}

TEST(Cli, OverridesParseJsonOrFallBackToString) {
  json c = json::object();
  apply_override(c, "train.num_hidden=16");
  apply_override(c, "model=nfgnn-ae");
  apply_override(c, "grid={\"dropout\":[0,0.2]}");
  EXPECT_EQ(c["train"]["num_hidden"], 16);
  EXPECT_EQ(c["model"], "nfgnn-ae");
  EXPECT_EQ(c["grid"]["dropout"].size(), 2u);
  EXPECT_THROW(apply_override(c, "novalue"), ConfigError);
}

TEST_F(CliTest, SynthWritesTheRequestedSampleCount) {
  EXPECT_EQ(load_dataset(manifest()).samples.size(), 80u);
}

TEST_F(CliTest, ExtractWidths) {
  const auto out = dir("extract");
  const CliRun r = cli({"extract", "--out", out.string(), "--set", "manifest=" + manifest()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(lines(slurp(out / "graphs.jsonl")).size(), 80u);
  // dim 2 plus one constant column: d = 3.
  const json summary = json::parse(r.out);
  EXPECT_EQ(summary["feature_widths"]["flow"], 15);
  EXPECT_EQ(summary["feature_widths"]["graph"], 42);
  EXPECT_EQ(summary["feature_widths"]["combined"], 57);
  const auto header = lines(slurp(out / "features_combined.csv")).front();
  EXPECT_EQ(std::count(header.begin(), header.end(), ','), 4 + 57 - 1);
}

TEST_F(CliTest, ExtractThreeSampleManifest) {
  const auto d = dir("three");
  fs::create_directories(d);
  for (const char* id : {"a", "b", "c"}) {
    std::ofstream(d / (std::string(id) + ".csv")) << "Flow ID,Src IP,Src Port,Dst IP,Dst Port,Timestamp,x,Label\n"
                                                  << "1,1.1.1.1,5,2.2.2.2,80,t,1.5,BENIGN\n";
  }
  std::ofstream(d / "manifest.json") << R"({"samples":[{"id":"a","file":"a.csv","labels":{"binary":"benign"}},
    {"id":"b","file":"b.csv","labels":{"binary":"benign"}},{"id":"c","file":"c.csv","labels":{"binary":"attack"}}]})";
  const CliRun r = cli({"extract", "--out", (d / "out").string(), "--set", "manifest=" + (d / "manifest.json").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(lines(slurp(d / "out" / "graphs.jsonl")).size(), 3u);
  EXPECT_EQ(json::parse(r.out)["feature_widths"]["flow"], 5);
}

TEST_F(CliTest, TrainIsReproducible) {
  const CliRun a = cli(train_args(dir("train_a").string()));
  const CliRun b = cli(train_args(dir("train_b").string()));
  ASSERT_EQ(a.code, 0) << a.err;
  ASSERT_EQ(b.code, 0) << b.err;
  EXPECT_EQ(slurp(dir("train_a") / "checkpoint.json"), slurp(dir("train_b") / "checkpoint.json"));
  const json h = json::parse(slurp(dir("train_a") / "history.json"));
  ASSERT_FALSE(h["epochs"].empty());
  for (const char* key : {"epoch", "train_loss", "val_criterion"}) EXPECT_TRUE(h["epochs"][0].contains(key));
}

TEST_F(CliTest, InvalidVariantExitsTwo) {
  EXPECT_EQ(cli(train_args(dir("bad").string(), "nfgnn-svm")).code, 2);
}

TEST_F(CliTest, UnitGridEqualsTrain) {
  auto args = train_args(dir("grid1").string());
  args[0] = "gridsearch";
  args.push_back("grid={}");
  ASSERT_EQ(cli(train_args(dir("train_ref").string())).code, 0);
  const CliRun r = cli(args);
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(slurp(dir("grid1") / "checkpoint.json"), slurp(dir("train_ref") / "checkpoint.json"));
}

TEST_F(CliTest, GridReportIgnoresWorkerCount) {
  auto args = train_args("");
  args[0] = "gridsearch";
  args.push_back("grid={\"num_hidden\":[4,8],\"dropout\":[0,0.2]}");
  auto one = args, four = args;
  one[2] = dir("w1").string();
  four[2] = dir("w4").string();
  four.insert(four.end(), {"--workers", "4"});
  ASSERT_EQ(cli(one).code, 0);
  ASSERT_EQ(cli(four).code, 0);
  EXPECT_EQ(slurp(dir("w1") / "gridsearch.json"), slurp(dir("w4") / "gridsearch.json"));
  const json rep = json::parse(slurp(dir("w1") / "gridsearch.json"));
  EXPECT_EQ(rep["cells"].size(), 4u);
  for (const auto& cell : rep["cells"]) EXPECT_TRUE(cell.contains("val_criterion"));
}

TEST_F(CliTest, EvaluateJsonAndCsvAgree) {
  ASSERT_EQ(cli(train_args(dir("ev_model").string())).code, 0);
  const auto out = dir("ev");
  const CliRun r = cli({"evaluate", "--out", out.string(), "--set",
                     "checkpoint=" + (dir("ev_model") / "checkpoint.json").string(), "data=" + manifest()});
  ASSERT_EQ(r.code, 0) << r.err;
  const json j = json::parse(slurp(out / "evaluation.json"));
  const auto rows = lines(slurp(out / "evaluation.csv"));
  ASSERT_EQ(rows.front(), "split,metric,value,count");
  std::size_t seen = 0;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    std::istringstream row(rows[i]);
    std::string split, metric, value, count;
    std::getline(row, split, ',');
    std::getline(row, metric, ',');
    std::getline(row, value, ',');
    std::getline(row, count, ',');
    ASSERT_TRUE(j["splits"].contains(split));
    EXPECT_EQ(std::stod(value), j["splits"][split]["value"].get<double>());
    EXPECT_EQ(std::stoul(count), j["splits"][split]["count"].get<std::size_t>());
    ++seen;
  }
  EXPECT_EQ(seen, 4u);
  EXPECT_TRUE(j["splits"]["test"].contains("per_class"));
}

TEST_F(CliTest, ScoreClassifierProbabilities) {
  ASSERT_EQ(cli(train_args(dir("sc_model").string())).code, 0);
  const std::vector<std::string> args = {"score", "--set",
                                         "checkpoint=" + (dir("sc_model") / "checkpoint.json").string(),
                                         "data=" + manifest()};
  const CliRun a = cli(args), b = cli(args);
  ASSERT_EQ(a.code, 0) << a.err;
  EXPECT_EQ(a.out, b.out);
  const auto rows = lines(a.out);
  ASSERT_EQ(rows.size(), 81u);
  EXPECT_EQ(rows[0], "id,prob_0,prob_1");
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto c1 = rows[i].find(','), c2 = rows[i].find(',', c1 + 1);
    const double p0 = std::stod(rows[i].substr(c1 + 1, c2 - c1 - 1)), p1 = std::stod(rows[i].substr(c2 + 1));
    EXPECT_NEAR(p0 + p1, 1.0, 1e-12);
  }
}

TEST_F(CliTest, ScoreOneClassIsNonNegative) {
  auto args = train_args(dir("oc_model").string(), "nfgnn-oc");
  args.push_back("task=unsupervised");
  ASSERT_EQ(cli(args).code, 0);
  const auto out = dir("oc_scores");
  fs::create_directories(out);
  const CliRun r = cli({"score", "--out", out.string(), "--set",
                     "checkpoint=" + (dir("oc_model") / "checkpoint.json").string(), "data=" + manifest()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rows = lines(slurp(out / "scores.csv"));
  ASSERT_EQ(rows[0], "id,score");
  for (std::size_t i = 1; i < rows.size(); ++i) EXPECT_GE(std::stod(rows[i].substr(rows[i].find(',') + 1)), 0.0);
}

TEST_F(CliTest, ProtocolReportFiles) {
  auto args = train_args(dir("proto").string());
  args[0] = "gridsearch";
  args.insert(args.end(), {"repeats=2", "grid={}"});
  const CliRun r = cli(args);
  ASSERT_EQ(r.code, 0) << r.err;
  const json rep = json::parse(slurp(dir("proto") / "report.json"));
  EXPECT_EQ(rep["per_seed"].size(), 2u);
  EXPECT_EQ(lines(slurp(dir("proto") / "report.csv")).front(), "task,model,metric,seed,value");
}

}  // namespace
}  // namespace nfgnn
