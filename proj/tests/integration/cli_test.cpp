#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "scbm/model/checkpoint_io.hpp"
#include "scbm/synth/dataset_io.hpp"
#include "scbm/serve/service.hpp"

#include <httplib.h>

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

struct CliRun {
  int code = -1;
  std::string out;
  std::string err;
};

class CliTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new fs::path(fs::temp_directory_path() / ("scbm-cli-" + std::to_string(::getpid())));
    fs::remove_all(*dir_);
    fs::create_directories(*dir_);
  }
  static void TearDownTestSuite() {
    fs::remove_all(*dir_);
    delete dir_;
  }

  static std::string path(const std::string& name) { return (*dir_ / name).string(); }

  static CliRun run(const std::string& args) {
    const std::string err_file = path("stderr.txt");
    const std::string cmd = std::string(SCBM_CLI_PATH) + " " + args + " 2>" + err_file;
    CliRun r;
    FILE* pipe = ::popen(cmd.c_str(), "r");
    if (pipe == nullptr) return r;
    char buf[4096];
    std::size_t n;
    while ((n = std::fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, n);
    const int status = ::pclose(pipe);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.err = slurp(err_file);
    return r;
  }

  static std::string slurp(const std::string& file) {
    std::ifstream f(file);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
  }

  static std::vector<std::string> lines(const std::string& text) {
    std::vector<std::string> out;
    std::stringstream ss(text);
    for (std::string line; std::getline(ss, line);) out.push_back(line);
    return out;
  }

  // Generated once and shared: a small dataset and a short global-model run.
  static void ensure_trained() {
    if (fs::exists(path("model.ckpt"))) return;
    ASSERT_EQ(run("generate-data --n 240 --p 6 --c 4 --rank 2 --seed 3 --out " + path("data.bin")).code, 0);
    const CliRun r = run("train --variant global --data " + path("data.bin") + " --out " + path("model.ckpt") +
                      " --epochs 3 --mc-samples 8 --seed 1");
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.err.find("epoch"), std::string::npos);
  }

  static inline fs::path* dir_ = nullptr;
};

TEST_F(CliTest, GenerateDataWritesLoadableDataset) {
  const CliRun r = run("generate-data --n 50 --p 3 --c 2 --seed 9 --out " + path("small.bin"));
  ASSERT_EQ(r.code, 0) << r.err;
  const json summary = json::parse(r.out);
  EXPECT_EQ(summary.at("n"), 50);
  const auto ds = scbm::synth::load(path("small.bin"));
  EXPECT_EQ(ds.size(), 50);
  EXPECT_EQ(ds.num_concepts(), 2);
}

TEST_F(CliTest, TrainEvaluateIntervene) {
  ensure_trained();
  const CliRun ev = run("evaluate --ckpt " + path("model.ckpt") + " --data " + path("data.bin") + " --out " +
                     path("metrics.csv") + " --predictions " + path("preds.csv") + " --mc-samples 20 --seed 4");
  ASSERT_EQ(ev.code, 0) << ev.err;
  const json m = json::parse(ev.out);
  for (const char* key : {"target_accuracy", "concept_accuracy", "jaccard", "brier", "ece"}) {
    EXPECT_GE(m.at(key).get<double>(), 0.0);
    EXPECT_LE(m.at(key).get<double>(), 1.0);
  }
  const auto metrics = lines(slurp(path("metrics.csv")));
  ASSERT_EQ(metrics.size(), 3u);
  EXPECT_EQ(metrics[0].rfind("# scbm-csv v1 kind=metrics config=", 0), 0u);
  EXPECT_EQ(metrics[1], "target_accuracy,concept_accuracy,jaccard,brier,ece");

  const CliRun iv = run("intervene --ckpt " + path("model.ckpt") + " --data " + path("data.bin") +
                     " --policy uncertainty --strategy confidence-region --max-k 9 --mc-samples 10 --out " +
                     path("curve.csv"));
  ASSERT_EQ(iv.code, 0) << iv.err;
  EXPECT_NE(iv.err.find("clipped"), std::string::npos);
  const auto curve = lines(slurp(path("curve.csv")));
  ASSERT_EQ(curve.size(), 2u + 5u);
  EXPECT_EQ(curve[1], "k,concept_accuracy,target_accuracy");
  EXPECT_EQ(curve.back().substr(0, 6), "4,100,");
}

// evaluate --predictions and a fresh serve session on the same test row agree
// exactly when they share seed and sample count.
TEST_F(CliTest, PredictionsMatchServeSessions) {
  ensure_trained();
  const CliRun ev = run("evaluate --ckpt " + path("model.ckpt") + " --data " + path("data.bin") + " --predictions " +
                     path("preds2.csv") + " --mc-samples 25 --seed 11");
  ASSERT_EQ(ev.code, 0) << ev.err;
  const auto rows = lines(slurp(path("preds2.csv")));
  ASSERT_GT(rows.size(), 3u);

  scbm::serve::ServiceOptions opts;
  opts.seed = 11;
  opts.mc_samples = 25;
  scbm::serve::Service svc(scbm::load_checkpoint(path("model.ckpt")), scbm::synth::load(path("data.bin")), opts);
  for (std::size_t t = 0; t < 3; ++t) {
    std::vector<double> fields;
    std::stringstream ss(rows[2 + t]);
    for (std::string f; std::getline(ss, f, ',');) fields.push_back(std::strtod(f.c_str(), nullptr));
    const json s = svc.create_session({{"test_index", t}});
    EXPECT_EQ(s.at("instance").at("row").get<double>(), fields[0]);
    for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(s.at("concept_probs")[i].get<double>(), fields[1 + i]);
    const auto& tp = s.at("target_probs");
    for (std::size_t k = 0; k < tp.size(); ++k) EXPECT_EQ(tp[k].get<double>(), fields[5 + k]);
  }
}

TEST_F(CliTest, ExportCorrelation) {
  ensure_trained();
  const CliRun r = run("export-corr --ckpt " + path("model.ckpt") + " --out " + path("corr.csv"));
  ASSERT_EQ(r.code, 0) << r.err;
  const auto text = lines(slurp(path("corr.csv")));
  ASSERT_EQ(text.size(), 2u + 4u);
  EXPECT_EQ(text[1], "c0,c1,c2,c3");
  EXPECT_EQ(text[2].substr(0, 2), "1,");

  ASSERT_EQ(run("train --variant amortized --data " + path("data.bin") + " --out " + path("amort.ckpt") +
                " --epochs 1 --mc-samples 4")
                .code,
            0);
  const CliRun missing = run("export-corr --ckpt " + path("amort.ckpt") + " --out " + path("c2.csv"));
  EXPECT_EQ(missing.code, 2);
  EXPECT_EQ(missing.err.rfind("error: {", 0), 0u);
  EXPECT_EQ(json::parse(missing.err.substr(7)).at("kind"), "usage");
  EXPECT_EQ(run("export-corr --ckpt " + path("amort.ckpt") + " --out " + path("c2.csv") + " --data " +
                path("data.bin") + " --row 5")
                .code,
            0);
}

TEST_F(CliTest, RunExperiment) {
  json cfg = {{"data", {{"preset", "desk"}, {"n", 160}, {"p", 5}, {"c", 3}}},
              {"variants", {"global", "hard-cbm"}},
              {"train", {{"epochs", 1}, {"mc_samples", 4}}},
              {"policies", {"random"}},
              {"strategies", {"confidence-region"}},
              {"max_k", 3},
              {"seeds", {0, 1}},
              {"eval_mc_samples", 10},
              {"timestamped", false}};
  std::ofstream(path("exp.json")) << cfg.dump();
  const CliRun r = run("run-experiment --config " + path("exp.json") + " --out-dir " + path("exp") + " --parallel-seeds");
  ASSERT_EQ(r.code, 0) << r.err;
  const json summary = json::parse(r.out);
  EXPECT_EQ(summary.at("status"), "ok");
  const json manifest = json::parse(slurp(path("exp/manifest.json")));
  EXPECT_EQ(manifest.at("format"), "scbm-run");
  EXPECT_EQ(manifest.at("seeds").size(), 2u);
  EXPECT_TRUE(fs::exists(path("exp/aggregate/hard-cbm/curve_random_confidence-region.csv")));
  EXPECT_TRUE(fs::exists(path("exp/seed-1/global/model.ckpt")));

  ::setenv("SCBM_MAX_K", "2", 1);
  const CliRun env = run("run-experiment --config " + path("exp.json") + " --out-dir " + path("exp-env"));
  ::unsetenv("SCBM_MAX_K");
  ASSERT_EQ(env.code, 0) << env.err;
  EXPECT_EQ(json::parse(slurp(path("exp-env/manifest.json"))).at("config").at("max_k"), 2);
}

TEST_F(CliTest, ErrorsAndExitCodes) {
  const CliRun missing = run("evaluate --ckpt " + path("nope.ckpt") + " --data " + path("nope.bin"));
  EXPECT_EQ(missing.code, 3);
  EXPECT_EQ(json::parse(missing.err.substr(missing.err.find('{'))).at("kind"), "io");
  EXPECT_EQ(run("train --data x").code, 2);
  EXPECT_EQ(run("no-such-command").code, 2);

  std::ofstream(path("bad.json")) << R"({"seeds":[0],"num_seeds":2})";
  const CliRun bad = run("run-experiment --config " + path("bad.json"));
  EXPECT_EQ(bad.code, 2);
  EXPECT_EQ(json::parse(bad.err.substr(bad.err.find('{'))).at("kind"), "config");

  ensure_trained();
  std::ofstream(path("other.bin"), std::ios::binary) << "garbage";
  EXPECT_EQ(run("evaluate --ckpt " + path("model.ckpt") + " --data " + path("other.bin")).code, 3);
  ASSERT_EQ(run("generate-data --n 60 --p 7 --c 4 --out " + path("wide.bin")).code, 0);
  EXPECT_EQ(run("evaluate --ckpt " + path("model.ckpt") + " --data " + path("wide.bin")).code, 2);
}

TEST_F(CliTest, ServeAnswersAndWritesSnapshotOnShutdown) {
  ensure_trained();
  const std::string cmd = "sh -c 'echo $$; exec " + std::string(SCBM_CLI_PATH) + " serve --ckpt " +
                          path("model.ckpt") + " --data " + path("data.bin") + " --port 0 --snapshot " +
                          path("snap.json") + "' 2>/dev/null";
  FILE* pipe = ::popen(cmd.c_str(), "r");
  ASSERT_NE(pipe, nullptr);
  char line[512];
  ASSERT_NE(std::fgets(line, sizeof line, pipe), nullptr);
  const pid_t pid = static_cast<pid_t>(std::stol(line));
  ASSERT_NE(std::fgets(line, sizeof line, pipe), nullptr);
  const std::string listening = json::parse(line).at("listening");
  const int port = std::stoi(listening.substr(listening.rfind(':') + 1));

  httplib::Client client("127.0.0.1", port);
  auto res = client.Post("/sessions", R"({"test_index":0})", "application/json");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 201);
  const std::string id = json::parse(res->body).at("session_id");
  res = client.Post("/sessions/" + id + "/interventions", R"({"concept":1,"value":1})", "application/json");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);

  ::kill(pid, SIGTERM);
  const int status = ::pclose(pipe);
  EXPECT_TRUE(WIFEXITED(status) && WEXITSTATUS(status) == 0);
  const json snap = json::parse(slurp(path("snap.json")));
  EXPECT_EQ(snap.at("format"), "scbm-sessions");
  ASSERT_EQ(snap.at("sessions").size(), 1u);
  EXPECT_EQ(snap.at("sessions")[0].at("history").size(), 1u);
}

}  // namespace
