#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "catn/cli.hpp"
#include "catn/data.hpp"
#include "json.hpp"
#include "test_util.hpp"

using namespace catn;
using testutil::TempDir;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::size_t data_rows(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) ++n;
  return n - 1;
}

nlohmann::json read_json(const std::filesystem::path& p) { return nlohmann::json::parse(testutil::read_file(p)); }

// Small generated pair used by the train/eval/ablate cases.
struct Workspace {
  TempDir dir{"cli"};
  Workspace() {
    auto r = cli({"gen", "--n", "60", "--seed", "3", "--out", (dir / "data").string()});
    EXPECT_EQ(r.code, kExitOk) << r.err;
  }
  std::string source() const { return (dir / "data" / "source.csv").string(); }
  std::string target() const { return (dir / "data" / "target.csv").string(); }
};

}  // namespace

TEST(CliGen, WritesPairAndManifest) {
  TempDir dir("cli");
  auto r = cli({"gen", "--kind", "two-moons", "--n", "500", "--rotation", "45", "--seed", "7", "--out",
                (dir / "a").string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_EQ(data_rows(dir / "a" / "source.csv"), 500u);
  EXPECT_EQ(data_rows(dir / "a" / "target.csv"), 500u);
  EXPECT_NE(r.out.find("n=500"), std::string::npos);
  auto m = read_json(dir / "a" / "manifest.json");
  EXPECT_EQ(m.at("command"), "gen");
  EXPECT_EQ(m.at("seed"), 7);
  EXPECT_EQ(m.at("status"), "ok");
  EXPECT_EQ(m.at("version").get<std::string>(), version_string());

  cli({"gen", "--n", "500", "--rotation", "45", "--seed", "7", "--out", (dir / "b").string()});
  EXPECT_EQ(testutil::read_file(dir / "a" / "source.csv"), testutil::read_file(dir / "b" / "source.csv"));
  EXPECT_EQ(testutil::read_file(dir / "a" / "target.csv"), testutil::read_file(dir / "b" / "target.csv"));
}

TEST(CliGen, GaussianWithTranslation) {
  TempDir dir("cli");
  auto r = cli({"gen", "--kind", "gaussian", "--classes", "3", "--n", "90", "--translate", "1,2", "--out",
                dir.path().string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  bool labelled = false;
  auto t = load_domain_csv(dir / "target.csv", &labelled);
  EXPECT_TRUE(labelled);
  EXPECT_EQ(t.x.rows, 90u);
  EXPECT_EQ(*std::max_element(t.y.begin(), t.y.end()), 2u);
}

TEST(CliGen, UsageErrors) {
  TempDir dir("cli");
  EXPECT_EQ(cli({"gen", "--kind", "spirals", "--out", dir.path().string()}).code, kExitUsage);
  EXPECT_EQ(cli({"gen", "--rotation", "400", "--out", dir.path().string()}).code, kExitUsage);
  EXPECT_EQ(cli({"gen", "--out", "/proc/catn-no-such-dir/x"}).code, kExitUsage);
  EXPECT_EQ(cli({"gen", "--bogus"}).code, kExitUsage);
  EXPECT_EQ(cli({}).code, kExitUsage);
  EXPECT_EQ(cli({"--help"}).code, kExitOk);
}

TEST(CliTrain, PrintConfigShowsDefaults) {
  auto r = cli({"train", "--print-config"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  auto j = nlohmann::json::parse(r.out);
  EXPECT_EQ(j.at("lr").get<double>(), 1e-3);
  EXPECT_EQ(j.at("momentum").get<double>(), 0.9);
  EXPECT_EQ(j.at("weight_decay").get<double>(), 5e-4);
  EXPECT_EQ(j.at("lambda").get<double>(), 1.0);
  EXPECT_EQ(j.at("beta").get<double>(), 1.0);
  EXPECT_EQ(j.at("eta1").get<double>(), 0.01);
  EXPECT_EQ(j.at("eta2").get<double>(), 0.1);
}

TEST(CliTrain, FlagsOverrideConfigFile) {
  TempDir dir("cli");
  std::ofstream(dir / "run.json") << R"({"lr": 0.01, "eta2": 0.5, "total_steps": 7})";
  auto r = cli({"train", "--config", (dir / "run.json").string(), "--lr", "0.02", "--print-config"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  auto j = nlohmann::json::parse(r.out);
  EXPECT_EQ(j.at("lr").get<double>(), 0.02);
  EXPECT_EQ(j.at("eta2").get<double>(), 0.5);
  EXPECT_EQ(j.at("total_steps").get<int>(), 7);
  std::ofstream(dir / "bad.json") << R"({"learning_rate": 0.01})";
  EXPECT_EQ(cli({"train", "--config", (dir / "bad.json").string(), "--print-config"}).code, kExitUsage);
}

TEST(CliTrain, MissingInputsAreUsageErrors) {
  TempDir dir("cli");
  auto r = cli({"train", "--source", (dir / "nope.csv").string(), "--target", (dir / "nope.csv").string()});
  EXPECT_EQ(r.code, kExitUsage);
  EXPECT_NE(r.err.find("nope.csv"), std::string::npos);
  EXPECT_EQ(cli({"train"}).code, kExitUsage);
}

TEST(CliTrain, OutputsManifestAndEvalAgreement) {
  Workspace ws;
  const auto out = ws.dir / "run";
  auto r = cli({"train", "--source", ws.source(), "--target", ws.target(), "--steps", "60", "--eval-every", "20",
                "--out", out.string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_TRUE(std::filesystem::exists(out / "metrics.csv"));
  EXPECT_TRUE(std::filesystem::exists(out / "checkpoint.bin"));
  EXPECT_EQ(data_rows(out / "metrics.csv"), 3u);
  auto m = read_json(out / "manifest.json");
  EXPECT_EQ(m.at("status"), "ok");
  EXPECT_EQ(m.at("command"), "train");
  EXPECT_EQ(m.at("config").at("total_steps"), 60);
  EXPECT_FALSE(m.at("version").get<std::string>().empty());
  EXPECT_TRUE(m.contains("started_at") && m.contains("finished_at"));

  auto e = cli({"eval", "--checkpoint", (out / "checkpoint.bin").string(), "--target", ws.target()});
  ASSERT_EQ(e.code, kExitOk) << e.err;
  const double final_target = m.at("final").at("target_acc").get<double>();
  EXPECT_NEAR(std::stod(e.out), final_target, 5e-5);
  EXPECT_NE(r.out.find("target_acc " + e.out.substr(0, e.out.size() - 1)), std::string::npos) << r.out << e.out;
}

TEST(CliTrain, DivergenceExitsWithDiagnostics) {
  Workspace ws;
  const auto out = ws.dir / "boom";
  auto r = cli({"train", "--source", ws.source(), "--target", ws.target(), "--steps", "200", "--lr", "1e6",
                "--momentum", "0", "--out", out.string()});
  EXPECT_EQ(r.code, kExitAbort);
  EXPECT_NE(r.err.find("aborted at step"), std::string::npos);
  auto dump = read_json(out / "abort.json");
  EXPECT_TRUE(dump.contains("last_breakdown"));
  EXPECT_EQ(read_json(out / "manifest.json").at("status"), "aborted");
}

TEST(CliEval, UnlabelledAndCorruptInputs) {
  Workspace ws;
  const auto out = ws.dir / "run";
  ASSERT_EQ(cli({"train", "--source", ws.source(), "--target", ws.target(), "--steps", "5", "--out", out.string()})
                .code,
            kExitOk);
  std::ofstream(ws.dir / "unlabelled.csv") << "f0,f1\n0.1,0.2\n";
  auto r = cli({"eval", "--checkpoint", (out / "checkpoint.bin").string(), "--target",
                (ws.dir / "unlabelled.csv").string()});
  EXPECT_EQ(r.code, kExitUsage);
  EXPECT_NE(r.err.find("label"), std::string::npos);

  auto bytes = testutil::read_file(out / "checkpoint.bin");
  std::ofstream(ws.dir / "cut.bin", std::ios::binary) << bytes.substr(0, bytes.size() / 2);
  r = cli({"eval", "--checkpoint", (ws.dir / "cut.bin").string(), "--target", ws.target()});
  EXPECT_EQ(r.code, kExitAbort);
  EXPECT_NE(r.err.find("truncated"), std::string::npos) << r.err;
}

TEST(CliAblate, TableAndCsv) {
  Workspace ws;
  const auto out = ws.dir / "abl";
  auto r = cli({"ablate", "--source", ws.source(), "--target", ws.target(), "--seeds", "1-2", "--steps", "10",
                "--threads", "1", "--out", out.string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_EQ(data_rows(out / "ablation.csv"), 5u);
  for (const char* mode : {"S0", "S1", "S2", "S3", "S4"}) EXPECT_NE(r.out.find(mode), std::string::npos);
  EXPECT_EQ(cli({"ablate", "--source", ws.source(), "--target", ws.target(), "--seeds", "1", "--out", out.string()})
                .code,
            kExitUsage);
  EXPECT_EQ(cli({"ablate", "--source", ws.source(), "--target", ws.target(), "--seeds", "x-y", "--out",
                 out.string()})
                .code,
            kExitUsage);
}

TEST(CliGradcheck, ComponentSelectionAndFailure) {
  auto r = cli({"gradcheck", "--component", "cycle", "--component", "matmul"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_NE(r.out.find("ok   cycle"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("ok   matmul"), std::string::npos) << r.out;
  auto strict = cli({"gradcheck", "--component", "tanh", "--tol", "1e-14", "--floor", "1e-300"});
  EXPECT_EQ(strict.code, kExitCheckFailed);
  EXPECT_NE(strict.out.find("FAIL tanh"), std::string::npos) << strict.out;
  EXPECT_NE(strict.err.find("failed at"), std::string::npos);
  EXPECT_EQ(cli({"gradcheck", "--component", "nonsense"}).code, kExitUsage);
}
