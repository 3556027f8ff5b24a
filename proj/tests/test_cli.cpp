#include <sys/wait.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

using nlohmann::json;

namespace {

struct Result {
  int code = -1;
  std::string out, err;
};

const std::string kBin = TREECAST_BIN;
const std::string kConfigs = TREECAST_CONFIGS;
const std::string kData = TREECAST_TEST_DATA;

Result run(const std::string& args, const std::string& env = "") {
  const std::string err_path = ::testing::TempDir() + "treecast_cli_stderr.txt";
  const std::string cmd = env + (env.empty() ? "" : " ") + kBin + " " + args + " 2>" + err_path;
  Result r;
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) return r;
  char buf[4096];
  for (std::size_t n; (n = fread(buf, 1, sizeof buf, p)) > 0;) r.out.append(buf, n);
  const int status = pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::ifstream e(err_path);
  std::stringstream ss;
  ss << e.rdbuf();
  r.err = ss.str();
  return r;
}

std::string cfg(const std::string& name) { return kConfigs + "/" + name; }
std::string data(const std::string& name) { return kData + "/" + name; }

json verdict_of(const json& report, const std::string& scheme) {
  for (const json& v : report["verdicts"])
    if (v["scheme"] == scheme) return v;
  return {};
}

std::vector<json> lines(const std::string& s) {
  std::vector<json> out;
  std::istringstream in(s);
  for (std::string line; std::getline(in, line);) out.push_back(json::parse(line));
  return out;
}

}  // namespace

TEST(CliCheck, AugmentedTwoPointAboveThreshold) {
  const Result r = run("check --config " + cfg("two-point-r2-0.1.json") + " --scheme augmented");
  ASSERT_EQ(r.code, 0) << r.err;
  const json j = json::parse(r.out);
  ASSERT_EQ(j["verdicts"].size(), 1u);
  EXPECT_EQ(verdict_of(j, "augmented")["verdict"], "survives");
  EXPECT_EQ(j["manifest"]["seed"], 0);
  EXPECT_EQ(j["manifest"]["config_digest"].get<std::string>().size(), 16u);
}

TEST(CliCheck, InvalidArityExitsTwo) {
  const Result r = run("check --config " + data("m-zero.json"));
  EXPECT_EQ(r.code, 2);
  EXPECT_TRUE(r.out.empty());
  EXPECT_NE(r.err.find("\"m\""), std::string::npos) << r.err;
}

TEST(CliCheck, MalformedJsonReportsLineAndColumn) {
  const Result r = run("check --config " + data("malformed.json"));
  EXPECT_EQ(r.code, 2);
  EXPECT_TRUE(r.out.empty());
  EXPECT_NE(r.err.find("malformed.json:3:33:"), std::string::npos) << r.err;
}

TEST(CliCheck, SchemaErrorsExitTwo) {
  EXPECT_EQ(run("check --config " + data("bad-probs.json")).code, 2);
  EXPECT_EQ(run("check --config " + data("does-not-exist.json")).code, 2);
  EXPECT_EQ(run("check --config " + cfg("two-point-r2-0.1.json") + " --scheme sideways").code, 2);
  EXPECT_EQ(run("check --config " + cfg("two-point-r2-0.1.json") + " --no-such-flag").code, 2);
  EXPECT_EQ(run("").code, 2);
}

TEST(CliCheck, PowerLawAllSurvive) {
  const Result r = run("check --config " + cfg("pareto-zeta.json"));
  ASSERT_EQ(r.code, 0) << r.err;
  const json j = json::parse(r.out);
  ASSERT_EQ(j["verdicts"].size(), 3u);
  for (const json& v : j["verdicts"]) {
    EXPECT_EQ(v["verdict"], "survives") << v.dump();
    EXPECT_EQ(v["shortcut"], "power-law-strength");
  }
}

TEST(CliCheck, SchemeSeparation) {
  const json j = json::parse(run("check --config " + cfg("two-point-r2-0.12.json")).out);
  EXPECT_EQ(verdict_of(j, "augmented")["verdict"], "survives");
  EXPECT_EQ(verdict_of(j, "complete")["verdict"], "dies");
  EXPECT_EQ(verdict_of(j, "boundary")["verdict"], "dies");
}

TEST(CliEstimate, SpectralRateMatchesClosedForm) {
  const Result r = run("estimate --config " + cfg("two-point-r2-0.3.json") + " --chain beta");
  ASSERT_EQ(r.code, 0) << r.err;
  const json e = json::parse(r.out)["estimate"];
  const double x = 0.3;
  EXPECT_EQ(e["method"], "spectral");
  EXPECT_NEAR(e["rate"].get<double>(), -std::log(0.5 * (x + std::sqrt(4 * x - 3 * x * x))), 1e-10);
  EXPECT_NEAR(e["rate"].get<double>(), 0.4585, 1e-4);
}

TEST(CliEstimate, NonLatticeUsesSplitting) {
  const Result r = run("estimate --config " + cfg("poisson-pair.json") + " --particles 2000 --reps 10 --n 100");
  ASSERT_EQ(r.code, 0) << r.err;
  const json e = json::parse(r.out)["estimate"];
  EXPECT_EQ(e["method"], "splitting");
  EXPECT_EQ(e["rep_rates"].size(), 10u);
  EXPECT_GT(e["ci"].get<double>(), 0.0);
}

TEST(CliEstimate, BelowMinimumExitsTwo) {
  const Result r = run("estimate --config " + cfg("two-point-r2-0.3.json") + " --n 10");
  EXPECT_EQ(r.code, 2);
  EXPECT_TRUE(r.out.empty());
  EXPECT_EQ(run("estimate --config " + cfg("two-point-r2-0.3.json") + " --particles 10").code, 2);
  EXPECT_EQ(run("estimate --config " + cfg("two-point-r2-0.3.json") + " --reps 3").code, 2);
  EXPECT_EQ(run("estimate --config " + cfg("two-point-r2-0.3.json") + " --chain delta").code, 2);
}

TEST(CliEstimate, DegenerateExtinctionExitsFour) {
  const Result r = run("estimate --config " + data("dies-at-once.json") + " --particles 1000 --reps 10");
  EXPECT_EQ(r.code, 4);
  EXPECT_TRUE(r.out.empty());
  EXPECT_NE(r.err.find("particles"), std::string::npos);
}

TEST(CliEstimate, ThreadCountDoesNotChangeOutput) {
  const std::string base = "estimate --config " + cfg("poisson-pair.json") + " --particles 1000 --reps 12 --n 60 --seed 9";
  EXPECT_EQ(run(base + " --threads 1").out, run(base + " --threads 4").out);
}

TEST(CliSimulate, CertainCrossing) {
  const Result r = run("simulate --config " + cfg("sure-crossing.json") + " --depth 10 --reps 5");
  ASSERT_EQ(r.code, 0) << r.err;
  const auto ls = lines(r.out);
  ASSERT_EQ(ls.size(), 6u);
  for (int i = 0; i < 5; ++i) {
    EXPECT_EQ(ls[i]["type"], "run");
    EXPECT_EQ(ls[i]["rep"], i);
  }
  for (const char* s : {"aug", "comp", "bond"}) EXPECT_EQ(ls.back()["survival_frequency"][s], 1.0);
}

TEST(CliSimulate, NoCrossing) {
  const auto ls = lines(run("simulate --config " + cfg("never-crossing.json") + " --depth 10 --reps 5").out);
  for (const char* s : {"aug", "comp", "bond"}) EXPECT_EQ(ls.back()["survival_frequency"][s], 0.0);
}

TEST(CliSimulate, FrequenciesBetweenThresholds) {
  const Result r = run("simulate --config " + cfg("two-point-r2-0.12.json") + " --depth 30 --reps 200");
  ASSERT_EQ(r.code, 0) << r.err;
  const json f = lines(r.out).back()["survival_frequency"];
  EXPECT_GT(f["aug"].get<double>(), f["comp"].get<double>());
  EXPECT_GE(f["comp"].get<double>(), f["bond"].get<double>());
}

TEST(CliSimulate, CsvAndBudget) {
  const Result r = run("simulate --config " + cfg("sure-crossing.json") + " --depth 3 --reps 2 --format csv");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out.substr(0, r.out.find("# ")), "rep,level,aug,comp,bond\n0,0,1,1,1\n0,1,2,2,2\n0,2,4,4,4\n0,3,8,8,8\n"
                                              "1,0,1,1,1\n1,1,2,2,2\n1,2,4,4,4\n1,3,8,8,8\n");
  EXPECT_EQ(run("simulate --config " + cfg("sure-crossing.json") + " --depth 30 --reps 100 --budget 1000").code, 2);
  EXPECT_EQ(run("simulate --config " + cfg("sure-crossing.json") + " --format xml").code, 2);
}

TEST(CliSimulate, DeterministicAndSeedSensitive) {
  const std::string base = "simulate --config " + cfg("poisson-pair.json") + " --depth 12 --reps 6";
  const Result a = run(base + " --seed 5"), b = run(base + " --seed 5"), c = run(base + " --seed 6");
  EXPECT_EQ(a.out, b.out);
  EXPECT_NE(a.out, c.out);
  EXPECT_EQ(run(base + " --seed 5 --threads 3").out, a.out);
  EXPECT_EQ(run(base, "TREECAST_SEED=5").out, a.out);
  EXPECT_EQ(run(base + " --seed 5", "TREECAST_SEED=7").out, a.out);
  EXPECT_EQ(run(base, "TREECAST_SEED=-1").code, 2);
}

TEST(CliThreshold, PoissonAugmented) {
  const Result r = run("threshold --family " + cfg("family-poisson-strength.json") + " --scheme augmented");
  ASSERT_EQ(r.code, 0) << r.err;
  const json t = json::parse(r.out)["threshold"];
  EXPECT_NEAR(t["theta"].get<double>(), 0.23, 0.005);
  EXPECT_LE(t["uncertainty"].get<double>(), 1e-4);
}

TEST(CliThreshold, TwoPointBoundary) {
  const json t = json::parse(run("threshold --family " + cfg("family-two-point.json") + " --scheme boundary --tol 1e-7").out)["threshold"];
  EXPECT_NEAR(t["theta"].get<double>(), 0.25, 1e-6);
}

TEST(CliThreshold, PoissonBoundaryMatchesBranchingCriterion) {
  // e^mu > 1 + e^-mu has root ln((1 + sqrt 5) / 2).
  const json t =
      json::parse(run("threshold --family " + cfg("family-poisson-strength.json") + " --scheme boundary --tol 1e-8").out)["threshold"];
  EXPECT_NEAR(t["theta"].get<double>(), std::log(0.5 * (1 + std::sqrt(5.0))), 1e-6);
}

TEST(CliThreshold, ErrorsExitCodes) {
  const Result r = run("threshold --family " + data("family-no-sign-change.json") + " --scheme augmented");
  EXPECT_EQ(r.code, 5);
  EXPECT_TRUE(r.out.empty());
  EXPECT_EQ(run("threshold --family " + cfg("family-two-point.json") + " --scheme all").code, 2);
  EXPECT_EQ(run("threshold --family " + cfg("family-two-point.json") + " --scheme boundary --tol 0").code, 2);
}

TEST(CliSpeed, ReportsEstimateAndTarget) {
  const Result r = run("speed --config " + cfg("two-point-r2-0.3.json") + " --depth 10 --reps 4");
  ASSERT_EQ(r.code, 0) << r.err;
  const json j = json::parse(r.out);
  EXPECT_EQ(j["samples"].size(), 4u);
  EXPECT_NEAR(j["s_star"].get<double>(), 0.7295, 1e-3);
  EXPECT_LE(j["speed"].get<double>(), 1.0);
}

TEST(CliManifest, ByteIdenticalAndDigestTracksConfig) {
  const std::string a = run("check --config " + cfg("two-point-r2-0.1.json")).out;
  EXPECT_EQ(a, run("check --config " + cfg("two-point-r2-0.1.json")).out);
  const json ja = json::parse(a), jb = json::parse(run("check --config " + cfg("two-point-r2-0.12.json")).out);
  EXPECT_NE(ja["manifest"]["config_digest"], jb["manifest"]["config_digest"]);
  EXPECT_FALSE(ja["manifest"].contains("wall_time"));
  const json timed = json::parse(run("check --config " + cfg("two-point-r2-0.1.json") + " --timing").out);
  EXPECT_TRUE(timed["manifest"].contains("wall_time"));
}
