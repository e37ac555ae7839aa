#include <gtest/gtest.h>

#include <array>
#include <cstdio>
#include <fstream>
#include <string>

#include <json.hpp>

namespace {

struct CliResult {
  int exit_code = -1;
  std::string stdout_text;
};

CliResult run_cli(const std::string& args) {
  std::string cmd = std::string(OPMODEL_CLI_PATH) + " " + args + " 2>/dev/null";
  CliResult r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return r;
  std::array<char, 4096> buf{};
  std::size_t n = 0;
  while ((n = fread(buf.data(), 1, buf.size(), pipe)) > 0) r.stdout_text.append(buf.data(), n);
  int status = pclose(pipe);
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string config(const std::string& name) { return std::string(OPMODEL_CONFIG_DIR) + "/" + name; }

nlohmann::json parse(const CliResult& r) { return nlohmann::json::parse(r.stdout_text); }

TEST(CliBuild, UnilateralSummary) {
  auto r = run_cli("build --spec " + config("unilateral.json"));
  ASSERT_EQ(r.exit_code, 0);
  auto doc = parse(r);
  EXPECT_EQ(doc["type"], "tree");
  EXPECT_EQ(doc["dim_e"], 1);
  EXPECT_TRUE(doc["left_invertible"]["ok"].get<bool>());
  EXPECT_DOUBLE_EQ(doc["left_invertible"]["inf_d"].get<double>(), 1.0);
}

TEST(CliBuild, YTreeHasTwoDimensionalKernel) {
  auto r = run_cli("build --spec " + config("ytree.json"));
  ASSERT_EQ(r.exit_code, 0);
  auto doc = parse(r);
  EXPECT_EQ(doc["dim_e"], 2);
  EXPECT_EQ(doc["branching_vertices"].size(), 1u);
}

TEST(CliBuild, SelfMapSummary) {
  auto r = run_cli("build --spec " + config("zspine.json"));
  ASSERT_EQ(r.exit_code, 0);
  auto doc = parse(r);
  EXPECT_EQ(doc["type"], "selfmap");
  EXPECT_EQ(doc["dim_e"], 1);
  EXPECT_TRUE(doc["left_invertible"]["ok"].get<bool>());
}

TEST(CliBuild, MalformedSpecIsAParseError) {
  std::string bad = std::string(OPMODEL_CONFIG_DIR) + "/../build/bad_spec_tmp.json";
  {
    std::ofstream out(bad);
    out << R"({"rooted": true, "vertices": [{"id": 0, "parent": 1, "weight": 1},)"
        << R"({"id": 1, "parent": 0, "weight": 1}], "extension": {"weight": 1}})";
  }
  auto r = run_cli("build --spec " + bad);
  EXPECT_EQ(r.exit_code, 2);
  auto doc = parse(r);
  EXPECT_EQ(doc["error"], "parse_error");
  std::remove(bad.c_str());
}

TEST(CliCoeffs, BilateralTwoSidedVector) {
  auto r = run_cli("coeffs --spec " + config("bilateral.json") + " --vector " +
                   config("vectors/bilateral_z_plus_zinv.json") + " --window 10,10");
  ASSERT_EQ(r.exit_code, 0);
  auto doc = parse(r);
  EXPECT_TRUE(doc["exact"]["neg"].get<bool>());
  EXPECT_TRUE(doc["exact"]["pos"].get<bool>());
  for (const auto& entry : doc["coefficients"]) {
    long n = entry["n"].get<long>();
    double re = entry["coords"][0][0].get<double>();
    EXPECT_NEAR(re, (n == 1 || n == -1) ? 1.0 : 0.0, 1e-12) << n;
  }
  EXPECT_TRUE(doc.contains("radius"));
  EXPECT_TRUE(doc["radius"]["minus_vanishes"].get<bool>());
}

TEST(CliDual, YTreeTable) {
  auto r = run_cli("dual --spec " + config("ytree.json") + " --depth 3");
  ASSERT_EQ(r.exit_code, 0);
  auto doc = parse(r);
  bool found_a = false;
  for (const auto& e : doc["entries"]) {
    if (e["key"] == "1") {
      found_a = true;
      EXPECT_NEAR(e["dual_weight"][0].get<double>(), 0.6, 1e-12);
    }
  }
  EXPECT_TRUE(found_a);
}

TEST(CliDual, NonLeftInvertibleIsDesignatedError) {
  auto r = run_cli("dual --spec " + config("negative/nonli_tree.json"));
  EXPECT_EQ(r.exit_code, 1);
  EXPECT_EQ(parse(r)["error"], "not_left_invertible");
}

TEST(CliVerify, FastSuitesPassOnBundledExamples) {
  for (const char* spec : {"unilateral.json", "bilateral.json", "ytree.json",
                           "rootless_branching.json", "zspine.json"}) {
    auto r = run_cli("verify --spec " + config(spec) + " --suite model,gamma,fejer --seed 7");
    EXPECT_EQ(r.exit_code, 0) << spec;
    auto doc = parse(r);
    EXPECT_TRUE(doc["pass"].get<bool>()) << spec;
  }
}

TEST(CliVerify, DeterministicBytesForFixedSeed) {
  std::string args = "verify --spec " + config("ytree.json") + " --suite model,fejer --seed 123";
  auto first = run_cli(args);
  auto second = run_cli(args);
  ASSERT_EQ(first.exit_code, 0);
  EXPECT_EQ(first.stdout_text, second.stdout_text);
}

TEST(CliVerify, EmptySuiteSelectionIsAnEmptyReport) {
  auto r = run_cli("verify --suite none --seed 3");
  ASSERT_EQ(r.exit_code, 0);
  auto doc = parse(r);
  EXPECT_TRUE(doc["suites"].empty());
  EXPECT_TRUE(doc["pass"].get<bool>());
}

TEST(CliVerify, NegativeControlsProduceDesignatedFailures) {
  {
    auto r = run_cli("verify --spec " + config("negative/nonli_tree.json") + " --suite model");
    EXPECT_EQ(r.exit_code, 1);
    auto doc = parse(r);
    EXPECT_FALSE(doc["pass"].get<bool>());
    EXPECT_EQ(doc["suites"][0]["error"], "not_left_invertible");
  }
  {
    auto r = run_cli("verify --spec " + config("negative/bad_prep.json") + " --suite model");
    EXPECT_EQ(r.exit_code, 1);
    auto doc = parse(r);
    EXPECT_EQ(doc["suites"][0]["error"], "prep_violation");
  }
  {
    auto r = run_cli("verify --spec " + config("negative/noncommuting.json") +
                     " --suite commutant");
    EXPECT_EQ(r.exit_code, 1);
    auto doc = parse(r);
    EXPECT_EQ(doc["suites"][0]["error"], "precheck_commutation");
  }
}

TEST(CliEnv, MalformedSupportBudgetIsIgnored) {
  auto r = run_cli("build --spec " + config("unilateral.json"));
  CliResult with_env;
  {
    std::string cmd = std::string("OPMODEL_MAX_SUPPORT=nonsense ") + OPMODEL_CLI_PATH +
                      " build --spec " + config("unilateral.json") + " 2>/dev/null";
    FILE* pipe = popen(cmd.c_str(), "r");
    ASSERT_NE(pipe, nullptr);
    std::array<char, 4096> buf{};
    std::size_t n = 0;
    while ((n = fread(buf.data(), 1, buf.size(), pipe)) > 0)
      with_env.stdout_text.append(buf.data(), n);
    int status = pclose(pipe);
    with_env.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }
  EXPECT_EQ(with_env.exit_code, 0);
  EXPECT_EQ(with_env.stdout_text, r.stdout_text);
}

}  // namespace
