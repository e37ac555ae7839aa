// Acceptance harness: one test per criterion, each printing a single
// [ACCEPTANCE] pass/fail line with the measured worst violation.

#include <gtest/gtest.h>

#include <cstdio>
#include <string>

#include "opmodel/verify.hpp"

namespace {

using namespace opmodel;
using verify::SuiteResult;
using verify::VerifyOptions;

VerifyOptions base_options() {
  VerifyOptions opt;
  opt.seed = 2026;
  opt.tol = 1e-10;
  opt.window_neg = 10;
  opt.window_pos = 10;
  opt.depth = 10;
  return opt;
}

void announce(int criterion, const std::string& name, const SuiteResult& r) {
  std::printf("[ACCEPTANCE] %d %s: %s (cases %ld, max violation %.3e%s)\n", criterion,
              name.c_str(), r.pass ? "PASS" : "FAIL", r.cases, r.max_violation,
              r.error.empty() ? "" : (std::string(", error ") + r.error).c_str());
  std::fflush(stdout);
}

std::string config(const std::string& name) {
  return std::string(OPMODEL_CONFIG_DIR) + "/" + name;
}

TEST(Acceptance, C1_LemmaPodstVsDenseOracle) {
  auto r = verify::suite_podst(base_options(), 200);
  announce(1, "Lemma podst suite (200 random self-map systems, |X| <= 40)", r);
  EXPECT_TRUE(r.pass);
  EXPECT_EQ(r.cases, 200);
  EXPECT_LE(r.max_violation, 1e-10);
}

TEST(Acceptance, C2_CauchyDualSuite) {
  auto r = verify::suite_cdcom(base_options(), 200, 50);
  announce(2, "Cauchy dual suite (corpus + 50 random trees, bidual to 1e-12)", r);
  EXPECT_TRUE(r.pass);
  EXPECT_EQ(r.cases, 250);
}

TEST(Acceptance, C3_KernelDecompositionVsSvd) {
  auto r = verify::suite_ker(base_options(), 50);
  announce(3, "Lemma ker suite (50 random rooted trees, principal angles <= 1e-8)", r);
  EXPECT_TRUE(r.pass);
  EXPECT_EQ(r.cases, 50);
  EXPECT_LE(r.max_violation, 1e-8);
}

TEST(Acceptance, C4_ModelIntertwiningAndRoundTrip) {
  auto r = verify::suite_model(base_options(), 20);
  announce(4, "Model suite (unilateral, bilateral, 20 random trees; |n| <= 10)", r);
  EXPECT_TRUE(r.pass);
  EXPECT_GE(r.cases, 2 * 3 * 22);  // intertwining + round trip per vector per system
}

TEST(Acceptance, C5_MultiplierAlgebra) {
  auto r = verify::suite_wla(base_options(), 100);
  announce(5, "Multiplier algebra suite (indicators, domain split, 100 random pairs)", r);
  EXPECT_TRUE(r.pass);
  EXPECT_GE(r.cases, 100);
}

TEST(Acceptance, C6_CommutantRepresentation) {
  auto r = verify::suite_commutant(base_options());
  announce(6, "Commutant suite (I, T, T^2, T^3+2T; negative control rejected)", r);
  EXPECT_TRUE(r.pass);
  EXPECT_GE(r.cases, 15);
}

TEST(Acceptance, C7_TreeMultiplicationAndFejer) {
  auto gamma = verify::suite_gamma(base_options(), 50);
  announce(7, "Tree multiplication suite (50 random rooted trees)", gamma);
  EXPECT_TRUE(gamma.pass);
  EXPECT_GE(gamma.cases, 50);

  auto fej = verify::suite_fejer(base_options(), 12);
  announce(7, "Fejer smoothing suite (monotone error, exact attenuation law)", fej);
  EXPECT_TRUE(fej.pass);
}

TEST(Acceptance, C8_NegativeControls) {
  struct Control {
    const char* file;
    const char* suite;
    const char* designated;
  };
  const Control controls[] = {
      {"negative/nonli_tree.json", "model", "not_left_invertible"},
      {"negative/bad_prep.json", "model", "prep_violation"},
      {"negative/noncommuting.json", "commutant", "precheck_commutation"},
  };
  bool all_ok = true;
  for (const auto& c : controls) {
    VerifyOptions opt = base_options();
    opt.system = verify::SystemSpec::load(config(c.file));
    opt.suites = {c.suite};
    bool pass = true;
    auto report = verify::run_verify(opt, &pass);
    std::string error = report["suites"][0].value("error", std::string());
    bool ok = !pass && error == c.designated;
    all_ok = all_ok && ok;
    std::printf("[ACCEPTANCE] 8 negative control %s: %s (designated error '%s', got '%s')\n",
                c.file, ok ? "PASS" : "FAIL", c.designated, error.c_str());
  }
  std::fflush(stdout);
  EXPECT_TRUE(all_ok);
}

}  // namespace
