#include <gtest/gtest.h>

#include <memory>

#include "opmodel/oracle.hpp"
#include "opmodel/selfmap.hpp"

namespace opmodel {
namespace {

using namespace std::complex_literals;

// X = {a=0, b=1}, phi swaps them, w = (2, 3)
SelfMapSystem two_point_swap() {
  nlohmann::json doc = {{"points",
                         {{{"id", 0}, {"phi", 1}, {"weight", 2}},
                          {{"id", 1}, {"phi", 0}, {"weight", 3}}}}};
  return SelfMapSystem::from_json(doc);
}

// phi = successor on the naturals, unit weights: the backward-shift carrier
SelfMapSystem backward_shift_carrier() {
  nlohmann::json doc = {{"points", {{{"id", 0}, {"weight", 1}}}},
                        {"extension", {{"weight", 1}, {"fan_out", {0}}}}};
  return SelfMapSystem::from_json(doc);
}

// phi = successor on the integers with basepoint omega = 0
SelfMapSystem z_spine() {
  nlohmann::json doc = {{"points", {{{"id", 0}, {"weight", 1}}}},
                        {"basepoints", {0}},
                        {"extension", {{"weight", 1}, {"fan_in", {0}}, {"fan_out", {0}}}}};
  return SelfMapSystem::from_json(doc);
}

// random finite system; bijective phi when `invertible` is set
SelfMapSystem random_system(Rng& rng, int n, bool invertible) {
  std::vector<std::int64_t> target(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) target[static_cast<std::size_t>(i)] = static_cast<std::int64_t>(i);
  if (invertible) {
    for (int i = n - 1; i > 0; --i)
      std::swap(target[static_cast<std::size_t>(i)],
                target[rng.below(static_cast<std::size_t>(i) + 1)]);
  } else {
    for (auto& t : target) t = static_cast<std::int64_t>(rng.below(static_cast<std::size_t>(n)));
  }
  nlohmann::json doc;
  doc["points"] = nlohmann::json::array();
  for (int i = 0; i < n; ++i) {
    Complex w = rng.complex_in_square(2.0);
    if (invertible && std::abs(w) < 0.25) w += Complex{0.5, 0.0};
    doc["points"].push_back({{"id", i},
                             {"phi", target[static_cast<std::size_t>(i)]},
                             {"weight", {w.real(), w.imag()}}});
  }
  return SelfMapSystem::from_json(doc);
}

std::vector<IndexKey> all_core_keys(const SelfMapSystem& s) {
  std::vector<IndexKey> keys;
  for (auto id : s.core_ids()) keys.push_back({id, 0});
  return keys;
}

TEST(SelfMapSpec, ParsesAndValidates) {
  auto s = two_point_swap();
  EXPECT_EQ(s.phi(key(0)), key(1));
  EXPECT_EQ(s.weight(key(1)), Complex(3, 0));
  EXPECT_EQ(s.preimages(key(0)), std::vector<IndexKey>{key(1)});

  EXPECT_THROW(SelfMapSystem::from_json_text(R"({"points": []})"), ParseError);
  EXPECT_THROW(SelfMapSystem::from_json_text(R"({"points": [{"id": 0, "phi": 5, "weight": 1}]})"),
               ParseError);
  EXPECT_THROW(SelfMapSystem::from_json_text(R"({"points": [{"id": 0, "weight": 1}]})"),
               ParseError);
}

TEST(CompApply, BackwardShiftCarrier) {
  auto s = backward_shift_carrier();
  // the line is encoded as fan-out tail keys; e_k -> e_{k-1}, e_0 -> 0
  FinVec g = comp_apply(s, FinVec::unit(key(0, -2)));
  EXPECT_EQ(g.support_size(), 1u);
  EXPECT_EQ(g.at(key(0, -1)), 1.0 + 0.0i);
  EXPECT_TRUE(comp_apply(s, FinVec::unit(key(0))).empty());
  EXPECT_TRUE(comp_apply(s, FinVec()).empty());
}

TEST(CompApply, TwoPointSwapValues) {
  auto s = two_point_swap();
  FinVec ga = comp_apply(s, FinVec::unit(key(0)));
  EXPECT_EQ(ga.at(key(1)), 3.0 + 0.0i);
  EXPECT_EQ(ga.support_size(), 1u);
  FinVec gb = comp_apply(s, FinVec::unit(key(1)));
  EXPECT_EQ(gb.at(key(0)), 2.0 + 0.0i);
}

TEST(CompAdjointPower, Examples) {
  auto s = two_point_swap();
  FinVec id0 = comp_adjoint_power(s, key(0), 0);
  EXPECT_EQ(id0.at(key(0)), 1.0 + 0.0i);

  // (C*)^2 e_a = conj(w(a) w(b)) e_a = 6 e_a
  FinVec g = comp_adjoint_power(s, key(0), 2);
  EXPECT_EQ(g.at(key(0)), 6.0 + 0.0i);
  EXPECT_EQ(g.support_size(), 1u);

  // zero weight annihilates
  nlohmann::json doc = {{"points", {{{"id", 0}, {"phi", 0}, {"weight", 0}}}}};
  auto z = SelfMapSystem::from_json(doc);
  EXPECT_TRUE(comp_adjoint_power(z, key(0), 1).empty());
}

TEST(CompPower, ZeroAndNoPreimages) {
  auto s = backward_shift_carrier();
  FinVec id0 = comp_power(s, key(0, -3), 0);
  EXPECT_EQ(id0.at(key(0, -3)), 1.0 + 0.0i);
  // x = 0 has no preimages at all
  EXPECT_TRUE(comp_power(s, key(0), 3).empty());
}

TEST(CompPower, TreeAsCompositionMatchesShift) {
  nlohmann::json doc = {{"rooted", true},
                        {"vertices",
                         {{{"id", 0}, {"parent", nullptr}},
                          {{"id", 1}, {"parent", 0}, {"weight", "3/5"}},
                          {{"id", 2}, {"parent", 0}, {"weight", "4/5"}}}},
                        {"extension", {{"weight", 1}}}};
  auto t = DirectedTreeSystem::from_json(doc);
  auto s = SelfMapSystem::from_tree(t);
  FinVec g = comp_power(s, t.root_key(), 2);
  // depth-2 descendants carry the path-weight amplitudes
  EXPECT_NEAR(std::abs(g.at(key(1, 1)) - 0.6), 0.0, 1e-15);
  EXPECT_NEAR(std::abs(g.at(key(2, 1)) - 0.8), 0.0, 1e-15);
  EXPECT_EQ(g.support_size(), 2u);
  FinVec via_shift = shift_apply(t, shift_apply(t, FinVec::unit(t.root_key())));
  EXPECT_LE((g - via_shift).norm(), 1e-15);
}

TEST(CompPower, SemigroupExactly) {
  Rng rng(31);
  for (int trial = 0; trial < 10; ++trial) {
    auto s = random_system(rng, 12, trial % 2 == 0);
    IndexKey x{static_cast<std::int64_t>(rng.below(12)), 0};
    FinVec whole = comp_power(s, x, 5);
    FinVec split = comp_power(s, comp_power(s, x, 3), 2);
    EXPECT_EQ((whole - split).norm(), 0.0);
  }
}

TEST(GramDiagonal, Examples) {
  auto s = two_point_swap();
  EXPECT_DOUBLE_EQ(gram_diagonal_comp(s, key(0)), 9.0);
  EXPECT_DOUBLE_EQ(gram_diagonal_comp(s, key(1)), 4.0);
  auto b = backward_shift_carrier();
  EXPECT_DOUBLE_EQ(gram_diagonal_comp(b, key(0)), 0.0);
}

TEST(PodstIdentities, AgreeWithDenseOracleOnRandomSystems) {
  Rng rng(404);
  for (int trial = 0; trial < 25; ++trial) {
    auto s = random_system(rng, 3 + static_cast<int>(rng.below(18)), trial % 3 == 0);
    auto keys = all_core_keys(s);
    auto sp = std::make_shared<SelfMapSystem>(s);
    auto dense = densify(CompositionOperator(sp), keys);
    Eigen::MatrixXcd m = dense.matrix;
    unsigned n = 1 + static_cast<unsigned>(rng.below(4));

    Eigen::MatrixXcd mn = Eigen::MatrixXcd::Identity(m.rows(), m.cols());
    for (unsigned i = 0; i < n; ++i) mn = m * mn;
    Eigen::MatrixXcd man = Eigen::MatrixXcd::Identity(m.rows(), m.cols());
    for (unsigned i = 0; i < n; ++i) man = m.adjoint() * man;

    for (int j = 0; j < static_cast<int>(keys.size()); ++j) {
      IndexKey x = keys[static_cast<std::size_t>(j)];
      FinVec a = comp_adjoint_power(s, x, n);
      FinVec p = comp_power(s, x, n);
      double worst = 0.0;
      for (int i = 0; i < static_cast<int>(keys.size()); ++i) {
        IndexKey y = keys[static_cast<std::size_t>(i)];
        worst = std::max(worst, std::abs(a.at(y) - man(i, j)));
        worst = std::max(worst, std::abs(p.at(y) - mn(i, j)));
      }
      EXPECT_LE(worst, 1e-10);
      // (iv): C*C is diagonal with the Gram values
      FinVec cc = comp_adjoint_apply(s, comp_apply(s, FinVec::unit(x)));
      EXPECT_LE((cc - FinVec::unit(x) * Complex{s.gram(x), 0.0}).norm(), 1e-10);
    }
  }
}

TEST(AdjointDuality, RandomVectors) {
  Rng rng(77);
  for (int trial = 0; trial < 10; ++trial) {
    auto s = random_system(rng, 20, false);
    FinVec x, y;
    for (int i = 0; i < 8; ++i) {
      x.set(key(static_cast<std::int64_t>(rng.below(20))), rng.complex_in_square(2.0));
      y.set(key(static_cast<std::int64_t>(rng.below(20))), rng.complex_in_square(2.0));
    }
    Complex lhs = inner(comp_apply(s, x), y);
    Complex rhs = inner(x, comp_adjoint_apply(s, y));
    EXPECT_LE(std::abs(lhs - rhs), 1e-10 * std::max(1.0, x.norm() * y.norm()));
  }
}

TEST(CauchyDualComp, UnitaryIsFixed) {
  nlohmann::json doc = {{"points",
                         {{{"id", 0}, {"phi", 1}, {"weight", {0, 1}}},
                          {{"id", 1}, {"phi", 0}, {"weight", {-1, 0}}}}}};
  auto s = SelfMapSystem::from_json(doc);
  auto d = cauchy_dual_comp(s);
  EXPECT_NEAR(std::abs(d.weight(key(0)) - 1.0i), 0.0, 1e-15);
  EXPECT_NEAR(std::abs(d.weight(key(1)) + 1.0), 0.0, 1e-15);
}

TEST(CauchyDualComp, TwoPointSwapValues) {
  auto d = cauchy_dual_comp(two_point_swap());
  EXPECT_NEAR(std::abs(d.weight(key(0)) - 0.5), 0.0, 1e-15);
  EXPECT_NEAR(std::abs(d.weight(key(1)) - (1.0 / 3.0)), 0.0, 1e-15);
}

TEST(CauchyDualComp, MatchesDenseDualOnRandomBijectiveSystems) {
  Rng rng(505);
  for (int trial = 0; trial < 15; ++trial) {
    auto s = random_system(rng, 3 + static_cast<int>(rng.below(15)), true);
    auto keys = all_core_keys(s);
    auto sp = std::make_shared<SelfMapSystem>(s);
    auto dp = std::make_shared<SelfMapSystem>(cauchy_dual_comp(s));
    Eigen::MatrixXcd m = densify_rect(CompositionOperator(sp), keys, keys);
    Eigen::MatrixXcd formula = densify_rect(CompositionOperator(dp), keys, keys);
    EXPECT_LE((dense_cauchy_dual(m) - formula).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(CauchyDualComp, AgreesWithTreeDualThroughConversion) {
  nlohmann::json doc = {{"rooted", true},
                        {"vertices",
                         {{{"id", 0}, {"parent", nullptr}},
                          {{"id", 1}, {"parent", 0}, {"weight", "3/5"}},
                          {{"id", 2}, {"parent", 0}, {"weight", "4/5"}},
                          {{"id", 3}, {"parent", 1}, {"weight", 2}}}},
                        {"extension", {{"weight", 1}}}};
  auto t = DirectedTreeSystem::from_json(doc);
  auto s = SelfMapSystem::from_tree(t);
  auto td = cauchy_dual_shift(t);
  auto sd = cauchy_dual_comp(s);
  for (const auto& k : t.window_keys(4)) {
    if (k == t.root_key()) continue;
    EXPECT_NEAR(std::abs(td.weight(k) - sd.weight(k)), 0.0, 1e-14) << k.str();
  }
}

TEST(CauchyDualComp, RejectsNonLeftInvertible) {
  EXPECT_THROW(cauchy_dual_comp(backward_shift_carrier()), NotLeftInvertibleError);
}

TEST(OrbitOf, FixedPointIsSingleton) {
  nlohmann::json doc = {{"points", {{{"id", 0}, {"phi", 0}, {"weight", 1}}}}};
  auto s = SelfMapSystem::from_json(doc);
  auto r = orbit_of(s, key(0));
  EXPECT_TRUE(r.complete);
  EXPECT_EQ(r.points, std::set<IndexKey>{key(0)});
}

TEST(OrbitOf, SwapSharesOneCycle) {
  auto r = orbit_of(two_point_swap(), key(0));
  EXPECT_EQ(r.points, (std::set<IndexKey>{key(0), key(1)}));
}

TEST(OrbitOf, PathTreeIsOneOrbitAndBudgetFlags) {
  auto t = DirectedTreeSystem::path({1.0, 1.0});
  auto s = SelfMapSystem::from_tree(t);
  auto r = orbit_of(s, key(1), 50);
  EXPECT_FALSE(r.complete);  // infinite tail exhausts the budget
  EXPECT_TRUE(r.points.count(key(0)));
  EXPECT_TRUE(r.points.count(key(2)));
}

TEST(Generation, AllCycleSystemIsZero) {
  auto table = generation(two_point_swap());
  EXPECT_EQ(table.at(key(0)), 0);
  EXPECT_EQ(table.at(key(1)), 0);
  EXPECT_TRUE(table.cycle.count(key(0)));
}

TEST(Generation, ZSpineSignedValues) {
  auto table = generation(z_spine(), 8);
  EXPECT_EQ(table.at(key(0)), 0);
  for (long j = 1; j <= 8; ++j) {
    EXPECT_EQ(table.at(key(0, -j)), j);  // forward orbit of the basepoint
    EXPECT_EQ(table.at(key(0, j)), -j);  // preimages run backwards
  }
}

TEST(Generation, RecursionHoldsOnTreeSystems) {
  auto t = DirectedTreeSystem::path({1.0, 1.0, 1.0});
  auto s = SelfMapSystem::from_tree(t);
  auto table = generation(s, 6);
  for (const auto& [k, v] : table.value) {
    if (table.cycle.count(k)) continue;
    EXPECT_EQ(table.at(s.phi(k)), v + 1) << k.str();
  }
}

TEST(Generation, MissingBasepointIsAnError) {
  nlohmann::json doc = {{"points", {{{"id", 0}, {"weight", 1}}}},
                        {"extension", {{"weight", 1}, {"fan_out", {0}}}}};
  auto s = SelfMapSystem::from_json(doc);
  EXPECT_THROW(generation(s, 4), Error);
}

TEST(Generation, BasepointInCycleConflicts) {
  nlohmann::json doc = {{"points",
                         {{{"id", 0}, {"phi", 1}, {"weight", 1}},
                          {{"id", 1}, {"phi", 0}, {"weight", 1}}}},
                        {"basepoints", {0}}};
  auto s = SelfMapSystem::from_json(doc);
  EXPECT_THROW(generation(s), CheckError);
}

TEST(GenRange, FiltersByValue) {
  auto table = generation(z_spine(), 6);
  auto r = gen_range(table, 0, 2);
  EXPECT_EQ(r.size(), 3u);
  for (const auto& k : r) {
    EXPECT_GE(table.at(k), 0);
    EXPECT_LE(table.at(k), 2);
  }
}

}  // namespace
}  // namespace opmodel
