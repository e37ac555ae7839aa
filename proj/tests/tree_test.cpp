#include <gtest/gtest.h>

#include <complex>
#include <memory>

#include "opmodel/oracle.hpp"
#include "opmodel/tree.hpp"

namespace opmodel {
namespace {

using namespace std::complex_literals;

DirectedTreeSystem y_tree() {
  nlohmann::json doc = {
      {"rooted", true},
      {"vertices",
       {{{"id", 0}, {"parent", nullptr}},
        {{"id", 1}, {"parent", 0}, {"weight", "3/5"}},
        {{"id", 2}, {"parent", 0}, {"weight", "4/5"}}}},
      {"extension", {{"weight", 1}}}};
  return DirectedTreeSystem::from_json(doc);
}

DirectedTreeSystem random_tree(Rng& rng, long max_depth = 8, int max_branchings = 3,
                               bool positive_weights = false) {
  nlohmann::json doc;
  doc["rooted"] = true;
  doc["vertices"] = nlohmann::json::array();
  doc["vertices"].push_back({{"id", 0}, {"parent", nullptr}});
  std::vector<std::pair<std::int64_t, long>> open{{0, 0}};  // (id, depth)
  std::int64_t next_id = 1;
  int branchings = 0;
  auto draw_weight = [&]() -> nlohmann::json {
    if (positive_weights) return rng.uniform(0.5, 2.0);
    Complex w;
    do {
      w = rng.complex_in_square(2.0);
    } while (std::abs(w) < 0.3);
    return {w.real(), w.imag()};
  };
  std::size_t grow_steps = 4 + rng.below(12);
  for (std::size_t step = 0; step < grow_steps && !open.empty(); ++step) {
    std::size_t pick = rng.below(open.size());
    auto [id, depth] = open[pick];
    open.erase(open.begin() + static_cast<std::ptrdiff_t>(pick));
    if (depth >= max_depth) continue;
    bool branch = branchings < max_branchings && rng.below(3) == 0;
    int kids = branch ? 2 + static_cast<int>(rng.below(2)) : 1;
    if (kids > 1) ++branchings;
    for (int c = 0; c < kids; ++c) {
      doc["vertices"].push_back({{"id", next_id}, {"parent", id}, {"weight", draw_weight()}});
      open.emplace_back(next_id, depth + 1);
      ++next_id;
    }
  }
  doc["extension"] = {{"weight", positive_weights ? nlohmann::json(1.0) : draw_weight()}};
  return DirectedTreeSystem::from_json(doc);
}

TEST(BuildTree, UnitPathIsUnilateralCarrier) {
  auto t = DirectedTreeSystem::path({});
  EXPECT_TRUE(t.rooted());
  EXPECT_EQ(t.core_size(), 1u);
  EXPECT_EQ(t.children(t.root_key()), std::vector<IndexKey>{key(0, 1)});
  EXPECT_EQ(t.parent(key(0, 3)), key(0, 2));
  EXPECT_FALSE(t.parent(t.root_key()).has_value());
  EXPECT_EQ(t.level(key(0, 5)), 5);
}

TEST(BuildTree, RootlessPathIsBilateralCarrier) {
  auto t = DirectedTreeSystem::bilateral_path();
  EXPECT_FALSE(t.rooted());
  EXPECT_EQ(t.parent(key(0, 0)), key(0, -1));
  EXPECT_EQ(t.parent(key(0, -1)), key(0, -2));
  EXPECT_EQ(t.children(key(0, -1)), std::vector<IndexKey>{key(0, 0)});
  EXPECT_EQ(t.level(key(0, -3)), -3);
}

TEST(BuildTree, YTreeStructure) {
  auto t = y_tree();
  EXPECT_EQ(t.branching_ids(), std::vector<std::int64_t>{0});
  auto kids = t.children(t.root_key());
  ASSERT_EQ(kids.size(), 2u);
  EXPECT_NEAR(std::abs(t.weight(kids[0]) - 0.6), 0.0, 1e-15);
  EXPECT_NEAR(std::abs(t.weight(kids[1]) - 0.8), 0.0, 1e-15);
  // branches continue as unit paths
  EXPECT_EQ(t.children(key(1, 0)), std::vector<IndexKey>{key(1, 1)});
}

TEST(BuildTree, RejectsMalformedSpecs) {
  EXPECT_THROW(DirectedTreeSystem::from_json_text(R"({"rooted": true})"), ParseError);
  // cyclic parent map
  nlohmann::json cyc = {{"rooted", true},
                        {"vertices",
                         {{{"id", 0}, {"parent", nullptr}},
                          {{"id", 1}, {"parent", 2}, {"weight", 1}},
                          {{"id", 2}, {"parent", 1}, {"weight", 1}}}},
                        {"extension", {{"weight", 1}}}};
  EXPECT_THROW(DirectedTreeSystem::from_json(cyc), ParseError);
  // zero weight
  nlohmann::json zw = {{"rooted", true},
                       {"vertices",
                        {{{"id", 0}, {"parent", nullptr}},
                         {{"id", 1}, {"parent", 0}, {"weight", 0}}}},
                       {"extension", {{"weight", 1}}}};
  EXPECT_THROW(DirectedTreeSystem::from_json(zw), ParseError);
  // missing extension
  nlohmann::json noext = {{"rooted", true}, {"vertices", {{{"id", 0}, {"parent", nullptr}}}}};
  EXPECT_THROW(DirectedTreeSystem::from_json(noext), ParseError);
}

TEST(WeightParsing, DecimalRationalComplex) {
  EXPECT_EQ(weight_from_json(nlohmann::json("3/5")), Complex(0.6, 0.0));
  EXPECT_EQ(weight_from_json(nlohmann::json("0.25")), Complex(0.25, 0.0));
  EXPECT_EQ(weight_from_json(nlohmann::json::parse("[1.5, -2]")), Complex(1.5, -2.0));
  EXPECT_THROW(weight_from_json(nlohmann::json("1/0")), ParseError);
}

TEST(ShiftApply, UnitPathShiftsBasis) {
  auto t = DirectedTreeSystem::path({});
  FinVec g = shift_apply(t, FinVec::unit(key(0, 2)));
  EXPECT_EQ(g.support_size(), 1u);
  EXPECT_EQ(g.at(key(0, 3)), 1.0 + 0.0i);
  EXPECT_TRUE(shift_apply(t, FinVec()).empty());
}

TEST(ShiftApply, YTreeFansOutAtRoot) {
  auto t = y_tree();
  FinVec g = shift_apply(t, FinVec::unit(t.root_key()));
  EXPECT_NEAR(std::abs(g.at(key(1)) - 0.6), 0.0, 1e-15);
  EXPECT_NEAR(std::abs(g.at(key(2)) - 0.8), 0.0, 1e-15);
  EXPECT_EQ(g.support_size(), 2u);
}

TEST(ShiftAdjoint, PathAndKernel) {
  auto t = DirectedTreeSystem::path({});
  FinVec g = shift_adjoint_apply(t, FinVec::unit(key(0, 3)));
  EXPECT_EQ(g.at(key(0, 2)), 1.0 + 0.0i);
  EXPECT_TRUE(shift_adjoint_apply(t, FinVec::unit(key(0, 0))).empty());
}

TEST(ShiftAdjoint, YTreeValues) {
  auto t = y_tree();
  FinVec g = shift_adjoint_apply(t, FinVec::unit(key(1)));
  EXPECT_NEAR(std::abs(g.at(t.root_key()) - 0.6), 0.0, 1e-15);

  // null combination from the kernel decomposition
  FinVec n;
  n.set(key(1), 0.8);
  n.set(key(2), -0.6);
  EXPECT_NEAR(shift_adjoint_apply(t, n).norm(), 0.0, 1e-15);
}

TEST(GramDiagonal, Examples) {
  EXPECT_NEAR(gram_diagonal(DirectedTreeSystem::path({}), key(0, 4)), 1.0, 0.0);
  EXPECT_NEAR(gram_diagonal(y_tree(), key(0)), 1.0, 1e-15);
  auto t2 = DirectedTreeSystem::path({2.0, 2.0}, 2.0);
  EXPECT_NEAR(gram_diagonal(t2, key(0)), 4.0, 0.0);
}

TEST(LeftInvertible, UnitPathOk) {
  auto r = check_left_invertible(DirectedTreeSystem::path({}), 6);
  EXPECT_TRUE(r.ok);
  EXPECT_DOUBLE_EQ(r.inf_d, 1.0);
  EXPECT_DOUBLE_EQ(r.sup_d, 1.0);
}

TEST(LeftInvertible, DecayingWeightsFail) {
  std::vector<Complex> w;
  for (int k = 1; k <= 20; ++k) w.push_back(std::pow(2.0, -k));
  auto t = DirectedTreeSystem::path(w, std::pow(2.0, -20));
  auto r = check_left_invertible(t, 22);
  EXPECT_FALSE(r.ok);
  EXPECT_LT(r.inf_d, 1e-12);
}

TEST(LeftInvertible, YTreeOk) {
  auto r = check_left_invertible(y_tree(), 5);
  EXPECT_TRUE(r.ok);
  EXPECT_NEAR(r.inf_d, 1.0, 1e-15);
}

TEST(KernelBasis, PathIsRootAtom) {
  auto e = kernel_adjoint_basis(DirectedTreeSystem::path({}));
  ASSERT_EQ(e.dim(), 1);
  EXPECT_EQ(e.atom(0).at(key(0)), 1.0 + 0.0i);
}

TEST(KernelBasis, BilateralIsOmegaOnly) {
  auto t = DirectedTreeSystem::bilateral_path();
  auto e = kernel_adjoint_basis(t);
  ASSERT_EQ(e.dim(), 1);
  EXPECT_EQ(e.atom(0).at(key(0)), 1.0 + 0.0i);
  EXPECT_EQ(kernel_adjoint_basis(t, /*include_omega=*/false).dim(), 0);
}

TEST(KernelBasis, YTreeAtoms) {
  auto e = kernel_adjoint_basis(y_tree());
  ASSERT_EQ(e.dim(), 2);
  EXPECT_NEAR(std::abs(e.atom(0).at(key(0)) - 1.0), 0.0, 1e-14);
  EXPECT_NEAR(std::abs(e.atom(1).at(key(1)) - 0.8), 0.0, 1e-14);
  EXPECT_NEAR(std::abs(e.atom(1).at(key(2)) + 0.6), 0.0, 1e-14);
}

TEST(KernelBasis, MatchesSvdNullSpaceOnRandomTrees) {
  Rng rng(2024);
  for (int trial = 0; trial < 12; ++trial) {
    auto t = random_tree(rng);
    auto shift = TreeShiftOperator(std::make_shared<DirectedTreeSystem>(t));
    auto window = t.window_keys(10);
    auto dense = densify(shift, window);
    Eigen::MatrixXcd dense_null = null_space(dense.matrix.adjoint());

    auto e = kernel_adjoint_basis(t);
    std::vector<FinVec> atoms = e.atoms();
    // embed atoms over the same window ordering
    Eigen::MatrixXcd q(static_cast<int>(window.size()), e.dim());
    q.setZero();
    for (int j = 0; j < e.dim(); ++j)
      for (const auto& [k, z] : atoms[static_cast<std::size_t>(j)].entries())
        q(dense.index_of(k), j) = z;

    ASSERT_EQ(dense_null.cols(), q.cols());
    EXPECT_LE(principal_angle_sin(dense_null, q), 1e-10);
  }
}

TEST(ProjectE, YTreeValuesAndIdempotence) {
  auto e = kernel_adjoint_basis(y_tree());
  FinVec f = FinVec::unit(key(1));
  FinVec p = project_E(e, f);
  // <e_a, atom> atom = 0.8 * (0.8 e_a - 0.6 e_b)
  EXPECT_NEAR(std::abs(p.at(key(1)) - 0.64), 0.0, 1e-14);
  EXPECT_NEAR(std::abs(p.at(key(2)) + 0.48), 0.0, 1e-14);
  EXPECT_NEAR((project_E(e, p) - p).norm(), 0.0, 1e-14);

  FinVec perp = FinVec::unit(key(1, 1));  // below the branch level
  EXPECT_NEAR(project_E(e, perp).norm(), 0.0, 0.0);
}

TEST(CauchyDual, IsometryIsFixed) {
  auto t = DirectedTreeSystem::path({});
  auto d = cauchy_dual_shift(t);
  EXPECT_EQ(d.weight(key(0, 3)), 1.0 + 0.0i);
}

TEST(CauchyDual, WeightedPathReciprocal) {
  auto t = DirectedTreeSystem::path({2.0, 1.0 + 1.0i, 0.5}, 1.0);
  auto d = cauchy_dual_shift(t);
  // lambda'_k = lambda_k / |lambda_k|^2
  EXPECT_NEAR(std::abs(d.weight(key(1)) - 0.5), 0.0, 1e-15);
  EXPECT_NEAR(std::abs(d.weight(key(2)) - (0.5 + 0.5i)), 0.0, 1e-15);
  EXPECT_NEAR(std::abs(d.weight(key(3)) - 2.0), 0.0, 1e-15);
}

TEST(CauchyDual, YTreeFirstLevel) {
  auto d = cauchy_dual_shift(y_tree());
  EXPECT_NEAR(std::abs(d.weight(key(1)) - 0.6), 0.0, 1e-15);
  EXPECT_NEAR(std::abs(d.weight(key(2)) - 0.8), 0.0, 1e-15);
}

TEST(CauchyDual, AgreesWithDenseOracle) {
  Rng rng(11);
  for (int trial = 0; trial < 10; ++trial) {
    auto t = random_tree(rng);
    auto tp = std::make_shared<DirectedTreeSystem>(t);
    auto dual = cauchy_dual_shift(t);
    auto dp = std::make_shared<DirectedTreeSystem>(dual);

    auto cols = t.window_keys(8);
    auto rows = t.window_keys(9);
    Eigen::MatrixXcd m = densify_rect(TreeShiftOperator(tp), rows, cols);
    Eigen::MatrixXcd oracle_dual = dense_cauchy_dual(m);
    Eigen::MatrixXcd formula_dual = densify_rect(TreeShiftOperator(dp), rows, cols);
    EXPECT_LE((oracle_dual - formula_dual).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(CauchyDual, BidualReturnsOriginalWeights) {
  Rng rng(12);
  for (int trial = 0; trial < 10; ++trial) {
    auto t = random_tree(rng);
    auto dd = cauchy_dual_shift(cauchy_dual_shift(t));
    for (const auto& k : t.window_keys(8)) {
      if (k == t.root_key()) continue;
      EXPECT_NEAR(std::abs(dd.weight(k) - t.weight(k)), 0.0, 1e-12);
    }
  }
}

TEST(CauchyDual, RequiresLeftInvertibility) {
  std::vector<Complex> w;
  for (int k = 1; k <= 20; ++k) w.push_back(std::pow(2.0, -k));
  auto t = DirectedTreeSystem::path(w, std::pow(2.0, -20));
  EXPECT_THROW(cauchy_dual_shift(t), NotLeftInvertibleError);
}

TEST(PathWeight, Examples) {
  auto unit = DirectedTreeSystem::path({});
  EXPECT_EQ(path_weight(unit, key(0, 2), key(0, 2)), 1.0 + 0.0i);
  EXPECT_EQ(path_weight(unit, key(0, 0), key(0, 3)), 1.0 + 0.0i);

  auto t = DirectedTreeSystem::path({2.0, 3.0, 5.0});
  EXPECT_NEAR(std::abs(path_weight(t, key(0), key(3)) - 30.0), 0.0, 1e-12);
  // telescoping product equals <S^3 e_0, e_3>
  auto tp = std::make_shared<DirectedTreeSystem>(t);
  FinVec s3 = apply_power(TreeShiftOperator(tp), FinVec::unit(key(0)), 3);
  EXPECT_NEAR(std::abs(s3.at(key(3)) - path_weight(t, key(0), key(3))), 0.0, 1e-12);

  EXPECT_THROW(path_weight(t, key(3), key(1)), Error);
}

TEST(TreeInvariants, AdjointDualityOnRandomVectors) {
  Rng rng(99);
  for (int trial = 0; trial < 8; ++trial) {
    auto t = random_tree(rng);
    auto op = TreeShiftOperator(std::make_shared<DirectedTreeSystem>(t));
    auto window = t.window_keys(6);
    FinVec x, y;
    for (int i = 0; i < 10; ++i) {
      x.set(window[rng.below(window.size())], rng.complex_in_square(2.0));
      y.set(window[rng.below(window.size())], rng.complex_in_square(2.0));
    }
    Complex lhs = inner(op.apply(x), y);
    Complex rhs = inner(x, op.adjoint_apply(y));
    EXPECT_LE(std::abs(lhs - rhs), 1e-10 * std::max(1.0, x.norm() * y.norm()));
  }
}

TEST(TreeInvariants, GramIsDiagonalOfAdjointTimesShift) {
  Rng rng(5);
  auto t = random_tree(rng);
  for (const auto& v : t.window_keys(6)) {
    FinVec e = FinVec::unit(v);
    FinVec g = shift_adjoint_apply(t, shift_apply(t, e));
    FinVec expected = e * Complex{t.gram(v), 0.0};
    EXPECT_LE((g - expected).norm(), 1e-12);
  }
}

}  // namespace
}  // namespace opmodel
