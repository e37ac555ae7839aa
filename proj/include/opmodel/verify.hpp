#pragma once

// Suite runners behind the `verify` command and the acceptance harness:
// seeded random corpora of self-map systems and trees, each formula checked
// against the dense oracle or an independently computed route, results
// folded into deterministic JSON reports.

#include <cstdint>
#include <fstream>
#include <future>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "opmodel/multiplier.hpp"
#include "opmodel/oracle.hpp"
#include "opmodel/selfmap.hpp"

namespace opmodel::verify {

struct SuiteResult {
  std::string suite;
  long cases = 0;
  double max_violation = 0.0;
  bool pass = true;
  std::string error;  // designated error kind when the suite aborts
  std::vector<nlohmann::ordered_json> witnesses;

  void record(double violation, double tol, nlohmann::ordered_json witness) {
    if (violation > max_violation) max_violation = violation;
    if (violation > tol) {
      pass = false;
      if (witnesses.size() < 16) witnesses.push_back(std::move(witness));
    }
  }

  void fail(const std::string& kind, const std::string& detail) {
    pass = false;
    error = kind;
    if (witnesses.size() < 16) witnesses.push_back({{"error", kind}, {"detail", detail}});
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["suite"] = suite;
    j["cases"] = cases;
    j["max_violation"] = max_violation;
    j["pass"] = pass;
    if (!error.empty()) j["error"] = error;
    j["witnesses"] = witnesses;
    return j;
  }
};

// ---------------------------------------------------------------------------
// deterministic corpora

inline SelfMapSystem random_selfmap(Rng& rng, bool bijective) {
  int n = 3 + static_cast<int>(rng.below(38));  // |X| <= 40
  std::vector<std::int64_t> target(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) target[static_cast<std::size_t>(i)] = i;
  if (bijective) {
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
    if (bijective && std::abs(w) < 0.25) w += Complex{0.5, 0.25};
    doc["points"].push_back({{"id", i},
                             {"phi", target[static_cast<std::size_t>(i)]},
                             {"weight", {w.real(), w.imag()}}});
  }
  return SelfMapSystem::from_json(doc);
}

inline DirectedTreeSystem random_tree(Rng& rng, bool rooted, long max_depth, int max_branchings,
                                      bool positive_weights) {
  nlohmann::json doc;
  doc["rooted"] = rooted;
  doc["vertices"] = nlohmann::json::array();
  auto draw_weight = [&]() -> nlohmann::json {
    if (positive_weights) return rng.uniform(0.5, 2.0);
    Complex w;
    do {
      w = rng.complex_in_square(2.0);
    } while (std::abs(w) < 0.4);
    return {w.real(), w.imag()};
  };
  nlohmann::json root = {{"id", 0}, {"parent", nullptr}};
  if (!rooted) root["weight"] = draw_weight();
  doc["vertices"].push_back(root);
  std::vector<std::pair<std::int64_t, long>> open{{0, 0}};
  std::int64_t next_id = 1;
  int branchings = 0;
  std::size_t grow = 3 + rng.below(10);
  for (std::size_t step = 0; step < grow && !open.empty(); ++step) {
    std::size_t pick = rng.below(open.size());
    auto [id, depth] = open[pick];
    open.erase(open.begin() + static_cast<std::ptrdiff_t>(pick));
    if (depth >= max_depth) continue;
    int kids = 1;
    if (branchings < max_branchings && rng.below(3) == 0) {
      kids = 2 + static_cast<int>(rng.below(2));
      ++branchings;
    }
    for (int c = 0; c < kids; ++c) {
      doc["vertices"].push_back({{"id", next_id}, {"parent", id}, {"weight", draw_weight()}});
      open.emplace_back(next_id, depth + 1);
      ++next_id;
    }
  }
  doc["extension"] = {{"weight", positive_weights ? nlohmann::json(1.0) : draw_weight()}};
  if (!rooted) doc["omega"] = 0;
  return DirectedTreeSystem::from_json(doc);
}

// ---------------------------------------------------------------------------
// system specs and run options

inline FinVec finvec_from_json(const nlohmann::json& arr) {
  FinVec v;
  for (const auto& e : arr) {
    if (!e.contains("key")) throw ParseError("vector entry without 'key'");
    IndexKey k = e["key"].is_string() ? IndexKey::parse(e["key"].get<std::string>())
                                      : IndexKey{e["key"].get<std::int64_t>(), 0};
    double re = e.value("re", 0.0);
    double im = e.value("im", 0.0);
    v.add(k, Complex{re, im});
  }
  return v;
}

struct CommutantOpSpec {
  std::vector<Complex> poly;  // empty when rank_one is set
  std::optional<std::pair<FinVec, FinVec>> rank_one;
  std::string label;
};

struct SystemSpec {
  std::string name;
  std::shared_ptr<const DirectedTreeSystem> tree;
  std::shared_ptr<const SelfMapSystem> selfmap;
  std::string e_mode = "auto";  // kernel | kernel+omega | explicit | auto
  std::vector<FinVec> explicit_atoms;
  std::vector<CommutantOpSpec> commutant_ops;

  static SystemSpec from_json(const nlohmann::json& doc, std::string name) {
    SystemSpec s;
    s.name = std::move(name);
    if (doc.contains("vertices"))
      s.tree = std::make_shared<DirectedTreeSystem>(DirectedTreeSystem::from_json(doc));
    else if (doc.contains("points"))
      s.selfmap = std::make_shared<SelfMapSystem>(SelfMapSystem::from_json(doc));
    else
      throw ParseError("system spec: expected a tree ('vertices') or a self-map ('points')");
    if (doc.contains("e")) {
      const auto& e = doc["e"];
      if (e.contains("mode")) s.e_mode = e["mode"].get<std::string>();
      if (e.contains("atoms"))
        for (const auto& atom : e["atoms"]) s.explicit_atoms.push_back(finvec_from_json(atom));
      if (s.e_mode == "explicit" && s.explicit_atoms.empty())
        throw ParseError("system spec: explicit e-mode needs atoms");
    }
    if (doc.contains("commutant") && doc["commutant"].contains("operators")) {
      int idx = 0;
      for (const auto& op : doc["commutant"]["operators"]) {
        CommutantOpSpec cs;
        cs.label = "config_op_" + std::to_string(idx++);
        if (op.contains("poly")) {
          for (const auto& c : op["poly"]) cs.poly.push_back(weight_from_json(c));
        } else if (op.contains("rank_one")) {
          cs.rank_one = std::make_pair(finvec_from_json(op["rank_one"]["left"]),
                                       finvec_from_json(op["rank_one"]["right"]));
        } else {
          throw ParseError("commutant operator spec needs 'poly' or 'rank_one'");
        }
        s.commutant_ops.push_back(std::move(cs));
      }
    }
    return s;
  }

  static SystemSpec load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open spec file '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(buf.str());
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError("spec file '" + path + "': invalid JSON: " + e.what());
    }
    return from_json(doc, path);
  }
};

struct VerifyOptions {
  std::uint64_t seed = 42;
  double tol = 1e-10;
  long window_neg = 10;
  long window_pos = 10;
  long depth = 10;
  std::vector<std::string> suites;  // empty selects the default set
  bool empty_selection = false;     // an explicitly empty selection runs nothing
  std::optional<SystemSpec> system;
};

// ---------------------------------------------------------------------------
// context assembly

struct NamedContext {
  std::string name;
  ModelContext ctx;
  std::vector<IndexKey> window;
  std::shared_ptr<const DirectedTreeSystem> tree;  // set for tree-backed systems
};

/// Level grading for a self-map system: minus the generation value, valid
/// when the only cycles are zero-weight self-loops (the operator then
/// respects the grading).
inline std::function<long(IndexKey)> selfmap_levels(std::shared_ptr<const SelfMapSystem> s,
                                                    long depth) {
  try {
    auto table = generation(*s, depth + 4);
    for (const auto& c : table.cycle) {
      bool harmless_loop = s->phi(c) == c && std::abs(s->weight(c)) <= kZeroTol;
      if (!harmless_loop) return {};
    }
    auto shared = std::make_shared<GenerationTable>(std::move(table));
    return [shared, s](IndexKey k) {
      auto it = shared->value.find(k);
      if (it != shared->value.end()) return -it->second;
      // chains extend the grading linearly
      IndexKey anchor{k.base, 0};
      return -shared->value.at(anchor) + k.tail;
    };
  } catch (const Error&) {
    return {};
  }
}

inline NamedContext context_for(const SystemSpec& spec, double tol, long wneg, long wpos,
                                long depth) {
  if (spec.tree) {
    EBasis e;
    if (spec.e_mode == "explicit")
      e = EBasis(spec.explicit_atoms);
    else if (spec.e_mode == "kernel")
      e = kernel_adjoint_basis(*spec.tree, /*include_omega=*/false);
    else
      e = kernel_adjoint_basis(*spec.tree);
    return NamedContext{spec.name,
                        ModelContext::from_tree_with_basis(spec.tree, std::move(e), tol, wneg,
                                                           wpos),
                        spec.tree->window_keys(depth), spec.tree};
  }
  auto s = spec.selfmap;
  EBasis e;
  if (spec.e_mode == "explicit")
    e = EBasis(spec.explicit_atoms);
  else if (spec.e_mode == "kernel+omega")
    e = kernel_adjoint_basis_comp(*s, /*include_basepoints=*/true);
  else if (spec.e_mode == "kernel")
    e = kernel_adjoint_basis_comp(*s, false);
  else  // auto: take basepoint atoms along, mirroring the rootless tree model
    e = kernel_adjoint_basis_comp(*s, !s->basepoints().empty());
  auto dual = std::make_shared<SelfMapSystem>(cauchy_dual_comp(*s));
  ModelContext ctx(std::make_shared<CompositionOperator>(s),
                   std::make_shared<CompositionOperator>(dual), std::move(e), tol, wneg, wpos,
                   selfmap_levels(s, depth));
  return NamedContext{spec.name, std::move(ctx), s->window_keys(depth), nullptr};
}

// built-in systems used by the suites when no spec system applies

inline SystemSpec builtin_unilateral() {
  SystemSpec s;
  s.name = "unilateral";
  s.tree = std::make_shared<DirectedTreeSystem>(DirectedTreeSystem::path({}));
  return s;
}

inline SystemSpec builtin_bilateral() {
  SystemSpec s;
  s.name = "bilateral";
  s.tree = std::make_shared<DirectedTreeSystem>(DirectedTreeSystem::bilateral_path());
  return s;
}

inline SystemSpec builtin_ytree() {
  nlohmann::json doc = {{"rooted", true},
                        {"vertices",
                         {{{"id", 0}, {"parent", nullptr}},
                          {{"id", 1}, {"parent", 0}, {"weight", "3/5"}},
                          {{"id", 2}, {"parent", 0}, {"weight", "4/5"}}}},
                        {"extension", {{"weight", 1}}}};
  SystemSpec s;
  s.name = "ytree";
  s.tree = std::make_shared<DirectedTreeSystem>(DirectedTreeSystem::from_json(doc));
  return s;
}

inline SystemSpec builtin_rootless_branching() {
  nlohmann::json doc = {{"rooted", false},
                        {"vertices",
                         {{{"id", 0}, {"parent", nullptr}, {"weight", 1}},
                          {{"id", 1}, {"parent", 0}, {"weight", "3/5"}},
                          {{"id", 2}, {"parent", 0}, {"weight", "4/5"}}}},
                        {"extension", {{"weight", 1}}},
                        {"omega", 0}};
  SystemSpec s;
  s.name = "rootless_branching";
  s.tree = std::make_shared<DirectedTreeSystem>(DirectedTreeSystem::from_json(doc));
  return s;
}

inline SystemSpec builtin_dim3_tree() {
  nlohmann::json doc = {{"rooted", true},
                        {"vertices",
                         {{{"id", 0}, {"parent", nullptr}},
                          {{"id", 1}, {"parent", 0}, {"weight", "3/5"}},
                          {{"id", 2}, {"parent", 0}, {"weight", "4/5"}},
                          {{"id", 3}, {"parent", 1}, {"weight", 1}},
                          {{"id", 4}, {"parent", 1}, {"weight", 0.5}}}},
                        {"extension", {{"weight", 1}}}};
  SystemSpec s;
  s.name = "dim3_tree";
  s.tree = std::make_shared<DirectedTreeSystem>(DirectedTreeSystem::from_json(doc));
  return s;
}

// ---------------------------------------------------------------------------
// suites

/// Adjoint, power, and Gram formulas against the dense matrix oracle on a
/// random corpus of finite self-map systems.
inline SuiteResult suite_podst(const VerifyOptions& opt, int corpus_size = 200) {
  SuiteResult r;
  r.suite = "podst";
  Rng rng(opt.seed + 0x10);
  for (int trial = 0; trial < corpus_size; ++trial) {
    SelfMapSystem s = random_selfmap(rng, trial % 3 == 0);
    std::vector<IndexKey> keys;
    for (auto id : s.core_ids()) keys.push_back({id, 0});
    auto sp = std::make_shared<SelfMapSystem>(s);
    Eigen::MatrixXcd m = densify(CompositionOperator(sp), keys).matrix;
    unsigned n = 1 + static_cast<unsigned>(rng.below(4));
    Eigen::MatrixXcd mn = Eigen::MatrixXcd::Identity(m.rows(), m.cols());
    Eigen::MatrixXcd man = mn;
    for (unsigned i = 0; i < n; ++i) {
      mn = m * mn;
      man = m.adjoint() * man;
    }
    double worst = 0.0;
    for (int j = 0; j < static_cast<int>(keys.size()); ++j) {
      IndexKey x = keys[static_cast<std::size_t>(j)];
      FinVec adj1 = comp_adjoint_power(s, x, 1);   // (i)
      FinVec adjn = comp_adjoint_power(s, x, n);   // (ii)
      FinVec pown = comp_power(s, x, n);           // (iii)
      for (int i = 0; i < static_cast<int>(keys.size()); ++i) {
        IndexKey y = keys[static_cast<std::size_t>(i)];
        worst = std::max(worst, std::abs(adj1.at(y) - std::conj(m(j, i))));
        worst = std::max(worst, std::abs(adjn.at(y) - man(i, j)));
        worst = std::max(worst, std::abs(pown.at(y) - mn(i, j)));
      }
      FinVec gram_vec = comp_adjoint_apply(s, comp_apply(s, FinVec::unit(x)));  // (iv)
      worst = std::max(worst, (gram_vec - FinVec::unit(x) * Complex{s.gram(x), 0.0}).norm());
    }
    ++r.cases;
    r.record(worst, opt.tol, {{"trial", trial}, {"violation", worst}});
  }
  return r;
}

/// Formula-based Cauchy duals against dense T (T*T)^{-1}, plus the bidual
/// involution, over the self-map corpus and random trees.
inline SuiteResult suite_cdcom(const VerifyOptions& opt, int corpus_size = 200,
                               int tree_count = 50) {
  SuiteResult r;
  r.suite = "cdcom";
  const double bidual_tol = 1e-12;
  int rejected = 0;

  Rng rng(opt.seed + 0x10);  // the podst corpus, by construction
  for (int trial = 0; trial < corpus_size; ++trial) {
    SelfMapSystem s = random_selfmap(rng, trial % 3 == 0);
    rng.below(4);  // keep the stream aligned with suite_podst
    auto li = check_left_invertible_comp(s, 4, 1e-2);
    if (!li.ok) {
      bool threw = false;
      try {
        cauchy_dual_comp(s, 1e-2);
      } catch (const NotLeftInvertibleError&) {
        threw = true;
      }
      if (!threw) r.fail("missing_rejection", "non-left-invertible system accepted");
      ++rejected;
      ++r.cases;
      continue;
    }
    std::vector<IndexKey> keys;
    for (auto id : s.core_ids()) keys.push_back({id, 0});
    auto sp = std::make_shared<SelfMapSystem>(s);
    auto dual = cauchy_dual_comp(s, 1e-2);
    auto dp = std::make_shared<SelfMapSystem>(dual);
    Eigen::MatrixXcd m = densify_rect(CompositionOperator(sp), keys, keys);
    Eigen::MatrixXcd formula = densify_rect(CompositionOperator(dp), keys, keys);
    Eigen::MatrixXcd oracle = dense_cauchy_dual(m);
    double scale = std::max(1.0, oracle.cwiseAbs().maxCoeff());
    double dev = (oracle - formula).cwiseAbs().maxCoeff() / scale;

    auto bidual = cauchy_dual_comp(dual, 1e-6);
    double bdev = 0.0;
    for (const auto& k : keys) bdev = std::max(bdev, std::abs(bidual.weight(k) - s.weight(k)));

    ++r.cases;
    r.record(dev, opt.tol, {{"kind", "selfmap"}, {"trial", trial}, {"violation", dev}});
    r.record(bdev, bidual_tol, {{"kind", "selfmap_bidual"}, {"trial", trial}, {"violation", bdev}});
  }

  Rng tree_rng(opt.seed + 0x20);
  for (int trial = 0; trial < tree_count; ++trial) {
    auto t = random_tree(tree_rng, true, 10, 3, false);
    auto tp = std::make_shared<DirectedTreeSystem>(t);
    auto dual = cauchy_dual_shift(t);
    auto dp = std::make_shared<DirectedTreeSystem>(dual);
    auto cols = t.window_keys(8);
    auto rows = t.window_keys(9);
    Eigen::MatrixXcd m = densify_rect(TreeShiftOperator(tp), rows, cols);
    Eigen::MatrixXcd formula = densify_rect(TreeShiftOperator(dp), rows, cols);
    Eigen::MatrixXcd oracle = dense_cauchy_dual(m);
    double scale = std::max(1.0, oracle.cwiseAbs().maxCoeff());
    double dev = (oracle - formula).cwiseAbs().maxCoeff() / scale;

    auto bidual = cauchy_dual_shift(dual);
    double bdev = 0.0;
    for (const auto& k : cols)
      if (k != t.root_key()) bdev = std::max(bdev, std::abs(bidual.weight(k) - t.weight(k)));

    ++r.cases;
    r.record(dev, opt.tol, {{"kind", "tree"}, {"trial", trial}, {"violation", dev}});
    r.record(bdev, bidual_tol, {{"kind", "tree_bidual"}, {"trial", trial}, {"violation", bdev}});
  }

  // a spec system is asserted usable: its dual must exist
  if (opt.system && opt.system->tree) {
    try {
      cauchy_dual_shift(*opt.system->tree);
    } catch (const NotLeftInvertibleError& e) {
      r.fail("not_left_invertible", e.what());
    }
  }
  if (opt.system && opt.system->selfmap) {
    try {
      cauchy_dual_comp(*opt.system->selfmap);
    } catch (const NotLeftInvertibleError& e) {
      r.fail("not_left_invertible", e.what());
    }
  }
  r.witnesses.push_back({{"note", "rejected_non_left_invertible"}, {"count", rejected}});
  return r;
}

/// Kernel decomposition of the adjoint shift against the SVD null space.
inline SuiteResult suite_ker(const VerifyOptions& opt, int tree_count = 50) {
  SuiteResult r;
  r.suite = "ker";
  const double angle_tol = 1e-8;
  Rng rng(opt.seed + 0x30);
  for (int trial = 0; trial < tree_count; ++trial) {
    auto t = random_tree(rng, true, 10, 3, false);
    auto shift = TreeShiftOperator(std::make_shared<DirectedTreeSystem>(t));
    auto window = t.window_keys(11);
    auto dense = densify(shift, window);
    Eigen::MatrixXcd dense_null = null_space(dense.matrix.adjoint());

    auto e = kernel_adjoint_basis(t);
    Eigen::MatrixXcd q(static_cast<int>(window.size()), e.dim());
    q.setZero();
    for (int j = 0; j < e.dim(); ++j)
      for (const auto& [k, z] : e.atom(j).entries()) q(dense.index_of(k), j) = z;

    double dev = dense_null.cols() == q.cols() ? principal_angle_sin(dense_null, q) : 1.0;
    ++r.cases;
    r.record(dev, angle_tol,
             {{"trial", trial}, {"dim", e.dim()}, {"principal_sin", dev}});
  }
  return r;
}

/// Coefficient-level intertwining and the exact left-inverse round trip on
/// the model, over built-ins, random (prep)-passing trees, and the spec
/// system when present.
inline SuiteResult suite_model(const VerifyOptions& opt, int random_trees = 20) {
  SuiteResult r;
  r.suite = "model";
  const double roundtrip_tol = 1e-13;
  std::vector<SystemSpec> specs;
  if (opt.system) specs.push_back(*opt.system);
  specs.push_back(builtin_unilateral());
  specs.push_back(builtin_bilateral());
  Rng tree_rng(opt.seed + 0x40);
  for (int i = 0; i < random_trees; ++i) {
    SystemSpec s;
    s.name = "random_tree_" + std::to_string(i);
    s.tree = std::make_shared<DirectedTreeSystem>(
        random_tree(tree_rng, i % 2 == 0, 8, 3, false));
    specs.push_back(std::move(s));
  }

  Rng rng(opt.seed + 0x41);
  bool first_system = true;
  for (const auto& spec : specs) {
    NamedContext named = [&]() -> NamedContext {
      try {
        return context_for(spec, opt.tol, 11, 11, opt.depth);
      } catch (const NotLeftInvertibleError& e) {
        r.fail("not_left_invertible", spec.name + ": " + e.what());
        return NamedContext{spec.name, ModelContext(nullptr, nullptr, EBasis(), opt.tol, 0, 0),
                            {}, nullptr};
      }
    }();
    if (!r.error.empty()) return r;
    const ModelContext& ctx = named.ctx;

    auto prep = check_prep(ctx, 6);
    if (opt.system && first_system) {
      // surface the full subspace-condition reports for the asked-for system
      nlohmann::ordered_json checks = nlohmann::ordered_json::array();
      checks.push_back(prep.to_json());
      checks.push_back(check_incl(ctx, 6).to_json());
      checks.push_back(check_span(ctx, named.window,
                                  std::min<int>(64, static_cast<int>(named.window.size())))
                           .to_json());
      r.witnesses.push_back({{"system_checks", std::move(checks)}});
      first_system = false;
    }
    if (!prep.pass) {
      r.fail("prep_violation", spec.name + ": max " + std::to_string(prep.max_violation));
      return r;
    }

    for (int v = 0; v < 3; ++v) {
      FinVec x;
      for (int i = 0; i < 5; ++i)
        x.set(named.window[rng.below(named.window.size())], rng.complex_in_square(2.0));
      if (x.empty()) continue;

      LaurentWindow wx = analytic_model(ctx, x);
      LaurentWindow wtx = analytic_model(ctx, ctx.op().apply(x));
      double scale = std::max(1.0, wx.max_coeff_norm());
      double worst = 0.0;
      for (long n = -10; n <= 10; ++n)
        worst = std::max(worst, (wtx.coeff(n) - wx.coeff(n - 1)).norm() / scale);
      ++r.cases;
      r.record(worst, opt.tol, {{"system", spec.name}, {"check", "intertwining"},
                                {"violation", worst}});

      LaurentWindow round = ell_apply(ctx, mz_apply(ctx, wx));
      double rt = 0.0;
      for (long n = -11; n <= 11; ++n)
        rt = std::max(rt, (round.coeff(n) - wx.coeff(n)).norm() / scale);
      ++r.cases;
      r.record(rt, roundtrip_tol, {{"system", spec.name}, {"check", "ell_mz_roundtrip"},
                                   {"violation", rt}});
    }
  }
  return r;
}

/// Indicator multipliers versus powers of M_z, the backward-step domain
/// split, commutation with M_z, and the convolution homomorphism.
inline SuiteResult suite_wla(const VerifyOptions& opt, int pair_count = 100) {
  SuiteResult r;
  r.suite = "wla";
  std::vector<NamedContext> ctxs;
  auto push_ctx = [&](const SystemSpec& s, long wneg, long wpos) {
    ctxs.push_back(context_for(s, opt.tol, wneg, wpos, opt.depth));
  };
  try {
    if (opt.system) push_ctx(*opt.system, 14, 14);
    push_ctx(builtin_bilateral(), 14, 14);
    push_ctx(builtin_ytree(), 14, 14);
    push_ctx(builtin_dim3_tree(), 14, 14);
  } catch (const NotLeftInvertibleError& e) {
    r.fail("not_left_invertible", e.what());
    return r;
  } catch (const Error& e) {
    r.fail("context_error", e.what());
    return r;
  }

  // (i) positive indicators act as powers of M_z; backward steps split
  {
    const NamedContext& bi = *std::find_if(ctxs.begin(), ctxs.end(), [](const NamedContext& c) {
      return c.name == "bilateral";
    });
    FinVec x = FinVec::unit(key(0, -1)) + FinVec::unit(key(0, 2)) * Complex{0.5, 1.0};
    for (int n = 0; n <= 5; ++n) {
      LaurentWindow f = analytic_model(bi.ctx, x);
      LaurentWindow via_mult = mult_apply(bi.ctx, MultiplierSeq::indicator(n, 1), f);
      LaurentWindow via_mz = f;
      for (int i = 0; i < n; ++i) via_mz = mz_apply(bi.ctx, via_mz);
      double worst = 0.0;
      for (long m = -f.neg; m <= f.pos; ++m)
        worst = std::max(worst, (via_mult.coeff(m) - via_mz.coeff(m)).norm());
      ++r.cases;
      r.record(worst, opt.tol, {{"check", "indicator_vs_mz"}, {"n", n}, {"violation", worst}});
    }

    auto uni = context_for(builtin_unilateral(), opt.tol, 14, 14, opt.depth);
    FinVec y = FinVec::unit(key(0, 1)) + FinVec::unit(key(0, 4)) * Complex{0.0, 1.0};
    LaurentWindow fy = analytic_model(uni.ctx, uni.ctx.op().apply(y));
    LaurentWindow back = mult_apply(uni.ctx, MultiplierSeq::indicator(-1, 1), fy);
    LaurentWindow expect = analytic_model(uni.ctx, y);
    double worst = 0.0;
    for (long m = -fy.neg; m <= fy.pos; ++m)
      worst = std::max(worst, (back.coeff(m) - expect.coeff(m)).norm());
    ++r.cases;
    r.record(worst, opt.tol, {{"check", "backward_on_range"}, {"violation", worst}});

    bool rejected = false;
    try {
      mult_apply(uni.ctx, MultiplierSeq::indicator(-1, 1),
                 analytic_model(uni.ctx, FinVec::unit(key(0))));
    } catch (const DomainError&) {
      rejected = true;
    }
    ++r.cases;
    if (!rejected) r.fail("missing_domain_signal", "backward step accepted a kernel vector");
  }

  // (ii) + (iii) on random multiplier pairs
  Rng rng(opt.seed + 0x50);
  for (int pair = 0; pair < pair_count; ++pair) {
    const NamedContext& named = ctxs[static_cast<std::size_t>(pair) % ctxs.size()];
    const ModelContext& ctx = named.ctx;
    const int dim = ctx.e().dim();
    if (dim == 0) continue;

    auto draw_seq = [&]() {
      MultiplierSeq s(dim);
      int entries = 1 + static_cast<int>(rng.below(5));  // support size <= 5
      for (int i = 0; i < entries; ++i) {
        long n = static_cast<long>(rng.below(6)) - 2;  // indices in [-2, 3]
        Eigen::MatrixXcd m(dim, dim);
        for (int a = 0; a < dim; ++a)
          for (int b = 0; b < dim; ++b) m(a, b) = rng.complex_in_square(1.0);
        s.set(n, m);
      }
      return s;
    };
    MultiplierSeq a = draw_seq();
    MultiplierSeq b = draw_seq();

    FinVec x;
    for (int j = 0; j < dim; ++j)
      x += apply_power(ctx.op(), ctx.e().atom(j), 8) * rng.complex_in_square(1.0);
    if (x.empty()) continue;
    LaurentWindow f = analytic_model(ctx, x);
    double scale = std::max(1.0, f.max_coeff_norm());

    try {
      // homomorphism
      LaurentWindow nested = mult_apply(ctx, a, mult_apply(ctx, b, f));
      auto direct = convolve_window(convolve(a, b), f);
      double worst = 0.0;
      for (long n = -nested.neg; n <= nested.pos; ++n) {
        if (!direct.is_clean(n)) continue;
        worst = std::max(worst, (nested.coeff(n) - direct.at_or_zero(n, dim)).norm() / scale);
      }
      ++r.cases;
      r.record(worst, opt.tol,
               {{"check", "homomorphism"}, {"system", named.name}, {"pair", pair},
                {"violation", worst}});

      // commutation with M_z
      LaurentWindow lhs = mult_apply(ctx, a, mz_apply(ctx, f));
      LaurentWindow rhs = mz_apply(ctx, mult_apply(ctx, a, f));
      double cworst = 0.0;
      for (long n = -f.neg + 1; n <= f.pos; ++n)
        cworst = std::max(cworst, (lhs.coeff(n) - rhs.coeff(n)).norm() / scale);
      ++r.cases;
      r.record(cworst, opt.tol,
               {{"check", "mz_commutation"}, {"system", named.name}, {"pair", pair},
                {"violation", cworst}});
    } catch (const DomainError& e) {
      ++r.cases;
      r.fail("unexpected_domain_error", named.name + ": " + e.what());
    }
  }
  return r;
}

/// The commutant representation: phi_A reproduces A through convolution for
/// polynomials in T; a non-commuting control must be stopped at the
/// precheck. Config-declared operators are asserted to commute.
inline SuiteResult suite_commutant(const VerifyOptions& opt) {
  SuiteResult r;
  r.suite = "commutant";
  std::vector<SystemSpec> specs;
  if (opt.system) specs.push_back(*opt.system);
  specs.push_back(builtin_bilateral());
  specs.push_back(builtin_unilateral());
  specs.push_back(builtin_rootless_branching());

  for (const auto& spec : specs) {
    NamedContext named = [&]() -> NamedContext {
      try {
        return context_for(spec, opt.tol, opt.window_neg, opt.window_pos, opt.depth);
      } catch (const NotLeftInvertibleError& e) {
        r.fail("not_left_invertible", spec.name + ": " + e.what());
        return NamedContext{spec.name, ModelContext(nullptr, nullptr, EBasis(), opt.tol, 0, 0),
                            {}, nullptr};
      }
    }();
    if (!r.error.empty()) return r;
    const ModelContext& ctx = named.ctx;
    std::shared_ptr<const LocalOperator> base =
        named.tree ? std::static_pointer_cast<const LocalOperator>(
                         std::make_shared<TreeShiftOperator>(named.tree))
                   : std::make_shared<CompositionOperator>(spec.selfmap);

    std::vector<std::pair<std::string, std::shared_ptr<const LocalOperator>>> ops;
    if (!spec.commutant_ops.empty()) {
      for (const auto& cs : spec.commutant_ops) {
        if (cs.rank_one)
          ops.emplace_back(cs.label, std::make_shared<RankOneOperator>(cs.rank_one->first,
                                                                       cs.rank_one->second));
        else
          ops.emplace_back(cs.label, std::make_shared<PolynomialInOperator>(base, cs.poly));
      }
    } else {
      ops.emplace_back("I", std::make_shared<PolynomialInOperator>(
                                base, std::vector<Complex>{1.0}));
      ops.emplace_back("T", std::make_shared<PolynomialInOperator>(
                                base, std::vector<Complex>{0.0, 1.0}));
      ops.emplace_back("T^2", std::make_shared<PolynomialInOperator>(
                                  base, std::vector<Complex>{0.0, 0.0, 1.0}));
      ops.emplace_back("T^3+2T", std::make_shared<PolynomialInOperator>(
                                     base, std::vector<Complex>{0.0, 2.0, 0.0, 1.0}));
    }

    for (const auto& [label, op] : ops) {
      auto res = check_commutant(ctx, *op, named.window, 5);
      ++r.cases;
      if (!res.pass) {
        r.fail(res.witnesses.empty() ? "commutant_violation"
                                     : ("precheck_" + res.witnesses.front()
                                            .value("precheck", std::string("violation"))),
               spec.name + "/" + label + ": max " + std::to_string(res.max_violation));
        continue;
      }
      r.record(res.max_violation, opt.tol,
               {{"system", spec.name}, {"op", label}, {"violation", res.max_violation}});
    }

    // negative control: a rank-one perturbation must be rejected up front
    if (spec.commutant_ops.empty() && !named.window.empty()) {
      auto perturbed = std::make_shared<SumOperator>(
          std::vector<std::shared_ptr<const LocalOperator>>{
              base, std::make_shared<RankOneOperator>(FinVec::unit(named.window.front()),
                                                      FinVec::unit(named.window.back()))});
      auto res = check_commutant(ctx, *perturbed, named.window, 5);
      ++r.cases;
      bool rejected = !res.pass && !res.witnesses.empty() &&
                      res.witnesses.front().value("precheck", std::string()) == "commutation";
      if (!rejected)
        r.fail("control_not_rejected", spec.name + ": non-commuting control slipped through");
    }
  }
  return r;
}

/// The graded tree multiplication operator: the path-weight formula equals
/// the power sum, and the two-sided expansion reproduces the model-side
/// multiplier action on range vectors.
inline SuiteResult suite_gamma(const VerifyOptions& opt, int tree_count = 50) {
  SuiteResult r;
  r.suite = "gamma";
  const double exact_tol = 1e-12;
  Rng rng(opt.seed + 0x60);
  std::vector<std::shared_ptr<const DirectedTreeSystem>> trees;
  if (opt.system && opt.system->tree && opt.system->tree->rooted())
    trees.push_back(opt.system->tree);
  for (int i = 0; i < tree_count; ++i)
    trees.push_back(std::make_shared<DirectedTreeSystem>(random_tree(rng, true, 8, 3, true)));

  for (std::size_t ti = 0; ti < trees.size(); ++ti) {
    const auto& t = trees[ti];
    TreeShiftOperator shift(t);
    std::map<long, Complex> entries;
    for (long k = 0; k <= 4; ++k)
      if (rng.below(3)) entries[k] = rng.complex_in_square(2.0);
    if (entries.empty()) entries[0] = 1.0;
    auto a = MultiplierSeq::scalar(entries);

    auto keys = t->window_keys(4);
    FinVec f;
    for (int i = 0; i < 5; ++i) f.set(keys[rng.below(keys.size())], rng.complex_in_square(2.0));
    if (f.empty()) f = FinVec::unit(t->root_key());

    FinVec gamma = tree_gamma_apply(*t, a, f);
    FinVec power_sum;
    for (const auto& [k, m] : a.entries())
      power_sum += apply_power(shift, f, static_cast<unsigned>(k)) * m(0, 0);
    double scale = std::max(1.0, power_sum.norm());
    double dev = (gamma - power_sum).norm() / scale;
    ++r.cases;
    r.record(dev, exact_tol, {{"check", "gamma_power_sum"}, {"tree", ti}, {"violation", dev}});

    if (ti % 5 == 0) {
      auto ctx = ModelContext::from_tree(t, opt.tol, 8, 8);
      std::map<long, Complex> two_sided;
      for (long k = -2; k <= 2; ++k)
        if (rng.below(2)) two_sided[k] = rng.complex_in_square(1.0);
      if (two_sided.empty()) two_sided[-1] = 1.0;
      auto psi = MultiplierSeq::scalar(two_sided);
      FinVec g;
      for (int i = 0; i < 3; ++i) g.set(keys[rng.below(keys.size())], rng.complex_in_square(1.0));
      if (g.empty()) g = FinVec::unit(t->root_key());
      // a multiplier reaching down to -k is only defined on the k-fold range
      long back_reach = std::max(1L, -psi.min_index());
      FinVec range_vec = g;
      for (long s = 0; s < back_reach; ++s) range_vec = shift_apply(*t, range_vec);
      try {
        LaurentWindow via_mult =
            mult_apply(ctx, psi.lifted(ctx.e().dim()), analytic_model(ctx, range_vec));
        LaurentWindow via_expand = analytic_model(ctx, tree_mult_expand(*t, psi, range_vec));
        double worst = 0.0;
        for (long n = -8; n <= 8; ++n)
          worst = std::max(worst, (via_mult.coeff(n) - via_expand.coeff(n)).norm());
        ++r.cases;
        r.record(worst, opt.tol,
                 {{"check", "expand_vs_mult"}, {"tree", ti}, {"violation", worst}});
      } catch (const DomainError& e) {
        ++r.cases;
        r.fail("unexpected_domain_error", e.what());
      }
    }
  }
  return r;
}

/// Fejer smoothing of finitely supported scalar multipliers: the error is
/// monotone non-increasing, and past the support radius it follows the
/// exact triangular attenuation law err(n) (n+1) = const, hence vanishes in
/// the limit. The smoothed support coincides with the original once the
/// kernel covers it.
inline SuiteResult suite_fejer(const VerifyOptions& opt, int tree_count = 12) {
  SuiteResult r;
  r.suite = "fejer";
  Rng rng(opt.seed + 0x70);
  std::vector<std::shared_ptr<const DirectedTreeSystem>> trees;
  if (opt.system && opt.system->tree && opt.system->tree->rooted())
    trees.push_back(opt.system->tree);
  for (int i = 0; i < tree_count; ++i)
    trees.push_back(std::make_shared<DirectedTreeSystem>(random_tree(rng, true, 6, 2, true)));

  for (std::size_t ti = 0; ti < trees.size(); ++ti) {
    const auto& t = trees[ti];
    std::map<long, Complex> entries;
    for (long k = -3; k <= 3; ++k)
      if (rng.below(2)) entries[k] = rng.complex_in_square(1.0);
    entries[2] = Complex{1.0, -0.5};  // keep a nonzero radius
    auto a = MultiplierSeq::scalar(entries);
    long radius = a.support_radius();

    // a single-level vector keeps the error components of distinct powers
    // orthogonal (levels are disjoint), which is what makes the monotone
    // decrease a theorem rather than a tendency
    long pick_level = static_cast<long>(rng.below(3));
    FinVec g;
    for (const auto& k : t->window_keys(3))
      if (t->level(k) == pick_level) g.set(k, rng.complex_in_square(1.0));
    if (g.empty()) g = FinVec::unit(t->root_key());
    FinVec f = shift_apply(*t, g);
    FinVec full = tree_mult_expand(*t, a, f);

    std::vector<double> err;
    for (long n = 0; n <= radius + 6; ++n) {
      auto smoothed_seq = a.scaled_by(fejer(static_cast<int>(n)));
      if (n >= radius && smoothed_seq.entries().size() != a.entries().size()) {
        ++r.cases;
        r.fail("support_mismatch", "smoothed support differs past the radius");
      }
      err.push_back((tree_mult_expand(*t, smoothed_seq, f) - full).norm());
    }
    double mono_worst = 0.0;
    for (std::size_t i = 1; i < err.size(); ++i)
      mono_worst = std::max(mono_worst, err[i] - err[i - 1]);
    ++r.cases;
    r.record(mono_worst, 1e-12, {{"check", "monotone"}, {"tree", ti}, {"violation", mono_worst}});

    double c = err[static_cast<std::size_t>(radius)] * static_cast<double>(radius + 1);
    if (c > 1e-9) {
      double law_worst = 0.0;
      for (long n = radius; n <= radius + 6; ++n)
        law_worst = std::max(law_worst,
                             std::abs(err[static_cast<std::size_t>(n)] *
                                          static_cast<double>(n + 1) - c) / c);
      ++r.cases;
      r.record(law_worst, opt.tol,
               {{"check", "attenuation_law"}, {"tree", ti}, {"violation", law_worst}});
    }
  }
  return r;
}

// ---------------------------------------------------------------------------
// dispatch

inline std::vector<std::string> all_suites() {
  return {"podst", "cdcom", "ker", "model", "wla", "commutant", "gamma", "fejer"};
}

inline SuiteResult run_suite(const std::string& name, const VerifyOptions& opt) {
  try {
    if (name == "podst") return suite_podst(opt);
    if (name == "cdcom") return suite_cdcom(opt);
    if (name == "ker") return suite_ker(opt);
    if (name == "model") return suite_model(opt);
    if (name == "wla") return suite_wla(opt);
    if (name == "commutant") return suite_commutant(opt);
    if (name == "gamma") return suite_gamma(opt);
    if (name == "fejer") return suite_fejer(opt);
  } catch (const NotLeftInvertibleError& e) {
    SuiteResult r;
    r.suite = name;
    r.fail("not_left_invertible", e.what());
    return r;
  } catch (const Error& e) {
    SuiteResult r;
    r.suite = name;
    r.fail("suite_error", e.what());
    return r;
  }
  SuiteResult r;
  r.suite = name;
  r.fail("unknown_suite", "no suite named '" + name + "'");
  return r;
}

/// Runs the selected suites concurrently (each is pure and separately
/// seeded) and assembles the deterministic report.
inline nlohmann::ordered_json run_verify(const VerifyOptions& opt, bool* all_pass = nullptr) {
  std::vector<std::string> selection;
  if (!opt.empty_selection) selection = opt.suites.empty() ? all_suites() : opt.suites;
  std::vector<std::future<SuiteResult>> futures;
  futures.reserve(selection.size());
  for (const auto& name : selection)
    futures.push_back(std::async(std::launch::async, [name, &opt] { return run_suite(name, opt); }));

  nlohmann::ordered_json report;
  report["command"] = "verify";
  report["seed"] = opt.seed;
  report["tol"] = opt.tol;
  report["window"] = {{"neg", opt.window_neg}, {"pos", opt.window_pos}};
  report["depth"] = opt.depth;
  report["system"] = opt.system ? nlohmann::ordered_json(opt.system->name)
                                : nlohmann::ordered_json(nullptr);
  report["suites"] = nlohmann::ordered_json::array();
  bool pass = true;
  for (auto& fut : futures) {
    SuiteResult res = fut.get();
    pass = pass && res.pass;
    report["suites"].push_back(res.to_json());
  }
  report["pass"] = pass;
  if (all_pass) *all_pass = pass;
  return report;
}

}  // namespace opmodel::verify
