#pragma once

// Directed trees with weights and the weighted shift they carry.
//
// A tree is a finite core plus a lazy extension: every core leaf continues
// as an infinite non-branching path with a fixed default weight, and a
// rootless tree additionally extends the core root upward by an infinite
// ancestor spine. All branching lives in the finite core, so the kernel of
// the adjoint shift is finite-dimensional and exactly computable.

#include <algorithm>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "opmodel/core.hpp"
#include "opmodel/ebasis.hpp"

namespace opmodel {

/// Weight entry in a spec document: number, decimal or rational string
/// ("0.6", "3/5"), or [re, im] pair.
inline Complex weight_from_json(const nlohmann::json& v) {
  if (v.is_number()) return Complex{v.get<double>(), 0.0};
  if (v.is_array() && v.size() == 2 && v[0].is_number() && v[1].is_number())
    return Complex{v[0].get<double>(), v[1].get<double>()};
  if (v.is_string()) {
    std::string s = v.get<std::string>();
    try {
      auto slash = s.find('/');
      if (slash != std::string::npos) {
        double num = std::stod(s.substr(0, slash));
        double den = std::stod(s.substr(slash + 1));
        if (den == 0.0) throw ParseError("weight '" + s + "' divides by zero");
        return Complex{num / den, 0.0};
      }
      return Complex{std::stod(s), 0.0};
    } catch (const ParseError&) {
      throw;
    } catch (const std::exception&) {
      throw ParseError("malformed weight '" + s + "'");
    }
  }
  throw ParseError("weight must be a number, a string, or an [re, im] pair");
}

struct LeftInvReport {
  bool ok = false;
  double inf_d = 0.0;
  double sup_d = 0.0;
};

class DirectedTreeSystem {
 public:
  struct CoreVertex {
    std::optional<std::int64_t> parent;
    std::vector<std::int64_t> children;  // document order
    std::optional<Complex> weight;       // absent only for a rooted root
    long depth = 0;                      // distance from the core root
  };

  /// Parses a tree-spec document:
  ///   {rooted, vertices: [{id, parent, weight}], extension: {weight}, omega?}
  static DirectedTreeSystem from_json(const nlohmann::json& doc) {
    DirectedTreeSystem t;
    if (!doc.contains("rooted") || !doc["rooted"].is_boolean())
      throw ParseError("tree spec: missing boolean field 'rooted'");
    t.rooted_ = doc["rooted"].get<bool>();

    if (!doc.contains("vertices") || !doc["vertices"].is_array() || doc["vertices"].empty())
      throw ParseError("tree spec: 'vertices' must be a non-empty array");

    std::optional<std::int64_t> root;
    for (const auto& v : doc["vertices"]) {
      if (!v.contains("id") || !v["id"].is_number_integer())
        throw ParseError("tree spec: vertex without integer 'id'");
      std::int64_t id = v["id"].get<std::int64_t>();
      if (t.core_.count(id)) throw ParseError("tree spec: duplicate vertex id " + std::to_string(id));
      CoreVertex cv;
      if (v.contains("parent") && !v["parent"].is_null()) {
        if (!v["parent"].is_number_integer())
          throw ParseError("tree spec: vertex " + std::to_string(id) + " has non-integer parent");
        cv.parent = v["parent"].get<std::int64_t>();
      }
      if (v.contains("weight") && !v["weight"].is_null()) cv.weight = weight_from_json(v["weight"]);
      if (!cv.parent) {
        if (root) throw ParseError("tree spec: multiple roots (" + std::to_string(*root) + ", " +
                                   std::to_string(id) + ")");
        root = id;
      }
      t.core_.emplace(id, std::move(cv));
      t.order_.push_back(id);
    }
    if (!root) throw ParseError("tree spec: no root vertex (cyclic parent map)");
    t.root_ = *root;

    for (auto id : t.order_) {
      auto& cv = t.core_.at(id);
      if (cv.parent) {
        auto it = t.core_.find(*cv.parent);
        if (it == t.core_.end())
          throw ParseError("tree spec: vertex " + std::to_string(id) + " has unknown parent " +
                           std::to_string(*cv.parent));
        it->second.children.push_back(id);
      }
    }

    // depth assignment doubles as the acyclicity check
    std::size_t assigned = 1;
    t.core_.at(t.root_).depth = 0;
    std::vector<std::int64_t> frontier{t.root_};
    while (!frontier.empty()) {
      std::vector<std::int64_t> next;
      for (auto id : frontier)
        for (auto c : t.core_.at(id).children) {
          t.core_.at(c).depth = t.core_.at(id).depth + 1;
          ++assigned;
          next.push_back(c);
        }
      frontier = std::move(next);
    }
    if (assigned != t.core_.size())
      throw ParseError("tree spec: cyclic parent map (unreachable vertices)");

    if (!doc.contains("extension") || !doc["extension"].contains("weight"))
      throw ParseError("tree spec: missing extension rule (leaf with no extension)");
    t.ext_weight_ = weight_from_json(doc["extension"]["weight"]);
    if (std::abs(t.ext_weight_) <= kZeroTol)
      throw ParseError("tree spec: extension weight must be nonzero");

    for (auto id : t.order_) {
      const auto& cv = t.core_.at(id);
      bool is_root = (id == t.root_);
      if (is_root && t.rooted_) {
        if (cv.weight) throw ParseError("tree spec: rooted root must not carry a weight");
      } else {
        if (!cv.weight)
          throw ParseError("tree spec: vertex " + std::to_string(id) + " has no weight");
        if (std::abs(*cv.weight) <= kZeroTol)
          throw ParseError("tree spec: vertex " + std::to_string(id) + " has zero weight");
      }
    }

    t.omega_ = t.root_;
    if (doc.contains("omega") && !doc["omega"].is_null()) {
      if (t.rooted_) throw ParseError("tree spec: 'omega' is only meaningful for rootless trees");
      t.omega_ = doc["omega"].get<std::int64_t>();
      if (!t.core_.count(t.omega_)) throw ParseError("tree spec: unknown omega vertex");
    }
    return t;
  }

  static DirectedTreeSystem from_json_text(const std::string& text) {
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(std::string("tree spec: invalid JSON: ") + e.what());
    }
    return from_json(doc);
  }

  /// Rooted path 0 -> 1 -> ... with the given core weights (lambda of vertex
  /// k+1 is weights[k]) and extension weight; the unilateral-shift carrier
  /// when all weights are 1.
  static DirectedTreeSystem path(const std::vector<Complex>& weights, Complex ext = {1.0, 0.0}) {
    nlohmann::json doc;
    doc["rooted"] = true;
    doc["vertices"] = nlohmann::json::array();
    doc["vertices"].push_back({{"id", 0}, {"parent", nullptr}});
    for (std::size_t i = 0; i < weights.size(); ++i)
      doc["vertices"].push_back({{"id", static_cast<std::int64_t>(i + 1)},
                                 {"parent", static_cast<std::int64_t>(i)},
                                 {"weight", {weights[i].real(), weights[i].imag()}}});
    doc["extension"] = {{"weight", {ext.real(), ext.imag()}}};
    return from_json(doc);
  }

  /// Rootless two-sided path through omega = 0; the bilateral-shift carrier.
  static DirectedTreeSystem bilateral_path(Complex weight = {1.0, 0.0}) {
    nlohmann::json doc;
    doc["rooted"] = false;
    doc["vertices"] = nlohmann::json::array();
    doc["vertices"].push_back(
        {{"id", 0}, {"parent", nullptr}, {"weight", {weight.real(), weight.imag()}}});
    doc["extension"] = {{"weight", {weight.real(), weight.imag()}}};
    doc["omega"] = 0;
    return from_json(doc);
  }

  bool rooted() const { return rooted_; }
  IndexKey root_key() const { return {root_, 0}; }
  IndexKey omega_key() const { return {omega_, 0}; }
  Complex extension_weight() const { return ext_weight_; }
  const std::vector<std::int64_t>& core_ids() const { return order_; }
  std::size_t core_size() const { return core_.size(); }

  bool is_core(IndexKey k) const { return k.tail == 0 && core_.count(k.base) > 0; }

  bool contains(IndexKey k) const {
    auto it = core_.find(k.base);
    if (it == core_.end()) return false;
    if (k.tail == 0) return true;
    if (k.tail > 0) return it->second.children.empty();  // forward tails hang off leaves
    return !rooted_ && k.base == root_;                  // ancestor spine above a rootless root
  }

  std::optional<IndexKey> parent(IndexKey k) const {
    require(k);
    if (k.tail > 0) return IndexKey{k.base, k.tail - 1};
    if (k.tail < 0) return IndexKey{k.base, k.tail - 1};  // deeper into the spine
    const auto& cv = core_.at(k.base);
    if (cv.parent) return IndexKey{*cv.parent, 0};
    if (rooted_) return std::nullopt;
    return IndexKey{root_, -1};
  }

  std::vector<IndexKey> children(IndexKey k) const {
    require(k);
    if (k.tail > 0) return {IndexKey{k.base, k.tail + 1}};
    if (k.tail < 0) return {IndexKey{k.base, k.tail + 1}};
    const auto& cv = core_.at(k.base);
    if (cv.children.empty()) return {IndexKey{k.base, 1}};
    std::vector<IndexKey> out;
    out.reserve(cv.children.size());
    for (auto c : cv.children) out.push_back({c, 0});
    return out;
  }

  /// lambda_v. Undefined for the root of a rooted tree.
  Complex weight(IndexKey k) const {
    require(k);
    if (k.tail != 0) return ext_weight_;
    const auto& cv = core_.at(k.base);
    if (!cv.weight) throw Error("weight undefined at the root");
    return *cv.weight;
  }

  /// d(v) = sum over children of |lambda|^2 (Gram diagonal of S* S).
  double gram(IndexKey k) const {
    require(k);
    double s = 0.0;
    for (const auto& c : children(k)) s += std::norm(weight(c));
    return s;
  }

  /// Depth for rooted trees; signed level relative to omega otherwise.
  long level(IndexKey k) const {
    require(k);
    long core_level = (k.tail >= 0) ? core_.at(k.base).depth : 0;
    long l = core_level + static_cast<long>(k.tail);
    if (!rooted_) l -= core_.at(omega_).depth;
    return l;
  }

  std::vector<std::int64_t> branching_ids() const {
    std::vector<std::int64_t> out;
    for (auto id : order_)
      if (core_.at(id).children.size() >= 2) out.push_back(id);
    return out;
  }

  std::size_t max_fanout() const {
    std::size_t m = 1;
    for (const auto& [id, cv] : core_) m = std::max(m, cv.children.size());
    return m;
  }

  /// All keys with level(v) in [-depth, depth] (rooted trees have no
  /// negative levels). Sorted by key; finite by construction.
  std::vector<IndexKey> window_keys(long depth) const {
    std::vector<IndexKey> out;
    for (auto id : order_) {
      IndexKey k{id, 0};
      long l = level(k);
      if (l < -depth || l > depth) continue;
      out.push_back(k);
      if (core_.at(id).children.empty())
        for (long tail = 1; l + tail <= depth; ++tail) out.push_back({id, tail});
    }
    if (!rooted_)
      for (long tail = 1; level({root_, -tail}) >= -depth; ++tail) out.push_back({root_, -tail});
    std::sort(out.begin(), out.end());
    return out;
  }

 private:
  void require(IndexKey k) const {
    if (!contains(k)) throw Error("vertex " + k.str() + " is not in the tree");
  }

  bool rooted_ = true;
  std::int64_t root_ = 0;
  std::int64_t omega_ = 0;
  Complex ext_weight_{1.0, 0.0};
  std::map<std::int64_t, CoreVertex> core_;
  std::vector<std::int64_t> order_;
};

/// (S_lambda f)(v) = lambda_v f(par(v)).
inline FinVec shift_apply(const DirectedTreeSystem& t, const FinVec& f) {
  FinVec g;
  for (const auto& [u, z] : f.entries())
    for (const auto& c : t.children(u)) g.add(c, t.weight(c) * z);
  return g;
}

/// S_lambda* e_x = conj(lambda_x) e_{par(x)}; kills the root atom.
inline FinVec shift_adjoint_apply(const DirectedTreeSystem& t, const FinVec& f) {
  FinVec g;
  for (const auto& [c, z] : f.entries())
    if (auto p = t.parent(c)) g.add(*p, std::conj(t.weight(c)) * z);
  return g;
}

class TreeShiftOperator final : public LocalOperator {
 public:
  explicit TreeShiftOperator(std::shared_ptr<const DirectedTreeSystem> t) : tree_(std::move(t)) {}

  FinVec apply(const FinVec& x) const override { return shift_apply(*tree_, x); }
  FinVec adjoint_apply(const FinVec& x) const override { return shift_adjoint_apply(*tree_, x); }
  std::size_t support_growth() const override { return tree_->max_fanout(); }

  const DirectedTreeSystem& tree() const { return *tree_; }
  std::shared_ptr<const DirectedTreeSystem> tree_ptr() const { return tree_; }

 private:
  std::shared_ptr<const DirectedTreeSystem> tree_;
};

inline double gram_diagonal(const DirectedTreeSystem& t, IndexKey v) { return t.gram(v); }

/// inf/sup of d(v) over the window plus the extension tail's asymptotic
/// value; ok iff the inf stays above eps.
inline LeftInvReport check_left_invertible(const DirectedTreeSystem& t, long window_depth,
                                           double eps = kZeroTol) {
  LeftInvReport r;
  double ext_d = std::norm(t.extension_weight());
  r.inf_d = ext_d;
  r.sup_d = ext_d;
  for (const auto& k : t.window_keys(window_depth)) {
    double d = t.gram(k);
    r.inf_d = std::min(r.inf_d, d);
    r.sup_d = std::max(r.sup_d, d);
  }
  r.ok = r.inf_d > eps;
  return r;
}

/// Model subspace per the kernel decomposition: N(S*) equals the root atom
/// (rooted case) plus, per branching vertex u, the orthogonal complement of
/// the weight vector inside l^2(Chi(u)). For rootless trees the designated
/// e_omega atom is prepended when `include_omega` is set.
inline EBasis kernel_adjoint_basis(const DirectedTreeSystem& t, bool include_omega = true) {
  std::vector<FinVec> atoms;
  if (t.rooted())
    atoms.push_back(FinVec::unit(t.root_key()));
  else if (include_omega)
    atoms.push_back(FinVec::unit(t.omega_key()));
  for (auto u : t.branching_ids()) {
    FinVec lambda_u;
    std::vector<FinVec> units;
    for (const auto& c : t.children({u, 0})) {
      lambda_u.add(c, t.weight(c));
      units.push_back(FinVec::unit(c));
    }
    if (lambda_u.norm() <= kZeroTol)
      throw Error("branching vertex " + std::to_string(u) + " has zero weight vector");
    for (auto& a : orthonormal_complement({lambda_u}, units)) atoms.push_back(std::move(a));
  }
  return EBasis(std::move(atoms));
}

inline FinVec project_E(const EBasis& e, const FinVec& f) { return e.project(f); }

/// Cauchy dual S' = S (S*S)^{-1} realized as a reweighting: the dual weight
/// at v is lambda_v / d(par(v)). The denominator indexes the parent's Gram
/// value, the form forced by the diagonal of S*S.
inline DirectedTreeSystem cauchy_dual_shift(const DirectedTreeSystem& t,
                                            double eps = kZeroTol) {
  long core_depth = 0;
  for (auto id : t.core_ids()) core_depth = std::max(core_depth, t.level({id, 0}));
  auto li = check_left_invertible(t, core_depth + 2, eps);
  if (!li.ok)
    throw NotLeftInvertibleError("cauchy dual undefined: inf d = " + std::to_string(li.inf_d));

  nlohmann::json doc;
  doc["rooted"] = t.rooted();
  doc["vertices"] = nlohmann::json::array();
  for (auto id : t.core_ids()) {
    IndexKey k{id, 0};
    nlohmann::json v;
    v["id"] = id;
    auto p = t.parent(k);
    bool is_core_root = (k == t.root_key());
    if (is_core_root)
      v["parent"] = nullptr;
    else
      v["parent"] = p->base;
    if (!(t.rooted() && is_core_root)) {
      Complex w = t.weight(k) / t.gram(*p);
      v["weight"] = {w.real(), w.imag()};
    }
    doc["vertices"].push_back(v);
  }
  Complex we = t.extension_weight();
  Complex dual_ext = we / std::norm(we);
  doc["extension"] = {{"weight", {dual_ext.real(), dual_ext.imag()}}};
  if (!t.rooted()) doc["omega"] = t.omega_key().base;
  return DirectedTreeSystem::from_json(doc);
}

/// lambda_{u|v}: 1 if u = v, otherwise the product of the weights strictly
/// below u down the unique path to v, accumulated top-down.
inline Complex path_weight(const DirectedTreeSystem& t, IndexKey u, IndexKey v) {
  if (u == v) return Complex{1.0, 0.0};
  long steps = t.level(v) - t.level(u);
  if (steps <= 0) throw Error(v.str() + " is not a descendant of " + u.str());
  std::vector<IndexKey> chain;
  IndexKey cur = v;
  for (long i = 0; i < steps; ++i) {
    chain.push_back(cur);
    auto p = t.parent(cur);
    if (!p) throw Error(v.str() + " is not a descendant of " + u.str());
    cur = *p;
  }
  if (cur != u) throw Error(v.str() + " is not a descendant of " + u.str());
  Complex w{1.0, 0.0};
  for (auto it = chain.rbegin(); it != chain.rend(); ++it) w *= t.weight(*it);
  return w;
}

/// Descendants of u at the given depth with their path weights, in key order.
inline std::vector<std::pair<IndexKey, Complex>> descendants_at_depth(
    const DirectedTreeSystem& t, IndexKey u, long depth) {
  std::vector<std::pair<IndexKey, Complex>> cur{{u, Complex{1.0, 0.0}}};
  for (long i = 0; i < depth; ++i) {
    std::vector<std::pair<IndexKey, Complex>> next;
    for (const auto& [k, w] : cur)
      for (const auto& c : t.children(k)) next.emplace_back(c, w * t.weight(c));
    cur = std::move(next);
  }
  return cur;
}

}  // namespace opmodel
