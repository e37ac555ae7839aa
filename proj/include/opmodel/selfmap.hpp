#pragma once

// Weighted composition operators C_{phi,w} on l^2 of a countable set. The
// carrier is a finite core with a total self-map plus lazy chain extensions:
// fan-in chains feed an anchor with an infinite preimage line, fan-out
// chains redirect an anchor's image into a fresh forward line. Every point
// keeps finite fan-in, so adjoint and Gram formulas stay exactly summable.

#include <algorithm>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "opmodel/core.hpp"
#include "opmodel/tree.hpp"

namespace opmodel {

class SelfMapSystem {
 public:
  struct CorePoint {
    std::optional<std::int64_t> phi;  // absent only for fan-out anchors
    Complex weight{};
  };

  /// Parses a selfmap-spec document:
  ///   {points: [{id, phi, weight}], basepoints: [id],
  ///    extension?: {weight, fan_in: [id], fan_out: [id]}}
  static SelfMapSystem from_json(const nlohmann::json& doc) {
    SelfMapSystem s;
    if (!doc.contains("points") || !doc["points"].is_array() || doc["points"].empty())
      throw ParseError("selfmap spec: 'points' must be a non-empty array");
    for (const auto& p : doc["points"]) {
      if (!p.contains("id") || !p["id"].is_number_integer())
        throw ParseError("selfmap spec: point without integer 'id'");
      std::int64_t id = p["id"].get<std::int64_t>();
      if (s.core_.count(id))
        throw ParseError("selfmap spec: duplicate point id " + std::to_string(id));
      CorePoint cp;
      if (p.contains("phi") && !p["phi"].is_null()) cp.phi = p["phi"].get<std::int64_t>();
      if (p.contains("weight") && !p["weight"].is_null()) cp.weight = weight_from_json(p["weight"]);
      s.core_.emplace(id, cp);
      s.order_.push_back(id);
    }
    if (doc.contains("extension") && !doc["extension"].is_null()) {
      const auto& ext = doc["extension"];
      if (ext.contains("weight")) s.ext_weight_ = weight_from_json(ext["weight"]);
      for (const char* field : {"fan_in", "fan_out"}) {
        if (!ext.contains(field)) continue;
        for (const auto& idj : ext[field]) {
          std::int64_t id = idj.get<std::int64_t>();
          if (!s.core_.count(id))
            throw ParseError(std::string("selfmap spec: unknown ") + field + " anchor " +
                             std::to_string(id));
          (std::string(field) == "fan_in" ? s.fan_in_ : s.fan_out_).insert(id);
        }
      }
    }
    for (auto id : s.order_) {
      const auto& cp = s.core_.at(id);
      bool fan_out = s.fan_out_.count(id) > 0;
      if (fan_out && cp.phi)
        throw ParseError("selfmap spec: fan_out anchor " + std::to_string(id) +
                         " must not also set 'phi'");
      if (!fan_out && !cp.phi)
        throw ParseError("selfmap spec: point " + std::to_string(id) + " has no image (phi)");
      if (cp.phi && !s.core_.count(*cp.phi))
        throw ParseError("selfmap spec: point " + std::to_string(id) + " maps to unknown id " +
                         std::to_string(*cp.phi));
    }
    if (doc.contains("basepoints"))
      for (const auto& b : doc["basepoints"]) {
        std::int64_t id = b.get<std::int64_t>();
        if (!s.core_.count(id)) throw ParseError("selfmap spec: unknown basepoint");
        s.basepoints_.push_back(id);
      }
    s.rebuild_preimages();
    return s;
  }

  static SelfMapSystem from_json_text(const std::string& text) {
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(std::string("selfmap spec: invalid JSON: ") + e.what());
    }
    return from_json(doc);
  }

  /// The shift of a directed tree as a composition operator: phi = par with
  /// a root self-loop of weight zero (rooted) or a fan-out spine (rootless),
  /// w = lambda. Index keys coincide with the tree's.
  static SelfMapSystem from_tree(const DirectedTreeSystem& t) {
    SelfMapSystem s;
    s.ext_weight_ = t.extension_weight();
    for (auto id : t.core_ids()) {
      IndexKey k{id, 0};
      CorePoint cp;
      auto p = t.parent(k);
      if (k == t.root_key()) {
        if (t.rooted()) {
          cp.phi = id;  // fixed point carrying weight zero
          cp.weight = Complex{};
        } else {
          s.fan_out_.insert(id);
          cp.weight = t.weight(k);
        }
      } else {
        cp.phi = p->base;
        cp.weight = t.weight(k);
      }
      if (t.children(k).size() == 1 && t.children(k)[0] == IndexKey{id, 1})
        s.fan_in_.insert(id);
      s.core_.emplace(id, cp);
      s.order_.push_back(id);
    }
    if (!t.rooted()) s.basepoints_.push_back(t.omega_key().base);
    s.rebuild_preimages();
    return s;
  }

  bool contains(IndexKey k) const {
    auto it = core_.find(k.base);
    if (it == core_.end()) return false;
    if (k.tail == 0) return true;
    if (k.tail > 0) return fan_in_.count(k.base) > 0;
    return fan_out_.count(k.base) > 0;
  }

  IndexKey phi(IndexKey k) const {
    require(k);
    if (k.tail > 0) return {k.base, k.tail - 1};
    if (k.tail < 0) return {k.base, k.tail - 1};  // deeper into the forward chain
    const auto& cp = core_.at(k.base);
    if (cp.phi) return {*cp.phi, 0};
    return {k.base, -1};  // fan-out anchor
  }

  std::vector<IndexKey> preimages(IndexKey k) const {
    require(k);
    if (k.tail > 0) return {{k.base, k.tail + 1}};
    if (k.tail < 0) {
      if (k.tail == -1) return {{k.base, 0}};
      return {{k.base, k.tail + 1}};
    }
    std::vector<IndexKey> out;
    auto it = preimages_.find(k.base);
    if (it != preimages_.end())
      for (auto y : it->second) out.push_back({y, 0});
    if (fan_in_.count(k.base)) out.push_back({k.base, 1});
    return out;
  }

  Complex weight(IndexKey k) const {
    require(k);
    if (k.tail == 0) return core_.at(k.base).weight;
    if (k.tail == 1) {
      auto it = fan_in_head_weight_.find(k.base);
      if (it != fan_in_head_weight_.end()) return it->second;
    }
    return ext_weight_;
  }

  /// d(x) = sum over phi-preimages of |w|^2.
  double gram(IndexKey k) const {
    double s = 0.0;
    for (const auto& y : preimages(k)) s += std::norm(weight(y));
    return s;
  }

  const std::vector<std::int64_t>& core_ids() const { return order_; }
  const std::vector<std::int64_t>& basepoints() const { return basepoints_; }
  const std::set<std::int64_t>& fan_in() const { return fan_in_; }
  const std::set<std::int64_t>& fan_out() const { return fan_out_; }
  Complex extension_weight() const { return ext_weight_; }
  bool has_chains() const { return !fan_in_.empty() || !fan_out_.empty(); }

  std::size_t max_fanin() const {
    std::size_t m = 1;
    for (auto id : order_) m = std::max(m, preimages({id, 0}).size());
    return m;
  }

  /// Core points plus chain points up to the given chain depth, sorted.
  std::vector<IndexKey> window_keys(long depth) const {
    std::vector<IndexKey> out;
    for (auto id : order_) {
      out.push_back({id, 0});
      if (fan_in_.count(id))
        for (long k = 1; k <= depth; ++k) out.push_back({id, k});
      if (fan_out_.count(id))
        for (long k = 1; k <= depth; ++k) out.push_back({id, -k});
    }
    std::sort(out.begin(), out.end());
    return out;
  }

  void set_weight(IndexKey k, Complex w) {
    require(k);
    if (k.tail == 0)
      core_.at(k.base).weight = w;
    else if (k.tail == 1)
      fan_in_head_weight_[k.base] = w;
    else
      throw Error("only core and chain-head weights are individually settable");
  }

  void set_extension_weight(Complex w) { ext_weight_ = w; }

 private:
  void require(IndexKey k) const {
    if (!contains(k)) throw Error("point " + k.str() + " is not in the system");
  }

  void rebuild_preimages() {
    preimages_.clear();
    for (auto id : order_) {
      const auto& cp = core_.at(id);
      if (cp.phi) preimages_[*cp.phi].push_back(id);
    }
  }

  std::map<std::int64_t, CorePoint> core_;
  std::vector<std::int64_t> order_;
  std::map<std::int64_t, std::vector<std::int64_t>> preimages_;
  std::set<std::int64_t> fan_in_, fan_out_;
  std::map<std::int64_t, Complex> fan_in_head_weight_;
  std::vector<std::int64_t> basepoints_;
  Complex ext_weight_{1.0, 0.0};
};

/// C_{phi,w} f = w (f o phi); equivalently C e_x = sum over preimages y of
/// w(y) e_y.
inline FinVec comp_apply(const SelfMapSystem& s, const FinVec& f) {
  FinVec g;
  for (const auto& [y, z] : f.entries())
    for (const auto& x : s.preimages(y)) g.add(x, s.weight(x) * z);
  return g;
}

/// C* e_x = conj(w(x)) e_{phi(x)}.
inline FinVec comp_adjoint_apply(const SelfMapSystem& s, const FinVec& f) {
  FinVec g;
  for (const auto& [x, z] : f.entries()) g.add(s.phi(x), std::conj(s.weight(x)) * z);
  return g;
}

class CompositionOperator final : public LocalOperator {
 public:
  explicit CompositionOperator(std::shared_ptr<const SelfMapSystem> s) : sys_(std::move(s)) {}

  FinVec apply(const FinVec& x) const override { return comp_apply(*sys_, x); }
  FinVec adjoint_apply(const FinVec& x) const override { return comp_adjoint_apply(*sys_, x); }
  std::size_t support_growth() const override { return sys_->max_fanin(); }

  const SelfMapSystem& system() const { return *sys_; }

 private:
  std::shared_ptr<const SelfMapSystem> sys_;
};

/// C*^n e_x = conj(w(x) w(phi x) ... w(phi^{n-1} x)) e_{phi^n x}.
inline FinVec comp_adjoint_power(const SelfMapSystem& s, IndexKey x, unsigned n) {
  Complex amp{1.0, 0.0};
  IndexKey cur = x;
  for (unsigned i = 0; i < n; ++i) {
    amp *= s.weight(cur);
    cur = s.phi(cur);
  }
  FinVec out;
  out.set(cur, std::conj(amp));
  return out;
}

namespace detail {
inline void comp_power_walk(const SelfMapSystem& s, IndexKey x, unsigned n, Complex amp,
                            FinVec& out) {
  if (n == 0) {
    out.add(x, amp);
    return;
  }
  for (const auto& y : s.preimages(x)) comp_power_walk(s, y, n - 1, amp * s.weight(y), out);
}
}  // namespace detail

/// C^n e_x = sum over phi^{-n}(x) of the path weight products. Backward
/// paths never merge (forward orbits are unique), so the enumeration is a
/// tree and iterating comp_power reproduces it bit for bit.
inline FinVec comp_power(const SelfMapSystem& s, IndexKey x, unsigned n) {
  FinVec out;
  detail::comp_power_walk(s, x, n, Complex{1.0, 0.0}, out);
  return out;
}

inline FinVec comp_power(const SelfMapSystem& s, const FinVec& f, unsigned n) {
  FinVec out;
  for (const auto& [x, z] : f.entries()) detail::comp_power_walk(s, x, n, z, out);
  return out;
}

inline double gram_diagonal_comp(const SelfMapSystem& s, IndexKey x) { return s.gram(x); }

inline LeftInvReport check_left_invertible_comp(const SelfMapSystem& s, long depth = 4,
                                                double eps = kZeroTol) {
  LeftInvReport r;
  bool first = true;
  auto account = [&](double d) {
    if (first) {
      r.inf_d = r.sup_d = d;
      first = false;
    } else {
      r.inf_d = std::min(r.inf_d, d);
      r.sup_d = std::max(r.sup_d, d);
    }
  };
  for (const auto& k : s.window_keys(depth)) account(s.gram(k));
  if (s.has_chains()) account(std::norm(s.extension_weight()));
  r.ok = !first && r.inf_d > eps;
  return r;
}

/// Cauchy dual C' = C (C*C)^{-1}: same phi, reweighted by the Gram value of
/// the image point, w'(y) = w(y) / d(phi(y)).
inline SelfMapSystem cauchy_dual_comp(const SelfMapSystem& s, double eps = kZeroTol) {
  auto li = check_left_invertible_comp(s, 4, eps);
  if (!li.ok)
    throw NotLeftInvertibleError("cauchy dual undefined: inf d = " + std::to_string(li.inf_d));
  SelfMapSystem d = s;
  for (auto id : s.core_ids()) {
    IndexKey k{id, 0};
    d.set_weight(k, s.weight(k) / s.gram(s.phi(k)));
  }
  Complex we = s.extension_weight();
  d.set_extension_weight(we / std::norm(we));
  // fan-in chain heads land on their anchor, whose Gram is not |ext|^2
  for (auto id : s.fan_in()) {
    IndexKey head{id, 1};
    d.set_weight(head, s.weight(head) / s.gram({id, 0}));
  }
  return d;
}

struct OrbitReport {
  std::set<IndexKey> points;
  bool complete = true;
};

/// [x]_phi: all points whose forward orbit merges with that of x, explored
/// as the closure under phi and phi-preimages. An exhausted budget sets the
/// `complete` flag to false (the orbit may be larger).
inline OrbitReport orbit_of(const SelfMapSystem& s, IndexKey x, std::size_t budget = 10'000) {
  OrbitReport r;
  std::vector<IndexKey> queue{x};
  r.points.insert(x);
  std::size_t head = 0;
  while (head < queue.size()) {
    if (r.points.size() >= budget) {
      r.complete = false;
      break;
    }
    IndexKey cur = queue[head++];
    std::vector<IndexKey> next{s.phi(cur)};
    for (const auto& y : s.preimages(cur)) next.push_back(y);
    for (const auto& y : next)
      if (r.points.insert(y).second) queue.push_back(y);
  }
  return r;
}

struct GenerationTable {
  std::map<IndexKey, long long> value;
  std::set<IndexKey> cycle;

  long long at(IndexKey k) const {
    auto it = value.find(k);
    if (it == value.end()) throw Error("generation undefined at " + k.str());
    return it->second;
  }
};

/// The generation function [phi]: zero on cycles and at basepoints,
/// [phi](phi(x)) = [phi](x) + 1 off cycles. Values behind a basepoint come
/// out negative; the recursion forces this even though the paper declares
/// the codomain to be the naturals.
inline GenerationTable generation(const SelfMapSystem& s, long depth = 12,
                                  std::size_t budget = 100'000) {
  GenerationTable table;

  // cycle detection within the core (chains are cycle-free by construction)
  std::map<std::int64_t, int> color;  // 0 = unvisited, 1 = on current walk, 2 = done
  for (auto start : s.core_ids()) {
    if (color[start]) continue;
    std::vector<std::int64_t> walk;
    std::int64_t cur = start;
    while (true) {
      if (color[cur] == 1) {  // found a new cycle: mark from first occurrence
        auto it = std::find(walk.begin(), walk.end(), cur);
        for (; it != walk.end(); ++it) table.cycle.insert({*it, 0});
        break;
      }
      if (color[cur] == 2) break;
      color[cur] = 1;
      walk.push_back(cur);
      IndexKey next = s.phi({cur, 0});
      if (next.tail != 0) break;  // walked off into a fan-out chain
      cur = next.base;
    }
    for (auto id : walk) color[id] = 2;
  }

  for (const auto& k : table.cycle) table.value[k] = 0;
  for (auto b : s.basepoints()) {
    IndexKey k{b, 0};
    if (table.cycle.count(k))
      throw CheckError("basepoint " + k.str() + " lies in a cycle", k.base, 0.0);
    table.value[k] = 0;
  }

  auto assign = [&](IndexKey k, long long v) {
    auto [it, inserted] = table.value.emplace(k, v);
    if (!inserted && it->second != v)
      throw CheckError("generation conflict at " + k.str(), k.base,
                       static_cast<double>(it->second - v));
    return inserted;
  };

  std::vector<IndexKey> window = s.window_keys(depth);
  std::set<IndexKey> window_set(window.begin(), window.end());

  // forward propagation from basepoints (forward orbits are unique); walking
  // into a cycle forces value 0 there, so a basepoint on a cyclic orbit is
  // reported as a conflict rather than silently clamped
  for (auto b : s.basepoints()) {
    IndexKey cur{b, 0};
    long long v = 0;
    for (std::size_t step = 0; step < budget; ++step) {
      IndexKey next = s.phi(cur);
      ++v;
      if (!window_set.count(next) && !table.value.count(next)) break;
      bool fresh = assign(next, v);
      if (!fresh) break;
      cur = next;
    }
  }

  // remaining window points: walk forward to something known, then backfill
  for (const auto& k : window) {
    if (table.value.count(k)) continue;
    std::vector<IndexKey> path;
    IndexKey cur = k;
    bool resolved = false;
    for (std::size_t step = 0; step < budget; ++step) {
      path.push_back(cur);
      IndexKey next = s.phi(cur);
      auto it = table.value.find(next);
      if (it != table.value.end()) {
        long long v = it->second;
        for (auto rit = path.rbegin(); rit != path.rend(); ++rit) assign(*rit, --v);
        resolved = true;
        break;
      }
      cur = next;
    }
    if (!resolved)
      throw Error("generation: point " + k.str() + " not classifiable within budget" +
                  " (missing basepoint on its orbit?)");
  }
  return table;
}

/// Gen_phi(m, n) = {x explored : m <= [phi](x) <= n}, restricted to the
/// window the table was built over.
inline std::vector<IndexKey> gen_range(const GenerationTable& table, long long m, long long n) {
  std::vector<IndexKey> out;
  for (const auto& [k, v] : table.value)
    if (m <= v && v <= n) out.push_back(k);
  return out;
}

/// N(C*) decomposes over preimage classes: for each point y, the orthogonal
/// complement of the weight vector inside l^2(phi^{-1}(y)). Only core
/// classes can contribute (chain interiors are singletons with nonzero
/// weight). Basepoint atoms are appended when `include_basepoints` is set,
/// mirroring the omega atom of the rootless tree model.
inline EBasis kernel_adjoint_basis_comp(const SelfMapSystem& s, bool include_basepoints = false) {
  std::vector<FinVec> atoms;
  if (include_basepoints)
    for (auto b : s.basepoints()) atoms.push_back(FinVec::unit({b, 0}));
  for (auto id : s.core_ids()) {
    auto cls = s.preimages({id, 0});
    if (cls.empty()) continue;
    FinVec wvec;
    std::vector<FinVec> units;
    for (const auto& y : cls) {
      wvec.add(y, s.weight(y));
      units.push_back(FinVec::unit(y));
    }
    std::vector<FinVec> excluded;
    if (wvec.norm() > kZeroTol) excluded.push_back(wvec);
    for (auto& a : orthonormal_complement(excluded, units)) atoms.push_back(std::move(a));
  }
  return EBasis(std::move(atoms));
}

}  // namespace opmodel
