#pragma once

// The analytic model: every vector x of the carrier space is represented by
// a two-sided coefficient family, P_E T'^{*n} x at nonnegative indices and
// P_E T^{|n|} x at negative ones. Multiplication by z corresponds to T and
// the left-inverse step L to T'^*; both are computed through the preimage
// and re-extracted, so the coefficient-level identities checked here are
// never circular.

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <utility>
#include <vector>

#include "opmodel/ebasis.hpp"
#include "opmodel/oracle.hpp"
#include "opmodel/report.hpp"
#include "opmodel/tree.hpp"

namespace opmodel {

/// A left-invertible operator, its Cauchy dual, and the coefficient target
/// subspace E. Immutable after construction.
class ModelContext {
 public:
  ModelContext(std::shared_ptr<const LocalOperator> op, std::shared_ptr<const LocalOperator> dual,
               EBasis e, double tol = 1e-10, long window_neg = 10, long window_pos = 10,
               std::function<long(IndexKey)> level = {})
      : op_(std::move(op)),
        dual_(std::move(dual)),
        e_(std::move(e)),
        tol_(tol),
        window_neg_(window_neg),
        window_pos_(window_pos),
        level_(std::move(level)) {
    if (level_) {
      e_min_level_ = std::numeric_limits<long>::max();
      e_max_level_ = std::numeric_limits<long>::min();
      for (const auto& a : e_.atoms())
        for (const auto& [k, z] : a.entries()) {
          e_min_level_ = std::min(e_min_level_, level_(k));
          e_max_level_ = std::max(e_max_level_, level_(k));
        }
      if (e_.dim() == 0) {
        e_min_level_ = 0;
        e_max_level_ = 0;
      }
    }
  }

  static ModelContext from_tree(std::shared_ptr<const DirectedTreeSystem> t, double tol = 1e-10,
                                long window_neg = 10, long window_pos = 10) {
    return from_tree_with_basis(t, kernel_adjoint_basis(*t), tol, window_neg, window_pos);
  }

  static ModelContext from_tree_with_basis(std::shared_ptr<const DirectedTreeSystem> t, EBasis e,
                                           double tol = 1e-10, long window_neg = 10,
                                           long window_pos = 10) {
    auto dual = std::make_shared<DirectedTreeSystem>(cauchy_dual_shift(*t));
    ModelContext ctx(std::make_shared<TreeShiftOperator>(t),
                     std::make_shared<TreeShiftOperator>(dual), std::move(e), tol, window_neg,
                     window_pos, [t](IndexKey k) { return t->level(k); });
    ctx.tree_ = t;
    return ctx;
  }

  const LocalOperator& op() const { return *op_; }
  const LocalOperator& dual() const { return *dual_; }
  const EBasis& e() const { return e_; }
  double tol() const { return tol_; }
  long window_neg() const { return window_neg_; }
  long window_pos() const { return window_pos_; }
  bool has_levels() const { return static_cast<bool>(level_); }
  std::shared_ptr<const DirectedTreeSystem> tree() const { return tree_; }

  std::pair<long, long> support_levels(const FinVec& x) const {
    long lo = std::numeric_limits<long>::max(), hi = std::numeric_limits<long>::min();
    for (const auto& [k, z] : x.entries()) {
      long l = level_(k);
      lo = std::min(lo, l);
      hi = std::max(hi, l);
    }
    return {lo, hi};
  }
  long e_min_level() const { return e_min_level_; }
  long e_max_level() const { return e_max_level_; }

  /// P_{R(T)} = T T'^*; the complement projects onto N(T*).
  FinVec range_projection(const FinVec& x) const { return op_->apply(dual_->adjoint_apply(x)); }

 private:
  std::shared_ptr<const LocalOperator> op_, dual_;
  EBasis e_;
  double tol_;
  long window_neg_, window_pos_;
  std::function<long(IndexKey)> level_;
  long e_min_level_ = 0, e_max_level_ = 0;
  std::shared_ptr<const DirectedTreeSystem> tree_;
};

/// Coefficients of U x on the index window [-neg, pos], plus the underlying
/// preimage x. An exact flag on a side certifies that every coefficient
/// beyond the window on that side vanishes.
struct LaurentWindow {
  long neg = 1;
  long pos = 0;
  std::vector<Eigen::VectorXcd> coeffs;  // index n stored at n + neg
  FinVec preimage;
  bool exact_neg = false;
  bool exact_pos = false;

  bool in_window(long n) const { return n >= -neg && n <= pos; }
  bool known(long n) const {
    return in_window(n) || (n < -neg && exact_neg) || (n > pos && exact_pos);
  }
  const Eigen::VectorXcd& coeff(long n) const {
    if (!in_window(n)) throw Error("coefficient index " + std::to_string(n) + " outside window");
    return coeffs[static_cast<std::size_t>(n + neg)];
  }
  Eigen::VectorXcd coeff_or_zero(long n, int dim) const {
    if (in_window(n)) return coeff(n);
    return Eigen::VectorXcd::Zero(dim);
  }
  double max_coeff_norm() const {
    double m = 0.0;
    for (const auto& c : coeffs) m = std::max(m, c.norm());
    return m;
  }
};

/// f_hat(n): E-coordinates of P_E T'^{*n} x for n >= 0, P_E T^{-n} x for
/// n < 0. The negative side uses plain powers of T, the convention under
/// which the convolution identities and the intertwining with z come out
/// consistent.
inline Eigen::VectorXcd model_coeff(const ModelContext& ctx, const FinVec& x, long n) {
  FinVec v = n >= 0 ? apply_power(ctx.dual(), x, static_cast<unsigned>(n), /*adjoint=*/true)
                    : apply_power(ctx.op(), x, static_cast<unsigned>(-n), /*adjoint=*/false);
  return ctx.e().coords(v);
}

/// The windowed model representation of x, with structural exactness flags:
/// a side becomes exact when the corresponding power orbit either dies or
/// provably leaves the levels E is supported on.
inline LaurentWindow analytic_model(const ModelContext& ctx, const FinVec& x, long window_neg,
                                    long window_pos) {
  if (window_neg < 0 || window_pos < 0) throw Error("window bounds must be nonnegative");
  LaurentWindow w;
  w.neg = window_neg;
  w.pos = window_pos;
  w.preimage = x;
  w.coeffs.assign(static_cast<std::size_t>(window_neg + window_pos + 1),
                  Eigen::VectorXcd::Zero(ctx.e().dim()));

  FinVec down = x;  // T^k x
  for (long k = 1; k <= window_neg; ++k) {
    down = ctx.op().apply(down);
    w.coeffs[static_cast<std::size_t>(window_neg - k)] = ctx.e().coords(down);
  }
  FinVec next_down = ctx.op().apply(down);

  FinVec up = x;  // T'^{*k} x
  w.coeffs[static_cast<std::size_t>(window_neg)] = ctx.e().coords(up);
  for (long k = 1; k <= window_pos; ++k) {
    up = ctx.dual().adjoint_apply(up);
    w.coeffs[static_cast<std::size_t>(window_neg + k)] = ctx.e().coords(up);
  }
  FinVec next_up = ctx.dual().adjoint_apply(up);

  if (x.empty()) {
    w.exact_neg = w.exact_pos = true;
  } else if (ctx.has_levels()) {
    auto [lo, hi] = ctx.support_levels(x);
    w.exact_neg = lo + window_neg + 1 > ctx.e_max_level();
    w.exact_pos = hi - (window_pos + 1) < ctx.e_min_level();
  } else {
    w.exact_neg = next_down.empty();
    w.exact_pos = next_up.empty();
  }
  return w;
}

inline LaurentWindow analytic_model(const ModelContext& ctx, const FinVec& x) {
  return analytic_model(ctx, x, ctx.window_neg(), ctx.window_pos());
}

namespace detail {
/// Checks new_w(n) == old shifted by `shift` wherever both sides are known;
/// throws a CheckError carrying the worst offending index.
inline void check_shift_identity(const ModelContext& ctx, const LaurentWindow& old_w,
                                 const LaurentWindow& new_w, long shift, const char* what) {
  double scale = std::max({1.0, old_w.max_coeff_norm(), new_w.max_coeff_norm()});
  double worst = 0.0;
  long worst_index = 0;
  for (long n = -new_w.neg; n <= new_w.pos; ++n) {
    long m = n + shift;
    if (!old_w.known(m)) continue;
    Eigen::VectorXcd expected = old_w.coeff_or_zero(m, ctx.e().dim());
    double dev = (new_w.coeff(n) - expected).norm();
    if (dev > worst) {
      worst = dev;
      worst_index = n;
    }
  }
  if (worst > ctx.tol() * scale)
    throw CheckError(std::string(what) + " intertwining violated", worst_index, worst);
}
}  // namespace detail

/// M_z through the model: replace the preimage by T x and recompute. The
/// postcondition f_hat(n) -> f_hat(n-1) is verified on all known indices.
inline LaurentWindow mz_apply(const ModelContext& ctx, const LaurentWindow& w) {
  LaurentWindow out = analytic_model(ctx, ctx.op().apply(w.preimage), w.neg, w.pos);
  detail::check_shift_identity(ctx, w, out, -1, "M_z");
  return out;
}

/// The left-inverse step L through the model: preimage T'^* x. When x lies
/// in the range of T the coefficients must shift left by one; this is
/// cross-checked whenever the range membership test passes.
inline LaurentWindow ell_apply(const ModelContext& ctx, const LaurentWindow& w) {
  FinVec y = ctx.dual().adjoint_apply(w.preimage);
  LaurentWindow out = analytic_model(ctx, y, w.neg, w.pos);
  FinVec range_defect = w.preimage - ctx.range_projection(w.preimage);
  if (range_defect.norm() <= ctx.tol() * std::max(1.0, w.preimage.norm()))
    detail::check_shift_identity(ctx, w, out, +1, "L");
  return out;
}

/// Condition E perp T^n E and E perp T'^n E for 1 <= n <= n_max.
inline CheckReport check_prep(const ModelContext& ctx, int n_max) {
  CheckReport r;
  r.check = "prep";
  r.params["n_max"] = n_max;
  const auto& atoms = ctx.e().atoms();
  for (int which = 0; which < 2; ++which) {
    const LocalOperator& o = which == 0 ? ctx.op() : ctx.dual();
    for (std::size_t i = 0; i < atoms.size(); ++i) {
      FinVec v = atoms[i];
      for (int n = 1; n <= n_max; ++n) {
        v = o.apply(v);
        for (std::size_t j = 0; j < atoms.size(); ++j) {
          double dev = std::abs(inner(v, atoms[j]));
          r.record(dev,
                   {{"op", which == 0 ? "T" : "T'"}, {"n", n}, {"atom", i}, {"against", j},
                    {"value", dev}},
                   ctx.tol());
        }
      }
    }
  }
  return r;
}

/// Condition T^n T'^{*n} E subset E for 1 <= n <= n_max, measured as the
/// residual distance from E.
inline CheckReport check_incl(const ModelContext& ctx, int n_max) {
  CheckReport r;
  r.check = "incl";
  r.params["n_max"] = n_max;
  const auto& atoms = ctx.e().atoms();
  for (std::size_t i = 0; i < atoms.size(); ++i) {
    FinVec up = atoms[i];
    for (int n = 1; n <= n_max; ++n) {
      up = ctx.dual().adjoint_apply(up);
      FinVec v = apply_power(ctx.op(), up, static_cast<unsigned>(n));
      double dev = (v - ctx.e().project(v)).norm();
      r.record(dev, {{"n", n}, {"atom", i}, {"distance", dev}}, ctx.tol());
    }
  }
  return r;
}

/// Window coverage of the two spanning conditions: the T*/T' orbits of E
/// and the T'^*/T orbits of E, restricted to the window, must each contain
/// every window basis vector. Coverage is measured by the residual after
/// projecting onto the orbit span.
inline CheckReport check_span(const ModelContext& ctx, const std::vector<IndexKey>& window,
                              int n_max, double cover_tol = 1e-7) {
  CheckReport r;
  r.check = "span";
  r.params["n_max"] = n_max;
  r.params["window_size"] = window.size();
  r.params["cover_tol"] = cover_tol;
  for (int variant = 0; variant < 2; ++variant) {
    std::vector<FinVec> family;
    for (const auto& atom : ctx.e().atoms()) {
      FinVec a = atom, b = atom;
      family.push_back(atom);
      for (int n = 1; n <= n_max; ++n) {
        a = variant == 0 ? ctx.op().adjoint_apply(a) : ctx.dual().adjoint_apply(a);
        b = variant == 0 ? ctx.dual().apply(b) : ctx.op().apply(b);
        family.push_back(a);
        family.push_back(b);
      }
    }
    // restrict to the window
    std::vector<FinVec> restricted;
    for (const auto& v : family) {
      FinVec rv;
      for (const auto& k : window) {
        Complex z = v.at(k);
        if (std::abs(z) > kZeroTol) rv.set(k, z);
      }
      if (!rv.empty()) restricted.push_back(std::move(rv));
    }
    std::vector<IndexKey> frame_keys;
    Eigen::MatrixXcd q = orthonormal_frame(restricted, &frame_keys);
    for (const auto& k : window) {
      double row_norm_sq = 0.0;
      auto it = std::lower_bound(frame_keys.begin(), frame_keys.end(), k);
      if (it != frame_keys.end() && *it == k) {
        int row = static_cast<int>(it - frame_keys.begin());
        row_norm_sq = q.row(row).squaredNorm();
      }
      double residual = std::sqrt(std::max(0.0, 1.0 - row_norm_sq));
      r.record(residual,
               {{"variant", variant == 0 ? "[E]_{T*,T'}" : "[E]_{T'*,T}"}, {"key", k.str()},
                {"residual", residual}},
               cover_tol);
    }
  }
  return r;
}

struct RadiusEstimate {
  double r_minus = 0.0;
  double r_plus = std::numeric_limits<double>::infinity();
  bool minus_vanishes = false;  // negative tail exactly zero: inner radius 0
  bool plus_vanishes = false;   // positive tail exactly zero: outer radius infinite
};

/// Root-test style estimates of the convergence annulus from windowed
/// coefficient norms: log-norm slopes over the tail of each side.
inline RadiusEstimate radius_estimate(const ModelContext& ctx, const LaurentWindow& w) {
  if (w.neg < 8 || w.pos < 8) throw Error("radius estimate needs at least 8 coefficients per side");
  (void)ctx;
  auto fit_slope = [](const std::vector<std::pair<double, double>>& pts) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (auto [x, y] : pts) {
      sx += x;
      sy += y;
      sxx += x * x;
      sxy += x * y;
    }
    double n = static_cast<double>(pts.size());
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
  };

  RadiusEstimate est;
  std::vector<std::pair<double, double>> pos_pts, neg_pts;
  for (long n = 1; n <= w.pos; ++n) {
    double a = w.coeff(n).norm();
    if (a > 1e-13) pos_pts.emplace_back(static_cast<double>(n), std::log(a));
  }
  for (long n = 1; n <= w.neg; ++n) {
    double a = w.coeff(-n).norm();
    if (a > 1e-13) neg_pts.emplace_back(static_cast<double>(n), std::log(a));
  }
  if (pos_pts.size() < 4) {
    est.plus_vanishes = true;
    est.r_plus = std::numeric_limits<double>::infinity();
  } else {
    std::vector<std::pair<double, double>> tail(pos_pts.begin() + pos_pts.size() / 2,
                                                pos_pts.end());
    est.r_plus = std::exp(-fit_slope(tail.size() >= 4 ? tail : pos_pts));
  }
  if (neg_pts.size() < 4) {
    est.minus_vanishes = true;
    est.r_minus = 0.0;
  } else {
    std::vector<std::pair<double, double>> tail(neg_pts.begin() + neg_pts.size() / 2,
                                                neg_pts.end());
    est.r_minus = std::exp(fit_slope(tail.size() >= 4 ? tail : neg_pts));
  }
  return est;
}

}  // namespace opmodel
