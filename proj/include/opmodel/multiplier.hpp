#pragma once

// Generalized multipliers: finitely supported B(E)-valued sequences acting
// on coefficient families by Cauchy convolution. The induced multiplication
// operator is partial; its action is reconstructed by least squares over
// the model's own spanning family and every returned window is re-derived
// from the reconstructed preimage, so convolution identities are checked
// against independently recomputed coefficients.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "opmodel/model.hpp"
#include "opmodel/operators.hpp"
#include "opmodel/report.hpp"

namespace opmodel {

/// Finitely supported map from the integers to dim x dim complex matrices
/// in the fixed E-basis coordinates. dim == 1 doubles as a scalar sequence.
class MultiplierSeq {
 public:
  explicit MultiplierSeq(int dim = 1) : dim_(dim) {}

  static MultiplierSeq delta(long n, Eigen::MatrixXcd m) {
    MultiplierSeq s(static_cast<int>(m.rows()));
    s.set(n, std::move(m));
    return s;
  }

  /// chi_{n} I_dim.
  static MultiplierSeq indicator(long n, int dim, Complex scale = {1.0, 0.0}) {
    return delta(n, scale * Eigen::MatrixXcd::Identity(dim, dim));
  }

  static MultiplierSeq scalar(const std::map<long, Complex>& entries) {
    MultiplierSeq s(1);
    for (const auto& [n, v] : entries) s.set(n, v * Eigen::MatrixXcd::Identity(1, 1));
    return s;
  }

  /// Parses {dimE, entries: [{n, matrix}]} or the scalar shorthand
  /// {entries: [{n, value}]}.
  static MultiplierSeq from_json(const nlohmann::json& doc) {
    if (!doc.contains("entries") || !doc["entries"].is_array())
      throw ParseError("multiplier spec: missing 'entries' array");
    int dim = doc.contains("dimE") ? doc["dimE"].get<int>() : 1;
    if (dim < 1) throw ParseError("multiplier spec: dimE must be positive");
    MultiplierSeq s(dim);
    for (const auto& e : doc["entries"]) {
      if (!e.contains("n")) throw ParseError("multiplier spec: entry without index 'n'");
      long n = e["n"].get<long>();
      if (e.contains("value")) {
        s.set(n, weight_from_json(e["value"]) * Eigen::MatrixXcd::Identity(dim, dim));
        continue;
      }
      if (!e.contains("matrix") || !e["matrix"].is_array())
        throw ParseError("multiplier spec: entry needs 'value' or 'matrix'");
      const auto& rows = e["matrix"];
      if (static_cast<int>(rows.size()) != dim)
        throw ParseError("multiplier spec: matrix rows do not match dimE");
      Eigen::MatrixXcd m(dim, dim);
      for (int i = 0; i < dim; ++i) {
        if (static_cast<int>(rows[i].size()) != dim)
          throw ParseError("multiplier spec: matrix is not square");
        for (int j = 0; j < dim; ++j) m(i, j) = weight_from_json(rows[i][j]);
      }
      s.set(n, std::move(m));
    }
    return s;
  }

  int dim() const { return dim_; }
  const std::map<long, Eigen::MatrixXcd>& entries() const { return entries_; }
  bool empty() const { return entries_.empty(); }
  long min_index() const { return entries_.empty() ? 0 : entries_.begin()->first; }
  long max_index() const { return entries_.empty() ? 0 : entries_.rbegin()->first; }
  long support_radius() const {
    return entries_.empty() ? 0 : std::max(std::labs(min_index()), std::labs(max_index()));
  }

  Eigen::MatrixXcd at(long n) const {
    auto it = entries_.find(n);
    return it == entries_.end() ? Eigen::MatrixXcd::Zero(dim_, dim_) : it->second;
  }

  void set(long n, Eigen::MatrixXcd m) {
    if (m.rows() != dim_ || m.cols() != dim_)
      throw Error("multiplier entry dimension mismatch");
    if (m.cwiseAbs().maxCoeff() <= kZeroTol)
      entries_.erase(n);
    else
      entries_[n] = std::move(m);
  }

  /// Lift a scalar sequence to value * I_dim.
  MultiplierSeq lifted(int dim) const {
    if (dim_ != 1) throw Error("lifted() expects a scalar sequence");
    MultiplierSeq out(dim);
    for (const auto& [n, m] : entries_)
      out.set(n, m(0, 0) * Eigen::MatrixXcd::Identity(dim, dim));
    return out;
  }

  /// Pointwise scaling by a scalar sequence, (s . a)(n) = s(n) a(n).
  MultiplierSeq scaled_by(const MultiplierSeq& scalar_seq) const {
    if (scalar_seq.dim() != 1) throw Error("scaled_by() expects a scalar sequence");
    MultiplierSeq out(dim_);
    for (const auto& [n, m] : entries_) out.set(n, scalar_seq.at(n)(0, 0) * m);
    return out;
  }

  MultiplierSeq& operator+=(const MultiplierSeq& o) {
    if (o.dim_ != dim_) throw Error("multiplier dimension mismatch");
    for (const auto& [n, m] : o.entries_) set(n, at(n) + m);
    return *this;
  }
  friend MultiplierSeq operator+(MultiplierSeq a, const MultiplierSeq& b) { return a += b; }
  friend MultiplierSeq operator*(Complex c, MultiplierSeq a) {
    MultiplierSeq out(a.dim_);
    for (const auto& [n, m] : a.entries_) out.set(n, c * m);
    return out;
  }

  double max_entry_deviation(const MultiplierSeq& o) const {
    double worst = 0.0;
    for (const auto& [n, m] : entries_) worst = std::max(worst, (m - o.at(n)).cwiseAbs().maxCoeff());
    for (const auto& [n, m] : o.entries_) worst = std::max(worst, (m - at(n)).cwiseAbs().maxCoeff());
    return worst;
  }

 private:
  int dim_;
  std::map<long, Eigen::MatrixXcd> entries_;
};

/// Cauchy product (a * b)(n) = sum_k a(k) b(n-k); matrix factors compose in
/// the order of the induced operators, a after b.
inline MultiplierSeq convolve(const MultiplierSeq& a, const MultiplierSeq& b) {
  if (a.dim() != b.dim()) throw Error("convolve: dimension mismatch");
  MultiplierSeq out(a.dim());
  for (const auto& [k, ma] : a.entries())
    for (const auto& [j, mb] : b.entries()) out.set(k + j, out.at(k + j) + ma * mb);
  return out;
}

/// Coefficients of a * f_hat over a widened window, with per-index
/// contamination flags: an index is clean only when every contributing
/// f_hat value is either inside f's window or certified zero by an exact
/// side flag.
struct ConvolvedWindow {
  long lo = 0, hi = -1;
  std::vector<Eigen::VectorXcd> coords;
  std::vector<bool> clean;
  bool exact_neg = false, exact_pos = false;

  bool in_window(long n) const { return n >= lo && n <= hi; }
  bool is_clean(long n) const {
    if (in_window(n)) return clean[static_cast<std::size_t>(n - lo)];
    return (n < lo && exact_neg) || (n > hi && exact_pos);
  }
  const Eigen::VectorXcd& at(long n) const {
    if (!in_window(n)) throw Error("convolved index " + std::to_string(n) + " outside window");
    if (!clean[static_cast<std::size_t>(n - lo)])
      throw DomainError("convolved coefficient at index " + std::to_string(n) +
                        " is contaminated by window truncation");
    return coords[static_cast<std::size_t>(n - lo)];
  }
  Eigen::VectorXcd at_or_zero(long n, int dim) const {
    return in_window(n) ? at(n) : Eigen::VectorXcd::Zero(dim);
  }
};

inline ConvolvedWindow convolve_window(const MultiplierSeq& a, const LaurentWindow& f) {
  const int dim = a.dim();
  if (!f.coeffs.empty() && f.coeffs.front().size() != dim)
    throw Error("convolve_window: multiplier dimension does not match coefficients");
  ConvolvedWindow out;
  if (a.empty()) {
    out.lo = -f.neg;
    out.hi = f.pos;
    out.coords.assign(static_cast<std::size_t>(f.neg + f.pos + 1), Eigen::VectorXcd::Zero(dim));
    out.clean.assign(out.coords.size(), true);
    out.exact_neg = out.exact_pos = true;
    return out;
  }
  out.lo = -f.neg + a.min_index();
  out.hi = f.pos + a.max_index();
  out.exact_neg = f.exact_neg;
  out.exact_pos = f.exact_pos;
  for (long n = out.lo; n <= out.hi; ++n) {
    Eigen::VectorXcd c = Eigen::VectorXcd::Zero(dim);
    bool ok = true;
    for (const auto& [k, m] : a.entries()) {
      long idx = n - k;
      if (!f.known(idx)) ok = false;
      c += m * f.coeff_or_zero(idx, dim);
    }
    out.coords.push_back(std::move(c));
    out.clean.push_back(ok);
  }
  return out;
}

/// The model's spanning family {T^n e_i} and {T'^{*m} e_i} with
/// precomputed coefficient windows; the reconstruction basis for M_phi.
struct SpanningFamily {
  std::vector<FinVec> vectors;
  std::vector<LaurentWindow> windows;
  long lo = 0, hi = -1;  // coefficient range the windows cover
};

inline SpanningFamily spanning_family(const ModelContext& ctx, long pow_neg, long pow_pos,
                                      long coeff_lo, long coeff_hi) {
  SpanningFamily fam;
  fam.lo = coeff_lo;
  fam.hi = coeff_hi;
  long wneg = std::max(0L, -coeff_lo);
  long wpos = std::max(0L, coeff_hi);
  for (const auto& atom : ctx.e().atoms()) {
    FinVec up = atom;
    fam.vectors.push_back(atom);
    for (long n = 1; n <= pow_pos; ++n) {
      up = ctx.op().apply(up);
      fam.vectors.push_back(up);
    }
    FinVec down = atom;
    for (long m = 1; m <= pow_neg; ++m) {
      down = ctx.dual().adjoint_apply(down);
      if (down.empty()) break;
      fam.vectors.push_back(down);
    }
  }
  for (const auto& v : fam.vectors) fam.windows.push_back(analytic_model(ctx, v, wneg, wpos));
  return fam;
}

/// M_phi f: convolve, then recover a preimage by least squares over the
/// spanning family and re-derive its window. A residual above tolerance
/// means f is outside the domain of M_phi at this truncation; on success
/// the achieved fit residual is reported through `residual_out`.
inline LaurentWindow mult_apply(const ModelContext& ctx, const MultiplierSeq& a,
                                const LaurentWindow& f, double* residual_out = nullptr) {
  if (a.dim() != ctx.e().dim())
    throw Error("mult_apply: multiplier dimension does not match dim E");
  const int dim = ctx.e().dim();
  ConvolvedWindow target = convolve_window(a, f);

  SpanningFamily fam = spanning_family(ctx, f.neg + std::max(0L, -a.min_index()),
                                       f.pos + std::max(0L, a.max_index()), target.lo, target.hi);

  std::vector<long> rows;
  for (long n = target.lo; n <= target.hi; ++n)
    if (target.is_clean(n)) rows.push_back(n);
  if (rows.empty()) throw DomainError("mult_apply: no clean coefficients to fit against");

  const int n_rows = static_cast<int>(rows.size()) * dim;
  const int n_cols = static_cast<int>(fam.vectors.size());
  Eigen::MatrixXcd A(n_rows, n_cols);
  Eigen::VectorXcd b(n_rows);
  for (int r = 0; r < static_cast<int>(rows.size()); ++r) {
    long n = rows[static_cast<std::size_t>(r)];
    b.segment(r * dim, dim) = target.at(n);
    for (int j = 0; j < n_cols; ++j)
      A.block(r * dim, j, dim, 1) =
          fam.windows[static_cast<std::size_t>(j)].coeff_or_zero(n, dim);
  }
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
  svd.setThreshold(1e-12);
  Eigen::VectorXcd c = svd.solve(b);

  FinVec g;
  for (int j = 0; j < n_cols; ++j) g += fam.vectors[static_cast<std::size_t>(j)] * c(j);

  // honest residual: recompute the window of g, never trust the fit matrix
  LaurentWindow wide = analytic_model(ctx, g, std::max(0L, -target.lo), std::max(0L, target.hi));
  double scale = 1.0;
  for (long n : rows) scale = std::max(scale, target.at(n).norm());
  double residual = 0.0;
  for (long n : rows) residual = std::max(residual, (wide.coeff(n) - target.at(n)).norm());
  if (residual > ctx.tol() * scale)
    throw DomainError("mult_apply: no preimage within tolerance at this truncation" +
                          std::string(" (f outside D(M_phi))"),
                      residual);
  return analytic_model(ctx, g, f.neg, f.pos);
}

/// phi_A: the multiplier extracted from an operator A, windowed to
/// [-window_neg, window_pos]: P_E T'^{*m} A|_E at m >= 0, P_E T^{-m} A|_E
/// below.
inline MultiplierSeq multiplier_of_operator(const ModelContext& ctx, const LocalOperator& a,
                                            long window_neg, long window_pos) {
  const int dim = ctx.e().dim();
  MultiplierSeq seq(dim);
  std::vector<Eigen::MatrixXcd> mats(static_cast<std::size_t>(window_neg + window_pos + 1),
                                     Eigen::MatrixXcd::Zero(dim, dim));
  for (int j = 0; j < dim; ++j) {
    FinVec base = a.apply(ctx.e().atom(j));
    FinVec up = base;
    mats[static_cast<std::size_t>(window_neg)].col(j) = ctx.e().coords(up);
    for (long m = 1; m <= window_pos; ++m) {
      up = ctx.dual().adjoint_apply(up);
      mats[static_cast<std::size_t>(window_neg + m)].col(j) = ctx.e().coords(up);
    }
    FinVec down = base;
    for (long m = 1; m <= window_neg; ++m) {
      down = ctx.op().apply(down);
      mats[static_cast<std::size_t>(window_neg - m)].col(j) = ctx.e().coords(down);
    }
  }
  for (long m = -window_neg; m <= window_pos; ++m)
    seq.set(m, mats[static_cast<std::size_t>(m + window_neg)]);
  return seq;
}

/// Commutant check: precondition AT = TA and the model hypotheses, then
/// verify the convolution identity (phi_A * f_hat)(n) = (A f)_hat(n) on the
/// theorem's spanning vectors.
inline CheckReport check_commutant(const ModelContext& ctx, const LocalOperator& a,
                                   const std::vector<IndexKey>& window_keys, int n_powers = 5) {
  CheckReport r;
  r.check = "commutant";
  r.params["n_powers"] = n_powers;

  double comm_scale = 1.0, comm_worst = 0.0;
  for (const auto& k : window_keys) {
    FinVec e = FinVec::unit(k);
    FinVec diff = a.apply(ctx.op().apply(e)) - ctx.op().apply(a.apply(e));
    comm_scale = std::max(comm_scale, a.apply(e).norm());
    comm_worst = std::max(comm_worst, diff.norm());
  }
  if (comm_worst > ctx.tol() * comm_scale) {
    r.pass = false;
    r.max_violation = comm_worst;
    r.witnesses.push_back({{"precheck", "commutation"}, {"violation", comm_worst}});
    return r;
  }

  auto prep = check_prep(ctx, n_powers);
  auto incl = check_incl(ctx, n_powers);
  // orbit powers must be able to reach the whole window
  int span_powers = std::min<int>(64, static_cast<int>(window_keys.size()));
  auto span = check_span(ctx, window_keys, std::max(span_powers, n_powers + 3));
  for (const CheckReport* h : {&prep, &incl, &span}) {
    if (!h->pass) {
      r.pass = false;
      r.max_violation = std::max(r.max_violation, h->max_violation);
      r.witnesses.push_back({{"precheck", h->check}, {"violation", h->max_violation}});
    }
  }
  if (!r.pass) return r;

  long wneg = ctx.window_neg(), wpos = ctx.window_pos();
  MultiplierSeq phi_a = multiplier_of_operator(ctx, a, wneg, wpos);

  std::vector<FinVec> test_vectors;
  for (const auto& atom : ctx.e().atoms()) {
    FinVec up = atom, down = atom;
    test_vectors.push_back(atom);
    for (int n = 1; n <= n_powers; ++n) {
      up = ctx.op().apply(up);
      test_vectors.push_back(up);
      down = ctx.dual().adjoint_apply(down);
      if (!down.empty()) test_vectors.push_back(down);
    }
  }

  for (std::size_t vi = 0; vi < test_vectors.size(); ++vi) {
    const FinVec& x = test_vectors[vi];
    LaurentWindow f = analytic_model(ctx, x, wneg, wpos);
    ConvolvedWindow lhs = convolve_window(phi_a, f);
    LaurentWindow rhs = analytic_model(ctx, a.apply(x), std::max(0L, -lhs.lo),
                                       std::max(0L, lhs.hi));
    double scale = std::max({1.0, f.max_coeff_norm(), rhs.max_coeff_norm()});
    for (long n = lhs.lo; n <= lhs.hi; ++n) {
      if (!lhs.is_clean(n)) continue;
      double dev = (lhs.at(n) - rhs.coeff(n)).norm() / scale;
      r.record(dev, {{"vector", vi}, {"n", n}, {"violation", dev}}, ctx.tol());
    }
  }
  return r;
}

/// Coefficients of the n-th Fejer kernel: 1 - |m|/(n+1) on |m| <= n. The
/// absolute value follows the standard kernel.
inline MultiplierSeq fejer(int n) {
  if (n < 0) throw Error("fejer: order must be nonnegative");
  std::map<long, Complex> entries;
  for (long m = -n; m <= n; ++m)
    entries[m] = Complex{1.0 - static_cast<double>(std::labs(m)) / (n + 1), 0.0};
  return MultiplierSeq::scalar(entries);
}

/// The tree-side multiplication operator: (Gamma f)(v) = sum over k of
/// lambda_{par^k(v)|v} phi(k) f(par^k(v)), evaluated sparsely by walking
/// descendants of the support.
inline FinVec tree_gamma_apply(const DirectedTreeSystem& t, const MultiplierSeq& a,
                               const FinVec& f) {
  if (!t.rooted()) throw Error("tree_gamma_apply: requires a rooted tree (depth grading)");
  if (a.dim() != 1) throw Error("tree_gamma_apply: requires a scalar sequence");
  if (!a.empty() && a.min_index() < 0)
    throw Error("tree_gamma_apply: sequence must be supported on nonnegative indices");
  FinVec out;
  for (const auto& [u, fu] : f.entries())
    for (const auto& [k, m] : a.entries())
      for (const auto& [v, pw] : descendants_at_depth(t, u, k)) out.add(v, pw * m(0, 0) * fu);
  return out;
}

/// The expansion of M_psi on range vectors: sum_{k>=1} psi(-k) S'^{*k} f +
/// sum_{k>=0} psi(k) S^k f for f = S g.
inline FinVec tree_mult_expand(const DirectedTreeSystem& t, const MultiplierSeq& a,
                               const FinVec& f, double tol = 1e-10) {
  if (a.dim() != 1) throw Error("tree_mult_expand: requires a scalar sequence");
  auto dual = cauchy_dual_shift(t);
  FinVec probe = shift_apply(t, shift_adjoint_apply(dual, f));
  if ((probe - f).norm() > tol * std::max(1.0, f.norm()))
    throw DomainError("tree_mult_expand: f is not in the range of the shift",
                      (probe - f).norm());
  FinVec out;
  FinVec down = f;
  long max_pos = a.empty() ? 0 : std::max(0L, a.max_index());
  for (long k = 0; k <= max_pos; ++k) {
    if (k > 0) down = shift_apply(t, down);
    Eigen::MatrixXcd m = a.at(k);
    if (m.cwiseAbs().maxCoeff() > 0) out += down * m(0, 0);
  }
  FinVec up = f;
  long max_neg = a.empty() ? 0 : std::max(0L, -a.min_index());
  for (long k = 1; k <= max_neg; ++k) {
    up = shift_adjoint_apply(dual, up);
    Eigen::MatrixXcd m = a.at(-k);
    if (m.cwiseAbs().maxCoeff() > 0) out += up * m(0, 0);
  }
  return out;
}

/// Largest singular value of M_phi restricted to the span of the family:
/// a certified lower bound for the multiplier norm, non-decreasing in the
/// family size. Vectors outside the domain of M_phi are skipped.
inline double norm_lower_bound(const ModelContext& ctx, const MultiplierSeq& a, long pow_neg,
                               long pow_pos) {
  SpanningFamily fam = spanning_family(ctx, pow_neg, pow_pos, -(ctx.window_neg()),
                                       ctx.window_pos());
  // orthonormalize the family in H
  std::vector<FinVec> frame;
  for (const auto& v : fam.vectors) {
    FinVec u = v;
    for (const auto& prev : frame) u -= inner(u, prev) * prev;
    double n = u.norm();
    if (n > 1e-8) frame.push_back(u * Complex{1.0 / n, 0.0});
  }
  std::vector<FinVec> images;
  for (const auto& q : frame) {
    try {
      LaurentWindow w = mult_apply(ctx, a, analytic_model(ctx, q));
      images.push_back(w.preimage);
    } catch (const DomainError&) {
      // M_phi is partial; the bound is over its domain
    }
  }
  if (images.empty()) return 0.0;
  std::set<IndexKey> support;
  for (const auto& g : images)
    for (const auto& [k, z] : g.entries()) support.insert(k);
  std::vector<IndexKey> keys(support.begin(), support.end());
  Eigen::MatrixXcd stacked(static_cast<int>(keys.size()), static_cast<int>(images.size()));
  stacked.setZero();
  for (int j = 0; j < static_cast<int>(images.size()); ++j)
    for (const auto& [k, z] : images[static_cast<std::size_t>(j)].entries()) {
      auto it = std::lower_bound(keys.begin(), keys.end(), k);
      stacked(static_cast<int>(it - keys.begin()), j) = z;
    }
  return op_norm(stacked);
}

}  // namespace opmodel
