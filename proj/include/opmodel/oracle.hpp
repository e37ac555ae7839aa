#pragma once

// Dense finite-dimensional linear algebra used as independent ground truth
// for the sparse formula-based implementations: densified windows, SVD null
// spaces, direct Cauchy duals, operator norms, entrywise comparisons.

#include <Eigen/Dense>
#include <algorithm>
#include <set>
#include <vector>

#include "opmodel/core.hpp"

namespace opmodel {

inline constexpr int kMaxDenseDim = 2000;

/// A local operator compressed to a finite index window. Rows/columns whose
/// sparse image leaves the window are marked as frontier so comparisons can
/// ignore truncation artifacts.
struct DenseWindow {
  std::vector<IndexKey> keys;
  Eigen::MatrixXcd matrix;
  std::vector<bool> col_frontier;  // apply(e_j) escapes the window
  std::vector<bool> row_frontier;  // adjoint_apply(e_i) escapes the window

  int index_of(IndexKey k) const {
    auto it = std::lower_bound(keys.begin(), keys.end(), k);
    if (it == keys.end() || *it != k) return -1;
    return static_cast<int>(it - keys.begin());
  }
};

/// M(i, j) = <op(e_{key_j}), e_{key_i}> over the given window.
inline DenseWindow densify(const LocalOperator& op, std::vector<IndexKey> keys) {
  if (keys.size() > static_cast<std::size_t>(kMaxDenseDim))
    throw Error("dense window larger than " + std::to_string(kMaxDenseDim));
  std::sort(keys.begin(), keys.end());
  keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
  const int n = static_cast<int>(keys.size());

  DenseWindow w;
  w.keys = keys;
  w.matrix = Eigen::MatrixXcd::Zero(n, n);
  w.col_frontier.assign(static_cast<std::size_t>(n), false);
  w.row_frontier.assign(static_cast<std::size_t>(n), false);

  for (int j = 0; j < n; ++j) {
    FinVec img = op.apply(FinVec::unit(keys[static_cast<std::size_t>(j)]));
    for (const auto& [k, z] : img.entries()) {
      int i = w.index_of(k);
      if (i < 0)
        w.col_frontier[static_cast<std::size_t>(j)] = true;
      else
        w.matrix(i, j) = z;
    }
  }
  for (int i = 0; i < n; ++i) {
    FinVec img = op.adjoint_apply(FinVec::unit(keys[static_cast<std::size_t>(i)]));
    for (const auto& [k, z] : img.entries())
      if (w.index_of(k) < 0) w.row_frontier[static_cast<std::size_t>(i)] = true;
  }
  return w;
}

/// Rectangular compression <op(e_col), e_row>. With rows covering the full
/// image of the columns this is an exact representation, so derived Gram
/// matrices carry no truncation error.
inline Eigen::MatrixXcd densify_rect(const LocalOperator& op, std::vector<IndexKey> rows,
                                     const std::vector<IndexKey>& cols) {
  if (rows.size() > static_cast<std::size_t>(kMaxDenseDim) ||
      cols.size() > static_cast<std::size_t>(kMaxDenseDim))
    throw Error("dense window larger than " + std::to_string(kMaxDenseDim));
  std::sort(rows.begin(), rows.end());
  rows.erase(std::unique(rows.begin(), rows.end()), rows.end());
  Eigen::MatrixXcd m(static_cast<int>(rows.size()), static_cast<int>(cols.size()));
  m.setZero();
  for (int j = 0; j < static_cast<int>(cols.size()); ++j) {
    FinVec img = op.apply(FinVec::unit(cols[static_cast<std::size_t>(j)]));
    for (const auto& [k, z] : img.entries()) {
      auto it = std::lower_bound(rows.begin(), rows.end(), k);
      if (it != rows.end() && *it == k) m(static_cast<int>(it - rows.begin()), j) = z;
    }
  }
  return m;
}

/// Orthonormal basis of N(M): right singular vectors whose singular value
/// falls below tol * sigma_max.
inline Eigen::MatrixXcd null_space(const Eigen::MatrixXcd& m, double tol = 1e-8) {
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(m, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  double cutoff = sv.size() > 0 ? tol * std::max(sv(0), 1e-300) : 0.0;
  int rank = 0;
  for (int i = 0; i < sv.size(); ++i)
    if (sv(i) > cutoff) ++rank;
  return svd.matrixV().rightCols(svd.matrixV().cols() - rank);
}

/// T (T*T)^{-1} by direct solve.
inline Eigen::MatrixXcd dense_cauchy_dual(const Eigen::MatrixXcd& m) {
  Eigen::MatrixXcd gram = m.adjoint() * m;
  Eigen::FullPivLU<Eigen::MatrixXcd> lu(gram);
  if (!lu.isInvertible()) throw NotLeftInvertibleError("T*T is singular on this window");
  return m * lu.inverse();
}

/// Largest singular value.
inline double op_norm(const Eigen::MatrixXcd& m) {
  if (m.size() == 0) return 0.0;
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(m);
  return svd.singularValues()(0);
}

struct CompareReport {
  double max_deviation = 0.0;
  IndexKey worst_row{};
  IndexKey worst_col{};
  bool pass = true;
};

/// Max entrywise deviation of two operators on shared non-frontier entries.
inline CompareReport compare(const LocalOperator& a, const LocalOperator& b,
                             const std::vector<IndexKey>& keys, double tol) {
  DenseWindow wa = densify(a, keys);
  DenseWindow wb = densify(b, keys);
  CompareReport r;
  const int n = static_cast<int>(wa.keys.size());
  for (int j = 0; j < n; ++j) {
    if (wa.col_frontier[static_cast<std::size_t>(j)] || wb.col_frontier[static_cast<std::size_t>(j)])
      continue;
    for (int i = 0; i < n; ++i) {
      double dev = std::abs(wa.matrix(i, j) - wb.matrix(i, j));
      if (dev > r.max_deviation) {
        r.max_deviation = dev;
        r.worst_row = wa.keys[static_cast<std::size_t>(i)];
        r.worst_col = wa.keys[static_cast<std::size_t>(j)];
      }
    }
  }
  r.pass = r.max_deviation <= tol;
  return r;
}

/// sin of the largest principal angle between the column spans of two
/// orthonormal frames; stable for nearly coincident subspaces.
inline double principal_angle_sin(const Eigen::MatrixXcd& q1, const Eigen::MatrixXcd& q2) {
  if (q1.cols() != q2.cols()) return 1.0;
  if (q1.cols() == 0) return 0.0;
  Eigen::MatrixXcd r1 = q2 - q1 * (q1.adjoint() * q2);
  Eigen::MatrixXcd r2 = q1 - q2 * (q2.adjoint() * q1);
  return std::max(op_norm(r1), op_norm(r2));
}

/// Stacks sparse vectors over the union of their supports and orthonormalizes.
inline Eigen::MatrixXcd orthonormal_frame(const std::vector<FinVec>& vs,
                                          std::vector<IndexKey>* out_keys = nullptr) {
  std::set<IndexKey> support;
  for (const auto& v : vs)
    for (const auto& [k, z] : v.entries()) support.insert(k);
  std::vector<IndexKey> keys(support.begin(), support.end());
  Eigen::MatrixXcd m(static_cast<int>(keys.size()), static_cast<int>(vs.size()));
  m.setZero();
  for (int j = 0; j < static_cast<int>(vs.size()); ++j)
    for (const auto& [k, z] : vs[static_cast<std::size_t>(j)].entries()) {
      auto it = std::lower_bound(keys.begin(), keys.end(), k);
      m(static_cast<int>(it - keys.begin()), j) = z;
    }
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(m, Eigen::ComputeThinU);
  const auto& sv = svd.singularValues();
  double cutoff = sv.size() > 0 ? 1e-10 * std::max(sv(0), 1e-300) : 0.0;
  int rank = 0;
  for (int i = 0; i < sv.size(); ++i)
    if (sv(i) > cutoff) ++rank;
  if (out_keys) *out_keys = keys;
  return svd.matrixU().leftCols(rank);
}

}  // namespace opmodel
