#pragma once

#include <Eigen/Dense>
#include <string>
#include <utility>
#include <vector>

#include "opmodel/core.hpp"

namespace opmodel {

/// Orthonormal basis of a finite-dimensional subspace E, with sparse atoms.
/// Houses the orthogonal projection P_E and the coordinate maps used by the
/// coefficient machinery.
class EBasis {
 public:
  EBasis() = default;

  /// Atoms must be pairwise orthonormal within `tol`; they are then refined
  /// by Gram-Schmidt to working precision, preserving order and span.
  explicit EBasis(std::vector<FinVec> atoms, double tol = 1e-8) {
    for (std::size_t i = 0; i < atoms.size(); ++i) {
      for (std::size_t j = 0; j <= i; ++j) {
        Complex g = inner(atoms[i], atoms[j]);
        double expected = (i == j) ? 1.0 : 0.0;
        if (std::abs(g - expected) > tol)
          throw Error("EBasis atoms not orthonormal: <a" + std::to_string(i) +
                      ", a" + std::to_string(j) + "> = " + std::to_string(std::abs(g)));
      }
    }
    for (auto& a : atoms) {
      for (const auto& prev : atoms_) a -= inner(a, prev) * prev;
      double n = a.norm();
      if (n <= 1e-8) throw Error("EBasis atoms linearly dependent");
      atoms_.push_back(a * Complex{1.0 / n, 0.0});
    }
  }

  int dim() const { return static_cast<int>(atoms_.size()); }
  const std::vector<FinVec>& atoms() const { return atoms_; }
  const FinVec& atom(int i) const { return atoms_.at(static_cast<std::size_t>(i)); }

  /// Coordinates <f, atom_i> of P_E f in the atom basis.
  Eigen::VectorXcd coords(const FinVec& f) const {
    Eigen::VectorXcd c(dim());
    for (int i = 0; i < dim(); ++i) c(i) = inner(f, atoms_[static_cast<std::size_t>(i)]);
    return c;
  }

  FinVec from_coords(const Eigen::VectorXcd& c) const {
    FinVec f;
    for (int i = 0; i < dim(); ++i) f += c(i) * atoms_[static_cast<std::size_t>(i)];
    return f;
  }

  /// P_E f = sum <f, a> a.
  FinVec project(const FinVec& f) const { return from_coords(coords(f)); }

 private:
  std::vector<FinVec> atoms_;
};

/// Orthonormal basis of span{candidates} ominus span{excluded}, built by
/// Gram-Schmidt in the given candidate order. Residuals below `drop_tol`
/// are treated as dependent and dropped.
inline std::vector<FinVec> orthonormal_complement(const std::vector<FinVec>& excluded,
                                                  const std::vector<FinVec>& candidates,
                                                  double drop_tol = 1e-8) {
  std::vector<FinVec> frame;
  for (const auto& e : excluded) {
    FinVec v = e;
    for (const auto& prev : frame) v -= inner(v, prev) * prev;
    double n = v.norm();
    if (n <= drop_tol) throw Error("orthonormal_complement: excluded vectors dependent");
    frame.push_back(v * Complex{1.0 / n, 0.0});
  }
  std::size_t n_excluded = frame.size();
  for (const auto& c : candidates) {
    FinVec v = c;
    for (const auto& prev : frame) v -= inner(v, prev) * prev;
    double n = v.norm();
    if (n <= drop_tol) continue;
    frame.push_back(v * Complex{1.0 / n, 0.0});
  }
  return {frame.begin() + static_cast<std::ptrdiff_t>(n_excluded), frame.end()};
}

}  // namespace opmodel
