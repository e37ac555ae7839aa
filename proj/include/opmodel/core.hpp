#pragma once

// Sparse complex vectors over an abstract countable index set, and the
// operator contract shared by every concrete operator class in this library.

#include <atomic>
#include <cmath>
#include <compare>
#include <complex>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>

namespace opmodel {

using Complex = std::complex<double>;

// Stored amplitudes below this magnitude are treated as exact zeros.
inline constexpr double kZeroTol = 1e-12;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

class SupportBudgetError : public Error {
 public:
  using Error::Error;
};

class NotLeftInvertibleError : public Error {
 public:
  using Error::Error;
};

/// Requested vector is outside the (partial) operator's domain at the
/// current truncation.
class DomainError : public Error {
 public:
  explicit DomainError(const std::string& msg, double residual = 0.0)
      : Error(msg), residual_(residual) {}
  double residual() const { return residual_; }

 private:
  double residual_;
};

/// A theorem-level consistency check failed; carries the offending index.
class CheckError : public Error {
 public:
  CheckError(const std::string& msg, long long index, double magnitude)
      : Error(msg + " at index " + std::to_string(index) +
              " (violation " + std::to_string(magnitude) + ")"),
        index_(index),
        magnitude_(magnitude) {}
  long long index() const { return index_; }
  double magnitude() const { return magnitude_; }

 private:
  long long index_;
  double magnitude_;
};

/// Identifier of one basis vector e_x. `base` names a point of the finite
/// core; `tail` indexes lazily generated points anchored at it (positive:
/// forward chains below core leaves, negative: the infinite ancestor spine
/// of a rootless core). Totally ordered and stable within a run.
struct IndexKey {
  std::int64_t base = 0;
  std::int64_t tail = 0;

  friend auto operator<=>(const IndexKey&, const IndexKey&) = default;

  std::string str() const {
    if (tail == 0) return std::to_string(base);
    return std::to_string(base) + ":" + std::to_string(tail);
  }

  static IndexKey parse(const std::string& s) {
    auto pos = s.find(':');
    try {
      if (pos == std::string::npos) return IndexKey{std::stoll(s), 0};
      return IndexKey{std::stoll(s.substr(0, pos)), std::stoll(s.substr(pos + 1))};
    } catch (const std::exception&) {
      throw ParseError("malformed index key '" + s + "'");
    }
  }
};

inline IndexKey key(std::int64_t base, std::int64_t tail = 0) {
  return IndexKey{base, tail};
}

namespace detail {
inline std::atomic<std::size_t>& support_budget_slot() {
  static std::atomic<std::size_t> budget{1'000'000};
  return budget;
}
}  // namespace detail

inline std::size_t support_budget() { return detail::support_budget_slot().load(); }
inline void set_support_budget(std::size_t n) { detail::support_budget_slot().store(n); }

/// Finitely supported complex function on the index set. Entries below
/// kZeroTol are pruned; growing past the support budget throws instead of
/// truncating silently.
class FinVec {
 public:
  FinVec() = default;

  static FinVec unit(IndexKey k) {
    FinVec v;
    v.entries_.emplace(k, Complex{1.0, 0.0});
    return v;
  }

  const std::map<IndexKey, Complex>& entries() const { return entries_; }

  Complex at(IndexKey k) const {
    auto it = entries_.find(k);
    return it == entries_.end() ? Complex{} : it->second;
  }

  void set(IndexKey k, Complex z) {
    if (std::abs(z) <= kZeroTol) {
      entries_.erase(k);
      return;
    }
    auto [it, inserted] = entries_.insert_or_assign(k, z);
    (void)it;
    if (inserted) check_budget();
  }

  void add(IndexKey k, Complex z) {
    auto it = entries_.find(k);
    if (it == entries_.end()) {
      if (std::abs(z) <= kZeroTol) return;
      entries_.emplace(k, z);
      check_budget();
      return;
    }
    it->second += z;
    if (std::abs(it->second) <= kZeroTol) entries_.erase(it);
  }

  FinVec& operator+=(const FinVec& o) {
    for (const auto& [k, z] : o.entries_) add(k, z);
    return *this;
  }
  FinVec& operator-=(const FinVec& o) {
    for (const auto& [k, z] : o.entries_) add(k, -z);
    return *this;
  }
  FinVec& operator*=(Complex c) {
    if (std::abs(c) <= kZeroTol) {
      entries_.clear();
      return *this;
    }
    for (auto& [k, z] : entries_) z *= c;
    prune();
    return *this;
  }

  friend FinVec operator+(FinVec a, const FinVec& b) { return a += b; }
  friend FinVec operator-(FinVec a, const FinVec& b) { return a -= b; }
  friend FinVec operator*(Complex c, FinVec v) { return v *= c; }
  friend FinVec operator*(FinVec v, Complex c) { return v *= c; }

  double norm_sq() const {
    double s = 0.0;
    for (const auto& [k, z] : entries_) s += std::norm(z);
    return s;
  }
  double norm() const { return std::sqrt(norm_sq()); }

  std::size_t support_size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }

 private:
  void prune() {
    for (auto it = entries_.begin(); it != entries_.end();) {
      if (std::abs(it->second) <= kZeroTol)
        it = entries_.erase(it);
      else
        ++it;
    }
  }

  void check_budget() const {
    if (entries_.size() > support_budget())
      throw SupportBudgetError("support size " + std::to_string(entries_.size()) +
                               " exceeds budget " + std::to_string(support_budget()));
  }

  std::map<IndexKey, Complex> entries_;
};

/// <x, y> = sum x(k) * conj(y(k)); conjugate-linear in the second slot.
inline Complex inner(const FinVec& x, const FinVec& y) {
  // iterate the smaller support
  const FinVec& a = x.support_size() <= y.support_size() ? x : y;
  const FinVec& b = x.support_size() <= y.support_size() ? y : x;
  Complex s{};
  for (const auto& [k, z] : a.entries()) {
    Complex w = b.at(k);
    if (&a == &x)
      s += z * std::conj(w);
    else
      s += w * std::conj(z);
  }
  return s;
}

/// Contract shared by all concrete operator classes: sparse application,
/// sparse adjoint application, and a bound on support fan-out per step.
class LocalOperator {
 public:
  virtual ~LocalOperator() = default;

  virtual FinVec apply(const FinVec& x) const = 0;
  virtual FinVec adjoint_apply(const FinVec& x) const = 0;

  /// Upper bound on |supp(apply(e_k))| over basis vectors e_k.
  virtual std::size_t support_growth() const { return 1; }
};

/// n-fold application of op (or its adjoint); n = 0 is the identity.
inline FinVec apply_power(const LocalOperator& op, FinVec x, unsigned n,
                          bool adjoint = false) {
  for (unsigned i = 0; i < n; ++i)
    x = adjoint ? op.adjoint_apply(x) : op.apply(x);
  return x;
}

/// Deterministic 64-bit generator with explicit real/complex draws, so that
/// seeded runs reproduce bit-for-bit independently of library internals.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed ? seed : 0x9e3779b97f4a7c15ull) {}

  std::uint64_t next_u64() {
    // splitmix64
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  /// Uniform in [0, 1).
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  Complex complex_in_square(double half_side) {
    return Complex{uniform(-half_side, half_side), uniform(-half_side, half_side)};
  }

  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) { return n ? next_u64() % n : 0; }

 private:
  std::uint64_t state_;
};

}  // namespace opmodel
