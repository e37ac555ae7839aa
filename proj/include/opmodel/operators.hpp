#pragma once

#include <memory>
#include <utility>
#include <vector>

#include "opmodel/core.hpp"

namespace opmodel {

/// p(T) = sum c_k T^k for a shared base operator T.
class PolynomialInOperator final : public LocalOperator {
 public:
  PolynomialInOperator(std::shared_ptr<const LocalOperator> base, std::vector<Complex> coeffs)
      : base_(std::move(base)), coeffs_(std::move(coeffs)) {}

  FinVec apply(const FinVec& x) const override {
    FinVec out;
    FinVec power = x;
    for (std::size_t k = 0; k < coeffs_.size(); ++k) {
      if (k > 0) power = base_->apply(power);
      out += power * coeffs_[k];
    }
    return out;
  }

  FinVec adjoint_apply(const FinVec& x) const override {
    FinVec out;
    FinVec power = x;
    for (std::size_t k = 0; k < coeffs_.size(); ++k) {
      if (k > 0) power = base_->adjoint_apply(power);
      out += power * std::conj(coeffs_[k]);
    }
    return out;
  }

  std::size_t support_growth() const override {
    std::size_t g = 1;
    for (std::size_t k = 1; k < coeffs_.size(); ++k) g *= base_->support_growth();
    return g * coeffs_.size();
  }

  const std::vector<Complex>& coeffs() const { return coeffs_; }

 private:
  std::shared_ptr<const LocalOperator> base_;
  std::vector<Complex> coeffs_;
};

/// x -> <x, right> left.
class RankOneOperator final : public LocalOperator {
 public:
  RankOneOperator(FinVec left, FinVec right) : left_(std::move(left)), right_(std::move(right)) {}

  FinVec apply(const FinVec& x) const override { return left_ * inner(x, right_); }
  FinVec adjoint_apply(const FinVec& x) const override { return right_ * inner(x, left_); }
  std::size_t support_growth() const override {
    return std::max<std::size_t>(1, std::max(left_.support_size(), right_.support_size()));
  }

 private:
  FinVec left_, right_;
};

class SumOperator final : public LocalOperator {
 public:
  explicit SumOperator(std::vector<std::shared_ptr<const LocalOperator>> terms)
      : terms_(std::move(terms)) {}

  FinVec apply(const FinVec& x) const override {
    FinVec out;
    for (const auto& t : terms_) out += t->apply(x);
    return out;
  }
  FinVec adjoint_apply(const FinVec& x) const override {
    FinVec out;
    for (const auto& t : terms_) out += t->adjoint_apply(x);
    return out;
  }
  std::size_t support_growth() const override {
    std::size_t g = 0;
    for (const auto& t : terms_) g += t->support_growth();
    return std::max<std::size_t>(1, g);
  }

 private:
  std::vector<std::shared_ptr<const LocalOperator>> terms_;
};

}  // namespace opmodel
