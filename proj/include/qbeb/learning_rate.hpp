#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>

namespace qbeb {

/// Power schedule alpha_n = (alpha + n)^{-gamma}, alpha > 0, 1/2 < gamma <= 1.
class LearningRate {
 public:
  /// Throws DomainError outside the admissible range.
  LearningRate(double alpha, double gamma);

  double operator()(std::uint64_t n) const;
  double alpha() const noexcept { return alpha_; }
  double gamma() const noexcept { return gamma_; }

  bool operator==(const LearningRate&) const = default;

 private:
  double alpha_;
  double gamma_;
};

/// Step-size sequence consumed by the recursion: either the power schedule or
/// an arbitrary user sequence (assumed non-increasing with values in (0, 1]).
class RateSchedule {
 public:
  RateSchedule(LearningRate power) : power_(power) {}  // NOLINT: implicit by intent

  static RateSchedule custom(std::function<double(std::uint64_t)> fn, std::string label);

  /// alpha_n for n >= 1. The first observation uses alpha_1.
  double at(std::uint64_t n) const { return power_ ? (*power_)(n) : custom_(n); }

  const std::optional<LearningRate>& power() const noexcept { return power_; }
  std::string label() const;

 private:
  RateSchedule() = default;
  std::optional<LearningRate> power_;
  std::function<double(std::uint64_t)> custom_;
  std::string label_;
};

}  // namespace qbeb
