#include "qbeb/learning_rate.hpp"

#include <cmath>
#include <sstream>

#include "qbeb/errors.hpp"

namespace qbeb {

LearningRate::LearningRate(double alpha, double gamma) : alpha_(alpha), gamma_(gamma) {
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw DomainError("learning-rate offset alpha must be > 0");
  if (!(gamma > 0.5 && gamma <= 1.0))
    throw DomainError("learning-rate exponent gamma must lie in (1/2, 1]");
}

double LearningRate::operator()(std::uint64_t n) const {
  return std::pow(alpha_ + static_cast<double>(n), -gamma_);
}

RateSchedule RateSchedule::custom(std::function<double(std::uint64_t)> fn, std::string label) {
  if (!fn) throw ConfigError("custom schedule needs a callable");
  RateSchedule s;
  s.custom_ = std::move(fn);
  s.label_ = std::move(label);
  return s;
}

std::string RateSchedule::label() const {
  if (!power_) return label_;
  std::ostringstream os;
  os << "(" << power_->alpha() << "+n)^-" << power_->gamma();
  return os.str();
}

}  // namespace qbeb
