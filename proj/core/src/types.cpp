#include "bintopo/types.hpp"

#include "bintopo/error.hpp"

namespace bintopo {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_argument: return "invalid_argument";
    case ErrorCode::not_positive_definite: return "not_positive_definite";
    case ErrorCode::singular: return "singular";
    case ErrorCode::breakdown: return "breakdown";
    case ErrorCode::singular_core: return "singular_core";
    case ErrorCode::infeasible_move: return "infeasible_move";
    case ErrorCode::guard_violation: return "guard_violation";
    case ErrorCode::internal_consistency: return "internal_consistency";
    case ErrorCode::config: return "config";
    case ErrorCode::io: return "io";
  }
  return "unknown";
}

DensityVector DensityVector::from_bits(const std::vector<int>& bits) {
  DensityVector x(bits.size(), false);
  for (std::size_t i = 0; i < bits.size(); ++i) {
    require(bits[i] == 0 || bits[i] == 1, "density entries must be 0 or 1");
    x.set(i, bits[i] == 1);
  }
  return x;
}

int DensityVector::volume() const {
  int v = 0;
  for (auto b : x_) v += b;
  return v;
}

double DensityVector::volume_fraction() const {
  return x_.empty() ? 0.0 : static_cast<double>(volume()) / static_cast<double>(x_.size());
}

void VariationVector::set(std::size_t i, int value, const DensityVector& base) {
  require(base.size() == y_.size(), "variation/base size mismatch");
  require(value >= -1 && value <= 1, "variation entries must be -1, 0 or +1");
  require(value != 1 || !base.solid(i), "cannot add an element that is already solid");
  require(value != -1 || base.solid(i), "cannot remove an element that is already void");
  y_[i] = static_cast<std::int8_t>(value);
}

int VariationVector::volume_variation() const {
  int s = 0;
  for (auto v : y_) s += v;
  return s;
}

int VariationVector::topological_variation() const {
  int s = 0;
  for (auto v : y_) s += v * v;
  return s;
}

DensityVector VariationVector::apply(const DensityVector& base) const {
  require(base.size() == y_.size(), "variation/base size mismatch");
  DensityVector out = base;
  for (std::size_t i = 0; i < y_.size(); ++i) {
    if (y_[i] == 1) out.set(i, true);
    if (y_[i] == -1) out.set(i, false);
  }
  return out;
}

}  // namespace bintopo
