#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <vector>

namespace bintopo {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using DenseMatrix = Eigen::MatrixXd;

// Binary element states; 1 = solid, 0 = void.
class DensityVector {
 public:
  DensityVector() = default;
  explicit DensityVector(std::size_t n, bool solid = true) : x_(n, solid ? 1 : 0) {}
  static DensityVector from_bits(const std::vector<int>& bits);

  std::size_t size() const { return x_.size(); }
  bool solid(std::size_t i) const { return x_[i] != 0; }
  void set(std::size_t i, bool solid) { x_[i] = solid ? 1 : 0; }
  void flip(std::size_t i) { x_[i] ^= 1; }

  int volume() const;
  double volume_fraction() const;

  bool operator==(const DensityVector&) const = default;

 private:
  std::vector<std::uint8_t> x_;
};

// Signed element switches relative to a base topology.
class VariationVector {
 public:
  VariationVector() = default;
  explicit VariationVector(std::size_t n) : y_(n, 0) {}

  std::size_t size() const { return y_.size(); }
  int operator[](std::size_t i) const { return y_[i]; }

  // Throws unless the switch is admissible for `base`.
  void set(std::size_t i, int value, const DensityVector& base);

  int volume_variation() const;      // sum y_i
  int topological_variation() const; // sum y_i^2
  bool is_zero() const { return topological_variation() == 0; }

  DensityVector apply(const DensityVector& base) const;

 private:
  std::vector<std::int8_t> y_;
};

}  // namespace bintopo
