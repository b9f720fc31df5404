#pragma once

#include "bintopo/mesh_fem.hpp"

#include <optional>
#include <string>
#include <vector>

namespace bintopo::bench {

struct ProblemOptions {
  // Unset fields fall back to each benchmark's own values.
  std::optional<double> youngs_modulus;
  std::optional<double> poissons_ratio;
  std::optional<double> thickness;
  std::optional<double> load;
  std::optional<double> eps_k;
};

struct Benchmark {
  std::string name;
  FemProblem problem;
  DensityVector initial;
};

// Beam of 3 x 32 unit elements clamped on the left with a 1 x 4 tie standing
// on column 16 and held vertically at its top. `scale` splits every unit
// element into scale x scale elements (1 gives 100 elements).
Benchmark tie_beam(int scale, const ProblemOptions& opt = {});

// 32 x 20 elements of 2.5 mm, clamped left, point load at mid-height of the
// free end. The initial design is a centred horizontal band holding half of
// the elements.
Benchmark cantilever_32x20(const ProblemOptions& opt = {});

// Half MBB beam of nx x ny elements of 4 mm: symmetry on the left edge,
// roller under the bottom-right corner, load at the top-left corner.
Benchmark mbb(int nx, int ny, const ProblemOptions& opt = {});

// 4 x 4 clamped cantilever of 20 x 12.5 mm elements with eps_k = 0.1.
// Topologies 1 to 4 void the element sets {3}, {3,7}, {3,7,2}, {3,7,2,6}
// in column-major, top-to-bottom numbering from 1.
Benchmark appendix_b_4x4(int topology, const ProblemOptions& opt = {});
std::vector<int> appendix_b_voids(int topology);  // 1-based element numbers

}  // namespace bintopo::bench
