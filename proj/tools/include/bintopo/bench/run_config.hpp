#pragma once

#include "bintopo/beso.hpp"
#include "bintopo/bench/problems.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace bintopo::bench {

// Flat key = value configuration. Keys mirror the field names below.
struct RunConfig {
  std::string problem = "tie_beam_coarse";
  int scale = 2;        // tie_beam_refined
  int nx = 300;         // mbb
  int ny = 100;         // mbb
  int topology = 1;     // appendix_b_4x4
  ProblemOptions problem_options;
  // "problem" (benchmark default), "solid", or a topology.csv path.
  std::string initial = "problem";

  OptimizerConfig optimizer;

  // compare
  std::vector<SensitivityConfig> compare_methods;
  std::string exact_method = "woodbury";
  // cgm-steps; 0 means the DOF count
  int max_cgm_steps = 0;

  bool full_beam = false;
  std::string output_dir = "out";
  std::uint64_t seed = 0;
  bool allow_large = false;

  static RunConfig parse(const std::string& text);
  static RunConfig load(const std::string& path);
  // Applies `key = value` pairs; every bad key is reported in one error.
  void apply(const std::vector<std::pair<std::string, std::string>>& entries);
  void set(const std::string& key, const std::string& value);
  void validate() const;
  // Element count of the configured problem, known without building it.
  std::size_t element_count() const;
};

// "foci", "foci:1e-6", "foci_s", "naive", "woodbury", "hoci:5[:zero|compute]",
// "cgm:<case>:<steps>:<none|jacobi|exact>[:zero|compute][:load|displacement]"
SensitivityConfig parse_method_spec(const std::string& spec);

std::vector<std::pair<std::string, std::string>> parse_key_values(const std::string& text);

Benchmark make_benchmark(const RunConfig& config);
DensityVector initial_topology(const RunConfig& config, const Benchmark& benchmark);

}  // namespace bintopo::bench
