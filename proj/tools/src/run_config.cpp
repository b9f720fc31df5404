#include "bintopo/bench/run_config.hpp"

#include "bintopo/bench/io.hpp"
#include "bintopo/error.hpp"

#include <charconv>
#include <sstream>

namespace bintopo::bench {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(trim(cur));
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size()) {
    throw std::invalid_argument(key + ": expected a number, got '" + v + "'");
  }
  return out;
}

long long to_int(const std::string& key, const std::string& v) {
  long long out = 0;
  auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size()) {
    throw std::invalid_argument(key + ": expected an integer, got '" + v + "'");
  }
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw std::invalid_argument(key + ": expected true or false, got '" + v + "'");
}

CgmPreconditioner to_preconditioner(const std::string& key, const std::string& v) {
  if (v == "none") return CgmPreconditioner::none;
  if (v == "jacobi") return CgmPreconditioner::jacobi;
  if (v == "exact") return CgmPreconditioner::exact;
  throw std::invalid_argument(key + ": expected none, jacobi or exact, got '" + v + "'");
}

CgmEstimator to_estimator(const std::string& key, const std::string& v) {
  if (v == "auto") return CgmEstimator::automatic;
  if (v == "load") return CgmEstimator::load;
  if (v == "displacement") return CgmEstimator::displacement;
  throw std::invalid_argument(key + ": expected auto, load or displacement, got '" + v + "'");
}

VoidMode to_void_mode(const std::string& key, const std::string& v) {
  if (v == "zero") return VoidMode::zero;
  if (v == "compute") return VoidMode::compute;
  throw std::invalid_argument(key + ": expected zero or compute, got '" + v + "'");
}

SensitivityMethod to_method(const std::string& key, const std::string& v) {
  if (v == "naive") return SensitivityMethod::naive;
  if (v == "foci") return SensitivityMethod::foci;
  if (v == "foci_s") return SensitivityMethod::foci_s;
  if (v == "hoci") return SensitivityMethod::hoci;
  if (v == "woodbury") return SensitivityMethod::woodbury;
  if (v == "cgm") return SensitivityMethod::cgm;
  throw std::invalid_argument(key + ": unknown sensitivity method '" + v + "'");
}

SensitivityConfig parse_method_fields(const std::string& spec) {
  const auto parts = split(spec, ':');
  const std::string key = "method '" + spec + "'";
  if (parts.empty()) throw std::invalid_argument("empty method spec");
  SensitivityConfig sc;
  sc.method = to_method(key, parts[0]);
  auto arity = [&](std::size_t lo, std::size_t hi) {
    if (parts.size() < lo || parts.size() > hi) {
      throw std::invalid_argument(key + ": wrong number of fields");
    }
  };
  switch (sc.method) {
    case SensitivityMethod::foci:
      arity(1, 2);
      if (parts.size() == 2) sc.eps_v = to_double(key, parts[1]);
      break;
    case SensitivityMethod::hoci:
      arity(2, 3);
      sc.hoci_order = static_cast<int>(to_int(key, parts[1]));
      if (parts.size() == 3) sc.void_mode = to_void_mode(key, parts[2]);
      break;
    case SensitivityMethod::cgm:
      arity(4, 6);
      sc.cgm.id = static_cast<int>(to_int(key, parts[1]));
      sc.cgm.steps = static_cast<int>(to_int(key, parts[2]));
      sc.cgm.preconditioner = to_preconditioner(key, parts[3]);
      if (parts.size() >= 5) sc.void_mode = to_void_mode(key, parts[4]);
      if (parts.size() == 6) sc.cgm.estimator = to_estimator(key, parts[5]);
      break;
    default:
      arity(1, 1);
  }
  if (sc.method == SensitivityMethod::cgm) {
    try {
      sc.cgm.validate();
    } catch (const Error& e) {
      throw std::invalid_argument(key + ": " + e.what());
    }
  }
  return sc;
}

}  // namespace

SensitivityConfig parse_method_spec(const std::string& spec) {
  try {
    return parse_method_fields(spec);
  } catch (const std::invalid_argument& e) {
    fail(ErrorCode::config, e.what());
  }
}

std::vector<std::pair<std::string, std::string>> parse_key_values(const std::string& text) {
  std::vector<std::pair<std::string, std::string>> out;
  std::istringstream in(text);
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      fail(ErrorCode::config, "line " + std::to_string(n) + ": expected key = value");
    }
    out.emplace_back(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
  }
  return out;
}

void RunConfig::set(const std::string& key, const std::string& v) {
  OptimizerConfig& o = optimizer;
  SensitivityConfig& s = o.sensitivity;
  if (key == "problem") problem = v;
  else if (key == "scale") scale = static_cast<int>(to_int(key, v));
  else if (key == "nx") nx = static_cast<int>(to_int(key, v));
  else if (key == "ny") ny = static_cast<int>(to_int(key, v));
  else if (key == "topology") topology = static_cast<int>(to_int(key, v));
  else if (key == "youngs_modulus") problem_options.youngs_modulus = to_double(key, v);
  else if (key == "poissons_ratio") problem_options.poissons_ratio = to_double(key, v);
  else if (key == "thickness") problem_options.thickness = to_double(key, v);
  else if (key == "load") problem_options.load = to_double(key, v);
  else if (key == "eps_k") problem_options.eps_k = to_double(key, v);
  else if (key == "initial") initial = v;
  else if (key == "er") o.er = to_double(key, v);
  else if (key == "ar_max") o.ar_max = to_double(key, v);
  else if (key == "vf_target") o.vf_target = to_double(key, v);
  else if (key == "tv_max") {
    if (v == "auto") o.tv_max.reset();
    else o.tv_max = static_cast<int>(to_int(key, v));
  }
  else if (key == "filter_radius") o.filter_radius = to_double(key, v);
  else if (key == "momentum") o.momentum = to_bool(key, v);
  else if (key == "patience") o.patience = static_cast<int>(to_int(key, v));
  else if (key == "max_iterations") o.max_iterations = static_cast<int>(to_int(key, v));
  else if (key == "zero_disconnected") o.zero_disconnected = to_bool(key, v);
  else if (key == "refresh_interval") o.refresh_interval = static_cast<int>(to_int(key, v));
  else if (key == "method") s.method = to_method(key, v);
  else if (key == "eps_v") s.eps_v = to_double(key, v);
  else if (key == "hoci_order") s.hoci_order = static_cast<int>(to_int(key, v));
  else if (key == "cgm_case") s.cgm.id = static_cast<int>(to_int(key, v));
  else if (key == "cgm_steps") s.cgm.steps = static_cast<int>(to_int(key, v));
  else if (key == "cgm_preconditioner") s.cgm.preconditioner = to_preconditioner(key, v);
  else if (key == "cgm_estimator") s.cgm.estimator = to_estimator(key, v);
  else if (key == "cgm_tau") s.cgm.tau = to_double(key, v);
  else if (key == "void_mode") s.void_mode = to_void_mode(key, v);
  else if (key == "compare_methods") {
    compare_methods.clear();
    for (const auto& spec : split(v, ',')) {
      if (!spec.empty()) compare_methods.push_back(parse_method_spec(spec));
    }
  }
  else if (key == "exact_method") exact_method = v;
  else if (key == "max_cgm_steps") max_cgm_steps = static_cast<int>(to_int(key, v));
  else if (key == "full_beam") full_beam = to_bool(key, v);
  else if (key == "output_dir") output_dir = v;
  else if (key == "seed") seed = static_cast<std::uint64_t>(to_int(key, v));
  else if (key == "allow_large") allow_large = to_bool(key, v);
  else throw std::invalid_argument(key + ": unknown key");
}

void RunConfig::apply(const std::vector<std::pair<std::string, std::string>>& entries) {
  std::string errors;
  for (const auto& [k, v] : entries) {
    try {
      set(k, v);
    } catch (const std::invalid_argument& e) {
      errors += std::string(errors.empty() ? "" : "; ") + e.what();
    } catch (const Error& e) {
      errors += std::string(errors.empty() ? "" : "; ") + k + ": " + e.what();
    }
  }
  if (!errors.empty()) fail(ErrorCode::config, "invalid configuration: " + errors);
}

RunConfig RunConfig::parse(const std::string& text) {
  RunConfig c;
  c.apply(parse_key_values(text));
  return c;
}

RunConfig RunConfig::load(const std::string& path) { return parse(read_text(path)); }

void RunConfig::validate() const {
  std::string errors;
  auto bad = [&](const std::string& msg) { errors += (errors.empty() ? "" : "; ") + msg; };
  if (problem != "tie_beam_coarse" && problem != "tie_beam_refined" &&
      problem != "cantilever_32x20" && problem != "mbb" && problem != "appendix_b_4x4") {
    bad("problem: unknown problem '" + problem + "'");
  }
  if (scale < 1) bad("scale: must be at least 1");
  if (nx < 2 || ny < 1) bad("nx, ny: mbb needs at least 2 x 1 elements");
  if (topology < 1 || topology > 4) bad("topology: must be 1 to 4");
  if (exact_method != "woodbury" && exact_method != "naive") {
    bad("exact_method: expected woodbury or naive");
  }
  if (max_cgm_steps < 0) bad("max_cgm_steps: must be nonnegative");
  try {
    optimizer.validate();
  } catch (const Error& e) {
    bad(e.what());
  }
  for (const auto& m : compare_methods) {
    try {
      if (m.method == SensitivityMethod::cgm) m.cgm.validate();
    } catch (const Error& e) {
      bad(std::string("compare_methods: ") + e.what());
    }
  }
  if (!errors.empty()) fail(ErrorCode::config, "invalid configuration: " + errors);

  // Element-count guard, checked before anything is assembled.
  const auto m = optimizer.sensitivity.method;
  if ((m == SensitivityMethod::naive || m == SensitivityMethod::woodbury ||
       m == SensitivityMethod::hoci) &&
      !allow_large) {
    check_size_guard(element_count(), false, to_string(m));
  }
}

std::size_t RunConfig::element_count() const {
  if (problem == "tie_beam_coarse") return 100;
  if (problem == "tie_beam_refined") return 100 * static_cast<std::size_t>(scale) * scale;
  if (problem == "cantilever_32x20") return 640;
  if (problem == "mbb") return static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny);
  return 16;
}

Benchmark make_benchmark(const RunConfig& c) {
  c.validate();
  if (c.problem == "tie_beam_coarse") return tie_beam(1, c.problem_options);
  if (c.problem == "tie_beam_refined") return tie_beam(c.scale, c.problem_options);
  if (c.problem == "cantilever_32x20") return cantilever_32x20(c.problem_options);
  if (c.problem == "mbb") return mbb(c.nx, c.ny, c.problem_options);
  return appendix_b_4x4(c.topology, c.problem_options);
}

DensityVector initial_topology(const RunConfig& c, const Benchmark& b) {
  if (c.initial == "problem") return b.initial;
  if (c.initial == "solid") return DensityVector(b.problem.element_count(), true);
  return read_topology_csv(c.initial, b.problem.mesh());
}

}  // namespace bintopo::bench
