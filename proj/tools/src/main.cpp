#include "bintopo/bench/io.hpp"
#include "bintopo/bench/studies.hpp"
#include "bintopo/error.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace {

using bintopo::bench::RunConfig;

RunConfig build_config(const std::string& path, const std::vector<std::string>& overrides,
                       const std::string& out, bool allow_large) {
  RunConfig cfg = path.empty() ? RunConfig{} : RunConfig::load(path);
  std::vector<std::pair<std::string, std::string>> kv;
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos) {
      bintopo::fail(bintopo::ErrorCode::config, "--override expects key=value, got '" + o + "'");
    }
    kv.emplace_back(o.substr(0, eq), o.substr(eq + 1));
  }
  cfg.apply(kv);
  if (!out.empty()) cfg.output_dir = out;
  if (allow_large) cfg.allow_large = true;
  cfg.validate();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Discrete topology optimization with finite variation sensitivities"};
  app.require_subcommand(1);

  std::string config_path, out_dir;
  std::vector<std::string> overrides;
  bool allow_large = false;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "key = value configuration file");
    sub->add_option("--out", out_dir, "output directory (overrides output_dir)");
    sub->add_option("--override", overrides, "key=value, repeatable");
    sub->add_flag("--allow-large", allow_large, "lift the element-count guard");
  };
  auto* opt = app.add_subcommand("optimize", "run the optimizer");
  auto* cmp = app.add_subcommand("compare", "compare sensitivity methods on one topology");
  auto* steps = app.add_subcommand("cgm-steps", "CG steps needed per visited topology");
  auto* norms = app.add_subcommand("norms", "per-element operator norms");
  for (auto* s : {opt, cmp, steps, norms}) add_common(s);

  CLI11_PARSE(app, argc, argv);

  try {
    const RunConfig cfg = build_config(config_path, overrides, out_dir, allow_large);
    if (opt->parsed()) {
      const auto rep = bintopo::bench::run_optimize(cfg, cfg.output_dir);
      std::cout << "best compliance " << bintopo::bench::format_number(rep.reported_best)
                << " at iteration " << rep.state.best_iteration << " (" << rep.state.stop_reason
                << ")\n";
    } else if (cmp->parsed()) {
      const auto rep = bintopo::bench::run_sensitivity_compare(cfg, cfg.output_dir);
      for (std::size_t k = 0; k < rep.labels.size(); ++k) {
        std::cout << rep.labels[k] << " relative l2 error "
                  << bintopo::bench::format_number(rep.l2_error[k]) << '\n';
      }
    } else if (steps->parsed()) {
      const auto rows = bintopo::bench::run_cgm_steps_study(cfg, cfg.output_dir);
      std::cout << rows.size() << " rows written\n";
    } else if (norms->parsed()) {
      const auto rep = bintopo::bench::run_norm_study(cfg, cfg.output_dir);
      std::cout << "mean norm " << bintopo::bench::format_number(rep.mean_a) << " over "
                << rep.norm_a.size() << " elements\n";
    }
  } catch (const bintopo::Error& e) {
    std::cerr << "error [" << bintopo::to_string(e.code()) << "]: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
