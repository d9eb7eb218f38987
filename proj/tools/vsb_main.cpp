#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "vsb/errors.hpp"
#include "vsb/pipeline.hpp"

int main(int argc, char** argv) {
  CLI::App app{
      "vsb: limit cycles, Malkin bifurcation functions and variables-scaling "
      "continuation for periodically perturbed autonomous systems"};

  std::string config_path;
  std::string stage_list;
  std::string out_dir;
  unsigned seed = 0;
  bool have_seed = false;
  bool strict = false;

  app.add_option("--config", config_path, "JSON run configuration")->required();
  app.add_option("--stage", stage_list,
                 "comma-separated stage subset: cycle,malkin,scaling,validate");
  app.add_option("--out", out_dir, "output directory (overrides config)");
  app.add_option("--seed", seed, "seed for random probes")->each([&](const std::string&) {
    have_seed = true;
  });
  app.add_flag("--strict", strict, "treat accuracy warnings as errors");

  CLI11_PARSE(app, argc, argv);

  try {
    vsb::RunConfig cfg = vsb::load_config_file(config_path);
    if (!stage_list.empty()) {
      cfg.stages.clear();
      std::size_t pos = 0;
      while (pos != std::string::npos) {
        const std::size_t comma = stage_list.find(',', pos);
        cfg.stages.push_back(stage_list.substr(
            pos, comma == std::string::npos ? std::string::npos : comma - pos));
        pos = comma == std::string::npos ? comma : comma + 1;
      }
      for (const auto& s : cfg.stages)
        if (s != "cycle" && s != "malkin" && s != "scaling" && s != "validate")
          throw vsb::ConfigError("--stage: unknown stage '" + s + "'");
    }
    if (!out_dir.empty()) cfg.outputs = out_dir;
    if (have_seed) cfg.seed = seed;
    if (strict) cfg.strict = true;

    vsb::RunResult result = vsb::run(cfg);
    if (!result.message.empty() && result.message != "ok")
      std::cerr << result.message << "\n";
    return result.exit_code;
  } catch (const vsb::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
