#include <CLI11.hpp>
#include <fmt/format.h>

#include <iostream>
#include <optional>
#include <string>

#include "alqr/config.hpp"
#include "alqr/harness.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitRunner = 3;

void print_summary(const nlohmann::json& a) {
  fmt::print("seeds {} completed {} failures {}\n", a.value("seeds", 0), a.value("completed", 0),
             a["failures"].size());
  const auto& r = a["regret"];
  if (r.contains("slope") && r["slope"].is_number())
    fmt::print("regret slope over [{}, {}]: {:.4f}\n", r["slope_window"][0].get<double>(),
               r["slope_window"][1].get<double>(), r["slope"].get<double>());
  const auto& e = a["estimation"];
  if (e.contains("slope") && e["slope"].is_number())
    fmt::print("epoch-start error slope: {:.4f}\n", e["slope"].get<double>());
  const auto& c = a["coverage"];
  if (c.value("pairs", 0) > 0)
    fmt::print("coverage: {}/{} = {:.4f}\n", c["contained"].get<long>(), c["pairs"].get<long>(),
               c["frequency"].get<double>());
  const auto& ep = a["epochs"];
  if (ep.contains("mean")) fmt::print("epochs per run: mean {:.2f}\n", ep["mean"].get<double>());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adaptive LQ control experiment harness"};
  std::string config_path, mode, criterion, constants, seeds, out;
  std::optional<long> T;
  app.add_option("--config", config_path, "JSON experiment config")->check(CLI::ExistingFile);
  app.add_option("--mode", mode, "warmup|aslo|doubling|full");
  app.add_option("--criterion", criterion, "det2|fixed-beta|adaptive|relaxed-seq");
  app.add_option("--constants", constants, "theory|practical");
  app.add_option("--T", T, "horizon of the adaptive phase");
  app.add_option("--seeds", seeds, "seed range a..b");
  app.add_option("--out", out, "output directory");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }

  alqr::ExperimentConfig cfg;
  try {
    if (!config_path.empty()) {
      cfg = alqr::load_config(config_path);
    } else {
      cfg = alqr::config_from_json(nlohmann::json{{"model", {{"benchmark", "bench-2x2"}}}});
    }
    if (!mode.empty()) cfg.mode = alqr::parse_mode(mode);
    if (!criterion.empty()) cfg.schedule.criterion = alqr::parse_criterion(criterion);
    if (!constants.empty()) cfg.schedule.constants_mode = alqr::parse_constants_mode(constants);
    if (T) {
      cfg.T = *T;
      // checkpoints past the new horizon are dropped
      std::erase_if(cfg.checkpoints, [&](long t) { return t > cfg.T; });
    }
    if (!seeds.empty()) cfg.seeds = alqr::parse_seed_range(seeds);
    if (!out.empty()) cfg.out = out;
    alqr::validate_config(cfg);
  } catch (const alqr::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  }

  try {
    auto rep = alqr::run_experiment(cfg);
    print_summary(rep.data);
    fmt::print("wrote {}\n", rep.path);
    return rep.failed_seeds > 0 ? kExitRunner : 0;
  } catch (const alqr::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "run failed: " << e.what() << '\n';
    return kExitRunner;
  }
}
