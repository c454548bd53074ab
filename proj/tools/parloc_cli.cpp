// parloc: command-line front end for map indexing, localization and evaluation.

#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "parloc/commands.hpp"

namespace {

using parloc::RunConfig;

struct Subcommand {
  CLI::App* app = nullptr;
  std::string config_path;
  std::map<std::string, std::string> values;
};

std::string dashed(std::string key) {
  for (char& c : key) {
    if (c == '_') c = '-';
  }
  return key;
}

Subcommand add_subcommand(CLI::App& root, const std::string& name, const std::string& help) {
  Subcommand sub;
  sub.app = root.add_subcommand(name, help);
  return sub;
}

void add_keys(Subcommand& sub, const std::vector<std::string>& keys) {
  sub.app->add_option("--config", sub.config_path, "key = value configuration file");
  for (const auto& key : keys) {
    const auto& k = parloc::config_key(key);
    sub.app->add_option("--" + dashed(key), sub.values[key], k.help);
  }
}

/// Config file first, then flags given on the command line.
RunConfig resolve(const Subcommand& sub) {
  RunConfig cfg;
  if (!sub.config_path.empty()) parloc::load_config(sub.config_path, cfg);
  for (const auto& [key, value] : sub.values) {
    if (sub.app->count("--" + dashed(key)) > 0) parloc::apply_config_value(cfg, key, value);
  }
  return cfg;
}

const std::vector<std::string> kMapKeys = {"landmarks", "frames"};
const std::vector<std::string> kIndexKeys = {"tree_count", "tree_depth", "candidate_dims",
                                             "group_split_weight", "seed"};
const std::vector<std::string> kModelKeys = {"model", "model_input", "model_tests", "model_samples",
                                             "synthetic_perturbation"};
const std::vector<std::string> kSearchKeys = {"max_leaves", "knn_frames", "ratio_threshold", "mode",
                                              "strict_ratio", "inlier_threshold", "max_iterations",
                                              "confidence", "min_inliers", "ransac_seed"};

std::vector<std::string> concat(std::initializer_list<std::vector<std::string>> parts) {
  std::vector<std::string> out;
  for (const auto& p : parts) out.insert(out.end(), p.begin(), p.end());
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"parloc: visual localization with random-tree and global-retrieval matching"};
  app.require_subcommand(1);

  std::vector<std::pair<Subcommand, std::vector<std::string>>> subs;
  auto make = [&](const std::string& name, const std::string& help, std::vector<std::string> keys) {
    Subcommand s = add_subcommand(app, name, help);
    subs.emplace_back(std::move(s), std::move(keys));
  };
  make("build-index", "build the random-tree forest and perturbation model for a map",
       concat({kMapKeys, {"forest"}, kIndexKeys, kModelKeys}));
  make("localize", "localize every query in a query file",
       concat({kMapKeys, {"forest", "model", "model_input", "queries", "results"}, kSearchKeys}));
  make("evaluate", "recall of a result file against ground truth",
       {"results", "ground_truth", "thresholds", "csv"});
  make("fit-model", "estimate the perturbation model from matched descriptor pairs",
       concat({kMapKeys, {"model", "model_tests", "model_samples", "synthetic_perturbation", "seed"}}));
  make("synth", "write a synthetic map, query file and ground truth",
       {"output_dir", "synth_kind", "synth_places", "synth_queries", "seed"});
  make("sweep", "registered queries per patch coefficient on a synthetic image fixture",
       concat({{"coefficients", "csv", "seed", "tree_count", "tree_depth", "candidate_dims"}, kSearchKeys}));
  make("selftest", "run invariant checks on generated fixtures", {"seed"});
  make("print-config", "print the effective configuration",
       concat({kMapKeys, {"forest", "queries", "results", "ground_truth"}, kIndexKeys, kModelKeys,
               kSearchKeys}));
  for (auto& [sub, keys] : subs) add_keys(sub, keys);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? parloc::kExitOk : parloc::kExitConfig;
  }

  try {
    for (auto& [sub, keys] : subs) {
      if (!sub.app->parsed()) continue;
      const RunConfig cfg = resolve(sub);
      const std::string name = sub.app->get_name();
      if (name == "build-index") parloc::cmd_build_index(cfg, std::cout);
      else if (name == "localize") parloc::cmd_localize(cfg, std::cout);
      else if (name == "evaluate") parloc::cmd_evaluate(cfg, std::cout);
      else if (name == "fit-model") parloc::cmd_fit_model(cfg, std::cout);
      else if (name == "synth") parloc::cmd_synth(cfg, std::cout);
      else if (name == "sweep") parloc::cmd_sweep(cfg, std::cout);
      else if (name == "selftest") return parloc::cmd_selftest(cfg, std::cout) ? parloc::kExitOk : parloc::kExitFailure;
      else if (name == "print-config") {
        cfg.validate();
        std::cout << parloc::format_config(cfg);
      }
    }
  } catch (const parloc::Error& e) {
    parloc::log(parloc::LogLevel::kQuiet, std::string("error: ") + e.what());
    return parloc::exit_code(e.kind());
  } catch (const std::exception& e) {
    parloc::log(parloc::LogLevel::kQuiet, std::string("error: ") + e.what());
    return parloc::kExitFailure;
  }
  return parloc::kExitOk;
}
