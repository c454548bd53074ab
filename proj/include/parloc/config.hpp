#pragma once

// Run configuration shared by the command-line tools. Every field has a
// snake_case key usable in a key=value config file and as a --dashed-key
// command-line flag.

#include <algorithm>
#include <cstdint>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "parloc/error.hpp"
#include "parloc/fusion_matcher.hpp"
#include "parloc/pose_solver.hpp"
#include "parloc/rtree_index.hpp"
#include "parloc/text_io.hpp"

namespace parloc {

struct RunConfig {
  // files
  std::string landmarks;
  std::string frames;
  std::string forest;
  std::string model;  // sidecar; defaults to <forest>.model
  std::string model_input;
  std::string queries;
  std::string results;
  std::string ground_truth;
  std::string csv;
  std::string output_dir;

  // index
  std::size_t tree_count = kDefaultTreeCount;
  std::size_t tree_depth = kDefaultTreeDepth;
  std::size_t candidate_dims = kDefaultCandidateDims;
  double group_split_weight = 1.0;
  std::uint64_t seed = 0;

  // perturbation model
  std::size_t model_tests = 10;
  std::size_t model_samples = 100000;
  double synthetic_perturbation = 0.0;  // > 0 enables the synthetic-pair fallback

  SearchConfig search;
  RansacParams ransac;

  // synthetic data
  std::string synth_kind = "easy";
  std::size_t synth_places = 20;
  std::size_t synth_queries = 20;
  std::string coefficients = "4,8,13,20,32";
  std::string thresholds = "0.25:2,0.5:5,5:10";  // translation_m:rotation_deg pairs

  std::string model_path() const { return model.empty() ? forest + ".model" : model; }
  TreeParams tree_params() const { return TreeParams{tree_depth, candidate_dims, group_split_weight}; }

  void validate() const {
    if (tree_count < 1) fail(ErrorKind::kConfig, "tree_count must be >= 1");
    if (tree_depth < 1 || tree_depth > kMaxTreeDepth) {
      fail(ErrorKind::kConfig, "tree_depth must be in [1, " + std::to_string(kMaxTreeDepth) + "]");
    }
    if (candidate_dims < 1) fail(ErrorKind::kConfig, "candidate_dims must be >= 1");
    if (!(group_split_weight >= 0.0)) fail(ErrorKind::kConfig, "group_split_weight must be >= 0");
    if (model_tests < 1) fail(ErrorKind::kConfig, "model_tests must be >= 1");
    if (model_samples < 2) fail(ErrorKind::kConfig, "model_samples must be >= 2");
    if (!(synthetic_perturbation >= 0.0)) fail(ErrorKind::kConfig, "synthetic_perturbation must be >= 0");
    if (synth_kind != "easy" && synth_kind != "bimodal") {
      fail(ErrorKind::kConfig, "synth_kind must be easy or bimodal");
    }
    search.validate();
    ransac.validate();
  }
};

namespace detail {

template <class T>
T parse_config_value(const std::string& key, const std::string& text);

template <>
inline std::string parse_config_value<std::string>(const std::string&, const std::string& text) {
  return text;
}

template <>
inline double parse_config_value<double>(const std::string& key, const std::string& text) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    fail(ErrorKind::kConfig, key + ": expected a number, got '" + text + "'");
  }
  return v;
}

template <>
inline std::uint64_t parse_config_value<std::uint64_t>(const std::string& key, const std::string& text) {
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    fail(ErrorKind::kConfig, key + ": expected a nonnegative integer, got '" + text + "'");
  }
  return v;
}

template <>
inline bool parse_config_value<bool>(const std::string& key, const std::string& text) {
  if (text == "1" || text == "true" || text == "yes") return true;
  if (text == "0" || text == "false" || text == "no") return false;
  fail(ErrorKind::kConfig, key + ": expected true or false, got '" + text + "'");
}

inline std::string format_config_value(const std::string& v) { return v; }
inline std::string format_config_value(double v) { return format_number(v); }
inline std::string format_config_value(std::uint64_t v) { return std::to_string(v); }
inline std::string format_config_value(bool v) { return v ? "true" : "false"; }

}  // namespace detail

/// One configurable field: parse into / format out of a RunConfig.
struct ConfigKey {
  std::string name;
  std::string help;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

namespace detail {

template <class Field, class Stored = Field>
ConfigKey make_key(std::string name, std::string help, Field RunConfig::*member) {
  return ConfigKey{
      name, std::move(help),
      [member, name](RunConfig& c, const std::string& text) {
        c.*member = static_cast<Field>(parse_config_value<Stored>(name, text));
      },
      [member](const RunConfig& c) { return format_config_value(static_cast<Stored>(c.*member)); }};
}

template <class Field, class Stored = Field, class Sub>
ConfigKey make_sub_key(std::string name, std::string help, Sub RunConfig::*outer, Field Sub::*member) {
  return ConfigKey{
      name, std::move(help),
      [outer, member, name](RunConfig& c, const std::string& text) {
        (c.*outer).*member = static_cast<Field>(parse_config_value<Stored>(name, text));
      },
      [outer, member](const RunConfig& c) {
        return format_config_value(static_cast<Stored>((c.*outer).*member));
      }};
}

}  // namespace detail

inline const std::vector<ConfigKey>& config_keys() {
  using detail::make_key;
  using detail::make_sub_key;
  using U = std::uint64_t;
  static const std::vector<ConfigKey> keys = [] {
    std::vector<ConfigKey> k;
    k.push_back(make_key("landmarks", "landmarks file", &RunConfig::landmarks));
    k.push_back(make_key("frames", "frames file", &RunConfig::frames));
    k.push_back(make_key("forest", "forest container file", &RunConfig::forest));
    k.push_back(make_key("model", "perturbation model sidecar (default <forest>.model)", &RunConfig::model));
    k.push_back(make_key("model_input", "existing model to use instead of estimating one", &RunConfig::model_input));
    k.push_back(make_key("queries", "query file", &RunConfig::queries));
    k.push_back(make_key("results", "result file", &RunConfig::results));
    k.push_back(make_key("ground_truth", "ground-truth pose file", &RunConfig::ground_truth));
    k.push_back(make_key("csv", "also write the recall table as CSV to this file", &RunConfig::csv));
    k.push_back(make_key("output_dir", "directory for generated files", &RunConfig::output_dir));
    k.push_back(make_key<std::size_t, U>("tree_count", "number of random trees", &RunConfig::tree_count));
    k.push_back(make_key<std::size_t, U>("tree_depth", "depth of each tree", &RunConfig::tree_depth));
    k.push_back(make_key<std::size_t, U>("candidate_dims", "dimensions scored per node", &RunConfig::candidate_dims));
    k.push_back(make_key("group_split_weight", "weight of the group-split term", &RunConfig::group_split_weight));
    k.push_back(make_key<std::uint64_t>("seed", "seed for index construction and sampling", &RunConfig::seed));
    k.push_back(make_key<std::size_t, U>("model_tests", "dimensions sampled for the model", &RunConfig::model_tests));
    k.push_back(make_key<std::size_t, U>("model_samples", "pairs drawn per sampled dimension", &RunConfig::model_samples));
    k.push_back(make_key("synthetic_perturbation", "sigma of synthetic pairs when landmarks have one descriptor",
                         &RunConfig::synthetic_perturbation));
    k.push_back(make_sub_key<std::size_t, U>("max_leaves", "leaves visited per keypoint", &RunConfig::search,
                                             &SearchConfig::max_leaves));
    k.push_back(make_sub_key<std::size_t, U>("knn_frames", "frames retrieved per query", &RunConfig::search,
                                             &SearchConfig::knn_frames_k));
    k.push_back(make_sub_key("ratio_threshold", "ratio-test threshold", &RunConfig::search,
                             &SearchConfig::ratio_threshold));
    k.push_back(ConfigKey{"mode", "fused, tree_only or retrieval_only",
                          [](RunConfig& c, const std::string& t) { c.search.mode = parse_search_mode(t); },
                          [](const RunConfig& c) { return std::string(to_string(c.search.mode)); }});
    k.push_back(make_sub_key("strict_ratio", "reject matches without a runner-up", &RunConfig::search,
                             &SearchConfig::strict_ratio));
    k.push_back(make_sub_key("inlier_threshold", "RANSAC inlier threshold in pixels", &RunConfig::ransac,
                             &RansacParams::inlier_threshold_px));
    k.push_back(make_sub_key<std::size_t, U>("max_iterations", "RANSAC iteration cap", &RunConfig::ransac,
                                             &RansacParams::max_iterations));
    k.push_back(make_sub_key("confidence", "RANSAC confidence", &RunConfig::ransac, &RansacParams::confidence));
    k.push_back(make_sub_key<std::size_t, U>("min_inliers", "inliers required for success", &RunConfig::ransac,
                                             &RansacParams::min_inliers));
    k.push_back(make_sub_key<std::uint64_t>("ransac_seed", "RANSAC seed", &RunConfig::ransac, &RansacParams::seed));
    k.push_back(make_key("synth_kind", "easy or bimodal", &RunConfig::synth_kind));
    k.push_back(make_key<std::size_t, U>("synth_places", "places in the generated scene", &RunConfig::synth_places));
    k.push_back(make_key<std::size_t, U>("synth_queries", "queries per group", &RunConfig::synth_queries));
    k.push_back(make_key("coefficients", "comma-separated patch coefficients", &RunConfig::coefficients));
    k.push_back(make_key("thresholds", "comma-separated meters:degrees recall bounds", &RunConfig::thresholds));
    return k;
  }();
  return keys;
}

inline const ConfigKey& config_key(const std::string& name) {
  for (const auto& k : config_keys()) {
    if (k.name == name) return k;
  }
  fail(ErrorKind::kConfig, "unknown config key '" + name + "'");
}

inline void apply_config_value(RunConfig& cfg, const std::string& key, const std::string& value) {
  config_key(key).set(cfg, value);
}

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  const auto e = s.find_last_not_of(" \t\r");
  return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

}  // namespace detail

/// key = value lines; blank lines and '#' comments are ignored.
inline void read_config(std::istream& in, const std::string& name, RunConfig& cfg) {
  DataLines lines(in, name);
  std::string line;
  while (lines.next(line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) fail(ErrorKind::kConfig, lines.where() + ": expected key = value");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    try {
      apply_config_value(cfg, key, value);
    } catch (const Error& e) {
      fail(ErrorKind::kConfig, lines.where() + ": " + e.what());
    }
  }
}

inline void load_config(const std::string& path, RunConfig& cfg) {
  auto in = open_input(path);
  read_config(in, path, cfg);
}

inline std::string format_config(const RunConfig& cfg) {
  std::string out = "# parloc run configuration\n";
  for (const auto& k : config_keys()) out += k.name + " = " + k.get(cfg) + "\n";
  return out;
}

inline std::vector<double> parse_coefficients(const std::string& text) {
  std::vector<double> out;
  using detail::trim;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    out.push_back(detail::parse_config_value<double>("coefficients", trim(item)));
    if (!(out.back() > 0.0)) fail(ErrorKind::kConfig, "coefficients must be > 0");
  }
  if (out.empty()) fail(ErrorKind::kConfig, "coefficients list is empty");
  return out;
}

inline std::vector<RecallThreshold> parse_thresholds(const std::string& text) {
  std::vector<RecallThreshold> out;
  using detail::trim;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto colon = item.find(':');
    if (colon == std::string::npos) {
      fail(ErrorKind::kConfig, "thresholds: expected meters:degrees, got '" + item + "'");
    }
    RecallThreshold t{detail::parse_config_value<double>("thresholds", trim(item.substr(0, colon))),
                      detail::parse_config_value<double>("thresholds", trim(item.substr(colon + 1)))};
    if (!(t.translation_m >= 0.0) || !(t.rotation_deg >= 0.0)) {
      fail(ErrorKind::kConfig, "thresholds must be nonnegative");
    }
    out.push_back(t);
  }
  if (out.empty()) fail(ErrorKind::kConfig, "thresholds list is empty");
  return out;
}

}  // namespace parloc
