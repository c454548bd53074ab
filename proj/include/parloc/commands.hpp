#pragma once

// Command implementations behind tools/parloc. Each command reads its
// inputs from a RunConfig, writes files, prints a report to `out`, and
// signals failure by throwing parloc::Error.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "parloc/config.hpp"
#include "parloc/error.hpp"
#include "parloc/forest_io.hpp"
#include "parloc/fusion_matcher.hpp"
#include "parloc/ingestion.hpp"
#include "parloc/localizer.hpp"
#include "parloc/map_database.hpp"
#include "parloc/pose_solver.hpp"
#include "parloc/rtree_index.hpp"
#include "parloc/synthetic.hpp"

namespace parloc {

// --- exit codes and logging ---------------------------------------------------------------

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitIo = 3;
inline constexpr int kExitParse = 4;
inline constexpr int kExitIntegrity = 5;
inline constexpr int kExitDimension = 6;

inline int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kConfig: return kExitConfig;
    case ErrorKind::kIo: return kExitIo;
    case ErrorKind::kParse: return kExitParse;
    case ErrorKind::kIntegrity: return kExitIntegrity;
    case ErrorKind::kDimension: return kExitDimension;
    case ErrorKind::kInvalidArgument:
    case ErrorKind::kGeometry: return kExitFailure;
  }
  return kExitFailure;
}

enum class LogLevel { kQuiet = 0, kInfo = 1, kDebug = 2 };

/// Verbosity from PARLOC_LOG (quiet, info, debug); info when unset.
inline LogLevel log_level() {
  const char* v = std::getenv("PARLOC_LOG");
  if (v == nullptr) return LogLevel::kInfo;
  const std::string s(v);
  if (s == "quiet" || s == "0") return LogLevel::kQuiet;
  if (s == "debug" || s == "2") return LogLevel::kDebug;
  return LogLevel::kInfo;
}

inline void log(LogLevel level, const std::string& msg) {
  if (static_cast<int>(level) <= static_cast<int>(log_level())) std::cerr << "parloc: " << msg << '\n';
}

// --- helpers ------------------------------------------------------------------------------

namespace detail {

inline const std::string& require_path(const std::string& value, const char* key) {
  if (value.empty()) {
    std::string flag = key;
    for (char& c : flag) {
      if (c == '_') c = '-';
    }
    fail(ErrorKind::kConfig, "missing required --" + flag);
  }
  return value;
}

inline std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

}  // namespace detail

/// (other observation, first descriptor) for every landmark with several
/// descriptors, so delta = first - other.
inline std::vector<MatchedPair> same_landmark_pairs(const MapDatabase& db) {
  std::vector<MatchedPair> pairs;
  for (const auto& lm : db.landmarks()) {
    for (std::size_t k = 1; k < lm.descriptors.size(); ++k) {
      pairs.push_back(MatchedPair{lm.descriptors[k].real, lm.descriptors[0].real});
    }
  }
  return pairs;
}

/// Pairs built by perturbing each database descriptor with N(0, sigma^2)
/// and renormalizing. `storage` keeps the perturbed copies alive.
inline std::vector<MatchedPair> synthetic_pairs(const MapDatabase& db, double sigma, std::uint64_t seed,
                                                std::vector<RealDescriptor>& storage) {
  synth::Rng rng(seed);
  storage.clear();
  for (const auto& lm : db.landmarks()) {
    for (const auto& d : lm.descriptors) storage.push_back(synth::perturb(d.real, sigma, rng));
  }
  std::vector<MatchedPair> pairs;
  std::size_t i = 0;
  for (const auto& lm : db.landmarks()) {
    for (const auto& d : lm.descriptors) pairs.push_back(MatchedPair{storage[i++], d.real});
  }
  return pairs;
}

/// The model for a map: an explicit file, same-landmark pairs, or the
/// synthetic fallback, in that order of preference.
inline PerturbationModel model_for_map(const MapDatabase& db, const RunConfig& cfg) {
  if (!cfg.model_input.empty()) {
    auto in = open_input(cfg.model_input);
    return read_model(in, cfg.model_input);
  }
  const auto pairs = same_landmark_pairs(db);
  if (!pairs.empty()) {
    return estimate_perturbation_model(pairs, cfg.model_tests, cfg.model_samples, cfg.seed);
  }
  if (cfg.synthetic_perturbation > 0.0) {
    std::vector<RealDescriptor> storage;
    const auto syn = synthetic_pairs(db, cfg.synthetic_perturbation, cfg.seed, storage);
    return estimate_perturbation_model(syn, cfg.model_tests, cfg.model_samples, cfg.seed);
  }
  fail(ErrorKind::kConfig,
       "no landmark has two or more descriptors, so no matched pairs exist; pass "
       "--synthetic-perturbation SIGMA to fit the model on synthetic pairs, or --model-input FILE");
}

inline MapDatabase load_configured_map(const RunConfig& cfg) {
  return load_map(detail::require_path(cfg.landmarks, "landmarks"),
                  detail::require_path(cfg.frames, "frames"));
}

// --- commands -----------------------------------------------------------------------------

inline void cmd_build_index(const RunConfig& cfg, std::ostream& out) {
  cfg.validate();
  const std::string& forest_path = detail::require_path(cfg.forest, "forest");
  const MapDatabase db = load_configured_map(cfg);
  if (db.empty()) fail(ErrorKind::kIntegrity, "map has no landmarks");
  log(LogLevel::kDebug, "loaded " + std::to_string(db.landmarks().size()) + " landmarks");

  const auto entries = db.index_entries();
  const Forest forest = build_forest(entries, cfg.tree_count, cfg.tree_params(), cfg.seed);
  const PerturbationModel model = model_for_map(db, cfg);
  save_forest(forest_path, forest);
  write_text_file(cfg.model_path(), format_model(model));

  out << "landmarks " << db.landmarks().size() << "\n";
  out << "descriptors " << entries.size() << "\n";
  out << "trees " << forest.size() << " depth " << forest.depth() << "\n";
  out << "nonempty_leaves " << forest.nonempty_leaf_count() << "\n";
  out << "model mu " << format_number(model.mu) << " sigma " << format_number(model.sigma)
      << (model.degenerate ? " degenerate" : "") << "\n";
  out << "leaf_occupancy size count\n";
  for (const auto& [size, count] : leaf_occupancy_histogram(forest)) {
    out << "  " << size << ' ' << count << "\n";
  }
}

inline void cmd_fit_model(const RunConfig& cfg, std::ostream& out) {
  cfg.validate();
  const std::string& model_path = detail::require_path(cfg.model, "model");
  const MapDatabase db = load_configured_map(cfg);
  const auto pairs = same_landmark_pairs(db);
  PerturbationModel model;
  std::vector<RealDescriptor> storage;
  if (!pairs.empty()) {
    model = estimate_perturbation_model(pairs, cfg.model_tests, cfg.model_samples, cfg.seed);
    out << "pairs " << pairs.size() << " (same landmark)\n";
  } else if (cfg.synthetic_perturbation > 0.0) {
    const auto syn = synthetic_pairs(db, cfg.synthetic_perturbation, cfg.seed, storage);
    model = estimate_perturbation_model(syn, cfg.model_tests, cfg.model_samples, cfg.seed);
    out << "pairs " << syn.size() << " (synthetic, sigma " << format_number(cfg.synthetic_perturbation)
        << ")\n";
  } else {
    fail(ErrorKind::kConfig,
         "every landmark has a single descriptor; rerun with --synthetic-perturbation SIGMA "
         "to fit on synthetic pairs");
  }
  write_text_file(model_path, format_model(model));
  out << "mu " << format_number(model.mu) << "\nsigma " << format_number(model.sigma) << "\n";
  if (model.degenerate) out << "warning: sigma floored, samples had no spread\n";
}

inline void cmd_localize(const RunConfig& cfg, std::ostream& out) {
  cfg.validate();
  const std::string& forest_path = detail::require_path(cfg.forest, "forest");
  const std::string& queries_path = detail::require_path(cfg.queries, "queries");
  const std::string& results_path = detail::require_path(cfg.results, "results");
  const MapDatabase db = load_configured_map(cfg);
  const Forest forest = load_forest(forest_path);
  PerturbationModel model;
  {
    const std::string path = cfg.model_input.empty() ? cfg.model_path() : cfg.model_input;
    auto in = open_input(path);
    model = read_model(in, path);
  }
  const LocalizationMap map{db, forest, model};
  map.validate();
  const auto queries = load_queries(queries_path);
  for (const auto& q : queries) {
    for (const auto& kp : q.keypoints) {
      require_same_dim(kp.descriptor.real.size(), db.local_dim(),
                       "query " + std::to_string(q.id) + " keypoint descriptor");
    }
    if (cfg.search.mode != SearchMode::kTreeOnly) {
      require_same_dim(q.global.size(), db.global_dim(), "query " + std::to_string(q.id) + " global descriptor");
    }
  }

  BatchSummary summary;
  const auto results = localize_batch(queries, map, cfg.search, cfg.ransac, &summary);
  write_text_file(results_path, format_results(results));
  out << "mode " << to_string(cfg.search.mode) << "\n";
  out << "queries " << summary.queries << "\n";
  out << "registered " << summary.registered << "\n";
  out << "insufficient_matches " << summary.insufficient << "\n";
  out << "ransac_failed " << summary.ransac_failed << "\n";
  out << "correspondences " << summary.correspondences << "\n";
}

struct EvaluationReport {
  std::vector<RecallThreshold> thresholds;
  std::vector<double> recall;
  std::size_t queries = 0;
  std::size_t registered = 0;
};

inline EvaluationReport evaluate_results(std::span<const ResultRecord> results,
                                         const std::map<std::uint64_t, CameraPose>& truth,
                                         std::span<const RecallThreshold> thresholds) {
  std::map<std::uint64_t, std::optional<CameraPose>> estimated;
  EvaluationReport rep;
  for (const auto& r : results) {
    std::optional<CameraPose> pose;
    if (r.status == LocalizationStatus::kOk) {
      pose = r.pose;
      ++rep.registered;
    }
    if (!estimated.emplace(r.query_id, pose).second) {
      fail(ErrorKind::kIntegrity, "duplicate result for query " + std::to_string(r.query_id));
    }
  }
  rep.thresholds.assign(thresholds.begin(), thresholds.end());
  rep.recall = recall_at_thresholds(estimated, truth, thresholds);
  rep.queries = truth.size();
  return rep;
}

inline std::string format_recall_csv(const EvaluationReport& rep) {
  std::string csv = "translation_m,rotation_deg,recall_percent\n";
  for (std::size_t i = 0; i < rep.thresholds.size(); ++i) {
    csv += format_number(rep.thresholds[i].translation_m) + "," +
           format_number(rep.thresholds[i].rotation_deg) + "," + detail::fixed(rep.recall[i], 2) + "\n";
  }
  return csv;
}

inline void cmd_evaluate(const RunConfig& cfg, std::ostream& out) {
  const std::string& results_path = detail::require_path(cfg.results, "results");
  const std::string& truth_path = detail::require_path(cfg.ground_truth, "ground_truth");
  const auto thresholds = parse_thresholds(cfg.thresholds);
  std::vector<ResultRecord> results;
  {
    auto in = open_input(results_path);
    results = read_results(in, results_path);
  }
  std::map<std::uint64_t, CameraPose> truth;
  {
    auto in = open_input(truth_path);
    truth = read_ground_truth(in, truth_path);
  }
  const EvaluationReport rep = evaluate_results(results, truth, thresholds);

  out << "queries " << rep.queries << ", registered " << rep.registered << "\n\n";
  out << "  threshold           recall\n";
  for (std::size_t i = 0; i < thresholds.size(); ++i) {
    std::string label = format_number(thresholds[i].translation_m) + " m, " +
                        format_number(thresholds[i].rotation_deg) + " deg";
    label.resize(std::max<std::size_t>(label.size(), 18), ' ');
    out << "  " << label << "  " << detail::fixed(rep.recall[i], 2) << " %\n";
  }
  const std::string csv = format_recall_csv(rep);
  out << "\n" << csv;
  if (!cfg.csv.empty()) write_text_file(cfg.csv, csv);
}

/// Writes a synthetic map, queries and ground truth into cfg.output_dir.
inline void cmd_synth(const RunConfig& cfg, std::ostream& out) {
  cfg.validate();
  const std::filesystem::path dir = detail::require_path(cfg.output_dir, "output_dir");
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) fail(ErrorKind::kIo, "cannot create " + dir.string() + ": " + ec.message());

  synth::SceneParams sp;
  sp.seed = cfg.seed;
  synth::QuerySet qs;
  synth::Scene scene;
  if (cfg.synth_kind == "bimodal") {
    synth::BimodalParams bp;
    bp.per_group = cfg.synth_queries;
    sp.places = std::max(cfg.synth_places, 2 * cfg.synth_queries);
    scene = synth::make_scene(sp);
    qs = synth::make_bimodal_queries(scene, bp, splitmix64(cfg.seed));
  } else {
    sp.places = cfg.synth_places;
    if (sp.places < 1) fail(ErrorKind::kConfig, "synth_places must be >= 1");
    scene = synth::make_scene(sp);
    qs = synth::make_easy_queries(scene, cfg.synth_queries, splitmix64(cfg.seed));
  }
  const MapDatabase db = scene.database();
  save_map(db, (dir / "landmarks.txt").string(), (dir / "frames.txt").string());
  write_text_file((dir / "queries.txt").string(), format_queries(qs.queries));
  write_text_file((dir / "truth.txt").string(), format_ground_truth(qs.truth));
  out << "wrote " << db.landmarks().size() << " landmarks, " << db.frames().size() << " frames, "
      << qs.queries.size() << " queries to " << dir.string() << "\n";
}

/// Coefficient sweep on the synthetic textured-plane fixture.
inline std::vector<SweepRow> run_synthetic_sweep(const RunConfig& cfg) {
  cfg.validate();
  const auto coefficients = parse_coefficients(cfg.coefficients);
  synth::SweepFixtureParams fp;
  fp.seed = cfg.seed;
  const synth::SweepFixture fixture = synth::make_sweep_fixture(fp);
  const auto queries = fixture.image_queries();
  return coefficient_sweep(
      queries,
      [&](double c) { return fixture.map_at(c, cfg.tree_count, cfg.tree_params()); },
      coefficients, cfg.search, cfg.ransac);
}

inline void cmd_sweep(const RunConfig& cfg, std::ostream& out) {
  const auto rows = run_synthetic_sweep(cfg);
  std::string csv = "coefficient,registered,queries\n";
  for (const auto& r : rows) {
    csv += format_number(r.coefficient) + "," + std::to_string(r.registered) + "," +
           std::to_string(r.queries) + "\n";
  }
  out << csv;
  if (!cfg.csv.empty()) write_text_file(cfg.csv, csv);
}

// --- selftest -----------------------------------------------------------------------------

namespace detail {

struct CheckLog {
  std::ostream& out;
  std::size_t failures = 0;

  void check(const std::string& name, bool ok, const std::string& detail_text = "") {
    out << (ok ? "PASS " : "FAIL ") << name;
    if (!ok && !detail_text.empty()) out << ": " << detail_text;
    out << "\n";
    if (!ok) ++failures;
  }
};

}  // namespace detail

/// Invariant checks on generated fixtures. Returns true when all pass.
inline bool cmd_selftest(const RunConfig& cfg, std::ostream& out) {
  detail::CheckLog log_{out};
  const std::uint64_t seed = cfg.seed;
  synth::Rng rng(seed);

  // Weighted Hamming: zero iff signs agree, never above L2.
  {
    bool ok = true;
    for (int i = 0; i < 2000 && ok; ++i) {
      const auto a = synth::random_unit(64, rng);
      const auto b = i % 2 ? synth::random_unit(64, rng) : synth::perturb(a, 0.01, rng);
      const double wh = weighted_hamming_distance(a, b);
      const bool same = binarize(a) == binarize(b);
      ok = (wh == 0.0) == same && wh <= l2_distance(a, b);
    }
    log_.check("weighted_hamming_bounds", ok);
  }

  // Leaf probabilities of a small tree sum to one.
  synth::SceneParams sp;
  sp.places = 10;
  sp.local_dim = 64;
  sp.global_dim = 16;
  sp.seed = seed;
  const synth::Scene scene = synth::make_scene(sp);
  const MapDatabase db = scene.database();
  const auto entries = db.index_entries();
  {
    const Forest small = build_forest(entries, 1, TreeParams{8, 16, 1.0}, seed);
    const auto q = synth::random_unit(64, rng);
    const PerturbationModel m{0.0, 0.05, false};
    double total = 0.0;
    for (std::uint64_t path = 0; path < (1u << 8); ++path) {
      total += std::exp(leaf_log_probability(small.tree(0), q, path, 8, m));
    }
    log_.check("leaf_probabilities_sum_to_one", std::abs(total - 1.0) <= 1e-9,
               "sum " + format_number(total));
  }

  // Text and binary containers round-trip.
  {
    std::istringstream lin(format_landmarks(db)), fin(format_frames(db));
    const MapDatabase again = MapDatabase::build(read_landmarks(lin, "landmarks"), read_frames(fin, "frames"));
    log_.check("map_text_round_trip",
               format_landmarks(again) == format_landmarks(db) && format_frames(again) == format_frames(db));
    const Forest forest = build_forest(entries, 2, TreeParams{12, 32, 1.0}, seed);
    std::ostringstream a, b;
    write_forest(a, forest);
    std::istringstream in(a.str());
    write_forest(b, read_forest(in));
    const Forest rebuilt = build_forest(entries, 2, TreeParams{12, 32, 1.0}, seed);
    std::ostringstream c;
    write_forest(c, rebuilt);
    log_.check("forest_round_trip", a.str() == b.str());
    log_.check("forest_build_deterministic", a.str() == c.str());
  }

  // Noiseless pose recovery.
  {
    const auto p = synth::pnp_problem(30, 0, 0.0, seed);
    RansacParams rp;
    rp.seed = seed;
    const auto r = ransac_pnp(p.matches, p.intrinsics, rp);
    bool ok = r.status == LocalizationStatus::kOk && r.pose;
    std::string msg = "status " + std::string(to_string(r.status));
    if (ok) {
      const PoseError e = pose_error(*r.pose, p.truth);
      ok = e.translation_m <= 1e-6 && e.rotation_deg <= 1e-6;
      msg = "error " + format_number(e.translation_m) + " m " + format_number(e.rotation_deg) + " deg";
    }
    log_.check("noiseless_pose", ok, msg);
  }

  // End to end on an easy scene.
  {
    const synth::QuerySet qs = synth::make_easy_queries(scene, 10, seed + 1);
    const Forest forest = build_forest(entries, 6, TreeParams{12, 32, 1.0}, seed);
    const PerturbationModel model =
        estimate_perturbation_model(same_landmark_pairs(db), 10, 10000, seed);
    const LocalizationMap map{db, forest, model};
    BatchSummary s;
    localize_batch(qs.queries, map, SearchConfig{}, RansacParams{}, &s);
    log_.check("end_to_end_registration", s.registered >= 9,
               std::to_string(s.registered) + " of " + std::to_string(s.queries) + " registered");
  }

  out << (log_.failures == 0 ? "all checks passed\n" : std::to_string(log_.failures) + " check(s) failed\n");
  return log_.failures == 0;
}

}  // namespace parloc
