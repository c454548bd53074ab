#pragma once

// Per-keypoint nearest-neighbor matching over the union of two candidate
// sources: leaves of the random-tree forest ranked by the perturbation model,
// and landmarks visible in the database frames retrieved by global descriptor.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "parloc/core_types.hpp"
#include "parloc/error.hpp"
#include "parloc/global_retrieval.hpp"
#include "parloc/map_database.hpp"
#include "parloc/rtree_index.hpp"

namespace parloc {

enum class SearchMode { kFused, kTreeOnly, kRetrievalOnly };

inline const char* to_string(SearchMode m) {
  switch (m) {
    case SearchMode::kFused: return "fused";
    case SearchMode::kTreeOnly: return "tree_only";
    case SearchMode::kRetrievalOnly: return "retrieval_only";
  }
  return "unknown";
}

inline SearchMode parse_search_mode(const std::string& s) {
  if (s == "fused") return SearchMode::kFused;
  if (s == "tree_only") return SearchMode::kTreeOnly;
  if (s == "retrieval_only") return SearchMode::kRetrievalOnly;
  fail(ErrorKind::kConfig, "unknown search mode '" + s + "' (fused|tree_only|retrieval_only)");
}

struct SearchConfig {
  std::size_t max_leaves = kDefaultMaxLeaves;
  std::size_t knn_frames_k = kDefaultKnnFrames;
  double ratio_threshold = 0.8;
  SearchMode mode = SearchMode::kFused;
  // Reject matches whose candidate set holds a single landmark (no runner-up).
  bool strict_ratio = false;

  void validate() const {
    if (max_leaves < 1) fail(ErrorKind::kConfig, "max_leaves must be >= 1");
    if (knn_frames_k < 1) fail(ErrorKind::kConfig, "knn_frames_k must be >= 1");
    if (!(ratio_threshold > 0.0 && ratio_threshold <= 1.0)) {
      fail(ErrorKind::kConfig, "ratio_threshold must be in (0, 1]");
    }
  }
};

struct Correspondence {
  std::size_t query_index = 0;
  LandmarkId landmark_id = 0;
  double distance = 0.0;
  double ratio = 0.0;

  friend bool operator==(const Correspondence&, const Correspondence&) = default;
};

/// Everything the online matcher reads. Non-owning.
struct LocalizationMap {
  const MapDatabase& db;
  const Forest& forest;
  PerturbationModel model;

  void validate() const {
    if (db.empty()) fail(ErrorKind::kInvalidArgument, "localization map has no landmarks");
    if (forest.empty()) fail(ErrorKind::kInvalidArgument, "localization map has no trees");
    require_same_dim(forest.dim(), db.local_dim(), "forest vs map descriptor dimension");
    if (forest.entry_count() != db.descriptor_count()) {
      fail(ErrorKind::kIntegrity, "forest indexes " + std::to_string(forest.entry_count()) +
                                      " descriptors but the map has " +
                                      std::to_string(db.descriptor_count()));
    }
    model.validate();
  }
};

/// Sorted, deduplicated union.
inline std::vector<LandmarkId> fuse_candidates(std::span<const LandmarkId> tree_set,
                                               std::span<const LandmarkId> frame_set) {
  std::vector<LandmarkId> out(tree_set.begin(), tree_set.end());
  out.insert(out.end(), frame_set.begin(), frame_set.end());
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

/// Landmarks owning the entries in the forest's most probable leaves.
inline std::vector<LandmarkId> tree_candidates(const Forest& forest, std::span<const double> query,
                                               const PerturbationModel& model,
                                               std::size_t max_leaves) {
  const PrioritySearchResult r = priority_search(forest, query, model, max_leaves);
  std::vector<LandmarkId> ids;
  ids.reserve(r.candidates.size());
  for (const auto& e : r.candidates) ids.push_back(e.landmark);
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());  // candidates are sorted
  return ids;
}

struct FeatureMatch {
  LandmarkId landmark = 0;
  double distance = 0.0;
  double ratio = 0.0;
};

/// Linear search over every descriptor of every candidate landmark. The
/// runner-up is the closest descriptor of a different landmark; with no
/// runner-up the ratio is 0 (accepted unless `strict`).
inline std::optional<FeatureMatch> match_query_feature(std::span<const double> query,
                                                       std::span<const LandmarkId> candidates,
                                                       const MapDatabase& db,
                                                       double ratio_threshold,
                                                       bool strict = false) {
  constexpr double kInf = std::numeric_limits<double>::infinity();
  double best = kInf;
  double second = kInf;
  LandmarkId best_id = 0;
  bool found = false;
  for (LandmarkId id : candidates) {
    const LandmarkRecord& lm = db.landmark(id);
    double nearest = kInf;
    for (const auto& d : lm.descriptors) nearest = std::min(nearest, l2_distance(query, d.real));
    if (!found || nearest < best || (nearest == best && id < best_id)) {
      if (found) second = std::min(second, best);
      best = nearest;
      best_id = id;
      found = true;
    } else {
      second = std::min(second, nearest);
    }
  }
  if (!found) return std::nullopt;
  if (second == kInf && strict) return std::nullopt;
  double ratio = 0.0;
  if (second != kInf) ratio = second > 0.0 ? best / second : 1.0;
  if (ratio > ratio_threshold) return std::nullopt;
  return FeatureMatch{best_id, best, ratio};
}

struct MatchStats {
  std::size_t keypoints = 0;
  std::size_t frame_candidates = 0;      // shared by all keypoints
  std::size_t tree_candidates_sum = 0;   // summed over keypoints
  std::size_t fused_candidates_sum = 0;  // summed over keypoints
  std::size_t accepted = 0;
};

/// Candidates for one keypoint under `config.mode`, given the image-level
/// frame candidate set.
inline std::vector<LandmarkId> keypoint_candidates(std::span<const double> query,
                                                   std::span<const LandmarkId> frame_set,
                                                   const LocalizationMap& map,
                                                   const SearchConfig& config,
                                                   std::size_t* tree_count = nullptr) {
  std::vector<LandmarkId> tree_set;
  if (config.mode != SearchMode::kRetrievalOnly) {
    tree_set = tree_candidates(map.forest, query, map.model, config.max_leaves);
  }
  if (tree_count) *tree_count = tree_set.size();
  if (config.mode == SearchMode::kTreeOnly) return tree_set;
  return fuse_candidates(tree_set, frame_set);
}

/// Frame-branch candidates for an image (empty in tree_only mode).
inline std::vector<LandmarkId> image_frame_candidates(std::span<const double> query_global,
                                                      const LocalizationMap& map,
                                                      const SearchConfig& config) {
  if (config.mode == SearchMode::kTreeOnly) return {};
  const auto hits = knn_frames(query_global, FrameIndex(map.db), config.knn_frames_k);
  return frame_candidates(std::span<const FrameHit>(hits), map.db);
}

/// Matches all keypoints of one query image. Output is in keypoint order;
/// the same landmark may be matched by several keypoints.
inline std::vector<Correspondence> match_image(std::span<const QueryKeypoint> keypoints,
                                               std::span<const double> query_global,
                                               const LocalizationMap& map,
                                               const SearchConfig& config,
                                               MatchStats* stats = nullptr) {
  config.validate();
  map.validate();
  for (const auto& kp : keypoints) {
    require_same_dim(kp.descriptor.real.size(), map.db.local_dim(), "match_image keypoint");
  }
  if (config.mode != SearchMode::kTreeOnly) {
    require_same_dim(query_global.size(), map.db.global_dim(), "match_image global descriptor");
  }

  const std::vector<LandmarkId> frame_set = image_frame_candidates(query_global, map, config);
  MatchStats local;
  local.keypoints = keypoints.size();
  local.frame_candidates = frame_set.size();

  std::vector<Correspondence> out;
  for (std::size_t i = 0; i < keypoints.size(); ++i) {
    const auto& query = keypoints[i].descriptor.real;
    std::size_t tree_count = 0;
    const auto candidates = keypoint_candidates(query, frame_set, map, config, &tree_count);
    local.tree_candidates_sum += tree_count;
    local.fused_candidates_sum += candidates.size();
    const auto m =
        match_query_feature(query, candidates, map.db, config.ratio_threshold, config.strict_ratio);
    if (m) out.push_back(Correspondence{i, m->landmark, m->distance, m->ratio});
  }
  local.accepted = out.size();
  if (stats) *stats = local;
  return out;
}

}  // namespace parloc
