#pragma once

// Per-query pipeline: match keypoints against the map, then RANSAC-PnP.

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "parloc/fusion_matcher.hpp"
#include "parloc/image.hpp"
#include "parloc/ingestion.hpp"
#include "parloc/pose_solver.hpp"

namespace parloc {

struct QueryOutcome {
  LocalizationResult result;
  std::vector<Correspondence> correspondences;
  MatchStats stats;
};

/// RANSAC seed for one query, so a query's result does not depend on its
/// position in the batch.
inline std::uint64_t query_seed(std::uint64_t seed, std::uint64_t query_id) {
  return splitmix64(seed ^ splitmix64(query_id));
}

inline QueryOutcome localize_query(const QueryImage& query, const LocalizationMap& map,
                                   const SearchConfig& search, RansacParams ransac) {
  QueryOutcome out;
  out.correspondences = match_image(query.keypoints, query.global, map, search, &out.stats);
  std::vector<PointMatch> matches;
  matches.reserve(out.correspondences.size());
  for (const auto& c : out.correspondences) {
    const Vec3& p = map.db.landmark(c.landmark_id).position;
    const Pixel& px = query.keypoints[c.query_index].pixel;
    matches.push_back(PointMatch{Eigen::Vector2d(px.u, px.v), Eigen::Vector3d(p.x, p.y, p.z)});
  }
  ransac.seed = query_seed(ransac.seed, query.id);
  if (matches.size() < ransac.min_inliers) {
    out.result.status = LocalizationStatus::kInsufficientMatches;
    return out;
  }
  out.result = ransac_pnp(matches, query.intrinsics, ransac);
  return out;
}

inline ResultRecord to_result_record(std::uint64_t query_id, const LocalizationResult& r) {
  ResultRecord rec;
  rec.query_id = query_id;
  rec.status = r.status;
  if (r.status == LocalizationStatus::kOk && r.pose) rec.pose = *r.pose;
  rec.inliers = r.status == LocalizationStatus::kOk ? r.inlier_indices.size() : 0;
  return rec;
}

struct BatchSummary {
  std::size_t queries = 0;
  std::size_t registered = 0;
  std::size_t insufficient = 0;
  std::size_t ransac_failed = 0;
  std::size_t correspondences = 0;
};

/// Localizes every query in input order. Per-query failures are reported
/// through the status field.
inline std::vector<ResultRecord> localize_batch(std::span<const QueryImage> queries,
                                                const LocalizationMap& map,
                                                const SearchConfig& search,
                                                const RansacParams& ransac,
                                                BatchSummary* summary = nullptr) {
  BatchSummary s;
  std::vector<ResultRecord> out;
  out.reserve(queries.size());
  for (const auto& q : queries) {
    const QueryOutcome o = localize_query(q, map, search, ransac);
    out.push_back(to_result_record(q.id, o.result));
    ++s.queries;
    s.correspondences += o.correspondences.size();
    switch (o.result.status) {
      case LocalizationStatus::kOk: ++s.registered; break;
      case LocalizationStatus::kInsufficientMatches: ++s.insufficient; break;
      case LocalizationStatus::kRansacFailed: ++s.ransac_failed; break;
    }
  }
  if (summary) *summary = s;
  return out;
}

// --- coefficient sweep ----------------------------------------------------------------------

/// A query given as an image plus keypoint locations; descriptors are
/// computed from patches at each swept coefficient.
struct ImageQuery {
  std::uint64_t id = 0;
  CameraIntrinsics intrinsics;
  GlobalDescriptor global;
  const GrayImage* image = nullptr;
  std::vector<KeypointGeometry> keypoints;
};

/// Keypoints whose patch fits in the image, with patch descriptors.
/// Patches without contrast are dropped as well.
inline QueryImage describe_image_query(const ImageQuery& q, double coefficient) {
  QueryImage out;
  out.id = q.id;
  out.intrinsics = q.intrinsics;
  out.global = q.global;
  for (const auto& kp : q.keypoints) {
    const auto patch = try_extract_patch(*q.image, kp, coefficient);
    if (!patch) continue;
    auto desc = patch_descriptor(*patch);
    if (!desc) continue;
    QueryKeypoint qk;
    qk.pixel = kp.pixel;
    qk.orientation = kp.orientation;
    qk.scale = kp.scale;
    qk.descriptor = DescriptorPair::from_real(*std::move(desc));
    out.keypoints.push_back(std::move(qk));
  }
  return out;
}

/// The map side of one sweep step. Owning, unlike LocalizationMap.
struct SweepMap {
  MapDatabase db;
  Forest forest;
  PerturbationModel model;
};

struct SweepRow {
  double coefficient = 0.0;
  std::size_t registered = 0;
  std::size_t queries = 0;
};

/// Registered-query count per coefficient. `map_for` supplies the map whose
/// descriptors were extracted with the same coefficient; an empty map
/// registers nothing.
inline std::vector<SweepRow> coefficient_sweep(std::span<const ImageQuery> queries,
                                               const std::function<SweepMap(double)>& map_for,
                                               std::span<const double> coefficients,
                                               const SearchConfig& search,
                                               const RansacParams& ransac) {
  std::vector<SweepRow> rows;
  for (double coefficient : coefficients) {
    if (!(coefficient > 0.0)) fail(ErrorKind::kConfig, "sweep coefficients must be > 0");
    SweepRow row{coefficient, 0, queries.size()};
    if (!queries.empty()) {
      const SweepMap sm = map_for(coefficient);
      const LocalizationMap map{sm.db, sm.forest, sm.model};
      for (const auto& q : queries) {
        if (sm.db.empty()) break;  // every database patch left the image
        const QueryImage described = describe_image_query(q, coefficient);
        if (described.keypoints.size() < ransac.min_inliers) continue;
        const QueryOutcome o = localize_query(described, map, search, ransac);
        if (o.result.status == LocalizationStatus::kOk) ++row.registered;
      }
    }
    rows.push_back(row);
  }
  return rows;
}

/// Same sweep against one fixed map.
inline std::vector<SweepRow> coefficient_sweep(std::span<const ImageQuery> queries,
                                               const LocalizationMap& map,
                                               std::span<const double> coefficients,
                                               const SearchConfig& search,
                                               const RansacParams& ransac) {
  std::vector<SweepRow> rows;
  for (double coefficient : coefficients) {
    if (!(coefficient > 0.0)) fail(ErrorKind::kConfig, "sweep coefficients must be > 0");
    SweepRow row{coefficient, 0, queries.size()};
    for (const auto& q : queries) {
      const QueryImage described = describe_image_query(q, coefficient);
      if (described.keypoints.size() < ransac.min_inliers) continue;
      if (localize_query(described, map, search, ransac).result.status == LocalizationStatus::kOk) {
        ++row.registered;
      }
    }
    rows.push_back(row);
  }
  return rows;
}

}  // namespace parloc
