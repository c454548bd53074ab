#pragma once

#include <algorithm>
#include <span>
#include <utility>
#include <vector>

#include "parloc/core_types.hpp"
#include "parloc/error.hpp"
#include "parloc/map_database.hpp"

namespace parloc {

inline constexpr std::size_t kDefaultKnnFrames = 20;

/// Read-only view of the database frames used for global retrieval.
class FrameIndex {
 public:
  explicit FrameIndex(std::span<const FrameRecord> frames) : frames_(frames) {
    if (!frames_.empty()) dim_ = frames_.front().global_descriptor.size();
    for (const auto& f : frames_) require_same_dim(f.global_descriptor.size(), dim_, "FrameIndex");
  }
  explicit FrameIndex(const MapDatabase& db) : FrameIndex(std::span<const FrameRecord>(db.frames())) {}

  std::span<const FrameRecord> frames() const { return frames_; }
  std::size_t dim() const { return dim_; }
  bool empty() const { return frames_.empty(); }

 private:
  std::span<const FrameRecord> frames_;
  std::size_t dim_ = 0;
};

struct FrameHit {
  FrameId frame = 0;
  double distance = 0.0;
};

/// k nearest frames by L2 distance, ascending, ties to the smaller frame id.
/// Linear scan; frame counts are small enough that an index does not pay.
inline std::vector<FrameHit> knn_frames(std::span<const double> query, const FrameIndex& index,
                                        std::size_t k = kDefaultKnnFrames) {
  if (index.empty()) fail(ErrorKind::kInvalidArgument, "knn_frames: empty frame index");
  if (k < 1) fail(ErrorKind::kInvalidArgument, "knn_frames: k must be >= 1");
  require_same_dim(query.size(), index.dim(), "knn_frames");

  std::vector<FrameHit> hits;
  hits.reserve(index.frames().size());
  for (const auto& f : index.frames()) {
    hits.push_back(FrameHit{f.id, l2_distance(query, f.global_descriptor)});
  }
  auto closer = [](const FrameHit& a, const FrameHit& b) {
    return a.distance != b.distance ? a.distance < b.distance : a.frame < b.frame;
  };
  const std::size_t keep = std::min(k, hits.size());
  std::partial_sort(hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(keep), hits.end(),
                    closer);
  hits.resize(keep);
  return hits;
}

/// Deduplicated union of the frames' visible landmarks, sorted by id.
inline std::vector<LandmarkId> frame_candidates(std::span<const FrameId> frame_ids,
                                                const MapDatabase& db) {
  std::vector<LandmarkId> out;
  for (FrameId id : frame_ids) {
    const FrameRecord& f = db.frame(id);
    out.insert(out.end(), f.visible_landmarks.begin(), f.visible_landmarks.end());
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

inline std::vector<LandmarkId> frame_candidates(std::span<const FrameHit> hits,
                                                const MapDatabase& db) {
  std::vector<FrameId> ids;
  ids.reserve(hits.size());
  for (const auto& h : hits) ids.push_back(h.frame);
  return frame_candidates(std::span<const FrameId>(ids), db);
}

}  // namespace parloc
