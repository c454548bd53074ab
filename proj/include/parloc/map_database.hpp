#pragma once

#include <algorithm>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "parloc/core_types.hpp"
#include "parloc/error.hpp"
#include "parloc/rtree_index.hpp"

namespace parloc {

/// Landmarks and database frames with referential integrity in both
/// directions. Immutable once built.
class MapDatabase {
 public:
  MapDatabase() = default;

  /// Validates the tables and derives each landmark's observing frames from
  /// the frames' visibility lists. Any observing_frames already present on
  /// the input landmarks are discarded.
  static MapDatabase build(std::vector<LandmarkRecord> landmarks, std::vector<FrameRecord> frames) {
    MapDatabase db;
    db.landmarks_ = std::move(landmarks);
    db.frames_ = std::move(frames);
    db.index_and_validate();
    return db;
  }

  std::size_t local_dim() const { return local_dim_; }
  std::size_t global_dim() const { return global_dim_; }
  const std::vector<LandmarkRecord>& landmarks() const { return landmarks_; }
  const std::vector<FrameRecord>& frames() const { return frames_; }
  bool empty() const { return landmarks_.empty(); }

  const LandmarkRecord* find_landmark(LandmarkId id) const {
    auto it = landmark_index_.find(id);
    return it == landmark_index_.end() ? nullptr : &landmarks_[it->second];
  }
  const LandmarkRecord& landmark(LandmarkId id) const {
    const auto* lm = find_landmark(id);
    if (lm == nullptr) fail(ErrorKind::kIntegrity, "unknown landmark id " + std::to_string(id));
    return *lm;
  }
  const FrameRecord* find_frame(FrameId id) const {
    auto it = frame_index_.find(id);
    return it == frame_index_.end() ? nullptr : &frames_[it->second];
  }
  const FrameRecord& frame(FrameId id) const {
    const auto* f = find_frame(id);
    if (f == nullptr) fail(ErrorKind::kIntegrity, "unknown frame id " + std::to_string(id));
    return *f;
  }

  /// Every (landmark, descriptor) pair, in landmark file order.
  std::vector<IndexEntry> index_entries() const {
    std::vector<IndexEntry> out;
    for (const auto& lm : landmarks_) {
      for (std::size_t k = 0; k < lm.descriptors.size(); ++k) {
        out.push_back(IndexEntry{TreeEntry{lm.id, static_cast<std::uint32_t>(k)},
                                 lm.descriptors[k].binary});
      }
    }
    return out;
  }

  std::size_t descriptor_count() const {
    std::size_t n = 0;
    for (const auto& lm : landmarks_) n += lm.descriptors.size();
    return n;
  }

 private:
  void index_and_validate() {
    std::vector<std::string> problems;
    auto note = [&](std::string s) {
      if (problems.size() < 20) problems.push_back(std::move(s));
    };

    for (std::size_t i = 0; i < landmarks_.size(); ++i) {
      auto& lm = landmarks_[i];
      if (!landmark_index_.emplace(lm.id, i).second) {
        note("duplicate landmark id " + std::to_string(lm.id));
      }
      lm.observing_frames.clear();
      if (lm.descriptors.empty()) note("landmark " + std::to_string(lm.id) + " has no descriptors");
      for (const auto& d : lm.descriptors) {
        if (local_dim_ == 0) local_dim_ = d.real.size();
        if (d.real.size() != local_dim_) {
          fail(ErrorKind::kDimension, "landmark " + std::to_string(lm.id) +
                                          " descriptor dimension " + std::to_string(d.real.size()) +
                                          " != " + std::to_string(local_dim_));
        }
        if (d.binary != binarize(d.real)) {
          note("landmark " + std::to_string(lm.id) + " binary descriptor disagrees with signs");
        }
      }
    }

    for (std::size_t i = 0; i < frames_.size(); ++i) {
      const auto& f = frames_[i];
      if (!frame_index_.emplace(f.id, i).second) note("duplicate frame id " + std::to_string(f.id));
      if (global_dim_ == 0) global_dim_ = f.global_descriptor.size();
      if (f.global_descriptor.size() != global_dim_) {
        fail(ErrorKind::kDimension, "frame " + std::to_string(f.id) + " global dimension " +
                                        std::to_string(f.global_descriptor.size()) + " != " +
                                        std::to_string(global_dim_));
      }
      std::vector<LandmarkId> seen = f.visible_landmarks;
      std::sort(seen.begin(), seen.end());
      if (std::adjacent_find(seen.begin(), seen.end()) != seen.end()) {
        note("frame " + std::to_string(f.id) + " lists a landmark twice");
      }
      for (LandmarkId id : f.visible_landmarks) {
        auto it = landmark_index_.find(id);
        if (it == landmark_index_.end()) {
          note("frame " + std::to_string(f.id) + " references unknown landmark " + std::to_string(id));
          continue;
        }
        landmarks_[it->second].observing_frames.push_back(f.id);
      }
    }

    for (auto& lm : landmarks_) {
      std::sort(lm.observing_frames.begin(), lm.observing_frames.end());
      lm.observing_frames.erase(std::unique(lm.observing_frames.begin(), lm.observing_frames.end()),
                                lm.observing_frames.end());
      if (lm.observing_frames.empty()) {
        note("landmark " + std::to_string(lm.id) + " is not visible in any frame");
      }
    }

    if (!problems.empty()) {
      std::string msg = "map integrity check failed:";
      for (const auto& p : problems) msg += "\n  " + p;
      fail(ErrorKind::kIntegrity, msg);
    }
  }

  std::vector<LandmarkRecord> landmarks_;
  std::vector<FrameRecord> frames_;
  std::unordered_map<LandmarkId, std::size_t> landmark_index_;
  std::unordered_map<FrameId, std::size_t> frame_index_;
  std::size_t local_dim_ = 0;
  std::size_t global_dim_ = 0;
};

}  // namespace parloc
