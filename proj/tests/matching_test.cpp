#include <algorithm>
#include <random>
#include <set>
#include <vector>

#include <gtest/gtest.h>

#include "parloc/fusion_matcher.hpp"
#include "parloc/global_retrieval.hpp"
#include "parloc/synthetic.hpp"

namespace parloc {
namespace {

using synth::Rng;

LandmarkRecord landmark(LandmarkId id, std::vector<RealDescriptor> descs) {
  LandmarkRecord lm;
  lm.id = id;
  lm.position = Vec3{static_cast<double>(id), 0.0, 1.0};
  for (auto& d : descs) lm.descriptors.push_back(DescriptorPair::from_real(std::move(d)));
  return lm;
}

FrameRecord frame(FrameId id, GlobalDescriptor g, std::vector<LandmarkId> visible) {
  return FrameRecord{id, std::move(g), std::move(visible)};
}

// Landmarks 1..n with one random descriptor each, all visible in frame 1.
MapDatabase simple_db(std::size_t n, std::size_t dim, Rng& rng) {
  std::vector<LandmarkRecord> lms;
  std::vector<LandmarkId> ids;
  for (std::size_t i = 1; i <= n; ++i) {
    lms.push_back(landmark(i, {synth::random_unit(dim, rng)}));
    ids.push_back(i);
  }
  std::vector<FrameRecord> frames{frame(1, synth::random_unit<GlobalDescriptor>(8, rng), ids)};
  return MapDatabase::build(std::move(lms), std::move(frames));
}

TEST(KnnFramesTest, ExactMatchIsFirstAtZero) {
  Rng rng(1);
  std::vector<FrameRecord> frames;
  for (FrameId id = 1; id <= 30; ++id) frames.push_back(frame(id, synth::random_unit<GlobalDescriptor>(16, rng), {}));
  const FrameIndex index(frames);
  const auto hits = knn_frames(frames[7].global_descriptor, index, 1);
  ASSERT_EQ(hits.size(), 1u);
  EXPECT_EQ(hits[0].frame, 8u);
  EXPECT_EQ(hits[0].distance, 0.0);
}

TEST(KnnFramesTest, MatchesFullSortOracle) {
  Rng rng(2);
  std::vector<FrameRecord> frames;
  for (FrameId id = 1; id <= 500; ++id) frames.push_back(frame(id, synth::random_unit<GlobalDescriptor>(32, rng), {}));
  const FrameIndex index(frames);
  for (int t = 0; t < 10; ++t) {
    const auto q = synth::random_unit<GlobalDescriptor>(32, rng);
    std::vector<std::pair<double, FrameId>> all;
    std::vector<std::pair<double, FrameId>> by_cosine;
    for (const auto& f : frames) {
      all.emplace_back(l2_distance(q, f.global_descriptor), f.id);
      double dot = 0.0;
      for (std::size_t k = 0; k < 32; ++k) dot += q[k] * f.global_descriptor[k];
      by_cosine.emplace_back(-dot, f.id);
    }
    std::sort(all.begin(), all.end());
    std::sort(by_cosine.begin(), by_cosine.end());
    const auto hits = knn_frames(q, index, 20);
    ASSERT_EQ(hits.size(), 20u);
    for (std::size_t i = 0; i < 20; ++i) {
      EXPECT_EQ(hits[i].frame, all[i].second);
      EXPECT_EQ(hits[i].distance, all[i].first);
      EXPECT_EQ(hits[i].frame, by_cosine[i].second);
    }
  }
}

TEST(KnnFramesTest, LargeKReturnsAllSortedWithIdTies) {
  const auto g = GlobalDescriptor(std::vector<double>{1.0, 0.0});
  std::vector<FrameRecord> frames{frame(5, g, {}), frame(2, g, {}),
                                  frame(9, GlobalDescriptor(std::vector<double>{0.0, 1.0}), {})};
  const auto hits = knn_frames(g, FrameIndex(frames), 10);
  ASSERT_EQ(hits.size(), 3u);
  EXPECT_EQ(hits[0].frame, 2u);
  EXPECT_EQ(hits[1].frame, 5u);
  EXPECT_EQ(hits[2].frame, 9u);
}

TEST(KnnFramesTest, Errors) {
  Rng rng(3);
  std::vector<FrameRecord> frames{frame(1, synth::random_unit<GlobalDescriptor>(4, rng), {})};
  EXPECT_THROW(knn_frames(synth::random_unit<GlobalDescriptor>(4, rng), FrameIndex(std::span<const FrameRecord>()), 1), Error);
  EXPECT_THROW(knn_frames(synth::random_unit<GlobalDescriptor>(4, rng), FrameIndex(frames), 0), Error);
  EXPECT_THROW(knn_frames(synth::random_unit<GlobalDescriptor>(3, rng), FrameIndex(frames), 1), Error);
}

TEST(FrameCandidatesTest, UnionWithoutDuplicates) {
  Rng rng(4);
  std::vector<LandmarkRecord> lms;
  for (LandmarkId id = 1; id <= 6; ++id) lms.push_back(landmark(id, {synth::random_unit(4, rng)}));
  std::vector<FrameRecord> frames{frame(1, synth::random_unit<GlobalDescriptor>(4, rng), {3, 1, 2}),
                                  frame(2, synth::random_unit<GlobalDescriptor>(4, rng), {2, 4, 5, 6})};
  const auto db = MapDatabase::build(lms, frames);
  const std::vector<FrameId> one{1}, both{1, 2};
  EXPECT_EQ(frame_candidates(std::span<const FrameId>(one), db), (std::vector<LandmarkId>{1, 2, 3}));
  EXPECT_EQ(frame_candidates(std::span<const FrameId>(both), db),
            (std::vector<LandmarkId>{1, 2, 3, 4, 5, 6}));
  const std::vector<FrameId> unknown{7};
  EXPECT_THROW(frame_candidates(std::span<const FrameId>(unknown), db), Error);
}

TEST(FrameCandidatesTest, MatchesSetUnionOnScene) {
  synth::SceneParams p;
  p.places = 30;
  p.landmarks_per_place = 10;
  p.local_dim = 32;
  p.global_dim = 16;
  const auto scene = synth::make_scene(p);
  const auto db = scene.database();
  Rng rng(5);
  const auto hits = knn_frames(synth::random_unit<GlobalDescriptor>(16, rng), FrameIndex(db), 20);
  std::set<LandmarkId> oracle;
  for (const auto& h : hits) {
    for (LandmarkId id : db.frame(h.frame).visible_landmarks) oracle.insert(id);
  }
  const auto got = frame_candidates(std::span<const FrameHit>(hits), db);
  EXPECT_EQ(got, std::vector<LandmarkId>(oracle.begin(), oracle.end()));
}

TEST(FuseCandidatesTest, SortedUnion) {
  const std::vector<LandmarkId> a{5, 1, 3}, b{3, 7};
  EXPECT_EQ(fuse_candidates(a, b), (std::vector<LandmarkId>{1, 3, 5, 7}));
  EXPECT_EQ(fuse_candidates(a, {}), (std::vector<LandmarkId>{1, 3, 5}));
  EXPECT_TRUE(fuse_candidates({}, {}).empty());
}

TEST(MatchQueryFeatureTest, EmptyCandidatesGiveNoMatch) {
  Rng rng(6);
  const auto db = simple_db(3, 8, rng);
  EXPECT_FALSE(match_query_feature(synth::random_unit(8, rng), {}, db, 0.8).has_value());
}

TEST(MatchQueryFeatureTest, SingleCandidateHasRatioZero) {
  Rng rng(7);
  const auto db = simple_db(3, 8, rng);
  const std::vector<LandmarkId> one{2};
  const auto m = match_query_feature(synth::random_unit(8, rng), one, db, 0.8);
  ASSERT_TRUE(m.has_value());
  EXPECT_EQ(m->landmark, 2u);
  EXPECT_EQ(m->ratio, 0.0);
  EXPECT_FALSE(match_query_feature(synth::random_unit(8, rng), one, db, 0.8, true).has_value());
}

TEST(MatchQueryFeatureTest, PlantedDistancesGiveExpectedRatio) {
  // Query e0; landmark 1 at distance 0.1 and landmark 2 at distance 0.5.
  auto at_distance = [](double d) {
    const double c = 1.0 - d * d / 2.0;
    return RealDescriptor(std::vector<double>{c, std::sqrt(1.0 - c * c), 0.0});
  };
  const RealDescriptor q(std::vector<double>{1.0, 0.0, 0.0});
  std::vector<LandmarkRecord> lms{landmark(1, {at_distance(0.1)}), landmark(2, {at_distance(0.5)})};
  std::vector<FrameRecord> frames{frame(1, GlobalDescriptor(std::vector<double>{1.0}), {1, 2})};
  const auto db = MapDatabase::build(lms, frames);
  const std::vector<LandmarkId> both{1, 2};
  const auto m = match_query_feature(q, both, db, 0.8);
  ASSERT_TRUE(m.has_value());
  EXPECT_EQ(m->landmark, 1u);
  EXPECT_NEAR(m->distance, 0.1, 1e-12);
  EXPECT_NEAR(m->ratio, 0.2, 1e-12);
  EXPECT_FALSE(match_query_feature(q, both, db, 0.15).has_value());
}

TEST(MatchQueryFeatureTest, RunnerUpMustBeADifferentLandmark) {
  // Two views of landmark 1 are both close; the ratio uses landmark 2.
  const RealDescriptor q(std::vector<double>{1.0, 0.0});
  std::vector<LandmarkRecord> lms{
      landmark(1, {RealDescriptor(std::vector<double>{1.0, 0.0}), RealDescriptor(std::vector<double>{0.6, 0.8})}),
      landmark(2, {RealDescriptor(std::vector<double>{0.0, 1.0})})};
  std::vector<FrameRecord> frames{frame(1, GlobalDescriptor(std::vector<double>{1.0}), {1, 2})};
  const auto db = MapDatabase::build(lms, frames);
  const std::vector<LandmarkId> both{1, 2};
  const auto m = match_query_feature(q, both, db, 0.8);
  ASSERT_TRUE(m.has_value());
  EXPECT_EQ(m->landmark, 1u);
  EXPECT_EQ(m->ratio, 0.0);
}

TEST(MatchImageTest, FusedFindsAtLeastWhatEachBranchFinds) {
  synth::SceneParams p;
  p.places = 40;
  p.landmarks_per_place = 15;
  p.local_dim = 64;
  p.global_dim = 16;
  p.seed = 3;
  const auto scene = synth::make_scene(p);
  const auto db = scene.database();
  const Forest forest = build_forest(db.index_entries(), 3, TreeParams{12, 32, 1.0}, 2);
  const LocalizationMap map{db, forest, PerturbationModel{0.0, 0.03}};
  const auto queries = synth::make_easy_queries(scene, 5, 4);
  for (const auto& q : queries.queries) {
    auto landmarks_of = [&](SearchMode mode) {
      SearchConfig c;
      c.mode = mode;
      std::set<std::pair<std::size_t, LandmarkId>> out;
      for (const auto& m : match_image(q.keypoints, q.global, map, c)) {
        out.emplace(m.query_index, m.landmark_id);
      }
      return out;
    };
    const auto tree = landmarks_of(SearchMode::kTreeOnly);
    const auto retrieval = landmarks_of(SearchMode::kRetrievalOnly);
    const auto fused = landmarks_of(SearchMode::kFused);
    EXPECT_GE(fused.size(), std::max(tree.size(), retrieval.size()));
    EXPECT_GE(fused.size(), q.keypoints.size() * 9 / 10);
  }
}

TEST(MatchImageTest, CandidateSetsNest) {
  synth::SceneParams p;
  p.places = 20;
  p.landmarks_per_place = 10;
  p.local_dim = 32;
  p.global_dim = 16;
  const auto scene = synth::make_scene(p);
  const auto db = scene.database();
  const Forest forest = build_forest(db.index_entries(), 2, TreeParams{10, 32, 1.0}, 2);
  const LocalizationMap map{db, forest, PerturbationModel{0.0, 0.03}};
  const auto q = synth::make_easy_queries(scene, 1, 9).queries.front();
  SearchConfig fused;
  const auto frame_set = image_frame_candidates(q.global, map, fused);
  for (const auto& kp : q.keypoints) {
    const auto all = keypoint_candidates(kp.descriptor.real, frame_set, map, fused);
    SearchConfig tree_cfg;
    tree_cfg.mode = SearchMode::kTreeOnly;
    const auto tree = keypoint_candidates(kp.descriptor.real, {}, map, tree_cfg);
    EXPECT_TRUE(std::includes(all.begin(), all.end(), tree.begin(), tree.end()));
    EXPECT_TRUE(std::includes(all.begin(), all.end(), frame_set.begin(), frame_set.end()));
  }
}

TEST(SearchModeTest, ParsesNames) {
  EXPECT_EQ(parse_search_mode("fused"), SearchMode::kFused);
  EXPECT_EQ(parse_search_mode("tree_only"), SearchMode::kTreeOnly);
  EXPECT_EQ(parse_search_mode("retrieval_only"), SearchMode::kRetrievalOnly);
  EXPECT_THROW(parse_search_mode("both"), Error);
  EXPECT_STREQ(to_string(SearchMode::kTreeOnly), "tree_only");
}

}  // namespace
}  // namespace parloc
