#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "parloc/commands.hpp"
#include "test_support.hpp"

namespace parloc {
namespace {

using testing::TempDir;

TEST(ConfigTest, ParsesKeyValueFileWithComments) {
  std::istringstream in("# run\ntree_count = 3\nmode=tree_only\n\nratio_threshold = 0.7\nstrict_ratio = true\n");
  RunConfig cfg;
  read_config(in, "run.cfg", cfg);
  EXPECT_EQ(cfg.tree_count, 3u);
  EXPECT_EQ(cfg.search.mode, SearchMode::kTreeOnly);
  EXPECT_EQ(cfg.search.ratio_threshold, 0.7);
  EXPECT_TRUE(cfg.search.strict_ratio);
  EXPECT_EQ(cfg.tree_depth, kDefaultTreeDepth);
}

TEST(ConfigTest, ErrorsAreConfigErrorsWithLocation) {
  for (const std::string text : {"tree_count = many\n", "no_such_key = 1\n", "tree_count\n", "mode = both\n"}) {
    std::istringstream in(text);
    RunConfig cfg;
    try {
      read_config(in, "run.cfg", cfg);
      ADD_FAILURE() << text;
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::kConfig) << text;
      EXPECT_NE(std::string(e.what()).find("run.cfg:1"), std::string::npos) << e.what();
    }
  }
}

TEST(ConfigTest, FormatRoundTrips) {
  RunConfig cfg;
  cfg.tree_depth = 17;
  cfg.search.max_leaves = 42;
  cfg.ransac.inlier_threshold_px = 4.5;
  cfg.forest = "/tmp/x.plrt";
  std::istringstream in(format_config(cfg));
  RunConfig back;
  read_config(in, "formatted", back);
  EXPECT_EQ(format_config(back), format_config(cfg));
  EXPECT_EQ(back.model_path(), "/tmp/x.plrt.model");
}

TEST(ConfigTest, ValidationRejectsBadValues) {
  RunConfig cfg;
  cfg.tree_count = 0;
  EXPECT_THROW(cfg.validate(), Error);
  cfg = RunConfig{};
  cfg.ransac.min_inliers = 2;
  EXPECT_THROW(cfg.validate(), Error);
  cfg = RunConfig{};
  cfg.search.ratio_threshold = 1.5;
  EXPECT_THROW(cfg.validate(), Error);
}

TEST(ConfigTest, ListParsers) {
  EXPECT_EQ(parse_coefficients("4, 8,13"), (std::vector<double>{4, 8, 13}));
  EXPECT_THROW(parse_coefficients(""), Error);
  EXPECT_THROW(parse_coefficients("4,x"), Error);
  const auto th = parse_thresholds("0.25:2,5:10");
  ASSERT_EQ(th.size(), 2u);
  EXPECT_EQ(th[1].translation_m, 5.0);
  EXPECT_EQ(th[1].rotation_deg, 10.0);
  EXPECT_THROW(parse_thresholds("0.25"), Error);
}

TEST(ExitCodeTest, DistinctPerErrorKind) {
  EXPECT_EQ(exit_code(ErrorKind::kConfig), kExitConfig);
  EXPECT_EQ(exit_code(ErrorKind::kIo), kExitIo);
  EXPECT_EQ(exit_code(ErrorKind::kParse), kExitParse);
  EXPECT_EQ(exit_code(ErrorKind::kIntegrity), kExitIntegrity);
  EXPECT_EQ(exit_code(ErrorKind::kDimension), kExitDimension);
  EXPECT_EQ(exit_code(ErrorKind::kGeometry), kExitFailure);
}

class PipelineTest : public ::testing::Test {
 protected:
  void SetUp() override {
    cfg_.output_dir = dir_.path().string();
    cfg_.synth_places = 20;
    cfg_.synth_queries = 20;
    cfg_.seed = 3;
    std::ostringstream sink;
    cmd_synth(cfg_, sink);
    cfg_.landmarks = dir_.file("landmarks.txt");
    cfg_.frames = dir_.file("frames.txt");
    cfg_.queries = dir_.file("queries.txt");
    cfg_.ground_truth = dir_.file("truth.txt");
    cfg_.forest = dir_.file("map.plrt");
    cfg_.results = dir_.file("results.txt");
  }

  TempDir dir_;
  RunConfig cfg_;
};

TEST_F(PipelineTest, LocalizesNearlyEveryQuery) {
  std::ostringstream out;
  cmd_build_index(cfg_, out);
  EXPECT_NE(out.str().find("trees 6 depth 23"), std::string::npos) << out.str();
  cmd_localize(cfg_, out);
  auto in = open_input(cfg_.results);
  const auto results = read_results(in, cfg_.results);
  ASSERT_EQ(results.size(), 20u);
  std::size_t ok = 0;
  for (const auto& r : results) ok += r.status == LocalizationStatus::kOk ? 1 : 0;
  EXPECT_GE(ok, 19u);

  std::ostringstream report;
  cmd_evaluate(cfg_, report);
  EXPECT_NE(report.str().find("5,10,"), std::string::npos) << report.str();
}

TEST_F(PipelineTest, EmptyQueryFileGivesEmptyResults) {
  std::ostringstream out;
  cmd_build_index(cfg_, out);
  write_text_file(cfg_.queries, "# no queries\n");
  cmd_localize(cfg_, out);
  auto in = open_input(cfg_.results);
  EXPECT_TRUE(read_results(in, cfg_.results).empty());
}

TEST_F(PipelineTest, QueryDimensionMismatchIsReported) {
  std::ostringstream out;
  cmd_build_index(cfg_, out);
  write_text_file(cfg_.queries, "query 1 500 500 320 240 0 0 1 1 1\n10 10 0 2 2 0.6 0.8\n");
  try {
    cmd_localize(cfg_, out);
    FAIL() << "expected a dimension error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kDimension);
  }
}

TEST_F(PipelineTest, FitModelWritesSidecar) {
  cfg_.model = dir_.file("fitted.model");
  cfg_.model_samples = 2000;
  std::ostringstream out;
  cmd_fit_model(cfg_, out);
  auto in = open_input(cfg_.model);
  const auto m = read_model(in, cfg_.model);
  EXPECT_GT(m.sigma, 0.0);
  EXPECT_LT(std::abs(m.mu), 0.01);
}

TEST(FitModelTest, SingleDescriptorMapNeedsFallback) {
  TempDir dir;
  write_text_file(dir.file("lm.txt"), "1 0 0 1 1 2 0.6 0.8\n2 1 0 1 1 2 0.8 -0.6\n");
  write_text_file(dir.file("fr.txt"), "1 1 1 2 1 2\n");
  RunConfig cfg;
  cfg.landmarks = dir.file("lm.txt");
  cfg.frames = dir.file("fr.txt");
  cfg.model = dir.file("m.model");
  std::ostringstream out;
  try {
    cmd_fit_model(cfg, out);
    FAIL() << "expected a config error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kConfig);
    EXPECT_NE(std::string(e.what()).find("--synthetic-perturbation"), std::string::npos);
  }
  cfg.synthetic_perturbation = 0.05;
  cfg.model_samples = 500;
  EXPECT_NO_THROW(cmd_fit_model(cfg, out));
}

TEST(EvaluateTest, DuplicateResultsAreIntegrityErrors) {
  std::vector<ResultRecord> results(2);
  results[0].query_id = results[1].query_id = 1;
  std::map<std::uint64_t, CameraPose> truth{{1, CameraPose{}}};
  const auto th = default_recall_thresholds();
  try {
    evaluate_results(results, truth, th);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kIntegrity);
  }
}

TEST(SweepTest, EmptyQuerySetGivesZeros) {
  const std::vector<double> coefficients{4.0, 13.0};
  bool called = false;
  const auto rows = coefficient_sweep(
      std::span<const ImageQuery>(), [&](double) { called = true; return SweepMap{}; }, coefficients,
      SearchConfig{}, RansacParams{});
  ASSERT_EQ(rows.size(), 2u);
  for (const auto& r : rows) {
    EXPECT_EQ(r.registered, 0u);
    EXPECT_EQ(r.queries, 0u);
  }
  EXPECT_FALSE(called);
}

TEST(SweepTest, HugeCoefficientRegistersNothing) {
  synth::SweepFixtureParams fp;
  fp.queries = 3;
  const auto fixture = synth::make_sweep_fixture(fp);
  const auto queries = fixture.image_queries();
  const std::vector<double> coefficients{5000.0};
  const auto rows = coefficient_sweep(
      queries, [&](double c) { return fixture.map_at(c, 2, TreeParams{12, 32, 1.0}); }, coefficients,
      SearchConfig{}, RansacParams{});
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].registered, 0u);
  EXPECT_EQ(rows[0].queries, 3u);
}

TEST(SweepTest, RejectsNonpositiveCoefficient) {
  const std::vector<double> coefficients{0.0};
  EXPECT_THROW(coefficient_sweep(std::span<const ImageQuery>(), [](double) { return SweepMap{}; },
                                 coefficients, SearchConfig{}, RansacParams{}),
               Error);
}

TEST(SelftestTest, AllChecksPass) {
  RunConfig cfg;
  cfg.seed = 1;
  std::ostringstream out;
  EXPECT_TRUE(cmd_selftest(cfg, out)) << out.str();
  EXPECT_EQ(out.str().find("FAIL"), std::string::npos) << out.str();
}

}  // namespace
}  // namespace parloc
