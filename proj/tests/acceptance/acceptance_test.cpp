// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "parloc/commands.hpp"
#include "parloc/parloc.hpp"
#include "parloc/synthetic.hpp"
#include "test_support.hpp"

namespace {

using namespace parloc;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

// --- criteria 1 and 2: index over 2,000 landmarks ---------------------------------------

struct NnFixture {
  std::vector<RealDescriptor> database;
  std::vector<IndexEntry> entries;
  std::vector<RealDescriptor> queries;
  Forest forest;
  PerturbationModel model{0.0, 0.05, false};
};

const NnFixture& nn_fixture() {
  static const NnFixture f = [] {
    NnFixture out;
    synth::Rng rng(101);
    for (std::size_t i = 0; i < 2000; ++i) {
      out.database.push_back(synth::random_unit(64, rng));
      out.entries.push_back(IndexEntry{TreeEntry{i + 1, 0}, binarize(out.database.back())});
    }
    for (std::size_t q = 0; q < 500; ++q) {
      out.queries.push_back(synth::perturb(out.database[(q * 7919) % 2000], 0.05, rng));
    }
    // Samples a quarter of the dimensions per node, the default's ratio at D = 256.
    out.forest = build_forest(out.entries, 6, TreeParams{8, 16, 1.0}, 17);
    return out;
  }();
  return f;
}

std::size_t brute_force_nn(const std::vector<RealDescriptor>& db, const RealDescriptor& q) {
  std::size_t best = 0;
  double best_d = l2_distance(q, db[0]);
  for (std::size_t i = 1; i < db.size(); ++i) {
    const double d = l2_distance(q, db[i]);
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

std::optional<std::size_t> candidate_nn(const std::vector<RealDescriptor>& db,
                                        const std::vector<TreeEntry>& candidates,
                                        const RealDescriptor& q) {
  std::optional<std::size_t> best;
  double best_d = 0.0;
  for (const auto& c : candidates) {
    const std::size_t i = c.landmark - 1;
    const double d = l2_distance(q, db[i]);
    if (!best || d < best_d || (d == best_d && i < *best)) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

Outcome criterion_1() {
  const auto t0 = Clock::now();
  const NnFixture& f = nn_fixture();
  const std::size_t all = f.forest.nonempty_leaf_count();
  std::size_t equal = 0;
  for (const auto& q : f.queries) {
    const auto r = priority_search(f.forest, q, f.model, all);
    if (candidate_nn(f.database, r.candidates, q) == brute_force_nn(f.database, q)) ++equal;
  }
  const double secs = seconds_since(t0);
  std::ostringstream d;
  d << equal << "/" << f.queries.size() << " queries agree with brute force, " << secs << " s";
  return {equal == f.queries.size() && secs < 10.0, d.str()};
}

Outcome criterion_2() {
  const NnFixture& f = nn_fixture();
  const std::vector<std::size_t> budgets{1, 10, 50, 100, f.forest.nonempty_leaf_count()};
  std::vector<double> recall;
  for (std::size_t budget : budgets) {
    std::size_t hits = 0;
    for (const auto& q : f.queries) {
      const auto r = priority_search(f.forest, q, f.model, budget);
      if (candidate_nn(f.database, r.candidates, q) == brute_force_nn(f.database, q)) ++hits;
    }
    recall.push_back(100.0 * static_cast<double>(hits) / static_cast<double>(f.queries.size()));
  }
  bool monotone = true;
  for (std::size_t i = 1; i < recall.size(); ++i) monotone = monotone && recall[i] >= recall[i - 1];
  std::ostringstream d;
  d << "recall at {1,10,50,100,all} leaves:";
  for (double r : recall) d << " " << r << "%";
  return {recall[3] >= 95.0 && monotone, d.str()};
}

// --- criterion 3: probability model ------------------------------------------------------

Outcome criterion_3() {
  std::mt19937_64 rng(303);
  std::normal_distribution<double> standard(0.0, 1.0);
  double worst = 0.0;
  std::size_t cells = 0;
  for (double q : {-0.2, -0.05, -0.01, 0.0, 0.02, 0.08, 0.25}) {
    for (double mu : {-0.03, 0.0, 0.015}) {
      for (double sigma : {0.01, 0.05, 0.15}) {
        const PerturbationModel m{mu, sigma, false};
        std::size_t ones = 0;
        for (int i = 0; i < 1000000; ++i) ones += q + mu + sigma * standard(rng) >= 0.0 ? 1 : 0;
        const double empirical = static_cast<double>(ones) / 1e6;
        worst = std::max(worst, std::abs(empirical - node_probability(q, 1, m)));
        worst = std::max(worst, std::abs((1.0 - empirical) - node_probability(q, 0, m)));
        ++cells;
      }
    }
  }

  double worst_sum = 0.0;
  synth::Rng srng(304);
  for (std::size_t depth = 1; depth <= 10; ++depth) {
    std::vector<IndexEntry> entries;
    for (std::size_t i = 0; i < 300; ++i) {
      entries.push_back(IndexEntry{TreeEntry{i + 1, 0}, binarize(synth::random_unit(32, srng))});
    }
    const RandomTree tree = build_tree(entries, TreeParams{depth, 16, 1.0}, depth);
    for (int t = 0; t < 5; ++t) {
      const auto q = synth::random_unit(32, srng);
      const PerturbationModel m{0.01 * t, 0.02 + 0.02 * t, false};
      double sum = 0.0;
      for (std::uint64_t path = 0; path < (std::uint64_t{1} << depth); ++path) {
        sum += std::exp(leaf_log_probability(tree, q, path, depth, m));
      }
      worst_sum = std::max(worst_sum, std::abs(sum - 1.0));
    }
  }
  std::ostringstream d;
  d << cells << " grid cells, max |MC - model| " << worst << "; max |sum leaves - 1| " << worst_sum;
  return {worst <= 0.005 && worst_sum <= 1e-9, d.str()};
}

// --- criterion 4: loss gradients ---------------------------------------------------------

Outcome criterion_4() {
  std::mt19937_64 rng(404);
  std::uniform_int_distribution<std::size_t> pick_n(2, 16), pick_d(4, 32);
  const std::vector<std::pair<const char*, std::function<LossResult(const DescriptorBatch&)>>> losses{
      {"triplet", [](const DescriptorBatch& b) { return triplet_margin_loss(b); }},
      {"sos", [](const DescriptorBatch& b) { return sos_regularizer(b, std::min<std::size_t>(8, b.size() - 1)); }},
      {"weighted_hamming", [](const DescriptorBatch& b) { return weighted_hamming_loss(b); }},
      {"total", [](const DescriptorBatch& b) { return total_loss(b); }},
  };
  std::vector<double> worst(losses.size(), 0.0);
  for (int trial = 0; trial < 100; ++trial) {
    const auto batch = testing::random_batch(pick_n(rng), pick_d(rng), rng);
    for (std::size_t l = 0; l < losses.size(); ++l) {
      worst[l] = std::max(worst[l], testing::check_gradient(losses[l].second, batch).relative_error);
    }
  }
  std::ostringstream d;
  d << "100 batches, max relative error:";
  bool pass = true;
  for (std::size_t l = 0; l < losses.size(); ++l) {
    d << " " << losses[l].first << " " << worst[l];
    pass = pass && worst[l] <= 1e-4;
  }
  return {pass, d.str()};
}

// --- criterion 5: pose accuracy ----------------------------------------------------------

Outcome criterion_5() {
  std::size_t successes = 0;
  double worst_clean_t = 0.0, worst_clean_r = 0.0;
  for (std::uint64_t trial = 0; trial < 100; ++trial) {
    RansacParams params;
    params.seed = trial;
    const auto clean = synth::pnp_problem(50, 0, 0.0, 5000 + trial);
    const auto rc = ransac_pnp(clean.matches, clean.intrinsics, params);
    bool ok = rc.status == LocalizationStatus::kOk;
    if (ok) {
      const PoseError e = pose_error(*rc.pose, clean.truth);
      worst_clean_t = std::max(worst_clean_t, e.translation_m);
      worst_clean_r = std::max(worst_clean_r, e.rotation_deg);
      ok = e.translation_m <= 1e-6 && e.rotation_deg <= 1e-6;
    }
    const auto noisy = synth::pnp_problem(50, 50, 0.5, 6000 + trial);
    const auto rn = ransac_pnp(noisy.matches, noisy.intrinsics, params);
    if (ok && rn.status == LocalizationStatus::kOk) {
      const PoseError e = pose_error(*rn.pose, noisy.truth);
      std::size_t recovered = 0;
      for (std::size_t i : rn.inlier_indices) recovered += noisy.is_inlier[i] ? 1 : 0;
      ok = e.translation_m <= 0.01 && e.rotation_deg <= 0.1 && recovered >= 45;
    } else {
      ok = false;
    }
    successes += ok ? 1 : 0;
  }
  std::ostringstream d;
  d << successes << "/100 trials within bounds; worst noiseless error " << worst_clean_t << " m, "
    << worst_clean_r << " deg";
  return {successes >= 99, d.str()};
}

// --- criterion 6: fused vs single-branch matching ----------------------------------------

Outcome criterion_6() {
  synth::SceneParams sp;
  sp.places = 200;
  sp.seed = 11;
  const auto scene = synth::make_scene(sp);
  const MapDatabase db = scene.database();
  const Forest forest = build_forest(db.index_entries(), kDefaultTreeCount, TreeParams{}, 5);
  std::vector<MatchedPair> pairs;
  for (const auto& lm : db.landmarks()) pairs.push_back(MatchedPair{lm.descriptors[0].real, lm.descriptors[1].real});
  const PerturbationModel model = estimate_perturbation_model(pairs, 10, 100000, 3);
  const auto qs = synth::make_bimodal_queries(scene, synth::BimodalParams{}, 9);
  const LocalizationMap map{db, forest, model};

  std::vector<std::size_t> registered;
  for (SearchMode mode : {SearchMode::kTreeOnly, SearchMode::kRetrievalOnly, SearchMode::kFused}) {
    SearchConfig search;
    search.mode = mode;
    RansacParams ransac;
    ransac.seed = 1;
    BatchSummary s;
    localize_batch(qs.queries, map, search, ransac, &s);
    registered.push_back(s.registered);
  }
  const std::size_t tree = registered[0], retrieval = registered[1], fused = registered[2];
  std::ostringstream d;
  d << qs.queries.size() << " queries; registered tree_only " << tree << ", retrieval_only " << retrieval
    << ", fused " << fused;
  const bool pass = fused >= std::max(tree, retrieval) && fused >= tree + 30 && fused >= retrieval + 30;
  return {pass, d.str()};
}

// --- criterion 7: weighted Hamming sanity -------------------------------------------------

Outcome criterion_7() {
  synth::Rng rng(707);
  std::uniform_int_distribution<int> kind(0, 2);
  std::size_t violations = 0, zeros = 0;
  for (int i = 0; i < 100000; ++i) {
    const auto a = synth::random_unit(32, rng);
    RealDescriptor b = a;
    switch (kind(rng)) {
      case 0: b = synth::random_unit(32, rng); break;
      case 1: b = synth::perturb(a, 0.02, rng); break;
      default: {
        // Same signs, different magnitudes.
        std::vector<double> v(a.values().begin(), a.values().end());
        for (double& x : v) x *= 0.5 + std::uniform_real_distribution<double>(0.0, 1.0)(rng);
        b = RealDescriptor::normalize(std::move(v));
      }
    }
    const double wh = weighted_hamming_distance(a, b);
    const bool agree = binarize(a) == binarize(b);
    zeros += wh == 0.0 ? 1 : 0;
    if ((wh == 0.0) != agree || wh > l2_distance(a, b)) ++violations;
  }
  std::ostringstream d;
  d << "100000 pairs, " << zeros << " with identical signs, " << violations << " violations";
  return {violations == 0 && zeros > 0, d.str()};
}

// --- criterion 8: CLI determinism ---------------------------------------------------------

int run(const std::string& cmd) {
  const int status = std::system(("PARLOC_LOG=quiet " + cmd).c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Outcome criterion_8() {
  testing::TempDir dir;
  const std::string cli = PARLOC_CLI_PATH;
  const std::string data = dir.file("data");
  if (run(cli + " synth --output-dir " + data + " --synth-places 12 --synth-queries 12 --seed 8 > /dev/null") != 0) {
    return {false, "synth failed"};
  }
  std::vector<std::string> names{"map.plrt", "map.plrt.model", "results.txt", "build.out", "localize.out",
                                 "evaluate.out", "recall.csv"};
  std::vector<std::vector<std::string>> runs;
  for (int r = 0; r < 2; ++r) {
    const std::string out = dir.file("run" + std::to_string(r));
    std::filesystem::create_directories(out);
    const std::string map = " --landmarks " + data + "/landmarks.txt --frames " + data +
                            "/frames.txt --forest " + out + "/map.plrt";
    int rc = run(cli + " build-index" + map + " > " + out + "/build.out");
    rc |= run(cli + " localize" + map + " --queries " + data + "/queries.txt --results " + out +
              "/results.txt > " + out + "/localize.out");
    rc |= run(cli + " evaluate --results " + out + "/results.txt --ground-truth " + data +
              "/truth.txt --csv " + out + "/recall.csv > " + out + "/evaluate.out");
    if (rc != 0) return {false, "a command failed in run " + std::to_string(r)};
    std::vector<std::string> bytes;
    for (const auto& n : names) bytes.push_back(read_file_bytes(out + "/" + n));
    runs.push_back(std::move(bytes));
  }
  std::size_t same = 0;
  std::string differing;
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (runs[0][i] == runs[1][i] && !runs[0][i].empty()) {
      ++same;
    } else {
      differing += " " + names[i];
    }
  }
  std::ostringstream d;
  d << same << "/" << names.size() << " outputs byte-identical across two runs";
  if (!differing.empty()) d << "; differing:" << differing;
  return {same == names.size(), d.str()};
}

// --- criterion 9: coefficient sweep -------------------------------------------------------

Outcome criterion_9() {
  const synth::SweepFixture fixture = synth::make_sweep_fixture(synth::SweepFixtureParams{});
  const auto queries = fixture.image_queries();
  const std::vector<double> coefficients{4, 8, 13, 20, 32};
  const auto rows = coefficient_sweep(
      queries, [&](double c) { return fixture.map_at(c); }, coefficients, SearchConfig{}, RansacParams{});
  std::vector<std::size_t> counts;
  for (const auto& r : rows) counts.push_back(r.registered);
  const std::size_t peak = static_cast<std::size_t>(std::max_element(counts.begin(), counts.end()) - counts.begin());
  bool pass = peak > 0 && peak + 1 < counts.size() && counts[peak] > counts.front() && counts[peak] > counts.back();
  for (std::size_t i = 1; i <= peak; ++i) pass = pass && counts[i] >= counts[i - 1];
  for (std::size_t i = peak + 1; i < counts.size(); ++i) pass = pass && counts[i] <= counts[i - 1];
  std::ostringstream d;
  d << "registered of " << queries.size() << " at coefficients {4,8,13,20,32}:";
  for (std::size_t c : counts) d << " " << c;
  return {pass, d.str()};
}

}  // namespace

int main() {
  const std::vector<std::pair<int, std::function<Outcome()>>> criteria{
      {1, criterion_1}, {2, criterion_2}, {3, criterion_3}, {4, criterion_4}, {5, criterion_5},
      {6, criterion_6}, {7, criterion_7}, {8, criterion_8}, {9, criterion_9},
  };
  int failures = 0;
  for (const auto& [id, fn] : criteria) {
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("%s criterion %d: %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", id, o.detail.c_str(),
                seconds_since(t0));
    std::fflush(stdout);
    failures += o.pass ? 0 : 1;
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
