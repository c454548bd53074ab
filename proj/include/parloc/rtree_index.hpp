#pragma once

// Forest of random trees over sign-binarized local descriptors, searched
// best-first in order of the probability that a perturbed copy of the query
// lands in each leaf.
//
// Node addressing: an internal node at level l (root = 0) reached by the
// l-bit path prefix p has key (1 << l) | p. A leaf path is the K-bit integer
// whose most significant bit is the root decision; bit value 1 means the
// tested descriptor bit was 1 (right child).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <queue>
#include <random>
#include <span>
#include <unordered_map>
#include <utility>
#include <vector>

#include "parloc/core_types.hpp"
#include "parloc/error.hpp"
#include "parloc/normal.hpp"

namespace parloc {

inline constexpr std::size_t kDefaultTreeCount = 6;
inline constexpr std::size_t kDefaultTreeDepth = 23;
inline constexpr std::size_t kDefaultCandidateDims = 64;
inline constexpr std::size_t kDefaultMaxLeaves = 100;
inline constexpr std::size_t kMaxTreeDepth = 48;

/// One stored database descriptor: which landmark, and which of its views.
struct TreeEntry {
  LandmarkId landmark = 0;
  std::uint32_t descriptor_index = 0;

  friend bool operator==(const TreeEntry&, const TreeEntry&) = default;
  friend auto operator<=>(const TreeEntry&, const TreeEntry&) = default;
};

struct IndexEntry {
  TreeEntry ref;
  BinaryDescriptor bits;
};

struct TreeParams {
  std::size_t depth = kDefaultTreeDepth;
  std::size_t candidate_dims = kDefaultCandidateDims;
  double group_split_weight = 1.0;  // lambda
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

inline std::uint64_t node_key(std::size_t level, std::uint64_t prefix) {
  return (std::uint64_t{1} << level) | prefix;
}

class RandomTree {
 public:
  RandomTree() = default;
  RandomTree(std::size_t dim, std::size_t depth, std::uint64_t seed)
      : dim_(dim), depth_(depth), seed_(seed) {}

  std::size_t dim() const { return dim_; }
  std::size_t depth() const { return depth_; }
  std::uint64_t seed() const { return seed_; }

  /// Dimension tested at an internal node. Nodes whose subtree holds no
  /// entries were never trained; they get a fixed pseudo-random dimension
  /// derived from the tree seed so every one of the 2^K paths is defined.
  std::uint32_t test_dimension(std::size_t level, std::uint64_t prefix) const {
    const std::uint64_t key = node_key(level, prefix);
    if (auto it = tests_.find(key); it != tests_.end()) return it->second;
    return static_cast<std::uint32_t>(splitmix64(seed_ ^ splitmix64(key)) % dim_);
  }

  bool has_entries(std::size_t level, std::uint64_t prefix) const {
    if (level == depth_) return leaves_.contains(prefix);
    return tests_.contains(node_key(level, prefix));
  }

  /// Leaf path reached by a binary descriptor. Only bit lookups, no distances.
  std::uint64_t traverse(const BinaryDescriptor& query) const {
    require_same_dim(query.size(), dim_, "RandomTree::traverse");
    std::uint64_t path = 0;
    for (std::size_t level = 0; level < depth_; ++level) {
      const std::uint32_t d = test_dimension(level, path);
      path = (path << 1) | (query.bit(d) ? 1u : 0u);
    }
    return path;
  }

  /// Entries stored at a leaf, or nullptr for an empty leaf.
  const std::vector<TreeEntry>* leaf(std::uint64_t path) const {
    auto it = leaves_.find(path);
    return it == leaves_.end() ? nullptr : &it->second;
  }

  std::size_t leaf_count() const { return leaves_.size(); }
  std::size_t trained_node_count() const { return tests_.size(); }

  const std::unordered_map<std::uint64_t, std::uint32_t>& tests() const { return tests_; }
  const std::unordered_map<std::uint64_t, std::vector<TreeEntry>>& leaves() const {
    return leaves_;
  }

  void set_test(std::uint64_t key, std::uint32_t dim) { tests_[key] = dim; }
  void add_leaf(std::uint64_t path, std::vector<TreeEntry> entries) {
    leaves_[path] = std::move(entries);
  }

  friend bool operator==(const RandomTree&, const RandomTree&) = default;

 private:
  std::size_t dim_ = 0;
  std::size_t depth_ = 0;
  std::uint64_t seed_ = 0;
  std::unordered_map<std::uint64_t, std::uint32_t> tests_;
  std::unordered_map<std::uint64_t, std::vector<TreeEntry>> leaves_;
};

namespace detail {

class TreeBuilder {
 public:
  TreeBuilder(std::span<const IndexEntry> entries, const TreeParams& params,
              std::uint64_t seed)
      : entries_(entries), params_(params), rng_(seed),
        tree_(entries.front().bits.size(), params.depth, seed) {
    dim_ = tree_.dim();
    permutation_.resize(dim_);
    std::iota(permutation_.begin(), permutation_.end(), std::uint32_t{0});

    // Dense group ids; node index lists are kept sorted by group so that
    // every landmark's descriptors form one contiguous run.
    std::map<LandmarkId, std::uint32_t> group_of;
    group_.resize(entries.size());
    for (std::size_t i = 0; i < entries.size(); ++i) {
      auto [it, inserted] =
          group_of.try_emplace(entries[i].ref.landmark, static_cast<std::uint32_t>(group_of.size()));
      group_[i] = it->second;
    }
  }

  RandomTree build() {
    std::vector<std::uint32_t> indices(entries_.size());
    std::iota(indices.begin(), indices.end(), std::uint32_t{0});
    std::stable_sort(indices.begin(), indices.end(),
                     [&](std::uint32_t a, std::uint32_t b) { return group_[a] < group_[b]; });
    split(0, 0, indices);
    return std::move(tree_);
  }

 private:
  void split(std::size_t level, std::uint64_t prefix, std::vector<std::uint32_t>& indices) {
    if (level == params_.depth) {
      std::vector<TreeEntry> bucket;
      bucket.reserve(indices.size());
      for (std::uint32_t i : indices) bucket.push_back(entries_[i].ref);
      std::sort(bucket.begin(), bucket.end());
      tree_.add_leaf(prefix, std::move(bucket));
      return;
    }
    const std::uint32_t d = choose_dimension(indices);
    tree_.set_test(node_key(level, prefix), d);

    std::vector<std::uint32_t> right;
    std::vector<std::uint32_t> left;
    for (std::uint32_t i : indices) (entries_[i].bits.bit(d) ? right : left).push_back(i);
    indices.clear();
    indices.shrink_to_fit();
    if (!left.empty()) split(level + 1, prefix << 1, left);
    if (!right.empty()) split(level + 1, (prefix << 1) | 1u, right);
  }

  // Samples candidate dimensions without replacement (partial Fisher-Yates
  // over a persistent permutation) and returns the lowest-scoring one.
  std::uint32_t choose_dimension(const std::vector<std::uint32_t>& indices) {
    const std::size_t count = std::min(params_.candidate_dims, dim_);
    for (std::size_t c = 0; c < count; ++c) {
      std::uniform_int_distribution<std::size_t> pick(c, dim_ - 1);
      std::swap(permutation_[c], permutation_[pick(rng_)]);
    }

    const double n = static_cast<double>(indices.size());
    double best_score = std::numeric_limits<double>::infinity();
    std::uint32_t best_dim = 0;
    for (std::size_t c = 0; c < count; ++c) {
      const std::uint32_t d = permutation_[c];
      std::size_t ones = 0;
      std::size_t multi_groups = 0;
      std::size_t split_groups = 0;
      std::size_t run_begin = 0;
      while (run_begin < indices.size()) {
        std::size_t run_end = run_begin;
        std::size_t run_ones = 0;
        while (run_end < indices.size() &&
               group_[indices[run_end]] == group_[indices[run_begin]]) {
          run_ones += entries_[indices[run_end]].bits.bit(d) ? 1 : 0;
          ++run_end;
        }
        const std::size_t run_size = run_end - run_begin;
        ones += run_ones;
        if (run_size >= 2) {
          ++multi_groups;
          if (run_ones != 0 && run_ones != run_size) ++split_groups;
        }
        run_begin = run_end;
      }
      const double balance = std::abs(2.0 * static_cast<double>(ones) - n) / n;
      const double group_penalty =
          multi_groups == 0 ? 0.0
                            : static_cast<double>(split_groups) / static_cast<double>(multi_groups);
      const double score = balance + params_.group_split_weight * group_penalty;
      if (score < best_score || (score == best_score && d < best_dim)) {
        best_score = score;
        best_dim = d;
      }
    }
    return best_dim;
  }

  std::span<const IndexEntry> entries_;
  TreeParams params_;
  std::mt19937_64 rng_;
  RandomTree tree_;
  std::size_t dim_ = 0;
  std::vector<std::uint32_t> permutation_;
  std::vector<std::uint32_t> group_;
};

}  // namespace detail

/// Builds one tree. Each internal node picks, among `candidate_dims` sampled
/// dimensions, the one minimizing
///   |n_right - n_left| / n  +  lambda * (landmarks split across children) /
///                                        (landmarks with >= 2 entries here)
/// with ties going to the smaller dimension index.
inline RandomTree build_tree(std::span<const IndexEntry> entries, const TreeParams& params,
                             std::uint64_t seed) {
  if (entries.empty()) fail(ErrorKind::kInvalidArgument, "build_tree: no entries");
  if (params.depth < 1 || params.depth > kMaxTreeDepth) {
    fail(ErrorKind::kInvalidArgument,
         "build_tree: depth must be in [1, " + std::to_string(kMaxTreeDepth) + "]");
  }
  if (params.candidate_dims < 1) {
    fail(ErrorKind::kInvalidArgument, "build_tree: candidate_dims must be >= 1");
  }
  const std::size_t dim = entries.front().bits.size();
  if (dim == 0) fail(ErrorKind::kInvalidArgument, "build_tree: zero-dimensional descriptors");
  for (const auto& e : entries) require_same_dim(e.bits.size(), dim, "build_tree");
  return detail::TreeBuilder(entries, params, seed).build();
}

class Forest {
 public:
  Forest() = default;
  Forest(std::size_t dim, std::size_t depth, std::uint64_t entry_count,
         std::vector<RandomTree> trees)
      : dim_(dim), depth_(depth), entry_count_(entry_count), trees_(std::move(trees)) {}

  std::size_t dim() const { return dim_; }
  std::size_t depth() const { return depth_; }
  std::uint64_t entry_count() const { return entry_count_; }
  std::size_t size() const { return trees_.size(); }
  bool empty() const { return trees_.empty(); }
  const RandomTree& tree(std::size_t t) const { return trees_[t]; }
  const std::vector<RandomTree>& trees() const { return trees_; }

  std::size_t nonempty_leaf_count() const {
    std::size_t n = 0;
    for (const auto& t : trees_) n += t.leaf_count();
    return n;
  }

  friend bool operator==(const Forest&, const Forest&) = default;

 private:
  std::size_t dim_ = 0;
  std::size_t depth_ = 0;
  std::uint64_t entry_count_ = 0;
  std::vector<RandomTree> trees_;
};

/// Tree t is built from `seed` for t == 0 and from a splitmix-derived seed
/// otherwise, so a one-tree forest equals build_tree with the same seed.
inline std::uint64_t tree_seed(std::uint64_t seed, std::size_t t) {
  return t == 0 ? seed : splitmix64(seed ^ splitmix64(t));
}

inline Forest build_forest(std::span<const IndexEntry> entries, std::size_t tree_count,
                           const TreeParams& params, std::uint64_t seed) {
  if (tree_count < 1) fail(ErrorKind::kInvalidArgument, "build_forest: tree count must be >= 1");
  std::vector<RandomTree> trees;
  trees.reserve(tree_count);
  for (std::size_t t = 0; t < tree_count; ++t) {
    trees.push_back(build_tree(entries, params, tree_seed(seed, t)));
  }
  return Forest(entries.front().bits.size(), params.depth, entries.size(), std::move(trees));
}

/// Leaf-size -> number of leaves with that size, across the forest.
inline std::map<std::size_t, std::size_t> leaf_occupancy_histogram(const Forest& forest) {
  std::map<std::size_t, std::size_t> hist;
  for (const auto& t : forest.trees()) {
    for (const auto& [path, bucket] : t.leaves()) ++hist[bucket.size()];
  }
  return hist;
}

// --- probability model -------------------------------------------------------

/// Gaussian model of the per-dimension perturbation between a query
/// descriptor and its true match: delta ~ N(mu, sigma^2).
struct PerturbationModel {
  double mu = 0.0;
  double sigma = 0.05;
  bool degenerate = false;  // sigma was floored because the samples had no spread

  void validate() const {
    if (!(sigma > 0.0) || !std::isfinite(sigma) || !std::isfinite(mu)) {
      fail(ErrorKind::kConfig, "perturbation model needs finite mu and sigma > 0");
    }
  }
};

/// P(tested bit of the match == branch_bit | query value q_d).
inline double node_probability(double q_d, int branch_bit, const PerturbationModel& model) {
  const double z = (model.mu + q_d) / model.sigma;
  return branch_bit == 0 ? normal_cdf(-z) : normal_cdf(z);
}

inline double node_log_probability(double q_d, int branch_bit, const PerturbationModel& model) {
  const double z = (model.mu + q_d) / model.sigma;
  return branch_bit == 0 ? log_normal_cdf(-z) : log_normal_cdf(z);
}

/// log P(match falls in `path` | query) = sum over the K tests on the path.
inline double leaf_log_probability(const RandomTree& tree, std::span<const double> query,
                                   std::uint64_t path, std::size_t path_length,
                                   const PerturbationModel& model) {
  if (path_length != tree.depth()) {
    fail(ErrorKind::kInvalidArgument, "leaf_log_probability: path length " +
                                          std::to_string(path_length) + " != tree depth " +
                                          std::to_string(tree.depth()));
  }
  if (tree.depth() < 64 && (path >> tree.depth()) != 0) {
    fail(ErrorKind::kInvalidArgument, "leaf_log_probability: path has bits beyond the depth");
  }
  require_same_dim(query.size(), tree.dim(), "leaf_log_probability");
  double logp = 0.0;
  std::uint64_t prefix = 0;
  for (std::size_t level = 0; level < tree.depth(); ++level) {
    const int bit = static_cast<int>((path >> (tree.depth() - 1 - level)) & 1u);
    logp += node_log_probability(query[tree.test_dimension(level, prefix)], bit, model);
    prefix = (prefix << 1) | static_cast<std::uint64_t>(bit);
  }
  return logp;
}

struct LeafVisit {
  std::size_t tree = 0;
  std::uint64_t path = 0;
  double log_probability = 0.0;
};

struct PrioritySearchResult {
  std::vector<LeafVisit> leaves;       // non-increasing log probability
  std::vector<TreeEntry> candidates;   // union of visited buckets, sorted, unique
};

/// Best-first search over all trees at once. A single queue holds partial
/// paths scored by accumulated log probability; expanding a node multiplies
/// in factors <= 1, so complete paths pop in non-increasing order. Subtrees
/// without entries are never pushed, so empty leaves cost no budget.
inline PrioritySearchResult priority_search(const Forest& forest, std::span<const double> query,
                                            const PerturbationModel& model,
                                            std::size_t max_leaves) {
  if (forest.empty()) fail(ErrorKind::kInvalidArgument, "priority_search: empty forest");
  if (max_leaves < 1) fail(ErrorKind::kInvalidArgument, "priority_search: max_leaves must be >= 1");
  require_same_dim(query.size(), forest.dim(), "priority_search");

  const std::size_t dim = forest.dim();
  std::vector<double> log_zero(dim);
  std::vector<double> log_one(dim);
  for (std::size_t d = 0; d < dim; ++d) {
    log_zero[d] = node_log_probability(query[d], 0, model);
    log_one[d] = node_log_probability(query[d], 1, model);
  }

  struct Node {
    double logp;
    std::uint32_t tree;
    std::uint32_t level;
    std::uint64_t prefix;
  };
  // Max-heap on logp; ties prefer lower tree, then deeper nodes, then lower prefix.
  auto worse = [](const Node& a, const Node& b) {
    if (a.logp != b.logp) return a.logp < b.logp;
    if (a.tree != b.tree) return a.tree > b.tree;
    if (a.level != b.level) return a.level < b.level;
    return a.prefix > b.prefix;
  };
  std::priority_queue<Node, std::vector<Node>, decltype(worse)> queue(worse);
  for (std::size_t t = 0; t < forest.size(); ++t) {
    if (forest.tree(t).has_entries(0, 0)) queue.push(Node{0.0, static_cast<std::uint32_t>(t), 0, 0});
  }

  PrioritySearchResult result;
  const std::size_t depth = forest.depth();
  while (!queue.empty() && result.leaves.size() < max_leaves) {
    Node node = queue.top();
    queue.pop();
    const RandomTree& tree = forest.tree(node.tree);
    // Follow the better child directly while it would be the next pop anyway;
    // this visits nodes in exactly the order of plain best-first search.
    while (node.level < depth) {
      const std::uint32_t d = tree.test_dimension(node.level, node.prefix);
      std::optional<Node> children[2];
      for (std::uint64_t bit = 0; bit < 2; ++bit) {
        const std::uint64_t child = (node.prefix << 1) | bit;
        if (!tree.has_entries(node.level + 1, child)) continue;
        const double factor = bit == 0 ? log_zero[d] : log_one[d];
        children[bit] = Node{node.logp + factor, node.tree, node.level + 1, child};
      }
      if (!children[0] && !children[1]) break;  // unreachable for a trained node
      std::size_t best = 0;
      if (!children[0] || (children[1] && worse(*children[0], *children[1]))) best = 1;
      if (children[1 - best]) queue.push(*children[1 - best]);
      if (!queue.empty() && worse(*children[best], queue.top())) {
        queue.push(*children[best]);
        break;
      }
      node = *children[best];
    }
    if (node.level == depth) {
      result.leaves.push_back(LeafVisit{node.tree, node.prefix, node.logp});
      const auto* bucket = tree.leaf(node.prefix);
      result.candidates.insert(result.candidates.end(), bucket->begin(), bucket->end());
    }
  }
  std::sort(result.candidates.begin(), result.candidates.end());
  result.candidates.erase(std::unique(result.candidates.begin(), result.candidates.end()),
                          result.candidates.end());
  return result;
}

// --- model estimation ----------------------------------------------------------

/// A database descriptor and a second observation of the same point.
struct MatchedPair {
  std::span<const double> query;
  std::span<const double> match;
};

/// Averages per-dimension mean/stddev of delta = match - query over
/// `tests_to_sample` distinct random dimensions, each from
/// `samples_per_test` pairs drawn with replacement.
inline PerturbationModel estimate_perturbation_model(std::span<const MatchedPair> pairs,
                                                     std::size_t tests_to_sample,
                                                     std::size_t samples_per_test,
                                                     std::uint64_t seed) {
  if (pairs.empty()) fail(ErrorKind::kInvalidArgument, "estimate_perturbation_model: no pairs");
  if (tests_to_sample < 1 || samples_per_test < 2) {
    fail(ErrorKind::kInvalidArgument,
         "estimate_perturbation_model: need >= 1 test and >= 2 samples per test");
  }
  const std::size_t dim = pairs.front().query.size();
  for (const auto& p : pairs) {
    require_same_dim(p.query.size(), dim, "estimate_perturbation_model");
    require_same_dim(p.match.size(), dim, "estimate_perturbation_model");
  }

  std::mt19937_64 rng(seed);
  std::vector<std::size_t> dims(dim);
  std::iota(dims.begin(), dims.end(), std::size_t{0});
  const std::size_t tests = std::min(tests_to_sample, dim);
  for (std::size_t c = 0; c < tests; ++c) {
    std::uniform_int_distribution<std::size_t> pick(c, dim - 1);
    std::swap(dims[c], dims[pick(rng)]);
  }

  std::uniform_int_distribution<std::size_t> pick_pair(0, pairs.size() - 1);
  double mu_sum = 0.0;
  double sigma_sum = 0.0;
  for (std::size_t c = 0; c < tests; ++c) {
    const std::size_t d = dims[c];
    // Welford accumulation.
    double mean = 0.0;
    double m2 = 0.0;
    for (std::size_t s = 0; s < samples_per_test; ++s) {
      const MatchedPair& p = pairs[pick_pair(rng)];
      const double delta = p.match[d] - p.query[d];
      const double step = delta - mean;
      mean += step / static_cast<double>(s + 1);
      m2 += step * (delta - mean);
    }
    mu_sum += mean;
    sigma_sum += std::sqrt(m2 / static_cast<double>(samples_per_test - 1));
  }

  PerturbationModel model;
  model.mu = mu_sum / static_cast<double>(tests);
  model.sigma = sigma_sum / static_cast<double>(tests);
  model.degenerate = false;
  if (!(model.sigma > std::numeric_limits<double>::epsilon())) {
    model.sigma = std::numeric_limits<double>::epsilon();
    model.degenerate = true;
  }
  return model;
}

}  // namespace parloc
