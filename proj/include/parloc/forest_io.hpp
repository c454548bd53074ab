#pragma once

// Binary forest container, little-endian throughout. Layout (version 1):
//
//   char[4]  magic "PLRT"
//   u32      version
//   u32      D (descriptor bits), u32 T (trees), u32 K (depth)
//   u64      entry count (entries per tree)
//   T times:
//     u64    tree seed
//     u64    trained node count, then (u64 node key, u32 dimension) sorted by key
//     u64    leaf count, then per leaf sorted by path:
//              u64 path, u32 n, n x (u64 landmark id, u32 descriptor index)

#include <algorithm>
#include <array>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "parloc/error.hpp"
#include "parloc/rtree_index.hpp"

namespace parloc {

inline constexpr std::array<char, 4> kForestMagic = {'P', 'L', 'R', 'T'};
inline constexpr std::uint32_t kForestVersion = 1;

namespace detail {

class LeWriter {
 public:
  explicit LeWriter(std::ostream& out) : out_(out) {}
  void u32(std::uint32_t v) { put(v, 4); }
  void u64(std::uint64_t v) { put(v, 8); }
  void bytes(const char* p, std::size_t n) { out_.write(p, static_cast<std::streamsize>(n)); }

 private:
  void put(std::uint64_t v, int n) {
    char buf[8];
    for (int i = 0; i < n; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xFFu);
    out_.write(buf, n);
  }
  std::ostream& out_;
};

class LeReader {
 public:
  explicit LeReader(std::istream& in) : in_(in) {}
  std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
  std::uint64_t u64() { return get(8); }
  void bytes(char* p, std::size_t n) {
    in_.read(p, static_cast<std::streamsize>(n));
    if (in_.gcount() != static_cast<std::streamsize>(n)) truncated();
  }

 private:
  std::uint64_t get(int n) {
    unsigned char buf[8];
    in_.read(reinterpret_cast<char*>(buf), n);
    if (in_.gcount() != n) truncated();
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
    return v;
  }
  [[noreturn]] static void truncated() { fail(ErrorKind::kParse, "forest file is truncated"); }
  std::istream& in_;
};

}  // namespace detail

inline void write_forest(std::ostream& out, const Forest& forest) {
  detail::LeWriter w(out);
  w.bytes(kForestMagic.data(), kForestMagic.size());
  w.u32(kForestVersion);
  w.u32(static_cast<std::uint32_t>(forest.dim()));
  w.u32(static_cast<std::uint32_t>(forest.size()));
  w.u32(static_cast<std::uint32_t>(forest.depth()));
  w.u64(forest.entry_count());
  for (const RandomTree& tree : forest.trees()) {
    w.u64(tree.seed());

    std::vector<std::pair<std::uint64_t, std::uint32_t>> tests(tree.tests().begin(),
                                                               tree.tests().end());
    std::sort(tests.begin(), tests.end());
    w.u64(tests.size());
    for (const auto& [key, dim] : tests) {
      w.u64(key);
      w.u32(dim);
    }

    std::vector<std::uint64_t> paths;
    paths.reserve(tree.leaf_count());
    for (const auto& [path, bucket] : tree.leaves()) paths.push_back(path);
    std::sort(paths.begin(), paths.end());
    w.u64(paths.size());
    for (std::uint64_t path : paths) {
      const auto& bucket = *tree.leaf(path);
      w.u64(path);
      w.u32(static_cast<std::uint32_t>(bucket.size()));
      for (const TreeEntry& e : bucket) {
        w.u64(e.landmark);
        w.u32(e.descriptor_index);
      }
    }
  }
  if (!out) fail(ErrorKind::kIo, "failed writing forest");
}

inline Forest read_forest(std::istream& in) {
  detail::LeReader r(in);
  std::array<char, 4> magic{};
  r.bytes(magic.data(), magic.size());
  if (magic != kForestMagic) fail(ErrorKind::kParse, "not a forest file (bad magic)");
  const std::uint32_t version = r.u32();
  if (version != kForestVersion) {
    fail(ErrorKind::kParse, "unsupported forest version " + std::to_string(version));
  }
  const std::uint32_t dim = r.u32();
  const std::uint32_t tree_count = r.u32();
  const std::uint32_t depth = r.u32();
  const std::uint64_t entry_count = r.u64();
  if (dim == 0 || tree_count == 0 || depth == 0 || depth > kMaxTreeDepth) {
    fail(ErrorKind::kParse, "forest header has invalid D/T/K");
  }

  std::vector<RandomTree> trees;
  trees.reserve(tree_count);
  for (std::uint32_t t = 0; t < tree_count; ++t) {
    RandomTree tree(dim, depth, r.u64());
    const std::uint64_t n_tests = r.u64();
    for (std::uint64_t i = 0; i < n_tests; ++i) {
      const std::uint64_t key = r.u64();
      const std::uint32_t d = r.u32();
      if (key == 0 || key >= (std::uint64_t{1} << depth) || d >= dim) {
        fail(ErrorKind::kParse, "forest tree " + std::to_string(t) + " has an invalid node test");
      }
      tree.set_test(key, d);
    }
    const std::uint64_t n_leaves = r.u64();
    std::uint64_t stored = 0;
    for (std::uint64_t i = 0; i < n_leaves; ++i) {
      const std::uint64_t path = r.u64();
      if ((path >> depth) != 0) {
        fail(ErrorKind::kParse, "forest tree " + std::to_string(t) + " has an invalid leaf path");
      }
      const std::uint32_t n = r.u32();
      std::vector<TreeEntry> bucket(n);
      for (auto& e : bucket) {
        e.landmark = r.u64();
        e.descriptor_index = r.u32();
      }
      stored += n;
      tree.add_leaf(path, std::move(bucket));
    }
    if (stored != entry_count) {
      fail(ErrorKind::kParse, "forest tree " + std::to_string(t) + " stores " +
                                  std::to_string(stored) + " entries, header says " +
                                  std::to_string(entry_count));
    }
    trees.push_back(std::move(tree));
  }
  if (in.peek() != std::char_traits<char>::eof()) fail(ErrorKind::kParse, "trailing bytes after forest");
  return Forest(dim, depth, entry_count, std::move(trees));
}

inline void save_forest(const std::string& path, const Forest& forest) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::kIo, "cannot open " + path + " for writing");
  write_forest(out, forest);
}

inline Forest load_forest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kIo, "cannot open " + path);
  return read_forest(in);
}

}  // namespace parloc
