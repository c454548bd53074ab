#pragma once

// Batch loss terms for co-training real-valued and binary local descriptors:
// hardest-in-batch triplet margin loss, second-order similarity regularizer,
// and the weighted-Hamming triplet term. Each returns the loss together with
// its analytic gradient with respect to every descriptor element.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include "parloc/core_types.hpp"
#include "parloc/error.hpp"

namespace parloc {

/// N matched pairs (anchor_i, positive_i), stored row-major (N x D).
class DescriptorBatch {
 public:
  DescriptorBatch(std::size_t n, std::size_t dim, std::vector<double> anchors,
                  std::vector<double> positives)
      : n_(n), dim_(dim), anchors_(std::move(anchors)), positives_(std::move(positives)) {
    if (n_ < 2) fail(ErrorKind::kInvalidArgument, "descriptor batch needs at least 2 pairs");
    if (dim_ == 0) fail(ErrorKind::kInvalidArgument, "descriptor batch dimension is zero");
    require_same_dim(anchors_.size(), n_ * dim_, "DescriptorBatch anchors");
    require_same_dim(positives_.size(), n_ * dim_, "DescriptorBatch positives");
  }

  std::size_t size() const { return n_; }
  std::size_t dim() const { return dim_; }

  std::span<const double> anchor(std::size_t i) const {
    return std::span<const double>(anchors_).subspan(i * dim_, dim_);
  }
  std::span<const double> positive(std::size_t i) const {
    return std::span<const double>(positives_).subspan(i * dim_, dim_);
  }

  std::vector<double>& anchors() { return anchors_; }
  std::vector<double>& positives() { return positives_; }
  const std::vector<double>& anchors() const { return anchors_; }
  const std::vector<double>& positives() const { return positives_; }

 private:
  std::size_t n_;
  std::size_t dim_;
  std::vector<double> anchors_;
  std::vector<double> positives_;
};

struct LossResult {
  double loss = 0.0;
  std::vector<double> grad_anchors;    // N x D
  std::vector<double> grad_positives;  // N x D

  LossResult& operator+=(const LossResult& other) {
    loss += other.loss;
    for (std::size_t k = 0; k < grad_anchors.size(); ++k) {
      grad_anchors[k] += other.grad_anchors[k];
      grad_positives[k] += other.grad_positives[k];
    }
    return *this;
  }
};

inline constexpr std::size_t kDefaultSosNeighbors = 8;
inline constexpr double kTripletMargin = 1.0;

namespace detail {

enum class Side { kAnchor, kPositive };

struct DescRef {
  Side side;
  std::size_t index;
};

inline LossResult zero_result(const DescriptorBatch& batch) {
  LossResult r;
  r.grad_anchors.assign(batch.size() * batch.dim(), 0.0);
  r.grad_positives.assign(batch.size() * batch.dim(), 0.0);
  return r;
}

inline std::span<const double> get(const DescriptorBatch& b, DescRef r) {
  return r.side == Side::kAnchor ? b.anchor(r.index) : b.positive(r.index);
}

inline double* grad_row(LossResult& out, std::size_t dim, DescRef r) {
  auto& g = r.side == Side::kAnchor ? out.grad_anchors : out.grad_positives;
  return g.data() + r.index * dim;
}

// Metric with gradient: d(a, b) and accumulation of scale * d'(a, b).
struct L2Metric {
  static double distance(std::span<const double> a, std::span<const double> b) {
    return l2_distance(a, b);
  }
  // Adds scale * dd/da to ga and scale * dd/db to gb; zero subgradient at d = 0.
  static void accumulate(std::span<const double> a, std::span<const double> b, double d,
                         double scale, double* ga, double* gb) {
    if (d <= 0.0) return;
    for (std::size_t k = 0; k < a.size(); ++k) {
      const double g = scale * (a[k] - b[k]) / d;
      ga[k] += g;
      gb[k] -= g;
    }
  }
};

// The sign-mismatch indicator is held constant under differentiation.
struct WeightedHammingMetric {
  static double distance(std::span<const double> a, std::span<const double> b) {
    return weighted_hamming_distance(a, b);
  }
  static void accumulate(std::span<const double> a, std::span<const double> b, double d,
                         double scale, double* ga, double* gb) {
    if (d <= 0.0) return;
    for (std::size_t k = 0; k < a.size(); ++k) {
      if ((a[k] >= 0.0) == (b[k] >= 0.0)) continue;
      const double g = scale * (a[k] - b[k]) / d;
      ga[k] += g;
      gb[k] -= g;
    }
  }
};

template <class Metric>
LossResult hardest_negative_triplet(const DescriptorBatch& batch) {
  const std::size_t n = batch.size();
  const std::size_t dim = batch.dim();
  LossResult out = zero_result(batch);
  const double inv_n = 1.0 / static_cast<double>(n);

  for (std::size_t i = 0; i < n; ++i) {
    const DescRef anchor{Side::kAnchor, i};
    const DescRef positive{Side::kPositive, i};
    const double d_pos = Metric::distance(batch.anchor(i), batch.positive(i));

    double d_neg = std::numeric_limits<double>::infinity();
    DescRef neg_a{}, neg_b{};
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      const double d1 = Metric::distance(batch.anchor(i), batch.positive(j));
      if (d1 < d_neg) {
        d_neg = d1;
        neg_a = anchor;
        neg_b = DescRef{Side::kPositive, j};
      }
      const double d2 = Metric::distance(batch.positive(i), batch.anchor(j));
      if (d2 < d_neg) {
        d_neg = d2;
        neg_a = positive;
        neg_b = DescRef{Side::kAnchor, j};
      }
    }

    const double hinge = kTripletMargin + d_pos - d_neg;
    if (hinge <= 0.0) continue;
    out.loss += hinge * inv_n;
    Metric::accumulate(batch.anchor(i), batch.positive(i), d_pos, inv_n,
                       grad_row(out, dim, anchor), grad_row(out, dim, positive));
    Metric::accumulate(get(batch, neg_a), get(batch, neg_b), d_neg, -inv_n,
                       grad_row(out, dim, neg_a), grad_row(out, dim, neg_b));
  }
  return out;
}

}  // namespace detail

/// Hardest-in-batch triplet margin loss with L2 distance (margin 1).
inline LossResult triplet_margin_loss(const DescriptorBatch& batch) {
  return detail::hardest_negative_triplet<detail::L2Metric>(batch);
}

/// Triplet margin loss evaluated with the weighted Hamming distance.
inline LossResult weighted_hamming_loss(const DescriptorBatch& batch) {
  return detail::hardest_negative_triplet<detail::WeightedHammingMetric>(batch);
}

/// Second-order similarity regularizer. For each pair i the neighbor set is
/// the `neighbor_count` indices j != i with the smallest d(anchor_i, anchor_j)
/// (ties to the smaller index); the selection is constant under
/// differentiation.
inline LossResult sos_regularizer(const DescriptorBatch& batch,
                                  std::size_t neighbor_count = kDefaultSosNeighbors) {
  const std::size_t n = batch.size();
  const std::size_t dim = batch.dim();
  if (neighbor_count == 0 || neighbor_count >= n) {
    fail(ErrorKind::kInvalidArgument,
         "sos_regularizer: neighbor_count must be in [1, N-1], got " +
             std::to_string(neighbor_count) + " for N=" + std::to_string(n));
  }
  LossResult out = detail::zero_result(batch);
  const double inv_n = 1.0 / static_cast<double>(n);

  std::vector<std::size_t> order;
  std::vector<double> anchor_dist(n);
  std::vector<double> positive_dist(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      anchor_dist[j] = l2_distance(batch.anchor(i), batch.anchor(j));
      positive_dist[j] = l2_distance(batch.positive(i), batch.positive(j));
    }
    order.clear();
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) order.push_back(j);
    }
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return anchor_dist[a] < anchor_dist[b];
    });
    order.resize(neighbor_count);

    double sq = 0.0;
    for (std::size_t j : order) {
      const double e = anchor_dist[j] - positive_dist[j];
      sq += e * e;
    }
    const double s = std::sqrt(sq);
    out.loss += s * inv_n;
    if (s <= 0.0) continue;

    for (std::size_t j : order) {
      const double scale = inv_n * (anchor_dist[j] - positive_dist[j]) / s;
      detail::L2Metric::accumulate(batch.anchor(i), batch.anchor(j), anchor_dist[j], scale,
                                   out.grad_anchors.data() + i * dim,
                                   out.grad_anchors.data() + j * dim);
      detail::L2Metric::accumulate(batch.positive(i), batch.positive(j), positive_dist[j],
                                   -scale, out.grad_positives.data() + i * dim,
                                   out.grad_positives.data() + j * dim);
    }
  }
  return out;
}

/// Sum of the three terms. The regularizer uses min(8, N-1) neighbors unless
/// told otherwise.
inline LossResult total_loss(const DescriptorBatch& batch, std::size_t neighbor_count = 0) {
  if (neighbor_count == 0) neighbor_count = std::min(kDefaultSosNeighbors, batch.size() - 1);
  LossResult out = triplet_margin_loss(batch);
  out += sos_regularizer(batch, neighbor_count);
  out += weighted_hamming_loss(batch);
  return out;
}

}  // namespace parloc
