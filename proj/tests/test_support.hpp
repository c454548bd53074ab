#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "parloc/descriptor_loss.hpp"

namespace parloc::testing {

/// Random batch with every value at least `min_abs` away from zero.
/// Positives are noisy copies of the anchors so both hinge branches occur.
inline DescriptorBatch random_batch(std::size_t n, std::size_t dim, std::mt19937_64& rng,
                                    double min_abs = 1e-2) {
  const double scale = 1.0 / std::sqrt(static_cast<double>(dim));
  std::normal_distribution<double> normal(0.0, scale);
  std::uniform_real_distribution<double> noise_level(0.05, 0.8);
  auto away_from_zero = [&](double x) {
    while (std::abs(x) < min_abs) x = normal(rng);
    return x;
  };
  std::vector<double> anchors(n * dim);
  std::vector<double> positives(n * dim);
  for (std::size_t i = 0; i < n; ++i) {
    const double level = noise_level(rng);
    for (std::size_t k = 0; k < dim; ++k) {
      const double a = away_from_zero(normal(rng));
      double p = a + level * normal(rng);
      if (std::abs(p) < min_abs) p = std::copysign(min_abs + std::abs(normal(rng)), p);
      anchors[i * dim + k] = a;
      positives[i * dim + k] = p;
    }
  }
  return DescriptorBatch(n, dim, std::move(anchors), std::move(positives));
}

struct GradientCheck {
  double relative_error = 0.0;
  double analytic_norm = 0.0;
};

/// Compares the analytic gradient of `loss` against central differences over
/// every coordinate of the batch: ||g - g_fd|| / max(||g||, ||g_fd||).
inline GradientCheck check_gradient(const std::function<LossResult(const DescriptorBatch&)>& loss,
                                    const DescriptorBatch& batch, double h = 1e-5) {
  const LossResult analytic = loss(batch);
  DescriptorBatch work = batch;
  double diff_sq = 0.0;
  double analytic_sq = 0.0;
  double numeric_sq = 0.0;
  auto probe = [&](std::vector<double>& values, const std::vector<double>& grad) {
    for (std::size_t k = 0; k < values.size(); ++k) {
      const double saved = values[k];
      values[k] = saved + h;
      const double up = loss(work).loss;
      values[k] = saved - h;
      const double down = loss(work).loss;
      values[k] = saved;
      const double numeric = (up - down) / (2.0 * h);
      diff_sq += (grad[k] - numeric) * (grad[k] - numeric);
      analytic_sq += grad[k] * grad[k];
      numeric_sq += numeric * numeric;
    }
  };
  probe(work.anchors(), analytic.grad_anchors);
  probe(work.positives(), analytic.grad_positives);
  GradientCheck out;
  out.analytic_norm = std::sqrt(analytic_sq);
  const double denom = std::max(std::sqrt(std::max(analytic_sq, numeric_sq)), 1e-12);
  out.relative_error = std::sqrt(diff_sq) / denom;
  if (analytic_sq == 0.0 && numeric_sq == 0.0) out.relative_error = 0.0;
  return out;
}

}  // namespace parloc::testing

#include <atomic>
#include <filesystem>
#include <string>
#include <unistd.h>

namespace parloc::testing {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("parloc_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string file(const std::string& name) const { return (path_ / name).string(); }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace parloc::testing
