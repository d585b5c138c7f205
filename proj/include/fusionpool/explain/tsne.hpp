// Copyright 2026 The FusionPool Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Exact t-SNE to two dimensions.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "fusionpool/error.hpp"
#include "fusionpool/fusion_pool.hpp"
#include "fusionpool/heads/types.hpp"

namespace fusionpool {

struct TsneConfig {
  double perplexity = 30.0;
  std::uint32_t iterations = 1000;
  double exaggeration = 12.0;
  std::uint32_t exaggeration_iterations = 250;
  double learning_rate = 200.0;
  double initial_momentum = 0.5;
  double final_momentum = 0.8;
  std::uint32_t momentum_switch = 250;
  double init_sigma = 1e-4;
  std::uint64_t seed = 0;
};

struct Embedding2D {
  std::vector<double> points;  // N × 2
  std::vector<std::uint32_t> labels;
  std::vector<std::uint64_t> sample_ids;
  double kl_at_switch = 0.0;   // after `momentum_switch` iterations
  double final_kl = 0.0;
  TsneConfig config;

  std::size_t size() const { return points.size() / 2; }
};

namespace tsne_detail {

inline constexpr double kEntropyTolerance = 1e-5;
inline constexpr int kMaxBisection = 50;

// Squared Euclidean distances of standardized rows.
inline std::vector<double> pairwise_sq(const std::vector<double>& x, std::size_t n, std::size_t d) {
  std::vector<double> out(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < d; ++k) {
        const double t = x[i * d + k] - x[j * d + k];
        s += t * t;
      }
      out[i * n + j] = out[j * n + i] = s;
    }
  }
  return out;
}

struct Conditional {
  std::vector<double> p;        // n × n, row i is p_{j|i}
  std::vector<double> entropy;  // achieved entropy per row (nats)
};

// Row-wise Gaussian affinities. The precision of each row is bisected in log
// space until its entropy matches log(perplexity).
inline Conditional conditional_affinities(const std::vector<double>& dist, std::size_t n,
                                          double perplexity) {
  Conditional c;
  c.p.assign(n * n, 0.0);
  c.entropy.assign(n, 0.0);
  const double target = std::log(perplexity);
  std::vector<double> row(n);
  for (std::size_t i = 0; i < n; ++i) {
    double dmin = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) dmin = std::min(dmin, dist[i * n + j]);
    }
    auto eval = [&](double beta) {
      double sum = 0.0, wsum = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        if (j == i) {
          row[j] = 0.0;
          continue;
        }
        const double d = dist[i * n + j] - dmin;
        row[j] = std::exp(-beta * d);
        sum += row[j];
        wsum += d * row[j];
      }
      for (std::size_t j = 0; j < n; ++j) row[j] /= sum;
      return std::log(sum) + beta * wsum / sum;
    };
    double lo = -50.0, hi = 50.0, mid = 0.0;
    double h = eval(std::exp(mid));
    for (int step = 0; step < kMaxBisection && std::abs(h - target) >= kEntropyTolerance; ++step) {
      if (h > target) {
        lo = mid;
      } else {
        hi = mid;
      }
      mid = 0.5 * (lo + hi);
      h = eval(std::exp(mid));
    }
    c.entropy[i] = h;
    std::copy(row.begin(), row.end(), c.p.begin() + static_cast<std::ptrdiff_t>(i * n));
  }
  return c;
}

// p_ij = (p_{j|i} + p_{i|j}) / 2n.
inline std::vector<double> symmetrize(const std::vector<double>& cond, std::size_t n) {
  std::vector<double> p(n * n, 0.0);
  const double scale = 1.0 / (2.0 * static_cast<double>(n));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i != j) p[i * n + j] = (cond[i * n + j] + cond[j * n + i]) * scale;
    }
  }
  return p;
}

inline constexpr double kTiny = 1e-300;

// Student-t kernel weights (1 + |y_i - y_j|²)^-1 and their sum.
inline double kernel(const std::vector<double>& y, std::size_t n, std::vector<double>& num) {
  double z = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    num[i * n + i] = 0.0;
    for (std::size_t j = i + 1; j < n; ++j) {
      const double dx = y[2 * i] - y[2 * j], dy = y[2 * i + 1] - y[2 * j + 1];
      const double v = 1.0 / (1.0 + dx * dx + dy * dy);
      num[i * n + j] = num[j * n + i] = v;
      z += 2.0 * v;
    }
  }
  return z;
}

inline double kl_divergence(const std::vector<double>& p, const std::vector<double>& y,
                            std::size_t n) {
  std::vector<double> num(n * n);
  const double z = kernel(y, n, num);
  double kl = 0.0;
  for (std::size_t i = 0; i < n * n; ++i) {
    if (p[i] > 0.0) kl += p[i] * std::log(p[i] / std::max(num[i] / z, kTiny));
  }
  return kl;
}

}  // namespace tsne_detail

// Rows are standardized per dimension before affinities are computed.
inline Embedding2D tsne(std::span<const std::vector<float>> rows, const TsneConfig& cfg = {}) {
  const std::size_t n = rows.size();
  if (n < 4) fail(ErrorCode::kInfeasible, "t-SNE needs at least 4 points");
  if (!(cfg.perplexity > 0.0)) fail(ErrorCode::kInvalidArgument, "perplexity must be > 0");
  if (cfg.perplexity >= static_cast<double>(n - 1) / 3.0) {
    fail(ErrorCode::kInfeasible, "perplexity " + std::to_string(cfg.perplexity) +
                                     " is too large for " + std::to_string(n) +
                                     " points (needs < (N-1)/3)");
  }
  const std::size_t d = rows[0].size();
  if (d == 0) fail(ErrorCode::kInvalidArgument, "t-SNE input has zero dimensions");
  for (const auto& r : rows) {
    if (r.size() != d) fail(ErrorCode::kDimensionMismatch, "t-SNE rows differ in length");
    for (float v : r) {
      if (!std::isfinite(v)) fail(ErrorCode::kNonFinite, "non-finite t-SNE input");
    }
  }

  const auto s = Standardizer::fit(rows, d);
  std::vector<double> x(n * d);
  for (std::size_t i = 0; i < n; ++i) s.apply(rows[i], {x.data() + i * d, d});
  const auto dist = tsne_detail::pairwise_sq(x, n, d);
  const auto cond = tsne_detail::conditional_affinities(dist, n, cfg.perplexity);
  const auto p = tsne_detail::symmetrize(cond.p, n);

  Embedding2D out;
  out.config = cfg;
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> normal(0.0, cfg.init_sigma);
  std::vector<double> y(2 * n), update(2 * n, 0.0), gains(2 * n, 1.0), grad(2 * n);
  for (auto& v : y) v = normal(rng);

  std::vector<double> num(n * n);
  for (std::uint32_t it = 0; it < cfg.iterations; ++it) {
    const double exag = it < cfg.exaggeration_iterations ? cfg.exaggeration : 1.0;
    const double momentum = it < cfg.momentum_switch ? cfg.initial_momentum : cfg.final_momentum;
    const double z = tsne_detail::kernel(y, n, num);
    std::fill(grad.begin(), grad.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        if (i == j) continue;
        const double q = num[i * n + j] / z;
        const double m = 4.0 * (exag * p[i * n + j] - q) * num[i * n + j];
        grad[2 * i] += m * (y[2 * i] - y[2 * j]);
        grad[2 * i + 1] += m * (y[2 * i + 1] - y[2 * j + 1]);
      }
    }
    for (std::size_t k = 0; k < 2 * n; ++k) {
      const bool same = (grad[k] > 0.0) == (update[k] > 0.0);
      gains[k] = same ? std::max(gains[k] * 0.8, 0.01) : gains[k] + 0.2;
      update[k] = momentum * update[k] - cfg.learning_rate * gains[k] * grad[k];
      y[k] += update[k];
    }
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      mx += y[2 * i];
      my += y[2 * i + 1];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
      y[2 * i] -= mx;
      y[2 * i + 1] -= my;
    }
    if (it + 1 == cfg.momentum_switch) out.kl_at_switch = tsne_detail::kl_divergence(p, y, n);
  }
  for (double v : y) {
    if (!std::isfinite(v)) fail(ErrorCode::kNonFinite, "t-SNE diverged");
  }
  out.final_kl = tsne_detail::kl_divergence(p, y, n);
  if (cfg.iterations < cfg.momentum_switch) out.kl_at_switch = out.final_kl;
  out.points = std::move(y);
  return out;
}

// Embeds every pool record; labels and sample ids follow record order.
inline Embedding2D tsne(const FeaturePool& pool, const TsneConfig& cfg = {}) {
  std::vector<std::vector<float>> rows;
  rows.reserve(pool.size());
  for (const auto& r : pool.records) rows.push_back(r.features);
  auto e = tsne(std::span<const std::vector<float>>(rows), cfg);
  for (const auto& r : pool.records) {
    e.labels.push_back(r.global_class);
    e.sample_ids.push_back(r.sample_id);
  }
  return e;
}

}  // namespace fusionpool
