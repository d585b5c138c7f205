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

// Linear heads trained by full-batch gradient descent: multinomial logistic
// (SoftMax), logistic regression, and squared-hinge linear SVM.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fusionpool/detail/parallel.hpp"
#include "fusionpool/heads/types.hpp"

namespace fusionpool::heads {

// Standardized training matrix.
struct Design {
  std::size_t n = 0;
  std::size_t d = 0;
  std::size_t classes = 0;
  std::vector<double> z;  // n × d
  std::vector<std::uint32_t> y;

  std::span<const double> row(std::size_t i) const { return {z.data() + i * d, d}; }
};

enum class LinearModel {
  kReferenceSoftmax,  // logits (0, z_1, ..., z_{C-1})
  kOvrLogistic,       // one sigmoid per class
  kOvrSquaredHinge,   // one margin per class
};

// Two-class logistic regression is the reference-class softmax with C = 2;
// both heads share that code path.
inline LinearModel linear_model_for(HeadKind kind, std::size_t classes) {
  switch (kind) {
    case HeadKind::kSoftMax: return LinearModel::kReferenceSoftmax;
    case HeadKind::kLogReg:
      return classes == 2 ? LinearModel::kReferenceSoftmax : LinearModel::kOvrLogistic;
    case HeadKind::kSvm: return LinearModel::kOvrSquaredHinge;
    default: fail(ErrorCode::kInvalidArgument, "not a linear head kind");
  }
}

inline bool row_is_free(LinearModel model, std::size_t c) {
  return !(model == LinearModel::kReferenceSoftmax && c == 0);
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) s += a[j] * b[j];
  return s;
}

inline double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

inline double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// Raw per-class linear scores; the reference row contributes 0.
inline void linear_logits(const LinearParams& p, std::span<const double> x, std::span<double> out) {
  for (std::size_t c = 0; c < p.rows; ++c) out[c] = dot(p.row(c), x) + p.bias[c];
}

inline void softmax_inplace(std::span<double> v) {
  const double m = *std::max_element(v.begin(), v.end());
  double s = 0.0;
  for (double& e : v) {
    e = std::exp(e - m);
    s += e;
  }
  for (double& e : v) e /= s;
}

// Per-class scores: probabilities for the logistic models, margins for SVM.
inline std::vector<double> linear_scores(LinearModel model, const LinearParams& p,
                                         std::span<const double> x) {
  std::vector<double> s(p.rows);
  linear_logits(p, x, s);
  if (model == LinearModel::kReferenceSoftmax) {
    softmax_inplace(s);
  } else if (model == LinearModel::kOvrLogistic) {
    double total = 0.0;
    for (double& v : s) {
      v = sigmoid(v);
      total += v;
    }
    for (double& v : s) v /= total;
  }
  return s;
}

struct LossGrad {
  double loss = 0.0;
  std::vector<double> grad_w;  // rows × cols
  std::vector<double> grad_b;  // rows
};

// Mean data loss plus (lambda/2)·||W||² over free rows, and its gradient.
// With no samples the data term is zero and the gradient is lambda·W.
inline LossGrad loss_and_gradient(LinearModel model, const Design& data, const LinearParams& p,
                                  double lambda, int jobs = 1) {
  const std::size_t C = p.rows, D = p.cols;
  const std::size_t width = C * D + C + 1;
  auto acc = detail::tree_reduce(data.n, width, jobs, [&](std::size_t begin, std::size_t end,
                                                          std::vector<double>& a) {
    std::vector<double> z(C), coef(C);
    for (std::size_t i = begin; i < end; ++i) {
      const auto x = data.row(i);
      const auto y = data.y[i];
      linear_logits(p, x, z);
      double loss = 0.0;
      switch (model) {
        case LinearModel::kReferenceSoftmax: {
          z[0] = 0.0;
          const double m = *std::max_element(z.begin(), z.end());
          double s = 0.0;
          for (std::size_t c = 0; c < C; ++c) s += std::exp(z[c] - m);
          const double log_s = std::log(s);
          loss = log_s + m - z[y];
          for (std::size_t c = 0; c < C; ++c) {
            coef[c] = std::exp(z[c] - m - log_s) - (c == y ? 1.0 : 0.0);
          }
          coef[0] = 0.0;
          break;
        }
        case LinearModel::kOvrLogistic:
          for (std::size_t c = 0; c < C; ++c) {
            const double t = c == y ? 1.0 : 0.0;
            loss += softplus(z[c]) - t * z[c];
            coef[c] = sigmoid(z[c]) - t;
          }
          break;
        case LinearModel::kOvrSquaredHinge:
          for (std::size_t c = 0; c < C; ++c) {
            const double t = c == y ? 1.0 : -1.0;
            const double slack = 1.0 - t * z[c];
            if (slack > 0.0) {
              loss += slack * slack;
              coef[c] = -2.0 * slack * t;
            } else {
              coef[c] = 0.0;
            }
          }
          break;
      }
      for (std::size_t c = 0; c < C; ++c) {
        if (coef[c] == 0.0) continue;
        double* g = a.data() + c * D;
        for (std::size_t j = 0; j < D; ++j) g[j] += coef[c] * x[j];
        a[C * D + c] += coef[c];
      }
      a[width - 1] += loss;
    }
  });

  LossGrad out;
  out.grad_w.assign(C * D, 0.0);
  out.grad_b.assign(C, 0.0);
  const double inv_n = data.n > 0 ? 1.0 / static_cast<double>(data.n) : 0.0;
  double penalty = 0.0;
  for (std::size_t c = 0; c < C; ++c) {
    if (!row_is_free(model, c)) continue;
    for (std::size_t j = 0; j < D; ++j) {
      const double w = p.weights[c * D + j];
      out.grad_w[c * D + j] = acc[c * D + j] * inv_n + lambda * w;
      penalty += w * w;
    }
    out.grad_b[c] = acc[C * D + c] * inv_n;
  }
  out.loss = acc[width - 1] * inv_n + 0.5 * lambda * penalty;
  return out;
}

inline double max_abs(const LossGrad& g) {
  double m = 0.0;
  for (double v : g.grad_w) m = std::max(m, std::abs(v));
  for (double v : g.grad_b) m = std::max(m, std::abs(v));
  return m;
}

// Gradient descent from W = 0 with a fixed step.
inline LinearParams train_linear(LinearModel model, const Design& data, const HeadConfig& cfg,
                                 TrainingDiagnostics& diag, std::vector<std::string>& warnings) {
  LinearParams p;
  p.rows = data.classes;
  p.cols = data.d;
  p.weights.assign(p.rows * p.cols, 0.0);
  p.bias.assign(p.rows, 0.0);
  diag.loss_history.clear();
  diag.loss_history.reserve(cfg.epochs + 1);
  bool increased = false;
  for (std::uint32_t e = 0; e < cfg.epochs; ++e) {
    const auto lg = loss_and_gradient(model, data, p, cfg.lambda, cfg.jobs);
    if (!std::isfinite(lg.loss)) {
      warnings.push_back("loss became non-finite at epoch " + std::to_string(e) +
                         "; training stopped");
      break;
    }
    if (!diag.loss_history.empty() && lg.loss > diag.loss_history.back() + 1e-9 && !increased) {
      increased = true;
      warnings.push_back("loss increased at epoch " + std::to_string(e) +
                         "; step size may be too large");
    }
    diag.loss_history.push_back(lg.loss);
    for (std::size_t i = 0; i < p.weights.size(); ++i) p.weights[i] -= cfg.learning_rate * lg.grad_w[i];
    for (std::size_t c = 0; c < p.rows; ++c) p.bias[c] -= cfg.learning_rate * lg.grad_b[c];
  }
  const auto final_lg = loss_and_gradient(model, data, p, cfg.lambda, cfg.jobs);
  if (!diag.loss_history.empty() && final_lg.loss > diag.loss_history.back() + 1e-9 && !increased) {
    warnings.push_back("loss increased on the final epoch");
  }
  diag.loss_history.push_back(final_lg.loss);
  const double gnorm = max_abs(final_lg);
  if (gnorm > 1e-3) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "not converged: max |gradient| %.3g after %u epochs", gnorm,
                  cfg.epochs);
    warnings.emplace_back(buf);
  }
  return p;
}

// Largest relative disagreement between the analytic gradient and central
// differences (step 1e-5), at a random parameter point drawn from `seed`.
// At most `max_coords` free coordinates are probed, chosen by the same seed.
inline double gradient_check(LinearModel model, const Design& data, std::size_t classes,
                             double lambda, std::uint64_t seed, std::size_t max_coords = 2000) {
  LinearParams p;
  p.rows = classes;
  p.cols = data.d;
  p.weights.assign(classes * data.d, 0.0);
  p.bias.assign(classes, 0.0);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 0.5);
  for (std::size_t c = 0; c < classes; ++c) {
    if (!row_is_free(model, c)) continue;
    for (std::size_t j = 0; j < data.d; ++j) p.weights[c * data.d + j] = normal(rng);
    p.bias[c] = normal(rng);
  }
  const auto analytic = loss_and_gradient(model, data, p, lambda);

  // Coordinate k < rows*cols is a weight, otherwise a bias.
  std::vector<std::size_t> coords;
  for (std::size_t c = 0; c < classes; ++c) {
    if (!row_is_free(model, c)) continue;
    for (std::size_t j = 0; j < data.d; ++j) coords.push_back(c * data.d + j);
    coords.push_back(classes * data.d + c);
  }
  if (coords.size() > max_coords) {
    std::shuffle(coords.begin(), coords.end(), rng);
    coords.resize(max_coords);
    std::sort(coords.begin(), coords.end());
  }
  constexpr double h = 1e-5;
  double worst = 0.0;
  for (auto k : coords) {
    double& slot = k < classes * data.d ? p.weights[k] : p.bias[k - classes * data.d];
    const double a = k < classes * data.d ? analytic.grad_w[k] : analytic.grad_b[k - classes * data.d];
    const double saved = slot;
    slot = saved + h;
    const double up = loss_and_gradient(model, data, p, lambda).loss;
    slot = saved - h;
    const double down = loss_and_gradient(model, data, p, lambda).loss;
    slot = saved;
    const double numeric = (up - down) / (2.0 * h);
    const double denom = std::max({std::abs(a), std::abs(numeric), 1e-6});
    worst = std::max(worst, std::abs(a - numeric) / denom);
  }
  return worst;
}

}  // namespace fusionpool::heads
