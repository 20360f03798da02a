/* Copyright 2026 The sedkit Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/
#pragma once

// Test-only oracles: scalar-loop evaluations, brute-force counting and a
// central finite-difference checker. Everything here is written directly
// from the operator definitions and stays independent of the library's
// compute paths.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <random>
#include <vector>

#include "sedkit/pooling.hpp"
#include "sedkit/tensor.hpp"

namespace oracle {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Two-step attention evaluated element by element, shared step-1 maps.
// z: {K,T,F}; returns probabilities of length K; optionally exposes the
// intermediates.
struct TwoStepTrace {
  std::vector<double> probs;                       // K
  std::vector<std::vector<std::vector<double>>> a1hat;  // [K][T][F]
  std::vector<std::vector<double>> p1;             // [K][T]
  std::vector<std::vector<double>> a2hat;          // [K][T]
};

inline TwoStepTrace two_step_attention(const sedkit::Tensor& z,
                                       const sedkit::AttentionParams& p) {
  const int K = z.dim(0), T = z.dim(1), F = z.dim(2);
  TwoStepTrace tr;
  tr.a1hat.assign(K, std::vector<std::vector<double>>(T, std::vector<double>(F, 0.0)));
  tr.p1.assign(K, std::vector<double>(T, 0.0));
  tr.a2hat.assign(K, std::vector<double>(T, 0.0));
  tr.probs.assign(K, 0.0);

  for (int k = 0; k < K; ++k) {
    const int g = p.per_class_step1 ? k : 0;
    for (int t = 0; t < T; ++t) {
      std::vector<double> a1(F), c1(F);
      for (int fo = 0; fo < F; ++fo) {
        double la = p.b_a1[fo], lc = p.b_c1[fo];
        for (int fi = 0; fi < F; ++fi) {
          la += p.w_a1.at3(g, fo, fi) * z.at3(k, t, fi);
          lc += p.w_c1.at3(g, fo, fi) * z.at3(k, t, fi);
        }
        a1[fo] = sigmoid(la);
        c1[fo] = sigmoid(lc);
      }
      double denom = 0.0;
      for (int f = 0; f < F; ++f) denom += std::exp(a1[f]);
      double acc = 0.0;
      for (int f = 0; f < F; ++f) {
        const double w = std::exp(a1[f]) / denom;
        tr.a1hat[k][t][f] = w;
        acc += c1[f] * w;
      }
      tr.p1[k][t] = acc;
    }
  }

  // step 2: dense along classes at each t, softmax over time per class.
  std::vector<std::vector<double>> a2(K, std::vector<double>(T)),
      c2(K, std::vector<double>(T));
  for (int t = 0; t < T; ++t) {
    for (int ko = 0; ko < K; ++ko) {
      double la = p.b_a2[ko], lc = p.b_c2[ko];
      for (int ki = 0; ki < K; ++ki) {
        la += p.w_a2.at2(ko, ki) * tr.p1[ki][t];
        lc += p.w_c2.at2(ko, ki) * tr.p1[ki][t];
      }
      a2[ko][t] = sigmoid(la);
      c2[ko][t] = sigmoid(lc);
    }
  }
  for (int k = 0; k < K; ++k) {
    double denom = 0.0;
    for (int t = 0; t < T; ++t) denom += std::exp(a2[k][t]);
    double acc = 0.0;
    for (int t = 0; t < T; ++t) {
      const double w = std::exp(a2[k][t]) / denom;
      tr.a2hat[k][t] = w;
      acc += c2[k][t] * w;
    }
    tr.probs[k] = acc;
  }
  return tr;
}

// Single-step attention: softmax jointly over all T*F locations per class,
// classification branch sigmoid-squashed. z: {K,T,F}.
inline std::vector<double> single_step_attention(const sedkit::Tensor& z,
                                                 const sedkit::AttentionParams& p) {
  const int K = z.dim(0), T = z.dim(1), F = z.dim(2);
  std::vector<double> probs(K, 0.0);
  for (int k = 0; k < K; ++k) {
    const int g = p.per_class_step1 ? k : 0;
    std::vector<double> a(static_cast<size_t>(T) * F), c(a.size());
    for (int t = 0; t < T; ++t)
      for (int fo = 0; fo < F; ++fo) {
        double la = p.b_a1[fo], lc = p.b_c1[fo];
        for (int fi = 0; fi < F; ++fi) {
          la += p.w_a1.at3(g, fo, fi) * z.at3(k, t, fi);
          lc += p.w_c1.at3(g, fo, fi) * z.at3(k, t, fi);
        }
        a[t * F + fo] = la;  // raw logits
        c[t * F + fo] = sigmoid(lc);
      }
    const double mx = *std::max_element(a.begin(), a.end());
    double denom = 0.0;
    for (double v : a) denom += std::exp(v - mx);
    double acc = 0.0;
    for (size_t i = 0; i < a.size(); ++i) acc += c[i] * std::exp(a[i] - mx) / denom;
    probs[k] = acc;
  }
  return probs;
}

// GWRP pre-sigmoid value by direct evaluation of the weight formula.
inline double gwrp_presigmoid(std::vector<double> values, double r) {
  std::stable_sort(values.begin(), values.end(), std::greater<double>());
  double w = 1.0, num = 0.0, den = 0.0;
  for (double v : values) {
    num += w * v;
    den += w;
    w *= r;
  }
  return num / den;
}

// Pairwise AUC: fraction of (positive, negative) pairs ordered correctly,
// ties at 1/2.
inline double auc_pairwise(const std::vector<double>& scores,
                           const std::vector<int>& labels) {
  double won = 0.0;
  int64_t pairs = 0;
  for (size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] == 0) continue;
    for (size_t j = 0; j < scores.size(); ++j) {
      if (labels[j] != 0) continue;
      ++pairs;
      if (scores[i] > scores[j])
        won += 1.0;
      else if (scores[i] == scores[j])
        won += 0.5;
    }
  }
  return won / static_cast<double>(pairs);
}

struct PrecisionCounts {
  int64_t tp = 0, fp = 0;
};

inline PrecisionCounts count_class(const sedkit::Tensor& scores,
                                   const sedkit::Tensor& labels, int k,
                                   double threshold) {
  PrecisionCounts c;
  for (int i = 0; i < scores.dim(0); ++i) {
    if (scores.at2(i, k) >= threshold) {
      if (labels.at2(i, k) != 0.0)
        ++c.tp;
      else
        ++c.fp;
    }
  }
  return c;
}

inline double micro_precision_counting(const sedkit::Tensor& scores,
                                       const sedkit::Tensor& labels, double threshold) {
  int64_t tp = 0, fp = 0;
  for (int k = 0; k < scores.dim(1); ++k) {
    const auto c = count_class(scores, labels, k, threshold);
    tp += c.tp;
    fp += c.fp;
  }
  return tp + fp == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
}

inline double macro_precision_counting(const sedkit::Tensor& scores,
                                       const sedkit::Tensor& labels, double threshold) {
  double sum = 0.0;
  for (int k = 0; k < scores.dim(1); ++k) {
    const auto c = count_class(scores, labels, k, threshold);
    sum += c.tp + c.fp == 0 ? 0.0 : static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
  }
  return sum / scores.dim(1);
}

// Central finite differences against analytic gradients.
struct FdResult {
  double max_rel_err = 0.0;
  int64_t checked = 0;
};

inline double rel_err(double a, double b) {
  return std::abs(a - b) / (std::max(std::abs(a), std::abs(b)) + 1e-10);
}

// f() must recompute the scalar objective from current storage; grad holds
// the analytic gradient for the storage behind `x`.
inline FdResult fd_check(const std::function<double()>& f, double* x,
                         const double* grad, int64_t n, double step,
                         int64_t max_coords = 0, uint64_t seed = 0) {
  std::vector<int64_t> coords;
  if (max_coords > 0 && n > max_coords) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int64_t> dist(0, n - 1);
    for (int64_t i = 0; i < max_coords; ++i) coords.push_back(dist(rng));
  } else {
    coords.resize(n);
    std::iota(coords.begin(), coords.end(), 0);
  }
  FdResult res;
  for (int64_t i : coords) {
    const double orig = x[i];
    x[i] = orig + step;
    const double fp = f();
    x[i] = orig - step;
    const double fm = f();
    x[i] = orig;
    const double numeric = (fp - fm) / (2.0 * step);
    res.max_rel_err = std::max(res.max_rel_err, rel_err(grad[i], numeric));
    ++res.checked;
  }
  return res;
}

inline sedkit::Tensor random_tensor(std::vector<int> shape, uint64_t seed,
                                    double lo = -1.0, double hi = 1.0) {
  sedkit::Tensor t(std::move(shape));
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(lo, hi);
  for (int64_t i = 0; i < t.size(); ++i) t[i] = dist(rng);
  return t;
}

}  // namespace oracle
