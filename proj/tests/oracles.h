// Copyright 2026 The concern-miner Authors.
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

// Independent reference implementations used to check the library. They
// favour the most literal form of each definition over speed and share no
// code with src/.

#ifndef CMINE_TESTS_ORACLES_H_
#define CMINE_TESTS_ORACLES_H_

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

namespace cmine::oracle {

struct Metrics {
  int64_t tp = 0, fp = 0, tn = 0, fn = 0;
  std::optional<double> precision, recall, f1, accuracy;
};

// Counts and ratios straight from the confusion-table definitions.
inline Metrics BruteMetrics(const std::vector<int>& y_true,
                            const std::vector<int>& y_pred) {
  Metrics m;
  for (size_t i = 0; i < y_true.size(); ++i) {
    if (y_true[i] == 1 && y_pred[i] == 1) m.tp++;
    if (y_true[i] == 0 && y_pred[i] == 1) m.fp++;
    if (y_true[i] == 0 && y_pred[i] == 0) m.tn++;
    if (y_true[i] == 1 && y_pred[i] == 0) m.fn++;
  }
  if (m.tp + m.fp > 0) {
    m.precision = static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fp);
  }
  if (m.tp + m.fn > 0) {
    m.recall = static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fn);
  }
  const int64_t n = m.tp + m.fp + m.tn + m.fn;
  if (n > 0) {
    m.accuracy = static_cast<double>(m.tp + m.tn) / static_cast<double>(n);
  }
  if (m.precision && m.recall) {
    const double p = *m.precision, r = *m.recall;
    m.f1 = p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
  }
  return m;
}

// Fraction of (positive, negative) pairs ranked correctly; ties count half.
inline std::optional<double> PairwiseAuc(const std::vector<int>& y_true,
                                         const std::vector<double>& scores) {
  double credit = 0.0;
  int64_t pairs = 0;
  for (size_t i = 0; i < y_true.size(); ++i) {
    if (y_true[i] != 1) continue;
    for (size_t j = 0; j < y_true.size(); ++j) {
      if (y_true[j] != 0) continue;
      ++pairs;
      if (scores[i] > scores[j]) {
        credit += 1.0;
      } else if (scores[i] == scores[j]) {
        credit += 0.5;
      }
    }
  }
  if (pairs == 0) return std::nullopt;
  return credit / static_cast<double>(pairs);
}

inline double Euclid(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

// s(i) for every point: a = mean distance to the rest of its own cluster,
// b = smallest mean distance to another cluster; singletons score 0.
inline std::vector<double> NaiveSilhouette(
    const std::vector<std::vector<double>>& points,
    const std::vector<int>& labels) {
  const size_t n = points.size();
  std::vector<double> s(n, 0.0);
  for (size_t i = 0; i < n; ++i) {
    double own_sum = 0.0;
    int own_count = 0;
    for (size_t j = 0; j < n; ++j) {
      if (j != i && labels[j] == labels[i]) {
        own_sum += Euclid(points[i], points[j]);
        ++own_count;
      }
    }
    if (own_count == 0) continue;
    const double a = own_sum / own_count;
    double b = std::numeric_limits<double>::infinity();
    std::vector<int> seen;
    for (size_t j = 0; j < n; ++j) {
      const int other = labels[j];
      if (other == labels[i]) continue;
      bool done = false;
      for (int x : seen) done = done || x == other;
      if (done) continue;
      seen.push_back(other);
      double sum = 0.0;
      int count = 0;
      for (size_t m = 0; m < n; ++m) {
        if (labels[m] == other) {
          sum += Euclid(points[i], points[m]);
          ++count;
        }
      }
      b = std::min(b, sum / count);
    }
    const double denom = std::max(a, b);
    s[i] = denom > 0.0 ? (b - a) / denom : 0.0;
  }
  return s;
}

// Minimum inertia over every split of 1-D points into two non-empty groups.
struct TwoSplit {
  double inertia = std::numeric_limits<double>::infinity();
  std::vector<int> labels;
};

inline TwoSplit BruteForceTwoMeans(const std::vector<double>& x) {
  const size_t n = x.size();
  TwoSplit best;
  // Point 0 is pinned to group 0 so each split is visited once.
  for (uint64_t mask = 1; mask < (uint64_t{1} << (n - 1)); ++mask) {
    std::vector<int> labels(n, 0);
    for (size_t i = 1; i < n; ++i) labels[i] = (mask >> (i - 1)) & 1;
    double sum[2] = {0, 0};
    int count[2] = {0, 0};
    for (size_t i = 0; i < n; ++i) {
      sum[labels[i]] += x[i];
      count[labels[i]]++;
    }
    double inertia = 0.0;
    for (size_t i = 0; i < n; ++i) {
      const double c = sum[labels[i]] / count[labels[i]];
      inertia += (x[i] - c) * (x[i] - c);
    }
    if (inertia < best.inertia) {
      best.inertia = inertia;
      best.labels = labels;
    }
  }
  return best;
}

// L2-regularized logistic loss on dense rows, theta = (w, b):
//   sum_i log(1 + exp(-s_i (w.x_i + b))) + l2 / 2 |w|^2, s_i in {-1, +1}.
inline double LogisticLoss(const std::vector<std::vector<double>>& x,
                           const std::vector<int>& y, double l2,
                           const std::vector<double>& theta) {
  const size_t d = theta.size() - 1;
  double f = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    double z = theta[d];
    for (size_t k = 0; k < d; ++k) z += theta[k] * x[i][k];
    const double m = (y[i] == 1 ? 1.0 : -1.0) * z;
    f += m > 0 ? std::log1p(std::exp(-m)) : -m + std::log1p(std::exp(m));
  }
  for (size_t k = 0; k < d; ++k) f += 0.5 * l2 * theta[k] * theta[k];
  return f;
}

// Long-run plain gradient descent with a fixed small step followed by
// exact Newton polishing on the small dense problem. Returns the minimum.
inline double ReferenceLogisticMinimum(
    const std::vector<std::vector<double>>& x, const std::vector<int>& y,
    double l2) {
  const size_t d = x[0].size();
  const size_t p = d + 1;
  std::vector<double> theta(p, 0.0);
  auto grad_hess = [&](std::vector<double>& g, std::vector<double>& h) {
    g.assign(p, 0.0);
    h.assign(p * p, 0.0);
    for (size_t i = 0; i < x.size(); ++i) {
      std::vector<double> row(x[i]);
      row.push_back(1.0);
      double z = 0.0;
      for (size_t k = 0; k < p; ++k) z += theta[k] * row[k];
      const double t = y[i] == 1 ? 1.0 : 0.0;
      const double prob = 1.0 / (1.0 + std::exp(-z));
      for (size_t k = 0; k < p; ++k) {
        g[k] += (prob - t) * row[k];
        for (size_t l = 0; l < p; ++l) {
          h[k * p + l] += prob * (1.0 - prob) * row[k] * row[l];
        }
      }
    }
    for (size_t k = 0; k < d; ++k) {
      g[k] += l2 * theta[k];
      h[k * p + k] += l2;
    }
  };
  std::vector<double> g, h;
  for (int it = 0; it < 200000; ++it) {
    grad_hess(g, h);
    for (size_t k = 0; k < p; ++k) theta[k] -= 0.01 * g[k];
  }
  for (int it = 0; it < 50; ++it) {
    grad_hess(g, h);
    // Gaussian elimination with partial pivoting on h * step = g.
    std::vector<double> a = h, b = g;
    for (size_t c = 0; c < p; ++c) {
      size_t pivot = c;
      for (size_t r = c + 1; r < p; ++r) {
        if (std::fabs(a[r * p + c]) > std::fabs(a[pivot * p + c])) pivot = r;
      }
      for (size_t k = 0; k < p; ++k) std::swap(a[c * p + k], a[pivot * p + k]);
      std::swap(b[c], b[pivot]);
      for (size_t r = c + 1; r < p; ++r) {
        const double f = a[r * p + c] / a[c * p + c];
        for (size_t k = c; k < p; ++k) a[r * p + k] -= f * a[c * p + k];
        b[r] -= f * b[c];
      }
    }
    std::vector<double> step(p);
    for (size_t c = p; c-- > 0;) {
      double s = b[c];
      for (size_t k = c + 1; k < p; ++k) s -= a[c * p + k] * step[k];
      step[c] = s / a[c * p + c];
    }
    for (size_t k = 0; k < p; ++k) theta[k] -= step[k];
  }
  return LogisticLoss(x, y, l2, theta);
}

}  // namespace cmine::oracle

#endif  // CMINE_TESTS_ORACLES_H_
