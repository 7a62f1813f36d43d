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

// L2-regularized logistic regression over feature-union vectors.
//
// The solver minimizes
//
//   f(w, b) = sum_i c_i * log(1 + exp(-y_i (w.x_i + b))) + (l2 / 2) |w|^2
//
// with y_i in {-1, +1}, per-sample weights c_i and an unregularized bias,
// using truncated Newton steps (conjugate gradient on Hessian-vector
// products) and Armijo backtracking, so every accepted step decreases f.

#ifndef CMINE_CLASSIFY_H_
#define CMINE_CLASSIFY_H_

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cmine/features.h"
#include "json.hpp"

namespace cmine::classify {

using features::FeatureVector;

enum class ClassWeighting { kNone, kBalanced };

struct TrainConfig {
  double l2_strength = 1.0;
  double tolerance = 1e-6;  // on the full gradient norm
  int max_iterations = 1000;
  ClassWeighting class_weighting = ClassWeighting::kNone;
  uint64_t seed = 0;

  nlohmann::json ToJson() const;
  static TrainConfig FromJson(const nlohmann::json& j);
};

// Objective, gradient and Hessian-vector product over parameter vectors
// theta = (w_0 .. w_{d-1}, b).
class LogisticObjective {
 public:
  // Throws DataError on size mismatch, non-finite features, or labels
  // outside {0, 1}.
  LogisticObjective(std::span<const FeatureVector> x, std::span<const int> y,
                    const TrainConfig& config);

  size_t dimension() const { return dim_; }
  size_t num_params() const { return dim_ + 1; }

  double Value(std::span<const double> theta) const;
  // Returns f(theta), fills gradient.
  double Gradient(std::span<const double> theta,
                  std::vector<double>& gradient) const;
  // H(theta) * v, using curvature cached by the last Gradient call.
  void HessianTimes(std::span<const double> v, std::vector<double>& out) const;

 private:
  double Margin(size_t i, std::span<const double> theta) const;
  double Dot(size_t i, std::span<const double> v) const;
  void AddScaled(size_t i, double scale, std::vector<double>& out) const;

  std::span<const FeatureVector> x_;
  std::vector<double> sign_;    // +1 / -1
  std::vector<double> weight_;  // c_i
  double l2_;
  size_t dim_;
  mutable std::vector<double> curvature_;  // c_i * s_i * (1 - s_i)
};

struct TrainTrace {
  std::vector<double> objective;  // after every accepted iterate, incl. start
  std::vector<double> gradient_norm;
  int iterations = 0;
  bool converged = false;
};

class LogisticModel {
 public:
  LogisticModel() = default;
  LogisticModel(std::vector<double> weights, double bias,
                double threshold = 0.5);

  const std::vector<double>& weights() const { return weights_; }
  double bias() const { return bias_; }
  double threshold() const { return threshold_; }
  void set_threshold(double threshold);

  const TrainConfig& train_config() const { return train_config_; }
  void set_train_config(const TrainConfig& c) { train_config_ = c; }

  std::shared_ptr<const features::FeatureUnionModel> layout() const {
    return layout_;
  }
  void set_layout(std::shared_ptr<const features::FeatureUnionModel> layout);

  const nlohmann::json& provenance() const { return provenance_; }
  void set_provenance(nlohmann::json p) { provenance_ = std::move(p); }

  // w.x + b. Throws UsageError when x does not match the weight layout.
  double Decision(const FeatureVector& x) const;

 private:
  std::vector<double> weights_;
  double bias_ = 0.0;
  double threshold_ = 0.5;
  TrainConfig train_config_;
  std::shared_ptr<const features::FeatureUnionModel> layout_;
  nlohmann::json provenance_ = nlohmann::json::object();
};

// Requires |x| == |y| >= 2 with both classes present.
LogisticModel Train(std::span<const FeatureVector> x, std::span<const int> y,
                    const TrainConfig& config, TrainTrace* trace = nullptr);

double Sigmoid(double z);
double PredictProba(const LogisticModel& model, const FeatureVector& x);
// Fairness iff probability >= threshold.
Label PredictLabel(const LogisticModel& model, const FeatureVector& x);

inline constexpr int kModelFormatVersion = 1;

nlohmann::json ModelToJson(const LogisticModel& model);
LogisticModel ModelFromJson(const nlohmann::json& j);
// Writes via a temporary file and rename, so a failed save leaves no
// partial artifact.
void SaveModel(const LogisticModel& model, const std::filesystem::path& path);
LogisticModel LoadModel(const std::filesystem::path& path);

}  // namespace cmine::classify

#endif  // CMINE_CLASSIFY_H_
