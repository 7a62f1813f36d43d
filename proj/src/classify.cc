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

#include "cmine/classify.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace cmine::classify {

using nlohmann::json;

json TrainConfig::ToJson() const {
  return {{"l2_strength", l2_strength},
          {"tolerance", tolerance},
          {"max_iterations", max_iterations},
          {"class_weighting",
           class_weighting == ClassWeighting::kBalanced ? "balanced" : "none"},
          {"seed", seed}};
}

TrainConfig TrainConfig::FromJson(const json& j) {
  TrainConfig c;
  c.l2_strength = j.value("l2_strength", c.l2_strength);
  c.tolerance = j.value("tolerance", c.tolerance);
  c.max_iterations = j.value("max_iterations", c.max_iterations);
  std::string weighting = j.value("class_weighting", std::string("none"));
  if (weighting == "balanced") {
    c.class_weighting = ClassWeighting::kBalanced;
  } else if (weighting != "none") {
    throw UsageError("class_weighting must be 'none' or 'balanced'");
  }
  c.seed = j.value("seed", c.seed);
  if (!(c.l2_strength > 0) || !(c.tolerance > 0) || c.max_iterations < 1) {
    throw UsageError("train config values must be positive");
  }
  return c;
}

namespace {

double Softplus(double t) {
  return t > 0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t));
}

double Dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

double Sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  double e = std::exp(z);
  return e / (1.0 + e);
}

LogisticObjective::LogisticObjective(std::span<const FeatureVector> x,
                                     std::span<const int> y,
                                     const TrainConfig& config)
    : x_(x), l2_(config.l2_strength) {
  if (x.size() != y.size()) {
    throw DataError("feature/label count mismatch: " +
                    std::to_string(x.size()) + " vs " +
                    std::to_string(y.size()));
  }
  if (x.empty()) throw DataError("no training samples");
  dim_ = x[0].dimension();
  size_t positives = 0;
  for (size_t i = 0; i < x.size(); ++i) {
    if (y[i] != 0 && y[i] != 1) throw DataError("labels must be 0 or 1");
    positives += static_cast<size_t>(y[i]);
    const FeatureVector& v = x[i];
    if (v.dimension() != dim_ || v.sparse_width != x[0].sparse_width) {
      throw DataError("sample " + std::to_string(i) +
                      " does not match the feature layout");
    }
    if (v.sparse.indices.size() != v.sparse.values.size()) {
      throw DataError("sample " + std::to_string(i) + " has a malformed sparse part");
    }
    for (size_t k = 0; k < v.sparse.indices.size(); ++k) {
      if (v.sparse.indices[k] >= v.sparse_width ||
          (k > 0 && v.sparse.indices[k] <= v.sparse.indices[k - 1])) {
        throw DataError("sample " + std::to_string(i) +
                        " has invalid sparse indices");
      }
    }
    auto finite = [](double d) { return std::isfinite(d); };
    if (!std::all_of(v.sparse.values.begin(), v.sparse.values.end(), finite) ||
        !std::all_of(v.dense.begin(), v.dense.end(), finite)) {
      throw DataError("sample " + std::to_string(i) +
                      " has non-finite feature values");
    }
  }
  const size_t n = x.size();
  const size_t negatives = n - positives;
  sign_.resize(n);
  weight_.assign(n, 1.0);
  for (size_t i = 0; i < n; ++i) {
    sign_[i] = y[i] == 1 ? 1.0 : -1.0;
    if (config.class_weighting == ClassWeighting::kBalanced &&
        positives > 0 && negatives > 0) {
      weight_[i] = static_cast<double>(n) /
                   (2.0 * static_cast<double>(y[i] == 1 ? positives : negatives));
    }
  }
  curvature_.assign(n, 0.0);
}

double LogisticObjective::Dot(size_t i, std::span<const double> v) const {
  const FeatureVector& x = x_[i];
  double s = 0.0;
  for (size_t k = 0; k < x.sparse.indices.size(); ++k) {
    s += v[x.sparse.indices[k]] * x.sparse.values[k];
  }
  const double* dense_w = v.data() + x.sparse_width;
  for (size_t k = 0; k < x.dense.size(); ++k) s += dense_w[k] * x.dense[k];
  return s;
}

double LogisticObjective::Margin(size_t i, std::span<const double> theta) const {
  return Dot(i, theta) + theta[dim_];
}

void LogisticObjective::AddScaled(size_t i, double scale,
                                  std::vector<double>& out) const {
  const FeatureVector& x = x_[i];
  for (size_t k = 0; k < x.sparse.indices.size(); ++k) {
    out[x.sparse.indices[k]] += scale * x.sparse.values[k];
  }
  double* dense_out = out.data() + x.sparse_width;
  for (size_t k = 0; k < x.dense.size(); ++k) dense_out[k] += scale * x.dense[k];
  out[dim_] += scale;
}

double LogisticObjective::Value(std::span<const double> theta) const {
  double loss = 0.0;
  for (size_t i = 0; i < x_.size(); ++i) {
    loss += weight_[i] * Softplus(-sign_[i] * Margin(i, theta));
  }
  auto w = theta.first(dim_);
  return loss + 0.5 * l2_ * cmine::classify::Dot(w, w);
}

double LogisticObjective::Gradient(std::span<const double> theta,
                                   std::vector<double>& gradient) const {
  gradient.assign(num_params(), 0.0);
  double loss = 0.0;
  for (size_t i = 0; i < x_.size(); ++i) {
    const double z = Margin(i, theta);
    loss += weight_[i] * Softplus(-sign_[i] * z);
    const double p = Sigmoid(z);
    // d/dz softplus(-s z) = -s * sigmoid(-s z)
    const double dz = weight_[i] * -sign_[i] * Sigmoid(-sign_[i] * z);
    curvature_[i] = weight_[i] * p * (1.0 - p);
    AddScaled(i, dz, gradient);
  }
  for (size_t j = 0; j < dim_; ++j) gradient[j] += l2_ * theta[j];
  auto w = theta.first(dim_);
  return loss + 0.5 * l2_ * cmine::classify::Dot(w, w);
}

void LogisticObjective::HessianTimes(std::span<const double> v,
                                     std::vector<double>& out) const {
  out.assign(num_params(), 0.0);
  for (size_t i = 0; i < x_.size(); ++i) {
    const double projection = Dot(i, v) + v[dim_];
    AddScaled(i, curvature_[i] * projection, out);
  }
  for (size_t j = 0; j < dim_; ++j) out[j] += l2_ * v[j];
}

LogisticModel::LogisticModel(std::vector<double> weights, double bias,
                             double threshold)
    : weights_(std::move(weights)), bias_(bias) {
  set_threshold(threshold);
}

void LogisticModel::set_threshold(double threshold) {
  if (!(threshold > 0.0 && threshold < 1.0)) {
    throw UsageError("threshold must lie in (0, 1)");
  }
  threshold_ = threshold;
}

void LogisticModel::set_layout(
    std::shared_ptr<const features::FeatureUnionModel> layout) {
  if (layout && layout->total_dim() != weights_.size()) {
    throw DataError("layout width " + std::to_string(layout->total_dim()) +
                    " does not match " + std::to_string(weights_.size()) +
                    " weights");
  }
  layout_ = std::move(layout);
}

double LogisticModel::Decision(const FeatureVector& x) const {
  if (x.dimension() != weights_.size() ||
      (layout_ && x.sparse_width != layout_->sparse_width())) {
    throw UsageError("feature vector layout mismatch: dimension " +
                     std::to_string(x.dimension()) + ", model expects " +
                     std::to_string(weights_.size()));
  }
  double z = bias_;
  for (size_t k = 0; k < x.sparse.indices.size(); ++k) {
    z += weights_[x.sparse.indices[k]] * x.sparse.values[k];
  }
  for (size_t k = 0; k < x.dense.size(); ++k) {
    z += weights_[x.sparse_width + k] * x.dense[k];
  }
  return z;
}

LogisticModel Train(std::span<const FeatureVector> x, std::span<const int> y,
                    const TrainConfig& config, TrainTrace* trace) {
  if (x.size() < 2) throw DataError("training needs at least two samples");
  if (std::all_of(y.begin(), y.end(), [&](int v) { return v == y[0]; })) {
    throw DataError("training data contains a single class");
  }
  if (!(config.l2_strength > 0) || !(config.tolerance > 0)) {
    throw UsageError("l2_strength and tolerance must be positive");
  }
  LogisticObjective objective(x, y, config);
  const size_t p = objective.num_params();
  std::vector<double> theta(p, 0.0), gradient, direction(p), residual(p),
      conj(p), hessian_conj, candidate(p), scratch;
  TrainTrace local;
  TrainTrace& t = trace ? *trace : local;
  t = TrainTrace{};

  double f = objective.Gradient(theta, gradient);
  double gnorm = std::sqrt(Dot(gradient, gradient));
  t.objective.push_back(f);
  t.gradient_norm.push_back(gnorm);

  for (int iter = 0; iter < config.max_iterations; ++iter) {
    if (gnorm <= config.tolerance) {
      t.converged = true;
      break;
    }
    // Conjugate gradient on H d = -g, truncated at a relative tolerance.
    std::fill(direction.begin(), direction.end(), 0.0);
    for (size_t j = 0; j < p; ++j) residual[j] = -gradient[j];
    conj = residual;
    double rr = Dot(residual, residual);
    const double cg_tol = std::min(0.5, std::sqrt(gnorm)) * gnorm;
    const size_t max_cg = std::min<size_t>(p, 250);
    for (size_t k = 0; k < max_cg; ++k) {
      objective.HessianTimes(conj, hessian_conj);
      const double curvature = Dot(conj, hessian_conj);
      if (!(curvature > 0.0)) break;
      const double alpha = rr / curvature;
      for (size_t j = 0; j < p; ++j) {
        direction[j] += alpha * conj[j];
        residual[j] -= alpha * hessian_conj[j];
      }
      const double rr_next = Dot(residual, residual);
      if (std::sqrt(rr_next) <= cg_tol) break;
      const double beta = rr_next / rr;
      for (size_t j = 0; j < p; ++j) conj[j] = residual[j] + beta * conj[j];
      rr = rr_next;
    }
    double slope = Dot(gradient, direction);
    if (!(slope < 0.0)) {
      for (size_t j = 0; j < p; ++j) direction[j] = -gradient[j];
      slope = -gnorm * gnorm;
    }
    // Armijo backtracking with strict decrease. Near the optimum the
    // predicted decrease drops below the rounding noise of f; a full step
    // that does not raise f and shrinks the gradient is taken then. When
    // neither applies the solver has stalled at machine precision.
    double step = 1.0;
    bool accepted = false;
    bool have_gradient = false;
    double f_next = f;
    for (int ls = 0; ls < 60; ++ls) {
      for (size_t j = 0; j < p; ++j) candidate[j] = theta[j] + step * direction[j];
      f_next = objective.Value(candidate);
      if (f_next < f && f_next <= f + 1e-4 * step * slope) {
        accepted = true;
        break;
      }
      if (ls == 0 && f_next <= f &&
          -slope <= 1e-10 * std::max(1.0, std::fabs(f))) {
        objective.Gradient(candidate, scratch);
        if (Dot(scratch, scratch) < gnorm * gnorm) {
          accepted = have_gradient = true;
          break;
        }
      }
      step *= 0.5;
    }
    if (!accepted) break;
    theta.swap(candidate);
    if (have_gradient) {
      gradient.swap(scratch);
    } else {
      f = objective.Gradient(theta, gradient);
    }
    f = f_next;
    gnorm = std::sqrt(Dot(gradient, gradient));
    t.objective.push_back(f);
    t.gradient_norm.push_back(gnorm);
    t.iterations = iter + 1;
  }
  if (gnorm <= config.tolerance) t.converged = true;

  double bias = theta[p - 1];
  theta.pop_back();
  LogisticModel model(std::move(theta), bias);
  model.set_train_config(config);
  return model;
}

double PredictProba(const LogisticModel& model, const FeatureVector& x) {
  return Sigmoid(model.Decision(x));
}

Label PredictLabel(const LogisticModel& model, const FeatureVector& x) {
  return PredictProba(model, x) >= model.threshold() ? Label::kFairness
                                                     : Label::kNonFairness;
}

json ModelToJson(const LogisticModel& model) {
  json j;
  j["format_version"] = kModelFormatVersion;
  j["layout"] = model.layout() ? model.layout()->ToJson() : json(nullptr);
  j["weights"] = model.weights();
  j["bias"] = model.bias();
  j["threshold"] = model.threshold();
  j["train_config"] = model.train_config().ToJson();
  j["provenance"] = model.provenance();
  return j;
}

LogisticModel ModelFromJson(const json& j) {
  if (!j.is_object() || !j.contains("format_version")) {
    throw DataError("model artifact has no format_version");
  }
  const int version = j.at("format_version").get<int>();
  if (version != kModelFormatVersion) {
    throw DataError("unsupported model format_version " +
                    std::to_string(version) + " (this build reads version " +
                    std::to_string(kModelFormatVersion) + ")");
  }
  try {
    LogisticModel model(j.at("weights").get<std::vector<double>>(),
                        j.at("bias").get<double>(),
                        j.at("threshold").get<double>());
    model.set_train_config(TrainConfig::FromJson(j.at("train_config")));
    if (!j.at("layout").is_null()) {
      model.set_layout(std::make_shared<const features::FeatureUnionModel>(
          features::FeatureUnionModel::FromJson(j.at("layout"))));
    }
    model.set_provenance(j.value("provenance", json::object()));
    return model;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed model artifact: ") + e.what());
  }
}

void SaveModel(const LogisticModel& model, const std::filesystem::path& path) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw DataError("cannot write " + tmp.string());
    out << ModelToJson(model).dump() << '\n';
    if (!out) throw DataError("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

LogisticModel LoadModel(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open model " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  json j;
  try {
    j = json::parse(buffer.str());
  } catch (const json::parse_error& e) {
    throw DataError("corrupt model artifact " + path.string() + ": " +
                    e.what());
  }
  return ModelFromJson(j);
}

}  // namespace cmine::classify
