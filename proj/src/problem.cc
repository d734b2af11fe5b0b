/*
 * Copyright 2026 The Fedsplit Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "fedsplit/problem.h"

#include <algorithm>
#include <cmath>

#include "absl/status/status.h"
#include "absl/strings/str_cat.h"

namespace fedsplit {
namespace {

Eigen::MatrixXd RandomRotation(int dim, Rng& rng) {
  std::normal_distribution<double> normal;
  Eigen::MatrixXd g(dim, dim);
  for (int r = 0; r < dim; ++r) {
    for (int c = 0; c < dim; ++c) g(r, c) = normal(rng);
  }
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  return qr.householderQ() * Eigen::MatrixXd::Identity(dim, dim);
}

Eigen::MatrixXd AggregateCurvature(
    std::span<const QuadraticClientLoss> losses) {
  const int d = static_cast<int>(losses.front().b.size());
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(d, d);
  for (const auto& loss : losses) h += loss.p * loss.a;
  return h;
}

}  // namespace

absl::StatusOr<std::vector<QuadraticClientLoss>> MakeQuadraticProblem(
    int n_clients, int dim, double spread, uint64_t seed,
    const ProblemOptions& options) {
  if (n_clients <= 0) return absl::InvalidArgumentError("n_clients must be >= 1");
  if (dim <= 0) return absl::InvalidArgumentError("dim must be >= 1");
  if (spread < 0.0) return absl::InvalidArgumentError("spread must be >= 0");
  if (!(options.mu > 0.0) || options.L < options.mu) {
    return absl::InvalidArgumentError("need 0 < mu <= L");
  }
  if (options.samples_per_client < 1 || options.batch_size < 1 ||
      options.batch_size > options.samples_per_client) {
    return absl::InvalidArgumentError(
        "need 1 <= batch_size <= samples_per_client");
  }
  Rng rng = MakeRng(seed, Purpose::kProblem);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> eig(options.mu, options.L);
  std::vector<QuadraticClientLoss> losses(n_clients);
  for (int i = 0; i < n_clients; ++i) {
    QuadraticClientLoss& loss = losses[i];
    Eigen::VectorXd spectrum(dim);
    for (int j = 0; j < dim; ++j) spectrum(j) = eig(rng);
    spectrum(0) = options.mu;
    if (dim > 1) spectrum(dim - 1) = options.L;
    const Eigen::MatrixXd q = RandomRotation(dim, rng);
    loss.a = q * spectrum.asDiagonal() * q.transpose();
    loss.a = 0.5 * (loss.a + loss.a.transpose());

    ModelVec v(dim);
    for (int j = 0; j < dim; ++j) v(j) = normal(rng);
    if (dim == 1) v(0) = 1.0;
    v /= v.norm();
    if (v(0) < 0.0) v = -v;
    const double slot = i - 0.5 * (n_clients - 1);
    loss.b = ModelVec::Constant(dim, options.center) + spread * slot * v;
    loss.p = 1.0 / n_clients;

    loss.offsets.assign(options.samples_per_client, ModelVec::Zero(dim));
    ModelVec mean = ModelVec::Zero(dim);
    for (auto& off : loss.offsets) {
      for (int j = 0; j < dim; ++j) off(j) = options.sample_noise * normal(rng);
      mean += off;
    }
    mean /= options.samples_per_client;
    for (auto& off : loss.offsets) off -= mean;
    loss.batch_size = options.batch_size;
  }
  return losses;
}

absl::StatusOr<double> SpreadForGamma(int n_clients, int dim,
                                      double target_gamma, uint64_t seed,
                                      const ProblemOptions& options) {
  if (target_gamma < 0.0) {
    return absl::InvalidArgumentError("target gamma must be >= 0");
  }
  auto unit = MakeQuadraticProblem(n_clients, dim, 1.0, seed, options);
  if (!unit.ok()) return unit.status();
  const double g1 = HeterogeneityGamma(*unit);
  if (g1 <= 0.0) {
    if (target_gamma == 0.0) return 0.0;
    return absl::InvalidArgumentError("heterogeneity cannot be reached");
  }
  return std::sqrt(target_gamma / g1);
}

absl::Status ValidateLosses(std::span<const QuadraticClientLoss> losses) {
  if (losses.empty()) return absl::InvalidArgumentError("no clients");
  const Eigen::Index d = losses.front().b.size();
  if (d == 0) return absl::InvalidArgumentError("dimension is zero");
  double psum = 0.0;
  for (size_t i = 0; i < losses.size(); ++i) {
    const auto& loss = losses[i];
    if (loss.b.size() != d || loss.a.rows() != d || loss.a.cols() != d) {
      return absl::InvalidArgumentError(absl::StrCat("client ", i, ": shape"));
    }
    if ((loss.a - loss.a.transpose()).cwiseAbs().maxCoeff() > 1e-12) {
      return absl::InvalidArgumentError(
          absl::StrCat("client ", i, ": curvature not symmetric"));
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(loss.a);
    if (es.eigenvalues().minCoeff() <= 0.0) {
      return absl::InvalidArgumentError(
          absl::StrCat("client ", i, ": curvature not positive definite"));
    }
    if (loss.p < 0.0 || loss.p > 1.0) {
      return absl::InvalidArgumentError(absl::StrCat("client ", i, ": p"));
    }
    if (loss.offsets.empty() || loss.batch_size < 1 ||
        loss.batch_size > static_cast<int>(loss.offsets.size())) {
      return absl::InvalidArgumentError(
          absl::StrCat("client ", i, ": batch size"));
    }
    psum += loss.p;
  }
  if (std::abs(psum - 1.0) > 1e-12) {
    return absl::InvalidArgumentError("client weights must sum to 1");
  }
  return absl::OkStatus();
}

double ClientLoss(const QuadraticClientLoss& loss, const ModelVec& w) {
  const ModelVec r = w - loss.b;
  return 0.5 * r.dot(loss.a * r);
}

double GlobalLoss(std::span<const QuadraticClientLoss> losses,
                  const ModelVec& w) {
  double f = 0.0;
  for (const auto& loss : losses) f += loss.p * ClientLoss(loss, w);
  return f;
}

ModelVec FullGradient(const QuadraticClientLoss& loss, const ModelVec& w) {
  return loss.a * (w - loss.b);
}

absl::StatusOr<Optimum> GlobalOptimum(
    std::span<const QuadraticClientLoss> losses) {
  if (auto s = ValidateLosses(losses); !s.ok()) return s;
  const Eigen::MatrixXd h = AggregateCurvature(losses);
  ModelVec rhs = ModelVec::Zero(h.rows());
  for (const auto& loss : losses) rhs += loss.p * (loss.a * loss.b);
  Eigen::LLT<Eigen::MatrixXd> llt(h);
  if (llt.info() != Eigen::Success) {
    return absl::InternalError("aggregate curvature is singular");
  }
  Optimum opt;
  opt.w_star = llt.solve(rhs);
  opt.f_star = GlobalLoss(losses, opt.w_star);
  return opt;
}

double HeterogeneityGamma(std::span<const QuadraticClientLoss> losses) {
  auto opt = GlobalOptimum(losses);
  if (!opt.ok()) return 0.0;
  // Each F_i attains 0 at b_i.
  return std::max(0.0, opt->f_star);
}

absl::StatusOr<ModelVec> StochasticGradient(const QuadraticClientLoss& loss,
                                            const ModelVec& w,
                                            std::span<const int> batch) {
  if (batch.empty()) return absl::InvalidArgumentError("empty batch");
  ModelVec shift = ModelVec::Zero(w.size());
  for (int s : batch) {
    if (s < 0 || s >= static_cast<int>(loss.offsets.size())) {
      return absl::InvalidArgumentError("sample index out of range");
    }
    shift += loss.offsets[s];
  }
  shift /= static_cast<double>(batch.size());
  return ModelVec(loss.a * (w - loss.b - shift));
}

std::vector<int> DrawBatch(const QuadraticClientLoss& loss, Rng& rng) {
  std::uniform_int_distribution<int> pick(
      0, static_cast<int>(loss.offsets.size()) - 1);
  std::vector<int> batch(loss.batch_size);
  for (int& s : batch) s = pick(rng);
  return batch;
}

double GradientVariance(const QuadraticClientLoss& loss) {
  double acc = 0.0;
  for (const auto& off : loss.offsets) acc += (loss.a * off).squaredNorm();
  return acc / static_cast<double>(loss.offsets.size()) / loss.batch_size;
}

absl::StatusOr<ProblemConstants> ComputeConstants(
    std::span<const QuadraticClientLoss> losses, double radius) {
  if (radius <= 0.0) return absl::InvalidArgumentError("radius must be > 0");
  auto opt = GlobalOptimum(losses);
  if (!opt.ok()) return opt.status();
  ProblemConstants c;
  c.mu = std::numeric_limits<double>::infinity();
  c.L = 0.0;
  c.G = 0.0;
  for (const auto& loss : losses) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(loss.a);
    const double lo = es.eigenvalues().minCoeff();
    const double hi = es.eigenvalues().maxCoeff();
    c.mu = std::min(c.mu, lo);
    c.L = std::max(c.L, hi);
    const double sigma = GradientVariance(loss);
    c.sigma.push_back(sigma);
    const double grad = (loss.a * (opt->w_star - loss.b)).norm() + hi * radius;
    c.G = std::max(c.G, grad * grad + sigma);
  }
  c.gamma_het = HeterogeneityGamma(losses);
  c.radius = radius;
  c.w_max_norm = opt->w_star.norm() + radius;
  c.w_star = opt->w_star;
  c.f_star = opt->f_star;
  return c;
}

nlohmann::json ProblemToJson(std::span<const QuadraticClientLoss> losses) {
  nlohmann::json doc;
  doc["format"] = "fedsplit.quadratic.v1";
  doc["dim"] = losses.empty() ? 0 : losses.front().b.size();
  auto& clients = doc["clients"] = nlohmann::json::array();
  for (const auto& loss : losses) {
    nlohmann::json c;
    const Eigen::Index d = loss.b.size();
    std::vector<double> a;
    a.reserve(d * d);
    for (Eigen::Index r = 0; r < d; ++r) {
      for (Eigen::Index k = 0; k < d; ++k) a.push_back(loss.a(r, k));
    }
    c["A"] = a;
    c["b"] = std::vector<double>(loss.b.data(), loss.b.data() + d);
    c["p"] = loss.p;
    c["batch_size"] = loss.batch_size;
    auto& offs = c["offsets"] = nlohmann::json::array();
    for (const auto& off : loss.offsets) {
      offs.push_back(std::vector<double>(off.data(), off.data() + d));
    }
    clients.push_back(std::move(c));
  }
  return doc;
}

absl::StatusOr<std::vector<QuadraticClientLoss>> ProblemFromJson(
    const nlohmann::json& doc) {
  try {
    const int d = doc.at("dim").get<int>();
    std::vector<QuadraticClientLoss> losses;
    for (const auto& c : doc.at("clients")) {
      QuadraticClientLoss loss;
      const auto a = c.at("A").get<std::vector<double>>();
      const auto b = c.at("b").get<std::vector<double>>();
      if (static_cast<int>(a.size()) != d * d ||
          static_cast<int>(b.size()) != d) {
        return absl::InvalidArgumentError("problem json: shape mismatch");
      }
      loss.a.resize(d, d);
      for (int r = 0; r < d; ++r) {
        for (int k = 0; k < d; ++k) loss.a(r, k) = a[r * d + k];
      }
      loss.b = Eigen::Map<const ModelVec>(b.data(), d);
      loss.p = c.at("p").get<double>();
      loss.batch_size = c.at("batch_size").get<int>();
      for (const auto& o : c.at("offsets")) {
        const auto v = o.get<std::vector<double>>();
        if (static_cast<int>(v.size()) != d) {
          return absl::InvalidArgumentError("problem json: offset shape");
        }
        loss.offsets.push_back(Eigen::Map<const ModelVec>(v.data(), d));
      }
      losses.push_back(std::move(loss));
    }
    if (auto s = ValidateLosses(losses); !s.ok()) return s;
    return losses;
  } catch (const nlohmann::json::exception& e) {
    return absl::InvalidArgumentError(absl::StrCat("problem json: ", e.what()));
  }
}

}  // namespace fedsplit
