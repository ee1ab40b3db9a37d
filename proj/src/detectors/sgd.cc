// Copyright 2026 The ModelWarden Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "modelwarden/detectors/detectors.h"
#include "modelwarden/simd/kernels.h"

namespace modelwarden::detectors {

namespace {

std::vector<std::size_t> all_rows(const features::FeatureMatrix& x,
                                  std::span<const std::size_t> batch) {
  if (!batch.empty()) return {batch.begin(), batch.end()};
  std::vector<std::size_t> rows(x.rows());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  return rows;
}

double row_dot(const features::FeatureMatrix& x, std::size_t r, std::span<const double> w) {
  return simd::dot(std::span<const double>(x.row(r), x.cols()), w);
}

}  // namespace

double sgd_objective(const features::FeatureMatrix& x, std::span<const double> w, double r,
                     double nu, std::span<const std::size_t> batch) {
  if (w.size() != x.cols()) throw DimensionMismatch(x.cols(), w.size());
  const auto rows = all_rows(x, batch);
  double hinge = 0.0;
  for (std::size_t i : rows) hinge += std::max(0.0, r - row_dot(x, i, w));
  return 0.5 * simd::dot(w, w) - r + hinge / (nu * static_cast<double>(rows.size()));
}

std::vector<double> sgd_subgradient(const features::FeatureMatrix& x, std::span<const double> w,
                                    double r, double nu, std::span<const std::size_t> batch) {
  if (w.size() != x.cols()) throw DimensionMismatch(x.cols(), w.size());
  const auto rows = all_rows(x, batch);
  const double k = 1.0 / (nu * static_cast<double>(rows.size()));
  std::vector<double> g(w.begin(), w.end());
  g.push_back(-1.0);
  std::span<double> gw(g.data(), w.size());
  for (std::size_t i : rows) {
    if (r - row_dot(x, i, w) > 0.0) {
      simd::axpy(-k, std::span<const double>(x.row(i), x.cols()), gw);
      g.back() += k;
    }
  }
  return g;
}

double SgdOcsvmModel::decision(std::span<const double> x) const {
  if (!trained()) throw NotTrained();
  if (x.size() != weights.size()) throw DimensionMismatch(weights.size(), x.size());
  return simd::dot(weights, x) - offset;
}

SgdOcsvmModel train_sgd_ocsvm(const features::FeatureMatrix& x, const SgdOptions& options) {
  if (x.rows() == 0) throw features::EmptyMatrix();
  if (!(options.nu > 0.0 && options.nu <= 1.0)) throw Error("nu must be in (0, 1]");
  if (options.batch_size == 0) throw Error("batch size must be positive");
  SgdOcsvmModel m;
  m.nu = options.nu;
  m.batch_size = options.batch_size;
  m.epochs = options.epochs;
  m.eta0 = options.eta0;
  m.seed = options.seed;
  m.weights.assign(x.cols(), 0.0);
  if (options.epochs == 0) return m;

  std::mt19937_64 rng(options.seed);
  std::vector<std::size_t> order(x.rows());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<double> w(x.cols(), 0.0), w_avg(x.cols(), 0.0);
  double r = 0.0;
  const std::size_t batches = (x.rows() + options.batch_size - 1) / options.batch_size;
  const std::size_t total_steps = batches * options.epochs;
  // Iterates from the second half of training are averaged.
  const std::size_t average_from = total_steps / 2;
  std::size_t step = 0, averaged = 0;
  for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t b = 0; b < batches; ++b, ++step) {
      const std::size_t lo = b * options.batch_size;
      const std::size_t hi = std::min(lo + options.batch_size, x.rows());
      const std::span<const std::size_t> batch(order.data() + lo, hi - lo);
      const auto g = sgd_subgradient(x, w, r, options.nu, batch);
      const double eta = options.eta0 / std::sqrt(1.0 + static_cast<double>(step));
      simd::axpy(-eta, std::span<const double>(g.data(), w.size()), w);
      r -= eta * g.back();
      if (step >= average_from) {
        ++averaged;
        const double t = 1.0 / static_cast<double>(averaged);
        for (std::size_t c = 0; c < w.size(); ++c) w_avg[c] += (w[c] - w_avg[c]) * t;
      }
    }
    if (!std::isfinite(r) ||
        !std::all_of(w.begin(), w.end(), [](double v) { return std::isfinite(v); })) {
      throw NonFinite("SGD one-class SVM diverged in epoch " + std::to_string(epoch + 1));
    }
  }
  // r moves by at most eta per step, far too slowly to follow <w, x> on
  // unnormalized rows. For fixed w the objective is minimized exactly at the
  // ceil(nu m)-th smallest training score, so the offset is placed there.
  std::vector<double> scores(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) scores[i] = row_dot(x, i, w_avg);
  std::sort(scores.begin(), scores.end());
  const auto k = static_cast<std::size_t>(std::ceil(options.nu * static_cast<double>(x.rows())));
  const double r_exact = scores[std::min(scores.size(), std::max<std::size_t>(k, 1)) - 1];
  if (!std::isfinite(r_exact)) throw NonFinite("SGD one-class SVM produced a non-finite offset");
  m.weights = std::move(w_avg);
  m.offset = r_exact;
  return m;
}

}  // namespace modelwarden::detectors
