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
#include <limits>

#include "modelwarden/detectors/detectors.h"
#include "modelwarden/simd/kernels.h"

namespace modelwarden::detectors {

NonConvergence::NonConvergence(std::size_t iterations, double violation)
    : Error("solver did not converge after " + std::to_string(iterations) +
            " iterations (max KKT violation " + format_double(violation) + ")"),
      iterations_(iterations),
      violation_(violation) {}

DimensionMismatch::DimensionMismatch(std::size_t expected, std::size_t got)
    : Error("feature row has " + std::to_string(got) + " columns, model expects " +
            std::to_string(expected)) {}

std::string_view label_name(Label label) {
  return label == Label::kMalicious ? "Malicious" : "Benign";
}

double KernelSpec::resolved_gamma(std::size_t n_features) const {
  if (gamma) return *gamma;
  return n_features == 0 ? 1.0 : 1.0 / static_cast<double>(n_features);
}

std::string KernelSpec::to_string() const {
  if (kind == KernelKind::kLinear) return "linear";
  std::string out = kind == KernelKind::kRbf ? "rbf:" : "sigmoid:";
  return out + (gamma ? format_double(*gamma) : "auto");
}

KernelSpec KernelSpec::parse(std::string_view text) {
  KernelSpec k;
  const auto colon = text.find(':');
  const std::string_view name = text.substr(0, colon);
  if (name == "linear") {
    k.kind = KernelKind::kLinear;
    return k;
  }
  if (name == "rbf") {
    k.kind = KernelKind::kRbf;
  } else if (name == "sigmoid") {
    k.kind = KernelKind::kSigmoid;
  } else {
    throw ParseError("unknown kernel '" + std::string(text) + "'");
  }
  const std::string g = colon == std::string_view::npos ? "auto" : std::string(text.substr(colon + 1));
  if (g != "auto") {
    try {
      std::size_t used = 0;
      k.gamma = std::stod(g, &used);
      if (used != g.size()) throw std::invalid_argument(g);
    } catch (const std::exception&) {
      throw ParseError("bad gamma '" + g + "'");
    }
    if (!(*k.gamma > 0)) throw ParseError("gamma must be positive");
  }
  return k;
}

double kernel_from_parts(KernelKind kind, double gamma, double coef0, double sqdist, double dot) {
  switch (kind) {
    case KernelKind::kLinear:
      return dot;
    case KernelKind::kRbf:
      return std::exp(-gamma * sqdist);
    case KernelKind::kSigmoid:
      return std::tanh(gamma * dot + coef0);
  }
  return 0.0;
}

double kernel(KernelKind kind, double gamma, double coef0, const double* a, const double* b,
              std::size_t n) {
  const std::span<const double> sa(a, n), sb(b, n);
  if (kind == KernelKind::kRbf) {
    return kernel_from_parts(kind, gamma, coef0, simd::squared_distance(sa, sb), 0.0);
  }
  return kernel_from_parts(kind, gamma, coef0, 0.0, simd::dot(sa, sb));
}

double OcsvmModel::decision(std::span<const double> x) const {
  if (x.size() != n_features) throw DimensionMismatch(n_features, x.size());
  double sum = 0.0;
  for (std::size_t s = 0; s < alphas.size(); ++s) {
    sum += alphas[s] * detectors::kernel(kernel, gamma, coef0,
                                         support_vectors.data() + s * n_features, x.data(),
                                         n_features);
  }
  return sum - rho;
}

GramCache::GramCache(const features::FeatureMatrix& x) : x_(&x) {}

std::vector<double> GramCache::kernel_matrix(const KernelSpec& spec) const {
  const std::size_t n = x_->rows();
  const std::size_t d = x_->cols();
  const bool rbf = spec.kind == KernelKind::kRbf;
  std::vector<double>& base = rbf ? sqdist_ : dots_;
  if (base.empty() && n > 0) {
    base.assign(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i; j < n; ++j) {
        const std::span<const double> a(x_->row(i), d), b(x_->row(j), d);
        const double v = rbf ? simd::squared_distance(a, b) : simd::dot(a, b);
        base[i * n + j] = v;
        base[j * n + i] = v;
      }
    }
  }
  const double gamma = spec.resolved_gamma(d);
  std::vector<double> k(n * n);
  for (std::size_t i = 0; i < n * n; ++i) {
    k[i] = rbf ? kernel_from_parts(spec.kind, gamma, spec.coef0, base[i], 0.0)
               : kernel_from_parts(spec.kind, gamma, spec.coef0, 0.0, base[i]);
  }
  return k;
}

namespace {

OcsvmModel solve(const features::FeatureMatrix& x, const std::vector<double>& q,
                 const OcsvmOptions& options) {
  const std::size_t n = x.rows();
  if (n == 0) throw features::EmptyMatrix();
  if (!(options.nu > 0.0 && options.nu <= 1.0)) throw Error("nu must be in (0, 1]");
  const double c = 1.0 / (options.nu * static_cast<double>(n));

  // Feasible start: fill alphas up to the box bound in index order.
  std::vector<double> alpha(n, 0.0);
  double remaining = 1.0;
  for (std::size_t i = 0; i < n && remaining > 0.0; ++i) {
    alpha[i] = std::min(c, remaining);
    remaining -= alpha[i];
  }
  std::vector<double> grad(n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    if (alpha[j] == 0.0) continue;
    for (std::size_t k = 0; k < n; ++k) grad[k] += alpha[j] * q[k * n + j];
  }

  constexpr double kTau = 1e-12;
  std::size_t iter = 0;
  double violation = 0.0;
  for (;; ++iter) {
    // i: most violating index that may still grow.
    std::size_t i = n;
    double gmax = -std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t < n; ++t) {
      if (alpha[t] < c && -grad[t] >= gmax) {
        if (-grad[t] > gmax || i == n) i = t;
        gmax = -grad[t];
      }
    }
    // j: index that may shrink, with the largest second-order decrease.
    std::size_t j = n;
    double gmin = std::numeric_limits<double>::infinity();
    double best_gain = std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t < n && i != n; ++t) {
      if (alpha[t] <= 0.0) continue;
      gmin = std::min(gmin, -grad[t]);
      const double b = gmax + grad[t];
      if (b <= 0.0) continue;
      double a = q[i * n + i] + q[t * n + t] - 2.0 * q[i * n + t];
      if (a <= 0.0) a = kTau;
      const double gain = -(b * b) / a;
      if (gain < best_gain) {
        best_gain = gain;
        j = t;
      }
    }
    violation = i == n ? 0.0 : gmax - gmin;
    if (i == n || j == n || violation <= options.tol) break;
    if (iter >= options.max_iterations) throw NonConvergence(iter, violation);

    double a = q[i * n + i] + q[j * n + j] - 2.0 * q[i * n + j];
    if (a <= 0.0) a = kTau;
    double delta = (grad[j] - grad[i]) / a;
    const double room_i = c - alpha[i];
    const double room_j = alpha[j];
    if (delta >= room_i && room_i <= room_j) {
      delta = room_i;
      alpha[i] = c;
      alpha[j] -= delta;
      if (alpha[j] < 0.0) alpha[j] = 0.0;
    } else if (delta >= room_j) {
      delta = room_j;
      alpha[j] = 0.0;
      alpha[i] += delta;
      if (alpha[i] > c) alpha[i] = c;
    } else {
      alpha[i] += delta;
      alpha[j] -= delta;
    }
    for (std::size_t k = 0; k < n; ++k) grad[k] += delta * (q[k * n + i] - q[k * n + j]);
  }

  // Fresh decision sums, evaluated exactly as OcsvmModel::decision does.
  std::vector<double> f(n, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    double sum = 0.0;
    for (std::size_t s = 0; s < n; ++s) {
      if (alpha[s] > 0.0) sum += alpha[s] * q[s * n + k];
    }
    f[k] = sum;
  }
  // Offset as in libsvm: mean over free alphas, else midpoint of the bounds.
  double ub = std::numeric_limits<double>::infinity();
  double lb = -std::numeric_limits<double>::infinity();
  double sum_free = 0.0;
  std::size_t n_free = 0;
  for (std::size_t k = 0; k < n; ++k) {
    if (alpha[k] >= c) {
      lb = std::max(lb, f[k]);
    } else if (alpha[k] <= 0.0) {
      ub = std::min(ub, f[k]);
    } else {
      sum_free += f[k];
      ++n_free;
    }
  }
  double rho = n_free > 0 ? sum_free / static_cast<double>(n_free) : (ub + lb) / 2.0;
  if (!std::isfinite(rho)) rho = std::isfinite(ub) ? ub : lb;
  // Only points held at the upper bound may fall outside; others within
  // solver tolerance of the boundary are pulled inside.
  for (std::size_t k = 0; k < n; ++k) {
    if (alpha[k] < c) rho = std::min(rho, f[k]);
  }

  OcsvmModel m;
  m.kernel = options.kernel.kind;
  m.gamma = options.kernel.resolved_gamma(x.cols());
  m.coef0 = options.kernel.coef0;
  m.kernel_text = options.kernel.to_string();
  m.nu = options.nu;
  m.n_features = x.cols();
  m.n_train = n;
  m.iterations = iter;
  m.max_violation = violation;
  m.rho = rho;
  double objective = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    objective += alpha[k] * f[k];
    if (alpha[k] <= 0.0) continue;
    m.alphas.push_back(alpha[k]);
    m.support_indices.push_back(k);
    m.support_vectors.insert(m.support_vectors.end(), x.row(k), x.row(k) + x.cols());
  }
  m.objective = 0.5 * objective;
  return m;
}

}  // namespace

OcsvmModel train_ocsvm_kernel(const features::FeatureMatrix& x, const std::vector<double>& q,
                              const OcsvmOptions& options) {
  if (q.size() != x.rows() * x.rows()) throw DimensionMismatch(x.rows() * x.rows(), q.size());
  return solve(x, q, options);
}

OcsvmModel train_ocsvm(const GramCache& cache, const OcsvmOptions& options) {
  return solve(cache.rows(), cache.kernel_matrix(options.kernel), options);
}

OcsvmModel train_ocsvm(const features::FeatureMatrix& x, const OcsvmOptions& options) {
  const GramCache cache(x);
  return train_ocsvm(cache, options);
}

}  // namespace modelwarden::detectors
