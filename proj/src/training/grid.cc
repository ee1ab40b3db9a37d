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
#include <numeric>
#include <random>

#include "modelwarden/common/parallel.h"
#include "modelwarden/simd/kernels.h"
#include "modelwarden/training/training.h"

namespace modelwarden::training {

namespace {

using features::FeatureMatrix;

int kernel_order(detectors::KernelKind k) {
  switch (k) {
    case detectors::KernelKind::kLinear:
      return 0;
    case detectors::KernelKind::kRbf:
      return 1;
    case detectors::KernelKind::kSigmoid:
      return 2;
  }
  return 3;
}

// Unset values ("auto") sort after every number.
double or_inf(const std::optional<double>& v) {
  return v ? *v : std::numeric_limits<double>::infinity();
}

FeatureMatrix stack(const FeatureMatrix& a, const FeatureMatrix& b) {
  FeatureMatrix out = a;
  out.row_ids.insert(out.row_ids.end(), b.row_ids.begin(), b.row_ids.end());
  out.values.insert(out.values.end(), b.values.begin(), b.values.end());
  return out;
}

FeatureMatrix keep_columns(const FeatureMatrix& m, const std::vector<std::size_t>& cols) {
  FeatureMatrix out;
  out.row_ids = m.row_ids;
  for (auto c : cols) out.columns.push_back(m.columns[c]);
  out.values.reserve(m.rows() * cols.size());
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (auto c : cols) out.values.push_back(m.at(r, c));
  }
  return out;
}

// Dot products between the rows of a and b; a == b fills one triangle and
// mirrors it.
std::vector<double> gram(const FeatureMatrix& a, const FeatureMatrix& b, std::size_t jobs) {
  const std::size_t d = a.cols();
  const bool same = &a == &b;
  std::vector<double> out(a.rows() * b.rows());
  parallel_for(a.rows(), jobs, [&](std::size_t i) {
    const std::span<const double> x(a.row(i), d);
    for (std::size_t j = same ? i : 0; j < b.rows(); ++j) {
      out[i * b.rows() + j] = simd::dot(x, std::span<const double>(b.row(j), d));
    }
  });
  if (same) {
    for (std::size_t i = 0; i < a.rows(); ++i) {
      for (std::size_t j = 0; j < i; ++j) out[i * b.rows() + j] = out[j * b.rows() + i];
    }
  }
  return out;
}

// |x - y|^2 = |x|^2 + |y|^2 - 2<x, y>, clamped at 0 against rounding.
std::vector<double> sqdist_from_gram(const std::vector<double>& dot, const std::vector<double>& na,
                                     const std::vector<double>& nb) {
  std::vector<double> out(dot.size());
  for (std::size_t i = 0; i < na.size(); ++i) {
    for (std::size_t j = 0; j < nb.size(); ++j) {
      out[i * nb.size() + j] = std::max(0.0, na[i] + nb[j] - 2.0 * dot[i * nb.size() + j]);
    }
  }
  return out;
}

std::vector<double> sq_norms(const FeatureMatrix& m) {
  std::vector<double> out(m.rows());
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const std::span<const double> x(m.row(r), m.cols());
    out[r] = simd::dot(x, x);
  }
  return out;
}

struct FoldData {
  FeatureMatrix fit;   // scaled, compacted
  FeatureMatrix eval;  // scaled, compacted
  std::vector<Label> labels;
  std::size_t full_width = 0;
  // Filled only when some OCSVM cell needs them.
  std::vector<double> fit_sq, fit_dot, eval_sq, eval_dot;
};

std::vector<Label> predict_cell(const GridCell& cell, const FoldData& f, std::uint64_t seed) {
  std::vector<Label> out;
  out.reserve(f.eval.rows());
  if (cell.detector == "ocsvm") {
    const bool rbf = cell.kernel.kind == detectors::KernelKind::kRbf;
    detectors::KernelSpec spec = cell.kernel;
    spec.gamma = cell.kernel.resolved_gamma(f.full_width);
    const std::size_t n = f.fit.rows();
    const auto& base = rbf ? f.fit_sq : f.fit_dot;
    std::vector<double> q(n * n);
    for (std::size_t i = 0; i < q.size(); ++i) {
      q[i] = detectors::kernel_from_parts(spec.kind, *spec.gamma, spec.coef0, rbf ? base[i] : 0.0,
                                          rbf ? 0.0 : base[i]);
    }
    detectors::OcsvmOptions opts;
    opts.nu = cell.nu;
    opts.kernel = spec;
    const auto model = detectors::train_ocsvm_kernel(f.fit, q, opts);
    const auto& cross = rbf ? f.eval_sq : f.eval_dot;
    for (std::size_t e = 0; e < f.eval.rows(); ++e) {
      double sum = 0.0;
      for (std::size_t s = 0; s < model.alphas.size(); ++s) {
        const double v = cross[e * n + model.support_indices[s]];
        sum += model.alphas[s] * detectors::kernel_from_parts(spec.kind, *spec.gamma, spec.coef0,
                                                              rbf ? v : 0.0, rbf ? 0.0 : v);
      }
      out.push_back(sum - model.rho < 0.0 ? Label::kMalicious : Label::kBenign);
    }
    return out;
  }
  detectors::AnyModel model;
  if (cell.detector == "sgd-ocsvm") {
    model = detectors::train_sgd_ocsvm(f.fit, {cell.nu, cell.batch_size, cell.epochs, cell.eta0, seed});
  } else if (cell.detector == "iforest") {
    model = detectors::train_iforest(f.fit, {cell.n_estimators, cell.max_samples, cell.contamination, seed});
  } else {
    throw Error("unknown detector '" + cell.detector + "'");
  }
  for (std::size_t e = 0; e < f.eval.rows(); ++e) {
    out.push_back(detectors::decide(model, {f.eval.row(e), f.eval.cols()}).label);
  }
  return out;
}

}  // namespace

std::string GridCell::key() const {
  std::string out = detector;
  if (uses_nu()) out += " nu=" + format_double(nu);
  if (detector == "ocsvm") out += " kernel=" + kernel.to_string();
  if (detector == "sgd-ocsvm") {
    out += " batch_size=" + std::to_string(batch_size) + " epochs=" + std::to_string(epochs) +
           " eta0=" + format_double(eta0);
  }
  if (detector == "iforest") {
    out += " n_estimators=" + std::to_string(n_estimators) +
           " contamination=" + (contamination ? format_double(*contamination) : "auto") +
           " max_samples=" + std::to_string(max_samples);
  }
  return out;
}

bool GridCell::precedes(const GridCell& o) const {
  auto tuple = [](const GridCell& c) {
    return std::make_tuple(c.detector, c.uses_nu() ? c.nu : 0.0, kernel_order(c.kernel.kind),
                           c.kernel.kind == detectors::KernelKind::kLinear ? 0.0 : or_inf(c.kernel.gamma),
                           c.kernel.coef0, c.batch_size, c.epochs, c.eta0, c.n_estimators,
                           or_inf(c.contamination), c.max_samples);
  };
  return tuple(*this) < tuple(o);
}

GridSpec GridSpec::defaults(std::string_view detector) {
  GridSpec g;
  g.detector = std::string(detector);
  const std::vector<double> nus = {0.01, 0.05, 0.1, 0.2, 0.3, 0.4, 0.5};
  if (detector == "ocsvm") {
    g.nu = nus;
    g.kernels.push_back(detectors::KernelSpec::parse("linear"));
    for (const char* kind : {"rbf", "sigmoid"}) {
      for (const char* gamma : {"0.01", "0.1", "1", "auto"}) {
        g.kernels.push_back(detectors::KernelSpec::parse(std::string(kind) + ":" + gamma));
      }
    }
  } else if (detector == "sgd-ocsvm") {
    g.nu = nus;
    g.batch_sizes = {32, 64, 128, 1000};
  } else if (detector == "iforest") {
    g.n_estimators = {50, 100, 150};
    g.contamination = {0.001, 0.01, 0.1, std::nullopt};
    g.max_samples = {128, 256, 512, 1000};
  } else {
    throw Error("unknown detector '" + std::string(detector) + "'");
  }
  return g;
}

std::vector<GridCell> GridSpec::cells() const {
  std::vector<GridCell> out;
  GridCell base;
  base.detector = detector;
  base.epochs = epochs;
  base.eta0 = eta0;
  if (detector == "ocsvm") {
    for (double v : nu) {
      for (const auto& k : kernels) {
        GridCell c = base;
        c.nu = v;
        c.kernel = k;
        out.push_back(c);
      }
    }
  } else if (detector == "sgd-ocsvm") {
    for (double v : nu) {
      for (auto b : batch_sizes) {
        GridCell c = base;
        c.nu = v;
        c.batch_size = b;
        out.push_back(c);
      }
    }
  } else if (detector == "iforest") {
    for (auto e : n_estimators) {
      for (const auto& ct : contamination) {
        for (auto m : max_samples) {
          GridCell c = base;
          c.n_estimators = e;
          c.contamination = ct;
          c.max_samples = m;
          out.push_back(c);
        }
      }
    }
  } else {
    throw Error("unknown detector '" + detector + "'");
  }
  if (out.empty()) throw Error("grid for " + detector + " has no cells");
  return out;
}

GridResult grid_search(const FeatureMatrix& train, const FeatureMatrix& val,
                       const std::vector<Label>& val_labels, const std::vector<GridCell>& cells,
                       const CvOptions& options) {
  if (cells.empty()) throw Error("grid has no cells");
  if (options.folds < 2) throw Error("need at least 2 folds");
  if (train.rows() < options.folds) throw features::EmptyMatrix();
  if (val_labels.size() != val.rows()) throw eval::LengthMismatch(val.rows(), val_labels.size());
  if (val.rows() > 0 && val.columns != train.columns) throw Error("train and val columns differ");

  std::vector<std::size_t> malicious;
  for (std::size_t i = 0; i < val.rows(); ++i) {
    if (val_labels[i] == Label::kMalicious) malicious.push_back(i);
  }
  if (malicious.empty()) throw Error("validation set has no malicious rows");

  const std::size_t n = train.rows();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(derive_seed(options.seed, "cv-folds"));
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::size_t> fold_of(n);
  for (std::size_t p = 0; p < n; ++p) fold_of[order[p]] = p % options.folds;

  const bool need_sq = std::any_of(cells.begin(), cells.end(), [](const GridCell& c) {
    return c.detector == "ocsvm" && c.kernel.kind == detectors::KernelKind::kRbf;
  });
  const bool need_dot = std::any_of(cells.begin(), cells.end(), [](const GridCell& c) {
    return c.detector == "ocsvm" && c.kernel.kind != detectors::KernelKind::kRbf;
  });

  std::vector<std::vector<double>> f1(cells.size(), std::vector<double>(options.folds, 0.0));
  std::vector<std::string> errors(cells.size());
  for (std::size_t k = 0; k < options.folds; ++k) {
    std::vector<std::size_t> fit_rows, held_rows;
    for (std::size_t i = 0; i < n; ++i) {
      if (fold_of[i] != k) fit_rows.push_back(i);
    }
    for (auto i : order) {
      if (fold_of[i] == k) held_rows.push_back(i);
    }
    // Balanced mixture: m held-out benign rows and m malicious validation
    // rows, the latter taken cyclically from a fold-dependent offset.
    const std::size_t m = std::min(held_rows.size(), malicious.size());
    held_rows.resize(m);
    std::vector<std::size_t> mal_rows;
    for (std::size_t j = 0; j < m; ++j) {
      mal_rows.push_back(malicious[(k * malicious.size() / options.folds + j) % malicious.size()]);
    }
    const FeatureMatrix fit_raw = train.select_rows(fit_rows);
    const auto scaler = features::fit_scaler(fit_raw);
    const FeatureMatrix fit_scaled = features::transform(scaler, fit_raw);
    const FeatureMatrix eval_scaled = features::transform(scaler, stack(train.select_rows(held_rows), val.select_rows(mal_rows)));

    // Columns that are zero in every row add nothing to any kernel or split.
    std::vector<std::size_t> active;
    for (std::size_t c = 0; c < train.cols(); ++c) {
      bool nz = false;
      for (std::size_t r = 0; r < fit_scaled.rows() && !nz; ++r) nz = fit_scaled.at(r, c) != 0.0;
      for (std::size_t r = 0; r < eval_scaled.rows() && !nz; ++r) nz = eval_scaled.at(r, c) != 0.0;
      if (nz) active.push_back(c);
    }
    FoldData fold;
    fold.fit = keep_columns(fit_scaled, active);
    fold.eval = keep_columns(eval_scaled, active);
    fold.full_width = train.cols();
    fold.labels.assign(held_rows.size(), Label::kBenign);
    fold.labels.resize(2 * m, Label::kMalicious);
    if (need_sq || need_dot) {
      fold.fit_dot = gram(fold.fit, fold.fit, options.jobs);
      fold.eval_dot = gram(fold.eval, fold.fit, options.jobs);
    }
    if (need_sq) {
      const auto fit_norms = sq_norms(fold.fit);
      fold.fit_sq = sqdist_from_gram(fold.fit_dot, fit_norms, fit_norms);
      fold.eval_sq = sqdist_from_gram(fold.eval_dot, sq_norms(fold.eval), fit_norms);
      // Diagonal exactly zero, as a direct difference would give.
      for (std::size_t i = 0; i < fold.fit.rows(); ++i) fold.fit_sq[i * fold.fit.rows() + i] = 0.0;
    }

    parallel_for(cells.size(), options.jobs, [&](std::size_t c) {
      if (!errors[c].empty()) return;
      try {
        const std::uint64_t seed = derive_seed(options.seed, cells[c].key() + "/fold" + std::to_string(k));
        const auto predicted = predict_cell(cells[c], fold, seed);
        f1[c][k] = eval::metrics(eval::confusion(predicted, fold.labels)).f1.value();
      } catch (const std::exception& e) {
        errors[c] = e.what();
      }
    });
  }

  GridResult result;
  for (std::size_t c = 0; c < cells.size(); ++c) {
    LeaderboardRow row;
    row.cell = cells[c];
    row.error = errors[c];
    if (row.error.empty()) {
      row.fold_f1 = f1[c];
      double sum = 0.0;
      for (double v : f1[c]) sum += v;
      row.mean_f1 = sum / static_cast<double>(options.folds);
    }
    result.leaderboard.push_back(std::move(row));
  }
  std::sort(result.leaderboard.begin(), result.leaderboard.end(),
            [](const LeaderboardRow& a, const LeaderboardRow& b) {
              if (a.error.empty() != b.error.empty()) return a.error.empty();
              if (a.mean_f1 != b.mean_f1) return a.mean_f1 > b.mean_f1;
              if (a.cell.uses_nu() && b.cell.uses_nu() && a.cell.nu != b.cell.nu) return a.cell.nu < b.cell.nu;
              return a.cell.precedes(b.cell);
            });
  for (std::size_t r = 0; r < result.leaderboard.size(); ++r) result.leaderboard[r].rank = r + 1;
  result.best = result.leaderboard.front().cell;
  if (!result.leaderboard.front().error.empty()) {
    throw Error("every grid cell failed; first error: " + result.leaderboard.front().error);
  }
  return result;
}

std::string leaderboard_csv(const GridResult& result) {
  std::string out = "rank,cell,mean_f1,fold_f1,error\n";
  for (const auto& r : result.leaderboard) {
    std::string folds;
    for (double v : r.fold_f1) folds += (folds.empty() ? "" : ";") + format_double(v);
    out += join_csv_row({std::to_string(r.rank), r.cell.key(), r.error.empty() ? format_double(r.mean_f1) : "",
                         folds, r.error}) +
           "\n";
  }
  return out;
}

detectors::DetectorModel fit_detector(const FeatureMatrix& train, const GridCell& cell, std::uint64_t seed) {
  detectors::DetectorModel out;
  out.columns = train.columns;
  out.scaler = features::fit_scaler(train);
  const FeatureMatrix x = features::transform(out.scaler, train);
  const std::uint64_t cell_seed = derive_seed(seed, cell.key());
  if (cell.detector == "ocsvm") {
    detectors::OcsvmOptions opts;
    opts.nu = cell.nu;
    opts.kernel = cell.kernel;
    auto m = detectors::train_ocsvm(x, opts);
    m.support_indices.clear();
    out.model = std::move(m);
  } else if (cell.detector == "sgd-ocsvm") {
    out.model = detectors::train_sgd_ocsvm(x, {cell.nu, cell.batch_size, cell.epochs, cell.eta0, cell_seed});
  } else if (cell.detector == "iforest") {
    out.model = detectors::train_iforest(x, {cell.n_estimators, cell.max_samples, cell.contamination, cell_seed});
  } else {
    throw Error("unknown detector '" + cell.detector + "'");
  }
  out.hyperparameters = cell.key();
  return out;
}

}  // namespace modelwarden::training
