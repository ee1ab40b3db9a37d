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

// Acceptance run: one PASS/FAIL line per criterion. Exit status is the
// number of failing criteria.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "cli.h"
#include "modelwarden/baselines/baselines.h"
#include "modelwarden/common/io.h"
#include "modelwarden/corpus/corpus.h"
#include "modelwarden/detectors/detectors.h"
#include "modelwarden/eval/eval.h"
#include "modelwarden/features/features.h"
#include "modelwarden/pickle/container.h"
#include "modelwarden/pickle/inject.h"
#include "modelwarden/pickle/machine.h"
#include "modelwarden/trace/trace.h"
#include "modelwarden/training/training.h"

namespace fs = std::filesystem;
using namespace modelwarden;

namespace {

// ------------------------------------------------------------ tolerances

constexpr double kC1BudgetS = 1.0;
constexpr double kC2BudgetS = 300.0;
constexpr double kC2MinF1 = 0.95;
constexpr double kC3BudgetS = 60.0;
constexpr double kC3ObjectiveTol = 1e-6;
// The objective is compared at a solver tolerance tight enough for 1e-6; the
// default (1e-3) gap is reported alongside.
constexpr double kC3SolverTol = 1e-9;
constexpr int kC3Datasets = 50;
constexpr std::size_t kC3MaxPoints = 12;
constexpr std::size_t kC3MaxDims = 3;
constexpr int kC4Logs = 100;
constexpr double kC4ScaleRelTol = 1e-12;
constexpr double kC5BudgetS = 60.0;
constexpr std::size_t kC5MinPairs = 200;

const fs::path kData(MODELWARDEN_DATA_DIR);
const fs::path kFixtures(MODELWARDEN_FIXTURES);

struct Outcome {
  bool pass = true;
  std::string detail;
  void fail(const std::string& why) {
    if (pass) detail = why;
    pass = false;
  }
};

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("mw_accept_" + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

int failures = 0;
int ran = 0;
std::set<int> selected;  // empty runs everything

void criterion(int n, const char* title, double budget_s, const std::function<Outcome()>& body) {
  if (!selected.empty() && !selected.contains(n)) return;
  ++ran;
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o.fail(std::string("exception: ") + e.what());
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (budget_s > 0 && secs > budget_s) {
    o.fail("took " + std::to_string(secs) + " s, budget " + std::to_string(budget_s) + " s");
  }
  std::printf("criterion %d: %s  %s (%.2f s)%s%s\n", n, o.pass ? "PASS" : "FAIL", title, secs,
              o.detail.empty() ? "" : " | ", o.detail.c_str());
  std::fflush(stdout);
  if (!o.pass) ++failures;
}

// a >= b on exact fractions; undefined counts as 0.
bool frac_ge(const eval::Fraction& a, const eval::Fraction& b) {
  const unsigned __int128 an = a.den ? a.num : 0, ad = a.den ? a.den : 1;
  const unsigned __int128 bn = b.den ? b.num : 0, bd = b.den ? b.den : 1;
  return an * bd >= bn * ad;
}

// ------------------------------------------------------------ criterion 1

Outcome metric_regression() {
  Outcome o;
  struct Row {
    const char* name;
    eval::Confusion c;
    const char *p, *r, *f;
  };
  const Row rows[] = {
      {"learned", {2011, 2024, 1, 14}, "0.9995", "0.9931", "0.9963"},
      {"picklescan", {1067, 0, 0, 958}, "1.0000", "0.5269", "0.6902"},
  };
  std::ostringstream d;
  for (const auto& row : rows) {
    const auto m = eval::metrics(row.c);
    d << row.name << " " << m.precision.str() << "/" << m.recall.str() << "/" << m.f1.str() << "; ";
    if (m.precision.str() != row.p || m.recall.str() != row.r || m.f1.str() != row.f) {
      o.fail(std::string(row.name) + " metrics differ from the published values");
    }
  }
  if (o.pass) o.detail = d.str();
  return o;
}

// ------------------------------------------------------------ criterion 2, 6

struct SyntheticSetup {
  std::vector<training::SampleRecord> records;
  training::RunManifest manifest;
};

const SyntheticSetup& synthetic() {
  static const SyntheticSetup setup = [] {
    corpus::CorpusSpec spec;  // 2000 benign, 25 real, 375 injected, seed 42
    SyntheticSetup s;
    s.records = training::records_from_corpus(corpus::generate_corpus(spec), true);
    s.manifest.seed = spec.seed;
    return s;
  }();
  return setup;
}

Outcome end_to_end() {
  Outcome o;
  const auto& setup = synthetic();
  const auto& vocab = features::SyscallVocabulary::builtin();
  const auto result = training::train_pipeline(setup.records, setup.manifest, vocab);
  const auto m = eval::metrics(result.test_confusion);

  std::map<std::string, const training::SampleRecord*> by_id;
  for (const auto& r : setup.records) by_id[r.id] = &r;
  std::set<std::string> unseen;
  for (const auto& ov : corpus::builtin_overlays()) {
    if (ov.unseen()) unseen.insert(ov.name);
  }
  // Test benign samples plus test malicious samples whose overlay avoids the blacklist.
  std::vector<const training::SampleRecord*> subset;
  for (const auto& id : result.split.test_ids) {
    const auto* r = by_id.at(id);
    if (r->label == detectors::Label::kBenign || unseen.contains(r->overlay)) subset.push_back(r);
  }
  std::vector<detectors::Label> labels;
  std::vector<detectors::Verdict> dynamic;
  std::size_t malicious = 0;
  for (const auto* r : subset) {
    labels.push_back(r->label);
    malicious += r->label == detectors::Label::kMalicious;
    dynamic.push_back(baselines::dynamic_blacklist_scan(r->inputs.summary).verdict);
  }
  const auto ours = eval::metrics(eval::confusion(training::score_records(result.model, subset, vocab), labels));
  const auto theirs = eval::metrics(eval::confusion(dynamic, labels));

  std::ostringstream d;
  d << "best " << result.grid.best.key() << ", test F1 " << m.f1.str() << " (tp " << result.test_confusion.tp
    << " tn " << result.test_confusion.tn << " fp " << result.test_confusion.fp << " fn "
    << result.test_confusion.fn << "); unseen subset (" << malicious << " malicious) F1 " << ours.f1.str()
    << " vs dynamic blacklist " << theirs.f1.str();
  o.detail = d.str();
  if (m.f1.value() < kC2MinF1) o.fail("test F1 below 0.95: " + d.str());
  if (malicious == 0) o.fail("no unseen-signature samples in the test partition");
  if (frac_ge(theirs.f1, ours.f1)) o.fail("does not beat the dynamic blacklist on unseen signatures: " + d.str());
  return o;
}

Outcome ablation_directions() {
  Outcome o;
  const auto& setup = synthetic();
  std::vector<training::AblationVariant> variants;
  const std::vector<std::string> wanted = {"presence", "presence+frequency", "sequence-2gram", "sequence-3gram",
                                           "sequence-4gram"};
  for (const auto& v : training::default_ablation_variants()) {
    if (std::find(wanted.begin(), wanted.end(), v.name) != wanted.end()) variants.push_back(v);
  }
  const auto rows = training::run_ablation(setup.records, setup.manifest, variants,
                                           features::SyscallVocabulary::builtin());
  std::map<std::string, eval::Fraction> f1;
  std::ostringstream d;
  for (const auto& r : rows) {
    f1[r.variant.name] = r.metrics.f1;
    d << r.variant.name << " " << r.metrics.f1.str() << "; ";
  }
  o.detail = d.str();
  if (!frac_ge(f1.at("presence+frequency"), f1.at("presence"))) o.fail("frequency below presence-only: " + d.str());
  if (!frac_ge(f1.at("sequence-2gram"), f1.at("sequence-3gram")) ||
      !frac_ge(f1.at("sequence-3gram"), f1.at("sequence-4gram"))) {
    o.fail("n-gram order not monotone: " + d.str());
  }
  return o;
}

// ------------------------------------------------------------ criterion 3

using Dense = std::vector<std::vector<double>>;

double dual_objective(const Dense& q, const std::vector<double>& a) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < a.size(); ++j) s += a[i] * q[i][j] * a[j];
  }
  return 0.5 * s;
}

// Euclidean projection onto {0 <= a <= c, sum a = 1}.
std::vector<double> project_capped_simplex(const std::vector<double>& v, double c) {
  double lo = *std::min_element(v.begin(), v.end()) - c - 1.0;
  double hi = *std::max_element(v.begin(), v.end()) + 1.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    double s = 0;
    for (double x : v) s += std::clamp(x - mid, 0.0, c);
    (s > 1.0 ? lo : hi) = mid;
  }
  const double shift = 0.5 * (lo + hi);
  std::vector<double> a(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) a[i] = std::clamp(v[i] - shift, 0.0, c);
  return a;
}

// Solves m x = b by Gaussian elimination with partial pivoting; false when singular.
bool solve_dense(Dense m, std::vector<double> b, std::vector<double>& x) {
  const std::size_t n = b.size();
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t p = k;
    for (std::size_t i = k + 1; i < n; ++i) {
      if (std::abs(m[i][k]) > std::abs(m[p][k])) p = i;
    }
    if (std::abs(m[p][k]) < 1e-12) return false;
    std::swap(m[k], m[p]);
    std::swap(b[k], b[p]);
    for (std::size_t i = k + 1; i < n; ++i) {
      const double f = m[i][k] / m[k][k];
      for (std::size_t j = k; j < n; ++j) m[i][j] -= f * m[k][j];
      b[i] -= f * b[k];
    }
  }
  x.assign(n, 0.0);
  for (std::size_t k = n; k-- > 0;) {
    double s = b[k];
    for (std::size_t j = k + 1; j < n; ++j) s -= m[k][j] * x[j];
    x[k] = s / m[k][k];
  }
  return true;
}

// Dense QP: accelerated projected gradient, then an exact KKT solve on the
// active set it identifies. The polished point is kept only when feasible
// and no worse.
double qp_oracle(const Dense& q, double c) {
  const std::size_t n = q.size();
  double lip = 0;
  for (const auto& row : q) {
    double s = 0;
    for (double v : row) s += std::abs(v);
    lip = std::max(lip, s);
  }
  lip = std::max(lip, 1e-12);
  std::vector<double> a = project_capped_simplex(std::vector<double>(n, 1.0 / static_cast<double>(n)), c);
  std::vector<double> y = a, prev, step(n);
  double t = 1.0;
  for (int it = 0; it < 50000; ++it) {
    for (std::size_t i = 0; i < n; ++i) {
      double g = 0;
      for (std::size_t j = 0; j < n; ++j) g += q[i][j] * y[j];
      step[i] = y[i] - g / lip;
    }
    prev = a;
    a = project_capped_simplex(step, c);
    const double tn = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    for (std::size_t i = 0; i < n; ++i) y[i] = a[i] + ((t - 1.0) / tn) * (a[i] - prev[i]);
    t = tn;
  }
  double best = dual_objective(q, a);

  std::vector<std::size_t> free_idx;
  std::vector<double> fixed(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (a[i] > c - 1e-7) {
      fixed[i] = c;
    } else if (a[i] > 1e-7) {
      free_idx.push_back(i);
    }
  }
  const std::size_t f = free_idx.size();
  if (f > 0) {
    // [Q_FF  -1] [a_F]   [-Q_FU c]
    // [1'     0] [rho] = [1 - |U| c]
    Dense m(f + 1, std::vector<double>(f + 1, 0.0));
    std::vector<double> rhs(f + 1, 0.0);
    double fixed_sum = 0;
    for (double v : fixed) fixed_sum += v;
    for (std::size_t r = 0; r < f; ++r) {
      for (std::size_t k = 0; k < f; ++k) m[r][k] = q[free_idx[r]][free_idx[k]];
      m[r][f] = -1.0;
      for (std::size_t j = 0; j < n; ++j) rhs[r] -= q[free_idx[r]][j] * fixed[j];
      m[f][r] = 1.0;
    }
    rhs[f] = 1.0 - fixed_sum;
    std::vector<double> x;
    if (solve_dense(m, rhs, x)) {
      std::vector<double> polished = fixed;
      bool feasible = true;
      for (std::size_t r = 0; r < f; ++r) {
        polished[free_idx[r]] = x[r];
        feasible = feasible && x[r] >= -1e-12 && x[r] <= c + 1e-12;
      }
      const double v = dual_objective(q, polished);
      if (feasible && v <= best) best = v;
    }
  }
  return best;
}

Outcome ocsvm_oracle() {
  Outcome o;
  std::mt19937_64 rng(20240917);
  std::uniform_int_distribution<std::size_t> npts(2, kC3MaxPoints), dims(1, kC3MaxDims);
  std::uniform_real_distribution<double> nus(0.05, 0.95);
  std::normal_distribution<double> g(0.0, 1.0);
  const char* kernels[] = {"linear", "rbf:auto", "rbf:0.5", "rbf:2"};
  double worst = 0, worst_default = 0;
  for (int k = 0; k < kC3Datasets; ++k) {
    const std::size_t n = npts(rng), d = dims(rng);
    features::FeatureMatrix x;
    for (std::size_t c = 0; c < d; ++c) x.columns.push_back("freq::c" + std::to_string(c));
    for (std::size_t r = 0; r < n; ++r) {
      x.row_ids.push_back(std::to_string(r));
      for (std::size_t c = 0; c < d; ++c) x.values.push_back(g(rng));
    }
    const auto spec = detectors::KernelSpec::parse(kernels[k % 4]);
    const double nu = nus(rng);
    const auto model = detectors::train_ocsvm(x, {.nu = nu, .kernel = spec, .tol = kC3SolverTol});
    const auto loose = detectors::train_ocsvm(x, {.nu = nu, .kernel = spec});

    // Kernel matrix straight from the definitions.
    const double gamma = spec.resolved_gamma(d);
    Dense q(n, std::vector<double>(n));
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        double dot = 0, dist = 0;
        for (std::size_t c = 0; c < d; ++c) {
          dot += x.at(i, c) * x.at(j, c);
          dist += (x.at(i, c) - x.at(j, c)) * (x.at(i, c) - x.at(j, c));
        }
        q[i][j] = spec.kind == detectors::KernelKind::kLinear ? dot : std::exp(-gamma * dist);
      }
    }
    const double oracle = qp_oracle(q, 1.0 / (nu * static_cast<double>(n)));
    const double gap = std::abs(model.objective - oracle);
    worst = std::max(worst, gap);
    worst_default = std::max(worst_default, std::abs(loose.objective - oracle));
    if (gap > kC3ObjectiveTol) {
      o.fail("dataset " + std::to_string(k) + ": objective " + std::to_string(model.objective) + " vs oracle " +
             std::to_string(oracle));
    }
    std::size_t outliers = 0;
    std::size_t loose_outliers = 0;
    for (std::size_t r = 0; r < n; ++r) {
      outliers += model.decision({x.row(r), d}) < 0.0;
      loose_outliers += loose.decision({x.row(r), d}) < 0.0;
    }
    const double dn = static_cast<double>(n);
    if (static_cast<double>(std::max(outliers, loose_outliers)) / dn > nu + 1.0 / dn) {
      o.fail("dataset " + std::to_string(k) + ": outlier fraction exceeds nu + 1/n");
    }
  }
  if (o.pass) {
    std::ostringstream d;
    d << kC3Datasets << " datasets, max |objective - oracle| = " << worst << " at tol " << kC3SolverTol << " ("
      << worst_default << " at the default tol)";
    o.detail = d.str();
  }
  return o;
}

// ------------------------------------------------------------ criterion 4

trace::TraceLog random_log(std::mt19937_64& rng) {
  static const char* names[] = {"read", "write", "openat", "close", "mmap", "futex", "clone3"};
  const std::size_t procs = 1 + rng() % 4;
  std::vector<std::int64_t> pids;
  while (pids.size() < procs) {
    const auto p = static_cast<std::int64_t>(100 + rng() % 90000);
    if (std::find(pids.begin(), pids.end(), p) == pids.end()) pids.push_back(p);
  }
  trace::TraceLog log;
  const std::size_t n = rng() % 80;
  for (std::size_t i = 0; i < n; ++i) {
    trace::RawTraceEvent e;
    e.pid = pids[rng() % procs];
    e.syscall = names[rng() % 7];
    e.retval = "0";
    log.events.push_back(e);
    if (std::find(log.pids.begin(), log.pids.end(), e.pid) == log.pids.end()) log.pids.push_back(e.pid);
  }
  return log;
}

Outcome feature_oracles() {
  Outcome o;
  std::mt19937_64 rng(4242);
  std::size_t ngram_checks = 0, proc_checks = 0;
  for (int t = 0; t < kC4Logs; ++t) {
    const auto original = random_log(rng);
    // Features are taken from the parsed text; the oracles use the original events.
    const auto log = trace::parse_raw_trace(trace::format_raw_trace(original), {.strict = true});
    const auto& ev = original.events;
    for (int n = 2; n <= 4; ++n) {
      FeatureMap expected;
      for (std::size_t i = 0; i + static_cast<std::size_t>(n) <= ev.size(); ++i) {
        std::string key = "seq::" + ev[i].syscall;
        for (int k = 1; k < n; ++k) key += ":" + ev[i + static_cast<std::size_t>(k)].syscall;
        expected[key] += 1;
      }
      if (features::ngram_features(log, n) != expected) o.fail("n-gram mismatch on log " + std::to_string(t));
      ++ngram_checks;
    }
    if (ev.empty()) continue;
    std::map<std::int64_t, std::string> label;
    for (const auto& e : ev) {
      if (!label.contains(e.pid)) label[e.pid] = "P" + std::to_string(label.size() + 1);
    }
    FeatureMap expected;
    for (std::size_t i = 0; i + 1 < ev.size(); ++i) {
      expected["proc::" + label[ev[i].pid] + ":" + ev[i].syscall + "_" + label[ev[i + 1].pid] + ":" +
               ev[i + 1].syscall] += 1;
    }
    const auto got = features::process_sequence_features(log);
    if (got != expected) o.fail("process-sequence mismatch on log " + std::to_string(t));
    if (trace::normalize_pids(log) != label) o.fail("pid labels differ from first appearance on log " + std::to_string(t));

    // Renumber pids with a random injective map; appearance order is kept.
    auto renumbered = log;
    std::map<std::int64_t, std::int64_t> to;
    std::set<std::int64_t> used;
    for (auto p : log.pids) {
      std::int64_t fresh;
      do {
        fresh = 1 + static_cast<std::int64_t>(rng() % 4000000);
      } while (!used.insert(fresh).second);
      to[p] = fresh;
    }
    for (auto& e : renumbered.events) e.pid = to.at(e.pid);
    for (auto& p : renumbered.pids) p = to.at(p);
    if (features::process_sequence_features(renumbered) != got) o.fail("renumbering changed process features");
    const auto relabel = trace::normalize_pids(renumbered);
    for (const auto& [pid, l] : label) {
      if (relabel.at(to.at(pid)) != l) o.fail("renumbering changed pid labels");
    }
    ++proc_checks;
  }

  // Scaler: presence columns and (near-)constant columns keep scale 1 exactly;
  // others divide by the population sd; zeros stay zeros.
  std::size_t scaler_checks = 0;
  for (int t = 0; t < kC4Logs; ++t) {
    const std::size_t rows = 1 + rng() % 30;
    features::FeatureMatrix m;
    m.columns = {"pres::read", "freq::const", "freq::tiny", "freq::sparse", "seq::read:write"};
    for (std::size_t r = 0; r < rows; ++r) {
      m.row_ids.push_back(std::to_string(r));
      m.values.push_back(static_cast<double>(rng() % 2));
      m.values.push_back(7.0);
      m.values.push_back(r % 2 ? 1.0 : 1.0 + 1e-13);
      m.values.push_back(rng() % 3 == 0 ? 0.0 : static_cast<double>(rng() % 500));
      m.values.push_back(static_cast<double>(rng() % 4));
    }
    const auto s = features::fit_scaler(m);
    const auto scaled = features::transform(s, m);
    for (std::size_t c = 0; c < m.cols(); ++c) {
      double mean = 0;
      for (std::size_t r = 0; r < rows; ++r) mean += m.at(r, c);
      mean /= static_cast<double>(rows);
      double ss = 0;
      for (std::size_t r = 0; r < rows; ++r) ss += (m.at(r, c) - mean) * (m.at(r, c) - mean);
      const double sd = std::sqrt(ss / static_cast<double>(rows));
      const bool keep = c == 0 || sd < features::ScalerState::kEpsilon;
      if (keep ? s.scale[c] != 1.0 : std::abs(s.scale[c] - sd) > kC4ScaleRelTol * sd) {
        o.fail("scale of " + m.columns[c] + " breaks the flooring rule");
      }
      for (std::size_t r = 0; r < rows; ++r) {
        if ((scaled.at(r, c) == 0.0) != (m.at(r, c) == 0.0)) o.fail("zero pattern changed in " + m.columns[c]);
        if (scaled.at(r, c) != m.at(r, c) / s.scale[c]) o.fail("scaled value is not value / scale");
      }
    }
    ++scaler_checks;
  }
  if (o.pass) {
    o.detail = std::to_string(ngram_checks) + " n-gram, " + std::to_string(proc_checks) + " process-sequence, " +
               std::to_string(scaler_checks) + " scaler checks";
  }
  return o;
}

// ------------------------------------------------------------ criterion 5

std::vector<fs::path> files_with(const fs::path& dir, std::initializer_list<const char*> exts) {
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    for (const char* ext : exts) {
      if (e.path().extension() == ext) out.push_back(e.path());
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

Outcome pickle_round_trip() {
  Outcome o;
  std::size_t streams = 0;
  auto round_trip = [&](const Bytes& bytes, const std::string& name) {
    const auto program = pickle::disassemble(bytes);
    if (pickle::assemble(program.opcodes) != bytes) o.fail("round trip differs: " + name);
    ++streams;
  };
  for (const auto& dir : {kFixtures / "pickle/hosts", kFixtures / "pickle/panels", kData / "registry/models"}) {
    for (const auto& p : files_with(dir, {".pkl", ".pt"})) {
      round_trip(pickle::open_artifact(read_file_bytes(p)).pickle, p.string());
    }
  }
  for (const auto& p : files_with(kData / "payloads", {".pkl"})) round_trip(read_file_bytes(p), p.string());

  std::vector<corpus::CampaignHost> hosts;
  for (const auto& dir : {kFixtures / "pickle/hosts", kData / "registry/models"}) {
    for (const auto& p : files_with(dir, {".pkl", ".pt"})) hosts.push_back({p.filename().string(), read_file_bytes(p)});
  }
  const auto payloads = pickle::load_payload_library(kData / "payloads");
  const auto rows = corpus::run_injection_campaign(hosts, payloads);

  // Independent recheck of every pair.
  std::size_t checked = 0;
  for (const auto& payload : payloads) {
    Bytes alone{0x80, 0x05};
    const Bytes body = pickle::assemble(payload.opcodes);
    alone.insert(alone.end(), body.begin(), body.end());
    alone.push_back('.');
    const auto want = pickle::validate(alone).calls;
    if (want.empty()) o.fail(payload.name + " records no call on its own");
    for (const auto& host : hosts) {
      const auto artifact = pickle::open_artifact(host.artifact);
      const auto report = pickle::validate(pickle::inject(artifact.pickle, payload));
      const std::string pair = host.id + " x " + payload.name;
      if (!report.success) o.fail(pair + ": does not validate");
      if (!report.memo_collisions.empty()) o.fail(pair + ": memo collision");
      for (const auto& w : want) {
        const bool found = std::any_of(report.calls.begin(), report.calls.end(), [&](const pickle::RecordedCall& c) {
          return c.callable == w.callable && c.nargs == w.nargs && c.via == w.via;
        });
        if (!found) o.fail(pair + ": payload call " + w.callable + " missing");
      }
      ++checked;
    }
  }
  std::size_t valid = 0;
  for (const auto& r : rows) valid += r.valid;
  if (valid != rows.size()) o.fail("campaign reports " + std::to_string(rows.size() - valid) + " invalid pairs");
  if (checked < kC5MinPairs) o.fail("only " + std::to_string(checked) + " pairs");
  if (o.pass) {
    o.detail = std::to_string(streams) + " streams byte-exact; " + std::to_string(checked) + " pairs (" +
               std::to_string(hosts.size()) + " hosts x " + std::to_string(payloads.size()) + " payloads) valid";
  }
  return o;
}

// ------------------------------------------------------------ criterion 7

struct CliRun {
  int code;
  std::string out;
};

CliRun mw(std::vector<std::string> args) {
  args.insert(args.begin(), "modelwarden");
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str()};
}

std::map<std::string, std::string> dir_contents(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) out[fs::relative(e.path(), dir).string()] = read_file_text(e.path());
  }
  return out;
}

Outcome determinism() {
  Outcome o;
  TempDir tmp("determinism");
  const auto a = tmp.path / "corpus-a", b = tmp.path / "corpus-b";
  for (const auto& dir : {a, b}) {
    if (mw({"--seed", "3", "gen-corpus", "-o", dir.string(), "--benign", "300", "--real", "4", "--injected", "60"})
            .code != 0) {
      o.fail("gen-corpus failed");
      return o;
    }
  }
  if (dir_contents(a) != dir_contents(b)) o.fail("gen-corpus output differs between runs");

  const auto manifest = (a / "manifest.json").string();
  const auto r1 = tmp.path / "run-1", r2 = tmp.path / "run-2", r3 = tmp.path / "run-3";
  const auto t1 = mw({"train", manifest, "-o", r1.string()});
  const auto t2 = mw({"train", manifest, "-o", r2.string()});
  const auto t3 = mw({"--jobs", "3", "train", manifest, "-o", r3.string()});
  if (t1.code != 0 || t2.code != 0 || t3.code != 0) o.fail("train failed");
  if (dir_contents(r1) != dir_contents(r2)) o.fail("train output differs between identical runs");
  if (dir_contents(r1) != dir_contents(r3)) o.fail("train output depends on --jobs");
  if (mw({"--format", "json", "train", manifest, "-o", r2.string()}).out !=
      mw({"--format", "json", "train", manifest, "-o", r3.string()}).out) {
    o.fail("train json differs");
  }

  for (const char* fmt : {"csv", "json"}) {
    const std::vector<std::string> args = {"--format", fmt, "evaluate", "--model", (r1 / "model.json").string(),
                                           "--dataset", a.string(), "--split", (r1 / "split.csv").string()};
    const auto e1 = mw(args), e2 = mw(args);
    if (e1.code != 0 || e1.out != e2.out || e1.out.empty()) o.fail(std::string("evaluate ") + fmt + " differs");
  }

  std::vector<std::string> scan = {"--format", "json", "scan", "--model", (r1 / "model.json").string()};
  for (const auto& e : fs::directory_iterator(a / "traces")) scan.push_back(e.path().string());
  std::sort(scan.begin() + 5, scan.end());
  const auto s1 = mw(scan), s2 = mw(scan);
  if (s1.code != s2.code || s1.out != s2.out || s1.out.empty()) o.fail("scan output differs");
  if (o.pass) o.detail = "gen-corpus, train (jobs 1 and 3), evaluate csv/json, scan json over 364 traces";
  return o;
}

}  // namespace

// Optional arguments select criteria by number.
int main(int argc, char** argv) {
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));
  criterion(1, "metric regression on published confusion counts", kC1BudgetS, metric_regression);
  criterion(2, "synthetic end-to-end, default configuration", kC2BudgetS, end_to_end);
  criterion(3, "OCSVM dual objective vs dense QP oracle, nu-property", kC3BudgetS, ocsvm_oracle);
  criterion(4, "feature oracles, pid renumbering, scaler rules", 0, feature_oracles);
  criterion(5, "pickle round trip and injection campaign", kC5BudgetS, pickle_round_trip);
  criterion(6, "ablation directions", 0, ablation_directions);
  criterion(7, "determinism of train/evaluate/scan", 0, determinism);
  std::printf("%s: %d of %d criteria failed\n", failures ? "FAIL" : "PASS", failures, ran);
  return failures;
}
