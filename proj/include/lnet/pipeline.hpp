// End-to-end estimation: equal binning, initial fit, optional adaptive
// merging and refit, plus the Monte Carlo harnesses built on it (method
// comparison, sweeps over the interval count, pair-split cross-validation).
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <future>
#include <numeric>
#include <ostream>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "lnet/baselines.hpp"
#include "lnet/error.hpp"
#include "lnet/estimator.hpp"
#include "lnet/events.hpp"
#include "lnet/merging.hpp"
#include "lnet/synthetic.hpp"
#include "lnet/tensor.hpp"
#include "lnet/text.hpp"

namespace lnet {

// ---------------------------------------------------------------------------
// Regime formulas

/// n sqrt(T) / log^{3/2+eps}(nT) in the strong-intensity regime, otherwise
/// n sqrt(T) / log^{1/2+eps}(nT), rounded and at least 2.
inline Index auto_L(double n, double horizon, double epsilon = 0.1) {
  if (!(n >= 2.0) || !(horizon > 1.0)) throw ValueError("auto_L: need n >= 2 and T > 1");
  const double lg = std::log(n * horizon);
  const double power = (strong_intensity_regime(n, horizon) ? 1.5 : 0.5) + epsilon;
  const double value = n * std::sqrt(horizon) / std::pow(lg, power);
  return std::max<Index>(2, static_cast<Index>(std::llround(value)));
}

/// Merging pays off when T > n^{2/3} log^{1 + 2 eps / 3}(nT).
inline bool merge_gate(double n, double horizon, double epsilon = 0.1) {
  const double lg = std::log(n * horizon);
  return horizon > std::pow(n, 2.0 / 3.0) * std::pow(lg, 1.0 + 2.0 * epsilon / 3.0);
}

/// T / log^{1+eps}(nT), rounded and at least 1.
inline Index strong_L(double n, double horizon, double epsilon = 0.1) {
  const double value = horizon / std::pow(std::log(n * horizon), 1.0 + epsilon);
  return std::max<Index>(1, static_cast<Index>(std::llround(value)));
}

/// Node count used in the regime formulas: sqrt(n1 n2).
inline double node_scale(Index n1, Index n2) {
  return std::sqrt(static_cast<double>(n1) * static_cast<double>(n2));
}

// ---------------------------------------------------------------------------
// Single run

struct PipelineOptions {
  Dims3 ranks{3, 3, 3};
  /// Number of equal intervals; auto_L when unset.
  std::optional<Index> intervals;
  double epsilon = 0.1;
  PgdConfig pgd;
  MergeConfig merge;
  /// Merge even when the regime gate says the initial estimate is preferable.
  bool force_merge = false;

  void validate() const {
    for (Index r : ranks)
      if (r < 1) throw ValueError("ranks must be positive");
    if (intervals && *intervals < 1) throw ValueError("interval count must be at least 1");
    if (!(epsilon > 0.0)) throw ValueError("epsilon must be positive");
    if (merge.nu && !(*merge.nu > 0.0)) throw ValueError("nu must be positive");
    if (merge.k_max && *merge.k_max < 1) throw ValueError("k_max must be at least 1");
    pgd.validate();
  }
};

struct PipelineReport {
  Partition delta{1.0, {1.0}};
  FitResult initial;
  bool gate_open = false;
  bool merged = false;
  double nu = 0.0;
  std::optional<KSelection> selection;
  std::optional<OrderedPartitionResult> segments;
  std::optional<Partition> eta_hat;
  std::optional<FitResult> final_fit;
  /// Filled when a ground truth is supplied.
  std::optional<double> initial_error;
  std::optional<double> final_error;

  const FitResult& estimate() const { return final_fit ? *final_fit : initial; }
  const Partition& estimate_partition() const { return eta_hat ? *eta_hat : delta; }
};

namespace detail {

template <class F>
auto in_stage(const char* stage, F&& body) -> decltype(body()) {
  try {
    return body();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(stage, e.what());
  }
}

inline FitResult fit_on(const Tensor3& counts, const Partition& p, const Dims3& ranks,
                        const PgdConfig& cfg, const PairMask& mask) {
  const TuckerFactors init = initialize(counts, p, ranks, cfg, 0.5, mask);
  return pgd_fit(counts, p, init, cfg, mask);
}

// Ranks with r3 capped at the number of intervals.
inline Dims3 capped_ranks(Dims3 ranks, Index intervals) {
  ranks[2] = std::min(ranks[2], intervals);
  return ranks;
}

}  // namespace detail

/// Bins the edges on equal intervals, fits, and if merging applies selects
/// K, merges the intervals and refits on the merged partition.
inline PipelineReport run_pipeline(const EdgeSet& edges, const PipelineOptions& opts,
                                   const GroundTruth* truth = nullptr,
                                   const PairMask& mask = {}) {
  detail::in_stage("config", [&] { opts.validate(); });
  const double n = node_scale(edges.n1(), edges.n2());
  const double horizon = edges.horizon();
  PipelineReport rep;

  const Index L = detail::in_stage("partition", [&] {
    return opts.intervals.value_or(std::max(auto_L(n, horizon, opts.epsilon), opts.ranks[2]));
  });
  rep.delta = detail::in_stage("partition", [&] { return equal_partition(horizon, L); });
  const Tensor3 y = detail::in_stage("bin", [&] { return bin_edges(edges, rep.delta); });

  rep.initial = detail::in_stage("initial-fit", [&] {
    return detail::fit_on(y, rep.delta, detail::capped_ranks(opts.ranks, L), opts.pgd, mask);
  });
  if (truth) {
    rep.initial_error = detail::in_stage("evaluate", [&] {
      return estimation_error(rep.initial.assembled, expand_truth(*truth, rep.delta));
    });
  }

  rep.gate_open = merge_gate(n, horizon, opts.epsilon);
  rep.merged = (rep.gate_open || opts.force_merge) && L >= 2;
  if (!rep.merged) return rep;

  detail::in_stage("merge", [&] {
    const Matrix w_tilde = normalize_w(rep.initial.factors.w, opts.merge.condition_tol);
    const Index k_max = std::min(opts.merge.k_max.value_or(default_k_max(L)), L);
    rep.nu = opts.merge.nu.value_or(default_nu(n, horizon, opts.epsilon));
    const SegmentationPath path(w_tilde, k_max);
    rep.selection = select_k_detail(path, L, rep.nu);
    rep.segments = path.best(rep.selection->k);
    rep.segments->endpoints =
        endpoints_from_segments(rep.segments->segments, rep.delta.mean_width(), horizon);
    rep.eta_hat = Partition(horizon, rep.segments->endpoints);
  });

  const Tensor3 y_eta = detail::in_stage("bin", [&] { return bin_edges(edges, *rep.eta_hat); });
  rep.final_fit = detail::in_stage("final-fit", [&] {
    return detail::fit_on(y_eta, *rep.eta_hat, detail::capped_ranks(opts.ranks, rep.eta_hat->count()),
                          opts.pgd, mask);
  });
  if (truth) {
    rep.final_error = detail::in_stage("evaluate", [&] {
      return estimation_error(rep.final_fit->assembled, majority_truth(*truth, *rep.eta_hat));
    });
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Replication helpers

/// Seed for the edge sampler of a replication whose truth uses `truth_seed`.
inline std::uint64_t sampling_seed(std::uint64_t truth_seed) {
  return truth_seed * 0x9E3779B97F4A7C15ULL + 0x632BE59BD9B4E019ULL;
}

/// Runs fn(0..count-1) on up to `threads` worker threads and returns the
/// results in index order. threads = 0 uses the hardware concurrency.
template <class F>
auto parallel_map(std::size_t count, unsigned threads, F fn)
    -> std::vector<decltype(fn(std::size_t{}))> {
  using R = decltype(fn(std::size_t{}));
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  std::vector<std::optional<R>> slots(count);
  std::vector<std::future<void>> running;
  for (std::size_t i = 0; i < count; ++i) {
    if (running.size() >= threads) {
      running.front().get();
      running.erase(running.begin());
    }
    running.push_back(std::async(std::launch::async, [&, i] { slots[i].emplace(fn(i)); }));
  }
  for (auto& f : running) f.get();
  std::vector<R> out;
  out.reserve(count);
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

struct MeanSd {
  double mean = 0.0;
  double sd = 0.0;
};

inline MeanSd mean_sd(const std::vector<double>& xs) {
  MeanSd out;
  if (xs.empty()) return out;
  out.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - out.mean) * (x - out.mean);
    out.sd = std::sqrt(ss / static_cast<double>(xs.size() - 1));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Method comparison

/// Mean counts lambda0 exp(m) width per cell.
inline Tensor3 mean_counts(const Tensor3& m, const Partition& p, double lambda0) {
  Tensor3 out(m.dims());
  for (Index l = 0; l < m.dim(3); ++l) {
    out.slice(l) = (lambda0 * p.width(l)) * m.slice(l).array().exp().matrix();
  }
  return out;
}

/// Count-tensor estimate mapped to the log-intensity scale:
/// log(max(Y_hat, floor) / (lambda0 width)).
inline Tensor3 counts_to_log_intensity(const Tensor3& y_hat, const Partition& p, double lambda0,
                                       double floor = 0.5) {
  Tensor3 out(y_hat.dims());
  for (Index l = 0; l < y_hat.dim(3); ++l) {
    out.slice(l) =
        (y_hat.slice(l).array().max(floor) / (lambda0 * p.width(l))).log().matrix();
  }
  return out;
}

/// |a - b|_F / |b|_F.
inline double relative_error(const Tensor3& a, const Tensor3& b) {
  const double denom = frobenius_norm(b);
  if (!(denom > 0.0)) throw ValueError("relative_error: reference is zero");
  return std::sqrt(squared_distance(a, b)) / denom;
}

inline const std::vector<std::string>& method_names() {
  static const std::vector<std::string> names{"AM(K)", "ES(L_opt)", "ES(L_str)", "HOOI", "HOSVD"};
  return names;
}

struct Replication {
  std::uint64_t seed = 0;
  Index k_hat = 0;
  Index l_opt = 0;
  Index l_str = 0;
  std::vector<double> eta_hat;
  std::vector<double> eta;
  /// Per method, in method_names() order: mean squared log-intensity error.
  std::vector<double> log_error;
  /// Per method: relative Frobenius error of the mean-count tensor.
  std::vector<double> count_error;
};

struct MethodSummary {
  std::string method;
  MeanSd log_error;
  MeanSd count_error;
};

struct Comparison {
  std::vector<Replication> replications;
  std::vector<MethodSummary> methods;
  MeanSd k_hat;
};

/// One replication of every method on one truth and one shared edge set.
/// AM is always computed (merging forced); ES(L_str), HOOI and HOSVD share
/// the count tensor on L_str equal intervals.
inline Replication compare_once(const SyntheticConfig& cfg, const PipelineOptions& opts) {
  const GroundTruth gt = generate_truth(cfg);
  const EdgeSet edges = sample_edges(gt, cfg.lambda0, sampling_seed(cfg.seed));
  PipelineOptions run_opts = opts;
  run_opts.force_merge = true;
  run_opts.pgd.lambda0 = cfg.lambda0;
  const PipelineReport rep = run_pipeline(edges, run_opts, &gt);
  const double n = node_scale(edges.n1(), edges.n2());
  const double lambda0 = cfg.lambda0;

  Replication out;
  out.seed = cfg.seed;
  out.k_hat = rep.selection->k;
  out.l_opt = rep.delta.count();
  out.eta_hat = rep.eta_hat->breakpoints();
  out.eta = gt.eta.breakpoints();

  auto record = [&](const Tensor3& m_hat_log, const Tensor3& y_hat, const Partition& p,
                    bool merged) {
    const Tensor3 m_star = merged ? majority_truth(gt, p) : expand_truth(gt, p);
    out.log_error.push_back(estimation_error(m_hat_log, m_star));
    out.count_error.push_back(relative_error(y_hat, mean_counts(m_star, p, lambda0)));
  };
  record(rep.final_fit->assembled, mean_counts(rep.final_fit->assembled, *rep.eta_hat, lambda0),
         *rep.eta_hat, true);
  record(rep.initial.assembled, mean_counts(rep.initial.assembled, rep.delta, lambda0), rep.delta,
         false);

  out.l_str = std::max(strong_L(n, edges.horizon(), opts.epsilon), opts.ranks[2]);
  const Partition p_str = equal_partition(edges.horizon(), out.l_str);
  const Tensor3 y_str = bin_edges(edges, p_str);
  const Dims3 ranks_str = detail::capped_ranks(opts.ranks, out.l_str);
  const FitResult es_str = detail::fit_on(y_str, p_str, ranks_str, run_opts.pgd, {});
  record(es_str.assembled, mean_counts(es_str.assembled, p_str, lambda0), p_str, false);

  for (const TuckerFactors& f : {hooi(y_str, ranks_str), hosvd(y_str, ranks_str)}) {
    const Tensor3 y_hat = tucker_assemble(f);
    record(counts_to_log_intensity(y_hat, p_str, lambda0), y_hat, p_str, false);
  }
  return out;
}

/// Replications use truth seeds cfg.seed, cfg.seed + 1, ...
inline Comparison compare_methods(const SyntheticConfig& cfg, const PipelineOptions& opts,
                                  std::size_t replications, unsigned threads = 0) {
  if (replications < 1) throw ValueError("compare_methods: need at least one replication");
  Comparison out;
  out.replications = parallel_map(replications, threads, [&](std::size_t r) {
    SyntheticConfig c = cfg;
    c.seed = cfg.seed + r;
    return compare_once(c, opts);
  });
  const auto& names = method_names();
  for (std::size_t m = 0; m < names.size(); ++m) {
    std::vector<double> le, ce;
    for (const Replication& r : out.replications) {
      le.push_back(r.log_error[m]);
      ce.push_back(r.count_error[m]);
    }
    out.methods.push_back({names[m], mean_sd(le), mean_sd(ce)});
  }
  std::vector<double> ks;
  for (const Replication& r : out.replications) ks.push_back(static_cast<double>(r.k_hat));
  out.k_hat = mean_sd(ks);
  return out;
}

// ---------------------------------------------------------------------------
// Sweep over the number of equal intervals

struct Sweep {
  std::vector<Index> intervals;
  /// errors[r][i]: replication r, intervals[i].
  std::vector<std::vector<double>> errors;
  /// AM error per replication on the same edge set.
  std::vector<double> am_errors;
};

inline Sweep sweep_L(const SyntheticConfig& cfg, const PipelineOptions& opts,
                     const std::vector<Index>& intervals, std::size_t replications,
                     unsigned threads = 0) {
  if (intervals.empty()) throw ValueError("sweep_L: no interval counts");
  for (Index l : intervals)
    if (l < 1) throw ValueError("sweep_L: interval counts must be positive");
  Sweep out;
  out.intervals = intervals;
  struct Row {
    std::vector<double> errors;
    double am = 0.0;
  };
  const auto rows = parallel_map(replications, threads, [&](std::size_t r) {
    SyntheticConfig c = cfg;
    c.seed = cfg.seed + r;
    const GroundTruth gt = generate_truth(c);
    const EdgeSet edges = sample_edges(gt, c.lambda0, sampling_seed(c.seed));
    PgdConfig pgd = opts.pgd;
    pgd.lambda0 = c.lambda0;
    Row row;
    for (Index l : intervals) {
      const Partition p = equal_partition(c.horizon, l);
      const FitResult fit =
          detail::fit_on(bin_edges(edges, p), p, detail::capped_ranks(opts.ranks, l), pgd, {});
      row.errors.push_back(estimation_error(fit.assembled, expand_truth(gt, p)));
    }
    PipelineOptions am_opts = opts;
    am_opts.force_merge = true;
    am_opts.pgd = pgd;
    row.am = *run_pipeline(edges, am_opts, &gt).final_error;
    return row;
  });
  for (const Row& row : rows) {
    out.errors.push_back(row.errors);
    out.am_errors.push_back(row.am);
  }
  return out;
}

/// L,mean,sd per interval count, then an AM reference row (L empty).
inline void write_sweep_csv(const Sweep& s, std::ostream& out) {
  out << "L,mean_error,sd_error\n";
  for (std::size_t i = 0; i < s.intervals.size(); ++i) {
    std::vector<double> col;
    for (const auto& row : s.errors) col.push_back(row[i]);
    const MeanSd ms = mean_sd(col);
    out << s.intervals[i] << ',' << text::format_double(ms.mean) << ','
        << text::format_double(ms.sd) << '\n';
  }
  const MeanSd am = mean_sd(s.am_errors);
  out << "AM," << text::format_double(am.mean) << ',' << text::format_double(am.sd) << '\n';
}

// ---------------------------------------------------------------------------
// Cross-validation over node pairs

struct FoldResult {
  double am_error = 0.0;
  double es_error = 0.0;
  Index k_hat = 0;
};

struct CrossValidation {
  std::vector<FoldResult> folds;
  double am_error = 0.0;
  double es_error = 0.0;
};

/// fold[i][j] in [0, folds): node pairs shuffled by `seed` and dealt round robin.
inline Matrix fold_assignment(Index n1, Index n2, int folds, std::uint64_t seed) {
  if (folds < 1) throw ValueError("crossval: folds must be at least 1");
  std::vector<Index> order(static_cast<std::size_t>(n1 * n2));
  std::iota(order.begin(), order.end(), Index{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  Matrix fold(n1, n2);
  for (std::size_t pos = 0; pos < order.size(); ++pos) {
    const Index cell = order[pos];
    fold(cell % n1, cell / n1) = static_cast<double>(pos % static_cast<std::size_t>(folds));
  }
  return fold;
}

/// Each fold's pairs are held out of the likelihood; the model fitted on the
/// rest predicts their total counts. Reports the masked relative error of AM
/// (merging forced) and of the equal-interval estimate, averaged over folds.
inline CrossValidation crossval(const EdgeSet& edges, const PipelineOptions& opts, int folds = 5,
                                std::uint64_t seed = 1, unsigned threads = 0) {
  const Matrix fold = fold_assignment(edges.n1(), edges.n2(), folds, seed);
  const Matrix observed = pair_counts(edges);
  PipelineOptions run_opts = opts;
  run_opts.force_merge = true;
  CrossValidation out;
  out.folds = parallel_map(static_cast<std::size_t>(folds), threads, [&](std::size_t f) {
    const Matrix held_out = (fold.array() == static_cast<double>(f)).cast<double>().matrix();
    const Matrix train = Matrix::Ones(fold.rows(), fold.cols()) - held_out;
    return detail::in_stage("crossval", [&] {
      if (train.sum() == 0.0) throw ValueError("fold " + std::to_string(f + 1) + " leaves no training pairs");
      const PipelineReport rep = run_pipeline(edges, run_opts, nullptr, train);
      FoldResult r;
      r.k_hat = rep.selection ? rep.selection->k : 1;
      const double lambda0 = run_opts.pgd.lambda0;
      r.es_error = masked_prediction_error(
          observed, expected_pair_counts(rep.initial.assembled, rep.delta, lambda0), held_out);
      r.am_error = masked_prediction_error(
          observed, expected_pair_counts(rep.estimate().assembled, rep.estimate_partition(), lambda0),
          held_out);
      return r;
    });
  });
  for (const FoldResult& r : out.folds) {
    out.am_error += r.am_error / static_cast<double>(folds);
    out.es_error += r.es_error / static_cast<double>(folds);
  }
  return out;
}

// ---------------------------------------------------------------------------
// CSV tables

/// segments,loss,criterion per candidate count, loss being loss_S / L.
inline void write_selection_csv(const KSelection& sel, double nu, std::ostream& out) {
  out << "segments,loss,criterion\n";
  for (std::size_t k = 0; k < sel.criterion.size(); ++k) {
    const double c = sel.criterion[k];
    out << (k + 1) << ',' << text::format_double(c - nu * static_cast<double>(k + 1)) << ','
        << text::format_double(c) << '\n';
  }
}

/// method,mean and sd of both error scales; a final row carries K-hat.
inline void write_comparison_csv(const Comparison& c, std::ostream& out) {
  out << "method,log_error_mean,log_error_sd,count_error_mean,count_error_sd\n";
  for (const MethodSummary& m : c.methods) {
    out << m.method << ',' << text::format_double(m.log_error.mean) << ','
        << text::format_double(m.log_error.sd) << ',' << text::format_double(m.count_error.mean)
        << ',' << text::format_double(m.count_error.sd) << '\n';
  }
  out << "K_hat," << text::format_double(c.k_hat.mean) << ',' << text::format_double(c.k_hat.sd)
      << ",,\n";
}

/// One row per replication and method.
inline void write_replications_csv(const Comparison& c, std::ostream& out) {
  out << "seed,k_hat,l_opt,l_str,method,log_error,count_error\n";
  const auto& names = method_names();
  for (const Replication& r : c.replications) {
    for (std::size_t m = 0; m < names.size(); ++m) {
      out << r.seed << ',' << r.k_hat << ',' << r.l_opt << ',' << r.l_str << ',' << names[m] << ','
          << text::format_double(r.log_error[m]) << ',' << text::format_double(r.count_error[m])
          << '\n';
    }
  }
}

inline void write_crossval_csv(const CrossValidation& cv, std::ostream& out) {
  out << "fold,k_hat,am_error,es_error\n";
  for (std::size_t f = 0; f < cv.folds.size(); ++f) {
    out << (f + 1) << ',' << cv.folds[f].k_hat << ',' << text::format_double(cv.folds[f].am_error)
        << ',' << text::format_double(cv.folds[f].es_error) << '\n';
  }
  out << "mean,," << text::format_double(cv.am_error) << ',' << text::format_double(cv.es_error)
      << '\n';
}

}  // namespace lnet
