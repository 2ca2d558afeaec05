// Command-line front end: simulation, estimation, merging and the experiment
// harnesses. Every option may also be given in a flat key=value file passed
// with --config; a flag on the command line wins over the file.

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "lnet/io.hpp"
#include "lnet/pipeline.hpp"

namespace fs = std::filesystem;
using namespace lnet;

namespace {

struct Settings {
  // data
  std::string input;
  bool synthetic = false;
  std::string output;
  std::uint64_t seed = 1;
  // synthetic model
  Index n = 50;
  double horizon = 50.0;
  Index k0 = 3;
  double diag_s = 0.5;
  double max_length_ratio = 3.0;
  // estimation
  std::vector<Index> ranks{3, 3, 3};
  double lambda0 = 1.0;
  std::string intervals = "auto";
  double epsilon = 0.1;
  double step_c = 0.1;
  int max_iters = 500;
  double tol = 1e-8;
  std::optional<double> gamma;
  double radius_slack = 2.0;
  int max_halvings = 10;
  int init_sweeps = 30;
  int init_screen_sweeps = 8;
  std::vector<Index> init_groups{0, 3, 4, 8, 16};
  // merging
  std::optional<double> nu;
  std::optional<Index> k_max;
  bool force_merge = false;
  // merge / evaluate inputs
  std::string factors;
  std::string partition;
  std::string truth;
  // harnesses
  std::vector<Index> L_values{5, 10, 25, 50, 100, 200, 400, 800};
  std::size_t reps = 10;
  int folds = 5;
  unsigned threads = 0;
};

std::string default_output() {
  const char* env = std::getenv("LNET_OUTPUT_DIR");
  return env && *env ? env : "lnet-out";
}

void add_options(CLI::App& app, Settings& s) {
  app.add_option("--input", s.input, "Edge-list file");
  app.add_flag("--synthetic", s.synthetic, "Simulate the data instead of reading --input");
  app.add_option("--output", s.output, "Output directory (default $LNET_OUTPUT_DIR or lnet-out)");
  app.add_option("--seed", s.seed, "Seed of the synthetic truth and sampler");

  app.add_option("--n", s.n, "Nodes per side")->check(CLI::PositiveNumber);
  app.add_option("--T", s.horizon, "Time horizon")->check(CLI::PositiveNumber);
  app.add_option("--K0", s.k0, "True number of intervals")->check(CLI::PositiveNumber);
  app.add_option("--diag_s", s.diag_s, "Diagonal of the true core");
  app.add_option("--max_length_ratio", s.max_length_ratio, "Bound on longest/shortest true interval");

  app.add_option("--ranks", s.ranks, "Tucker ranks r1,r2,r3")->expected(3)->delimiter(',');
  app.add_option("--lambda0", s.lambda0, "Baseline intensity")->check(CLI::PositiveNumber);
  app.add_option("--L", s.intervals, "Number of equal intervals or 'auto'");
  app.add_option("--epsilon", s.epsilon, "Exponent slack in the regime formulas");
  app.add_option("--step_c", s.step_c, "Step-size constant");
  app.add_option("--max_iters", s.max_iters, "PGD iteration cap");
  app.add_option("--tol", s.tol, "Relative change that stops PGD");
  app.add_option("--gamma", s.gamma, "Orthogonality penalty weight");
  app.add_option("--radius_slack", s.radius_slack, "Constraint radii over initializer norms");
  app.add_option("--max_halvings", s.max_halvings, "Step halvings allowed after divergence");
  app.add_option("--init_sweeps", s.init_sweeps, "Newton sweeps in the initializer (0: spectral only)");
  app.add_option("--init_screen_sweeps", s.init_screen_sweeps, "Sweeps per candidate start");
  app.add_option("--init_groups", s.init_groups, "Coarse interval counts tried as starts")
      ->delimiter(',');

  app.add_option("--nu", s.nu, "Segment penalty (default: regime formula)");
  app.add_option("--k_max", s.k_max, "Largest segment count considered");
  app.add_flag("--force_merge", s.force_merge, "Merge even when the regime gate is closed");

  app.add_option("--factors", s.factors, "Factor file (merge, evaluate)");
  app.add_option("--partition", s.partition, "Partition file (evaluate)");
  app.add_option("--truth", s.truth, "Directory written by simulate (evaluate)");

  app.add_option("--L_values", s.L_values, "Interval counts for sweep")->delimiter(',');
  app.add_option("--reps", s.reps, "Replications for sweep and compare")->check(CLI::PositiveNumber);
  app.add_option("--folds", s.folds, "Cross-validation folds")->check(CLI::PositiveNumber);
  app.add_option("--threads", s.threads, "Worker threads (0: all cores)");
}

Dims3 ranks_of(const Settings& s) { return {s.ranks[0], s.ranks[1], s.ranks[2]}; }

SyntheticConfig synthetic_config(const Settings& s) {
  SyntheticConfig c;
  c.n = s.n;
  c.horizon = s.horizon;
  c.ranks = ranks_of(s);
  c.k0 = s.k0;
  c.diag_s = s.diag_s;
  c.lambda0 = s.lambda0;
  c.seed = s.seed;
  c.max_length_ratio = s.max_length_ratio;
  c.validate();
  return c;
}

PipelineOptions pipeline_options(const Settings& s) {
  PipelineOptions o;
  o.ranks = ranks_of(s);
  if (s.intervals != "auto") {
    const long long l = text::parse_int(s.intervals, 0, "L");
    if (l < 1) throw ValueError("L must be 'auto' or a positive integer");
    o.intervals = static_cast<Index>(l);
  }
  o.epsilon = s.epsilon;
  o.pgd.lambda0 = s.lambda0;
  o.pgd.gamma = s.gamma;
  o.pgd.step_c = s.step_c;
  o.pgd.max_iters = s.max_iters;
  o.pgd.tol = s.tol;
  o.pgd.radius_slack = s.radius_slack;
  o.pgd.max_halvings = s.max_halvings;
  o.pgd.init_sweeps = s.init_sweeps;
  o.pgd.init_screen_sweeps = s.init_screen_sweeps;
  o.pgd.init_groups = s.init_groups;
  o.merge.nu = s.nu;
  o.merge.k_max = s.k_max;
  o.merge.epsilon = s.epsilon;
  o.force_merge = s.force_merge;
  o.validate();
  return o;
}

class Run {
 public:
  Run(const Settings& s, std::string command) : dir_(s.output.empty() ? default_output() : s.output) {
    fs::create_directories(dir_);
    manifest_.emplace_back("command", std::move(command));
  }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }
  void note(const std::string& key, const std::string& value) { manifest_.emplace_back(key, value); }
  void note(const std::string& key, double value) { note(key, text::format_double(value)); }

  template <class Writer>
  void write(const std::string& name, Writer&& w) {
    auto out = open_output(path(name));
    w(out);
    if (!out) throw ValueError("write to '" + path(name) + "' failed");
    note("file", name);
  }

  void finish() {
    auto out = open_output(path("manifest.txt"));
    write_manifest(manifest_, out);
  }

 private:
  fs::path dir_;
  Manifest manifest_;
};

void note_settings(Run& run, const Settings& s) {
  if (!s.input.empty()) run.note("input", s.input);
  if (s.synthetic) {
    run.note("n", std::to_string(s.n));
    run.note("T", s.horizon);
    run.note("K0", std::to_string(s.k0));
    run.note("diag_s", s.diag_s);
    run.note("max_length_ratio", s.max_length_ratio);
  }
  run.note("seed", std::to_string(s.seed));
  run.note("ranks", std::to_string(s.ranks[0]) + "," + std::to_string(s.ranks[1]) + "," +
                        std::to_string(s.ranks[2]));
  run.note("lambda0", s.lambda0);
  run.note("L", s.intervals);
  run.note("epsilon", s.epsilon);
}

EdgeSet read_edges(const std::string& file) {
  auto in = open_input(file);
  return load_edges(in);
}

// Edges from --input or, with --synthetic, a sampled truth.
struct Data {
  EdgeSet edges;
  std::optional<GroundTruth> truth;
};

Data load_data(const Settings& s) {
  if (s.synthetic == !s.input.empty()) {
    throw ValueError("give exactly one of --input and --synthetic");
  }
  if (!s.synthetic) return {read_edges(s.input), std::nullopt};
  const SyntheticConfig c = synthetic_config(s);
  GroundTruth gt = generate_truth(c);
  EdgeSet edges = sample_edges(gt, c.lambda0, sampling_seed(c.seed));
  return {std::move(edges), std::move(gt)};
}

void write_fit(Run& run, const std::string& tag, const FitResult& fit, const Partition& p) {
  run.write("factors_" + tag + ".txt", [&](std::ostream& o) { save_factors(fit.factors, o); });
  run.write("partition_" + tag + ".txt", [&](std::ostream& o) { save_partition(p, o); });
  run.write("trace_" + tag + ".csv", [&](std::ostream& o) { write_trace_csv(fit.objective_trace, o); });
  run.note("step_c_" + tag, fit.step_c);
  run.note("iterations_" + tag, std::to_string(fit.iters_run));
}

void write_truth(Run& run, const GroundTruth& gt) {
  run.write("truth_factors.txt", [&](std::ostream& o) { save_factors(gt.factors, o); });
  run.write("truth_partition.txt", [&](std::ostream& o) { save_partition(gt.eta, o); });
}

// ---------------------------------------------------------------------------

void cmd_simulate(const Settings& s) {
  Settings sim = s;
  sim.synthetic = true;
  const SyntheticConfig c = detail::in_stage("config", [&] { return synthetic_config(sim); });
  const GroundTruth gt = detail::in_stage("simulate", [&] { return generate_truth(c); });
  const EdgeSet edges =
      detail::in_stage("simulate", [&] { return sample_edges(gt, c.lambda0, sampling_seed(c.seed)); });
  detail::in_stage("write", [&] {
    Run run(sim, "simulate");
    note_settings(run, sim);
    write_truth(run, gt);
    run.write("edges.txt", [&](std::ostream& o) { save_edges(edges, o); });
    run.note("edges", std::to_string(edges.size()));
    const TruthDiagnostics d = diagnose(gt);
    run.note("core_frobenius", d.core_frobenius);
    run.note("u_two_to_inf", d.u_two_to_inf);
    run.note("v_two_to_inf", d.v_two_to_inf);
    run.note("w_sup_norm", d.w_sup_norm);
    run.note("min_jump", d.min_jump);
    run.note("max_theta", d.max_theta);
    run.finish();
    std::cout << edges.size() << " edges written to " << run.path("edges.txt") << '\n';
  });
}

void cmd_estimate(const Settings& s) {
  const PipelineOptions opts = detail::in_stage("config", [&] { return pipeline_options(s); });
  const Data data = detail::in_stage("load", [&] { return load_data(s); });
  const PipelineReport rep =
      run_pipeline(data.edges, opts, data.truth ? &*data.truth : nullptr);
  detail::in_stage("write", [&] {
    Run run(s, "estimate");
    note_settings(run, s);
    run.note("edges", std::to_string(data.edges.size()));
    run.note("intervals", std::to_string(rep.delta.count()));
    run.note("gate_open", rep.gate_open ? "true" : "false");
    run.note("merged", rep.merged ? "true" : "false");
    write_fit(run, "initial", rep.initial, rep.delta);
    if (rep.merged) {
      run.note("nu", rep.nu);
      run.note("K_hat", std::to_string(rep.selection->k));
      run.write("segments.csv", [&](std::ostream& o) { write_segments_csv(*rep.segments, o); });
      run.write("selection.csv", [&](std::ostream& o) { write_selection_csv(*rep.selection, rep.nu, o); });
      write_fit(run, "final", *rep.final_fit, *rep.eta_hat);
    }
    if (data.truth) {
      write_truth(run, *data.truth);
      run.note("initial_error", *rep.initial_error);
      if (rep.final_error) run.note("final_error", *rep.final_error);
    }
    run.finish();
    std::cout << "L = " << rep.delta.count();
    if (rep.merged) std::cout << ", K_hat = " << rep.selection->k;
    if (rep.initial_error) std::cout << ", initial error = " << *rep.initial_error;
    if (rep.final_error) std::cout << ", final error = " << *rep.final_error;
    std::cout << '\n';
  });
}

void cmd_merge(const Settings& s) {
  const TuckerFactors f = detail::in_stage("load", [&] {
    if (s.factors.empty()) throw ValueError("merge needs --factors");
    auto in = open_input(s.factors);
    return load_factors(in);
  });
  const double horizon =
      detail::in_stage("load", [&] { return s.input.empty() ? s.horizon : read_edges(s.input).horizon(); });
  const double n = node_scale(f.u.rows(), f.v.rows());
  const Index L = f.w.rows();
  MergeConfig mc;
  mc.nu = s.nu;
  mc.k_max = s.k_max;
  mc.epsilon = s.epsilon;
  detail::in_stage("merge", [&] {
    const Matrix w_tilde = normalize_w(f.w, mc.condition_tol);
    const double nu = mc.nu.value_or(default_nu(n, horizon, mc.epsilon));
    const SegmentationPath path(w_tilde, std::min(mc.k_max.value_or(default_k_max(L)), L));
    const KSelection sel = select_k_detail(path, L, nu);
    OrderedPartitionResult best = path.best(sel.k);
    best.endpoints = endpoints_from_segments(best.segments, horizon / static_cast<double>(L), horizon);
    detail::in_stage("write", [&] {
      Run run(s, "merge");
      run.note("factors", s.factors);
      run.note("T", horizon);
      run.note("nu", nu);
      run.note("K_hat", std::to_string(sel.k));
      run.write("segments.csv", [&](std::ostream& o) { write_segments_csv(best, o); });
      run.write("selection.csv", [&](std::ostream& o) { write_selection_csv(sel, nu, o); });
      run.write("partition_merged.txt",
                [&](std::ostream& o) { save_partition(Partition(horizon, best.endpoints), o); });
      run.finish();
      std::cout << "K_hat = " << sel.k << '\n';
    });
  });
}

void cmd_evaluate(const Settings& s) {
  struct Inputs {
    TuckerFactors fit;
    Partition p;
    GroundTruth truth;
  };
  const Inputs in = detail::in_stage("load", [&] {
    if (s.factors.empty() || s.partition.empty() || s.truth.empty()) {
      throw ValueError("evaluate needs --factors, --partition and --truth");
    }
    auto ff = open_input(s.factors);
    TuckerFactors fit = load_factors(ff);
    auto pf = open_input(s.partition);
    Partition p = load_partition(pf);
    auto tf = open_input((fs::path(s.truth) / "truth_factors.txt").string());
    TuckerFactors tfac = load_factors(tf);
    auto tp = open_input((fs::path(s.truth) / "truth_partition.txt").string());
    Partition eta = load_partition(tp);
    Tensor3 theta = tucker_assemble(tfac);
    return Inputs{std::move(fit), std::move(p), GroundTruth{std::move(tfac), std::move(eta), std::move(theta)}};
  });
  detail::in_stage("evaluate", [&] {
    if (in.fit.w.rows() != in.p.count()) {
      throw ShapeError("factors have " + std::to_string(in.fit.w.rows()) +
                       " time rows but the partition has " + std::to_string(in.p.count()) +
                       " intervals");
    }
    const Tensor3 m = tucker_assemble(in.fit);
    const double left = estimation_error(m, expand_truth(in.truth, in.p));
    const double majority = estimation_error(m, majority_truth(in.truth, in.p));
    detail::in_stage("write", [&] {
      Run run(s, "evaluate");
      run.note("factors", s.factors);
      run.note("partition", s.partition);
      run.note("truth", s.truth);
      run.note("error_left_endpoint", left);
      run.note("error_majority", majority);
      run.finish();
      std::cout << "error (left endpoint) = " << left << ", error (majority overlap) = " << majority
                << '\n';
    });
  });
}

void cmd_sweep(const Settings& s) {
  Settings sim = s;
  sim.synthetic = true;
  const SyntheticConfig c = detail::in_stage("config", [&] { return synthetic_config(sim); });
  const PipelineOptions opts = detail::in_stage("config", [&] { return pipeline_options(s); });
  const Sweep sw = detail::in_stage("sweep", [&] { return sweep_L(c, opts, s.L_values, s.reps, s.threads); });
  detail::in_stage("write", [&] {
    Run run(sim, "sweep");
    note_settings(run, sim);
    run.note("reps", std::to_string(s.reps));
    run.write("sweep.csv", [&](std::ostream& o) { write_sweep_csv(sw, o); });
    run.write("sweep_replications.csv", [&](std::ostream& o) {
      o << "replication,L,error\n";
      for (std::size_t r = 0; r < sw.errors.size(); ++r) {
        for (std::size_t i = 0; i < sw.intervals.size(); ++i)
          o << (r + 1) << ',' << sw.intervals[i] << ',' << text::format_double(sw.errors[r][i]) << '\n';
        o << (r + 1) << ",AM," << text::format_double(sw.am_errors[r]) << '\n';
      }
    });
    run.finish();
    write_sweep_csv(sw, std::cout);
  });
}

void cmd_compare(const Settings& s) {
  Settings sim = s;
  sim.synthetic = true;
  const SyntheticConfig c = detail::in_stage("config", [&] { return synthetic_config(sim); });
  const PipelineOptions opts = detail::in_stage("config", [&] { return pipeline_options(s); });
  const Comparison cmp = detail::in_stage("compare", [&] { return compare_methods(c, opts, s.reps, s.threads); });
  detail::in_stage("write", [&] {
    Run run(sim, "compare");
    note_settings(run, sim);
    run.note("reps", std::to_string(s.reps));
    run.write("compare.csv", [&](std::ostream& o) { write_comparison_csv(cmp, o); });
    run.write("compare_replications.csv", [&](std::ostream& o) { write_replications_csv(cmp, o); });
    run.finish();
    write_comparison_csv(cmp, std::cout);
  });
}

void cmd_crossval(const Settings& s) {
  const PipelineOptions opts = detail::in_stage("config", [&] { return pipeline_options(s); });
  const Data data = detail::in_stage("load", [&] { return load_data(s); });
  const CrossValidation cv = crossval(data.edges, opts, s.folds, s.seed, s.threads);
  detail::in_stage("write", [&] {
    Run run(s, "crossval");
    note_settings(run, s);
    run.note("folds", std::to_string(s.folds));
    run.write("crossval.csv", [&](std::ostream& o) { write_crossval_csv(cv, o); });
    run.finish();
    write_crossval_csv(cv, std::cout);
  });
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Longitudinal network estimation with adaptive interval merging"};
  app.set_config("--config", "", "Flat key=value file; command-line flags take precedence");
  app.require_subcommand(1);
  Settings s;
  add_options(app, s);

  struct Command {
    const char* name;
    const char* help;
    void (*run)(const Settings&);
  };
  const Command commands[] = {
      {"simulate", "Draw a synthetic truth and its edges", cmd_simulate},
      {"estimate", "Fit on equal intervals, then merge and refit", cmd_estimate},
      {"merge", "Select merged intervals from a fitted temporal factor", cmd_merge},
      {"evaluate", "Score fitted factors against a simulated truth", cmd_evaluate},
      {"sweep", "Error against the number of equal intervals", cmd_sweep},
      {"compare", "Compare estimators over replications", cmd_compare},
      {"crossval", "Held-out node-pair prediction error", cmd_crossval},
  };
  for (const Command& c : commands) app.add_subcommand(c.name, c.help)->fallthrough();

  CLI11_PARSE(app, argc, argv);
  try {
    for (const Command& c : commands) {
      if (app.got_subcommand(c.name)) c.run(s);
    }
  } catch (const StageError& e) {
    std::cerr << "lnet: stage '" << e.stage() << "' failed: " << e.message() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "lnet: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
