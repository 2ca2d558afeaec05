// Simulates a small longitudinal network, estimates it on equal intervals,
// merges the intervals and reports the errors of both estimates.

#include <iostream>

#include "lnet/pipeline.hpp"

int main() {
  lnet::SyntheticConfig cfg;
  cfg.n = 30;
  cfg.horizon = 40.0;
  cfg.k0 = 3;
  cfg.seed = 7;

  const lnet::GroundTruth truth = lnet::generate_truth(cfg);
  const lnet::EdgeSet edges = lnet::sample_edges(truth, cfg.lambda0, lnet::sampling_seed(cfg.seed));
  std::cout << edges.size() << " edges on " << cfg.n << " x " << cfg.n << " nodes, T = " << cfg.horizon
            << '\n';

  lnet::PipelineOptions opts;
  opts.force_merge = true;
  const lnet::PipelineReport rep = lnet::run_pipeline(edges, opts, &truth);

  std::cout << "equal intervals: L = " << rep.delta.count() << ", error " << *rep.initial_error << '\n';
  std::cout << "merged intervals: K = " << rep.selection->k << ", error " << *rep.final_error << '\n';
  std::cout << "true change points:     ";
  for (double t : truth.eta.breakpoints()) std::cout << ' ' << t;
  std::cout << "\nestimated change points:";
  for (double t : rep.eta_hat->breakpoints()) std::cout << ' ' << t;
  std::cout << '\n';
}
