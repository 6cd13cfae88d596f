#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "feddr/config.hpp"
#include "feddr/trace.hpp"

namespace feddr {

struct BuiltProblem {
  Problem problem;
  Vec x0;
  std::optional<double> F_star;  // known only for convex quadratic instances
  std::vector<Dataset> test;     // per-user held-out data (synthetic losses)
};

BuiltProblem build_problem(const ExperimentConfig& cfg, std::uint64_t seed);

double resolve_eta(const HyperConfig& h, double L);
Hyper make_hyper(const ExperimentConfig& cfg, const Problem& problem);

// Runs one seed. States are kept in memory when keep_states is set.
Trace run_config(const ExperimentConfig& cfg, const BuiltProblem& built, std::uint64_t seed,
                 bool keep_states, bool certify = true);

struct CertifyOutcome {
  bool applicable = false;
  std::size_t violations = 0;
  std::string report;
};

CertifyOutcome certify_trace(const Trace& trace, const ExperimentConfig& cfg,
                             const BuiltProblem& built);

// Certifies a trace file written by run_experiment. Traces without states are
// replayed from the embedded config and checked against the file first.
CertifyOutcome certify_trace_file(const std::string& path);

struct RunOptions {
  bool certify = true;
  std::optional<bool> full_state;
  std::optional<std::vector<std::uint64_t>> seeds;
  std::optional<std::string> output_dir;
};

struct RunSummary {
  std::vector<std::string> files;
  std::size_t violations = 0;
  std::size_t aborted = 0;
  int exit_code = 0;
};

RunSummary run_experiment(const ExperimentConfig& cfg, const RunOptions& opt, std::ostream& log);

}  // namespace feddr
