#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "feddr/asyncsim.hpp"
#include "feddr/baselines.hpp"
#include "feddr/certify.hpp"
#include "feddr/feddr.hpp"
#include "feddr/synthetic.hpp"

namespace feddr {

enum class Algorithm { feddr, asyncfeddr, fedavg, fedprox, fedsplit };

struct ProblemConfig {
  LossKind loss = LossKind::quadratic;
  std::size_t users = 10;
  std::size_t dim = 20;
  double center_scale = 1.0;
  double curvature_min = 1.0;
  double curvature_max = 1.0;
  Regularizer reg;
  SyntheticSpec synthetic;  // users/dim/seed are taken from this config
  std::size_t mlp_hidden = 16;
  double mlp_lipschitz = 1.0;
  double x0_scale = 0.0;  // x⁰ ~ N(0, x0_scale²); 0 gives the origin
  std::optional<std::uint64_t> seed;  // instance seed; defaults to the run seed
  bool operator==(const ProblemConfig&) const = default;
};

struct HyperConfig {
  std::optional<double> eta;
  std::optional<double> eta_times_L;
  double alpha = 1.0;
  AccuracySchedule accuracy;
  ProxMode prox_mode = ProxMode::certified;
  SgdOptions heuristic;
  SamplingKind sampling = SamplingKind::full;
  std::size_t sample_size = 0;
  std::vector<double> probabilities;
  std::optional<Gammas> gammas;
  bool override_stepsize_check = false;
  bool operator==(const HyperConfig&) const = default;
};

struct AsyncSection {
  DelayModel delays;
  bool stagger = false;  // start_offset_i = i * stagger_step
  double stagger_step = 0.0;
  VtildeWeight weight = VtildeWeight::tau_over_n_eta;
  bool operator==(const AsyncSection&) const = default;
};

struct BaselineSection {
  std::size_t local_epochs = 20;
  double local_lr = 0.01;
  std::size_t batch_size = 10;
  double mu = 0.0;
  bool operator==(const BaselineSection&) const = default;
};

struct TraceSection {
  bool full_state = false;
  std::string output_dir = ".";
  bool operator==(const TraceSection&) const = default;
};

struct ExperimentConfig {
  std::string name = "run";
  Algorithm algorithm = Algorithm::feddr;
  std::size_t rounds = 100;
  std::vector<std::uint64_t> seeds{0};
  ProblemConfig problem;
  HyperConfig hyper;
  AsyncSection async;
  BaselineSection baseline;
  TraceSection trace;
  bool operator==(const ExperimentConfig&) const = default;
};

std::string_view algorithm_name(Algorithm a) noexcept;

ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);
std::string emit_config(const ExperimentConfig& cfg);

// Replaces the value at a dotted key path (e.g. "hyper.eta") before parsing.
std::string override_config(const std::string& text, const std::string& dotted_key,
                            const std::string& value);

// Standalone data spec for gen-data: the synthetic keys plus users, dim, seed.
SyntheticSpec parse_synthetic_spec(const std::string& text);

}  // namespace feddr
