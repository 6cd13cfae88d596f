#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "feddr/certify.hpp"
#include "feddr/numerics.hpp"
#include "feddr/rng.hpp"
#include "feddr/trace.hpp"

namespace feddr {

struct UserState {
  Vec y, x, xhat;
  double last_eps = 0.0;  // certified accuracy of x as a prox of y
  bool certified = true;
};

struct ServerState {
  Vec xtilde, xbar;
  std::size_t round = 0;
};

enum class SamplingKind { full, uniform_subset, bernoulli };

struct SamplingScheme {
  SamplingKind kind = SamplingKind::full;
  std::size_t num_users = 0;
  std::size_t subset_size = 0;
  std::vector<double> probabilities;  // bernoulli only

  static SamplingScheme full(std::size_t n);
  static SamplingScheme uniform(std::size_t n, std::size_t b);
  static SamplingScheme bernoulli(std::vector<double> p);

  double inclusion_probability(std::size_t i) const;
  double min_probability() const;
  void validate() const;
  bool operator==(const SamplingScheme&) const = default;
};

struct SampleDraw {
  std::vector<std::size_t> users;  // ascending
  std::size_t resamples = 0;
};

SampleDraw sample_users(const SamplingScheme& scheme, Rng& rng);

enum class AccuracyKind { exact, absolute, relative };

struct AccuracySchedule {
  AccuracyKind kind = AccuracyKind::exact;
  double parameter = 0.0;  // M for absolute, θ̂ for relative
  bool operator==(const AccuracySchedule&) const = default;
};

struct AccuracyTarget {
  AccuracyKind kind = AccuracyKind::exact;
  double eps = 0.0;    // absolute distance bound
  double theta = 0.0;  // relative factor θ_i
};

AccuracyTarget accuracy_for_round(const AccuracySchedule& sched, std::size_t k, double p_i);

enum class ProxMode { certified, heuristic };

std::string_view prox_mode_name(ProxMode mode) noexcept;

struct Hyper {
  double eta = 0.0;
  double alpha = 1.0;
  AccuracySchedule accuracy;
  ProxMode prox_mode = ProxMode::certified;
  SgdOptions heuristic;
  SamplingScheme sampling;
  Gammas gammas;
};

struct StepsizeCheck {
  double descent_coefficient = 0.0;  // D(α, η)
  bool accepted = false;
  double closed_form_alpha_bound = 0.0;
  double closed_form_eta_bound = 0.0;
  bool within_closed_form = false;
};

StepsizeCheck validate_stepsizes(double alpha, double eta, double gamma4, double L);

// Local solver randomness for user i in round k.
std::uint64_t local_seed(std::uint64_t seed, std::size_t user, std::size_t round);

UserState init_user(const LossModel& model, std::span<const double> x0, const Hyper& hyper,
                    std::uint64_t seed, std::size_t user);

struct Init {
  ServerState server;
  std::vector<UserState> users;
};

Init init_feddr(std::span<const double> x0, const Hyper& hyper, const Problem& problem,
                std::uint64_t seed = 0);

struct LocalUpdate {
  UserState user;
  Vec delta_xhat;
  std::size_t inner_iterations = 0;
};

LocalUpdate local_update(const UserState& user, std::span<const double> xbar, const Hyper& hyper,
                         const LossModel& model, const AccuracyTarget& target,
                         std::uint64_t solver_seed);

struct UserDelta {
  std::size_t user;
  Vec delta;
};

ServerState server_aggregate(const ServerState& server, std::span<const UserDelta> deltas,
                             std::size_t n, const Regularizer& reg, double eta);

// In-place aggregation shared with the asynchronous server.
void apply_delta(ServerState& server, std::span<const double> delta, std::size_t n);

// Chooses S_k; overrides the sampling scheme when set.
using RoundSampler = std::function<std::vector<std::size_t>(std::size_t k)>;

struct FeddrConfig {
  Hyper hyper;
  std::size_t rounds = 100;
  std::uint64_t seed = 0;
  Vec x0;
  bool full_state = false;
  bool certify = true;  // record V each round
  bool override_stepsize_check = false;
  RoundSampler sampler;
};

Trace run_feddr(const Problem& problem, const FeddrConfig& config);

// Evaluates the metrics of the current state and appends the record.
TraceRecord& append_record(Trace& trace, TraceRecord rec, const Problem& problem,
                           const Hyper& hyper, const ServerState& server,
                           const std::vector<UserState>& users, bool certify, bool full_state);

std::uint64_t bytes_per_round(std::size_t participants, std::size_t dim,
                              std::size_t scalar_bytes = sizeof(double));

}  // namespace feddr
