#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "feddr/numerics.hpp"

namespace feddr {

// Metrics of one iteration. Record 0 describes the initial state; record k
// describes the state after iteration k−1 together with that iteration's
// activity (active set, step sizes, accuracies).
struct TraceRecord {
  std::size_t k = 0;
  double sim_time = 0.0;
  std::vector<std::size_t> active;
  double loss = 0.0;
  std::optional<double> train_accuracy;
  double grad_map_sq = 0.0;
  std::optional<double> V;
  std::optional<double> Vtilde;
  std::uint64_t bytes = 0;
  std::optional<std::size_t> delay;
  std::string prox_mode;
  // Largest certified accuracy among the users updated in this iteration.
  std::optional<double> prox_accuracy;
  // Σ_{i active} ‖x_i^{k} − x_i^{k−1}‖².
  double step_sq = 0.0;
  // Σ_i ε_i² over all users for the current local models.
  double eps_sq_sum = 0.0;
  // Σ_{i active} (ε_i² before + ε_i² after).
  double eps_sq_active = 0.0;
  std::size_t resamples = 0;
  std::size_t stalls = 0;

  bool operator==(const TraceRecord&) const = default;
};

struct FullState {
  Vec xbar;
  std::vector<Vec> x;
  bool operator==(const FullState&) const = default;
};

struct Trace {
  std::string algorithm;
  std::size_t num_users = 0;
  std::size_t dim = 0;
  double eta = 0.0;
  double alpha = 0.0;
  double lipschitz = 0.0;
  double initial_loss = 0.0;  // F(x⁰)
  std::map<std::string, std::string> meta;
  std::vector<TraceRecord> records;
  std::vector<FullState> states;  // empty unless full-state tracing is on
  std::optional<std::string> abort_reason;

  bool has_states() const noexcept { return !states.empty() && states.size() == records.size(); }
  std::size_t iterations() const noexcept { return records.empty() ? 0 : records.size() - 1; }
};

}  // namespace feddr
