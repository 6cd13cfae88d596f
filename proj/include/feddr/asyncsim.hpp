#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <queue>
#include <span>
#include <vector>

#include "feddr/certify.hpp"
#include "feddr/feddr.hpp"
#include "feddr/numerics.hpp"
#include "feddr/rng.hpp"
#include "feddr/trace.hpp"

namespace feddr {

enum class ComputeDist { deterministic, uniform, lognormal };

struct DelayModel {
  ComputeDist dist = ComputeDist::uniform;
  // deterministic: a; uniform: [a, b]; lognormal: mu = a, sigma = b
  double a = 1.0;
  double b = 2.0;
  std::vector<double> user_scale;    // multiplies each draw; empty means 1
  std::vector<double> start_offset;  // first start time per user; empty means 0
  double idle = 0.0;                 // pause between completing and starting again
  std::size_t tau = 0;
  double stall_tick = 1e-3;

  double draw(std::size_t user, Rng& rng) const;
  bool operator==(const DelayModel&) const = default;
};

enum class EventKind { completion = 0, start = 1 };

struct Event {
  double time = 0.0;
  EventKind kind = EventKind::completion;
  std::uint64_t seq = 0;
  std::size_t user = 0;
};

// Earliest time first; at equal times completions precede starts, then FIFO.
struct EventOrder {
  bool operator()(const Event& a, const Event& b) const;
};

class EventQueue {
 public:
  explicit EventQueue(std::size_t num_users);

  void push(double time, EventKind kind, std::size_t user);
  Event pop();
  bool empty() const noexcept { return heap_.empty(); }

  double now = 0.0;
  std::size_t version = 0;
  std::vector<std::size_t> snapshot;  // server version each user last read
  std::vector<bool> busy;

 private:
  std::priority_queue<Event, std::vector<Event>, EventOrder> heap_;
  std::uint64_t seq_ = 0;
};

// User starts work now: snapshots the current version and draws a duration.
Event schedule_user(EventQueue& sim, std::size_t user, const DelayModel& delays, Rng& rng);

class VersionedModel {
 public:
  VersionedModel(std::size_t tau, Vec initial);

  void push(Vec xbar);
  const Vec& at(std::size_t version) const;
  std::size_t latest() const noexcept { return latest_; }
  std::size_t tau() const noexcept { return tau_; }
  // Oldest retained first.
  std::vector<Vec> history() const { return {ring_.begin(), ring_.end()}; }

 private:
  std::size_t tau_;
  std::size_t latest_ = 0;
  std::deque<Vec> ring_;
};

LocalUpdate async_local_update(const UserState& user, std::span<const double> xbar_delayed,
                               const Hyper& hyper, const LossModel& model,
                               std::uint64_t solver_seed);

void async_server_update(ServerState& server, std::span<const double> delta, std::size_t n,
                         const Regularizer& reg, double eta, VersionedModel& versions);

AsyncConstants stepsize_bounds_async(std::size_t n, std::size_t tau, double alpha, double L,
                                     double eta, std::size_t T = 1, double p_hat = 1.0);

struct ScriptedEvent {
  std::size_t user;
  std::size_t read_version;
};

struct AsyncEvent {
  std::size_t k;
  std::size_t user;
  std::size_t read_version;
  const Vec& xbar_read;
  const std::vector<UserState>& users;  // after the update
  const ServerState& server;            // after the update
};

struct AsyncConfig {
  Hyper hyper;
  DelayModel delays;
  std::size_t events = 100;
  std::uint64_t seed = 0;
  Vec x0;
  bool full_state = false;
  bool certify = true;
  bool override_stepsize_check = false;
  VtildeWeight weight = VtildeWeight::tau_over_n_eta;
  std::vector<ScriptedEvent> script;  // replaces the event queue when non-empty
  std::function<void(const AsyncEvent&)> observer;
};

Trace run_async(const Problem& problem, const AsyncConfig& config);

struct DelayStats {
  std::size_t tau = 0;
  std::size_t T = 0;
  double p_hat = 0.0;
};

DelayStats measure_delay_stats(const Trace& trace);

}  // namespace feddr
