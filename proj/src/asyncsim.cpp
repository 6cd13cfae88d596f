#include "feddr/asyncsim.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <fmt/format.h>

#include "feddr/errors.hpp"
#include "feddr/kernels.hpp"

namespace feddr {

double DelayModel::draw(std::size_t user, Rng& rng) const {
  double t = 0.0;
  switch (dist) {
    case ComputeDist::deterministic: t = a; break;
    case ComputeDist::uniform: t = std::uniform_real_distribution<double>(a, b)(rng); break;
    case ComputeDist::lognormal: t = std::lognormal_distribution<double>(a, b)(rng); break;
  }
  if (!user_scale.empty()) t *= user_scale.at(user);
  return t;
}

bool EventOrder::operator()(const Event& x, const Event& y) const {
  // std::priority_queue pops the largest element, so "less" means later.
  if (x.time != y.time) return x.time > y.time;
  if (x.kind != y.kind) return x.kind > y.kind;
  return x.seq > y.seq;
}

EventQueue::EventQueue(std::size_t num_users) : snapshot(num_users, 0), busy(num_users, false) {}

void EventQueue::push(double time, EventKind kind, std::size_t user) {
  heap_.push(Event{time, kind, seq_++, user});
}

Event EventQueue::pop() {
  Event e = heap_.top();
  heap_.pop();
  now = e.time;
  return e;
}

Event schedule_user(EventQueue& sim, std::size_t user, const DelayModel& delays, Rng& rng) {
  if (sim.busy.at(user)) throw PreconditionViolation("user " + std::to_string(user) + " is busy");
  sim.busy[user] = true;
  sim.snapshot[user] = sim.version;
  const double done = sim.now + delays.draw(user, rng);
  sim.push(done, EventKind::completion, user);
  return Event{done, EventKind::completion, 0, user};
}

VersionedModel::VersionedModel(std::size_t tau, Vec initial) : tau_(tau) {
  ring_.push_back(std::move(initial));
}

void VersionedModel::push(Vec xbar) {
  ring_.push_back(std::move(xbar));
  if (ring_.size() > tau_ + 1) ring_.pop_front();
  ++latest_;
}

const Vec& VersionedModel::at(std::size_t version) const {
  const std::size_t oldest = latest_ + 1 - ring_.size();
  if (version > latest_ || version < oldest)
    throw PreconditionViolation("version " + std::to_string(version) + " outside retained range [" +
                                std::to_string(oldest) + ", " + std::to_string(latest_) + "]");
  return ring_[version - oldest];
}

LocalUpdate async_local_update(const UserState& user, std::span<const double> xbar_delayed,
                               const Hyper& hyper, const LossModel& model,
                               std::uint64_t solver_seed) {
  if (hyper.prox_mode == ProxMode::certified && hyper.accuracy.kind != AccuracyKind::exact)
    throw PreconditionViolation("asynchronous updates are analysed with exact prox only");
  return local_update(user, xbar_delayed, hyper, model, AccuracyTarget{}, solver_seed);
}

void async_server_update(ServerState& server, std::span<const double> delta, std::size_t n,
                         const Regularizer& reg, double eta, VersionedModel& versions) {
  apply_delta(server, delta, n);
  server.xbar = prox_g(server.xtilde, eta, reg);
  ++server.round;
  versions.push(server.xbar);
}

AsyncConstants stepsize_bounds_async(std::size_t n, std::size_t tau, double alpha, double L,
                                     double eta, std::size_t T, double p_hat) {
  TheoryInputs in;
  in.alpha = alpha;
  in.eta = eta;
  in.L = L;
  in.n = n;
  in.tau = tau;
  in.T = T;
  in.p_hat = p_hat;
  const AsyncBounds bounds = async_bounds(n, tau, alpha, L);
  if (!(alpha > 0.0 && alpha < bounds.alpha_bar))
    throw StepsizeRejected(fmt::format("alpha = {:.17g} outside (0, alpha_bar = {:.17g})", alpha,
                                       bounds.alpha_bar));
  if (!(eta > 0.0 && eta < bounds.eta_bar))
    throw StepsizeRejected(
        fmt::format("eta = {:.17g} outside (0, eta_bar = {:.17g})", eta, bounds.eta_bar));
  return async_constants(in);
}

namespace {

struct AsyncRun {
  const Problem& problem;
  const AsyncConfig& cfg;
  Trace& trace;
  ServerState server;
  std::vector<UserState> users;
  VersionedModel versions;
  std::uint64_t bytes = 0;
  std::size_t k = 0;
  std::size_t pending_stalls = 0;

  double vtilde(double V) const {
    return lyapunov_Vtilde(V, versions.history(), cfg.hyper.eta, problem.num_users(),
                           cfg.delays.tau, cfg.weight);
  }

  void record_initial() {
    TraceRecord& r = append_record(trace, TraceRecord{}, problem, cfg.hyper, server, users,
                                   cfg.certify, cfg.full_state);
    if (r.V) r.Vtilde = vtilde(*r.V);
  }

  // Returns false when the run aborts.
  bool process(std::size_t user, std::size_t read_version, double time) {
    const std::size_t n = problem.num_users();
    const Vec xread = versions.at(read_version);
    LocalUpdate up;
    try {
      up = async_local_update(users[user], xread, cfg.hyper, problem.users[user],
                              local_seed(cfg.seed, user, k + 1));
    } catch (const Divergence& e) {
      trace.abort_reason = "event " + std::to_string(k) + ": " + e.what();
      return false;
    }
    TraceRecord r;
    r.k = k + 1;
    r.sim_time = time;
    r.active = {user};
    r.delay = k - read_version;
    r.step_sq = kernels::sq_dist(up.user.x, users[user].x);
    r.eps_sq_active = users[user].last_eps * users[user].last_eps +
                      up.user.last_eps * up.user.last_eps;
    if (up.user.certified) r.prox_accuracy = up.user.last_eps;
    r.stalls = pending_stalls;
    pending_stalls = 0;
    users[user] = std::move(up.user);
    async_server_update(server, up.delta_xhat, n, problem.reg, cfg.hyper.eta, versions);
    if (!std::all_of(server.xbar.begin(), server.xbar.end(),
                     [](double v) { return std::isfinite(v); })) {
      trace.abort_reason = "event " + std::to_string(k) + ": non-finite global model";
      return false;
    }
    bytes += bytes_per_round(1, problem.dim());
    r.bytes = bytes;
    TraceRecord& rec = append_record(trace, std::move(r), problem, cfg.hyper, server, users,
                                     cfg.certify, cfg.full_state);
    if (rec.V) rec.Vtilde = vtilde(*rec.V);
    if (cfg.observer) cfg.observer(AsyncEvent{k, user, read_version, xread, users, server});
    ++k;
    return true;
  }
};

}  // namespace

Trace run_async(const Problem& problem, const AsyncConfig& cfg) {
  const std::size_t n = problem.num_users();
  const Hyper& hyper = cfg.hyper;
  const double L = problem.lipschitz();
  const std::size_t tau = cfg.delays.tau;
  Trace trace;
  trace.algorithm = "asyncfeddr";
  trace.num_users = n;
  trace.dim = problem.dim();
  trace.eta = hyper.eta;
  trace.alpha = hyper.alpha;
  trace.lipschitz = L;
  trace.initial_loss = problem.value(cfg.x0);
  if (!cfg.override_stepsize_check) {
    const AsyncConstants c = stepsize_bounds_async(n, tau, hyper.alpha, L, hyper.eta);
    trace.meta["rho"] = fmt::format("{:.17g}", c.rho);
    trace.meta["alpha_bar"] = fmt::format("{:.17g}", c.alpha_bar);
    trace.meta["eta_bar"] = fmt::format("{:.17g}", c.eta_bar);
  }
  if (!cfg.delays.user_scale.empty() && cfg.delays.user_scale.size() != n)
    throw DimensionMismatch(n, cfg.delays.user_scale.size());
  if (!cfg.delays.start_offset.empty() && cfg.delays.start_offset.size() != n)
    throw DimensionMismatch(n, cfg.delays.start_offset.size());

  Init init = init_feddr(cfg.x0, hyper, problem, cfg.seed);
  AsyncRun run{problem, cfg, trace, std::move(init.server), std::move(init.users),
               VersionedModel(tau, {}), 0, 0, 0};
  run.versions = VersionedModel(tau, run.server.xbar);
  run.record_initial();

  if (!cfg.script.empty()) {
    const std::size_t total = std::min(cfg.events, cfg.script.size());
    for (std::size_t e = 0; e < total; ++e) {
      const ScriptedEvent& s = cfg.script[e];
      if (s.user >= n) throw InvalidArgument("scripted user out of range");
      if (s.read_version > e || e - s.read_version > tau)
        throw InvalidArgument("scripted read of version " + std::to_string(s.read_version) +
                              " at event " + std::to_string(e) + " violates the delay cap");
      if (!run.process(s.user, s.read_version, static_cast<double>(e + 1))) break;
    }
    return trace;
  }

  EventQueue sim(n);
  Rng rng = make_rng(cfg.seed, Stream::compute_time);
  for (std::size_t i = 0; i < n; ++i)
    sim.push(cfg.delays.start_offset.empty() ? 0.0 : cfg.delays.start_offset[i], EventKind::start, i);
  while (run.k < cfg.events && !sim.empty()) {
    const Event ev = sim.pop();
    if (ev.kind == EventKind::start) {
      schedule_user(sim, ev.user, cfg.delays, rng);
      continue;
    }
    if (sim.version - sim.snapshot[ev.user] > tau) {
      // Too stale: re-read the current model and finish one tick later.
      sim.snapshot[ev.user] = sim.version;
      sim.push(sim.now + cfg.delays.stall_tick, EventKind::completion, ev.user);
      ++run.pending_stalls;
      continue;
    }
    if (!run.process(ev.user, sim.snapshot[ev.user], sim.now)) break;
    ++sim.version;
    sim.busy[ev.user] = false;
    sim.push(sim.now + cfg.delays.idle, EventKind::start, ev.user);
  }
  return trace;
}

DelayStats measure_delay_stats(const Trace& trace) {
  DelayStats s;
  const std::size_t n = trace.num_users;
  if (trace.records.size() < 2 || n == 0) return s;
  const std::size_t K = trace.records.size() - 1;
  std::vector<long long> last(n, -1);
  std::vector<std::vector<std::size_t>> hits(n);
  std::size_t T = 0;
  for (std::size_t e = 0; e < K; ++e) {
    const TraceRecord& r = trace.records[e + 1];
    if (r.delay) s.tau = std::max(s.tau, *r.delay);
    for (std::size_t u : r.active) {
      T = std::max<std::size_t>(T, static_cast<std::size_t>(static_cast<long long>(e) - last[u]));
      last[u] = static_cast<long long>(e);
      hits[u].push_back(e);
    }
  }
  // The gap still open at the end of the trace counts as well.
  for (std::size_t u = 0; u < n; ++u)
    T = std::max<std::size_t>(T, static_cast<std::size_t>(static_cast<long long>(K) - last[u]));
  s.T = T;
  if (T > K) return s;  // some user never activated: p̂ = 0
  double p = 1.0;
  for (std::size_t u = 0; u < n; ++u) {
    std::vector<std::size_t> mark(K, 0);
    for (std::size_t e : hits[u]) mark[e] = 1;
    std::size_t count = 0;
    for (std::size_t e = 0; e < T; ++e) count += mark[e];
    std::size_t worst = count;
    for (std::size_t e = T; e < K; ++e) {
      count += mark[e];
      count -= mark[e - T];
      worst = std::min(worst, count);
    }
    p = std::min(p, static_cast<double>(worst) / static_cast<double>(T));
  }
  s.p_hat = p;
  return s;
}

}  // namespace feddr
