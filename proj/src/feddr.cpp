#include "feddr/feddr.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include <fmt/format.h>

#include "feddr/errors.hpp"
#include "feddr/kernels.hpp"

namespace feddr {

SamplingScheme SamplingScheme::full(std::size_t n) {
  SamplingScheme s;
  s.kind = SamplingKind::full;
  s.num_users = n;
  s.subset_size = n;
  return s;
}

SamplingScheme SamplingScheme::uniform(std::size_t n, std::size_t b) {
  SamplingScheme s;
  s.kind = SamplingKind::uniform_subset;
  s.num_users = n;
  s.subset_size = b;
  s.validate();
  return s;
}

SamplingScheme SamplingScheme::bernoulli(std::vector<double> p) {
  SamplingScheme s;
  s.kind = SamplingKind::bernoulli;
  s.num_users = p.size();
  s.probabilities = std::move(p);
  s.validate();
  return s;
}

void SamplingScheme::validate() const {
  if (num_users == 0) throw InvalidArgument("sampling scheme has no users");
  switch (kind) {
    case SamplingKind::full: return;
    case SamplingKind::uniform_subset:
      if (subset_size < 1 || subset_size > num_users)
        throw InvalidArgument("uniform subset size must lie in [1, n]");
      return;
    case SamplingKind::bernoulli:
      if (probabilities.size() != num_users)
        throw InvalidArgument("need one inclusion probability per user");
      for (double p : probabilities)
        if (!(p > 0.0 && p <= 1.0)) throw InvalidArgument("inclusion probabilities must lie in (0, 1]");
      return;
  }
}

double SamplingScheme::inclusion_probability(std::size_t i) const {
  switch (kind) {
    case SamplingKind::full: return 1.0;
    case SamplingKind::uniform_subset:
      return static_cast<double>(subset_size) / static_cast<double>(num_users);
    case SamplingKind::bernoulli: return probabilities.at(i);
  }
  return 1.0;
}

double SamplingScheme::min_probability() const {
  double p = 1.0;
  for (std::size_t i = 0; i < num_users; ++i) p = std::min(p, inclusion_probability(i));
  return p;
}

SampleDraw sample_users(const SamplingScheme& scheme, Rng& rng) {
  SampleDraw d;
  const std::size_t n = scheme.num_users;
  switch (scheme.kind) {
    case SamplingKind::full:
      d.users.resize(n);
      std::iota(d.users.begin(), d.users.end(), 0);
      break;
    case SamplingKind::uniform_subset: {
      std::vector<std::size_t> all(n);
      std::iota(all.begin(), all.end(), 0);
      std::sample(all.begin(), all.end(), std::back_inserter(d.users), scheme.subset_size, rng);
      break;
    }
    case SamplingKind::bernoulli: {
      std::uniform_real_distribution<double> u(0.0, 1.0);
      for (;;) {
        for (std::size_t i = 0; i < n; ++i)
          if (u(rng) < scheme.probabilities[i]) d.users.push_back(i);
        if (!d.users.empty()) break;
        ++d.resamples;
      }
      break;
    }
  }
  return d;
}

AccuracyTarget accuracy_for_round(const AccuracySchedule& sched, std::size_t k, double p_i) {
  if (!(sched.parameter >= 0.0)) throw InvalidArgument("accuracy parameter must be nonnegative");
  AccuracyTarget t;
  t.kind = sched.kind;
  switch (sched.kind) {
    case AccuracyKind::exact: break;
    case AccuracyKind::absolute: {
      const double k1 = static_cast<double>(k + 1);
      t.eps = std::sqrt(sched.parameter / (2.0 * k1 * k1));
      break;
    }
    case AccuracyKind::relative: t.theta = sched.parameter * p_i; break;
  }
  return t;
}

std::string_view prox_mode_name(ProxMode mode) noexcept {
  return mode == ProxMode::certified ? "certified" : "heuristic";
}

StepsizeCheck validate_stepsizes(double alpha, double eta, double gamma4, double L) {
  StepsizeCheck c;
  const double le = L * eta;
  c.descent_coefficient = 2.0 - alpha * (le + 1.0) - 2.0 * le * le - 4.0 * gamma4 * alpha * (1.0 + le * le);
  c.accepted = c.descent_coefficient > 0.0 && le <= 1.0 && alpha > 0.0 && eta > 0.0;
  c.closed_form_alpha_bound =
      std::min(8.0, std::sqrt(17.0 + 64.0 * gamma4) - 1.0) / (4.0 * (1.0 + 4.0 * gamma4));
  const double disc = (4.0 - alpha) * (4.0 - alpha) - 16.0 * alpha * alpha * gamma4 * (1.0 + 4.0 * gamma4);
  c.closed_form_eta_bound =
      disc > 0.0 ? (std::sqrt(disc) - alpha) / (4.0 * L * (1.0 + 2.0 * alpha * gamma4)) : 0.0;
  c.within_closed_form = alpha < c.closed_form_alpha_bound && eta < c.closed_form_eta_bound;
  return c;
}

std::uint64_t local_seed(std::uint64_t seed, std::size_t user, std::size_t round) {
  return derive_seed(seed, Stream::local_solver, {user, round});
}

namespace {

ProxResult evaluate_prox(const LossModel& model, std::span<const double> y, const Hyper& hyper,
                         const AccuracyTarget& target, std::span<const double> previous,
                         std::uint64_t seed) {
  if (hyper.prox_mode == ProxMode::heuristic)
    return prox_f_heuristic(model, y, hyper.eta, hyper.heuristic, seed);
  CertifiedProxOptions opt;
  opt.warm_start = Vec(previous.begin(), previous.end());
  switch (target.kind) {
    case AccuracyKind::exact: return prox_f_certified(model, y, hyper.eta, 0.0, opt);
    case AccuracyKind::absolute: return prox_f_certified(model, y, hyper.eta, target.eps, opt);
    case AccuracyKind::relative:
      return prox_f_relative(model, y, hyper.eta, previous, target.theta, opt);
  }
  return {};
}

void reflect(std::span<const double> x, std::span<const double> y, std::span<double> out) {
  for (std::size_t j = 0; j < x.size(); ++j) out[j] = 2.0 * x[j] - y[j];
}

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace

UserState init_user(const LossModel& model, std::span<const double> x0, const Hyper& hyper,
                    std::uint64_t seed, std::size_t user) {
  UserState u;
  u.y.assign(x0.begin(), x0.end());
  // The relative-error analysis starts from an exact prox.
  AccuracyTarget t = accuracy_for_round(hyper.accuracy, 0, 1.0);
  if (t.kind == AccuracyKind::relative) t = AccuracyTarget{};
  ProxResult r = evaluate_prox(model, u.y, hyper, t, u.y, local_seed(seed, user, 0));
  u.x = std::move(r.point);
  u.certified = r.certified_accuracy.has_value();
  u.last_eps = r.certified_accuracy.value_or(0.0);
  u.xhat.resize(u.x.size());
  reflect(u.x, u.y, u.xhat);
  return u;
}

Init init_feddr(std::span<const double> x0, const Hyper& hyper, const Problem& problem,
                std::uint64_t seed) {
  const std::size_t n = problem.num_users();
  if (x0.size() != problem.dim()) throw DimensionMismatch(problem.dim(), x0.size());
  if (!std::isfinite(problem.value(x0))) throw NonFiniteValue("non-finite loss at x0");
  Init init;
  init.server.xtilde.assign(x0.size(), 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    init.users.push_back(init_user(problem.users[i], x0, hyper, seed, i));
    apply_delta(init.server, init.users.back().xhat, n);
  }
  init.server.xbar = prox_g(init.server.xtilde, hyper.eta, problem.reg);
  return init;
}

LocalUpdate local_update(const UserState& user, std::span<const double> xbar, const Hyper& hyper,
                         const LossModel& model, const AccuracyTarget& target,
                         std::uint64_t solver_seed) {
  if (!(hyper.alpha > 0.0)) throw InvalidArgument("relaxation alpha must be positive");
  if (xbar.size() != user.x.size()) throw DimensionMismatch(user.x.size(), xbar.size());
  LocalUpdate out;
  UserState& u = out.user;
  u.y = user.y;
  for (std::size_t j = 0; j < u.y.size(); ++j) u.y[j] += hyper.alpha * (xbar[j] - user.x[j]);
  ProxResult r = evaluate_prox(model, u.y, hyper, target, user.x, solver_seed);
  u.x = std::move(r.point);
  u.certified = r.certified_accuracy.has_value();
  u.last_eps = r.certified_accuracy.value_or(0.0);
  out.inner_iterations = r.inner_iterations;
  u.xhat.resize(u.x.size());
  reflect(u.x, u.y, u.xhat);
  out.delta_xhat.resize(u.x.size());
  for (std::size_t j = 0; j < u.x.size(); ++j) out.delta_xhat[j] = u.xhat[j] - user.xhat[j];
  return out;
}

void apply_delta(ServerState& server, std::span<const double> delta, std::size_t n) {
  kernels::axpy(1.0 / static_cast<double>(n), delta, server.xtilde);
}

ServerState server_aggregate(const ServerState& server, std::span<const UserDelta> deltas,
                             std::size_t n, const Regularizer& reg, double eta) {
  std::vector<std::size_t> seen;
  for (const auto& d : deltas) {
    if (d.user >= n) throw InvalidArgument("delta from unknown user " + std::to_string(d.user));
    if (std::find(seen.begin(), seen.end(), d.user) != seen.end())
      throw InvalidArgument("duplicate user in deltas: " + std::to_string(d.user));
    seen.push_back(d.user);
  }
  ServerState next = server;
  ++next.round;
  if (deltas.empty()) return next;
  for (const auto& d : deltas) apply_delta(next, d.delta, n);
  next.xbar = prox_g(next.xtilde, eta, reg);
  return next;
}

std::uint64_t bytes_per_round(std::size_t participants, std::size_t dim, std::size_t scalar_bytes) {
  return static_cast<std::uint64_t>(participants) * 2u * dim * scalar_bytes;
}

TraceRecord& append_record(Trace& trace, TraceRecord rec, const Problem& problem,
                           const Hyper& hyper, const ServerState& server,
                           const std::vector<UserState>& users, bool certify, bool full_state) {
  rec.loss = problem.value(server.xbar);
  rec.train_accuracy = problem.accuracy(server.xbar);
  rec.grad_map_sq = kernels::sq_norm(grad_mapping(problem, server.xbar, hyper.eta));
  std::vector<Vec> xs;
  xs.reserve(users.size());
  rec.eps_sq_sum = 0.0;
  for (const auto& u : users) {
    xs.push_back(u.x);
    rec.eps_sq_sum += u.last_eps * u.last_eps;
  }
  if (certify) rec.V = lyapunov_V(problem, xs, server.xbar, hyper.eta);
  rec.prox_mode = std::string(prox_mode_name(hyper.prox_mode));
  if (full_state) trace.states.push_back({server.xbar, std::move(xs)});
  trace.records.push_back(std::move(rec));
  return trace.records.back();
}

Trace run_feddr(const Problem& problem, const FeddrConfig& cfg) {
  const std::size_t n = problem.num_users();
  const std::size_t p = problem.dim();
  const Hyper& hyper = cfg.hyper;
  if (!cfg.sampler) {
    hyper.sampling.validate();
    if (hyper.sampling.num_users != n) throw DimensionMismatch(n, hyper.sampling.num_users);
  }
  const double L = problem.lipschitz();
  const StepsizeCheck check = validate_stepsizes(hyper.alpha, hyper.eta, hyper.gammas.g4, L);
  if (!check.accepted && !cfg.override_stepsize_check)
    throw StepsizeRejected(check.descent_coefficient > 0.0
                               ? "eta exceeds 1/L"
                               : "D(alpha, eta) = " + fmt::format("{:.17g}", check.descent_coefficient) +
                                     " <= 0");

  Trace trace;
  trace.algorithm = "feddr";
  trace.num_users = n;
  trace.dim = p;
  trace.eta = hyper.eta;
  trace.alpha = hyper.alpha;
  trace.lipschitz = L;
  trace.initial_loss = problem.value(cfg.x0);
  trace.meta["descent_coefficient"] = fmt::format("{:.17g}", check.descent_coefficient);

  Init init = init_feddr(cfg.x0, hyper, problem, cfg.seed);
  ServerState server = std::move(init.server);
  std::vector<UserState> users = std::move(init.users);
  append_record(trace, TraceRecord{}, problem, hyper, server, users, cfg.certify, cfg.full_state);

  std::uint64_t bytes = 0;
  std::vector<UserDelta> deltas;
  for (std::size_t k = 0; k < cfg.rounds; ++k) {
    TraceRecord r;
    r.k = k + 1;
    r.sim_time = static_cast<double>(k + 1);
    if (cfg.sampler) {
      r.active = cfg.sampler(k);
      std::sort(r.active.begin(), r.active.end());
    } else {
      Rng rng = make_rng(cfg.seed, Stream::sampling, {k});
      SampleDraw draw = sample_users(hyper.sampling, rng);
      r.active = std::move(draw.users);
      r.resamples = draw.resamples;
    }
    deltas.clear();
    std::optional<double> worst;
    try {
      for (std::size_t i : r.active) {
        if (i >= n) throw InvalidArgument("sampled user out of range");
        const double p_i = cfg.sampler ? 1.0 : hyper.sampling.inclusion_probability(i);
        const AccuracyTarget t = accuracy_for_round(hyper.accuracy, k + 1, p_i);
        LocalUpdate up = local_update(users[i], server.xbar, hyper, problem.users[i], t,
                                      local_seed(cfg.seed, i, k + 1));
        r.step_sq += kernels::sq_dist(up.user.x, users[i].x);
        r.eps_sq_active += users[i].last_eps * users[i].last_eps + up.user.last_eps * up.user.last_eps;
        if (up.user.certified) worst = std::max(worst.value_or(0.0), up.user.last_eps);
        users[i] = std::move(up.user);
        deltas.push_back({i, std::move(up.delta_xhat)});
      }
    } catch (const Divergence& e) {
      trace.abort_reason = "round " + std::to_string(k) + ": " + e.what();
      break;
    } catch (const NonFiniteValue& e) {
      trace.abort_reason = "round " + std::to_string(k) + ": " + e.what();
      break;
    }
    server = server_aggregate(server, deltas, n, problem.reg, hyper.eta);
    if (!all_finite(server.xbar)) {
      trace.abort_reason = "round " + std::to_string(k) + ": non-finite global model";
      break;
    }
    bytes += bytes_per_round(r.active.size(), p);
    r.bytes = bytes;
    r.prox_accuracy = worst;
    append_record(trace, std::move(r), problem, hyper, server, users, cfg.certify, cfg.full_state);
  }
  return trace;
}

}  // namespace feddr
