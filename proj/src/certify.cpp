#include "feddr/certify.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "feddr/errors.hpp"
#include "feddr/kernels.hpp"

namespace feddr {

double lyapunov_V(const Problem& problem, std::span<const Vec> x, std::span<const double> xbar,
                  double eta) {
  const std::size_t n = problem.num_users();
  if (x.size() != n) throw DimensionMismatch(n, x.size());
  if (!(eta > 0.0)) throw PreconditionViolation("Lyapunov function needs eta > 0");
  Vec g(xbar.size()), diff(xbar.size());
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const LossModel& f = problem.users[i];
    f.gradient(x[i], g);
    for (std::size_t j = 0; j < diff.size(); ++j) diff[j] = xbar[j] - x[i][j];
    total += f.value(x[i]) + kernels::dot(g, diff) + kernels::sq_norm(diff) / (2.0 * eta);
  }
  return problem.reg.value(xbar) + total / static_cast<double>(n);
}

double lyapunov_Vtilde(double V, std::span<const Vec> history, double eta, std::size_t n,
                       std::size_t tau, VtildeWeight weight) {
  if (tau == 0 || history.size() < 2) return V;
  const std::size_t diffs = std::min(history.size() - 1, tau);
  const std::size_t first = history.size() - 1 - diffs;
  double sum = 0.0;
  for (std::size_t d = 0; d < diffs; ++d) {
    // Newest difference gets weight τ, the one before τ−1, and so on.
    const double w = static_cast<double>(tau - diffs + d + 1);
    sum += w * kernels::sq_dist(history[first + d + 1], history[first + d]);
  }
  double scale = 1.0 / (static_cast<double>(n) * eta);
  if (weight == VtildeWeight::tau_over_n_eta) scale *= static_cast<double>(tau);
  return V + scale * sum;
}

SyncConstants sync_constants(const TheoryInputs& in) {
  const double a = in.alpha, e = in.eta, L = in.L;
  const auto& g = in.gammas;
  const double le = L * e, q = 1.0 + le * le;
  SyncConstants c;
  c.descent = 2.0 - a * (le + 1.0) - 2.0 * le * le - 4.0 * g.g4 * a * q;
  if (!(c.descent > 0.0)) throw ConstantRejected("D(alpha, eta)", c.descent);
  if (!(in.p_hat > 0.0)) throw ConstantRejected("p_hat", in.p_hat);
  c.beta = in.p_hat * a * c.descent / (2.0 * e * (1.0 + g.g1) * q);
  c.C1 = 2.0 * (1.0 + le) * (1.0 + le) * (1.0 + g.g2) / (e * e * c.beta);
  const bool exact = g.g1 == 0.0 && g.g2 == 0.0 && g.g4 == 0.0;
  if (exact) return c;
  if (!(g.g1 > 0.0)) throw ConstantRejected("gamma1", g.g1);
  if (!(g.g2 > 0.0)) throw ConstantRejected("gamma2", g.g2);
  if (!(g.g4 > 0.0)) throw ConstantRejected("gamma4", g.g4);
  c.rho2 = 2.0 * (1.0 + le) * (1.0 + le) / (g.g4 * e * a * a) + q / e +
           a * c.descent / (2.0 * e * q * g.g1);
  c.rho1 = c.rho2 + q / e;
  c.C2 = c.rho1 * c.C1;
  c.C3 = c.rho2 * c.C1 + (1.0 + le) * (1.0 + le) * (1.0 + g.g2) / (e * e * g.g2);
  return c;
}

AsyncBounds async_bounds(std::size_t n_users, std::size_t delay, double a, double L) {
  const double n = static_cast<double>(n_users), tau = static_cast<double>(delay);
  const bool small_delay = 2.0 * tau * tau <= n;
  const double c = (2.0 * tau * tau - n) / (n * n);
  // rho > 0  <=>  2 − 2α − κα > αLη + (2 + α + κα)L²η²
  auto eta_root = [&](double kappa) {
    const double A = 2.0 + a + kappa * a, B = 2.0 - 2.0 * a - kappa * a;
    if (!(B > 0.0)) return 0.0;
    return (std::sqrt(a * a + 4.0 * A * B) - a) / (2.0 * L * A);
  };
  AsyncBounds b;
  if (small_delay) {
    b.alpha_bar = b.alpha_bar_closed = 1.0;
    b.eta_bar = b.eta_bar_closed = eta_root(0.0);
    return b;
  }
  b.alpha_bar = 1.0 / (1.0 + c);
  b.eta_bar = eta_root(2.0 * c);
  b.alpha_bar_closed = 2.0 / (2.0 + c);
  const double disc = 16.0 - 8.0 * a - (7.0 + 4.0 * c + 4.0 * c * c) * a * a;
  b.eta_bar_closed =
      disc > 0.0 ? std::max(0.0, (std::sqrt(disc) - a) / (2.0 * L * (2.0 + (1.0 + c) * a))) : 0.0;
  return b;
}

AsyncConstants async_constants(const TheoryInputs& in) {
  const double a = in.alpha, e = in.eta, L = in.L;
  const double n = static_cast<double>(in.n), tau = static_cast<double>(in.tau);
  const double T = static_cast<double>(in.T), p = in.p_hat;
  if (in.n == 0) throw InvalidArgument("async constants need n >= 1");
  const bool small_delay = 2.0 * tau * tau <= n;
  const AsyncBounds bounds = async_bounds(in.n, in.tau, a, L);
  AsyncConstants c;
  c.alpha_bar = bounds.alpha_bar;
  c.eta_bar = bounds.eta_bar;
  const double le = L * e, q = 1.0 + le * le;
  const double core = 2.0 * (1.0 - a) - (2.0 + a) * le * le - le * a;
  const double stale = a * q * (2.0 * tau * tau - n);
  c.rho = small_delay ? core / (a * e * n) : (n * n * core - 2.0 * stale) / (a * e * n * n * n);
  c.rho_halved = small_delay ? c.rho : (n * n * core - stale) / (a * e * n * n * n);
  if (!(p > 0.0)) throw ConstantRejected("p_hat", p);
  c.D = (8.0 * a * a * q * (tau * tau + 2.0 * T * n * p) + 8.0 * n * n * (q + T * a * a * p)) /
        (p * a * a * n * n);
  if (!(c.rho > 0.0)) throw ConstantRejected("rho", c.rho);
  if (!(c.D > 0.0)) throw ConstantRejected("D", c.D);
  c.C_hat = 2.0 * (1.0 + le) * (1.0 + le) * c.D / (n * e * e * c.rho);
  return c;
}

RelativeConstants relative_constants(const TheoryInputs& in) {
  const double e = in.eta, L = in.L, g4 = in.gammas.g4, th = in.theta_hat, p = in.p_hat;
  if (in.alpha != 1.0) throw ConstantRejected("alpha - 1 (relative mode needs alpha = 1)", 0.0);
  if (!(g4 > 0.0)) throw ConstantRejected("gamma4", g4);
  const double le = L * e, q = 1.0 + le * le;
  RelativeConstants c;
  c.C_hat = std::max(q, 2.0 * (1.0 + le) * (1.0 + le) / g4);
  c.margin = 1.0 - 4.0 * g4 - 8.0 * c.C_hat * th;
  if (!(c.margin > 0.0)) throw ConstantRejected("1 - 4*gamma4 - 8*C_hat*theta_hat", c.margin);
  c.eta_bar = (std::sqrt(1.0 + 8.0 * (1.0 + 2.0 * g4) * c.margin) - 1.0) / (4.0 * L * (1.0 + 2.0 * g4));
  const double bracket = c.margin - le - 2.0 * le * le - 4.0 * g4 * le * le;
  if (!(bracket > 0.0)) throw ConstantRejected("eta_bar - eta", c.eta_bar - e);
  c.C_tilde = p * p * e * bracket /
              (4.0 * (4.0 * (q + 2.0 * th) + p * th) * (1.0 + le) * (1.0 + le));
  c.rate = 1.0 / c.C_tilde;
  return c;
}

TheoryConstants theory_constants(const TheoryInputs& in, std::vector<std::string>* notes) {
  TheoryConstants out;
  auto attempt = [&](auto&& fn, auto& slot, const char* family) {
    try {
      slot = fn(in);
    } catch (const ConstantRejected& e) {
      if (notes) notes->push_back(std::string(family) + ": " + e.what());
    }
  };
  attempt(sync_constants, out.sync, "sync");
  attempt(async_constants, out.async, "async");
  if (in.theta_hat > 0.0) attempt(relative_constants, out.relative, "relative");
  return out;
}

namespace {

double state_step_sq(const FullState& a, const FullState& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.x.size(); ++i) s += kernels::sq_dist(a.x[i], b.x[i]);
  return s;
}

}  // namespace

DescentReport check_descent(const Trace& trace, const Problem& problem, const DescentParams& p) {
  if (!trace.has_states()) throw TraceError("trace lacks full states; rerun with full-state tracing");
  const std::size_t n = problem.num_users();
  const double e = p.eta, a = p.alpha, L = p.L;
  const double le = L * e;
  const auto& g = p.gammas;
  DescentReport rep;
  rep.min_slack = INFINITY;
  rep.basis = "sure (per realization)";

  auto V_at = [&](std::size_t k) {
    return lyapunov_V(problem, trace.states[k].x, trace.states[k].xbar, e);
  };
  auto Vt_at = [&](std::size_t k, double V) {
    const std::size_t first = k >= p.tau ? k - p.tau : 0;
    std::vector<Vec> hist;
    for (std::size_t l = first; l <= k; ++l) hist.push_back(trace.states[l].xbar);
    return lyapunov_Vtilde(V, hist, e, n, p.tau, p.weight);
  };

  double coef = 0.0;
  if (p.kind == DescentKind::sync) {
    const double D = 2.0 - a * (le + 1.0) - 2.0 * le * le - 4.0 * g.g4 * a * (1.0 + le * le);
    coef = D / (2.0 * a * e * static_cast<double>(n));
  } else {
    coef = p.rho / 2.0;
  }
  // A nonpositive coefficient certifies nothing; demand plain descent instead.
  if (!(coef > 0.0)) {
    coef = 0.0;
    rep.basis += ", descent coefficient nonpositive: plain descent required";
  }

  double V_prev = V_at(0);
  double Vt_prev = p.kind == DescentKind::async ? Vt_at(0, V_prev) : V_prev;
  for (std::size_t k = 0; k + 1 < trace.records.size(); ++k) {
    const TraceRecord& next = trace.records[k + 1];
    const double V_next = V_at(k + 1);
    LyapunovReport r;
    r.k = k;
    r.V = V_prev;
    r.coefficient = coef;
    const double step = state_step_sq(trace.states[k], trace.states[k + 1]);
    double decrease = 0.0;
    if (p.kind == DescentKind::sync) {
      const double dxbar = kernels::sq_dist(trace.states[k + 1].xbar, trace.states[k].xbar);
      double req = coef * step + (1.0 - g.g3) / (2.0 * e) * dxbar;
      const double E2 = next.eps_sq_sum / static_cast<double>(n);
      if (E2 > 0.0) {
        if (!(g.g3 > 0.0)) throw InvalidArgument("inexact trace needs gamma3 > 0");
        req -= (1.0 + le * le) / (e * g.g3) * E2;
      }
      if (next.eps_sq_active > 0.0) {
        if (!(g.g4 > 0.0)) throw InvalidArgument("inexact trace needs gamma4 > 0");
        req -= 2.0 * (1.0 + le) * (1.0 + le) / (g.g4 * e * a * a * static_cast<double>(n)) *
               next.eps_sq_active;
      }
      r.required = req;
      decrease = V_prev - V_next;
    } else {
      const double Vt_next = Vt_at(k + 1, V_next);
      r.Vtilde = Vt_prev;
      r.required = coef * step;
      decrease = Vt_prev - Vt_next;
      Vt_prev = Vt_next;
    }
    r.slack = decrease - r.required;
    r.violation = r.slack < -p.tolerance;
    if (r.violation) ++rep.violations;
    rep.min_slack = std::min(rep.min_slack, r.slack);
    rep.rounds.push_back(r);
    V_prev = V_next;
  }
  if (rep.rounds.empty()) rep.min_slack = 0.0;
  return rep;
}

RateReport check_rate(std::span<const Trace> traces, const RateBound& bound, double F0,
                      double F_star) {
  RateReport rep;
  rep.basis = traces.size() > 1 ? "expectation (average over " + std::to_string(traces.size()) +
                                      " seeds)"
                                : "single realization";
  rep.min_margin = INFINITY;
  if (traces.empty()) return rep;
  std::size_t len = traces.front().records.size();
  for (const auto& t : traces) len = std::min(len, t.records.size());
  const double seeds = static_cast<double>(traces.size());
  double g_sum = 0.0, eps_sum = 0.0;
  for (std::size_t K = 0; K < len; ++K) {
    for (const auto& t : traces) {
      const auto& rec = t.records;
      g_sum += rec[K].grad_map_sq / seeds;
      const double next_eps = K + 1 < rec.size() ? rec[K + 1].eps_sq_sum : rec[K].eps_sq_sum;
      eps_sum += (bound.C2 * rec[K].eps_sq_sum + bound.C3 * next_eps) /
                 (static_cast<double>(t.num_users) * seeds);
    }
    RatePoint pt;
    pt.K = K;
    pt.average = g_sum / static_cast<double>(K + 1);
    pt.bound = (bound.C1 * (F0 - F_star) + eps_sum) / static_cast<double>(K + 1);
    pt.margin = pt.bound - pt.average;
    // Rounding headroom so that an exact start (bound 0) is not flagged.
    if (pt.margin < -1e-12 * std::max(1.0, pt.bound)) rep.holds = false;
    rep.min_margin = std::min(rep.min_margin, pt.margin);
    rep.points.push_back(pt);
  }
  return rep;
}

}  // namespace feddr
