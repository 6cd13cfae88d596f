#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "feddr/numerics.hpp"
#include "feddr/trace.hpp"

namespace feddr {

struct Gammas {
  double g1 = 0.0, g2 = 0.0, g3 = 0.0, g4 = 0.0;

  static Gammas exact() { return {}; }
  static Gammas inexact() { return {1.0, 1.0, 1.0, 1.0}; }
  bool operator==(const Gammas&) const = default;
};

// g(x̄) + (1/n) Σ [f_i(x_i) + ⟨∇f_i(x_i), x̄ − x_i⟩ + ‖x̄ − x_i‖²/(2η)]
double lyapunov_V(const Problem& problem, std::span<const Vec> x, std::span<const double> xbar,
                  double eta);

// Weight placed on the delayed-difference sum of Ṽ.
enum class VtildeWeight {
  one_over_n_eta,  // 1/(nη)
  tau_over_n_eta,  // τ/(nη)
};

// history holds x̄^{k−τ}, …, x̄^k (oldest first). Shorter histories are
// treated as zero differences for the missing early terms.
double lyapunov_Vtilde(double V, std::span<const Vec> history, double eta, std::size_t n,
                       std::size_t tau, VtildeWeight weight = VtildeWeight::one_over_n_eta);

struct SyncConstants {
  double descent = 0.0;  // D(α, η) including the γ₄ term
  double beta = 0.0;
  double rho1 = 0.0, rho2 = 0.0;
  double C1 = 0.0, C2 = 0.0, C3 = 0.0;
};

struct AsyncConstants {
  double alpha_bar = 0.0, eta_bar = 0.0;
  double rho = 0.0, D = 0.0, C_hat = 0.0;
  double rho_halved = 0.0;  // large-delay branch with the halved staleness term
};

struct RelativeConstants {
  double C_hat = 0.0;     // max{1 + η²L², 2(1+ηL)²/γ₄}
  double margin = 0.0;    // 1 − 4γ₄ − 8Ĉθ̂
  double eta_bar = 0.0;
  double C_tilde = 0.0;   // reciprocal of rate
  double rate = 0.0;      // constant multiplying [F(x⁰) − F*]/(K+1); equals 1/C̃
};

struct TheoryInputs {
  double alpha = 1.0;
  double eta = 0.0;
  double L = 1.0;
  std::size_t n = 1;
  double p_hat = 1.0;
  Gammas gammas;
  std::size_t tau = 0;
  std::size_t T = 1;
  double theta_hat = 0.0;
};

struct TheoryConstants {
  std::optional<SyncConstants> sync;
  std::optional<AsyncConstants> async;
  std::optional<RelativeConstants> relative;
};

struct AsyncBounds {
  double alpha_bar = 0.0, eta_bar = 0.0;  // region where rho > 0
  double alpha_bar_closed = 0.0, eta_bar_closed = 0.0;
};

// ᾱ and η̄ of the asynchronous stepsize rule; η̄ = 0 when the rule admits no η.
// For 2τ² > n the two-parameter closed forms are kept as *_closed; the gating
// values solve rho > 0 for the rho computed by async_constants.
AsyncBounds async_bounds(std::size_t n, std::size_t tau, double alpha, double L);

SyncConstants sync_constants(const TheoryInputs& in);
AsyncConstants async_constants(const TheoryInputs& in);
RelativeConstants relative_constants(const TheoryInputs& in);

// Collects every family whose preconditions hold; rejected families are
// left empty and their reasons appended to `notes` when given.
TheoryConstants theory_constants(const TheoryInputs& in, std::vector<std::string>* notes = nullptr);

struct LyapunovReport {
  std::size_t k = 0;  // transition k → k+1
  double V = 0.0;
  std::optional<double> Vtilde;
  double coefficient = 0.0;
  double required = 0.0;  // decrease the inequality demands (may be negative with inexact terms)
  double slack = 0.0;     // actual decrease − required
  bool violation = false;
};

enum class DescentKind { sync, async };

struct DescentParams {
  DescentKind kind = DescentKind::sync;
  double alpha = 1.0;
  double eta = 0.0;
  double L = 1.0;
  Gammas gammas;
  double rho = 0.0;  // async only
  std::size_t tau = 0;
  VtildeWeight weight = VtildeWeight::tau_over_n_eta;
  double tolerance = 1e-9;
};

struct DescentReport {
  std::vector<LyapunovReport> rounds;
  std::size_t violations = 0;
  double min_slack = 0.0;
  std::string basis;
};

// Recomputes V (or Ṽ) from the trace's full states and checks the sure
// descent inequality at every transition.
DescentReport check_descent(const Trace& trace, const Problem& problem, const DescentParams& p);

struct RateBound {
  double C1 = 0.0;
  double C2 = 0.0;
  double C3 = 0.0;
};

struct RatePoint {
  std::size_t K = 0;
  double average = 0.0;  // seed-averaged (1/(K+1)) Σ_{k≤K} ‖G(x̄^k)‖²
  double bound = 0.0;
  double margin = 0.0;   // bound − average
};

struct RateReport {
  std::vector<RatePoint> points;
  bool holds = true;
  double min_margin = 0.0;
  std::string basis;
};

RateReport check_rate(std::span<const Trace> traces, const RateBound& bound, double F0,
                      double F_star);

}  // namespace feddr
