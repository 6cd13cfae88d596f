#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "feddr/errors.hpp"
#include "feddr/feddr.hpp"
#include "feddr/kernels.hpp"

using namespace feddr;

namespace {

Vec random_vec(std::size_t n, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> d(0.0, scale);
  Vec v(n);
  for (double& x : v) x = d(rng);
  return v;
}

Problem random_quadratics(std::size_t n, std::size_t p, std::mt19937_64& rng, double lambda = 0.0) {
  Problem prob;
  std::uniform_real_distribution<double> h(0.5, 2.0);
  for (std::size_t i = 0; i < n; ++i) {
    Vec c(p);
    for (double& v : c) v = h(rng);
    prob.users.push_back(LossModel::quadratic(random_vec(p, rng), std::move(c)));
  }
  if (lambda > 0.0) prob.reg = Regularizer::l1(lambda);
  return prob;
}

Hyper exact_hyper(double eta, double alpha, SamplingScheme s) {
  Hyper h;
  h.eta = eta;
  h.alpha = alpha;
  h.sampling = std::move(s);
  return h;
}

}  // namespace

TEST_SUITE("feddr") {

TEST_CASE("initialisation by hand for one user") {
  Problem p;
  p.users.push_back(LossModel::quadratic({0.0}));
  const Init init = init_feddr(Vec{1.0}, exact_hyper(0.5, 1.0, SamplingScheme::full(1)), p);
  CHECK(init.users[0].x[0] == doctest::Approx(1.0 / 1.5).epsilon(1e-15));
  CHECK(init.users[0].xhat[0] == doctest::Approx(2.0 / 1.5 - 1.0).epsilon(1e-15));
  CHECK(init.server.xtilde[0] == doctest::Approx(2.0 / 1.5 - 1.0).epsilon(1e-15));
}

TEST_CASE("initialisation at the common minimiser is a fixed point") {
  const Vec a{0.5, -1.0, 2.0};
  Problem p;
  for (int i = 0; i < 3; ++i) p.users.push_back(LossModel::quadratic(a));
  const Init init = init_feddr(a, exact_hyper(0.3, 1.0, SamplingScheme::full(3)), p);
  for (const UserState& u : init.users) CHECK(u.x == a);
  CHECK(init.server.xbar == a);
}

TEST_CASE("exact-mode y-x relation after initialisation") {
  std::mt19937_64 rng(3);
  const Problem p = random_quadratics(4, 5, rng);
  const double eta = 0.3;
  const Init init = init_feddr(random_vec(5, rng), exact_hyper(eta, 1.0, SamplingScheme::full(4)), p);
  for (std::size_t i = 0; i < 4; ++i) {
    const Vec g = eval_grad(p.users[i], init.users[i].x);
    for (std::size_t j = 0; j < 5; ++j)
      CHECK(std::fabs(init.users[i].y[j] - init.users[i].x[j] - eta * g[j]) <= 1e-12);
  }
}

TEST_CASE("sampling") {
  Rng rng(5);
  const auto full = sample_users(SamplingScheme::full(4), rng).users;
  CHECK(full == std::vector<std::size_t>{0, 1, 2, 3});
  CHECK(sample_users(SamplingScheme::uniform(4, 4), rng).users == full);

  const std::size_t n = 10, b = 3, draws = 100000;
  std::vector<std::size_t> counts(n, 0);
  for (std::size_t t = 0; t < draws; ++t) {
    const auto d = sample_users(SamplingScheme::uniform(n, b), rng).users;
    CHECK_EQ(d.size(), b);
    for (std::size_t i : d) ++counts[i];
  }
  for (std::size_t c : counts)
    CHECK(std::fabs(static_cast<double>(c) / draws - 0.3) <= 0.01);

  CHECK_THROWS_AS(SamplingScheme::uniform(4, 0), InvalidArgument);
  CHECK_THROWS_AS(SamplingScheme::bernoulli({0.5, 0.0}), InvalidArgument);
  CHECK(SamplingScheme::uniform(10, 3).inclusion_probability(7) == doctest::Approx(0.3));
  const SampleDraw bd = sample_users(SamplingScheme::bernoulli({1e-3, 1e-3}), rng);
  CHECK_FALSE(bd.users.empty());
}

TEST_CASE("stepsize validation") {
  const double L = 2.0;
  const StepsizeCheck ok = validate_stepsizes(1.0, 1.0 / (3 * L), 0.0, L);
  CHECK(ok.descent_coefficient == doctest::Approx(4.0 / 9.0).epsilon(1e-14));
  CHECK(ok.accepted);
  const StepsizeCheck bad = validate_stepsizes(2.0, 1.0 / (3 * L), 0.0, L);
  CHECK(bad.descent_coefficient == doctest::Approx(-8.0 / 9.0).epsilon(1e-14));
  CHECK_FALSE(bad.accepted);
  CHECK(validate_stepsizes(1e-9, 1e-9, 0.0, L).descent_coefficient == doctest::Approx(2.0));
  CHECK(ok.closed_form_alpha_bound == doctest::Approx((std::sqrt(17.0) - 1.0) / 4.0));
  CHECK_FALSE(ok.within_closed_form);
}

TEST_CASE("accuracy schedules") {
  const double M = 3.0;
  const AccuracySchedule abs{AccuracyKind::absolute, M};
  const AccuracyTarget t0 = accuracy_for_round(abs, 0, 0.5);
  CHECK(t0.eps * t0.eps == doctest::Approx(M / 2.0));
  double sum = 0.0;
  for (std::size_t k = 0; k < 100000; ++k) {
    const double e = accuracy_for_round(abs, k, 1.0).eps;
    sum += e * e;
  }
  CHECK(sum <= M);
  for (std::size_t k : {0u, 5u, 1000u}) CHECK(accuracy_for_round({}, k, 1.0).eps == 0.0);
  CHECK(accuracy_for_round({AccuracyKind::relative, 0.01}, 3, 0.25).theta == doctest::Approx(0.0025));
}

TEST_CASE("local update at a DR fixed point gives a zero delta") {
  const Vec a{1.0, -2.0};
  const LossModel m = LossModel::quadratic(a);
  const Hyper h = exact_hyper(0.5, 1.0, SamplingScheme::full(1));
  const UserState u = init_user(m, a, h, 0, 0);
  const LocalUpdate up = local_update(u, a, h, m, {}, 0);
  CHECK(up.delta_xhat == Vec{0.0, 0.0});
}

TEST_CASE("server aggregation") {
  ServerState s{{1.0, -1.0}, {0.5, -0.5}, 4};
  const ServerState same = server_aggregate(s, {}, 3, Regularizer::l1(0.5), 1.0);
  CHECK(same.xtilde == s.xtilde);
  CHECK(same.xbar == s.xbar);
  CHECK(same.round == 5);

  std::vector<UserDelta> dup{{0, {1.0, 1.0}}, {0, {1.0, 1.0}}};
  CHECK_THROWS_AS(server_aggregate(s, dup, 3, {}, 1.0), InvalidArgument);

  std::vector<UserDelta> one{{1, {3.0, 3.0}}};
  const ServerState big = server_aggregate(s, one, 3, Regularizer::l1(100.0), 1.0);
  CHECK(big.xbar == Vec{0.0, 0.0});
  CHECK(big.xtilde == Vec{2.0, 0.0});
}

TEST_CASE("identical quadratics converge") {
  const Vec a{0.3, -0.7, 1.1};
  Problem p;
  for (int i = 0; i < 3; ++i) p.users.push_back(LossModel::quadratic(a));
  FeddrConfig cfg;
  cfg.hyper = exact_hyper(1.0 / 3.0, 1.0, SamplingScheme::full(3));
  cfg.rounds = 200;
  cfg.x0 = {5.0, 5.0, -5.0};
  const Trace t = run_feddr(p, cfg);
  CHECK(std::sqrt(t.records.back().grad_map_sq) <= 1e-6);
}

TEST_CASE("stationary start stays put") {
  const Vec a{0.3, -0.7};
  Problem p;
  for (int i = 0; i < 4; ++i) p.users.push_back(LossModel::quadratic(a));
  FeddrConfig cfg;
  cfg.hyper = exact_hyper(0.2, 1.0, SamplingScheme::uniform(4, 2));
  cfg.rounds = 50;
  cfg.x0 = a;
  cfg.full_state = true;
  const Trace t = run_feddr(p, cfg);
  for (const FullState& s : t.states)
    for (std::size_t j = 0; j < 2; ++j) CHECK(std::fabs(s.xbar[j] - a[j]) <= 1e-10);
}

TEST_CASE("runs are deterministic per seed") {
  std::mt19937_64 rng(9);
  const Problem p = random_quadratics(6, 4, rng, 0.1);
  FeddrConfig cfg;
  cfg.hyper = exact_hyper(0.3 / 2.0, 1.0, SamplingScheme::uniform(6, 2));
  cfg.rounds = 40;
  cfg.seed = 77;
  cfg.x0 = random_vec(4, rng);
  cfg.full_state = true;
  const Trace a = run_feddr(p, cfg), b = run_feddr(p, cfg);
  CHECK(a.records == b.records);
  CHECK(a.states == b.states);
  cfg.seed = 78;
  CHECK_FALSE(run_feddr(p, cfg).records == a.records);
}

TEST_CASE("invalid stepsizes are rejected with the descent coefficient") {
  std::mt19937_64 rng(10);
  const Problem p = random_quadratics(3, 2, rng);
  FeddrConfig cfg;
  cfg.hyper = exact_hyper(0.5 / p.lipschitz(), 1.9, SamplingScheme::full(3));
  cfg.x0 = {0.0, 0.0};
  try {
    run_feddr(p, cfg);
    FAIL("expected StepsizeRejected");
  } catch (const StepsizeRejected& e) {
    CHECK(std::string(e.what()).find("D(alpha, eta)") != std::string::npos);
  }
  cfg.override_stepsize_check = true;
  CHECK_NOTHROW(run_feddr(p, cfg));
}

TEST_CASE("round invariants hold on random instances") {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t n = 2 + trial % 4, dim = 3;
    const Problem p = random_quadratics(n, dim, rng, 0.05 * trial);
    const double L = p.lipschitz(), eta = 0.5 / L;
    FeddrConfig cfg;
    cfg.hyper = exact_hyper(eta, 0.5, SamplingScheme::uniform(n, 1 + trial % n));
    cfg.rounds = 30;
    cfg.seed = trial;
    cfg.x0 = random_vec(dim, rng);
    cfg.full_state = true;
    const Trace t = run_feddr(p, cfg);
    std::uint64_t prev_bytes = 0;
    for (std::size_t r = 0; r < t.records.size(); ++r) {
      const FullState& s = t.states[r];
      double spread = 0.0;
      for (const Vec& x : s.x) spread += kernels::sq_dist(x, s.xbar);
      const double bound = (1 + eta * L) * (1 + eta * L) / (n * eta * eta) * spread;
      CHECK(t.records[r].grad_map_sq <= bound + 1e-8);
      CHECK(t.records[r].k == r);
      CHECK(t.records[r].bytes >= prev_bytes);
      prev_bytes = t.records[r].bytes;
    }
  }
}

}
