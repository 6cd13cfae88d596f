#include "feddr/baselines.hpp"

#include <cmath>
#include <string>

#include "feddr/errors.hpp"
#include "feddr/kernels.hpp"

namespace feddr {

namespace {

Vec local_average(std::span<const double> global, const Problem& problem,
                  const BaselineConfig& cfg, double mu, std::uint64_t seed, std::size_t round,
                  std::span<const std::size_t> participants) {
  if (problem.reg.kind != RegKind::zero && problem.reg.weight != 0.0)
    throw PreconditionViolation("FedAvg/FedProx compare on non-composite problems (g = 0)");
  if (global.size() != problem.dim()) throw DimensionMismatch(problem.dim(), global.size());
  if (participants.empty() || cfg.local_epochs == 0) return Vec(global.begin(), global.end());
  Vec sum(global.size(), 0.0);
  const SgdOptions opt{cfg.local_epochs, cfg.local_lr, cfg.batch_size};
  for (std::size_t i : participants) {
    const Vec z = sgd_minimize(problem.users.at(i), global, global, mu, opt,
                               local_seed(seed, i, round));
    kernels::axpy(1.0, z, sum);
  }
  const double inv = 1.0 / static_cast<double>(participants.size());
  for (double& v : sum) v *= inv;
  return sum;
}

}  // namespace

Vec fedavg_round(std::span<const double> global, const Problem& problem,
                 const BaselineConfig& cfg, std::uint64_t seed, std::size_t round,
                 std::span<const std::size_t> participants) {
  return local_average(global, problem, cfg, 0.0, seed, round, participants);
}

Vec fedprox_round(std::span<const double> global, const Problem& problem,
                  const BaselineConfig& cfg, std::uint64_t seed, std::size_t round,
                  std::span<const std::size_t> participants) {
  if (!(cfg.mu >= 0.0)) throw InvalidArgument("FedProx mu must be nonnegative");
  return local_average(global, problem, cfg, cfg.mu, seed, round, participants);
}

Trace run_baseline(const Problem& problem, const BaselineRun& run) {
  const BaselineConfig& cfg = run.baseline;
  cfg.sampling.validate();
  const std::size_t n = problem.num_users();
  if (cfg.sampling.num_users != n) throw DimensionMismatch(n, cfg.sampling.num_users);
  Trace trace;
  trace.algorithm = cfg.algorithm == BaselineKind::fedavg ? "fedavg" : "fedprox";
  trace.num_users = n;
  trace.dim = problem.dim();
  trace.eta = run.eta;
  trace.lipschitz = problem.lipschitz();
  trace.initial_loss = problem.value(run.x0);

  auto record = [&](TraceRecord r, const Vec& x) {
    r.loss = problem.value(x);
    r.train_accuracy = problem.accuracy(x);
    r.grad_map_sq = kernels::sq_norm(grad_mapping(problem, x, run.eta));
    r.prox_mode = "sgd";
    trace.records.push_back(std::move(r));
  };

  Vec x = run.x0;
  record(TraceRecord{}, x);
  std::uint64_t bytes = 0;
  for (std::size_t k = 0; k < run.rounds; ++k) {
    Rng rng = make_rng(run.seed, Stream::sampling, {k});
    SampleDraw draw = sample_users(cfg.sampling, rng);
    try {
      x = cfg.algorithm == BaselineKind::fedavg
              ? fedavg_round(x, problem, cfg, run.seed, k + 1, draw.users)
              : fedprox_round(x, problem, cfg, run.seed, k + 1, draw.users);
    } catch (const Divergence& e) {
      trace.abort_reason = "round " + std::to_string(k) + ": " + e.what();
      break;
    }
    TraceRecord r;
    r.k = k + 1;
    r.sim_time = static_cast<double>(k + 1);
    bytes += bytes_per_round(draw.users.size(), problem.dim());
    r.bytes = bytes;
    r.resamples = draw.resamples;
    r.active = std::move(draw.users);
    record(std::move(r), x);
  }
  return trace;
}

}  // namespace feddr
