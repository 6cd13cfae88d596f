#include "feddr/experiment.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <random>

#include <fmt/format.h>

#include "feddr/asyncsim.hpp"
#include "feddr/baselines.hpp"
#include "feddr/errors.hpp"
#include "feddr/kernels.hpp"
#include "feddr/rng.hpp"
#include "feddr/synthetic.hpp"
#include "feddr/trace_io.hpp"

namespace feddr {

namespace {

// min over x of (1/n) Σ_i ½ Σ_j h_ij (x_j − a_ij)² + λ‖x‖₁, separable per coordinate.
std::optional<double> quadratic_minimum(const Problem& problem) {
  const std::size_t n = problem.num_users(), p = problem.dim();
  Vec x(p);
  for (std::size_t j = 0; j < p; ++j) {
    double hsum = 0.0, hasum = 0.0;
    for (const LossModel& m : problem.users) {
      const QuadraticLoss& q = *m.as_quadratic();
      const double h = q.curvature.empty() ? 1.0 : q.curvature[j];
      if (!(h > 0.0)) return std::nullopt;
      hsum += h;
      hasum += h * q.center[j];
    }
    const double hbar = hsum / static_cast<double>(n), c = hasum / hsum;
    const double lambda = problem.reg.kind == RegKind::l1 ? problem.reg.weight : 0.0;
    const double t = lambda / hbar;
    x[j] = std::fabs(c) > t ? std::copysign(std::fabs(c) - t, c) : 0.0;
  }
  return problem.value(x);
}

SamplingScheme make_sampling(const HyperConfig& h, std::size_t n) {
  switch (h.sampling) {
    case SamplingKind::full: return SamplingScheme::full(n);
    case SamplingKind::uniform_subset: return SamplingScheme::uniform(n, h.sample_size);
    case SamplingKind::bernoulli: return SamplingScheme::bernoulli(h.probabilities);
  }
  return SamplingScheme::full(n);
}

bool is_sync(Algorithm a) { return a == Algorithm::feddr || a == Algorithm::fedsplit; }

std::string trace_path(const std::string& dir, const std::string& name, std::uint64_t seed,
                       const char* ext) {
  return (std::filesystem::path(dir) / fmt::format("{}_seed{}.{}", name, seed, ext)).string();
}

}  // namespace

BuiltProblem build_problem(const ExperimentConfig& cfg, std::uint64_t seed) {
  const ProblemConfig& pc = cfg.problem;
  const std::uint64_t iseed = pc.seed.value_or(seed);
  BuiltProblem out;
  out.problem.reg = pc.reg;
  if (pc.loss == LossKind::quadratic) {
    Rng rng = make_rng(iseed, Stream::problem, {});
    std::normal_distribution<double> unit(0.0, 1.0);
    std::uniform_real_distribution<double> curv(pc.curvature_min, pc.curvature_max);
    const bool flat = pc.curvature_min == pc.curvature_max;
    for (std::size_t i = 0; i < pc.users; ++i) {
      Vec a(pc.dim), h;
      for (double& v : a) v = pc.center_scale * unit(rng);
      if (!(flat && pc.curvature_min == 1.0)) {
        h.resize(pc.dim);
        for (double& v : h) v = flat ? pc.curvature_min : curv(rng);
      }
      out.problem.users.push_back(LossModel::quadratic(std::move(a), std::move(h)));
    }
    out.F_star = quadratic_minimum(out.problem);
  } else {
    SyntheticSpec spec = pc.synthetic;
    spec.users = pc.users;
    spec.dim = pc.dim;
    spec.seed = iseed;
    FederatedData data = gen_synthetic(spec);
    for (UserData& u : data.users) {
      out.test.push_back(std::move(u.test));
      out.problem.users.push_back(pc.loss == LossKind::softmax_regression
                                      ? LossModel::softmax_regression(std::move(u.train))
                                      : LossModel::tiny_mlp(std::move(u.train), pc.mlp_hidden,
                                                            pc.mlp_lipschitz));
    }
  }
  out.x0.assign(out.problem.dim(), 0.0);
  if (pc.x0_scale > 0.0) {
    Rng rng = make_rng(iseed, Stream::init, {});
    std::normal_distribution<double> unit(0.0, pc.x0_scale);
    for (double& v : out.x0) v = unit(rng);
  }
  return out;
}

double resolve_eta(const HyperConfig& h, double L) {
  if (h.eta) return *h.eta;
  if (h.eta_times_L) return *h.eta_times_L / L;
  throw ConfigError("field 'hyper.eta': give exactly one of eta or eta_times_L");
}

Hyper make_hyper(const ExperimentConfig& cfg, const Problem& problem) {
  const HyperConfig& h = cfg.hyper;
  Hyper out;
  out.eta = resolve_eta(h, problem.lipschitz());
  out.alpha = h.alpha;
  out.accuracy = h.accuracy;
  out.prox_mode = h.prox_mode;
  out.heuristic = h.heuristic;
  out.sampling = make_sampling(h, problem.num_users());
  out.gammas = h.gammas.value_or(h.accuracy.kind == AccuracyKind::exact ? Gammas::exact()
                                                                        : Gammas::inexact());
  if (cfg.algorithm == Algorithm::fedsplit) {
    out.alpha = 2.0;
    out.sampling = SamplingScheme::full(problem.num_users());
  }
  return out;
}

Trace run_config(const ExperimentConfig& cfg, const BuiltProblem& built, std::uint64_t seed,
                 bool keep_states, bool certify) {
  const Problem& problem = built.problem;
  const Hyper hyper = make_hyper(cfg, problem);
  Trace trace;
  switch (cfg.algorithm) {
    case Algorithm::feddr:
    case Algorithm::fedsplit: {
      FeddrConfig fc;
      fc.hyper = hyper;
      fc.rounds = cfg.rounds;
      fc.seed = seed;
      fc.x0 = built.x0;
      fc.full_state = keep_states;
      fc.certify = certify;
      fc.override_stepsize_check =
          cfg.hyper.override_stepsize_check || cfg.algorithm == Algorithm::fedsplit;
      trace = run_feddr(problem, fc);
      trace.algorithm = std::string(algorithm_name(cfg.algorithm));
      break;
    }
    case Algorithm::asyncfeddr: {
      AsyncConfig ac;
      ac.hyper = hyper;
      ac.delays = cfg.async.delays;
      if (cfg.async.stagger) {
        ac.delays.start_offset.resize(problem.num_users());
        for (std::size_t i = 0; i < problem.num_users(); ++i)
          ac.delays.start_offset[i] = cfg.async.stagger_step * static_cast<double>(i);
      }
      ac.events = cfg.rounds;
      ac.seed = seed;
      ac.x0 = built.x0;
      ac.full_state = keep_states;
      ac.certify = certify;
      ac.override_stepsize_check = cfg.hyper.override_stepsize_check;
      ac.weight = cfg.async.weight;
      trace = run_async(problem, ac);
      break;
    }
    case Algorithm::fedavg:
    case Algorithm::fedprox: {
      BaselineRun run;
      run.baseline.algorithm =
          cfg.algorithm == Algorithm::fedavg ? BaselineKind::fedavg : BaselineKind::fedprox;
      run.baseline.local_epochs = cfg.baseline.local_epochs;
      run.baseline.local_lr = cfg.baseline.local_lr;
      run.baseline.batch_size = cfg.baseline.batch_size;
      run.baseline.mu = cfg.algorithm == Algorithm::fedprox ? cfg.baseline.mu : 0.0;
      run.baseline.sampling = hyper.sampling;
      run.rounds = cfg.rounds;
      run.seed = seed;
      run.x0 = built.x0;
      run.eta = hyper.eta;
      trace = run_baseline(problem, run);
      break;
    }
  }
  trace.meta["config"] = emit_config(cfg);
  trace.meta["seed"] = std::to_string(seed);
  if (built.F_star) trace.meta["F_star"] = fmt::format("{:.17g}", *built.F_star);
  return trace;
}

CertifyOutcome certify_trace(const Trace& trace, const ExperimentConfig& cfg,
                             const BuiltProblem& built) {
  CertifyOutcome out;
  std::string& rep = out.report;
  rep += fmt::format("algorithm: {}\niterations: {}\n", trace.algorithm, trace.iterations());
  if (trace.abort_reason) rep += fmt::format("aborted: {}\n", *trace.abort_reason);
  auto not_applicable = [&](const std::string& why) {
    rep += "certificate: not applicable (" + why + ")\n";
    return out;
  };
  if (!is_sync(cfg.algorithm) && cfg.algorithm != Algorithm::asyncfeddr)
    return not_applicable("baseline algorithm");
  if (cfg.algorithm == Algorithm::fedsplit)
    return not_applicable("relaxation 2 lies outside the descent guarantees");
  if (cfg.hyper.prox_mode == ProxMode::heuristic)
    return not_applicable("heuristic local solver carries no accuracy certificate");
  if (cfg.problem.loss == LossKind::tiny_mlp)
    return not_applicable("tiny-mlp smoothness constant is not certified");
  if (cfg.hyper.override_stepsize_check)
    return not_applicable("stepsize check was overridden");

  const Problem& problem = built.problem;
  const Hyper hyper = make_hyper(cfg, problem);
  const double L = problem.lipschitz();
  const std::size_t n = problem.num_users();

  DescentParams dp;
  dp.alpha = hyper.alpha;
  dp.eta = hyper.eta;
  dp.L = L;
  dp.gammas = hyper.gammas;
  TheoryInputs in;
  in.alpha = hyper.alpha;
  in.eta = hyper.eta;
  in.L = L;
  in.n = n;
  in.gammas = hyper.gammas;
  if (cfg.algorithm == Algorithm::asyncfeddr) {
    const DelayStats stats = measure_delay_stats(trace);
    rep += fmt::format("observed delay tau: {}  window T: {}  p_hat: {:.6g}\n", stats.tau,
                       stats.T, stats.p_hat);
    in.tau = cfg.async.delays.tau;
    in.T = std::max<std::size_t>(stats.T, 1);
    in.p_hat = stats.p_hat > 0.0 ? stats.p_hat : 1.0;
    const AsyncConstants c = async_constants(in);
    const AsyncBounds ab = async_bounds(in.n, in.tau, in.alpha, in.L);
    rep += fmt::format(
        "alpha_bar: {:.17g} (closed form {:.17g})\neta_bar: {:.17g} (closed form {:.17g})\n"
        "rho: {:.17g} (halved staleness {:.17g})\nC_hat: {:.17g}\n",
        c.alpha_bar, ab.alpha_bar_closed, c.eta_bar, ab.eta_bar_closed, c.rho, c.rho_halved,
        c.C_hat);
    dp.kind = DescentKind::async;
    dp.rho = c.rho;
    dp.tau = cfg.async.delays.tau;
    dp.weight = cfg.async.weight;
  } else {
    in.p_hat = hyper.sampling.min_probability();
    in.theta_hat = cfg.hyper.accuracy.kind == AccuracyKind::relative ? cfg.hyper.accuracy.parameter : 0.0;
    std::vector<std::string> notes;
    const TheoryConstants tc = theory_constants(in, &notes);
    if (tc.sync)
      rep += fmt::format("C1: {:.17g}\nC2: {:.17g}\nC3: {:.17g}\n", tc.sync->C1, tc.sync->C2,
                         tc.sync->C3);
    if (tc.relative && cfg.hyper.accuracy.kind == AccuracyKind::relative)
      rep += fmt::format("relative rate constant: {:.17g}\n", tc.relative->rate);
    for (const std::string& note : notes)
      if (note.rfind("sync", 0) == 0 ||
          (note.rfind("relative", 0) == 0 && cfg.hyper.accuracy.kind == AccuracyKind::relative))
        rep += "note: " + note + "\n";
  }

  const DescentReport d = check_descent(trace, problem, dp);
  out.applicable = true;
  out.violations = d.violations;
  rep += fmt::format("basis: {}\ntransitions checked: {}\nviolations: {}\nmin slack: {:.17g}\n",
                     d.basis, d.rounds.size(), d.violations, d.min_slack);
  std::size_t shown = 0;
  for (const LyapunovReport& r : d.rounds) {
    if (!r.violation) continue;
    if (++shown > 20) break;
    rep += fmt::format("  violation at k={}: required {:.17g}, slack {:.17g}\n", r.k, r.required,
                       r.slack);
  }
  rep += d.violations == 0 ? "certificate: PASS\n" : "certificate: FAIL\n";
  return out;
}

CertifyOutcome certify_trace_file(const std::string& path) {
  const Trace file = load_trace(path);
  const auto cfg_it = file.meta.find("config");
  const auto seed_it = file.meta.find("seed");
  if (cfg_it == file.meta.end() || seed_it == file.meta.end())
    throw TraceError("trace header carries no config; cannot rebuild the problem");
  const ExperimentConfig cfg = parse_config(cfg_it->second);
  const std::uint64_t seed = std::stoull(seed_it->second);
  const BuiltProblem built = build_problem(cfg, seed);
  if (file.has_states()) return certify_trace(file, cfg, built);

  const Trace replay = run_config(cfg, built, seed, true);
  if (replay.records.size() != file.records.size())
    throw TraceError("replay produced a different number of records than the trace file");
  for (std::size_t r = 0; r < replay.records.size(); ++r) {
    const TraceRecord &a = replay.records[r], &b = file.records[r];
    if (a.k != b.k || a.active != b.active || a.loss != b.loss ||
        a.grad_map_sq != b.grad_map_sq || a.bytes != b.bytes)
      throw TraceError(fmt::format("replay diverges from the trace file at record {}", r));
  }
  CertifyOutcome out = certify_trace(replay, cfg, built);
  out.report = "states: replayed from the embedded config (records match the file)\n" + out.report;
  return out;
}

RunSummary run_experiment(const ExperimentConfig& cfg, const RunOptions& opt, std::ostream& log) {
  RunSummary summary;
  const std::vector<std::uint64_t> seeds = opt.seeds.value_or(cfg.seeds);
  if (seeds.empty()) throw ConfigError("field 'seeds': must list at least one seed");
  const bool full_state = opt.full_state.value_or(cfg.trace.full_state);
  const std::string dir = opt.output_dir.value_or(cfg.trace.output_dir);
  std::filesystem::create_directories(dir);
  ExperimentConfig resolved = cfg;
  resolved.seeds = seeds;
  resolved.trace.full_state = full_state;

  for (std::uint64_t seed : seeds) {
    const BuiltProblem built = build_problem(resolved, seed);
    Trace trace = run_config(resolved, built, seed, full_state || opt.certify, opt.certify);
    if (trace.abort_reason) {
      ++summary.aborted;
      log << fmt::format("seed {}: aborted: {}\n", seed, *trace.abort_reason);
    }
    std::optional<CertifyOutcome> cert;
    if (opt.certify) cert = certify_trace(trace, resolved, built);
    if (!full_state) trace.states.clear();
    const std::string tpath = trace_path(dir, cfg.name, seed, "trace.jsonl");
    save_trace(tpath, trace);
    summary.files.push_back(tpath);
    std::string line = fmt::format("seed {}: {} iterations, final loss {:.10g}", seed,
                                   trace.iterations(), trace.records.back().loss);
    if (cert) {
      const std::string cpath = trace_path(dir, cfg.name, seed, "certify.txt");
      std::ofstream(cpath, std::ios::binary) << cert->report;
      summary.files.push_back(cpath);
      summary.violations += cert->violations;
      line += cert->applicable ? fmt::format(", {} violations", cert->violations)
                               : ", certificate not applicable";
    }
    log << line << "\n";
  }
  summary.exit_code = summary.violations == 0 ? 0 : 1;
  return summary;
}

}  // namespace feddr
