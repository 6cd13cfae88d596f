#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "feddr/feddr.hpp"
#include "feddr/numerics.hpp"
#include "feddr/rng.hpp"
#include "feddr/trace.hpp"

namespace feddr {

enum class BaselineKind { fedavg, fedprox };

struct BaselineConfig {
  BaselineKind algorithm = BaselineKind::fedavg;
  std::size_t local_epochs = 20;
  double local_lr = 0.01;
  std::size_t batch_size = 10;
  double mu = 0.0;
  SamplingScheme sampling;
  bool operator==(const BaselineConfig&) const = default;
};

// Zero local epochs leave the global model unchanged.
Vec fedavg_round(std::span<const double> global, const Problem& problem,
                 const BaselineConfig& cfg, std::uint64_t seed, std::size_t round,
                 std::span<const std::size_t> participants);
Vec fedprox_round(std::span<const double> global, const Problem& problem,
                  const BaselineConfig& cfg, std::uint64_t seed, std::size_t round,
                  std::span<const std::size_t> participants);

struct BaselineRun {
  BaselineConfig baseline;
  std::size_t rounds = 100;
  std::uint64_t seed = 0;
  Vec x0;
  // Step used for the reported gradient mapping (g = 0, so it is ∇f).
  double eta = 1.0;
};

Trace run_baseline(const Problem& problem, const BaselineRun& run);

}  // namespace feddr
