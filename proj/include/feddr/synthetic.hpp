#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "feddr/numerics.hpp"

namespace feddr {

struct SyntheticSpec {
  double r = 1.0;  // spread of the per-user model means
  double s = 1.0;  // spread of the per-user feature means
  std::size_t users = 30;
  std::size_t dim = 60;
  std::size_t classes = 10;
  std::size_t samples_min = 50;
  std::size_t samples_max = 150;
  bool iid = false;
  bool intercept = true;  // append a constant feature
  double cov_exponent = 1.2;
  double train_fraction = 0.8;
  std::uint64_t seed = 0;
  bool operator==(const SyntheticSpec&) const = default;
};

struct UserData {
  Dataset train;
  Dataset test;
};

struct FederatedData {
  std::vector<UserData> users;
  std::size_t num_features = 0;
  std::size_t num_classes = 0;
};

FederatedData gen_synthetic(const SyntheticSpec& spec);

// One line per sample: user,split,label,features... with 17 significant digits.
std::string serialize_dataset(const FederatedData& data);

}  // namespace feddr
