#include "feddr/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>

#include "feddr/errors.hpp"
#include "feddr/rng.hpp"

namespace feddr {

namespace {

struct Generator {
  std::vector<double> W;  // classes x dim
  std::vector<double> b;
  std::vector<double> mean;
};

Generator draw_generator(const SyntheticSpec& spec, double w_mean, double b_mean,
                         double feature_center, Rng& rng) {
  std::normal_distribution<double> unit(0.0, 1.0);
  Generator g;
  g.W.resize(spec.classes * spec.dim);
  for (double& w : g.W) w = w_mean + unit(rng);
  g.b.resize(spec.classes);
  for (double& v : g.b) v = b_mean + unit(rng);
  g.mean.resize(spec.dim);
  for (double& v : g.mean) v = feature_center + unit(rng);
  return g;
}

}  // namespace

FederatedData gen_synthetic(const SyntheticSpec& spec) {
  if (!(spec.r >= 0.0) || !(spec.s >= 0.0)) throw InvalidArgument("synthetic r and s must be >= 0");
  if (spec.users == 0 || spec.dim == 0 || spec.classes < 2)
    throw InvalidArgument("synthetic data needs users >= 1, dim >= 1, classes >= 2");
  if (spec.samples_min < 2 || spec.samples_max < spec.samples_min)
    throw InvalidArgument("samples-per-user range must satisfy 2 <= min <= max");
  if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0))
    throw InvalidArgument("train fraction must lie in (0, 1)");

  std::vector<double> sd(spec.dim);
  for (std::size_t j = 0; j < spec.dim; ++j)
    sd[j] = std::pow(static_cast<double>(j + 1), -spec.cov_exponent / 2.0);

  Generator shared;
  if (spec.iid) {
    Rng rng = make_rng(spec.seed, Stream::data, {~0ULL});
    shared = draw_generator(spec, 0.0, 0.0, 0.0, rng);
  }

  FederatedData out;
  out.num_features = spec.dim + (spec.intercept ? 1 : 0);
  out.num_classes = spec.classes;
  for (std::size_t i = 0; i < spec.users; ++i) {
    Rng rng = make_rng(spec.seed, Stream::data, {i});
    std::normal_distribution<double> unit(0.0, 1.0);
    Generator local;
    if (!spec.iid) {
      const double u = spec.r * unit(rng);
      const double bm = spec.r * unit(rng);
      const double B = spec.s * unit(rng);
      local = draw_generator(spec, u, bm, B, rng);
    }
    const Generator& gen = spec.iid ? shared : local;
    const std::size_t m =
        std::uniform_int_distribution<std::size_t>(spec.samples_min, spec.samples_max)(rng);
    const std::size_t m_train = std::clamp<std::size_t>(
        static_cast<std::size_t>(std::lround(spec.train_fraction * static_cast<double>(m))), 1, m - 1);

    UserData user;
    for (Dataset* d : {&user.train, &user.test}) {
      d->num_features = out.num_features;
      d->num_classes = spec.classes;
    }
    std::vector<double> x(spec.dim), logits(spec.classes);
    for (std::size_t t = 0; t < m; ++t) {
      for (std::size_t j = 0; j < spec.dim; ++j) x[j] = gen.mean[j] + sd[j] * unit(rng);
      for (std::size_t c = 0; c < spec.classes; ++c) {
        double z = gen.b[c];
        for (std::size_t j = 0; j < spec.dim; ++j) z += gen.W[c * spec.dim + j] * x[j];
        logits[c] = z;
      }
      const int label = static_cast<int>(std::max_element(logits.begin(), logits.end()) - logits.begin());
      Dataset& d = t < m_train ? user.train : user.test;
      d.features.insert(d.features.end(), x.begin(), x.end());
      if (spec.intercept) d.features.push_back(1.0);
      d.labels.push_back(label);
    }
    out.users.push_back(std::move(user));
  }
  return out;
}

std::string serialize_dataset(const FederatedData& data) {
  std::string out = fmt::format("# users={} features={} classes={}\n", data.users.size(),
                                data.num_features, data.num_classes);
  for (std::size_t i = 0; i < data.users.size(); ++i) {
    for (int split = 0; split < 2; ++split) {
      const Dataset& d = split == 0 ? data.users[i].train : data.users[i].test;
      for (std::size_t t = 0; t < d.size(); ++t) {
        out += fmt::format("{},{},{}", i, split == 0 ? "train" : "test", d.labels[t]);
        for (double v : d.row(t)) out += fmt::format(",{:.17g}", v);
        out += '\n';
      }
    }
  }
  return out;
}

}  // namespace feddr
