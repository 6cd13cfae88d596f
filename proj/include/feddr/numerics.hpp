#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace feddr {

using Vec = std::vector<double>;

struct Dataset {
  std::size_t num_features = 0;
  std::size_t num_classes = 0;
  std::vector<double> features;  // row-major, size() x num_features
  std::vector<int> labels;

  std::size_t size() const noexcept { return labels.size(); }
  std::span<const double> row(std::size_t i) const {
    return {features.data() + i * num_features, num_features};
  }
};

enum class LossKind { quadratic, softmax_regression, tiny_mlp };

std::string_view loss_kind_name(LossKind kind) noexcept;

// f(x) = ½ Σ_j h_j (x_j − a_j)². With h = 1 this is ½‖x − a‖².
struct QuadraticLoss {
  Vec center;
  Vec curvature;
};

// Mean cross-entropy of softmax(W x) with W stored row-major (classes x features).
struct SoftmaxLoss {
  Dataset data;
};

// One tanh hidden layer followed by softmax. Parameters are packed as
// [W1 (hidden x features), b1 (hidden), W2 (classes x hidden), b2 (classes)].
struct MlpLoss {
  Dataset data;
  std::size_t hidden = 0;
};

class LossModel {
 public:
  static LossModel quadratic(Vec center, Vec curvature = {});
  static LossModel softmax_regression(Dataset data);
  static LossModel tiny_mlp(Dataset data, std::size_t hidden, double lipschitz);

  LossKind kind() const noexcept { return kind_; }
  std::size_t dim() const noexcept { return dim_; }
  double lipschitz() const noexcept { return lipschitz_; }
  bool lipschitz_certified() const noexcept { return kind_ != LossKind::tiny_mlp; }

  // Samples available to minibatch solvers. A quadratic counts as one sample.
  std::size_t num_samples() const noexcept;
  const Dataset* data() const noexcept;
  const QuadraticLoss* as_quadratic() const noexcept;

  double value(std::span<const double> params) const;
  void gradient(std::span<const double> params, std::span<double> out) const;
  // Mean gradient over the listed samples.
  void batch_gradient(std::span<const double> params, std::span<const std::size_t> samples,
                      std::span<double> out) const;
  // Fraction of correctly classified samples; nullopt for quadratics.
  std::optional<double> accuracy(std::span<const double> params) const;
  // Exact prox_{ηf}(y) when a closed form exists.
  std::optional<Vec> closed_form_prox(std::span<const double> y, double eta) const;

 private:
  LossKind kind_ = LossKind::quadratic;
  std::size_t dim_ = 0;
  double lipschitz_ = 1.0;
  std::shared_ptr<const QuadraticLoss> quad_;
  std::shared_ptr<const SoftmaxLoss> softmax_;
  std::shared_ptr<const MlpLoss> mlp_;
};

double eval_loss(const LossModel& model, std::span<const double> params);
Vec eval_grad(const LossModel& model, std::span<const double> params);

// (1/2)·1.05·λ_max(XᵀX/m) for softmax, exact curvature bound for quadratics.
double lipschitz_bound(const LossModel& model);
double softmax_lipschitz_estimate(const Dataset& data);

enum class RegKind { zero, l1 };

struct Regularizer {
  RegKind kind = RegKind::zero;
  double weight = 0.0;

  static Regularizer zero() { return {}; }
  static Regularizer l1(double weight);
  double value(std::span<const double> x) const;
  bool operator==(const Regularizer&) const = default;
};

Vec prox_g(std::span<const double> y, double eta, const Regularizer& reg);
void prox_g_into(std::span<const double> y, double eta, const Regularizer& reg, std::span<double> out);

struct ProxResult {
  Vec point;
  std::optional<double> certified_accuracy;  // nullopt: uncertified
  std::size_t inner_iterations = 0;
};

struct CertifiedProxOptions {
  std::size_t max_iterations = 100000;
  std::optional<Vec> warm_start;  // defaults to y
};

ProxResult prox_f_certified(const LossModel& model, std::span<const double> y, double eta,
                            double eps, const CertifiedProxOptions& options = {});

// Stops once the certified distance to the true prox is at most
// sqrt(theta)·‖z − anchor‖, or when gradient descent can no longer move z.
ProxResult prox_f_relative(const LossModel& model, std::span<const double> y, double eta,
                           std::span<const double> anchor, double theta,
                           const CertifiedProxOptions& options = {});

struct SgdOptions {
  std::size_t epochs = 20;
  double lr = 0.01;
  std::size_t batch_size = 10;
  bool operator==(const SgdOptions&) const = default;
};

// Minibatch SGD on f(z) + (w/2)‖z − anchor‖² from `start`. Shared by the
// heuristic prox (w = 1/η) and the FedAvg/FedProx local solvers.
Vec sgd_minimize(const LossModel& model, std::span<const double> start,
                 std::span<const double> anchor, double anchor_weight, const SgdOptions& options,
                 std::uint64_t seed);

ProxResult prox_f_heuristic(const LossModel& model, std::span<const double> y, double eta,
                            const SgdOptions& options, std::uint64_t seed);

struct Problem {
  std::vector<LossModel> users;
  Regularizer reg;

  std::size_t num_users() const noexcept { return users.size(); }
  std::size_t dim() const;
  double lipschitz() const;  // max over users
  double smooth_value(std::span<const double> x) const;
  double value(std::span<const double> x) const;
  Vec smooth_gradient(std::span<const double> x) const;
  std::optional<double> accuracy(std::span<const double> x) const;
};

Vec grad_mapping(const Problem& problem, std::span<const double> x, double eta);

}  // namespace feddr
