#include "feddr/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "feddr/errors.hpp"
#include "feddr/kernels.hpp"
#include "feddr/rng.hpp"

namespace feddr {

namespace {

void check_dim(std::size_t expected, std::size_t got) {
  if (expected != got) throw DimensionMismatch(expected, got);
}

void check_dataset(const Dataset& d) {
  if (d.size() == 0 || d.num_features == 0) throw InvalidArgument("loss model has empty data");
  if (d.features.size() != d.size() * d.num_features)
    throw InvalidArgument("feature matrix size does not match sample count");
  if (d.num_classes < 2) throw InvalidArgument("classification needs at least 2 classes");
  for (int y : d.labels)
    if (y < 0 || static_cast<std::size_t>(y) >= d.num_classes)
      throw InvalidArgument("label out of range: " + std::to_string(y));
}

// In-place softmax; returns log-sum-exp of the input.
double softmax_inplace(std::span<double> z) {
  const double m = *std::max_element(z.begin(), z.end());
  double s = 0.0;
  for (double& v : z) {
    v = std::exp(v - m);
    s += v;
  }
  for (double& v : z) v /= s;
  return m + std::log(s);
}

// ---- softmax regression -------------------------------------------------

double softmax_sample(const Dataset& d, std::span<const double> w, std::size_t i,
                      std::span<double> probs) {
  const auto x = d.row(i);
  const std::size_t f = d.num_features;
  for (std::size_t c = 0; c < d.num_classes; ++c)
    probs[c] = kernels::dot(w.subspan(c * f, f), x);
  const double label_logit = probs[d.labels[i]];
  return softmax_inplace(probs) - label_logit;
}

template <class Indices>
double softmax_accumulate(const Dataset& d, std::span<const double> w, const Indices& idx,
                          std::span<double> grad) {
  const std::size_t f = d.num_features;
  Vec probs(d.num_classes);
  double loss = 0.0;
  if (!grad.empty()) std::fill(grad.begin(), grad.end(), 0.0);
  std::size_t count = 0;
  for (std::size_t i : idx) {
    loss += softmax_sample(d, w, i, probs);
    ++count;
    if (grad.empty()) continue;
    probs[d.labels[i]] -= 1.0;
    const auto x = d.row(i);
    for (std::size_t c = 0; c < d.num_classes; ++c)
      kernels::axpy(probs[c], x, grad.subspan(c * f, f));
  }
  const double inv = 1.0 / static_cast<double>(count);
  for (double& g : grad) g *= inv;
  return loss * inv;
}

// ---- tiny mlp -------------------------------------------------------------

struct MlpLayout {
  std::size_t f, h, c;
  std::size_t w1() const { return 0; }
  std::size_t b1() const { return h * f; }
  std::size_t w2() const { return h * f + h; }
  std::size_t b2() const { return h * f + h + c * h; }
  std::size_t size() const { return h * f + h + c * h + c; }
};

template <class Indices>
double mlp_accumulate(const MlpLoss& m, std::span<const double> w, const Indices& idx,
                      std::span<double> grad, std::size_t* correct = nullptr) {
  const Dataset& d = m.data;
  const MlpLayout L{d.num_features, m.hidden, d.num_classes};
  Vec hid(L.h), probs(L.c), dh(L.h);
  if (!grad.empty()) std::fill(grad.begin(), grad.end(), 0.0);
  double loss = 0.0;
  std::size_t count = 0;
  for (std::size_t i : idx) {
    const auto x = d.row(i);
    for (std::size_t j = 0; j < L.h; ++j)
      hid[j] = std::tanh(kernels::dot(w.subspan(L.w1() + j * L.f, L.f), x) + w[L.b1() + j]);
    for (std::size_t c = 0; c < L.c; ++c)
      probs[c] = kernels::dot(w.subspan(L.w2() + c * L.h, L.h), hid) + w[L.b2() + c];
    if (correct) {
      const auto best = std::max_element(probs.begin(), probs.end()) - probs.begin();
      if (best == d.labels[i]) ++*correct;
    }
    const double label_logit = probs[d.labels[i]];
    loss += softmax_inplace(probs) - label_logit;
    ++count;
    if (grad.empty()) continue;
    probs[d.labels[i]] -= 1.0;
    std::fill(dh.begin(), dh.end(), 0.0);
    for (std::size_t c = 0; c < L.c; ++c) {
      kernels::axpy(probs[c], hid, grad.subspan(L.w2() + c * L.h, L.h));
      grad[L.b2() + c] += probs[c];
      kernels::axpy(probs[c], w.subspan(L.w2() + c * L.h, L.h), dh);
    }
    for (std::size_t j = 0; j < L.h; ++j) {
      const double dz = dh[j] * (1.0 - hid[j] * hid[j]);
      kernels::axpy(dz, x, grad.subspan(L.w1() + j * L.f, L.f));
      grad[L.b1() + j] += dz;
    }
  }
  const double inv = 1.0 / static_cast<double>(count);
  for (double& g : grad) g *= inv;
  return loss * inv;
}

struct AllSamples {
  std::size_t n;
  struct It {
    std::size_t i;
    std::size_t operator*() const { return i; }
    It& operator++() { ++i; return *this; }
    bool operator!=(const It& o) const { return i != o.i; }
  };
  It begin() const { return {0}; }
  It end() const { return {n}; }
};

void require_finite(std::span<const double> v, const char* what) {
  for (double x : v)
    if (!std::isfinite(x)) throw NonFiniteValue(std::string("non-finite ") + what);
}

}  // namespace

std::string_view loss_kind_name(LossKind kind) noexcept {
  switch (kind) {
    case LossKind::quadratic: return "quadratic";
    case LossKind::softmax_regression: return "softmax";
    case LossKind::tiny_mlp: return "tiny-mlp";
  }
  return "?";
}

LossModel LossModel::quadratic(Vec center, Vec curvature) {
  if (center.empty()) throw InvalidArgument("quadratic center must be non-empty");
  if (curvature.empty()) curvature.assign(center.size(), 1.0);
  check_dim(center.size(), curvature.size());
  LossModel m;
  m.kind_ = LossKind::quadratic;
  m.dim_ = center.size();
  double l = 0.0;
  for (double h : curvature) l = std::max(l, std::fabs(h));
  if (!(l > 0.0)) throw InvalidArgument("quadratic curvature must be non-zero");
  m.lipschitz_ = l;
  m.quad_ = std::make_shared<QuadraticLoss>(QuadraticLoss{std::move(center), std::move(curvature)});
  return m;
}

LossModel LossModel::softmax_regression(Dataset data) {
  check_dataset(data);
  LossModel m;
  m.kind_ = LossKind::softmax_regression;
  m.dim_ = data.num_features * data.num_classes;
  m.lipschitz_ = softmax_lipschitz_estimate(data);
  m.softmax_ = std::make_shared<SoftmaxLoss>(SoftmaxLoss{std::move(data)});
  return m;
}

LossModel LossModel::tiny_mlp(Dataset data, std::size_t hidden, double lipschitz) {
  check_dataset(data);
  if (hidden == 0) throw InvalidArgument("tiny-mlp needs at least one hidden unit");
  if (!(lipschitz > 0.0)) throw InvalidArgument("tiny-mlp needs a positive Lipschitz constant");
  LossModel m;
  m.kind_ = LossKind::tiny_mlp;
  m.dim_ = MlpLayout{data.num_features, hidden, data.num_classes}.size();
  m.lipschitz_ = lipschitz;
  m.mlp_ = std::make_shared<MlpLoss>(MlpLoss{std::move(data), hidden});
  return m;
}

std::size_t LossModel::num_samples() const noexcept {
  if (softmax_) return softmax_->data.size();
  if (mlp_) return mlp_->data.size();
  return 1;
}

const Dataset* LossModel::data() const noexcept {
  if (softmax_) return &softmax_->data;
  if (mlp_) return &mlp_->data;
  return nullptr;
}

const QuadraticLoss* LossModel::as_quadratic() const noexcept { return quad_.get(); }

double LossModel::value(std::span<const double> x) const {
  check_dim(dim_, x.size());
  switch (kind_) {
    case LossKind::quadratic: {
      double s = 0.0;
      for (std::size_t j = 0; j < dim_; ++j) {
        const double d = x[j] - quad_->center[j];
        s += quad_->curvature[j] * d * d;
      }
      return 0.5 * s;
    }
    case LossKind::softmax_regression:
      return softmax_accumulate(softmax_->data, x, AllSamples{num_samples()}, {});
    case LossKind::tiny_mlp:
      return mlp_accumulate(*mlp_, x, AllSamples{num_samples()}, {});
  }
  return 0.0;
}

void LossModel::gradient(std::span<const double> x, std::span<double> out) const {
  check_dim(dim_, x.size());
  check_dim(dim_, out.size());
  switch (kind_) {
    case LossKind::quadratic:
      for (std::size_t j = 0; j < dim_; ++j)
        out[j] = quad_->curvature[j] * (x[j] - quad_->center[j]);
      return;
    case LossKind::softmax_regression:
      softmax_accumulate(softmax_->data, x, AllSamples{num_samples()}, out);
      return;
    case LossKind::tiny_mlp:
      mlp_accumulate(*mlp_, x, AllSamples{num_samples()}, out);
      return;
  }
}

void LossModel::batch_gradient(std::span<const double> x, std::span<const std::size_t> samples,
                               std::span<double> out) const {
  check_dim(dim_, x.size());
  check_dim(dim_, out.size());
  if (samples.empty()) throw InvalidArgument("empty minibatch");
  switch (kind_) {
    case LossKind::quadratic: gradient(x, out); return;
    case LossKind::softmax_regression: softmax_accumulate(softmax_->data, x, samples, out); return;
    case LossKind::tiny_mlp: mlp_accumulate(*mlp_, x, samples, out); return;
  }
}

std::optional<double> LossModel::accuracy(std::span<const double> x) const {
  check_dim(dim_, x.size());
  if (kind_ == LossKind::quadratic) return std::nullopt;
  std::size_t correct = 0;
  const Dataset* d = data();
  if (kind_ == LossKind::tiny_mlp) {
    mlp_accumulate(*mlp_, x, AllSamples{d->size()}, {}, &correct);
  } else {
    const std::size_t f = d->num_features;
    for (std::size_t i = 0; i < d->size(); ++i) {
      std::size_t best = 0;
      double best_v = -INFINITY;
      for (std::size_t c = 0; c < d->num_classes; ++c) {
        const double v = kernels::dot(x.subspan(c * f, f), d->row(i));
        if (v > best_v) { best_v = v; best = c; }
      }
      if (static_cast<int>(best) == d->labels[i]) ++correct;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(d->size());
}

std::optional<Vec> LossModel::closed_form_prox(std::span<const double> y, double eta) const {
  check_dim(dim_, y.size());
  if (kind_ != LossKind::quadratic) return std::nullopt;
  if (!(eta > 0.0)) throw PreconditionViolation("prox needs eta > 0");
  Vec z(dim_);
  for (std::size_t j = 0; j < dim_; ++j) {
    const double h = quad_->curvature[j];
    const double denom = 1.0 + eta * h;
    if (!(denom > 0.0))
      throw PreconditionViolation("prox subproblem is not strongly convex: 1 + eta*h <= 0");
    z[j] = (y[j] + eta * h * quad_->center[j]) / denom;
  }
  return z;
}

double eval_loss(const LossModel& model, std::span<const double> params) {
  return model.value(params);
}

Vec eval_grad(const LossModel& model, std::span<const double> params) {
  Vec g(model.dim());
  model.gradient(params, g);
  return g;
}

double softmax_lipschitz_estimate(const Dataset& d) {
  if (d.size() == 0 || d.num_features == 0) throw InvalidArgument("loss model has empty data");
  const std::size_t f = d.num_features;
  const double inv_m = 1.0 / static_cast<double>(d.size());
  Rng rng(0x5eedULL);
  std::uniform_real_distribution<double> unif(0.5, 1.5);
  Vec v(f), w(f);
  for (double& x : v) x = unif(rng);
  double lambda = 0.0;
  for (int it = 0; it < 10000; ++it) {
    const double vn = std::sqrt(kernels::sq_norm(v));
    if (vn == 0.0) break;
    for (double& x : v) x /= vn;
    std::fill(w.begin(), w.end(), 0.0);
    for (std::size_t i = 0; i < d.size(); ++i)
      kernels::axpy(kernels::dot(d.row(i), v) * inv_m, d.row(i), w);
    const double next = kernels::dot(v, w);
    v.swap(w);
    if (std::fabs(next - lambda) <= 1e-13 * std::fabs(next)) {
      lambda = next;
      break;
    }
    lambda = next;
  }
  return std::max(0.5 * 1.05 * lambda, 1e-12);
}

double lipschitz_bound(const LossModel& model) {
  if (model.kind() == LossKind::softmax_regression) return softmax_lipschitz_estimate(*model.data());
  return model.lipschitz();
}

Regularizer Regularizer::l1(double weight) {
  if (!(weight >= 0.0)) throw InvalidArgument("l1 weight must be nonnegative");
  return {RegKind::l1, weight};
}

double Regularizer::value(std::span<const double> x) const {
  if (kind == RegKind::zero) return 0.0;
  double s = 0.0;
  for (double v : x) s += std::fabs(v);
  return weight * s;
}

void prox_g_into(std::span<const double> y, double eta, const Regularizer& reg,
                 std::span<double> out) {
  check_dim(y.size(), out.size());
  if (!(eta > 0.0)) throw PreconditionViolation("prox_g needs eta > 0");
  if (reg.kind == RegKind::zero || reg.weight == 0.0) {
    std::copy(y.begin(), y.end(), out.begin());
    return;
  }
  kernels::soft_threshold(y, eta * reg.weight, out);
}

Vec prox_g(std::span<const double> y, double eta, const Regularizer& reg) {
  Vec out(y.size());
  prox_g_into(y, eta, reg, out);
  return out;
}

namespace {

enum class StopKind { absolute, relative };

ProxResult certified_descent(const LossModel& model, std::span<const double> y, double eta,
                             StopKind kind, double eps, std::span<const double> anchor,
                             const CertifiedProxOptions& opt) {
  const double L = model.lipschitz();
  if (!(eta > 0.0) || !(eta * L < 1.0))
    throw PreconditionViolation("certified prox needs 0 < eta < 1/L (eta=" + std::to_string(eta) +
                                ", L=" + std::to_string(L) + ")");
  const double mu = 1.0 / eta - L;
  const double step = 1.0 / (L + 1.0 / eta);
  const std::size_t p = model.dim();
  Vec z = opt.warm_start ? *opt.warm_start : Vec(y.begin(), y.end());
  check_dim(p, z.size());
  Vec g(p), best = z;
  double best_acc = INFINITY;
  std::size_t since_improved = 0;
  for (std::size_t it = 0;; ++it) {
    model.gradient(z, g);
    for (std::size_t j = 0; j < p; ++j) g[j] += (z[j] - y[j]) / eta;
    const double acc = std::sqrt(kernels::sq_norm(g)) / mu;
    if (!std::isfinite(acc)) throw Divergence("certified prox produced a non-finite gradient");
    if (acc < best_acc) {
      best_acc = acc;
      best = z;
      since_improved = 0;
    } else {
      ++since_improved;
    }
    const double target =
        kind == StopKind::absolute ? eps : std::sqrt(eps) * std::sqrt(kernels::sq_dist(z, anchor));
    if (acc <= target) return {z, acc, it};
    // Rounding floor reached: only an exact request may settle here.
    const bool stalled = since_improved >= 50 || acc == 0.0;
    if (stalled && (kind == StopKind::relative || eps == 0.0)) return {best, best_acc, it};
    if (it >= opt.max_iterations || stalled)
      throw NonConvergence("certified prox did not reach the requested accuracy after " +
                               std::to_string(it) + " iterations",
                           best, best_acc);
    kernels::axpy(-step, g, z);
  }
}

}  // namespace

ProxResult prox_f_certified(const LossModel& model, std::span<const double> y, double eta,
                            double eps, const CertifiedProxOptions& options) {
  check_dim(model.dim(), y.size());
  if (!(eps >= 0.0)) throw InvalidArgument("prox accuracy must be nonnegative");
  if (eps == 0.0)
    if (auto z = model.closed_form_prox(y, eta)) return {std::move(*z), 0.0, 0};
  return certified_descent(model, y, eta, StopKind::absolute, eps, {}, options);
}

ProxResult prox_f_relative(const LossModel& model, std::span<const double> y, double eta,
                           std::span<const double> anchor, double theta,
                           const CertifiedProxOptions& options) {
  check_dim(model.dim(), y.size());
  check_dim(model.dim(), anchor.size());
  if (!(theta >= 0.0)) throw InvalidArgument("relative accuracy must be nonnegative");
  if (theta == 0.0) return prox_f_certified(model, y, eta, 0.0, options);
  return certified_descent(model, y, eta, StopKind::relative, theta, anchor, options);
}

Vec sgd_minimize(const LossModel& model, std::span<const double> start,
                 std::span<const double> anchor, double anchor_weight, const SgdOptions& opt,
                 std::uint64_t seed) {
  check_dim(model.dim(), start.size());
  check_dim(model.dim(), anchor.size());
  if (opt.epochs < 1) throw InvalidArgument("local solver needs at least one epoch");
  if (!(opt.lr > 0.0)) throw InvalidArgument("local solver needs lr > 0");
  if (opt.batch_size < 1) throw InvalidArgument("local solver needs batch size >= 1");
  Rng rng(seed);
  const std::size_t m = model.num_samples();
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  Vec z(start.begin(), start.end()), g(z.size());
  for (std::size_t e = 0; e < opt.epochs; ++e) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t b = 0; b < m; b += opt.batch_size) {
      const std::size_t len = std::min(opt.batch_size, m - b);
      model.batch_gradient(z, std::span<const std::size_t>(order).subspan(b, len), g);
      if (anchor_weight > 0.0)
        for (std::size_t j = 0; j < z.size(); ++j) g[j] += anchor_weight * (z[j] - anchor[j]);
      kernels::axpy(-opt.lr, g, z);
    }
    for (double v : z)
      if (!std::isfinite(v))
        throw Divergence("local SGD diverged with lr=" + std::to_string(opt.lr));
  }
  return z;
}

ProxResult prox_f_heuristic(const LossModel& model, std::span<const double> y, double eta,
                            const SgdOptions& options, std::uint64_t seed) {
  if (!(eta > 0.0)) throw PreconditionViolation("prox needs eta > 0");
  Vec z = sgd_minimize(model, y, y, 1.0 / eta, options, seed);
  const std::size_t m = model.num_samples();
  const std::size_t batches = (m + options.batch_size - 1) / options.batch_size;
  return {std::move(z), std::nullopt, options.epochs * batches};
}

std::size_t Problem::dim() const {
  if (users.empty()) throw InvalidArgument("problem has no users");
  return users.front().dim();
}

double Problem::lipschitz() const {
  double l = 0.0;
  for (const auto& u : users) l = std::max(l, u.lipschitz());
  return l;
}

double Problem::smooth_value(std::span<const double> x) const {
  double s = 0.0;
  for (const auto& u : users) s += u.value(x);
  return s / static_cast<double>(users.size());
}

double Problem::value(std::span<const double> x) const { return smooth_value(x) + reg.value(x); }

Vec Problem::smooth_gradient(std::span<const double> x) const {
  const std::size_t p = dim();
  check_dim(p, x.size());
  Vec total(p, 0.0), g(p);
  for (const auto& u : users) {
    u.gradient(x, g);
    kernels::axpy(1.0, g, total);
  }
  const double inv = 1.0 / static_cast<double>(users.size());
  for (double& v : total) v *= inv;
  return total;
}

std::optional<double> Problem::accuracy(std::span<const double> x) const {
  double correct = 0.0, total = 0.0;
  for (const auto& u : users) {
    const auto a = u.accuracy(x);
    if (!a) return std::nullopt;
    const double m = static_cast<double>(u.num_samples());
    correct += *a * m;
    total += m;
  }
  return correct / total;
}

Vec grad_mapping(const Problem& problem, std::span<const double> x, double eta) {
  if (!(eta > 0.0)) throw PreconditionViolation("gradient mapping needs eta > 0");
  require_finite(x, "point in gradient mapping");
  const Vec g = problem.smooth_gradient(x);
  Vec u(x.begin(), x.end());
  kernels::axpy(-eta, g, u);
  const Vec p = prox_g(u, eta, problem.reg);
  Vec out(x.size());
  for (std::size_t j = 0; j < x.size(); ++j) out[j] = (x[j] - p[j]) / eta;
  return out;
}

}  // namespace feddr
