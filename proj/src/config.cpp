#include "feddr/config.hpp"

#include <yaml-cpp/yaml.h>

#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "feddr/errors.hpp"

namespace feddr {

namespace {

[[noreturn]] void fail(const YAML::Node& node, const std::string& field, const std::string& msg) {
  const auto mark = node.Mark();
  std::string where = mark.line >= 0 ? "line " + std::to_string(mark.line + 1) + ": " : "";
  throw ConfigError(where + "field '" + field + "': " + msg);
}

template <class E>
E parse_enum(const YAML::Node& node, const std::string& field,
             const std::map<std::string, E>& choices) {
  const std::string v = node.as<std::string>();
  const auto it = choices.find(v);
  if (it != choices.end()) return it->second;
  std::string list;
  for (const auto& [k, _] : choices) list += (list.empty() ? "" : ", ") + k;
  fail(node, field, "unknown value '" + v + "' (expected one of: " + list + ")");
}

template <class E>
std::string enum_name(E value, const std::map<std::string, E>& choices) {
  for (const auto& [k, v] : choices)
    if (v == value) return k;
  return "?";
}

const std::map<std::string, Algorithm> kAlgorithms{{"feddr", Algorithm::feddr},
                                                   {"asyncfeddr", Algorithm::asyncfeddr},
                                                   {"fedavg", Algorithm::fedavg},
                                                   {"fedprox", Algorithm::fedprox},
                                                   {"fedsplit", Algorithm::fedsplit}};
const std::map<std::string, LossKind> kLosses{{"quadratic", LossKind::quadratic},
                                              {"softmax", LossKind::softmax_regression},
                                              {"tiny-mlp", LossKind::tiny_mlp}};
const std::map<std::string, RegKind> kRegs{{"zero", RegKind::zero}, {"l1", RegKind::l1}};
const std::map<std::string, AccuracyKind> kAccuracy{{"exact", AccuracyKind::exact},
                                                    {"absolute", AccuracyKind::absolute},
                                                    {"relative", AccuracyKind::relative}};
const std::map<std::string, ProxMode> kProx{{"certified", ProxMode::certified},
                                            {"heuristic", ProxMode::heuristic}};
const std::map<std::string, SamplingKind> kSampling{{"full", SamplingKind::full},
                                                    {"uniform", SamplingKind::uniform_subset},
                                                    {"bernoulli", SamplingKind::bernoulli}};
const std::map<std::string, ComputeDist> kDists{{"deterministic", ComputeDist::deterministic},
                                                {"uniform", ComputeDist::uniform},
                                                {"lognormal", ComputeDist::lognormal}};
const std::map<std::string, VtildeWeight> kWeights{{"one", VtildeWeight::one_over_n_eta},
                                                   {"tau", VtildeWeight::tau_over_n_eta}};

// A mapping section that remembers which keys were consumed so that
// leftovers can be reported as unknown fields.
class Section {
 public:
  Section(YAML::Node node, std::string path) : node_(std::move(node)), path_(std::move(path)) {
    if (node_ && !node_.IsNull() && !node_.IsMap()) fail(node_, path_, "expected a mapping");
  }

  template <class T>
  void read(const std::string& key, T& out) {
    if (auto n = take(key)) {
      try {
        out = n.as<T>();
      } catch (const YAML::BadConversion&) {
        fail(n, field(key), "wrong type");
      }
    }
  }

  template <class T>
  void read(const std::string& key, std::optional<T>& out) {
    if (auto n = take(key)) {
      T v{};
      try {
        v = n.as<T>();
      } catch (const YAML::BadConversion&) {
        fail(n, field(key), "wrong type");
      }
      out = v;
    }
  }

  template <class E>
  void read_enum(const std::string& key, E& out, const std::map<std::string, E>& choices) {
    if (auto n = take(key)) out = parse_enum(n, field(key), choices);
  }

  Section child(const std::string& key) { return Section(take(key), field(key)); }

  YAML::Node take(const std::string& key) {
    seen_.insert(key);
    if (!node_ || !node_.IsMap()) return YAML::Node(YAML::NodeType::Undefined);
    YAML::Node n = node_[key];
    return n;
  }

  std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  const YAML::Node& node() const { return node_; }

  void finish() const {
    if (!node_ || !node_.IsMap()) return;
    for (const auto& kv : node_) {
      const std::string key = kv.first.as<std::string>();
      if (!seen_.count(key)) fail(kv.first, field(key), "unknown field");
    }
  }

 private:
  YAML::Node node_;
  std::string path_;
  std::set<std::string> seen_;
};

void require(bool ok, const YAML::Node& node, const std::string& field, const std::string& msg) {
  if (!ok) fail(node, field, msg);
}

}  // namespace

std::string_view algorithm_name(Algorithm a) noexcept {
  switch (a) {
    case Algorithm::feddr: return "feddr";
    case Algorithm::asyncfeddr: return "asyncfeddr";
    case Algorithm::fedavg: return "fedavg";
    case Algorithm::fedprox: return "fedprox";
    case Algorithm::fedsplit: return "fedsplit";
  }
  return "?";
}

ExperimentConfig parse_config(const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ConfigError("line " + std::to_string(e.mark.line + 1) + ": " + e.msg);
  }
  ExperimentConfig c;
  Section top(root, "");
  top.read("name", c.name);
  top.read_enum("algorithm", c.algorithm, kAlgorithms);
  top.read("rounds", c.rounds);
  top.read("seeds", c.seeds);
  require(!c.seeds.empty(), top.take("seeds"), "seeds", "must list at least one seed");

  {
    ProblemConfig& p = c.problem;
    Section s = top.child("problem");
    s.read_enum("loss", p.loss, kLosses);
    s.read("users", p.users);
    s.read("dim", p.dim);
    s.read("center_scale", p.center_scale);
    s.read("curvature_min", p.curvature_min);
    s.read("curvature_max", p.curvature_max);
    s.read("x0_scale", p.x0_scale);
    s.read("seed", p.seed);
    require(p.users >= 1, s.take("users"), s.field("users"), "must be >= 1");
    require(p.dim >= 1, s.take("dim"), s.field("dim"), "must be >= 1");
    require(p.curvature_min <= p.curvature_max, s.take("curvature_min"), s.field("curvature_min"),
            "must not exceed curvature_max");
    {
      Section r = s.child("regularizer");
      r.read_enum("kind", p.reg.kind, kRegs);
      r.read("weight", p.reg.weight);
      require(p.reg.weight >= 0.0, r.take("weight"), r.field("weight"), "must be >= 0");
      r.finish();
    }
    {
      SyntheticSpec& syn = p.synthetic;
      Section r = s.child("synthetic");
      r.read("r", syn.r);
      r.read("s", syn.s);
      r.read("classes", syn.classes);
      r.read("samples_min", syn.samples_min);
      r.read("samples_max", syn.samples_max);
      r.read("iid", syn.iid);
      r.read("intercept", syn.intercept);
      r.read("cov_exponent", syn.cov_exponent);
      r.read("train_fraction", syn.train_fraction);
      r.finish();
      syn.users = p.users;
      syn.dim = p.dim;
      syn.seed = 0;
    }
    {
      Section r = s.child("mlp");
      r.read("hidden", p.mlp_hidden);
      r.read("lipschitz", p.mlp_lipschitz);
      r.finish();
    }
    s.finish();
  }

  {
    HyperConfig& h = c.hyper;
    Section s = top.child("hyper");
    s.read("eta", h.eta);
    s.read("eta_times_L", h.eta_times_L);
    s.read("alpha", h.alpha);
    s.read("override_stepsize_check", h.override_stepsize_check);
    require(h.eta.has_value() != h.eta_times_L.has_value(), s.node(), s.field("eta"),
            "give exactly one of eta or eta_times_L");
    if (h.eta) require(*h.eta > 0.0, s.take("eta"), s.field("eta"), "must be > 0");
    if (h.eta_times_L)
      require(*h.eta_times_L > 0.0, s.take("eta_times_L"), s.field("eta_times_L"), "must be > 0");
    require(h.alpha > 0.0, s.take("alpha"), s.field("alpha"), "must be > 0");
    {
      Section r = s.child("accuracy");
      r.read_enum("kind", h.accuracy.kind, kAccuracy);
      r.read("parameter", h.accuracy.parameter);
      require(h.accuracy.parameter >= 0.0, r.take("parameter"), r.field("parameter"), "must be >= 0");
      r.finish();
    }
    {
      Section r = s.child("prox");
      r.read_enum("mode", h.prox_mode, kProx);
      r.read("epochs", h.heuristic.epochs);
      r.read("lr", h.heuristic.lr);
      r.read("batch", h.heuristic.batch_size);
      r.finish();
    }
    {
      Section r = s.child("sampling");
      r.read_enum("kind", h.sampling, kSampling);
      r.read("size", h.sample_size);
      r.read("probabilities", h.probabilities);
      if (h.sampling == SamplingKind::uniform_subset)
        require(h.sample_size >= 1 && h.sample_size <= c.problem.users, r.take("size"),
                r.field("size"), "must lie in [1, problem.users]");
      if (h.sampling == SamplingKind::bernoulli)
        require(h.probabilities.size() == c.problem.users, r.take("probabilities"),
                r.field("probabilities"), "needs one probability per user");
      r.finish();
    }
    if (auto g = s.take("gammas"); g) {
      Section r(g, s.field("gammas"));
      Gammas v;
      r.read("g1", v.g1);
      r.read("g2", v.g2);
      r.read("g3", v.g3);
      r.read("g4", v.g4);
      r.finish();
      h.gammas = v;
    }
    s.finish();
  }

  {
    AsyncSection& a = c.async;
    Section s = top.child("async");
    s.read("tau", a.delays.tau);
    s.read("idle", a.delays.idle);
    s.read("stall_tick", a.delays.stall_tick);
    s.read("user_scale", a.delays.user_scale);
    s.read("start_offset", a.delays.start_offset);
    s.read("stagger_step", a.stagger_step);
    s.read_enum("vtilde_weight", a.weight, kWeights);
    a.stagger = a.stagger_step > 0.0;
    {
      Section r = s.child("compute");
      r.read_enum("dist", a.delays.dist, kDists);
      r.read("a", a.delays.a);
      r.read("b", a.delays.b);
      r.finish();
    }
    if (!a.delays.user_scale.empty())
      require(a.delays.user_scale.size() == c.problem.users, s.take("user_scale"),
              s.field("user_scale"), "needs one factor per user");
    require(a.delays.stall_tick > 0.0, s.take("stall_tick"), s.field("stall_tick"), "must be > 0");
    s.finish();
  }

  {
    BaselineSection& b = c.baseline;
    Section s = top.child("baseline");
    s.read("local_epochs", b.local_epochs);
    s.read("local_lr", b.local_lr);
    s.read("batch", b.batch_size);
    s.read("mu", b.mu);
    require(b.mu >= 0.0, s.take("mu"), s.field("mu"), "must be >= 0");
    s.finish();
  }

  {
    Section s = top.child("trace");
    s.read("full_state", c.trace.full_state);
    s.read("output_dir", c.trace.output_dir);
    s.finish();
  }
  top.finish();

  if (c.algorithm == Algorithm::fedsplit && c.problem.reg.kind == RegKind::l1 &&
      c.problem.reg.weight != 0.0)
    fail(top.take("algorithm"), "algorithm", "fedsplit requires a zero regularizer");
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_config(ss.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

std::string emit_config(const ExperimentConfig& c) {
  YAML::Emitter out;
  out.SetDoublePrecision(17);
  out << YAML::BeginMap;
  out << YAML::Key << "name" << YAML::Value << c.name;
  out << YAML::Key << "algorithm" << YAML::Value << std::string(algorithm_name(c.algorithm));
  out << YAML::Key << "rounds" << YAML::Value << c.rounds;
  out << YAML::Key << "seeds" << YAML::Value << YAML::Flow << c.seeds;

  const ProblemConfig& p = c.problem;
  out << YAML::Key << "problem" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "loss" << YAML::Value << enum_name(p.loss, kLosses);
  out << YAML::Key << "users" << YAML::Value << p.users;
  out << YAML::Key << "dim" << YAML::Value << p.dim;
  out << YAML::Key << "center_scale" << YAML::Value << p.center_scale;
  out << YAML::Key << "curvature_min" << YAML::Value << p.curvature_min;
  out << YAML::Key << "curvature_max" << YAML::Value << p.curvature_max;
  out << YAML::Key << "x0_scale" << YAML::Value << p.x0_scale;
  if (p.seed) out << YAML::Key << "seed" << YAML::Value << *p.seed;
  out << YAML::Key << "regularizer" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "kind" << YAML::Value << enum_name(p.reg.kind, kRegs);
  out << YAML::Key << "weight" << YAML::Value << p.reg.weight;
  out << YAML::EndMap;
  out << YAML::Key << "synthetic" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "r" << YAML::Value << p.synthetic.r;
  out << YAML::Key << "s" << YAML::Value << p.synthetic.s;
  out << YAML::Key << "classes" << YAML::Value << p.synthetic.classes;
  out << YAML::Key << "samples_min" << YAML::Value << p.synthetic.samples_min;
  out << YAML::Key << "samples_max" << YAML::Value << p.synthetic.samples_max;
  out << YAML::Key << "iid" << YAML::Value << p.synthetic.iid;
  out << YAML::Key << "intercept" << YAML::Value << p.synthetic.intercept;
  out << YAML::Key << "cov_exponent" << YAML::Value << p.synthetic.cov_exponent;
  out << YAML::Key << "train_fraction" << YAML::Value << p.synthetic.train_fraction;
  out << YAML::EndMap;
  out << YAML::Key << "mlp" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "hidden" << YAML::Value << p.mlp_hidden;
  out << YAML::Key << "lipschitz" << YAML::Value << p.mlp_lipschitz;
  out << YAML::EndMap;
  out << YAML::EndMap;

  const HyperConfig& h = c.hyper;
  out << YAML::Key << "hyper" << YAML::Value << YAML::BeginMap;
  if (h.eta) out << YAML::Key << "eta" << YAML::Value << *h.eta;
  if (h.eta_times_L) out << YAML::Key << "eta_times_L" << YAML::Value << *h.eta_times_L;
  out << YAML::Key << "alpha" << YAML::Value << h.alpha;
  out << YAML::Key << "override_stepsize_check" << YAML::Value << h.override_stepsize_check;
  out << YAML::Key << "accuracy" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "kind" << YAML::Value << enum_name(h.accuracy.kind, kAccuracy);
  out << YAML::Key << "parameter" << YAML::Value << h.accuracy.parameter;
  out << YAML::EndMap;
  out << YAML::Key << "prox" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "mode" << YAML::Value << enum_name(h.prox_mode, kProx);
  out << YAML::Key << "epochs" << YAML::Value << h.heuristic.epochs;
  out << YAML::Key << "lr" << YAML::Value << h.heuristic.lr;
  out << YAML::Key << "batch" << YAML::Value << h.heuristic.batch_size;
  out << YAML::EndMap;
  out << YAML::Key << "sampling" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "kind" << YAML::Value << enum_name(h.sampling, kSampling);
  out << YAML::Key << "size" << YAML::Value << h.sample_size;
  out << YAML::Key << "probabilities" << YAML::Value << YAML::Flow << h.probabilities;
  out << YAML::EndMap;
  if (h.gammas) {
    out << YAML::Key << "gammas" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "g1" << YAML::Value << h.gammas->g1;
    out << YAML::Key << "g2" << YAML::Value << h.gammas->g2;
    out << YAML::Key << "g3" << YAML::Value << h.gammas->g3;
    out << YAML::Key << "g4" << YAML::Value << h.gammas->g4;
    out << YAML::EndMap;
  }
  out << YAML::EndMap;

  const AsyncSection& a = c.async;
  out << YAML::Key << "async" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "tau" << YAML::Value << a.delays.tau;
  out << YAML::Key << "idle" << YAML::Value << a.delays.idle;
  out << YAML::Key << "stall_tick" << YAML::Value << a.delays.stall_tick;
  out << YAML::Key << "user_scale" << YAML::Value << YAML::Flow << a.delays.user_scale;
  out << YAML::Key << "start_offset" << YAML::Value << YAML::Flow << a.delays.start_offset;
  out << YAML::Key << "stagger_step" << YAML::Value << a.stagger_step;
  out << YAML::Key << "vtilde_weight" << YAML::Value << enum_name(a.weight, kWeights);
  out << YAML::Key << "compute" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "dist" << YAML::Value << enum_name(a.delays.dist, kDists);
  out << YAML::Key << "a" << YAML::Value << a.delays.a;
  out << YAML::Key << "b" << YAML::Value << a.delays.b;
  out << YAML::EndMap;
  out << YAML::EndMap;

  const BaselineSection& b = c.baseline;
  out << YAML::Key << "baseline" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "local_epochs" << YAML::Value << b.local_epochs;
  out << YAML::Key << "local_lr" << YAML::Value << b.local_lr;
  out << YAML::Key << "batch" << YAML::Value << b.batch_size;
  out << YAML::Key << "mu" << YAML::Value << b.mu;
  out << YAML::EndMap;

  out << YAML::Key << "trace" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "full_state" << YAML::Value << c.trace.full_state;
  out << YAML::Key << "output_dir" << YAML::Value << c.trace.output_dir;
  out << YAML::EndMap;
  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

SyntheticSpec parse_synthetic_spec(const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ConfigError("line " + std::to_string(e.mark.line + 1) + ": " + e.msg);
  }
  SyntheticSpec syn;
  Section r(root, "");
  r.read("r", syn.r);
  r.read("s", syn.s);
  r.read("users", syn.users);
  r.read("dim", syn.dim);
  r.read("classes", syn.classes);
  r.read("samples_min", syn.samples_min);
  r.read("samples_max", syn.samples_max);
  r.read("iid", syn.iid);
  r.read("intercept", syn.intercept);
  r.read("cov_exponent", syn.cov_exponent);
  r.read("train_fraction", syn.train_fraction);
  r.read("seed", syn.seed);
  r.finish();
  return syn;
}

std::string override_config(const std::string& text, const std::string& dotted_key,
                            const std::string& value) {
  YAML::Node root = YAML::Load(text);
  if (!root || root.IsNull()) root = YAML::Node(YAML::NodeType::Map);
  std::vector<std::string> parts;
  std::stringstream ss(dotted_key);
  for (std::string part; std::getline(ss, part, '.');) parts.push_back(part);
  if (parts.empty()) throw ConfigError("empty parameter name");
  std::vector<YAML::Node> chain{root};
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
    YAML::Node next = chain.back()[parts[i]];
    if (!next || next.IsNull()) {
      chain.back()[parts[i]] = YAML::Node(YAML::NodeType::Map);
      next = chain.back()[parts[i]];
    }
    if (!next.IsMap()) throw ConfigError("parameter path '" + dotted_key + "' crosses a non-mapping");
    chain.push_back(next);
  }
  chain.back()[parts.back()] = YAML::Load(value);
  YAML::Emitter out;
  out.SetDoublePrecision(17);
  out << root;
  return out.c_str();
}

}  // namespace feddr
