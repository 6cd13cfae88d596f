#include "feddr/trace_io.hpp"

#include <cmath>
#include <fstream>
#include <span>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "feddr/errors.hpp"

namespace feddr {

namespace {

using nlohmann::json;

std::string num(double v) {
  if (std::isnan(v)) return "\"nan\"";
  if (std::isinf(v)) return v > 0 ? "\"inf\"" : "\"-inf\"";
  return fmt::format("{:.17g}", v);
}

template <class T>
std::string opt(const std::optional<T>& v) {
  if (!v) return "null";
  if constexpr (std::is_floating_point_v<T>) return num(*v);
  else return std::to_string(*v);
}

std::string str(const std::string& s) { return json(s).dump(); }

std::string vec(std::span<const double> v) {
  std::string out = "[";
  for (std::size_t j = 0; j < v.size(); ++j) out += (j ? "," : "") + num(v[j]);
  return out + "]";
}

double to_num(const json& j) {
  if (j.is_string()) {
    const auto& s = j.get_ref<const std::string&>();
    if (s == "nan") return std::nan("");
    if (s == "inf") return INFINITY;
    if (s == "-inf") return -INFINITY;
    throw TraceError("unexpected string where a number was expected: " + s);
  }
  return j.get<double>();
}

std::optional<double> to_opt(const json& j) {
  if (j.is_null()) return std::nullopt;
  return to_num(j);
}

Vec to_vec(const json& j) {
  Vec v;
  v.reserve(j.size());
  for (const auto& e : j) v.push_back(to_num(e));
  return v;
}

}  // namespace

void write_trace(std::ostream& out, const Trace& t) {
  std::string meta = "{";
  bool first = true;
  for (const auto& [k, v] : t.meta) {
    meta += (first ? "" : ",") + str(k) + ":" + str(v);
    first = false;
  }
  meta += "}";
  out << fmt::format(
      "{{\"type\":\"header\",\"algorithm\":{},\"num_users\":{},\"dim\":{},\"eta\":{},\"alpha\":{},"
      "\"lipschitz\":{},\"initial_loss\":{},\"meta\":{}}}\n",
      str(t.algorithm), t.num_users, t.dim, num(t.eta), num(t.alpha), num(t.lipschitz),
      num(t.initial_loss), meta);
  const bool states = t.has_states();
  for (std::size_t r = 0; r < t.records.size(); ++r) {
    const TraceRecord& rec = t.records[r];
    std::string active = "[";
    for (std::size_t j = 0; j < rec.active.size(); ++j)
      active += (j ? "," : "") + std::to_string(rec.active[j]);
    active += "]";
    std::string line = fmt::format(
        "{{\"type\":\"record\",\"k\":{},\"sim_time\":{},\"active\":{},\"loss\":{},"
        "\"train_accuracy\":{},\"grad_map_sq\":{},\"V\":{},\"Vtilde\":{},\"bytes\":{},"
        "\"delay\":{},\"prox_mode\":{},\"prox_accuracy\":{},\"step_sq\":{},\"eps_sq_sum\":{},"
        "\"eps_sq_active\":{},\"resamples\":{},\"stalls\":{}",
        rec.k, num(rec.sim_time), active, num(rec.loss), opt(rec.train_accuracy),
        num(rec.grad_map_sq), opt(rec.V), opt(rec.Vtilde), rec.bytes, opt(rec.delay),
        str(rec.prox_mode), opt(rec.prox_accuracy), num(rec.step_sq), num(rec.eps_sq_sum),
        num(rec.eps_sq_active), rec.resamples, rec.stalls);
    if (states) {
      line += ",\"xbar\":" + vec(t.states[r].xbar) + ",\"x\":[";
      for (std::size_t i = 0; i < t.states[r].x.size(); ++i)
        line += (i ? "," : "") + vec(t.states[r].x[i]);
      line += "]";
    }
    out << line << "}\n";
  }
  if (t.abort_reason) out << "{\"type\":\"abort\",\"reason\":" << str(*t.abort_reason) << "}\n";
}

std::string trace_to_string(const Trace& trace) {
  std::ostringstream ss;
  write_trace(ss, trace);
  return ss.str();
}

void save_trace(const std::string& path, const Trace& trace) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw TraceError("cannot write trace file '" + path + "'");
  write_trace(out, trace);
  if (!out) throw TraceError("write failed for '" + path + "'");
}

Trace read_trace(std::istream& in) {
  Trace t;
  bool header = false;
  std::size_t lineno = 0;
  for (std::string line; std::getline(in, line);) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      const std::string type = j.at("type").get<std::string>();
      if (type == "header") {
        t.algorithm = j.at("algorithm").get<std::string>();
        t.num_users = j.at("num_users").get<std::size_t>();
        t.dim = j.at("dim").get<std::size_t>();
        t.eta = to_num(j.at("eta"));
        t.alpha = to_num(j.at("alpha"));
        t.lipschitz = to_num(j.at("lipschitz"));
        t.initial_loss = to_num(j.at("initial_loss"));
        for (const auto& [k, v] : j.at("meta").items()) t.meta[k] = v.get<std::string>();
        header = true;
      } else if (type == "record") {
        if (!header) throw TraceError("record before header");
        TraceRecord r;
        r.k = j.at("k").get<std::size_t>();
        r.sim_time = to_num(j.at("sim_time"));
        r.active = j.at("active").get<std::vector<std::size_t>>();
        r.loss = to_num(j.at("loss"));
        r.train_accuracy = to_opt(j.at("train_accuracy"));
        r.grad_map_sq = to_num(j.at("grad_map_sq"));
        r.V = to_opt(j.at("V"));
        r.Vtilde = to_opt(j.at("Vtilde"));
        r.bytes = j.at("bytes").get<std::uint64_t>();
        if (!j.at("delay").is_null()) r.delay = j.at("delay").get<std::size_t>();
        r.prox_mode = j.at("prox_mode").get<std::string>();
        r.prox_accuracy = to_opt(j.at("prox_accuracy"));
        r.step_sq = to_num(j.at("step_sq"));
        r.eps_sq_sum = to_num(j.at("eps_sq_sum"));
        r.eps_sq_active = to_num(j.at("eps_sq_active"));
        r.resamples = j.at("resamples").get<std::size_t>();
        r.stalls = j.at("stalls").get<std::size_t>();
        if (j.contains("xbar")) {
          FullState s;
          s.xbar = to_vec(j.at("xbar"));
          for (const auto& xi : j.at("x")) s.x.push_back(to_vec(xi));
          t.states.push_back(std::move(s));
        }
        t.records.push_back(std::move(r));
      } else if (type == "abort") {
        t.abort_reason = j.at("reason").get<std::string>();
      } else {
        throw TraceError("unknown line type '" + type + "'");
      }
    } catch (const json::exception& e) {
      throw TraceError("trace line " + std::to_string(lineno) + ": " + e.what());
    } catch (const TraceError& e) {
      throw TraceError("trace line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (!header) throw TraceError("trace has no header line");
  if (!t.states.empty() && t.states.size() != t.records.size())
    throw TraceError("only some records carry states");
  return t;
}

Trace load_trace(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw TraceError("cannot open trace file '" + path + "'");
  return read_trace(in);
}

}  // namespace feddr
