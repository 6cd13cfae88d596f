#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

#include <fmt/format.h>

#include "feddr/config.hpp"
#include "feddr/errors.hpp"
#include "feddr/experiment.hpp"
#include "feddr/kernels.hpp"
#include "feddr/synthetic.hpp"

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw feddr::ConfigError("cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string part; std::getline(ss, part, sep);) out.push_back(part);
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"FedDR and asyncFedDR federated optimization simulator"};
  app.require_subcommand(1);

  std::string config_path, trace_path, spec_path, out_path, param;
  std::vector<std::uint64_t> seeds;
  bool no_certify = false, full_state = false;

  auto add_run_flags = [&](CLI::App* sub) {
    sub->add_option("config", config_path, "experiment config (YAML)")->required();
    sub->add_option("--seed", seeds, "run these seeds instead of the config's list");
    sub->add_flag("--no-certify", no_certify, "skip the Lyapunov certificate");
    sub->add_flag("--full-state-trace", full_state, "write server and user states to the trace");
    sub->add_option("-o,--output", out_path, "output directory");
  };
  CLI::App* run = app.add_subcommand("run", "run an experiment config");
  add_run_flags(run);
  CLI::App* sweep = app.add_subcommand("sweep", "run a config once per parameter value");
  add_run_flags(sweep);
  sweep->add_option("--param", param, "dotted.key=v1,v2,...")->required();
  CLI::App* certify = app.add_subcommand("certify", "check the descent certificate of a trace");
  certify->add_option("trace", trace_path, "trace file (.jsonl)")->required();
  CLI::App* gen = app.add_subcommand("gen-data", "write a synthetic federated dataset");
  gen->add_option("spec", spec_path, "data spec (YAML)")->required();
  gen->add_option("-o,--output", out_path, "output file")->required();
  gen->add_option("--seed", seeds, "override the spec seed")->expected(1);

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed() || sweep->parsed()) {
      feddr::RunOptions opt;
      opt.certify = !no_certify;
      if (full_state) opt.full_state = true;
      if (!seeds.empty()) opt.seeds = seeds;
      if (!out_path.empty()) opt.output_dir = out_path;
      std::cerr << "kernels: " << feddr::kernels::isa_name(feddr::kernels::active_isa()) << "\n";
      if (run->parsed()) {
        const feddr::ExperimentConfig cfg = feddr::load_config(config_path);
        const feddr::RunSummary s = feddr::run_experiment(cfg, opt, std::cout);
        return s.exit_code;
      }
      const auto eq = param.find('=');
      if (eq == std::string::npos) throw feddr::ConfigError("--param expects name=v1,v2,...");
      const std::string key = param.substr(0, eq);
      const std::string text = read_file(config_path);
      int code = 0;
      for (const std::string& value : split(param.substr(eq + 1), ',')) {
        feddr::ExperimentConfig cfg = feddr::parse_config(feddr::override_config(text, key, value));
        cfg.name = fmt::format("{}_{}={}", cfg.name, key, value);
        std::cout << cfg.name << "\n";
        const feddr::RunSummary s = feddr::run_experiment(cfg, opt, std::cout);
        code = std::max(code, s.exit_code);
      }
      return code;
    }
    if (certify->parsed()) {
      const feddr::CertifyOutcome out = feddr::certify_trace_file(trace_path);
      std::cout << out.report;
      return out.violations == 0 ? 0 : 1;
    }
    if (gen->parsed()) {
      feddr::SyntheticSpec spec = feddr::parse_synthetic_spec(read_file(spec_path));
      if (!seeds.empty()) spec.seed = seeds.front();
      std::ofstream out(out_path, std::ios::binary);
      if (!out) throw feddr::ConfigError("cannot write '" + out_path + "'");
      out << feddr::serialize_dataset(feddr::gen_synthetic(spec));
      return 0;
    }
  } catch (const feddr::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
