#include <exception>
#include <iomanip>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "regwave/errors.hpp"
#include "regwave/harness.hpp"
#include "regwave/parallel.hpp"

namespace {

using namespace regwave;

const char* gate_symbol(Gate g) {
  switch (g) {
    case Gate::kAtMost: return "<=";
    case Gate::kAtLeast: return ">=";
    case Gate::kWithin: return "within";
    case Gate::kReport: return "";
  }
  return "";
}

void print_report(const ExperimentReport& r, std::ostream& out) {
  out << std::setprecision(6);
  for (const Metric& m : r.metrics) {
    out << "  " << (m.gate == Gate::kReport ? "info" : m.passed() ? "PASS" : "FAIL") << "  "
        << m.name << " = " << m.value;
    if (m.gate == Gate::kWithin) {
      out << "  (within " << m.bound << " of " << m.target << ")";
    } else if (m.gate != Gate::kReport) {
      out << "  (" << gate_symbol(m.gate) << ' ' << m.bound << ")";
    }
    out << '\n';
  }
  out << (r.passed() ? "PASS " : "FAIL ") << r.name << "  [" << r.sample_count << " samples, "
      << r.runtime_seconds << " s]\n";
}

int run_and_persist(const RunConfig& config, bool write) {
  const RunResult result = run_experiment(config, default_worker_count());
  print_report(result.report, std::cout);
  if (write) std::cout << "wrote " << persist(result).string() << '\n';
  return result.report.passed() ? kExitPass : kExitMetricFail;
}

int guarded(const std::function<int()>& body) {
  try {
    return body();
  } catch (const UnknownExperimentError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUnknownExperiment;
  } catch (const ParameterError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfigError;
  } catch (const IoError& e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return kExitIoError;
  } catch (const std::exception& e) {
    std::cerr << "runtime error: " << e.what() << '\n';
    return kExitRuntimeError;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Random regular graph edge-eigenvector experiments"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_override;
  bool no_write = false;
  CLI::App* run = app.add_subcommand("run", "run the experiment described by a JSON config");
  run->add_option("config", config_path, "config file")->required();
  run->add_option("--out", out_override, "output directory (overrides output-dir)");
  run->add_flag("--no-write", no_write, "print the report without writing a run directory");

  CLI::App* list = app.add_subcommand("list", "list experiments with their default configs");
  bool list_json = false;
  list->add_flag("--json", list_json, "print default configs as JSON");

  CLI::App* check = app.add_subcommand("check", "run the identity suite with its defaults");
  std::string check_out;
  check->add_option("--out", check_out, "output directory");

  std::string verify_dir;
  CLI::App* verify = app.add_subcommand("verify", "check a run directory against its config hash");
  verify->add_option("dir", verify_dir, "run directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitPass : kExitConfigError;
  }

  if (*run) {
    return guarded([&] {
      RunConfig c = load_config(config_path);
      if (!out_override.empty()) c.output_dir = out_override;
      return run_and_persist(c, !no_write);
    });
  }
  if (*list) {
    return guarded([&] {
      if (list_json) {
        nlohmann::json all = nlohmann::json::object();
        for (const ExperimentInfo& info : experiment_registry())
          all[info.name] = to_json(default_config(info.name));
        std::cout << all.dump(2) << '\n';
      } else {
        for (const ExperimentInfo& info : experiment_registry())
          std::cout << std::left << std::setw(22) << info.name << info.description << '\n';
      }
      return kExitPass;
    });
  }
  if (*check) {
    return guarded([&] {
      RunConfig c = default_config("identity-suite");
      if (!check_out.empty()) c.output_dir = check_out;
      return run_and_persist(c, true);
    });
  }
  return guarded([&] {
    const ManifestCheck result = verify_run_directory(verify_dir);
    std::cout << (result.intact ? "intact: " : "tampered: ") << result.message << '\n';
    return result.intact ? kExitPass : kExitMetricFail;
  });
}
