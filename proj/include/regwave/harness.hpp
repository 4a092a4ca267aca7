#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "regwave/edge_stats.hpp"
#include "regwave/errors.hpp"

namespace regwave {

// Experiment name not in the registry.
struct UnknownExperimentError : ParameterError {
  using ParameterError::ParameterError;
};

// Reading or writing run artifacts failed.
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum ExitCode : int {
  kExitPass = 0,
  kExitMetricFail = 1,
  kExitConfigError = 2,
  kExitUnknownExperiment = 3,
  kExitIoError = 4,
  kExitRuntimeError = 5,
};

// Flat run configuration. JSON keys are kebab-case; tolerances appear as
// "tolerance-<name>" keys. Unset keys take the experiment defaults.
struct RunConfig {
  std::string experiment;
  int n = 1000;
  int d = 3;
  long long samples = 500;  // ensemble size M (seeds, fixtures or graphs)
  int ell = 1;
  int r = 2;
  int big_r = 1;            // floor(log_{d-1}(n) / 8) at the default n, d
  SpectralMethod method = SpectralMethod::kLanczos;
  std::uint64_t seed = 1;   // master seed
  int centers = 16;
  long long trials = 100000;
  int embed_n = 2000;
  int reference_samples = 2000;
  std::map<std::string, double> tolerances;
  std::string output_dir = "out";
};

// floor(log_{d-1}(n) / 8).
int default_big_r(int n, int d);

// Throws ParameterError on: n d odd, d < 3, n <= d, samples < 1, negative
// radii, centers outside [1, n], trials < 1, embed_n < 200,
// reference_samples < 100, non-positive or non-finite tolerances, or a
// tolerance name the experiment does not declare. Unknown experiment names
// throw UnknownExperimentError.
void validate(const RunConfig& config);

// Experiment defaults overlaid with the keys present in `j`. Unknown keys
// and mistyped values throw ParameterError.
RunConfig config_from_json(const nlohmann::json& j);
RunConfig load_config(const std::filesystem::path& path);
nlohmann::json to_json(const RunConfig& config);

// 64-bit FNV-1a over bytes, as 16 lowercase hex digits.
std::string fnv1a_hex(const std::string& bytes);
// Hash of the canonical (sorted-key, compact) configuration JSON without
// the output directory, which does not affect results.
std::string config_hash(const RunConfig& config);

struct Artifact {
  std::string name;  // file name inside the run directory
  std::string content;
};

struct ExperimentContext {
  int workers = 1;
  std::vector<Artifact> artifacts;
  void add_artifact(std::string name, std::string content);
};

using ExperimentFn = std::function<ExperimentReport(const RunConfig&, ExperimentContext&)>;

struct ExperimentInfo {
  std::string name;
  std::string description;
  RunConfig defaults;  // experiment field set, tolerances declared
  ExperimentFn run;
};

const std::vector<ExperimentInfo>& experiment_registry();
// Throws UnknownExperimentError.
const ExperimentInfo& find_experiment(const std::string& name);
RunConfig default_config(const std::string& name);

struct RunResult {
  RunConfig config;
  ExperimentReport report;
  std::vector<Artifact> artifacts;
};

// Validates, runs with `workers` threads and stamps the config hash and
// runtime. The report is a pure function of the configuration apart from
// its timing field.
RunResult run_experiment(const RunConfig& config, int workers);

// Report JSON text (2-space indent, trailing newline), and the same JSON
// with the timing field removed for replay comparisons.
std::string report_text(const ExperimentReport& report);
nlohmann::json replay_view(const nlohmann::json& report_json);

// Writes <output_dir>/<experiment>/<timestamp>-<hash>/ with manifest.json,
// report.json and the CSV artifacts; returns the directory. Throws IoError.
std::filesystem::path persist(const RunResult& result);

struct ManifestCheck {
  bool intact = false;
  std::string message;
};
// Recomputes the hash of the configuration embedded in manifest.json and
// compares it with the manifest and report hashes. Throws IoError when the
// files cannot be read or parsed.
ManifestCheck verify_run_directory(const std::filesystem::path& dir);

// Version string recorded in manifests.
const char* code_version();

}  // namespace regwave
