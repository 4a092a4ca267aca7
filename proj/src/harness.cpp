#include "regwave/harness.hpp"

#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#ifndef REGWAVE_VERSION
#define REGWAVE_VERSION "unknown"
#endif

namespace regwave {

namespace fs = std::filesystem;

namespace {

constexpr const char* kTolerancePrefix = "tolerance-";

const char* method_name(SpectralMethod m) { return m == SpectralMethod::kDense ? "dense" : "lanczos"; }

long long integer_value(const nlohmann::json& v, const std::string& key, long long lo,
                        long long hi) {
  if (!v.is_number_integer()) throw ParameterError("config key " + key + " must be an integer");
  if (v.is_number_unsigned() && v.get<std::uint64_t>() > static_cast<std::uint64_t>(hi))
    throw ParameterError("config key " + key + " is out of range");
  const long long x = v.get<long long>();
  if (x < lo || x > hi) throw ParameterError("config key " + key + " is out of range");
  return x;
}

int int_value(const nlohmann::json& v, const std::string& key) {
  return static_cast<int>(integer_value(v, key, std::numeric_limits<int>::min(),
                                        std::numeric_limits<int>::max()));
}

std::string string_value(const nlohmann::json& v, const std::string& key) {
  if (!v.is_string()) throw ParameterError("config key " + key + " must be a string");
  return v.get<std::string>();
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw IoError("read failed for " + path.string());
  return buf.str();
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << content;
  out.flush();
  if (!out) throw IoError("write failed for " + path.string());
}

nlohmann::json parse_json(const std::string& text, const std::string& what) {
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ParameterError(what + " is not valid JSON: " + e.what());
  }
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream out;
  out << std::put_time(&tm, "%Y%m%dT%H%M%SZ");
  return out.str();
}

nlohmann::json hashed_view(const nlohmann::json& config) {
  nlohmann::json view = config;
  view.erase("output-dir");
  return view;
}

}  // namespace

int default_big_r(int n, int d) {
  if (n < 2 || d < 3) throw ParameterError("default R needs n >= 2 and d >= 3");
  // Largest R with (d-1)^{8R} <= n, in integer arithmetic.
  int big_r = 0;
  long long power = 1;  // (d-1)^{8 big_r}
  for (;;) {
    long long next = power;
    for (int k = 0; k < 8 && next <= n; ++k) next *= d - 1;
    if (next > n) return big_r;
    power = next;
    ++big_r;
  }
}

void validate(const RunConfig& c) {
  const ExperimentInfo& info = find_experiment(c.experiment);
  if (c.d < 3) throw ParameterError("d must be at least 3");
  if (c.n <= c.d) throw ParameterError("n must exceed d");
  if ((static_cast<long long>(c.n) * c.d) % 2 != 0) throw ParameterError("n d must be even");
  if (c.samples < 1) throw ParameterError("samples (M) must be at least 1");
  if (c.ell < 0 || c.r < 0 || c.big_r < 0) throw ParameterError("radii must be nonnegative");
  if (c.centers < 1 || c.centers > c.n) throw ParameterError("centers must lie in [1, n]");
  if (c.trials < 1) throw ParameterError("trials must be at least 1");
  if (c.embed_n < 200) throw ParameterError("embed-n must be at least 200");
  if (c.reference_samples < 100) throw ParameterError("reference-samples must be at least 100");
  for (const auto& [name, value] : c.tolerances) {
    if (!info.defaults.tolerances.count(name))
      throw ParameterError("experiment " + c.experiment + " has no tolerance " + name);
    if (!(std::isfinite(value) && value > 0.0))
      throw ParameterError("tolerance " + name + " must be positive and finite");
  }
  for (const auto& [name, value] : info.defaults.tolerances)
    if (!c.tolerances.count(name)) throw ParameterError("missing tolerance " + name);
}

RunConfig config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ParameterError("config must be a JSON object");
  if (!j.contains("experiment")) throw ParameterError("config needs an experiment name");
  RunConfig c = default_config(string_value(j.at("experiment"), "experiment"));
  bool explicit_big_r = false;
  for (const auto& [key, v] : j.items()) {
    if (key == "experiment") continue;
    if (key == "n") {
      c.n = int_value(v, key);
    } else if (key == "d") {
      c.d = int_value(v, key);
    } else if (key == "samples") {
      c.samples = integer_value(v, key, std::numeric_limits<long long>::min(),
                                std::numeric_limits<long long>::max());
    } else if (key == "ell") {
      c.ell = int_value(v, key);
    } else if (key == "r") {
      c.r = int_value(v, key);
    } else if (key == "big-r") {
      c.big_r = int_value(v, key);
      explicit_big_r = true;
    } else if (key == "method") {
      const std::string m = string_value(v, key);
      if (m == "dense") {
        c.method = SpectralMethod::kDense;
      } else if (m == "lanczos") {
        c.method = SpectralMethod::kLanczos;
      } else {
        throw ParameterError("method must be dense or lanczos");
      }
    } else if (key == "seed") {
      if (!v.is_number_integer() || (!v.is_number_unsigned() && v.get<std::int64_t>() < 0))
        throw ParameterError("seed must be a nonnegative integer");
      c.seed = v.get<std::uint64_t>();
    } else if (key == "centers") {
      c.centers = int_value(v, key);
    } else if (key == "trials") {
      c.trials = integer_value(v, key, std::numeric_limits<long long>::min(),
                               std::numeric_limits<long long>::max());
    } else if (key == "embed-n") {
      c.embed_n = int_value(v, key);
    } else if (key == "reference-samples") {
      c.reference_samples = int_value(v, key);
    } else if (key == "output-dir") {
      c.output_dir = string_value(v, key);
    } else if (key.rfind(kTolerancePrefix, 0) == 0) {
      if (!v.is_number()) throw ParameterError("config key " + key + " must be a number");
      const std::string name = key.substr(std::string(kTolerancePrefix).size());
      if (!c.tolerances.count(name))
        throw ParameterError("experiment " + c.experiment + " has no tolerance " + name);
      c.tolerances[name] = v.get<double>();
    } else {
      throw ParameterError("unknown config key " + key);
    }
  }
  // An unset R follows floor(log_{d-1}(n)/8) when the experiment uses it.
  const RunConfig& defaults = find_experiment(c.experiment).defaults;
  if (!explicit_big_r && defaults.big_r < 0 && c.d >= 3 && c.n >= 2)
    c.big_r = default_big_r(c.n, c.d);
  validate(c);
  return c;
}

RunConfig load_config(const fs::path& path) {
  return config_from_json(parse_json(read_file(path), path.string()));
}

nlohmann::json to_json(const RunConfig& c) {
  nlohmann::json j = {{"experiment", c.experiment},
                      {"n", c.n},
                      {"d", c.d},
                      {"samples", c.samples},
                      {"ell", c.ell},
                      {"r", c.r},
                      {"big-r", c.big_r},
                      {"method", method_name(c.method)},
                      {"seed", c.seed},
                      {"centers", c.centers},
                      {"trials", c.trials},
                      {"embed-n", c.embed_n},
                      {"reference-samples", c.reference_samples},
                      {"output-dir", c.output_dir}};
  for (const auto& [name, value] : c.tolerances) j[kTolerancePrefix + name] = value;
  return j;
}

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream out;
  out << std::hex << std::setw(16) << std::setfill('0') << h;
  return out.str();
}

std::string config_hash(const RunConfig& config) {
  return fnv1a_hex(hashed_view(to_json(config)).dump());
}

void ExperimentContext::add_artifact(std::string name, std::string content) {
  if (name.empty() || name.find('/') != std::string::npos || name == "manifest.json" ||
      name == "report.json")
    throw ParameterError("invalid artifact name " + name);
  for (const Artifact& a : artifacts)
    if (a.name == name) throw ParameterError("duplicate artifact " + name);
  artifacts.push_back({std::move(name), std::move(content)});
}

const ExperimentInfo& find_experiment(const std::string& name) {
  for (const ExperimentInfo& info : experiment_registry())
    if (info.name == name) return info;
  throw UnknownExperimentError("unknown experiment " + name);
}

RunConfig default_config(const std::string& name) {
  RunConfig c = find_experiment(name).defaults;
  if (c.big_r < 0) c.big_r = default_big_r(c.n, c.d);
  return c;
}

RunResult run_experiment(const RunConfig& config, int workers) {
  validate(config);
  const ExperimentInfo& info = find_experiment(config.experiment);
  ExperimentContext ctx;
  ctx.workers = std::max(1, workers);
  const auto start = std::chrono::steady_clock::now();
  ExperimentReport report = info.run(config, ctx);
  const auto stop = std::chrono::steady_clock::now();
  report.name = config.experiment;
  report.config_hash = config_hash(config);
  report.runtime_seconds = std::chrono::duration<double>(stop - start).count();
  return {config, std::move(report), std::move(ctx.artifacts)};
}

std::string report_text(const ExperimentReport& report) { return to_json(report).dump(2) + "\n"; }

nlohmann::json replay_view(const nlohmann::json& report_json) {
  nlohmann::json view = report_json;
  view.erase("timing");
  return view;
}

fs::path persist(const RunResult& result) {
  const std::string hash = result.report.config_hash;
  const fs::path parent = fs::path(result.config.output_dir) / result.config.experiment;
  std::error_code ec;
  fs::create_directories(parent, ec);
  if (ec) throw IoError("cannot create " + parent.string() + ": " + ec.message());
  const std::string stamp = utc_timestamp();
  fs::path dir = parent / (stamp + "-" + hash);
  for (int k = 2; fs::exists(dir, ec); ++k) dir = parent / (stamp + "-" + hash + "-" + std::to_string(k));
  if (!fs::create_directory(dir, ec) || ec)
    throw IoError("cannot create " + dir.string() + (ec ? ": " + ec.message() : ""));

  nlohmann::json names = nlohmann::json::array();
  for (const Artifact& a : result.artifacts) names.push_back(a.name);
  const nlohmann::json manifest = {{"experiment", result.config.experiment},
                                   {"config", to_json(result.config)},
                                   {"config-hash", hash},
                                   {"code-version", code_version()},
                                   {"master-seed", result.config.seed},
                                   {"created", stamp},
                                   {"artifacts", names}};
  write_file(dir / "manifest.json", manifest.dump(2) + "\n");
  write_file(dir / "report.json", report_text(result.report));
  for (const Artifact& a : result.artifacts) write_file(dir / a.name, a.content);
  return dir;
}

ManifestCheck verify_run_directory(const fs::path& dir) {
  nlohmann::json manifest, report;
  try {
    manifest = nlohmann::json::parse(read_file(dir / "manifest.json"));
    report = nlohmann::json::parse(read_file(dir / "report.json"));
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("unreadable run directory: ") + e.what());
  }
  ManifestCheck check;
  if (!manifest.contains("config") || !manifest.contains("config-hash") ||
      !report.contains("config-hash")) {
    check.message = "manifest or report lacks a config hash";
    return check;
  }
  const std::string recorded = manifest["config-hash"].is_string()
                                   ? manifest["config-hash"].get<std::string>()
                                   : std::string();
  const std::string recomputed = fnv1a_hex(hashed_view(manifest["config"]).dump());
  if (recomputed != recorded) {
    check.message = "config does not match its recorded hash " + recorded;
    return check;
  }
  if (report["config-hash"] != recorded) {
    check.message = "report hash differs from manifest hash";
    return check;
  }
  try {
    if (config_hash(config_from_json(manifest["config"])) != recorded) {
      check.message = "config does not normalize to its recorded hash";
      return check;
    }
  } catch (const ParameterError& e) {
    check.message = std::string("embedded config is invalid: ") + e.what();
    return check;
  }
  check.intact = true;
  check.message = "config hash " + recorded + " verified";
  return check;
}

const char* code_version() { return REGWAVE_VERSION; }

}  // namespace regwave
