#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "core.hpp"
#include "ingest.hpp"
#include "llm_client.hpp"
#include "methods.hpp"
#include "metrics.hpp"
#include "promptkit.hpp"

namespace ccp::runner {

inline constexpr const char* kCodeVersion = "0.1.0";

struct RunConfig {
  std::optional<std::string> run_id;
  std::filesystem::path results_dir = "results";
  Dataset dataset = Dataset::TempEvalQaBi;
  std::filesystem::path dataset_path;
  methods::MethodConfig method_config;
  llm::ProviderConfig provider;
  std::optional<SamplingParams> sampling;  // informational override record
  std::optional<std::size_t> subsample_cap;
  std::uint64_t seed = 0;
  std::filesystem::path template_dir = "assets/templates";
  std::filesystem::path cache_dir = ".ccp_cache";
  int concurrency = 4;
  double error_rate_threshold = 0.1;

  static RunConfig from_file(const std::filesystem::path& path);
  static RunConfig from_json(const json& j);
  void validate() const;
};

struct RunManifest {
  std::string run_id;
  std::string created_at;
  RunConfig config;
  std::map<std::string, std::string> template_checksums;
  std::string code_version = kCodeVersion;

  json to_json() const;
  static RunManifest from_json(const json& j);
  // The frozen fields compared on resume (everything except run_id,
  // created_at and code_version).
  json frozen() const;
};

struct RunResult {
  RunManifest manifest;
  std::vector<Prediction> predictions;
  metrics::ScoreReport report;
  std::size_t fallback_count = 0;
  std::size_t error_count = 0;
  double wall_time = 0;
  std::optional<std::pair<double, double>> mcqa;  // EM/F1 for mcqa methods
};

RunResult run(const RunConfig& config);

RunResult resume(const std::string& run_id,
                 const std::filesystem::path& results_dir,
                 const std::optional<std::filesystem::path>& config_path = {});

struct ComparisonRow {
  std::string run_id;
  MethodId method;
  metrics::ScoreReport report;
};

struct Comparison {
  Dataset dataset;
  std::vector<ComparisonRow> rows;  // paper row order
  std::string table;
  json to_json() const;
};

Comparison compare(const std::vector<std::string>& run_ids,
                   const std::filesystem::path& results_dir);

}  // namespace ccp::runner
