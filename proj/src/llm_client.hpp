#pragma once

#include <atomic>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "core.hpp"

namespace ccp::llm {

enum class ProviderKind { OpenAiCompatible, Scripted };

struct ProviderConfig {
  ProviderKind kind = ProviderKind::Scripted;
  std::string base_url;       // OpenAiCompatible only
  std::string model_name;
  std::string auth_env;       // env var holding the bearer token
  double request_timeout = 60.0;
  int max_retries = 3;
  int backoff_initial_ms = 500;
  bool supports_top_k = false;
  std::string script_path;    // Scripted only

  void validate() const;
  json to_json(bool redact_nothing_secret = true) const;
  static ProviderConfig from_json(const json& j);
};

// Default sampled-decoding regime for a provider: endpoints advertising
// top-k support get top_k=40 / temperature 0.5, GPT-style endpoints get
// temperature 0.7 with top_k omitted.
SamplingParams sampled_defaults(const ProviderConfig& provider);

// Content hash of provider kind + model + transcript + params + sample index.
std::string cache_key(const ProviderConfig& provider,
                      const Transcript& transcript,
                      const SamplingParams& params, int sample_index);

std::string sha256_hex(const std::string& data);

struct ScriptedRule {
  std::string match;        // substring over the serialized transcript
  std::string response;
  bool consume_once = false;
  bool used = false;
};

class Provider {
 public:
  virtual ~Provider() = default;
  virtual std::string complete_one(const Transcript& transcript,
                                   const SamplingParams& params,
                                   int sample_index) = 0;
  std::size_t calls() const { return calls_.load(); }
  void reset_calls() { calls_ = 0; }

 protected:
  std::atomic<std::size_t> calls_{0};
};

// Deterministic test double: rules fire in declaration order, first match
// wins, no match is a hard ScriptGap. Matching sees the system message and
// the final message only, so scripts can address one prompt stage without
// colliding with in-context exemplars.
class ScriptedProvider : public Provider {
 public:
  explicit ScriptedProvider(std::vector<ScriptedRule> rules);
  static std::shared_ptr<ScriptedProvider> from_file(
      const std::filesystem::path& path);

  std::string complete_one(const Transcript& transcript,
                           const SamplingParams& params,
                           int sample_index) override;

 private:
  std::vector<ScriptedRule> rules_;
  std::mutex mu_;
};

class OpenAiProvider : public Provider {
 public:
  explicit OpenAiProvider(ProviderConfig config);

  std::string complete_one(const Transcript& transcript,
                           const SamplingParams& params,
                           int sample_index) override;

 private:
  ProviderConfig config_;
  std::string token_;
  std::once_flag top_k_warned_;
};

enum class PurgeScope { All, ByModel, ByRun };

// Content-addressed on-disk completion cache; one file per entry, atomic
// write-then-rename.
class DiskCache {
 public:
  explicit DiskCache(std::filesystem::path dir);

  std::optional<std::string> get(const std::string& digest) const;
  void put(const std::string& digest, const std::string& model,
           const std::string& run_id, const std::string& text);
  std::size_t purge(PurgeScope scope, const std::string& match = "");
  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path dir_;
};

// Cached chat-completion access shared by all method runners.
class Client {
 public:
  Client(ProviderConfig config, std::shared_ptr<Provider> provider,
         std::shared_ptr<DiskCache> cache, std::string run_id = "");

  static Client make(const ProviderConfig& config,
                     std::shared_ptr<DiskCache> cache,
                     std::string run_id = "");

  // Returns params.n_samples completions, cache-first, each sample keyed
  // and fetched independently.
  std::vector<std::string> complete(const Transcript& transcript,
                                    const SamplingParams& params,
                                    std::vector<std::string>* keys_out = nullptr);

  // One completion at an explicit sample index (debate agents sharing a
  // prompt each need their own cache slot).
  std::string complete_at(const Transcript& transcript,
                          const SamplingParams& params, int sample_index,
                          std::vector<std::string>* keys_out = nullptr);

  Provider& provider() { return *provider_; }
  const ProviderConfig& config() const { return config_; }

 private:
  ProviderConfig config_;
  std::shared_ptr<Provider> provider_;
  std::shared_ptr<DiskCache> cache_;
  std::string run_id_;
};

}  // namespace ccp::llm
