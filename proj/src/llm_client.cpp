#include "llm_client.hpp"

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <thread>

#include <openssl/evp.h>

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

namespace ccp::llm {

void ProviderConfig::validate() const {
  if (model_name.empty())
    throw Error(ErrorCode::ConfigError, "provider model_name is required");
  if (kind == ProviderKind::OpenAiCompatible) {
    if (base_url.empty())
      throw Error(ErrorCode::ConfigError,
                  "base_url required for openai_compatible provider");
    if (auth_env.empty())
      throw Error(ErrorCode::ConfigError,
                  "auth env var name required for openai_compatible provider");
  }
  if (max_retries < 0)
    throw Error(ErrorCode::ConfigError, "max_retries must be >= 0");
}

json ProviderConfig::to_json(bool) const {
  json j;
  j["kind"] = kind == ProviderKind::Scripted ? "scripted" : "openai_compatible";
  j["base_url"] = base_url;
  j["model_name"] = model_name;
  // Only the variable *name* is persisted; the token value never leaves
  // the environment.
  j["auth_env"] = auth_env;
  j["request_timeout"] = request_timeout;
  j["max_retries"] = max_retries;
  j["backoff_initial_ms"] = backoff_initial_ms;
  j["supports_top_k"] = supports_top_k;
  j["script_path"] = script_path;
  return j;
}

ProviderConfig ProviderConfig::from_json(const json& j) {
  ProviderConfig c;
  std::string kind = j.at("kind").get<std::string>();
  if (kind == "scripted") {
    c.kind = ProviderKind::Scripted;
  } else if (kind == "openai_compatible") {
    c.kind = ProviderKind::OpenAiCompatible;
  } else {
    throw Error(ErrorCode::ConfigError, "bad provider kind '" + kind + "'");
  }
  c.base_url = j.value("base_url", "");
  c.model_name = j.value("model_name", "");
  c.auth_env = j.value("auth_env", "");
  c.request_timeout = j.value("request_timeout", 60.0);
  c.max_retries = j.value("max_retries", 3);
  c.backoff_initial_ms = j.value("backoff_initial_ms", 500);
  c.supports_top_k = j.value("supports_top_k", false);
  c.script_path = j.value("script_path", "");
  c.validate();
  return c;
}

SamplingParams sampled_defaults(const ProviderConfig& provider) {
  if (provider.supports_top_k) return SamplingParams::sampled(0.5, 40);
  return SamplingParams::sampled(0.7);
}

std::string sha256_hex(const std::string& data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr);
  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 0xf]);
  }
  return out;
}

std::string cache_key(const ProviderConfig& provider,
                      const Transcript& transcript,
                      const SamplingParams& params, int sample_index) {
  json preimage;
  preimage["kind"] =
      provider.kind == ProviderKind::Scripted ? "scripted" : "openai_compatible";
  preimage["model"] = provider.model_name;
  preimage["transcript"] = transcript.to_json();
  SamplingParams keyed = params;  // batch size is not part of the identity
  keyed.n_samples = 1;
  preimage["params"] = keyed.to_json();
  preimage["sample_index"] = sample_index;
  return sha256_hex(preimage.dump());
}

namespace {

// Scripted matching surface: the system message plus the final message.
// Exemplar turns in between stay invisible to rules.
std::string transcript_text(const Transcript& transcript) {
  std::string out;
  const auto& msgs = transcript.messages();
  if (msgs.empty()) return out;
  auto render = [&](const Message& m) {
    out += "[" + to_string(m.role) + "] " + m.text + "\n";
  };
  render(msgs.front());
  if (msgs.size() > 1) render(msgs.back());
  return out;
}

}  // namespace

ScriptedProvider::ScriptedProvider(std::vector<ScriptedRule> rules)
    : rules_(std::move(rules)) {}

std::shared_ptr<ScriptedProvider> ScriptedProvider::from_file(
    const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in)
    throw Error(ErrorCode::ConfigError, "cannot open script " + path.string());
  json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw Error(ErrorCode::ConfigError,
                "bad script " + path.string() + ": " + e.what());
  }
  std::vector<ScriptedRule> rules;
  for (const auto& r : j.at("rules")) {
    ScriptedRule rule;
    rule.match = r.at("match").get<std::string>();
    rule.response = r.at("response").get<std::string>();
    rule.consume_once = r.value("consume_once", false);
    rules.push_back(std::move(rule));
  }
  return std::make_shared<ScriptedProvider>(std::move(rules));
}

std::string ScriptedProvider::complete_one(const Transcript& transcript,
                                           const SamplingParams&, int) {
  std::lock_guard<std::mutex> lock(mu_);
  ++calls_;
  std::string text = transcript_text(transcript);
  for (auto& rule : rules_) {
    if (rule.consume_once && rule.used) continue;
    if (text.find(rule.match) != std::string::npos) {
      rule.used = true;
      return rule.response;
    }
  }
  throw Error(ErrorCode::ScriptGap,
              "no scripted rule matches request:\n" + text);
}

OpenAiProvider::OpenAiProvider(ProviderConfig config)
    : config_(std::move(config)) {
  config_.validate();
  const char* token = std::getenv(config_.auth_env.c_str());
  if (!token || !*token)
    throw Error(ErrorCode::AuthError,
                "environment variable " + config_.auth_env + " is unset");
  token_ = token;
}

std::string OpenAiProvider::complete_one(const Transcript& transcript,
                                         const SamplingParams& params,
                                         int) {
  params.validate();
  json body;
  body["model"] = config_.model_name;
  json messages = json::array();
  for (const auto& m : transcript.messages()) {
    messages.push_back({{"role", to_string(m.role)}, {"content", m.text}});
  }
  body["messages"] = messages;
  body["temperature"] =
      params.mode == SamplingMode::Greedy ? 0.0 : params.temperature;
  if (params.mode == SamplingMode::Sampled && params.top_k) {
    if (config_.supports_top_k) {
      body["top_k"] = *params.top_k;
    } else {
      std::call_once(top_k_warned_, [] {
        std::cerr << "warning: provider does not support top_k; dropping it\n";
      });
    }
  }

  std::mt19937_64 jitter_rng(std::random_device{}());
  std::string last_error;
  for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
    if (attempt > 0) {
      std::uniform_int_distribution<int> jitter(0, config_.backoff_initial_ms);
      int delay_ms =
          config_.backoff_initial_ms * (1 << (attempt - 1)) + jitter(jitter_rng);
      std::this_thread::sleep_for(std::chrono::milliseconds(delay_ms));
    }
    ++calls_;
    httplib::Client http(config_.base_url);
    http.set_connection_timeout(std::chrono::duration<double>(config_.request_timeout));
    http.set_read_timeout(std::chrono::duration<double>(config_.request_timeout));
    httplib::Headers headers = {{"Authorization", "Bearer " + token_}};
    auto res = http.Post("/chat/completions", headers, body.dump(),
                         "application/json");
    if (!res) {
      last_error = "transport: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status == 401 || res->status == 403)
      throw Error(ErrorCode::AuthError,
                  "status " + std::to_string(res->status) + ": " + res->body);
    if (res->status == 429 || res->status >= 500) {
      last_error = "status " + std::to_string(res->status);
      continue;
    }
    if (res->status != 200)
      throw Error(ErrorCode::TransportError,
                  "status " + std::to_string(res->status) + ": " + res->body);
    try {
      json reply = json::parse(res->body);
      return reply.at("choices").at(0).at("message").at("content")
          .get<std::string>();
    } catch (const std::exception& e) {
      throw Error(ErrorCode::TransportError,
                  std::string("malformed completion response: ") + e.what());
    }
  }
  throw Error(ErrorCode::TransportError,
              "retries exhausted (" + std::to_string(config_.max_retries) +
                  "): " + last_error);
}

DiskCache::DiskCache(std::filesystem::path dir) : dir_(std::move(dir)) {
  std::filesystem::create_directories(dir_);
}

std::optional<std::string> DiskCache::get(const std::string& digest) const {
  auto path = dir_ / (digest + ".json");
  std::ifstream in(path);
  if (!in) return std::nullopt;
  try {
    json j;
    in >> j;
    return j.at("text").get<std::string>();
  } catch (const std::exception&) {
    return std::nullopt;  // torn or foreign file: treat as a miss
  }
}

void DiskCache::put(const std::string& digest, const std::string& model,
                    const std::string& run_id, const std::string& text) {
  json j;
  j["model"] = model;
  j["run_id"] = run_id;
  j["text"] = text;
  auto tmp = dir_ / (digest + ".tmp." +
                     std::to_string(std::hash<std::thread::id>{}(
                         std::this_thread::get_id())));
  {
    std::ofstream out(tmp);
    if (!out)
      throw Error(ErrorCode::IoError, "cannot write cache entry " + tmp.string());
    out << j.dump();
  }
  std::filesystem::rename(tmp, dir_ / (digest + ".json"));
}

std::size_t DiskCache::purge(PurgeScope scope, const std::string& match) {
  std::size_t evicted = 0;
  if (!std::filesystem::exists(dir_)) return 0;
  for (const auto& entry : std::filesystem::directory_iterator(dir_)) {
    if (entry.path().extension() != ".json") continue;
    bool kill = scope == PurgeScope::All;
    if (!kill) {
      std::ifstream in(entry.path());
      json j;
      try {
        in >> j;
      } catch (const std::exception&) {
        continue;
      }
      std::string field = scope == PurgeScope::ByModel ? "model" : "run_id";
      kill = j.value(field, "") == match;
    }
    if (kill) {
      std::filesystem::remove(entry.path());
      ++evicted;
    }
  }
  return evicted;
}

Client::Client(ProviderConfig config, std::shared_ptr<Provider> provider,
               std::shared_ptr<DiskCache> cache, std::string run_id)
    : config_(std::move(config)),
      provider_(std::move(provider)),
      cache_(std::move(cache)),
      run_id_(std::move(run_id)) {}

Client Client::make(const ProviderConfig& config,
                    std::shared_ptr<DiskCache> cache, std::string run_id) {
  config.validate();
  std::shared_ptr<Provider> provider;
  if (config.kind == ProviderKind::Scripted) {
    provider = ScriptedProvider::from_file(config.script_path);
  } else {
    provider = std::make_shared<OpenAiProvider>(config);
  }
  return Client(config, std::move(provider), std::move(cache),
                std::move(run_id));
}

std::string Client::complete_at(const Transcript& transcript,
                                const SamplingParams& params, int sample_index,
                                std::vector<std::string>* keys_out) {
  params.validate();
  // One single-completion request per sample; greedy never goes on the
  // wire with temperature > 0 or n > 1.
  SamplingParams one = params;
  one.n_samples = 1;
  SamplingParams key_params = params;
  key_params.n_samples = 1;
  std::string digest = cache_key(config_, transcript, key_params, sample_index);
  if (keys_out) keys_out->push_back(digest);
  if (cache_) {
    if (auto hit = cache_->get(digest)) return *hit;
  }
  std::string text = provider_->complete_one(transcript, one, sample_index);
  if (cache_) cache_->put(digest, config_.model_name, run_id_, text);
  return text;
}

std::vector<std::string> Client::complete(const Transcript& transcript,
                                          const SamplingParams& params,
                                          std::vector<std::string>* keys_out) {
  params.validate();
  std::vector<std::string> completions;
  completions.reserve(params.n_samples);
  for (int i = 0; i < params.n_samples; ++i)
    completions.push_back(complete_at(transcript, params, i, keys_out));
  return completions;
}

}  // namespace ccp::llm
