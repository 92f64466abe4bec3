#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <fstream>
#include <set>

#include "fixtures.hpp"
#include "llm_client.hpp"

using namespace ccp;
using namespace ccp::llm;

namespace {

ProviderConfig scripted_config(const std::string& model = "test-model") {
  ProviderConfig cfg;
  cfg.kind = ProviderKind::Scripted;
  cfg.model_name = model;
  return cfg;
}

Transcript simple_transcript(const std::string& user = "hello") {
  Transcript t("sys");
  t.append(Role::User, user);
  return t;
}

}  // namespace

TEST_CASE("scripted provider fires first matching rule, in order") {
  ScriptedProvider p({{"hello there", "specific", false, false},
                      {"hello", "generic", false, false}});
  CHECK(p.complete_one(simple_transcript("hello there"),
                       SamplingParams::greedy(), 0) == "specific");
  CHECK(p.complete_one(simple_transcript("hello world"),
                       SamplingParams::greedy(), 0) == "generic");
  CHECK(p.calls() == 2);
  CHECK_THROWS_AS(
      p.complete_one(simple_transcript("bye"), SamplingParams::greedy(), 0),
      Error);
}

TEST_CASE("consume_once rules retire after use") {
  ScriptedProvider p({{"hello", "first", true, false},
                      {"hello", "after", false, false}});
  CHECK(p.complete_one(simple_transcript(), SamplingParams::greedy(), 0) ==
        "first");
  CHECK(p.complete_one(simple_transcript(), SamplingParams::greedy(), 0) ==
        "after");
}

TEST_CASE("scripted provider loads rules from a script file") {
  auto dir = fixtures::fresh_dir("cl_script");
  auto path = dir / "script.json";
  {
    std::ofstream out(path);
    json j = {{"rules",
               {{{"match", "ping"}, {"response", "pong"}},
                {{"match", "once"}, {"response", "gone"},
                 {"consume_once", true}}}}};
    out << j.dump();
  }
  auto p = ScriptedProvider::from_file(path);
  CHECK(p->complete_one(simple_transcript("ping"), SamplingParams::greedy(),
                        0) == "pong");
  std::filesystem::remove_all(dir);
}

TEST_CASE("cache keys separate transcripts, params, models and samples") {
  auto cfg = scripted_config();
  auto t1 = simple_transcript("a");
  auto t2 = simple_transcript("b");
  auto greedy = SamplingParams::greedy();
  auto sampled = SamplingParams::sampled(0.7);

  auto base = cache_key(cfg, t1, greedy, 0);
  CHECK(base == cache_key(cfg, t1, greedy, 0));  // deterministic
  CHECK(base != cache_key(cfg, t2, greedy, 0));
  CHECK(base != cache_key(cfg, t1, sampled, 0));
  CHECK(base != cache_key(cfg, t1, greedy, 1));
  auto other = scripted_config("other-model");
  CHECK(base != cache_key(other, t1, greedy, 0));

  // Batch size is not part of the identity: sample i of an n=40 request
  // must hit the same entry as sample i requested alone.
  auto batch = SamplingParams::sampled(0.5, 40, 40);
  auto single = SamplingParams::sampled(0.5, 40, 1);
  CHECK(cache_key(cfg, t1, batch, 3) == cache_key(cfg, t1, single, 3));
}

TEST_CASE("disk cache round-trips and purges by scope") {
  auto dir = fixtures::fresh_dir("cl_cache");
  DiskCache cache(dir);
  CHECK_FALSE(cache.get("deadbeef").has_value());
  cache.put("k1", "model-a", "run-1", "text one");
  cache.put("k2", "model-a", "run-2", "text two");
  cache.put("k3", "model-b", "run-1", "text three");
  CHECK(cache.get("k1") == "text one");
  CHECK(cache.get("k3") == "text three");

  CHECK(cache.purge(PurgeScope::ByModel, "model-a") == 2);
  CHECK_FALSE(cache.get("k1").has_value());
  CHECK(cache.get("k3") == "text three");

  cache.put("k4", "model-b", "run-9", "four");
  CHECK(cache.purge(PurgeScope::ByRun, "run-1") == 1);
  CHECK(cache.get("k4") == "four");
  CHECK(cache.purge(PurgeScope::All) == 1);
  CHECK_FALSE(cache.get("k4").has_value());
  std::filesystem::remove_all(dir);
}

TEST_CASE("client serves repeats from cache without provider traffic") {
  auto dir = fixtures::fresh_dir("cl_reuse");
  auto cache = std::make_shared<DiskCache>(dir);
  auto provider = std::make_shared<ScriptedProvider>(
      std::vector<ScriptedRule>{{"hello", "cached reply", false, false}});
  Client client(scripted_config(), provider, cache, "run-x");

  std::vector<std::string> keys;
  auto first = client.complete(simple_transcript(), SamplingParams::greedy(),
                               &keys);
  REQUIRE(first.size() == 1);
  CHECK(first[0] == "cached reply");
  REQUIRE(keys.size() == 1);
  CHECK(provider->calls() == 1);

  auto second = client.complete(simple_transcript(), SamplingParams::greedy());
  CHECK(second == first);
  CHECK(provider->calls() == 1);  // cache hit, no new call

  // Byte-identity of the stored entry.
  CHECK(cache->get(keys[0]) == "cached reply");
  std::filesystem::remove_all(dir);
}

TEST_CASE("n-sample requests produce n distinct cache slots") {
  auto dir = fixtures::fresh_dir("cl_multi");
  auto cache = std::make_shared<DiskCache>(dir);
  auto provider = std::make_shared<ScriptedProvider>(
      std::vector<ScriptedRule>{{"hello", "vote", false, false}});
  Client client(scripted_config(), provider, cache);

  std::vector<std::string> keys;
  auto outs = client.complete(simple_transcript(),
                              SamplingParams::sampled(0.5, 40, 40), &keys);
  CHECK(outs.size() == 40);
  CHECK(provider->calls() == 40);
  CHECK(std::set<std::string>(keys.begin(), keys.end()).size() == 40);

  // Explicit sample index addresses the same slot.
  auto one = client.complete_at(simple_transcript(),
                                SamplingParams::sampled(0.5, 40, 1), 7);
  CHECK(one == "vote");
  CHECK(provider->calls() == 40);
  std::filesystem::remove_all(dir);
}

TEST_CASE("sampled defaults depend on top-k support") {
  ProviderConfig with_k = scripted_config();
  with_k.supports_top_k = true;
  auto p1 = sampled_defaults(with_k);
  CHECK(p1.temperature == doctest::Approx(0.5));
  CHECK(p1.top_k == 40);

  ProviderConfig without_k = scripted_config();
  auto p2 = sampled_defaults(without_k);
  CHECK(p2.temperature == doctest::Approx(0.7));
  CHECK_FALSE(p2.top_k.has_value());
}

TEST_CASE("provider config serialization never holds a secret value") {
  ProviderConfig cfg;
  cfg.kind = ProviderKind::OpenAiCompatible;
  cfg.base_url = "https://example.invalid/v1";
  cfg.model_name = "m";
  cfg.auth_env = "CCP_TEST_TOKEN";
  setenv("CCP_TEST_TOKEN", "super-secret-value", 1);
  auto dumped = cfg.to_json().dump();
  CHECK(dumped.find("super-secret-value") == std::string::npos);
  CHECK(dumped.find("CCP_TEST_TOKEN") != std::string::npos);
  auto back = ProviderConfig::from_json(cfg.to_json());
  CHECK(back.auth_env == "CCP_TEST_TOKEN");
  unsetenv("CCP_TEST_TOKEN");
}

TEST_CASE("provider config validation rejects incomplete setups") {
  ProviderConfig cfg;
  cfg.kind = ProviderKind::OpenAiCompatible;
  cfg.model_name = "m";
  CHECK_THROWS_AS(cfg.validate(), Error);  // no base_url
  cfg.base_url = "https://example.invalid/v1";
  CHECK_THROWS_AS(cfg.validate(), Error);  // no auth env var named
  cfg.auth_env = "TOKEN_VAR";
  CHECK_NOTHROW(cfg.validate());
  cfg.model_name = "";
  CHECK_THROWS_AS(cfg.validate(), Error);
}

TEST_CASE("greedy wire constraints: temperature 0 and a single sample") {
  auto g = SamplingParams::greedy();
  CHECK(g.mode == SamplingMode::Greedy);
  CHECK(g.temperature == 0.0);
  CHECK(g.n_samples == 1);
  CHECK_FALSE(g.top_k.has_value());
}
