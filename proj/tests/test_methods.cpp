#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <map>
#include <random>

#include "fixtures.hpp"
#include "methods.hpp"

using namespace ccp;
using namespace ccp::methods;

namespace {

const promptkit::TemplateLibrary& lib() {
  static auto l = promptkit::TemplateLibrary::load(fixtures::template_dir());
  return l;
}

struct Rig {
  std::filesystem::path dir;
  std::shared_ptr<llm::ScriptedProvider> provider;
  std::shared_ptr<llm::DiskCache> cache;
  llm::Client client;

  explicit Rig(Dataset dataset,
               std::vector<llm::ScriptedRule> extra = {})
      : provider(nullptr), cache(nullptr), client(make(dataset, extra)) {}

  llm::Client make(Dataset dataset, std::vector<llm::ScriptedRule> extra) {
    dir = fixtures::fresh_dir("methods");
    auto rules = fixtures::default_rules(dataset);
    rules.insert(rules.begin(), extra.begin(), extra.end());
    provider = std::make_shared<llm::ScriptedProvider>(std::move(rules));
    cache = std::make_shared<llm::DiskCache>(dir / "cache");
    llm::ProviderConfig cfg;
    cfg.kind = llm::ProviderKind::Scripted;
    cfg.model_name = "scripted-test";
    return llm::Client(cfg, provider, cache);
  }

  ~Rig() { std::filesystem::remove_all(dir); }
};

Instance tempeval(const std::string& id = "tempevalqa_bi:1:0") {
  Instance i;
  i.id = id;
  i.dataset = Dataset::TempEvalQaBi;
  i.group_id = "g1";
  i.context = "On day 1 the ship departed. Later the storm arrived.";
  i.question = "Did the departure happen before event 1?";
  i.gold = Label::Yes;
  return i;
}

Instance tracie() {
  Instance i;
  i.id = "tracie:1:0";
  i.dataset = Dataset::Tracie;
  i.group_id = "g1";
  i.context = "Story 1. The meeting ran long and dinner was late.";
  i.question = "the meeting starts before dinner 1";
  i.gold = Label::Positive;
  return i;
}

Instance mctaco(int cand = 0) {
  Instance i;
  i.id = "mctaco:" + std::to_string(cand + 1) + ":" + std::to_string(cand);
  i.dataset = Dataset::Mctaco;
  i.group_id = "q0";
  i.context = "Passage 0. The storm lasted through the night.";
  i.question = "How long did event 0 last?";
  i.candidate = "candidate " + std::to_string(cand);
  i.gold = cand % 2 == 0 ? Label::Yes : Label::No;
  i.qtype = QType::Duration;
  return i;
}

MethodConfig config_for(MethodId m) {
  MethodConfig c;
  c.method = m;
  return c;
}

}  // namespace

// Oracle: count labels by hand and apply the tie rule directly.
TEST_CASE("majority vote matches a brute-force counter") {
  using L = Label;
  CHECK(majority_vote({L::Yes, L::No, L::Yes}) == L::Yes);
  CHECK(majority_vote({L::No, L::Yes, L::Yes, L::No, L::No}) == L::No);
  // Tie: earliest-occurring tied label wins.
  CHECK(majority_vote({L::No, L::Yes}) == L::No);
  CHECK(majority_vote({L::Yes, L::No}) == L::Yes);
  // Unparseable never outvotes a real label.
  CHECK(majority_vote({L::Unparseable, L::Unparseable, L::No}) == L::No);
  CHECK(majority_vote({L::Unparseable}) == L::Unparseable);
  CHECK_THROWS_AS(majority_vote({}), Error);

  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<Label> labels;
    int n = 1 + static_cast<int>(rng() % 9);
    for (int i = 0; i < n; ++i) {
      switch (rng() % 3) {
        case 0: labels.push_back(L::Yes); break;
        case 1: labels.push_back(L::No); break;
        default: labels.push_back(L::Unparseable); break;
      }
    }
    std::map<Label, int> counts;
    for (Label l : labels)
      if (l != L::Unparseable) counts[l]++;
    Label expect = L::Unparseable;
    int best = 0;
    for (const auto& [_, n2] : counts) best = std::max(best, n2);
    for (Label l : labels) {
      if (l != L::Unparseable && counts[l] == best) {
        expect = l;
        break;
      }
    }
    CHECK(majority_vote(labels) == expect);
  }
}

TEST_CASE("call budgets match the per-method protocol exactly") {
  struct Row {
    MethodId method;
    std::size_t calls;
  };
  const Row rows[] = {
      {MethodId::SP, 1},       {MethodId::CoT, 1},
      {MethodId::Consistency, 40}, {MethodId::Reflection, 2},
      {MethodId::Debate, 6},   {MethodId::CCP, 3},
      {MethodId::CcpE2e, 1},   {MethodId::DirA, 2},
  };
  auto i = tempeval();
  auto sibling = tempeval("tempevalqa_bi:2:0");
  sibling.question = "Did the departure happen after event 1?";
  sibling.gold = Label::No;
  std::vector<Instance> group = {i, sibling};
  for (const auto& row : rows) {
    Rig rig(Dataset::TempEvalQaBi);
    auto pred = run_method(i, config_for(row.method), lib(), rig.client,
                           &group);
    CHECK(rig.provider->calls() == row.calls);
    CHECK(pred.method == row.method);
    CHECK(pred.cache_keys.size() == row.calls);
  }
  // Ret.Q: 1 + n_cf with no generation call.
  {
    Rig rig(Dataset::TempEvalQaBi);
    auto pred = run_method(i, config_for(MethodId::RetQ), lib(), rig.client,
                           &group);
    CHECK(rig.provider->calls() == 2);
    CHECK(pred.method == MethodId::RetQ);
  }
}

TEST_CASE("sp and cot parse the scripted final answer") {
  Rig rig(Dataset::TempEvalQaBi);
  auto i = tempeval();
  CHECK(run_sp(i, config_for(MethodId::SP), lib(), rig.client).label ==
        Label::Yes);
  CHECK(run_cot(i, config_for(MethodId::CoT), lib(), rig.client).label ==
        Label::Yes);
}

TEST_CASE("consistency takes the majority over its samples") {
  Rig rig(Dataset::TempEvalQaBi);
  auto cfg = config_for(MethodId::Consistency);
  cfg.consistency_k = 5;
  auto pred = run_consistency(tempeval(), cfg, lib(), rig.client);
  CHECK(rig.provider->calls() == 5);
  CHECK(pred.label == Label::Yes);
}

TEST_CASE("ccp records the intermediate counterfactual exchange") {
  Rig rig(Dataset::TempEvalQaBi);
  auto pred = run_ccp(tempeval(), config_for(MethodId::CCP), lib(), rig.client);
  CHECK(pred.label == Label::Yes);
  REQUIRE(pred.intermediate.size() == 1);
  CHECK(pred.intermediate[0].first.text ==
        "Did the departure happen after the original event?");
  CHECK(pred.intermediate[0].second == Label::No);
  CHECK_FALSE(pred.fallback);
}

TEST_CASE("ccp falls back to cot when generation yields nothing") {
  // MCTACO empty generation: only separators come back.
  std::vector<llm::ScriptedRule> extra = {
      {"Generate related candidate answers", " /\\  /\\ ", false, false}};
  Rig rig(Dataset::Mctaco, extra);
  auto pred = run_ccp(mctaco(), config_for(MethodId::CCP), lib(), rig.client);
  CHECK(pred.method == MethodId::CCP);
  CHECK(pred.fallback);
  CHECK(pred.label == Label::Yes);
  // generation + the cot fallback call
  CHECK(rig.provider->calls() == 2);
}

// Constraint semantics: the original's answer is the negation of its
// relation-flipped counterfactual, for both label alphabets.
TEST_CASE("dir_a final label is the flipped counterfactual answer") {
  struct Case {
    Dataset dataset;
    std::string cf_answer;
    Label expect;
  };
  const Case cases[] = {
      {Dataset::TempEvalQaBi, "Answer: yes", Label::No},
      {Dataset::TempEvalQaBi, "Answer: no", Label::Yes},
      {Dataset::Tracie, "Answer: positive", Label::Negative},
      {Dataset::Tracie, "Answer: negative", Label::Positive},
  };
  for (const auto& c : cases) {
    std::string stage2 = c.dataset == Dataset::TempEvalQaBi
                             ? "Related question:"
                             : "Related hypothesis:";
    std::vector<llm::ScriptedRule> extra = {
        {stage2, c.cf_answer, false, false}};
    Rig rig(c.dataset, extra);
    Instance i = c.dataset == Dataset::TempEvalQaBi ? tempeval() : tracie();
    auto pred = run_dir_a(i, config_for(MethodId::DirA), lib(), rig.client);
    CHECK(pred.label == c.expect);
    REQUIRE(pred.intermediate.size() == 1);
    CHECK(pred.label == flip_label(pred.intermediate[0].second));
  }
}

TEST_CASE("dir_a refuses MCTACO") {
  Rig rig(Dataset::Mctaco);
  CHECK_THROWS_AS(
      run_dir_a(mctaco(), config_for(MethodId::DirA), lib(), rig.client),
      Error);
}

TEST_CASE("ret_q uses the sibling question and needs one") {
  Rig rig(Dataset::TempEvalQaBi);
  auto i = tempeval();
  auto sibling = tempeval("tempevalqa_bi:2:0");
  sibling.question = "Did the departure happen after event 1?";
  std::vector<Instance> group = {i, sibling};
  auto pred = run_ret_q(i, config_for(MethodId::RetQ), lib(), rig.client,
                        group);
  REQUIRE(pred.intermediate.size() == 1);
  CHECK(pred.intermediate[0].first.text == sibling.question);
  CHECK(pred.intermediate[0].first.source == CfSource::Retrieved);

  CHECK_THROWS_AS(
      run_ret_q(i, config_for(MethodId::RetQ), lib(), rig.client, {i}),
      Error);
}

TEST_CASE("mcqa-ccp collects the per-candidate yes set") {
  // Candidate 0 answers yes, candidate 1 answers no.
  std::vector<llm::ScriptedRule> extra = {
      {"Now, can the candidate answer the given question? candidate answer: "
       "candidate 1",
       "Different rule for this one. Final answer: no", false, false}};
  Rig rig(Dataset::Mctaco, extra);
  std::vector<Instance> group = {mctaco(0), mctaco(1)};
  auto cfg = config_for(MethodId::McqaCCP);
  auto plausible = run_mcqa(group, cfg, lib(), rig.client);
  CHECK(plausible == std::set<std::string>{group[0].id});
}

TEST_CASE("mcqa-cot parses candidate numbers and rejects bad indices") {
  std::vector<llm::ScriptedRule> extra = {
      {"Candidate answers:", "Thinking it over. Final answer: 1 and 3", false,
       false}};
  Rig rig(Dataset::Mctaco, extra);
  std::vector<Instance> group = {mctaco(0), mctaco(1), mctaco(2)};
  auto cfg = config_for(MethodId::McqaCoT);
  auto plausible = run_mcqa(group, cfg, lib(), rig.client);
  CHECK(plausible == std::set<std::string>{group[0].id, group[2].id});

  std::vector<llm::ScriptedRule> bad = {
      {"Candidate answers:", "Final answer: 7", false, false}};
  Rig rig2(Dataset::Mctaco, bad);
  CHECK_THROWS_AS(run_mcqa(group, cfg, lib(), rig2.client), Error);
}

TEST_CASE("run_method rejects group methods and missing groups") {
  Rig rig(Dataset::Mctaco);
  auto cfg = config_for(MethodId::McqaCoT);
  CHECK_THROWS_AS(run_method(mctaco(), cfg, lib(), rig.client), Error);
  Rig rig2(Dataset::TempEvalQaBi);
  CHECK_THROWS_AS(
      run_method(tempeval(), config_for(MethodId::RetQ), lib(), rig2.client),
      Error);
}

TEST_CASE("method config validation and serialization") {
  MethodConfig c = config_for(MethodId::CCP);
  auto back = MethodConfig::from_json(c.to_json());
  CHECK(back.method == MethodId::CCP);
  CHECK(back.n_cf == 1);
  CHECK(back.consistency_k == 40);
  c.n_cf = 0;
  CHECK_THROWS_AS(c.validate(), Error);
}
