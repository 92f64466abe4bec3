#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <random>

#include "core.hpp"

using namespace ccp;

TEST_CASE("flip_label is an involution and swaps within each label pair") {
  CHECK(flip_label(Label::Yes) == Label::No);
  CHECK(flip_label(Label::No) == Label::Yes);
  CHECK(flip_label(Label::Positive) == Label::Negative);
  CHECK(flip_label(Label::Negative) == Label::Positive);
  CHECK(flip_label(Label::Unparseable) == Label::Unparseable);
  for (Label l : {Label::Yes, Label::No, Label::Positive, Label::Negative,
                  Label::Unparseable}) {
    CHECK(flip_label(flip_label(l)) == l);
  }
}

TEST_CASE("enum string forms round-trip") {
  for (Label l : {Label::Yes, Label::No, Label::Positive, Label::Negative,
                  Label::Unparseable})
    CHECK(label_from_string(to_string(l)) == l);
  for (Dataset d : {Dataset::TempEvalQaBi, Dataset::Tracie, Dataset::Mctaco})
    CHECK(dataset_from_string(to_string(d)) == d);
  for (QType q : {QType::Duration, QType::Frequency, QType::Stationarity,
                  QType::Ordering, QType::TypicalTime})
    CHECK(qtype_from_string(to_string(q)) == q);
  for (MethodId m :
       {MethodId::SP, MethodId::CoT, MethodId::Consistency,
        MethodId::Reflection, MethodId::Debate, MethodId::CCP,
        MethodId::CcpE2e, MethodId::DirA, MethodId::RetQ, MethodId::McqaCoT,
        MethodId::McqaCCP})
    CHECK(method_from_string(to_string(m)) == m);
  CHECK_THROWS_AS(label_from_string("maybe"), Error);
  CHECK_THROWS_AS(method_from_string(""), Error);
}

TEST_CASE("instance JSON round-trip preserves every field") {
  Instance a;
  a.id = "mctaco:7:2";
  a.dataset = Dataset::Mctaco;
  a.group_id = "g1";
  a.context = "Passage text.";
  a.question = "How long?";
  a.candidate = "an hour";
  a.gold = Label::Yes;
  a.qtype = QType::Duration;

  auto b = Instance::from_json(a.to_json());
  CHECK(b.id == a.id);
  CHECK(b.dataset == a.dataset);
  CHECK(b.group_id == a.group_id);
  CHECK(b.context == a.context);
  CHECK(b.question == a.question);
  CHECK(b.candidate == a.candidate);
  CHECK(b.gold == a.gold);
  CHECK(b.qtype == a.qtype);

  Instance c;
  c.id = "tracie:1:0";
  c.dataset = Dataset::Tracie;
  c.group_id = "g2";
  c.gold = Label::Negative;
  auto d = Instance::from_json(c.to_json());
  CHECK_FALSE(d.candidate.has_value());
  CHECK_FALSE(d.qtype.has_value());
}

TEST_CASE("prediction JSON round-trip keeps intermediates and flags") {
  Prediction p;
  p.instance_id = "x";
  p.method = MethodId::CCP;
  p.label = Label::No;
  p.raw_text = "Final answer: no";
  CounterfactualQuestion cf;
  cf.origin_id = "x";
  cf.text = "Did B happen before A?";
  cf.revision_type = RevisionType::RelationFlip;
  p.intermediate.emplace_back(cf, Label::Yes);
  p.cache_keys = {"abc", "def"};
  p.fallback = true;

  auto q = Prediction::from_json(p.to_json());
  CHECK(q.instance_id == p.instance_id);
  CHECK(q.method == p.method);
  CHECK(q.label == p.label);
  CHECK(q.intermediate.size() == 1);
  CHECK(q.intermediate[0].first.text == cf.text);
  CHECK(q.intermediate[0].second == Label::Yes);
  CHECK(q.cache_keys == p.cache_keys);
  CHECK(q.fallback);
  CHECK_FALSE(q.error);
}

TEST_CASE("transcript enforces system-first then alternation") {
  Transcript t("sys");
  CHECK(t.last_role() == Role::System);
  t.append(Role::User, "u1");
  CHECK_THROWS_AS(t.append(Role::User, "u2"), Error);
  t.append(Role::Assistant, "a1");
  CHECK_THROWS_AS(t.append(Role::Assistant, "a2"), Error);
  t.append(Role::User, "u2");
  CHECK(t.messages().size() == 4);

  Transcript bad;
  CHECK_THROWS_AS(bad.append(Role::Assistant, "a"), Error);

  auto round = Transcript::from_json(t.to_json());
  REQUIRE(round.messages().size() == t.messages().size());
  for (std::size_t i = 0; i < t.messages().size(); ++i) {
    CHECK(round.messages()[i].role == t.messages()[i].role);
    CHECK(round.messages()[i].text == t.messages()[i].text);
  }
}

TEST_CASE("sampling params validate and round-trip") {
  CHECK_NOTHROW(SamplingParams::greedy().validate());
  auto s = SamplingParams::sampled(0.5, 40, 40);
  CHECK_NOTHROW(s.validate());
  auto r = SamplingParams::from_json(s.to_json());
  CHECK(r.mode == SamplingMode::Sampled);
  CHECK(r.temperature == doctest::Approx(0.5));
  CHECK(r.top_k == 40);
  CHECK(r.n_samples == 40);

  SamplingParams bad = SamplingParams::greedy();
  bad.n_samples = 0;
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = SamplingParams::greedy();
  bad.temperature = -1;
  CHECK_THROWS_AS(bad.validate(), Error);
}

// Property: grouping is a partition (every instance lands in exactly one
// group keyed by its own group_id), checked against random inputs.
TEST_CASE("group_instances partitions the input") {
  std::mt19937_64 rng(42);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<Instance> insts;
    int n = 1 + static_cast<int>(rng() % 40);
    for (int i = 0; i < n; ++i) {
      Instance inst;
      inst.id = "tracie:" + std::to_string(i) + ":0";
      inst.dataset = Dataset::Tracie;
      inst.group_id = "g" + std::to_string(rng() % 8);
      inst.gold = Label::Positive;
      insts.push_back(inst);
    }
    auto groups = group_instances(insts);
    std::size_t total = 0;
    for (const auto& [gid, members] : groups) {
      total += members.size();
      for (const auto& m : members) CHECK(m.group_id == gid);
    }
    CHECK(total == insts.size());
  }
}

TEST_CASE("group_instances rejects mixed datasets and empty group ids") {
  Instance a;
  a.id = "tracie:1:0";
  a.dataset = Dataset::Tracie;
  a.group_id = "g";
  Instance b = a;
  b.id = "mctaco:1:0";
  b.dataset = Dataset::Mctaco;
  CHECK_THROWS_AS(group_instances({a, b}), Error);

  Instance c = a;
  c.group_id = "";
  CHECK_THROWS_AS(group_instances({c}), Error);
}
