#include "methods.hpp"

#include <algorithm>
#include <map>
#include <sstream>

namespace ccp::methods {

using promptkit::Purpose;
using promptkit::TemplateLibrary;

namespace {

SamplingParams sampled_for(const llm::Client& client) {
  return llm::sampled_defaults(client.config());
}

const promptkit::PromptTemplate with_shots(const TemplateLibrary& templates,
                                           Dataset dataset, Purpose purpose,
                                           int shot_count) {
  promptkit::PromptTemplate t = templates.get(dataset, purpose);
  t.shot_count = shot_count;
  return t;
}

Prediction single_call(MethodId method, const Instance& instance,
                       const MethodConfig& cfg,
                       const TemplateLibrary& templates, llm::Client& client,
                       const SamplingParams& params) {
  auto tmpl = with_shots(templates, instance.dataset,
                         method == MethodId::SP ? Purpose::SpAnswer
                                                : Purpose::CotAnswer,
                         cfg.shot_count);
  Transcript t = promptkit::build_answer_prompt(method, instance, {}, tmpl);
  Prediction pred;
  pred.instance_id = instance.id;
  pred.method = method;
  pred.raw_text =
      client.complete(t, params, &pred.cache_keys).front();
  pred.label = promptkit::extract_final_answer(pred.raw_text, instance.dataset);
  return pred;
}

}  // namespace

void MethodConfig::validate() const {
  if (n_cf < 1 || consistency_k < 1 || reflection_iters < 1 ||
      debate_agents < 1 || debate_rounds < 1 || shot_count < 1)
    throw Error(ErrorCode::ConfigError, "method counts must be >= 1");
}

json MethodConfig::to_json() const {
  json j;
  j["method"] = to_string(method);
  j["n_cf"] = n_cf;
  j["consistency_k"] = consistency_k;
  j["reflection_iters"] = reflection_iters;
  j["debate_agents"] = debate_agents;
  j["debate_rounds"] = debate_rounds;
  j["shot_count"] = shot_count;
  return j;
}

MethodConfig MethodConfig::from_json(const json& j) {
  MethodConfig c;
  c.method = method_from_string(j.at("method").get<std::string>());
  c.n_cf = j.value("n_cf", 1);
  c.consistency_k = j.value("consistency_k", 40);
  c.reflection_iters = j.value("reflection_iters", 2);
  c.debate_agents = j.value("debate_agents", 3);
  c.debate_rounds = j.value("debate_rounds", 2);
  c.shot_count = j.value("shot_count", 3);
  c.validate();
  return c;
}

Label majority_vote(const std::vector<Label>& labels) {
  if (labels.empty()) throw Error(ErrorCode::EmptyInput, "no labels to vote on");
  std::map<Label, std::size_t> counts;
  for (Label l : labels)
    if (l != Label::Unparseable) counts[l]++;
  if (counts.empty()) return Label::Unparseable;
  std::size_t best = 0;
  for (const auto& [_, n] : counts) best = std::max(best, n);
  for (Label l : labels) {
    if (l != Label::Unparseable && counts[l] == best) return l;
  }
  return Label::Unparseable;
}

Prediction run_sp(const Instance& instance, const MethodConfig& cfg,
                  const TemplateLibrary& templates, llm::Client& client) {
  return single_call(MethodId::SP, instance, cfg, templates, client,
                     SamplingParams::greedy());
}

Prediction run_cot(const Instance& instance, const MethodConfig& cfg,
                   const TemplateLibrary& templates, llm::Client& client) {
  return single_call(MethodId::CoT, instance, cfg, templates, client,
                     SamplingParams::greedy());
}

Prediction run_consistency(const Instance& instance, const MethodConfig& cfg,
                           const TemplateLibrary& templates,
                           llm::Client& client) {
  auto tmpl = with_shots(templates, instance.dataset, Purpose::CotAnswer,
                         cfg.shot_count);
  Transcript t = promptkit::build_answer_prompt(MethodId::Consistency, instance,
                                                {}, tmpl);
  SamplingParams params = sampled_for(client);
  params.n_samples = cfg.consistency_k;
  Prediction pred;
  pred.instance_id = instance.id;
  pred.method = MethodId::Consistency;
  auto completions = client.complete(t, params, &pred.cache_keys);
  std::vector<Label> labels;
  for (const auto& text : completions)
    labels.push_back(promptkit::extract_final_answer(text, instance.dataset));
  pred.label = majority_vote(labels);
  pred.raw_text = completions.back();
  return pred;
}

Prediction run_reflection(const Instance& instance, const MethodConfig& cfg,
                          const TemplateLibrary& templates,
                          llm::Client& client) {
  auto tmpl = with_shots(templates, instance.dataset, Purpose::CotAnswer,
                         cfg.shot_count);
  Transcript t = promptkit::build_answer_prompt(MethodId::Reflection, instance,
                                                {}, tmpl);
  SamplingParams params = sampled_for(client);
  Prediction pred;
  pred.instance_id = instance.id;
  pred.method = MethodId::Reflection;
  std::string last = client.complete(t, params, &pred.cache_keys).front();
  for (int iter = 1; iter < cfg.reflection_iters; ++iter) {
    t.append(Role::Assistant, last);
    t.append(Role::User, templates.phrase("reflection"));
    last = client.complete(t, params, &pred.cache_keys).front();
  }
  pred.raw_text = last;
  pred.label = promptkit::extract_final_answer(last, instance.dataset);
  return pred;
}

Prediction run_debate(const Instance& instance, const MethodConfig& cfg,
                      const TemplateLibrary& templates, llm::Client& client) {
  if (cfg.debate_agents < 2)
    throw Error(ErrorCode::ConfigError, "debate needs at least 2 agents");
  auto tmpl = with_shots(templates, instance.dataset, Purpose::CotAnswer,
                         cfg.shot_count);
  SamplingParams params = sampled_for(client);
  Prediction pred;
  pred.instance_id = instance.id;
  pred.method = MethodId::Debate;

  // The per-agent sample index keeps identically-prompted agents in
  // distinct cache slots.
  std::vector<Transcript> agents;
  std::vector<std::string> answers(cfg.debate_agents);
  for (int a = 0; a < cfg.debate_agents; ++a) {
    Transcript t =
        promptkit::build_answer_prompt(MethodId::Debate, instance, {}, tmpl);
    answers[a] = client.complete_at(t, params, a, &pred.cache_keys);
    agents.push_back(std::move(t));
    agents[a].append(Role::Assistant, answers[a]);
  }
  for (int round = 1; round < cfg.debate_rounds; ++round) {
    std::vector<std::string> next(cfg.debate_agents);
    for (int a = 0; a < cfg.debate_agents; ++a) {
      std::ostringstream msg;
      msg << templates.phrase("debate_intro") << "\n";
      for (int b = 0; b < cfg.debate_agents; ++b) {
        if (b == a) continue;
        msg << templates.phrase("debate_agent_block") << answers[b] << "\n";
      }
      msg << templates.phrase("debate_outro");
      agents[a].append(Role::User, msg.str());
      next[a] = client.complete_at(agents[a], params, a, &pred.cache_keys);
      agents[a].append(Role::Assistant, next[a]);
    }
    answers = std::move(next);
  }
  std::vector<Label> finals;
  for (const auto& text : answers)
    finals.push_back(promptkit::extract_final_answer(text, instance.dataset));
  pred.label = majority_vote(finals);
  pred.raw_text = answers.back();
  return pred;
}

namespace {

std::vector<CounterfactualQuestion> generate_cfs(const Instance& instance,
                                                 const MethodConfig& cfg,
                                                 const TemplateLibrary& templates,
                                                 llm::Client& client,
                                                 Prediction& pred) {
  auto gen_tmpl = with_shots(templates, instance.dataset, Purpose::CfGeneration,
                             cfg.shot_count);
  Transcript gen = promptkit::build_cf_generation_prompt(instance, gen_tmpl);
  std::string completion =
      client.complete(gen, SamplingParams::greedy(), &pred.cache_keys).front();
  auto cfs = promptkit::parse_cf_questions(completion, instance.dataset,
                                           instance.id, instance.question);
  if (static_cast<int>(cfs.size()) > cfg.n_cf)
    cfs.resize(cfg.n_cf);
  return cfs;
}

// Runs the counterfactual-answer leg of CCP: one call per counterfactual,
// all on the shared transcript. Returns the transcript awaiting the final
// continuation and the verbatim last cf completion.
std::pair<Transcript, std::string> answer_cfs(
    const Instance& instance, const MethodConfig& cfg,
    const TemplateLibrary& templates, llm::Client& client,
    const std::vector<CounterfactualQuestion>& cfs, MethodId method,
    Prediction& pred) {
  auto tmpl = with_shots(templates, instance.dataset, Purpose::CcpAnswer,
                         cfg.shot_count);
  Transcript t =
      promptkit::build_answer_prompt(method, instance, cfs.front(), tmpl);
  std::string cf_answer;
  for (std::size_t i = 0; i < cfs.size(); ++i) {
    cf_answer =
        client.complete(t, SamplingParams::greedy(), &pred.cache_keys).front();
    pred.intermediate.emplace_back(
        cfs[i],
        promptkit::extract_intermediate_answer(cf_answer, instance.dataset));
    if (i + 1 < cfs.size())
      t = promptkit::append_related_turn(std::move(t), cf_answer, cfs[i + 1],
                                         instance.dataset);
  }
  return {std::move(t), std::move(cf_answer)};
}

}  // namespace

Prediction run_ccp(const Instance& instance, const MethodConfig& cfg,
                   const TemplateLibrary& templates, llm::Client& client) {
  Prediction pred;
  pred.instance_id = instance.id;
  pred.method = MethodId::CCP;
  std::vector<CounterfactualQuestion> cfs;
  try {
    cfs = generate_cfs(instance, cfg, templates, client, pred);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::EmptyGeneration) throw;
    Prediction fb = run_cot(instance, cfg, templates, client);
    fb.method = MethodId::CCP;
    fb.fallback = true;
    fb.cache_keys.insert(fb.cache_keys.begin(), pred.cache_keys.begin(),
                         pred.cache_keys.end());
    return fb;
  }
  auto [t, cf_answer] =
      answer_cfs(instance, cfg, templates, client, cfs, MethodId::CCP, pred);
  t = promptkit::append_original_turn(std::move(t), cf_answer, instance);
  pred.raw_text =
      client.complete(t, SamplingParams::greedy(), &pred.cache_keys).front();
  pred.label = promptkit::extract_final_answer(pred.raw_text, instance.dataset);
  return pred;
}

Prediction run_ccp_e2e(const Instance& instance, const MethodConfig& cfg,
                       const TemplateLibrary& templates, llm::Client& client) {
  auto tmpl = with_shots(templates, instance.dataset, Purpose::CcpE2eAnswer,
                         cfg.shot_count);
  Transcript t =
      promptkit::build_answer_prompt(MethodId::CcpE2e, instance, {}, tmpl);
  Prediction pred;
  pred.instance_id = instance.id;
  pred.method = MethodId::CcpE2e;
  pred.raw_text =
      client.complete(t, SamplingParams::greedy(), &pred.cache_keys).front();
  pred.label = promptkit::extract_final_answer(pred.raw_text, instance.dataset);
  return pred;
}

Prediction run_dir_a(const Instance& instance, const MethodConfig& cfg,
                     const TemplateLibrary& templates, llm::Client& client) {
  if (instance.dataset == Dataset::Mctaco)
    throw Error(ErrorCode::UnsupportedDataset,
                "dir_a requires a before/after task; counterfactual answers "
                "do not determine MCTACO originals");
  Prediction pred;
  pred.instance_id = instance.id;
  pred.method = MethodId::DirA;
  auto cfs = generate_cfs(instance, cfg, templates, client, pred);
  auto [t, cf_answer] =
      answer_cfs(instance, cfg, templates, client, cfs, MethodId::DirA, pred);
  (void)t;
  pred.raw_text = cf_answer;
  pred.label = flip_label(pred.intermediate.back().second);
  return pred;
}

Prediction run_ret_q(const Instance& instance, const MethodConfig& cfg,
                     const TemplateLibrary& templates, llm::Client& client,
                     const std::vector<Instance>& group_members) {
  std::vector<CounterfactualQuestion> cfs;
  for (const auto& sibling : group_members) {
    if (sibling.id == instance.id) continue;
    CounterfactualQuestion cf;
    cf.origin_id = instance.id;
    cf.text = instance.dataset == Dataset::Mctaco
                  ? sibling.candidate.value_or("")
                  : sibling.question;
    cf.source = CfSource::Retrieved;
    cf.revision_type = RevisionType::Unlabeled;
    cfs.push_back(std::move(cf));
    if (static_cast<int>(cfs.size()) == cfg.n_cf) break;
  }
  if (cfs.empty())
    throw Error(ErrorCode::SingletonGroup,
                "instance " + instance.id + " has no sibling to retrieve");
  Prediction pred;
  pred.instance_id = instance.id;
  pred.method = MethodId::RetQ;
  auto [t, cf_answer] =
      answer_cfs(instance, cfg, templates, client, cfs, MethodId::RetQ, pred);
  t = promptkit::append_original_turn(std::move(t), cf_answer, instance);
  pred.raw_text =
      client.complete(t, SamplingParams::greedy(), &pred.cache_keys).front();
  pred.label = promptkit::extract_final_answer(pred.raw_text, instance.dataset);
  return pred;
}

std::set<std::string> run_mcqa(const std::vector<Instance>& question_group,
                               const MethodConfig& cfg,
                               const TemplateLibrary& templates,
                               llm::Client& client) {
  if (question_group.empty())
    throw Error(ErrorCode::EmptyInput, "empty question group");
  for (const auto& inst : question_group) {
    if (inst.dataset != Dataset::Mctaco)
      throw Error(ErrorCode::UnsupportedDataset, "mcqa is MCTACO-only");
    if (inst.group_id != question_group.front().group_id)
      throw Error(ErrorCode::ConfigError,
                  "mcqa group must share one question");
  }
  if (cfg.method == MethodId::McqaCCP) {
    std::set<std::string> plausible;
    for (const auto& inst : question_group) {
      Prediction p = run_ccp(inst, cfg, templates, client);
      if (p.label == Label::Yes) plausible.insert(inst.id);
    }
    return plausible;
  }
  // McqaCoT: one call listing every candidate.
  auto tmpl = with_shots(templates, Dataset::Mctaco, Purpose::McqaAnswer,
                         cfg.shot_count);
  const Instance& head = question_group.front();
  std::ostringstream user;
  user << "Passage: " << head.context << "\nQuestion: " << head.question
       << "\nCandidate answers:";
  for (std::size_t i = 0; i < question_group.size(); ++i) {
    user << "\n" << (i + 1) << ". " << question_group[i].candidate.value_or("");
  }
  Transcript t(tmpl.system_text);
  for (int i = 0; i < tmpl.shot_count; ++i) {
    const auto& ex = tmpl.exemplars[i % tmpl.exemplars.size()];
    for (const auto& m : ex.turns) t.append(m.role, m.text);
  }
  t.append(Role::User, user.str());
  std::string text =
      client.complete(t, SamplingParams::greedy()).front();

  // Candidate numbers listed after the last "Final answer:".
  std::string lo = text;
  std::transform(lo.begin(), lo.end(), lo.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  std::size_t anchor = lo.rfind("final answer:");
  if (anchor == std::string::npos)
    throw Error(ErrorCode::ParseError, "mcqa completion lacks final answer");
  std::string tail = text.substr(anchor + 13);
  std::set<std::string> plausible;
  std::size_t i = 0;
  while (i < tail.size()) {
    if (std::isdigit(static_cast<unsigned char>(tail[i]))) {
      std::size_t j = i;
      while (j < tail.size() && std::isdigit(static_cast<unsigned char>(tail[j])))
        ++j;
      int idx = std::stoi(tail.substr(i, j - i));
      if (idx < 1 || idx > static_cast<int>(question_group.size()))
        throw Error(ErrorCode::ParseError,
                    "mcqa answer mentions candidate " + std::to_string(idx) +
                        " outside 1.." + std::to_string(question_group.size()));
      plausible.insert(question_group[idx - 1].id);
      i = j;
    } else {
      ++i;
    }
  }
  return plausible;
}

Prediction run_method(const Instance& instance, const MethodConfig& cfg,
                      const TemplateLibrary& templates, llm::Client& client,
                      const std::vector<Instance>* group_members) {
  switch (cfg.method) {
    case MethodId::SP: return run_sp(instance, cfg, templates, client);
    case MethodId::CoT: return run_cot(instance, cfg, templates, client);
    case MethodId::Consistency:
      return run_consistency(instance, cfg, templates, client);
    case MethodId::Reflection:
      return run_reflection(instance, cfg, templates, client);
    case MethodId::Debate: return run_debate(instance, cfg, templates, client);
    case MethodId::CCP: return run_ccp(instance, cfg, templates, client);
    case MethodId::CcpE2e:
      return run_ccp_e2e(instance, cfg, templates, client);
    case MethodId::DirA: return run_dir_a(instance, cfg, templates, client);
    case MethodId::RetQ:
      if (!group_members)
        throw Error(ErrorCode::ConfigError, "ret_q needs the instance group");
      return run_ret_q(instance, cfg, templates, client, *group_members);
    case MethodId::McqaCoT:
    case MethodId::McqaCCP:
      throw Error(ErrorCode::ConfigError,
                  "mcqa methods run per question group, not per instance");
  }
  throw Error(ErrorCode::ConfigError, "bad method");
}

}  // namespace ccp::methods
