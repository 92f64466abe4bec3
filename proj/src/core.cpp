#include "core.hpp"

#include <algorithm>

namespace ccp {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::PairingError: return "PairingError";
    case ErrorCode::UnknownLabel: return "UnknownLabel";
    case ErrorCode::UnknownCategory: return "UnknownCategory";
    case ErrorCode::MixedDataset: return "MixedDataset";
    case ErrorCode::EmptyGroupId: return "EmptyGroupId";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::EmptyGeneration: return "EmptyGeneration";
    case ErrorCode::TemplateMismatch: return "TemplateMismatch";
    case ErrorCode::MissingCounterfactual: return "MissingCounterfactual";
    case ErrorCode::RoleViolation: return "RoleViolation";
    case ErrorCode::TransportError: return "TransportError";
    case ErrorCode::AuthError: return "AuthError";
    case ErrorCode::ScriptGap: return "ScriptGap";
    case ErrorCode::UnsupportedDataset: return "UnsupportedDataset";
    case ErrorCode::SingletonGroup: return "SingletonGroup";
    case ErrorCode::MissingGold: return "MissingGold";
    case ErrorCode::MissingPrediction: return "MissingPrediction";
    case ErrorCode::UniverseMismatch: return "UniverseMismatch";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::ManifestMismatch: return "ManifestMismatch";
    case ErrorCode::DatasetMismatch: return "DatasetMismatch";
    case ErrorCode::RunAborted: return "RunAborted";
    case ErrorCode::IoError: return "IoError";
  }
  return "UnknownError";
}

std::string to_string(Label l) {
  switch (l) {
    case Label::Yes: return "yes";
    case Label::No: return "no";
    case Label::Positive: return "positive";
    case Label::Negative: return "negative";
    case Label::Unparseable: return "unparseable";
  }
  return "unparseable";
}

std::string to_string(Dataset d) {
  switch (d) {
    case Dataset::TempEvalQaBi: return "tempevalqa_bi";
    case Dataset::Tracie: return "tracie";
    case Dataset::Mctaco: return "mctaco";
  }
  return "tempevalqa_bi";
}

std::string to_string(QType q) {
  switch (q) {
    case QType::Duration: return "duration";
    case QType::Frequency: return "frequency";
    case QType::Stationarity: return "stationarity";
    case QType::Ordering: return "ordering";
    case QType::TypicalTime: return "typical_time";
  }
  return "duration";
}

std::string to_string(MethodId m) {
  switch (m) {
    case MethodId::SP: return "sp";
    case MethodId::CoT: return "cot";
    case MethodId::Consistency: return "consistency";
    case MethodId::Reflection: return "reflection";
    case MethodId::Debate: return "debate";
    case MethodId::CCP: return "ccp";
    case MethodId::CcpE2e: return "ccp_e2e";
    case MethodId::DirA: return "dir_a";
    case MethodId::RetQ: return "ret_q";
    case MethodId::McqaCoT: return "mcqa_cot";
    case MethodId::McqaCCP: return "mcqa_ccp";
  }
  return "sp";
}

std::string to_string(Role r) {
  switch (r) {
    case Role::System: return "system";
    case Role::User: return "user";
    case Role::Assistant: return "assistant";
  }
  return "system";
}

std::string to_string(CfSource s) {
  return s == CfSource::Generated ? "generated" : "retrieved";
}

std::string to_string(RevisionType r) {
  switch (r) {
    case RevisionType::RelationFlip: return "relation_flip";
    case RevisionType::EventSubstitution: return "event_substitution";
    case RevisionType::PropertySubstitution: return "property_substitution";
    case RevisionType::Negation: return "negation";
    case RevisionType::Unlabeled: return "unlabeled";
  }
  return "unlabeled";
}

Label label_from_string(const std::string& s) {
  if (s == "yes") return Label::Yes;
  if (s == "no") return Label::No;
  if (s == "positive") return Label::Positive;
  if (s == "negative") return Label::Negative;
  if (s == "unparseable") return Label::Unparseable;
  throw Error(ErrorCode::UnknownLabel, "bad label '" + s + "'");
}

Dataset dataset_from_string(const std::string& s) {
  if (s == "tempevalqa_bi") return Dataset::TempEvalQaBi;
  if (s == "tracie") return Dataset::Tracie;
  if (s == "mctaco") return Dataset::Mctaco;
  throw Error(ErrorCode::ParseError, "bad dataset '" + s + "'");
}

QType qtype_from_string(const std::string& s) {
  if (s == "duration") return QType::Duration;
  if (s == "frequency") return QType::Frequency;
  if (s == "stationarity") return QType::Stationarity;
  if (s == "ordering") return QType::Ordering;
  if (s == "typical_time") return QType::TypicalTime;
  throw Error(ErrorCode::UnknownCategory, "bad qtype '" + s + "'");
}

MethodId method_from_string(const std::string& s) {
  if (s == "sp") return MethodId::SP;
  if (s == "cot") return MethodId::CoT;
  if (s == "consistency") return MethodId::Consistency;
  if (s == "reflection") return MethodId::Reflection;
  if (s == "debate") return MethodId::Debate;
  if (s == "ccp") return MethodId::CCP;
  if (s == "ccp_e2e") return MethodId::CcpE2e;
  if (s == "dir_a") return MethodId::DirA;
  if (s == "ret_q") return MethodId::RetQ;
  if (s == "mcqa_cot") return MethodId::McqaCoT;
  if (s == "mcqa_ccp") return MethodId::McqaCCP;
  throw Error(ErrorCode::ConfigError, "bad method '" + s + "'");
}

Role role_from_string(const std::string& s) {
  if (s == "system") return Role::System;
  if (s == "user") return Role::User;
  if (s == "assistant") return Role::Assistant;
  throw Error(ErrorCode::ParseError, "bad role '" + s + "'");
}

CfSource cf_source_from_string(const std::string& s) {
  if (s == "generated") return CfSource::Generated;
  if (s == "retrieved") return CfSource::Retrieved;
  throw Error(ErrorCode::ParseError, "bad cf source '" + s + "'");
}

RevisionType revision_type_from_string(const std::string& s) {
  if (s == "relation_flip") return RevisionType::RelationFlip;
  if (s == "event_substitution") return RevisionType::EventSubstitution;
  if (s == "property_substitution") return RevisionType::PropertySubstitution;
  if (s == "negation") return RevisionType::Negation;
  if (s == "unlabeled") return RevisionType::Unlabeled;
  throw Error(ErrorCode::ParseError, "bad revision type '" + s + "'");
}

Label flip_label(Label l) {
  switch (l) {
    case Label::Yes: return Label::No;
    case Label::No: return Label::Yes;
    case Label::Positive: return Label::Negative;
    case Label::Negative: return Label::Positive;
    case Label::Unparseable: return Label::Unparseable;
  }
  return Label::Unparseable;
}

json Instance::to_json() const {
  json j;
  j["id"] = id;
  j["dataset"] = to_string(dataset);
  j["group_id"] = group_id;
  j["context"] = context;
  j["question"] = question;
  j["candidate"] = candidate ? json(*candidate) : json(nullptr);
  j["gold"] = to_string(gold);
  j["qtype"] = qtype ? json(to_string(*qtype)) : json(nullptr);
  return j;
}

Instance Instance::from_json(const json& j) {
  Instance inst;
  inst.id = j.at("id").get<std::string>();
  inst.dataset = dataset_from_string(j.at("dataset").get<std::string>());
  inst.group_id = j.at("group_id").get<std::string>();
  inst.context = j.at("context").get<std::string>();
  inst.question = j.at("question").get<std::string>();
  if (j.contains("candidate") && !j.at("candidate").is_null())
    inst.candidate = j.at("candidate").get<std::string>();
  inst.gold = label_from_string(j.at("gold").get<std::string>());
  if (j.contains("qtype") && !j.at("qtype").is_null())
    inst.qtype = qtype_from_string(j.at("qtype").get<std::string>());
  return inst;
}

json CounterfactualQuestion::to_json() const {
  json j;
  j["origin_id"] = origin_id;
  j["text"] = text;
  j["source"] = to_string(source);
  j["revision_type"] = to_string(revision_type);
  return j;
}

CounterfactualQuestion CounterfactualQuestion::from_json(const json& j) {
  CounterfactualQuestion cf;
  cf.origin_id = j.at("origin_id").get<std::string>();
  cf.text = j.at("text").get<std::string>();
  cf.source = cf_source_from_string(j.at("source").get<std::string>());
  cf.revision_type =
      revision_type_from_string(j.at("revision_type").get<std::string>());
  return cf;
}

Transcript::Transcript(std::string system_text) {
  messages_.push_back({Role::System, std::move(system_text)});
}

Role Transcript::last_role() const {
  if (messages_.empty())
    throw Error(ErrorCode::RoleViolation, "empty transcript has no last role");
  return messages_.back().role;
}

void Transcript::append(Role role, std::string text) {
  if (messages_.empty()) {
    if (role != Role::System)
      throw Error(ErrorCode::RoleViolation, "first message must be system");
  } else {
    Role prev = messages_.back().role;
    if (role == Role::System)
      throw Error(ErrorCode::RoleViolation, "system only allowed first");
    if (prev == Role::System && role != Role::User)
      throw Error(ErrorCode::RoleViolation, "user turn must follow system");
    if (prev == Role::User && role != Role::Assistant)
      throw Error(ErrorCode::RoleViolation, "assistant turn must follow user");
    if (prev == Role::Assistant && role != Role::User)
      throw Error(ErrorCode::RoleViolation, "user turn must follow assistant");
  }
  messages_.push_back({role, std::move(text)});
}

json Transcript::to_json() const {
  json arr = json::array();
  for (const auto& m : messages_) {
    arr.push_back({{"role", to_string(m.role)}, {"text", m.text}});
  }
  return arr;
}

Transcript Transcript::from_json(const json& j) {
  Transcript t;
  for (const auto& m : j) {
    t.append(role_from_string(m.at("role").get<std::string>()),
             m.at("text").get<std::string>());
  }
  return t;
}

void SamplingParams::validate() const {
  if (n_samples < 1)
    throw Error(ErrorCode::ConfigError, "n_samples must be >= 1");
  if (temperature < 0)
    throw Error(ErrorCode::ConfigError, "temperature must be >= 0");
  if (mode == SamplingMode::Greedy && (n_samples != 1 || temperature != 0))
    throw Error(ErrorCode::ConfigError,
                "greedy mode requires n_samples=1 and temperature=0");
  if (mode == SamplingMode::Sampled && temperature <= 0)
    throw Error(ErrorCode::ConfigError, "sampled mode requires temperature>0");
  if (top_k && *top_k <= 0)
    throw Error(ErrorCode::ConfigError, "top_k must be positive");
}

SamplingParams SamplingParams::greedy() { return SamplingParams{}; }

SamplingParams SamplingParams::sampled(double temperature,
                                       std::optional<int> top_k,
                                       int n_samples) {
  SamplingParams p;
  p.mode = SamplingMode::Sampled;
  p.temperature = temperature;
  p.top_k = top_k;
  p.n_samples = n_samples;
  p.validate();
  return p;
}

json SamplingParams::to_json() const {
  json j;
  j["mode"] = mode == SamplingMode::Greedy ? "greedy" : "sampled";
  j["temperature"] = temperature;
  j["top_k"] = top_k ? json(*top_k) : json(nullptr);
  j["n_samples"] = n_samples;
  return j;
}

SamplingParams SamplingParams::from_json(const json& j) {
  SamplingParams p;
  std::string mode = j.at("mode").get<std::string>();
  if (mode == "greedy") {
    p.mode = SamplingMode::Greedy;
  } else if (mode == "sampled") {
    p.mode = SamplingMode::Sampled;
  } else {
    throw Error(ErrorCode::ConfigError, "bad sampling mode '" + mode + "'");
  }
  p.temperature = j.at("temperature").get<double>();
  if (j.contains("top_k") && !j.at("top_k").is_null())
    p.top_k = j.at("top_k").get<int>();
  p.n_samples = j.at("n_samples").get<int>();
  p.validate();
  return p;
}

json Prediction::to_json() const {
  json j;
  j["instance_id"] = instance_id;
  j["method"] = to_string(method);
  j["label"] = to_string(label);
  j["raw_text"] = raw_text;
  json inter = json::array();
  for (const auto& [cf, lbl] : intermediate) {
    inter.push_back({{"cf", cf.to_json()}, {"label", to_string(lbl)}});
  }
  j["intermediate"] = inter;
  j["cache_keys"] = cache_keys;
  j["fallback"] = fallback;
  j["error"] = error;
  return j;
}

Prediction Prediction::from_json(const json& j) {
  Prediction p;
  p.instance_id = j.at("instance_id").get<std::string>();
  p.method = method_from_string(j.at("method").get<std::string>());
  p.label = label_from_string(j.at("label").get<std::string>());
  p.raw_text = j.at("raw_text").get<std::string>();
  for (const auto& item : j.at("intermediate")) {
    p.intermediate.emplace_back(
        CounterfactualQuestion::from_json(item.at("cf")),
        label_from_string(item.at("label").get<std::string>()));
  }
  p.cache_keys = j.at("cache_keys").get<std::vector<std::string>>();
  p.fallback = j.value("fallback", false);
  p.error = j.value("error", false);
  return p;
}

std::map<std::string, std::vector<Instance>> group_instances(
    const std::vector<Instance>& instances) {
  std::map<std::string, std::vector<Instance>> groups;
  std::optional<Dataset> seen;
  for (const auto& inst : instances) {
    if (inst.group_id.empty())
      throw Error(ErrorCode::EmptyGroupId, "instance " + inst.id);
    if (seen && *seen != inst.dataset)
      throw Error(ErrorCode::MixedDataset,
                  "instances span multiple datasets");
    seen = inst.dataset;
    groups[inst.group_id].push_back(inst);
  }
  return groups;
}

}  // namespace ccp
