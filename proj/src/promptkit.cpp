#include "promptkit.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "llm_client.hpp"

namespace ccp::promptkit {

namespace {

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return s;
}

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

std::string strip_punct(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && !std::isalnum(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && !std::isalnum(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

std::vector<std::pair<std::string, Label>> label_tokens(Dataset dataset) {
  if (dataset == Dataset::Tracie) {
    return {{"positive", Label::Positive}, {"negative", Label::Negative}};
  }
  return {{"yes", Label::Yes}, {"no", Label::No}};
}

std::optional<Label> token_to_label(const std::string& raw, Dataset dataset) {
  std::string tok = lower(strip_punct(raw));
  for (const auto& [name, label] : label_tokens(dataset)) {
    if (tok == name) return label;
  }
  return std::nullopt;
}

// Label following the last occurrence of `anchor`; `skip_final` drops
// "answer:" hits that are really part of "final answer:".
std::optional<Label> after_anchor(const std::string& completion,
                                  const std::string& anchor, Dataset dataset,
                                  bool skip_final) {
  std::string lo = lower(completion);
  std::size_t best = std::string::npos;
  std::size_t pos = 0;
  while (true) {
    std::size_t hit = lo.find(anchor, pos);
    if (hit == std::string::npos) break;
    pos = hit + 1;
    if (skip_final) {
      static const std::string kFinal = "final ";
      if (hit >= kFinal.size() &&
          lo.compare(hit - kFinal.size(), kFinal.size(), kFinal) == 0)
        continue;
    }
    best = hit;
  }
  if (best == std::string::npos) return std::nullopt;
  std::size_t start = best + anchor.size();
  std::istringstream is(completion.substr(start));
  std::string tok;
  if (!(is >> tok)) return Label::Unparseable;
  auto label = token_to_label(tok, dataset);
  return label ? *label : Label::Unparseable;
}

Label fallback_scan(const std::string& completion, Dataset dataset) {
  // Last nonempty line; exactly one standalone label token wins.
  std::vector<std::string> lines;
  std::stringstream ss(completion);
  std::string line;
  while (std::getline(ss, line)) lines.push_back(line);
  for (auto it = lines.rbegin(); it != lines.rend(); ++it) {
    if (trim(*it).empty()) continue;
    std::istringstream ws(*it);
    std::string tok;
    std::optional<Label> found;
    int matches = 0;
    while (ws >> tok) {
      if (auto l = token_to_label(tok, dataset)) {
        found = *l;
        ++matches;
      }
    }
    if (matches == 1) return *found;
    return Label::Unparseable;
  }
  return Label::Unparseable;
}

std::string final_user_turn(Purpose purpose, const Instance& inst,
                            const std::optional<CounterfactualQuestion>& cf) {
  switch (inst.dataset) {
    case Dataset::TempEvalQaBi:
      switch (purpose) {
        case Purpose::CfGeneration:
          return "Question: " + inst.question;
        case Purpose::CcpAnswer:
          return "Article: " + inst.context +
                 "\nOriginal question: " + inst.question +
                 "\nRelated question: " + cf->text +
                 "\nAnswer the related question";
        case Purpose::CcpE2eAnswer:
          return "Article: " + inst.context +
                 "\nOriginal question: " + inst.question;
        default:
          return "Article: " + inst.context + "\nQuestion: " + inst.question;
      }
    case Dataset::Tracie:
      switch (purpose) {
        case Purpose::CfGeneration:
          return "Hypothesis: " + inst.question;
        case Purpose::CcpAnswer:
          return "Story: " + inst.context +
                 "\nHypothesis: " + inst.question +
                 "\nRelated hypothesis: " + cf->text +
                 "\nAnswer the related hypothesis";
        case Purpose::CcpE2eAnswer:
          return "Story: " + inst.context + "\nHypothesis: " + inst.question;
        default:
          return "Story: " + inst.context + "\nHypothesis: " + inst.question;
      }
    case Dataset::Mctaco: {
      const std::string cand = inst.candidate.value_or("");
      switch (purpose) {
        case Purpose::CfGeneration:
          return "Passage: " + inst.context + " Question: " + inst.question +
                 " Candidate answer: " + cand + ".";
        case Purpose::CcpAnswer:
          return "Passage: " + inst.context + "\nQuestion: " + inst.question +
                 "\noriginal candidate answer: " + cand +
                 "\nRelated candidate: " + cf->text +
                 "\nCan the candidate answer the given question? yes or no";
        case Purpose::CcpE2eAnswer:
          return "Passage: " + inst.context + "\nQuestion: " + inst.question +
                 "\noriginal candidate answer: " + cand;
        default:
          return "Passage: " + inst.context + "\nQuestion: " + inst.question +
                 "\nCandidate answer: " + cand;
      }
    }
  }
  throw Error(ErrorCode::TemplateMismatch, "bad dataset");
}

Purpose purpose_for_method(MethodId method) {
  switch (method) {
    case MethodId::SP: return Purpose::SpAnswer;
    case MethodId::CoT:
    case MethodId::Consistency:
    case MethodId::Reflection:
    case MethodId::Debate: return Purpose::CotAnswer;
    case MethodId::CCP:
    case MethodId::DirA:
    case MethodId::RetQ:
    case MethodId::McqaCCP: return Purpose::CcpAnswer;
    case MethodId::CcpE2e: return Purpose::CcpE2eAnswer;
    case MethodId::McqaCoT: return Purpose::McqaAnswer;
  }
  throw Error(ErrorCode::TemplateMismatch, "bad method");
}

}  // namespace

std::string to_string(Purpose p) {
  switch (p) {
    case Purpose::CfGeneration: return "cf_generation";
    case Purpose::SpAnswer: return "sp_answer";
    case Purpose::CotAnswer: return "cot_answer";
    case Purpose::CcpAnswer: return "ccp_answer";
    case Purpose::CcpE2eAnswer: return "ccp_e2e_answer";
    case Purpose::McqaAnswer: return "mcqa_answer";
  }
  return "sp_answer";
}

Purpose purpose_from_string(const std::string& s) {
  if (s == "cf_generation") return Purpose::CfGeneration;
  if (s == "sp_answer") return Purpose::SpAnswer;
  if (s == "cot_answer") return Purpose::CotAnswer;
  if (s == "ccp_answer") return Purpose::CcpAnswer;
  if (s == "ccp_e2e_answer") return Purpose::CcpE2eAnswer;
  if (s == "mcqa_answer") return Purpose::McqaAnswer;
  throw Error(ErrorCode::TemplateMismatch, "bad purpose '" + s + "'");
}

PromptTemplate PromptTemplate::from_json(const json& j) {
  PromptTemplate t;
  t.dataset = dataset_from_string(j.at("dataset").get<std::string>());
  t.purpose = purpose_from_string(j.at("purpose").get<std::string>());
  t.system_text = j.at("system").get<std::string>();
  for (const auto& e : j.at("exemplars")) {
    Exemplar ex;
    for (const auto& turn : e.at("turns")) {
      ex.turns.push_back({role_from_string(turn.at(0).get<std::string>()),
                          turn.at(1).get<std::string>()});
    }
    if (ex.turns.empty() || ex.turns.front().role != Role::User ||
        ex.turns.back().role != Role::Assistant)
      throw Error(ErrorCode::TemplateMismatch,
                  "exemplar must run user..assistant");
    if (e.contains("final_label") && !e.at("final_label").is_null())
      ex.final_label = label_from_string(e.at("final_label").get<std::string>());
    if (e.contains("intermediate_label") && !e.at("intermediate_label").is_null())
      ex.intermediate_label =
          label_from_string(e.at("intermediate_label").get<std::string>());
    t.exemplars.push_back(std::move(ex));
  }
  if (t.exemplars.empty())
    throw Error(ErrorCode::TemplateMismatch, "template has no exemplars");
  t.shot_count = j.value("shot_count", static_cast<int>(t.exemplars.size()));
  return t;
}

TemplateLibrary TemplateLibrary::load(const std::filesystem::path& dir) {
  TemplateLibrary lib;
  if (!std::filesystem::is_directory(dir))
    throw Error(ErrorCode::ConfigError,
                "template directory not found: " + dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.path().extension() == ".json") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& path : files) {
    std::ifstream in(path);
    std::stringstream buf;
    buf << in.rdbuf();
    std::string bytes = buf.str();
    lib.checksums_[path.filename().string()] = llm::sha256_hex(bytes);
    json j;
    try {
      j = json::parse(bytes);
    } catch (const std::exception& e) {
      throw Error(ErrorCode::ConfigError,
                  "bad template " + path.string() + ": " + e.what());
    }
    if (path.filename() == "method_phrases.json") {
      for (const auto& [k, v] : j.items())
        lib.phrases_[k] = v.get<std::string>();
      continue;
    }
    PromptTemplate t = PromptTemplate::from_json(j);
    lib.templates_[to_string(t.dataset) + "/" + to_string(t.purpose)] =
        std::move(t);
  }
  if (lib.templates_.empty())
    throw Error(ErrorCode::ConfigError,
                "no templates in " + dir.string());
  return lib;
}

bool TemplateLibrary::has(Dataset dataset, Purpose purpose) const {
  return templates_.count(to_string(dataset) + "/" + to_string(purpose)) > 0;
}

const PromptTemplate& TemplateLibrary::get(Dataset dataset,
                                           Purpose purpose) const {
  auto it = templates_.find(to_string(dataset) + "/" + to_string(purpose));
  if (it == templates_.end())
    throw Error(ErrorCode::TemplateMismatch,
                "no template for " + to_string(dataset) + "/" +
                    to_string(purpose));
  return it->second;
}

std::string TemplateLibrary::phrase(const std::string& key) const {
  auto it = phrases_.find(key);
  if (it == phrases_.end())
    throw Error(ErrorCode::TemplateMismatch, "no phrase '" + key + "'");
  return it->second;
}

void TemplateLibrary::set_shot_count(int k) {
  if (k < 1)
    throw Error(ErrorCode::ConfigError, "shot_count must be >= 1");
  for (auto& [_, t] : templates_) t.shot_count = k;
}

namespace {

// Emits exactly shot_count exemplar exchanges, cycling through the shipped
// exemplars when more shots are requested than authored.
void append_exemplars(Transcript& t, const PromptTemplate& tmpl) {
  for (int i = 0; i < tmpl.shot_count; ++i) {
    const Exemplar& ex = tmpl.exemplars[i % tmpl.exemplars.size()];
    for (const auto& m : ex.turns) t.append(m.role, m.text);
  }
}

}  // namespace

Transcript build_cf_generation_prompt(const Instance& instance,
                                      const PromptTemplate& tmpl) {
  if (tmpl.purpose != Purpose::CfGeneration || tmpl.dataset != instance.dataset)
    throw Error(ErrorCode::TemplateMismatch,
                "template is not a cf-generation template for " +
                    to_string(instance.dataset));
  Transcript t(tmpl.system_text);
  append_exemplars(t, tmpl);
  t.append(Role::User, final_user_turn(Purpose::CfGeneration, instance, {}));
  return t;
}

std::vector<CounterfactualQuestion> parse_cf_questions(
    const std::string& completion, Dataset dataset,
    const std::string& origin_id, const std::string& original_text) {
  std::vector<std::string> parts;
  if (dataset == Dataset::Mctaco) {
    static const std::string kSep = "/\\";
    std::size_t pos = 0;
    while (true) {
      std::size_t hit = completion.find(kSep, pos);
      if (hit == std::string::npos) {
        parts.push_back(completion.substr(pos));
        break;
      }
      parts.push_back(completion.substr(pos, hit - pos));
      pos = hit + kSep.size();
    }
  } else {
    parts.push_back(completion);
  }
  std::vector<CounterfactualQuestion> out;
  for (const auto& part : parts) {
    std::string text = trim(part);
    if (text.empty()) continue;
    CounterfactualQuestion cf;
    cf.origin_id = origin_id;
    cf.text = text;
    cf.source = CfSource::Generated;
    cf.revision_type = RevisionType::Unlabeled;
    if (!original_text.empty() && dataset != Dataset::Mctaco) {
      // A lone before<->after swap is the dominant generated edit.
      auto norm = [](const std::string& s) {
        std::string lo = lower(s), o;
        std::stringstream ss(lo);
        std::string tok;
        while (ss >> tok) {
          if (tok == "before" || tok == "after") tok = "<rel>";
          o += tok + " ";
        }
        return o;
      };
      if (norm(text) == norm(original_text) &&
          lower(text) != lower(original_text))
        cf.revision_type = RevisionType::RelationFlip;
    }
    out.push_back(std::move(cf));
  }
  if (out.empty())
    throw Error(ErrorCode::EmptyGeneration,
                "no counterfactual question in completion");
  return out;
}

Transcript build_answer_prompt(MethodId method, const Instance& instance,
                               const std::optional<CounterfactualQuestion>& cf,
                               const PromptTemplate& tmpl) {
  Purpose purpose = purpose_for_method(method);
  if (tmpl.purpose != purpose || tmpl.dataset != instance.dataset)
    throw Error(ErrorCode::TemplateMismatch,
                "template " + to_string(tmpl.dataset) + "/" +
                    to_string(tmpl.purpose) + " does not fit method " +
                    ccp::to_string(method) + " on " +
                    to_string(instance.dataset));
  bool needs_cf = purpose == Purpose::CcpAnswer;
  if (needs_cf && !cf)
    throw Error(ErrorCode::MissingCounterfactual,
                ccp::to_string(method) + " requires a counterfactual");
  Transcript t(tmpl.system_text);
  append_exemplars(t, tmpl);
  t.append(Role::User, final_user_turn(purpose, instance, cf));
  return t;
}

Transcript append_original_turn(Transcript transcript,
                                const std::string& cf_answer,
                                const Instance& instance) {
  if (transcript.empty() || transcript.last_role() != Role::User)
    throw Error(ErrorCode::RoleViolation,
                "CCP transcript must be awaiting the counterfactual answer");
  transcript.append(Role::Assistant, cf_answer);
  std::string turn;
  switch (instance.dataset) {
    case Dataset::TempEvalQaBi:
      turn = "Now, answer the original question. Question: " +
             instance.question;
      break;
    case Dataset::Tracie:
      turn = "Now, evaluate the original hypothesis: " + instance.question;
      break;
    case Dataset::Mctaco:
      turn = "Now, can the candidate answer the given question? candidate "
             "answer: " +
             instance.candidate.value_or("");
      break;
  }
  transcript.append(Role::User, turn);
  return transcript;
}

Transcript append_related_turn(Transcript transcript,
                               const std::string& cf_answer,
                               const CounterfactualQuestion& next_cf,
                               Dataset dataset) {
  if (transcript.empty() || transcript.last_role() != Role::User)
    throw Error(ErrorCode::RoleViolation,
                "CCP transcript must be awaiting the counterfactual answer");
  transcript.append(Role::Assistant, cf_answer);
  std::string turn;
  switch (dataset) {
    case Dataset::TempEvalQaBi:
      turn = "Related question: " + next_cf.text + "\nAnswer the related question";
      break;
    case Dataset::Tracie:
      turn = "Related hypothesis: " + next_cf.text +
             "\nAnswer the related hypothesis";
      break;
    case Dataset::Mctaco:
      turn = "Related candidate: " + next_cf.text +
             "\nCan the candidate answer the given question? yes or no";
      break;
  }
  transcript.append(Role::User, turn);
  return transcript;
}

Label extract_final_answer(const std::string& completion, Dataset dataset) {
  if (auto anchored = after_anchor(completion, "final answer:", dataset, false))
    return *anchored;
  return fallback_scan(completion, dataset);
}

Label extract_intermediate_answer(const std::string& completion,
                                  Dataset dataset) {
  if (auto anchored = after_anchor(completion, "answer:", dataset, true))
    return *anchored;
  return Label::Unparseable;
}

}  // namespace ccp::promptkit
