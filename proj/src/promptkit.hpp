#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "core.hpp"

namespace ccp::promptkit {

enum class Purpose {
  CfGeneration,
  SpAnswer,
  CotAnswer,
  CcpAnswer,
  CcpE2eAnswer,
  McqaAnswer,
};

std::string to_string(Purpose p);
Purpose purpose_from_string(const std::string& s);

struct Exemplar {
  std::vector<Message> turns;  // user/assistant alternation
  std::optional<Label> final_label;
  std::optional<Label> intermediate_label;
};

struct PromptTemplate {
  Dataset dataset = Dataset::TempEvalQaBi;
  Purpose purpose = Purpose::SpAnswer;
  std::string system_text;
  std::vector<Exemplar> exemplars;
  int shot_count = 3;

  static PromptTemplate from_json(const json& j);
};

// Template assets loaded from one JSON file per (dataset, purpose), with
// per-file checksums recorded into the run manifest.
class TemplateLibrary {
 public:
  static TemplateLibrary load(const std::filesystem::path& dir);

  const PromptTemplate& get(Dataset dataset, Purpose purpose) const;
  bool has(Dataset dataset, Purpose purpose) const;
  const std::map<std::string, std::string>& checksums() const {
    return checksums_;
  }
  // Free-text phrases used by reflection/debate orchestration.
  const std::map<std::string, std::string>& phrases() const { return phrases_; }
  std::string phrase(const std::string& key) const;

  void set_shot_count(int k);

 private:
  std::map<std::string, PromptTemplate> templates_;
  std::map<std::string, std::string> checksums_;
  std::map<std::string, std::string> phrases_;
};

Transcript build_cf_generation_prompt(const Instance& instance,
                                      const PromptTemplate& tmpl);

std::vector<CounterfactualQuestion> parse_cf_questions(
    const std::string& completion, Dataset dataset,
    const std::string& origin_id = "", const std::string& original_text = "");

Transcript build_answer_prompt(MethodId method, const Instance& instance,
                               const std::optional<CounterfactualQuestion>& cf,
                               const PromptTemplate& tmpl);

// Continues a CCP transcript with the model's counterfactual answer and the
// "now answer the original" user turn.
Transcript append_original_turn(Transcript transcript,
                                const std::string& cf_answer,
                                const Instance& instance);

// Continues a CCP transcript with another counterfactual exchange (n_cf > 1).
Transcript append_related_turn(Transcript transcript,
                               const std::string& cf_answer,
                               const CounterfactualQuestion& next_cf,
                               Dataset dataset);

// Total: every string maps to some Label ("Final answer:" anchor, last
// occurrence, with a last-line fallback scan).
Label extract_final_answer(const std::string& completion, Dataset dataset);

// Same anchor logic on "answer:", ignoring "final answer:" matches; no
// fallback scan.
Label extract_intermediate_answer(const std::string& completion,
                                  Dataset dataset);

}  // namespace ccp::promptkit
