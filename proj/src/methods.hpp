#pragma once

#include <set>
#include <vector>

#include "core.hpp"
#include "llm_client.hpp"
#include "promptkit.hpp"

namespace ccp::methods {

struct MethodConfig {
  MethodId method = MethodId::SP;
  int n_cf = 1;
  int consistency_k = 40;
  int reflection_iters = 2;  // counts the initial answer
  int debate_agents = 3;
  int debate_rounds = 2;
  int shot_count = 3;

  void validate() const;
  json to_json() const;
  static MethodConfig from_json(const json& j);
};

// Most frequent non-Unparseable label; ties go to the earliest-occurring
// tied label; all-Unparseable yields Unparseable.
Label majority_vote(const std::vector<Label>& labels);

Prediction run_sp(const Instance& instance, const MethodConfig& cfg,
                  const promptkit::TemplateLibrary& templates,
                  llm::Client& client);

Prediction run_cot(const Instance& instance, const MethodConfig& cfg,
                   const promptkit::TemplateLibrary& templates,
                   llm::Client& client);

Prediction run_consistency(const Instance& instance, const MethodConfig& cfg,
                           const promptkit::TemplateLibrary& templates,
                           llm::Client& client);

Prediction run_reflection(const Instance& instance, const MethodConfig& cfg,
                          const promptkit::TemplateLibrary& templates,
                          llm::Client& client);

Prediction run_debate(const Instance& instance, const MethodConfig& cfg,
                      const promptkit::TemplateLibrary& templates,
                      llm::Client& client);

// The 3-call protocol: generate counterfactual question(s), answer them on
// the shared transcript, then answer the original conditioned on the
// exchange.
Prediction run_ccp(const Instance& instance, const MethodConfig& cfg,
                   const promptkit::TemplateLibrary& templates,
                   llm::Client& client);

Prediction run_ccp_e2e(const Instance& instance, const MethodConfig& cfg,
                       const promptkit::TemplateLibrary& templates,
                       llm::Client& client);

// Flips the counterfactual answer and uses it directly; before/after tasks
// only.
Prediction run_dir_a(const Instance& instance, const MethodConfig& cfg,
                     const promptkit::TemplateLibrary& templates,
                     llm::Client& client);

// CCP with the counterfactual retrieved from a sibling of the instance's
// group instead of generated.
Prediction run_ret_q(const Instance& instance, const MethodConfig& cfg,
                     const promptkit::TemplateLibrary& templates,
                     llm::Client& client,
                     const std::vector<Instance>& group_members);

// Multiple-choice reconstruction over one MCTACO question group; returns
// the predicted-plausible candidate ids.
std::set<std::string> run_mcqa(const std::vector<Instance>& question_group,
                               const MethodConfig& cfg,
                               const promptkit::TemplateLibrary& templates,
                               llm::Client& client);

// Dispatch for per-instance methods (everything except McqaCoT/McqaCCP).
Prediction run_method(const Instance& instance, const MethodConfig& cfg,
                      const promptkit::TemplateLibrary& templates,
                      llm::Client& client,
                      const std::vector<Instance>* group_members = nullptr);

}  // namespace ccp::methods
