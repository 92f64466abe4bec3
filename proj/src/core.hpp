#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "error.hpp"

namespace ccp {

using json = nlohmann::ordered_json;

enum class Label { Yes, No, Positive, Negative, Unparseable };

enum class Dataset { TempEvalQaBi, Tracie, Mctaco };

enum class QType { Duration, Frequency, Stationarity, Ordering, TypicalTime };

enum class MethodId {
  SP,
  CoT,
  Consistency,
  Reflection,
  Debate,
  CCP,
  CcpE2e,
  DirA,
  RetQ,
  McqaCoT,
  McqaCCP,
};

enum class Role { System, User, Assistant };

enum class CfSource { Generated, Retrieved };

enum class RevisionType {
  RelationFlip,
  EventSubstitution,
  PropertySubstitution,
  Negation,
  Unlabeled,
};

std::string to_string(Label l);
std::string to_string(Dataset d);
std::string to_string(QType q);
std::string to_string(MethodId m);
std::string to_string(Role r);
std::string to_string(CfSource s);
std::string to_string(RevisionType r);

Label label_from_string(const std::string& s);
Dataset dataset_from_string(const std::string& s);
QType qtype_from_string(const std::string& s);
MethodId method_from_string(const std::string& s);
Role role_from_string(const std::string& s);
CfSource cf_source_from_string(const std::string& s);
RevisionType revision_type_from_string(const std::string& s);

// Mutually exclusive counterpart; Unparseable is its own fixed point.
Label flip_label(Label l);

struct Instance {
  std::string id;
  Dataset dataset = Dataset::TempEvalQaBi;
  std::string group_id;
  std::string context;
  std::string question;
  std::optional<std::string> candidate;  // MCTACO only
  Label gold = Label::Unparseable;
  std::optional<QType> qtype;  // MCTACO only

  json to_json() const;
  static Instance from_json(const json& j);
};

struct CounterfactualQuestion {
  std::string origin_id;
  std::string text;
  CfSource source = CfSource::Generated;
  RevisionType revision_type = RevisionType::Unlabeled;

  json to_json() const;
  static CounterfactualQuestion from_json(const json& j);
};

struct Message {
  Role role = Role::System;
  std::string text;
};

// Ordered chat messages. First message is System; User/Assistant alternate
// after any leading System message.
class Transcript {
 public:
  Transcript() = default;
  explicit Transcript(std::string system_text);

  void append(Role role, std::string text);
  const std::vector<Message>& messages() const { return messages_; }
  bool empty() const { return messages_.empty(); }
  Role last_role() const;

  json to_json() const;
  static Transcript from_json(const json& j);

 private:
  std::vector<Message> messages_;
};

enum class SamplingMode { Greedy, Sampled };

struct SamplingParams {
  SamplingMode mode = SamplingMode::Greedy;
  double temperature = 0.0;
  std::optional<int> top_k;
  int n_samples = 1;

  void validate() const;
  static SamplingParams greedy();
  static SamplingParams sampled(double temperature,
                                std::optional<int> top_k = std::nullopt,
                                int n_samples = 1);

  json to_json() const;
  static SamplingParams from_json(const json& j);
};

struct Prediction {
  std::string instance_id;
  MethodId method = MethodId::SP;
  Label label = Label::Unparseable;
  std::string raw_text;
  std::vector<std::pair<CounterfactualQuestion, Label>> intermediate;
  std::vector<std::string> cache_keys;
  bool fallback = false;  // CCP fell back to CoT on EmptyGeneration
  bool error = false;     // instance-level failure, counted as Unparseable

  json to_json() const;
  static Prediction from_json(const json& j);
};

// Partition instances by group_id.
std::map<std::string, std::vector<Instance>> group_instances(
    const std::vector<Instance>& instances);

}  // namespace ccp
