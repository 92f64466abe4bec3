#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "core.hpp"

namespace ccp::metrics {

struct ScoreReport {
  double acc = 0;
  double f1 = 0;
  double inc = 0;
  std::size_t n_instances = 0;
  std::size_t n_groups = 0;
  std::size_t n_singletons_excluded = 0;  // groups too small for INC
  std::size_t n_unparseable = 0;
  std::map<QType, ScoreReport> per_qtype;

  json to_json() const;
};

using GoldMap = std::map<std::string, Label>;
using GroupMap = std::map<std::string, std::vector<std::string>>;

// 100 * correct / total; Unparseable counts as incorrect.
double accuracy(const std::vector<Prediction>& preds, const GoldMap& golds);

// Binary F1 of the positive class, as a percentage; 0 when P+R = 0.
double f1(const std::vector<Prediction>& preds, const GoldMap& golds,
          Label positive);

// Mean of per-class binary F1 over {positive, flip(positive)}.
double macro_f1(const std::vector<Prediction>& preds, const GoldMap& golds,
                Label positive);

// Percentage of groups (size >= 2) containing at least one incorrect
// prediction. Singleton groups are skipped.
double inconsistency(const std::vector<Prediction>& preds, const GoldMap& golds,
                     const GroupMap& groups);

// MCTACO multiple-choice scoring over (gold plausible set, predicted
// plausible set) pairs. Empty-vs-empty counts as a full match.
std::pair<double, double> mcqa_em_f1(
    const std::vector<std::pair<std::set<std::string>, std::set<std::string>>>&
        question_groups);

Label positive_class(Dataset dataset);

ScoreReport report(const std::vector<Prediction>& preds,
                   const std::vector<Instance>& instances, Dataset dataset);

// Plain-text table mirroring the ACC / F1 / INC column order.
std::string render_table(
    const std::vector<std::pair<std::string, ScoreReport>>& rows);

}  // namespace ccp::metrics
