#include "metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

namespace ccp::metrics {

namespace {

double round1(double v) { return std::round(v * 10.0) / 10.0; }

Label gold_for(const GoldMap& golds, const std::string& id) {
  auto it = golds.find(id);
  if (it == golds.end())
    throw Error(ErrorCode::MissingGold, "no gold label for instance " + id);
  return it->second;
}

double set_f1(const std::set<std::string>& gold,
              const std::set<std::string>& pred) {
  if (gold.empty() && pred.empty()) return 100.0;
  std::size_t overlap = 0;
  for (const auto& p : pred)
    if (gold.count(p)) ++overlap;
  if (overlap == 0) return 0.0;
  double precision = static_cast<double>(overlap) / pred.size();
  double recall = static_cast<double>(overlap) / gold.size();
  return 100.0 * 2 * precision * recall / (precision + recall);
}

}  // namespace

double accuracy(const std::vector<Prediction>& preds, const GoldMap& golds) {
  if (preds.empty()) throw Error(ErrorCode::EmptyInput, "no predictions");
  std::size_t correct = 0;
  for (const auto& p : preds) {
    if (p.label != Label::Unparseable && p.label == gold_for(golds, p.instance_id))
      ++correct;
  }
  return 100.0 * correct / preds.size();
}

double f1(const std::vector<Prediction>& preds, const GoldMap& golds,
          Label positive) {
  std::size_t tp = 0, fp = 0, fn = 0;
  for (const auto& p : preds) {
    Label gold = gold_for(golds, p.instance_id);
    bool pred_pos = p.label == positive;
    bool gold_pos = gold == positive;
    if (pred_pos && gold_pos) ++tp;
    if (pred_pos && !gold_pos) ++fp;
    if (!pred_pos && gold_pos) ++fn;
  }
  if (tp == 0) return 0.0;
  double precision = static_cast<double>(tp) / (tp + fp);
  double recall = static_cast<double>(tp) / (tp + fn);
  return 100.0 * 2 * precision * recall / (precision + recall);
}

double macro_f1(const std::vector<Prediction>& preds, const GoldMap& golds,
                Label positive) {
  return (f1(preds, golds, positive) + f1(preds, golds, flip_label(positive))) /
         2.0;
}

double inconsistency(const std::vector<Prediction>& preds, const GoldMap& golds,
                     const GroupMap& groups) {
  std::map<std::string, Label> by_id;
  for (const auto& p : preds) by_id[p.instance_id] = p.label;
  std::size_t eligible = 0, tainted = 0;
  for (const auto& [gid, ids] : groups) {
    if (ids.size() < 2) continue;
    ++eligible;
    for (const auto& id : ids) {
      auto it = by_id.find(id);
      if (it == by_id.end())
        throw Error(ErrorCode::MissingPrediction,
                    "group " + gid + " member " + id + " has no prediction");
      Label gold = gold_for(golds, id);
      if (it->second == Label::Unparseable || it->second != gold) {
        ++tainted;
        break;
      }
    }
  }
  if (eligible == 0) return 0.0;
  return 100.0 * tainted / eligible;
}

std::pair<double, double> mcqa_em_f1(
    const std::vector<std::pair<std::set<std::string>, std::set<std::string>>>&
        question_groups) {
  if (question_groups.empty())
    throw Error(ErrorCode::EmptyInput, "no question groups");
  std::size_t exact = 0;
  double f1_sum = 0;
  for (const auto& [gold, pred] : question_groups) {
    if (gold == pred) ++exact;
    f1_sum += set_f1(gold, pred);
  }
  return {100.0 * exact / question_groups.size(),
          f1_sum / question_groups.size()};
}

Label positive_class(Dataset dataset) {
  return dataset == Dataset::Tracie ? Label::Positive : Label::Yes;
}

namespace {

ScoreReport basic_report(const std::vector<Prediction>& preds,
                         const std::vector<Instance>& instances,
                         Label positive) {
  GoldMap golds;
  GroupMap groups;
  for (const auto& inst : instances) {
    golds[inst.id] = inst.gold;
    groups[inst.group_id].push_back(inst.id);
  }
  ScoreReport r;
  r.acc = accuracy(preds, golds);
  r.f1 = f1(preds, golds, positive);
  r.inc = inconsistency(preds, golds, groups);
  r.n_instances = preds.size();
  r.n_groups = groups.size();
  for (const auto& [_, ids] : groups)
    if (ids.size() < 2) ++r.n_singletons_excluded;
  for (const auto& p : preds)
    if (p.label == Label::Unparseable) ++r.n_unparseable;
  return r;
}

}  // namespace

ScoreReport report(const std::vector<Prediction>& preds,
                   const std::vector<Instance>& instances, Dataset dataset) {
  Label positive = positive_class(dataset);
  ScoreReport r = basic_report(preds, instances, positive);
  if (dataset == Dataset::Mctaco) {
    std::map<std::string, const Instance*> by_id;
    for (const auto& inst : instances) by_id[inst.id] = &inst;
    std::map<QType, std::vector<Prediction>> preds_by_qtype;
    std::map<QType, std::vector<Instance>> insts_by_qtype;
    for (const auto& p : preds) {
      auto it = by_id.find(p.instance_id);
      if (it != by_id.end() && it->second->qtype)
        preds_by_qtype[*it->second->qtype].push_back(p);
    }
    for (const auto& inst : instances)
      if (inst.qtype) insts_by_qtype[*inst.qtype].push_back(inst);
    for (const auto& [qt, qpreds] : preds_by_qtype)
      r.per_qtype[qt] = basic_report(qpreds, insts_by_qtype[qt], positive);
  }
  return r;
}

json ScoreReport::to_json() const {
  json j;
  j["acc"] = round1(acc);
  j["f1"] = round1(f1);
  j["inc"] = round1(inc);
  j["n_instances"] = n_instances;
  j["n_groups"] = n_groups;
  j["n_singletons_excluded"] = n_singletons_excluded;
  j["n_unparseable"] = n_unparseable;
  if (!per_qtype.empty()) {
    json pq = json::object();
    for (const auto& [qt, sub] : per_qtype) pq[to_string(qt)] = sub.to_json();
    j["per_qtype"] = pq;
  }
  return j;
}

std::string render_table(
    const std::vector<std::pair<std::string, ScoreReport>>& rows) {
  std::size_t name_w = 8;
  for (const auto& [name, _] : rows) name_w = std::max(name_w, name.size());
  std::ostringstream os;
  os << std::left << std::setw(static_cast<int>(name_w) + 2) << "method"
     << std::right << std::setw(8) << "ACC" << std::setw(8) << "F1"
     << std::setw(10) << "INC (↓)" << "\n";
  os << std::string(name_w + 2 + 26, '-') << "\n";
  os << std::fixed << std::setprecision(1);
  for (const auto& [name, r] : rows) {
    os << std::left << std::setw(static_cast<int>(name_w) + 2) << name
       << std::right << std::setw(8) << round1(r.acc) << std::setw(8)
       << round1(r.f1) << std::setw(10) << round1(r.inc) << "\n";
  }
  return os.str();
}

}  // namespace ccp::metrics
