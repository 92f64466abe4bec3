#include "ingest.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <unordered_map>

namespace ccp::ingest {

namespace {

std::string collapse_ws(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  bool in_ws = true;
  for (char c : s) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!in_ws && !out.empty()) out.push_back(' ');
      in_ws = true;
    } else {
      out.push_back(c);
      in_ws = false;
    }
  }
  while (!out.empty() && out.back() == ' ') out.pop_back();
  return out;
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return s;
}

// Remove every occurrence of `token` (word-delimited, case-insensitive).
std::string strip_token(const std::string& text, const std::string& token) {
  std::string lo = lower(text);
  std::string lt = lower(token);
  std::string out;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t hit = lo.find(lt, pos);
    if (hit == std::string::npos) {
      out.append(text, pos, text.size() - pos);
      break;
    }
    bool left_ok = hit == 0 || !std::isalnum(static_cast<unsigned char>(lo[hit - 1]));
    std::size_t end = hit + lt.size();
    bool right_ok =
        end >= lo.size() || !std::isalnum(static_cast<unsigned char>(lo[end]));
    if (left_ok && right_ok) {
      out.append(text, pos, hit - pos);
      pos = end;
    } else {
      out.append(text, pos, hit + 1 - pos);
      pos = hit + 1;
    }
  }
  return out;
}

std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string stable_hash(const std::string& s) {
  std::ostringstream os;
  os << std::hex << fnv1a64(s);
  return os.str();
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in)
    throw Error(ErrorCode::ParseError, "cannot open " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

}  // namespace

std::string tempeval_pair_key(const std::string& article,
                              const std::string& question) {
  std::string q = strip_token(strip_token(question, "before"), "after");
  return stable_hash(collapse_ws(article) + "\x1f" + lower(collapse_ws(q)));
}

std::string tracie_group_key(const std::string& story,
                             const std::string& hypothesis) {
  std::string h = hypothesis;
  for (const char* rel :
       {"starts before", "starts after", "ends before", "ends after"}) {
    h = strip_token(h, rel);
  }
  return stable_hash(collapse_ws(story) + "\x1f" + lower(collapse_ws(h)));
}

std::vector<Instance> load_tempevalqa_bi(const std::filesystem::path& path) {
  auto lines = read_lines(path);
  std::vector<Instance> out;
  std::size_t lineno = 0;
  for (const auto& line : lines) {
    ++lineno;
    if (collapse_ws(line).empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const std::exception& e) {
      throw Error(ErrorCode::ParseError, path.string() + ":" +
                                             std::to_string(lineno) + ": " +
                                             e.what());
    }
    Instance inst;
    inst.dataset = Dataset::TempEvalQaBi;
    inst.id = "tempevalqa_bi:" + std::to_string(lineno) + ":0";
    try {
      inst.context = j.contains("article")
                         ? j.at("article").get<std::string>()
                         : j.at("context").get<std::string>();
      inst.question = j.at("question").get<std::string>();
      std::string ans = lower(collapse_ws(j.at("answer").get<std::string>()));
      if (ans != "yes" && ans != "no")
        throw Error(ErrorCode::UnknownLabel, "answer '" + ans + "'");
      inst.gold = ans == "yes" ? Label::Yes : Label::No;
    } catch (const json::exception& e) {
      throw Error(ErrorCode::ParseError, path.string() + ":" +
                                             std::to_string(lineno) + ": " +
                                             e.what());
    }
    if (j.contains("pair_id") && !j.at("pair_id").is_null()) {
      const auto& pid = j.at("pair_id");
      inst.group_id =
          "pair:" + (pid.is_string() ? pid.get<std::string>() : pid.dump());
    } else {
      inst.group_id = tempeval_pair_key(inst.context, inst.question);
    }
    out.push_back(std::move(inst));
  }
  if (out.empty())
    throw Error(ErrorCode::ParseError, path.string() + ": no records");
  auto groups = group_instances(out);
  for (const auto& [gid, members] : groups) {
    if (members.size() != 2)
      throw Error(ErrorCode::PairingError,
                  "group " + gid + " has " + std::to_string(members.size()) +
                      " questions (expected a bidirectional pair), first id " +
                      members.front().id);
  }
  return out;
}

std::vector<Instance> load_tracie(const std::filesystem::path& path) {
  auto lines = read_lines(path);
  std::vector<Instance> out;
  std::size_t lineno = 0;
  for (const auto& line : lines) {
    ++lineno;
    if (collapse_ws(line).empty()) continue;
    auto where = [&] {
      return path.string() + ":" + std::to_string(lineno);
    };
    std::size_t tab = line.find('\t');
    if (tab == std::string::npos)
      throw Error(ErrorCode::ParseError, where() + ": missing tab");
    std::string left = line.substr(0, tab);
    std::string right = collapse_ws(line.substr(tab + 1));
    if (left.rfind("event:", 0) != 0)
      throw Error(ErrorCode::ParseError, where() + ": expected 'event:'");
    std::size_t story_pos = left.find("story:");
    if (story_pos == std::string::npos)
      throw Error(ErrorCode::ParseError, where() + ": expected 'story:'");
    std::string hypothesis =
        collapse_ws(left.substr(6, story_pos - 6));
    std::string story = collapse_ws(left.substr(story_pos + 6));
    std::string ans = lower(right);
    if (ans.rfind("answer:", 0) == 0) ans = collapse_ws(ans.substr(7));
    Label gold;
    if (ans == "positive") {
      gold = Label::Positive;
    } else if (ans == "negative") {
      gold = Label::Negative;
    } else {
      throw Error(ErrorCode::UnknownLabel, where() + ": '" + ans + "'");
    }
    Instance inst;
    inst.dataset = Dataset::Tracie;
    inst.id = "tracie:" + std::to_string(lineno) + ":0";
    inst.context = story;
    inst.question = hypothesis;
    inst.gold = gold;
    inst.group_id = tracie_group_key(story, hypothesis);
    out.push_back(std::move(inst));
  }
  if (out.empty())
    throw Error(ErrorCode::ParseError, path.string() + ": no records");
  return out;
}

std::vector<Instance> load_mctaco(const std::filesystem::path& path) {
  static const std::unordered_map<std::string, QType> kCategories = {
      {"Event Duration", QType::Duration},
      {"Frequency", QType::Frequency},
      {"Stationarity", QType::Stationarity},
      {"Event Ordering", QType::Ordering},
      {"Typical Time", QType::TypicalTime},
  };
  auto lines = read_lines(path);
  std::vector<Instance> out;
  std::unordered_map<std::string, int> candidate_index;
  std::size_t lineno = 0;
  for (const auto& line : lines) {
    ++lineno;
    if (collapse_ws(line).empty()) continue;
    std::vector<std::string> cols;
    std::stringstream ss(line);
    std::string col;
    while (std::getline(ss, col, '\t')) cols.push_back(col);
    if (cols.size() != 5)
      throw Error(ErrorCode::ParseError,
                  path.string() + ":" + std::to_string(lineno) + ": expected 5 "
                      "tab-separated columns, got " +
                      std::to_string(cols.size()));
    std::string label = lower(collapse_ws(cols[3]));
    if (label != "yes" && label != "no")
      throw Error(ErrorCode::UnknownLabel,
                  path.string() + ":" + std::to_string(lineno) + ": '" +
                      label + "'");
    auto cat = kCategories.find(collapse_ws(cols[4]));
    if (cat == kCategories.end())
      throw Error(ErrorCode::UnknownCategory,
                  path.string() + ":" + std::to_string(lineno) + ": '" +
                      cols[4] + "'");
    Instance inst;
    inst.dataset = Dataset::Mctaco;
    inst.context = collapse_ws(cols[0]);
    inst.question = collapse_ws(cols[1]);
    inst.candidate = collapse_ws(cols[2]);
    inst.gold = label == "yes" ? Label::Yes : Label::No;
    inst.qtype = cat->second;
    std::string qkey = inst.context + "\x1f" + inst.question;
    inst.group_id = stable_hash(qkey);
    int idx = candidate_index[qkey]++;
    inst.id =
        "mctaco:" + std::to_string(lineno) + ":" + std::to_string(idx);
    out.push_back(std::move(inst));
  }
  if (out.empty())
    throw Error(ErrorCode::ParseError, path.string() + ": no records");
  return out;
}

std::vector<Instance> load_dataset(Dataset dataset,
                                   const std::filesystem::path& path) {
  switch (dataset) {
    case Dataset::TempEvalQaBi: return load_tempevalqa_bi(path);
    case Dataset::Tracie: return load_tracie(path);
    case Dataset::Mctaco: return load_mctaco(path);
  }
  throw Error(ErrorCode::ConfigError, "bad dataset");
}

std::vector<Instance> subsample(const std::vector<Instance>& instances,
                                std::size_t cap, std::uint64_t seed) {
  if (instances.size() <= cap) return instances;
  // Group ids in first-appearance order, then shuffled by the seed.
  std::vector<std::string> order;
  std::unordered_map<std::string, std::size_t> sizes;
  for (const auto& inst : instances) {
    if (sizes.find(inst.group_id) == sizes.end()) order.push_back(inst.group_id);
    sizes[inst.group_id]++;
  }
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::unordered_map<std::string, bool> keep;
  std::size_t total = 0;
  for (const auto& gid : order) {
    if (total + sizes[gid] <= cap) {
      keep[gid] = true;
      total += sizes[gid];
    }
  }
  std::vector<Instance> out;
  for (const auto& inst : instances) {
    if (keep.count(inst.group_id)) out.push_back(inst);
  }
  return out;
}

DatasetStats stats(const std::vector<Instance>& instances) {
  if (instances.empty())
    throw Error(ErrorCode::EmptyInput, "no instances");
  DatasetStats s;
  s.dataset = instances.front().dataset;
  s.n_instances = instances.size();
  s.n_groups = group_instances(instances).size();
  for (const auto& inst : instances) {
    if (inst.qtype) s.per_qtype[*inst.qtype]++;
  }
  return s;
}

json DatasetStats::to_json() const {
  json j;
  j["dataset"] = to_string(dataset);
  j["n_instances"] = n_instances;
  j["n_groups"] = n_groups;
  json pq = json::object();
  for (const auto& [q, n] : per_qtype) pq[to_string(q)] = n;
  j["per_qtype"] = pq;
  return j;
}

void write_normalized(const std::vector<Instance>& instances,
                      const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out)
    throw Error(ErrorCode::IoError, "cannot write " + path.string());
  for (const auto& inst : instances) out << inst.to_json().dump() << "\n";
}

std::vector<Instance> read_normalized(const std::filesystem::path& path) {
  auto lines = read_lines(path);
  std::vector<Instance> out;
  std::size_t lineno = 0;
  for (const auto& line : lines) {
    ++lineno;
    if (collapse_ws(line).empty()) continue;
    try {
      out.push_back(Instance::from_json(json::parse(line)));
    } catch (const Error&) {
      throw;
    } catch (const std::exception& e) {
      throw Error(ErrorCode::ParseError, path.string() + ":" +
                                             std::to_string(lineno) + ": " +
                                             e.what());
    }
  }
  if (out.empty())
    throw Error(ErrorCode::ParseError, path.string() + ": no records");
  return out;
}

}  // namespace ccp::ingest
