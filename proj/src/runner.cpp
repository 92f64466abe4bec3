#include "runner.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

namespace ccp::runner {

namespace {

std::string now_iso8601() {
  auto now = std::chrono::system_clock::now();
  std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

std::string default_run_id(const RunConfig& config) {
  auto now = std::chrono::system_clock::now().time_since_epoch();
  auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now).count();
  return to_string(config.dataset) + "-" +
         to_string(config.method_config.method) + "-" + std::to_string(ms);
}

json read_json_file(const std::filesystem::path& path, ErrorCode on_error) {
  std::ifstream in(path);
  if (!in) throw Error(on_error, "cannot open " + path.string());
  try {
    json j;
    in >> j;
    return j;
  } catch (const std::exception& e) {
    throw Error(on_error, path.string() + ": " + e.what());
  }
}

void write_text_atomic(const std::filesystem::path& path,
                       const std::string& text) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
    out << text;
  }
  std::filesystem::rename(tmp, path);
}

std::vector<Instance> load_instances(const RunConfig& config) {
  // Normalized JSONL first; fall back to the raw distribution format.
  try {
    auto instances = ingest::read_normalized(config.dataset_path);
    for (const auto& inst : instances) {
      if (inst.dataset != config.dataset)
        throw Error(ErrorCode::ConfigError,
                    "dataset file holds " + to_string(inst.dataset) +
                        " but config says " + to_string(config.dataset));
    }
    return instances;
  } catch (const Error& e) {
    if (e.code() == ErrorCode::ConfigError) throw;
  }
  return ingest::load_dataset(config.dataset, config.dataset_path);
}

// Serializes out-of-order worker results into dataset-order appends, one
// flushed line per prediction.
class OrderedAppender {
 public:
  OrderedAppender(const std::filesystem::path& path, std::size_t next_index)
      : out_(path, std::ios::app), next_(next_index) {
    if (!out_)
      throw Error(ErrorCode::IoError, "cannot append to " + path.string());
  }

  void put(std::size_t index, const Prediction& pred) {
    std::lock_guard<std::mutex> lock(mu_);
    pending_.emplace(index, pred);
    while (!pending_.empty() && pending_.begin()->first == next_) {
      out_ << pending_.begin()->second.to_json().dump() << "\n";
      out_.flush();
      pending_.erase(pending_.begin());
      ++next_;
    }
  }

 private:
  std::ofstream out_;
  std::size_t next_;
  std::map<std::size_t, Prediction> pending_;
  std::mutex mu_;
};

std::vector<Prediction> read_predictions(const std::filesystem::path& path) {
  std::vector<Prediction> preds;
  std::ifstream in(path);
  if (!in) return preds;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    preds.push_back(Prediction::from_json(json::parse(line)));
  }
  return preds;
}

bool is_mcqa(MethodId m) {
  return m == MethodId::McqaCoT || m == MethodId::McqaCCP;
}

struct TaskPlan {
  // Unit of scheduling: per-instance index ranges. For MCQA methods a task
  // covers one whole question group (contiguous in dataset order after a
  // stable regroup).
  std::vector<std::pair<std::size_t, std::size_t>> tasks;  // [begin, end)
};

RunResult execute(const RunManifest& manifest, bool fresh) {
  const RunConfig& config = manifest.config;
  auto t0 = std::chrono::steady_clock::now();
  auto run_dir = config.results_dir / manifest.run_id;
  std::filesystem::create_directories(run_dir);

  auto instances = load_instances(config);
  if (config.subsample_cap)
    instances = ingest::subsample(instances, *config.subsample_cap, config.seed);

  MethodId method = config.method_config.method;
  if (is_mcqa(method)) {
    // Group members must be adjacent so one task spans one question.
    std::stable_sort(instances.begin(), instances.end(),
                     [](const Instance& a, const Instance& b) {
                       return a.group_id < b.group_id;
                     });
  }

  auto groups = group_instances(instances);

  // Manifest lands on disk before any provider traffic.
  write_text_atomic(run_dir / "manifest.json",
                    manifest.to_json().dump(2) + "\n");

  auto templates = promptkit::TemplateLibrary::load(config.template_dir);
  auto cache = std::make_shared<llm::DiskCache>(config.cache_dir);
  llm::Client client =
      llm::Client::make(config.provider, cache, manifest.run_id);

  auto predictions_path = run_dir / "predictions.jsonl";
  if (fresh) std::filesystem::remove(predictions_path);
  std::vector<Prediction> done = read_predictions(predictions_path);
  std::set<std::string> done_ids;
  for (const auto& p : done) done_ids.insert(p.instance_id);

  // Build tasks over instance index ranges.
  std::vector<std::pair<std::size_t, std::size_t>> tasks;
  if (is_mcqa(method)) {
    std::size_t begin = 0;
    for (std::size_t i = 1; i <= instances.size(); ++i) {
      if (i == instances.size() ||
          instances[i].group_id != instances[begin].group_id) {
        tasks.emplace_back(begin, i);
        begin = i;
      }
    }
  } else {
    for (std::size_t i = 0; i < instances.size(); ++i)
      tasks.emplace_back(i, i + 1);
  }

  OrderedAppender appender(predictions_path, done.size());
  std::mutex state_mu;
  std::size_t error_count = 0;
  for (const auto& p : done)
    if (p.error) ++error_count;
  std::size_t max_errors = static_cast<std::size_t>(
      config.error_rate_threshold * static_cast<double>(instances.size()));
  bool aborted = false;

  auto run_task = [&](std::size_t task_idx) {
    auto [begin, end] = tasks[task_idx];
    std::vector<Prediction> out;
    try {
      if (is_mcqa(method)) {
        std::vector<Instance> group(instances.begin() + begin,
                                    instances.begin() + end);
        auto plausible = methods::run_mcqa(group, config.method_config,
                                           templates, client);
        for (const auto& inst : group) {
          Prediction p;
          p.instance_id = inst.id;
          p.method = method;
          p.label = plausible.count(inst.id) ? Label::Yes : Label::No;
          out.push_back(std::move(p));
        }
      } else {
        const Instance& inst = instances[begin];
        const std::vector<Instance>* members = nullptr;
        if (method == MethodId::RetQ) members = &groups.at(inst.group_id);
        out.push_back(methods::run_method(inst, config.method_config, templates,
                                          client, members));
      }
    } catch (const std::exception& e) {
      out.clear();
      for (std::size_t i = begin; i < end; ++i) {
        Prediction p;
        p.instance_id = instances[i].id;
        p.method = method;
        p.label = Label::Unparseable;
        p.raw_text = std::string("error: ") + e.what();
        p.error = true;
        out.push_back(std::move(p));
      }
      std::lock_guard<std::mutex> lock(state_mu);
      error_count += end - begin;
      if (error_count > max_errors) aborted = true;
    }
    for (std::size_t i = 0; i < out.size(); ++i)
      appender.put(begin + i, out[i]);
  };

  // Tasks whose every instance is already persisted are skipped; the
  // persisted file is strictly in dataset order, so remaining tasks form a
  // suffix.
  std::vector<std::size_t> todo;
  for (std::size_t t = 0; t < tasks.size(); ++t) {
    bool complete = true;
    for (std::size_t i = tasks[t].first; i < tasks[t].second; ++i)
      if (!done_ids.count(instances[i].id)) complete = false;
    if (!complete) todo.push_back(t);
  }

  int workers = std::max(1, config.concurrency);
  std::atomic<std::size_t> cursor{0};
  auto worker = [&] {
    while (true) {
      {
        std::lock_guard<std::mutex> lock(state_mu);
        if (aborted) return;
      }
      std::size_t i = cursor.fetch_add(1);
      if (i >= todo.size()) return;
      run_task(todo[i]);
    }
  };
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  if (aborted)
    throw Error(ErrorCode::RunAborted,
                "error rate exceeded threshold (" +
                    std::to_string(error_count) + " failures)");

  RunResult result;
  result.manifest = manifest;
  result.predictions = read_predictions(predictions_path);
  result.report = metrics::report(result.predictions, instances, config.dataset);
  for (const auto& p : result.predictions) {
    if (p.fallback) ++result.fallback_count;
    if (p.error) ++result.error_count;
  }
  if (is_mcqa(method)) {
    std::map<std::string, Label> pred_by_id;
    for (const auto& p : result.predictions) pred_by_id[p.instance_id] = p.label;
    std::vector<std::pair<std::set<std::string>, std::set<std::string>>> qs;
    for (const auto& [gid, members] : group_instances(instances)) {
      std::set<std::string> gold, pred;
      for (const auto& inst : members) {
        if (inst.gold == Label::Yes) gold.insert(inst.id);
        if (pred_by_id.at(inst.id) == Label::Yes) pred.insert(inst.id);
      }
      qs.emplace_back(std::move(gold), std::move(pred));
    }
    result.mcqa = metrics::mcqa_em_f1(qs);
  }
  result.wall_time =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();

  json report_json = result.report.to_json();
  report_json["method"] = to_string(method);
  report_json["dataset"] = to_string(config.dataset);
  report_json["fallback_count"] = result.fallback_count;
  report_json["error_count"] = result.error_count;
  if (result.mcqa) {
    report_json["mcqa_em"] = std::round(result.mcqa->first * 10.0) / 10.0;
    report_json["mcqa_f1"] = std::round(result.mcqa->second * 10.0) / 10.0;
  }
  write_text_atomic(run_dir / "report.json", report_json.dump(2) + "\n");
  write_text_atomic(
      run_dir / "report.txt",
      metrics::render_table({{to_string(method), result.report}}));
  json result_json;
  result_json["run_id"] = manifest.run_id;
  result_json["wall_time"] = result.wall_time;
  result_json["n_predictions"] = result.predictions.size();
  write_text_atomic(run_dir / "result.json", result_json.dump(2) + "\n");
  return result;
}

}  // namespace

void RunConfig::validate() const {
  if (dataset_path.empty() || !std::filesystem::exists(dataset_path))
    throw Error(ErrorCode::ConfigError,
                "dataset path does not exist: " + dataset_path.string());
  method_config.validate();
  provider.validate();
  if (method_config.method == MethodId::DirA && dataset == Dataset::Mctaco)
    throw Error(ErrorCode::ConfigError, "dir_a is not defined on MCTACO");
  if (is_mcqa(method_config.method) && dataset != Dataset::Mctaco)
    throw Error(ErrorCode::ConfigError, "mcqa methods are MCTACO-only");
  if (concurrency < 1)
    throw Error(ErrorCode::ConfigError, "concurrency must be >= 1");
  if (error_rate_threshold < 0 || error_rate_threshold > 1)
    throw Error(ErrorCode::ConfigError,
                "error_rate_threshold must be in [0,1]");
  if (sampling) sampling->validate();
}

RunConfig RunConfig::from_json(const json& j) {
  RunConfig c;
  try {
    if (j.contains("run_id") && !j.at("run_id").is_null())
      c.run_id = j.at("run_id").get<std::string>();
    if (j.contains("results_dir"))
      c.results_dir = j.at("results_dir").get<std::string>();
    c.dataset = dataset_from_string(j.at("dataset").get<std::string>());
    c.dataset_path = j.at("dataset_path").get<std::string>();
    c.method_config = methods::MethodConfig::from_json(j.at("method_config"));
    c.provider = llm::ProviderConfig::from_json(j.at("provider"));
    if (j.contains("sampling") && !j.at("sampling").is_null())
      c.sampling = SamplingParams::from_json(j.at("sampling"));
    if (j.contains("subsample_cap") && !j.at("subsample_cap").is_null())
      c.subsample_cap = j.at("subsample_cap").get<std::size_t>();
    c.seed = j.value("seed", 0);
    if (j.contains("template_dir"))
      c.template_dir = j.at("template_dir").get<std::string>();
    if (j.contains("cache_dir"))
      c.cache_dir = j.at("cache_dir").get<std::string>();
    c.concurrency = j.value("concurrency", 4);
    c.error_rate_threshold = j.value("error_rate_threshold", 0.1);
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    throw Error(ErrorCode::ConfigError, e.what());
  }
  c.validate();
  return c;
}

RunConfig RunConfig::from_file(const std::filesystem::path& path) {
  return from_json(read_json_file(path, ErrorCode::ConfigError));
}

json RunManifest::frozen() const {
  json j;
  j["dataset"] = to_string(config.dataset);
  j["dataset_path"] = config.dataset_path.string();
  j["method_config"] = config.method_config.to_json();
  j["provider"] = config.provider.to_json();
  j["sampling"] =
      config.sampling ? config.sampling->to_json() : json(nullptr);
  j["subsample_cap"] =
      config.subsample_cap ? json(*config.subsample_cap) : json(nullptr);
  j["seed"] = config.seed;
  j["template_dir"] = config.template_dir.string();
  j["template_checksums"] = template_checksums;
  return j;
}

json RunManifest::to_json() const {
  json j = frozen();
  j["run_id"] = run_id;
  j["created_at"] = created_at;
  j["results_dir"] = config.results_dir.string();
  j["cache_dir"] = config.cache_dir.string();
  j["concurrency"] = config.concurrency;
  j["error_rate_threshold"] = config.error_rate_threshold;
  j["code_version"] = code_version;
  return j;
}

RunManifest RunManifest::from_json(const json& j) {
  RunManifest m;
  m.run_id = j.at("run_id").get<std::string>();
  m.created_at = j.at("created_at").get<std::string>();
  m.code_version = j.value("code_version", "");
  RunConfig& c = m.config;
  c.run_id = m.run_id;
  c.results_dir = j.value("results_dir", "results");
  c.dataset = dataset_from_string(j.at("dataset").get<std::string>());
  c.dataset_path = j.at("dataset_path").get<std::string>();
  c.method_config = methods::MethodConfig::from_json(j.at("method_config"));
  c.provider = llm::ProviderConfig::from_json(j.at("provider"));
  if (!j.at("sampling").is_null())
    c.sampling = SamplingParams::from_json(j.at("sampling"));
  if (!j.at("subsample_cap").is_null())
    c.subsample_cap = j.at("subsample_cap").get<std::size_t>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.template_dir = j.at("template_dir").get<std::string>();
  c.cache_dir = j.value("cache_dir", ".ccp_cache");
  c.concurrency = j.value("concurrency", 4);
  c.error_rate_threshold = j.value("error_rate_threshold", 0.1);
  m.template_checksums =
      j.at("template_checksums").get<std::map<std::string, std::string>>();
  return m;
}

namespace {

RunManifest make_manifest(const RunConfig& config) {
  RunManifest m;
  m.config = config;
  m.run_id = config.run_id ? *config.run_id : default_run_id(config);
  m.created_at = now_iso8601();
  m.template_checksums =
      promptkit::TemplateLibrary::load(config.template_dir).checksums();
  return m;
}

}  // namespace

RunResult run(const RunConfig& config) {
  config.validate();
  RunManifest manifest = make_manifest(config);
  auto run_dir = config.results_dir / manifest.run_id;
  bool fresh = true;
  if (std::filesystem::exists(run_dir / "manifest.json")) {
    // Same run id: behave like resume, but only when nothing changed.
    RunManifest prior = RunManifest::from_json(
        read_json_file(run_dir / "manifest.json", ErrorCode::ManifestMismatch));
    if (prior.frozen() != manifest.frozen())
      throw Error(ErrorCode::ManifestMismatch,
                  "run " + manifest.run_id +
                      " exists with a different configuration");
    manifest = prior;
    fresh = false;
  }
  return execute(manifest, fresh);
}

RunResult resume(const std::string& run_id,
                 const std::filesystem::path& results_dir,
                 const std::optional<std::filesystem::path>& config_path) {
  auto run_dir = results_dir / run_id;
  auto manifest_path = run_dir / "manifest.json";
  if (!std::filesystem::exists(manifest_path))
    throw Error(ErrorCode::ConfigError,
                "no manifest for run " + run_id + " under " +
                    results_dir.string());
  RunManifest manifest = RunManifest::from_json(
      read_json_file(manifest_path, ErrorCode::ManifestMismatch));
  manifest.config.results_dir = results_dir;
  if (config_path) {
    RunConfig current = RunConfig::from_file(*config_path);
    current.run_id = run_id;
    current.results_dir = results_dir;
    RunManifest from_config = make_manifest(current);
    if (from_config.frozen() != manifest.frozen())
      throw Error(ErrorCode::ManifestMismatch,
                  "configuration changed since run " + run_id + " started");
  }
  // Template assets must still be the ones the run was started with.
  auto current_checksums =
      promptkit::TemplateLibrary::load(manifest.config.template_dir).checksums();
  if (current_checksums != manifest.template_checksums)
    throw Error(ErrorCode::ManifestMismatch,
                "template assets changed since run " + run_id + " started");
  return execute(manifest, /*fresh=*/false);
}

Comparison compare(const std::vector<std::string>& run_ids,
                   const std::filesystem::path& results_dir) {
  if (run_ids.empty()) throw Error(ErrorCode::EmptyInput, "no run ids");
  Comparison cmp;
  std::optional<Dataset> dataset;
  std::vector<ComparisonRow> rows;
  for (const auto& run_id : run_ids) {
    auto run_dir = results_dir / run_id;
    json report = read_json_file(run_dir / "report.json", ErrorCode::ConfigError);
    Dataset ds = dataset_from_string(report.at("dataset").get<std::string>());
    if (dataset && *dataset != ds)
      throw Error(ErrorCode::DatasetMismatch,
                  "runs span " + to_string(*dataset) + " and " + to_string(ds));
    dataset = ds;
    ComparisonRow row;
    row.run_id = run_id;
    row.method = method_from_string(report.at("method").get<std::string>());
    row.report.acc = report.at("acc").get<double>();
    row.report.f1 = report.at("f1").get<double>();
    row.report.inc = report.at("inc").get<double>();
    row.report.n_instances = report.at("n_instances").get<std::size_t>();
    row.report.n_groups = report.at("n_groups").get<std::size_t>();
    row.report.n_unparseable = report.at("n_unparseable").get<std::size_t>();
    rows.push_back(std::move(row));
  }
  // Paper row order: SP, CoT, Consistency, Reflection, Debate, CCP, then
  // the analysis variants.
  auto rank = [](MethodId m) {
    switch (m) {
      case MethodId::SP: return 0;
      case MethodId::CoT: return 1;
      case MethodId::Consistency: return 2;
      case MethodId::Reflection: return 3;
      case MethodId::Debate: return 4;
      case MethodId::CCP: return 5;
      case MethodId::CcpE2e: return 6;
      case MethodId::DirA: return 7;
      case MethodId::RetQ: return 8;
      case MethodId::McqaCoT: return 9;
      case MethodId::McqaCCP: return 10;
    }
    return 11;
  };
  std::stable_sort(rows.begin(), rows.end(),
                   [&](const ComparisonRow& a, const ComparisonRow& b) {
                     return rank(a.method) < rank(b.method);
                   });
  cmp.dataset = *dataset;
  cmp.rows = std::move(rows);
  std::vector<std::pair<std::string, metrics::ScoreReport>> table_rows;
  for (const auto& row : cmp.rows)
    table_rows.emplace_back(to_string(row.method), row.report);
  cmp.table = metrics::render_table(table_rows);
  return cmp;
}

json Comparison::to_json() const {
  json j;
  j["dataset"] = to_string(dataset);
  json arr = json::array();
  for (const auto& row : rows) {
    arr.push_back({{"run_id", row.run_id},
                   {"method", to_string(row.method)},
                   {"acc", row.report.acc},
                   {"f1", row.report.f1},
                   {"inc", row.report.inc}});
  }
  j["rows"] = arr;
  return j;
}

}  // namespace ccp::runner
