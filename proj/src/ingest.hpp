#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "core.hpp"

namespace ccp::ingest {

struct DatasetStats {
  Dataset dataset = Dataset::TempEvalQaBi;
  std::size_t n_instances = 0;
  std::size_t n_groups = 0;
  std::map<QType, std::size_t> per_qtype;  // MCTACO only

  json to_json() const;
};

// TempEvalQA-Bi: JSONL, one question per line:
//   {"article": ..., "question": ..., "answer": "yes"|"no", "pair_id"?: ...}
// Pre-annotated pair ids are honored; otherwise the before/after pair is
// derived by relation-word normalization. Every question must have its
// mutually exclusive counterpart.
std::vector<Instance> load_tempevalqa_bi(const std::filesystem::path& path);

// TRACIE: one example per line,
//   event: <hypothesis> story: <story>\tanswer: <positive|negative>
std::vector<Instance> load_tracie(const std::filesystem::path& path);

// MCTACO: tab-separated, 5 columns:
//   passage \t question \t candidate \t yes|no \t category
std::vector<Instance> load_mctaco(const std::filesystem::path& path);

std::vector<Instance> load_dataset(Dataset dataset,
                                   const std::filesystem::path& path);

// Group-preserving random sample of at most `cap` instances. Whole groups
// are kept or dropped together; deterministic for a fixed seed.
std::vector<Instance> subsample(const std::vector<Instance>& instances,
                                std::size_t cap, std::uint64_t seed);

DatasetStats stats(const std::vector<Instance>& instances);

// Normalized JSONL schema (one instance object per line).
void write_normalized(const std::vector<Instance>& instances,
                      const std::filesystem::path& path);
std::vector<Instance> read_normalized(const std::filesystem::path& path);

// TRACIE grouping key: hypothesis with its explicit relation token
// ("starts before"/"starts after"/"ends before"/"ends after") removed and
// whitespace collapsed.
std::string tracie_group_key(const std::string& story,
                             const std::string& hypothesis);

// TempEvalQA-Bi pairing key: question with the relation word
// (before/after) removed and whitespace collapsed.
std::string tempeval_pair_key(const std::string& article,
                              const std::string& question);

}  // namespace ccp::ingest
