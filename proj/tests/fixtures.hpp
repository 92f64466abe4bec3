// Shared synthetic fixture generators used by the unit and acceptance
// suites. The generated files follow the official distribution formats the
// loaders accept, at whatever scale a test asks for.
#pragma once

#include <cstdlib>
#include <unistd.h>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "core.hpp"
#include "llm_client.hpp"

namespace fixtures {

inline std::filesystem::path source_dir() {
  const char* env = std::getenv("CCP_SOURCE_DIR");
  return env ? std::filesystem::path(env) : std::filesystem::current_path();
}

inline std::filesystem::path template_dir() {
  return source_dir() / "assets" / "templates";
}

inline std::filesystem::path fresh_dir(const std::string& tag) {
  auto dir = std::filesystem::temp_directory_path() /
             ("ccp_test_" + tag + "_" + std::to_string(::getpid()));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

// n_pairs bidirectional question pairs, one JSONL line per question.
inline std::filesystem::path write_tempevalqa_bi(
    const std::filesystem::path& dir, std::size_t n_pairs,
    const std::string& name = "tempevalqa_bi.jsonl") {
  auto path = dir / name;
  std::ofstream out(path);
  for (std::size_t i = 0; i < n_pairs; ++i) {
    std::string article = "On day " + std::to_string(i) +
                          " the ship departed. Later the storm arrived.";
    ccp::json fwd = {{"article", article},
                     {"question",
                      "Did the departure happen before event " +
                          std::to_string(i) + "?"},
                     {"answer", "yes"}};
    ccp::json rev = {{"article", article},
                     {"question",
                      "Did the departure happen after event " +
                          std::to_string(i) + "?"},
                     {"answer", "no"}};
    out << fwd.dump() << "\n" << rev.dump() << "\n";
  }
  return path;
}

// n_lines hypothesis/story examples; every 4 consecutive lines share a
// story+event so relation variants group together.
inline std::filesystem::path write_tracie(
    const std::filesystem::path& dir, std::size_t n_lines,
    const std::string& name = "tracie.txt") {
  const char* rels[] = {"starts before", "starts after", "ends before",
                        "ends after"};
  auto path = dir / name;
  std::ofstream out(path);
  for (std::size_t i = 0; i < n_lines; ++i) {
    std::size_t base = i / 4;
    std::string story = "Story " + std::to_string(base) +
                        ". The meeting ran long and dinner was late.";
    std::string hyp = "the meeting " + std::string(rels[i % 4]) + " dinner " +
                      std::to_string(base);
    out << "event: " << hyp << " story: " << story
        << "\tanswer: " << (i % 2 == 0 ? "positive" : "negative") << "\n";
  }
  return path;
}

// n_rows candidate rows spread over questions of ~5 candidates each,
// cycling through the five official categories.
inline std::filesystem::path write_mctaco(
    const std::filesystem::path& dir, std::size_t n_rows,
    const std::string& name = "mctaco.tsv") {
  const char* cats[] = {"Event Duration", "Frequency", "Stationarity",
                        "Event Ordering", "Typical Time"};
  auto path = dir / name;
  std::ofstream out(path);
  for (std::size_t i = 0; i < n_rows; ++i) {
    std::size_t q = i / 5;
    out << "Passage " << q << ". The storm lasted through the night.\t"
        << "How long did event " << q << " last?\t"
        << "candidate " << (i % 5) << "\t" << (i % 2 == 0 ? "yes" : "no")
        << "\t" << cats[q % 5] << "\n";
  }
  return path;
}

inline std::filesystem::path write_dataset(ccp::Dataset dataset,
                                           const std::filesystem::path& dir,
                                           std::size_t n) {
  switch (dataset) {
    case ccp::Dataset::TempEvalQaBi:
      return write_tempevalqa_bi(dir, n / 2);
    case ccp::Dataset::Tracie:
      return write_tracie(dir, n);
    case ccp::Dataset::Mctaco:
      return write_mctaco(dir, n);
  }
  throw std::logic_error("bad dataset");
}

// Scripted rules covering every stage of every method on the synthetic
// fixtures above, keyed by distinctive substrings of each prompt stage.
inline std::vector<ccp::llm::ScriptedRule> default_rules(
    ccp::Dataset dataset) {
  using ccp::llm::ScriptedRule;
  std::vector<ScriptedRule> rules;
  auto add = [&](std::string match, std::string response) {
    rules.push_back({std::move(match), std::move(response), false, false});
  };
  // Shared orchestration turns (reflection retry, debate round 2).
  add("double check that your answer",
      dataset == ccp::Dataset::Tracie
          ? "Rechecked. Final answer: positive"
          : "Rechecked. Final answer: yes");
  add("Using the reasoning from other agents",
      dataset == ccp::Dataset::Tracie
          ? "Updated after debate. Final answer: positive"
          : "Updated after debate. Final answer: yes");
  switch (dataset) {
    case ccp::Dataset::TempEvalQaBi:
      // Stage-specific rules first; the bare question rule is the CoT/SP
      // catch-all.
      add("Now, answer the original question",
          "The related exchange settles it. Final answer: yes");
      add("Answer the related question", "Thinking it through, Answer: no");
      add("Generate one related question, answer",  // single-call variant
          "Related: no. Final answer: yes");
      add("Generate one related question",
          "Did the departure happen after the original event?");
      add("Did the departure", "Step by step, clearly. Final answer: yes");
      break;
    case ccp::Dataset::Tracie:
      add("Now, evaluate the original hypothesis",
          "Given the flipped relation. Final answer: positive");
      add("Answer the related hypothesis",
          "Reasoning about it, Answer: negative");
      add("Generate one related hypothesis, evaluate",
          "Related: negative. Final answer: positive");
      add("Generate one related hypothesis",
          "the meeting starts after dinner");
      add("the meeting", "Working through the story. Final answer: positive");
      break;
    case ccp::Dataset::Mctaco:
      add("Now, can the candidate answer the given question",
          "Comparing with the alternatives. Final answer: yes");
      add("Related candidate:", "For this alternative, Answer: no");
      add("generate one related candidate answer",
          "Related: no. Final answer: yes");
      add("Generate related candidate answers",
          "two hours /\\ a week /\\ a decade");
      add("candidate", "Considering the passage. Final answer: yes");
      break;
  }
  return rules;
}

}  // namespace fixtures
