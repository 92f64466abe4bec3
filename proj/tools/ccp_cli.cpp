// Command-line front end. Talks to the harness only through the C API.
#include <cstdio>
#include <memory>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ccp/ccp_c.h"

namespace {

struct CtxDeleter {
  void operator()(ccp_ctx* c) const { ccp_ctx_free(c); }
};

int report(ccp_ctx* ctx, int rc) {
  if (rc != CCP_OK) std::fprintf(stderr, "error: %s\n", ccp_last_error(ctx));
  return rc;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Counterfactual-consistency evaluation harness"};
  app.require_subcommand(1);

  std::unique_ptr<ccp_ctx, CtxDeleter> ctx(ccp_ctx_new());

  std::string dataset, in_path, out_path;
  auto* ingest = app.add_subcommand(
      "ingest", "Normalize an official dataset file to JSONL");
  ingest->add_option("dataset", dataset,
                     "tempevalqa_bi | tracie | mctaco")->required();
  ingest->add_option("--in", in_path, "Official dataset file")->required();
  ingest->add_option("--out", out_path, "Normalized JSONL output")->required();

  std::string config_path;
  auto* run = app.add_subcommand("run", "Execute an evaluation run");
  run->add_option("--config", config_path, "Run config JSON")->required();

  std::string run_id, results_dir = "results", resume_config;
  auto* resume = app.add_subcommand("resume", "Finish an interrupted run");
  resume->add_option("run_id", run_id)->required();
  resume->add_option("--results-dir", results_dir);
  resume->add_option("--config", resume_config,
                     "Optional config to re-validate against the manifest");

  std::vector<std::string> run_ids;
  std::string cmp_results_dir = "results";
  auto* compare = app.add_subcommand("compare", "Tabulate finished runs");
  compare->add_option("run_ids", run_ids)->required()->expected(-1);
  compare->add_option("--results-dir", cmp_results_dir);

  auto* cache = app.add_subcommand("cache", "Cache maintenance");
  cache->require_subcommand(1);
  std::string cache_dir = ".ccp_cache", model;
  auto* purge = cache->add_subcommand("purge", "Evict cached completions");
  purge->add_option("--cache-dir", cache_dir);
  purge->add_option("--model", model, "Only entries for this model");

  CLI11_PARSE(app, argc, argv);

  if (*ingest) {
    return report(ctx.get(), ccp_ingest(ctx.get(), dataset.c_str(),
                                        in_path.c_str(), out_path.c_str()));
  }
  if (*run) {
    char* id = nullptr;
    int rc = ccp_run(ctx.get(), config_path.c_str(), &id);
    if (rc == CCP_OK && id) std::printf("%s\n", id);
    ccp_string_free(id);
    return report(ctx.get(), rc);
  }
  if (*resume) {
    const char* cfg = resume_config.empty() ? nullptr : resume_config.c_str();
    return report(ctx.get(), ccp_resume(ctx.get(), results_dir.c_str(),
                                        run_id.c_str(), cfg));
  }
  if (*compare) {
    std::vector<const char*> ids;
    for (const auto& r : run_ids) ids.push_back(r.c_str());
    char* table = nullptr;
    int rc = ccp_compare(ctx.get(), cmp_results_dir.c_str(), ids.data(),
                         ids.size(), &table, nullptr);
    if (rc == CCP_OK && table) std::printf("%s", table);
    ccp_string_free(table);
    return report(ctx.get(), rc);
  }
  if (*purge) {
    long long n = 0;
    const char* m = model.empty() ? nullptr : model.c_str();
    int rc = ccp_cache_purge(ctx.get(), cache_dir.c_str(), m, &n);
    if (rc == CCP_OK) std::printf("evicted %lld entries\n", n);
    return report(ctx.get(), rc);
  }
  return 0;
}
