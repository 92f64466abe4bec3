#include "ccp/ccp_c.h"

#include <cstdlib>
#include <cstring>
#include <fstream>
#include <string>

#include "error.hpp"
#include "ingest.hpp"
#include "llm_client.hpp"
#include "runner.hpp"

struct ccp_ctx {
  std::string last_error;
};

namespace {

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out) std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

int code_for(const ccp::Error& e) {
  switch (e.code()) {
    case ccp::ErrorCode::ConfigError:
    case ccp::ErrorCode::ManifestMismatch:
    case ccp::ErrorCode::DatasetMismatch:
    case ccp::ErrorCode::UnsupportedDataset:
      return CCP_ERR_CONFIG;
    case ccp::ErrorCode::RunAborted:
      return CCP_ERR_ABORTED;
    default:
      return CCP_ERR_RUNTIME;
  }
}

template <typename Fn>
int guarded(ccp_ctx* ctx, Fn&& fn) {
  if (!ctx) return CCP_ERR_RUNTIME;
  ctx->last_error.clear();
  try {
    fn();
    return CCP_OK;
  } catch (const ccp::Error& e) {
    ctx->last_error = e.what();
    return code_for(e);
  } catch (const std::exception& e) {
    ctx->last_error = e.what();
    return CCP_ERR_RUNTIME;
  }
}

}  // namespace

extern "C" {

ccp_ctx* ccp_ctx_new(void) { return new ccp_ctx(); }

void ccp_ctx_free(ccp_ctx* ctx) { delete ctx; }

const char* ccp_last_error(const ccp_ctx* ctx) {
  return ctx ? ctx->last_error.c_str() : "";
}

void ccp_string_free(char* s) { std::free(s); }

int ccp_ingest(ccp_ctx* ctx, const char* dataset, const char* in_path,
               const char* out_path) {
  return guarded(ctx, [&] {
    if (!dataset || !in_path || !out_path)
      throw ccp::Error(ccp::ErrorCode::ConfigError, "null argument");
    auto ds = ccp::dataset_from_string(dataset);
    auto instances = ccp::ingest::load_dataset(ds, in_path);
    ccp::ingest::write_normalized(instances, out_path);
    auto st = ccp::ingest::stats(instances);
    std::filesystem::path stats_path(out_path);
    stats_path += ".stats.json";
    std::ofstream out(stats_path);
    out << st.to_json().dump(2) << "\n";
  });
}

int ccp_run(ccp_ctx* ctx, const char* config_path, char** run_id_out) {
  return guarded(ctx, [&] {
    if (!config_path)
      throw ccp::Error(ccp::ErrorCode::ConfigError, "null config path");
    auto config = ccp::runner::RunConfig::from_file(config_path);
    auto result = ccp::runner::run(config);
    if (run_id_out) *run_id_out = dup_string(result.manifest.run_id);
  });
}

int ccp_resume(ccp_ctx* ctx, const char* results_dir, const char* run_id,
               const char* config_path) {
  return guarded(ctx, [&] {
    if (!results_dir || !run_id)
      throw ccp::Error(ccp::ErrorCode::ConfigError, "null argument");
    std::optional<std::filesystem::path> cfg;
    if (config_path) cfg = std::filesystem::path(config_path);
    ccp::runner::resume(run_id, results_dir, cfg);
  });
}

int ccp_compare(ccp_ctx* ctx, const char* results_dir,
                const char* const* run_ids, size_t n_run_ids,
                char** table_out, char** json_out) {
  return guarded(ctx, [&] {
    if (!results_dir || !run_ids || n_run_ids == 0)
      throw ccp::Error(ccp::ErrorCode::ConfigError, "no run ids given");
    std::vector<std::string> ids(run_ids, run_ids + n_run_ids);
    auto cmp = ccp::runner::compare(ids, results_dir);
    if (table_out) *table_out = dup_string(cmp.table);
    if (json_out) *json_out = dup_string(cmp.to_json().dump(2));
  });
}

int ccp_cache_purge(ccp_ctx* ctx, const char* cache_dir, const char* model,
                    long long* evicted_out) {
  return guarded(ctx, [&] {
    if (!cache_dir)
      throw ccp::Error(ccp::ErrorCode::ConfigError, "null cache dir");
    ccp::llm::DiskCache cache{std::filesystem::path(cache_dir)};
    std::size_t n =
        model ? cache.purge(ccp::llm::PurgeScope::ByModel, model)
              : cache.purge(ccp::llm::PurgeScope::All);
    if (evicted_out) *evicted_out = static_cast<long long>(n);
  });
}

}  // extern "C"
