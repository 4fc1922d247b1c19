#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <ostream>
#include <string>

#include "app_config.hpp"
#include "graphsearch/kb_store.hpp"
#include "graphsearch/retrieval.hpp"

namespace graphsearch::cli {

namespace exit_code {
inline constexpr int ok = 0;
inline constexpr int usage = 1;  // bad arguments, unreadable input files, corrupt traces
inline constexpr int config = 2;
inline constexpr int build = 3;
inline constexpr int engine = 4;
inline constexpr int threshold = 5;  // eval failure rate above the limit
}  // namespace exit_code

std::shared_ptr<EmbeddingProvider> make_embedder(const EmbedderSettings& settings);

/// A loaded index directory with its retriever. Throws StoreError, or
/// ConfigError when the configured embedder differs from the indexed one.
struct LoadedIndex {
  std::unique_ptr<LoadedKb> store;
  std::shared_ptr<EmbeddingProvider> embedder;
  std::unique_ptr<GraphRetriever> retriever;
};

LoadedIndex open_index(const AppConfig& config);

struct AskOptions {
  std::string mode = "deepsearch";  // or "baseline"
  std::filesystem::path trace_out;
};

struct EvalOptions {
  std::string modes = "deepsearch";  // "deepsearch", "baseline" or "both"
  std::optional<std::string> ablation;
  std::filesystem::path out_dir = "eval_report";
  bool write_traces = true;
};

int cmd_index(const AppConfig& config, std::ostream& out, std::ostream& err);
int cmd_ask(const AppConfig& config, const std::string& question, const AskOptions& options, std::ostream& out,
            std::ostream& err);
int cmd_eval(const AppConfig& config, const std::filesystem::path& dataset, const EvalOptions& options, std::ostream& out,
             std::ostream& err);
int cmd_trace_show(const std::filesystem::path& trace_path, std::ostream& out, std::ostream& err);

/// Parses arguments and dispatches; returns the process exit status.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace graphsearch::cli
