#pragma once

#include <cstddef>
#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "graphsearch/embedding.hpp"
#include "graphsearch/llm.hpp"
#include "graphsearch/pipeline.hpp"
#include "graphsearch/retrieval.hpp"

namespace graphsearch::cli {

enum class ExtractorKind { rule, llm };
enum class EmbedderKind { hashing, remote };

struct EmbedderSettings {
  EmbedderKind kind = EmbedderKind::hashing;
  std::size_t hashing_dimension = 256;
  RemoteEmbedderConfig remote;
};

struct JudgeSettings {
  bool enabled = false;
  LlmConfig llm;
};

struct AppConfig {
  std::filesystem::path index_dir;
  std::filesystem::path corpus_path;
  std::size_t chunk_size_units = 400;
  std::size_t chunk_overlap_units = 0;
  ExtractorKind extractor = ExtractorKind::rule;
  EmbedderSettings embedder;
  RetrieverConfig retriever;
  LlmConfig llm;
  JudgeSettings judge;
  SearchConfig search;
  std::size_t index_parallelism = 1;
  std::size_t eval_parallelism = 1;

  AppConfig();

  /// Throws ConfigError on any inconsistent setting.
  void validate() const;
};

/// Throws ConfigError when `config` cannot back a client; `where` names it.
void validate_llm_config(const LlmConfig& config, const std::string& where);

/// Reads a JSON config; relative paths resolve against the file's
/// directory. Unknown keys are rejected. Throws ConfigError.
AppConfig load_app_config(const std::filesystem::path& path);
AppConfig app_config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
nlohmann::json to_json(const AppConfig& config);

}  // namespace graphsearch::cli
