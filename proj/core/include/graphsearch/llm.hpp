#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "graphsearch/http.hpp"
#include "graphsearch/prompts.hpp"

namespace graphsearch {

enum class LlmBackend { remote, scripted };

struct LlmConfig {
  LlmBackend backend = LlmBackend::scripted;
  std::string base_url = "https://api.openai.com/v1";
  std::string model_name = "gpt-4o-mini";
  std::string api_key_env_var = "GRAPHSEARCH_LLM_API_KEY";
  double temperature = 0.0;
  std::size_t max_output_units = 1024;
  RetryPolicy retry;
  std::size_t max_in_flight = 4;
  std::string transcript_path;  // scripted backend
  bool strict_digests = false;  // scripted backend: also pin prompt digests
};

/// A rendered prompt tagged with the template that produced it.
struct LlmRequest {
  TemplateId template_id = TemplateId::final_answer;
  std::vector<ChatMessage> messages;
};

class LlmClient {
 public:
  virtual ~LlmClient() = default;
  virtual std::string complete(const LlmRequest& request) = 0;
  virtual std::string identity() const = 0;
};

/// FNV-1a digest over roles and contents, hex encoded.
std::string prompt_digest(const std::vector<ChatMessage>& messages);

/// OpenAI-compatible `POST {base_url}/chat/completions` client.
class RemoteLlmClient final : public LlmClient {
 public:
  RemoteLlmClient(LlmConfig config, std::shared_ptr<HttpTransport> transport, Sleeper sleep = default_sleeper());

  std::string complete(const LlmRequest& request) override;
  std::string identity() const override { return "remote:" + config_.model_name; }

  /// Requests issued for the most recent completion, retries included.
  int last_attempts() const noexcept { return last_attempts_; }

 private:
  LlmConfig config_;
  std::shared_ptr<HttpTransport> transport_;
  Sleeper sleep_;
  InFlightLimiter limiter_;
  int last_attempts_ = 0;
};

struct TranscriptEntry {
  TemplateId template_id = TemplateId::final_answer;
  std::size_t ordinal = 1;  // 1-based call count per template within a run
  std::string response;
  std::optional<std::string> prompt_digest;
  std::optional<std::string> run;  // scope; unset entries apply to every run

  friend bool operator==(const TranscriptEntry&, const TranscriptEntry&) = default;
};

/// Fixture responses keyed by (template, ordinal). File form: one JSON
/// object per line with keys template, ordinal, response and optional
/// prompt_digest / run.
class Transcript {
 public:
  Transcript() = default;
  explicit Transcript(std::vector<TranscriptEntry> entries) : entries_(std::move(entries)) {}

  static Transcript parse(std::string_view jsonl);
  static Transcript load(const std::filesystem::path& path);

  void add(TemplateId id, std::size_t ordinal, std::string response);
  void add(TranscriptEntry entry) { entries_.push_back(std::move(entry)); }

  const std::vector<TranscriptEntry>& entries() const noexcept { return entries_; }
  std::string to_jsonl() const;

 private:
  std::vector<TranscriptEntry> entries_;
};

/// Deterministic backend replaying a transcript. One instance per run: it
/// owns the per-template call cursors. Fails loudly on exhaustion and, in
/// strict mode, on prompt digest mismatch.
class ScriptedLlmClient final : public LlmClient {
 public:
  explicit ScriptedLlmClient(Transcript transcript, std::string run = {}, bool strict_digests = false);

  std::string complete(const LlmRequest& request) override;
  std::string identity() const override { return "scripted"; }

  std::size_t calls() const;

 private:
  mutable std::mutex mu_;
  std::map<std::pair<TemplateId, std::size_t>, TranscriptEntry> responses_;
  std::map<TemplateId, std::size_t> cursors_;
  bool strict_;
  std::size_t calls_ = 0;
};

/// Builds the client described by `config`. Remote clients read their key
/// from `config.api_key_env_var`; scripted clients load `transcript_path`.
std::unique_ptr<LlmClient> make_llm_client(const LlmConfig& config, const std::string& run = {});

}  // namespace graphsearch
