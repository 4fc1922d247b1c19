#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "graphsearch/errors.hpp"
#include "graphsearch/llm.hpp"
#include "graphsearch/retrieval.hpp"
#include "graphsearch/search_types.hpp"
#include "graphsearch/trace.hpp"

namespace graphsearch {

/// QD, CR, QG, LD, EV, QE on/off switches.
struct ModuleToggles {
  bool qd = true;  // query decomposition
  bool cr = true;  // context refinement
  bool qg = true;  // query grounding (and intermediate answers)
  bool ld = true;  // logic drafting
  bool ev = true;  // evidence verification
  bool qe = true;  // query expansion

  static ModuleToggles all_on() { return {}; }
  static ModuleToggles all_off() { return {false, false, false, false, false, false}; }
  /// Comma-separated names of the enabled modules, e.g. "qd,cr". "all"
  /// enables every module; "none" or "" disables every module.
  static ModuleToggles from_list(std::string_view list);
  std::string to_list() const;

  /// Throws ConfigError unless qe => ev => ld and qg => qd.
  void validate() const;

  friend bool operator==(const ModuleToggles&, const ModuleToggles&) = default;
};

struct SearchBudget {
  std::size_t max_rounds = 2;  // reflection rounds after the initial pass
  std::size_t max_subqueries_per_decomposition = 6;
  std::size_t max_expansion_queries = 3;
  std::size_t per_query_top_k = 30;

  /// Caps and k must be positive; max_rounds may be zero.
  void validate() const;

  friend bool operator==(const SearchBudget&, const SearchBudget&) = default;
};

/// `dual` routes semantic sub-queries to the chunk store and relational ones
/// to the graph store; the single-channel modes route every sub-query to the
/// named channel.
enum class ChannelMode { dual, semantic, relational, hybrid };

std::string_view to_string(ChannelMode mode);
ChannelMode channel_mode_from_string(std::string_view name);

struct SearchConfig {
  ModuleToggles toggles;
  SearchBudget budget;
  ChannelMode channel_mode = ChannelMode::dual;

  void validate() const;
  /// Single-round retrieve-then-answer: every module off, one hybrid query.
  static SearchConfig baseline(std::size_t top_k = 30);

  friend bool operator==(const SearchConfig&, const SearchConfig&) = default;
};

nlohmann::json to_json(const SearchConfig& config);
SearchConfig search_config_from_json(const nlohmann::json& j);

struct Decomposition {
  std::vector<SubQuery> semantic;
  std::vector<SubQuery> relational;
  bool fallback = false;
};

struct SearchOutcome {
  std::string answer;
  std::string verification;  // "accepted", "unverified" or "not_run"
  std::vector<EvidenceRecord> records;
  std::optional<LogicDraft> draft;
  SearchTrace trace;
};

/// Raised when a module fails unrecoverably; carries the trace up to and
/// including the error event.
class SearchAborted : public Error {
 public:
  SearchAborted(const std::string& msg, SearchTrace trace) : Error(msg), trace_(std::move(trace)) {}
  const SearchTrace& trace() const noexcept { return trace_; }

 private:
  SearchTrace trace_;
};

/// Renderings used inside prompts.
std::string render_context(const RetrievedContext& ctx);
std::string render_refine_candidates(const RetrievedContext& ctx);
std::string render_records(const std::vector<EvidenceRecord>& records);
std::string render_draft(const LogicDraft& draft);

/// Response parsers. Each returns nullopt when the grammar is violated.
std::optional<std::vector<std::size_t>> parse_keep_indices(std::string_view response);
std::optional<LogicDraft> parse_logic_draft(std::string_view response);
std::optional<VerificationDecision> parse_verification(std::string_view response);
std::vector<std::pair<Channel, std::string>> parse_expansion(std::string_view response);

/// The agentic search loop. One instance per run: it owns the evidence
/// pool, the trace and the per-template call counters. The retriever and the
/// LLM client are borrowed.
class DeepSearch {
 public:
  DeepSearch(Retriever& retriever, LlmClient& llm, SearchConfig config);

  /// Full run. Throws SearchAborted (with the partial trace) when a module
  /// fails; the trace ends in an error event.
  SearchOutcome run(const std::string& question);

  // Individual stages, exposed for testing. They append to the trace and,
  // for process_subquery, to the pool.
  Decomposition decompose(const std::string& question);
  SubQuery ground_query(SubQuery sq);
  RetrievedContext retrieve_for(const SubQuery& sq);
  RetrievedContext refine_context(const SubQuery& sq, const RetrievedContext& raw);
  std::string answer_subquery(const SubQuery& sq, const RetrievedContext& refined);
  const EvidenceRecord& process_subquery(SubQuery sq);
  LogicDraft draft_logic(const std::string& question);
  VerificationDecision verify(const std::string& question, const LogicDraft& draft);
  std::vector<SubQuery> expand(const std::string& question, const LogicDraft& draft, const VerificationDecision& decision);
  std::string generate_final_answer(const std::string& question, const std::optional<LogicDraft>& draft);

  const EvidencePool& pool() const noexcept { return pool_; }
  const SearchTrace& trace() const noexcept { return trace_; }
  const SearchConfig& config() const noexcept { return config_; }
  std::size_t round() const noexcept { return round_; }

 private:
  std::string call(TemplateId id, const Bindings& bindings);
  void warn(std::string message);
  RetrievalMode route(Channel channel) const;

  Retriever& retriever_;
  LlmClient& llm_;
  SearchConfig config_;
  EvidencePool pool_;
  SearchTrace trace_;
  std::map<TemplateId, std::size_t> ordinals_;
  std::size_t round_ = 0;
};

}  // namespace graphsearch
