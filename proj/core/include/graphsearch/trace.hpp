#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "graphsearch/llm.hpp"
#include "graphsearch/search_types.hpp"

namespace graphsearch {

void to_json(nlohmann::json& j, const RetrievedContext& ctx);
void from_json(const nlohmann::json& j, RetrievedContext& ctx);
void to_json(nlohmann::json& j, const SubQuery& sq);
void from_json(const nlohmann::json& j, SubQuery& sq);
void to_json(nlohmann::json& j, const EvidenceRecord& r);
void from_json(const nlohmann::json& j, EvidenceRecord& r);
void to_json(nlohmann::json& j, const LogicDraft& d);
void from_json(const nlohmann::json& j, LogicDraft& d);
void to_json(nlohmann::json& j, const VerificationDecision& v);
void from_json(const nlohmann::json& j, VerificationDecision& v);

/// Event types written to a trace.
namespace event {
inline constexpr std::string_view run_start = "run_start";
inline constexpr std::string_view llm_call = "llm_call";
inline constexpr std::string_view decompose = "decompose";
inline constexpr std::string_view ground = "ground";
inline constexpr std::string_view retrieval = "retrieval";
inline constexpr std::string_view refine = "refine";
inline constexpr std::string_view record = "record";
inline constexpr std::string_view draft = "draft";
inline constexpr std::string_view verdict = "verdict";
inline constexpr std::string_view expansion = "expansion";
inline constexpr std::string_view final_answer = "final_answer";
inline constexpr std::string_view warning = "warning";
inline constexpr std::string_view metrics = "metrics";
inline constexpr std::string_view error = "error";
inline constexpr std::string_view run_end = "run_end";
}  // namespace event

struct TraceEvent {
  std::string type;
  std::size_t round = 0;
  nlohmann::json payload;

  friend bool operator==(const TraceEvent&, const TraceEvent&) = default;
};

/// Replayable record of one run: a line-delimited event log
/// ({"type", "round", "payload"} per line).
class SearchTrace {
 public:
  void add(std::string_view type, std::size_t round, nlohmann::json payload = nlohmann::json::object());

  const std::vector<TraceEvent>& events() const noexcept { return events_; }
  std::size_t count(std::string_view type) const;
  std::vector<const TraceEvent*> of_type(std::string_view type) const;

  std::string question() const;
  std::optional<std::string> final_answer() const;
  /// "accepted", "unverified" or "not_run"; empty before the run finished.
  std::string verification() const;
  std::size_t rounds() const;
  /// Evidence records in append order (one per interaction step).
  std::vector<EvidenceRecord> records() const;
  std::vector<std::string> warnings() const;
  std::size_t llm_calls() const { return count(event::llm_call); }
  std::size_t retrieval_calls() const { return count(event::retrieval); }

  std::string to_jsonl() const;
  /// Throws CorruptTrace naming the 1-based line of the first bad record;
  /// an empty input is corrupt.
  static SearchTrace parse(std::string_view jsonl);
  void save(const std::filesystem::path& path) const;
  static SearchTrace load(const std::filesystem::path& path);

  friend bool operator==(const SearchTrace&, const SearchTrace&) = default;

 private:
  std::vector<TraceEvent> events_;
};

/// Rebuilds a scripted transcript (with prompt digests) from the LLM calls
/// recorded in a trace, so the run can be replayed.
Transcript transcript_from_trace(const SearchTrace& trace);

/// Human-readable timeline: rounds, sub-queries per channel, verdicts and
/// recall-by-step when a metrics event is present.
std::string render_trace(const SearchTrace& trace);

}  // namespace graphsearch
