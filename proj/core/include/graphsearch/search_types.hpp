#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "graphsearch/retrieval.hpp"

namespace graphsearch {

/// Retrieval channel a sub-query is routed to. `hybrid` is used when
/// decomposition is disabled or in the single hybrid-channel mode.
enum class Channel { semantic, relational, hybrid };

std::string_view to_string(Channel channel);
Channel channel_from_string(std::string_view name);

enum class SubQueryStatus { pending, grounded, answered };

std::string_view to_string(SubQueryStatus status);
SubQueryStatus status_from_string(std::string_view name);

/// Reference markers of the form Entity#<n>, in order of first appearance.
std::vector<std::string> find_placeholders(std::string_view text);

struct SubQuery {
  std::string id;
  std::string text;
  Channel channel = Channel::semantic;
  std::size_t origin_round = 0;  // 0: decomposition; r > 0: expansion in reflection round r
  std::vector<std::string> placeholders;
  SubQueryStatus status = SubQueryStatus::pending;

  friend bool operator==(const SubQuery&, const SubQuery&) = default;
};

struct EvidenceRecord {
  SubQuery sub_query;
  RetrievedContext raw_context;
  RetrievedContext refined_context;
  std::string intermediate_answer;  // empty when grounding/answering is disabled
  std::size_t round = 0;

  friend bool operator==(const EvidenceRecord&, const EvidenceRecord&) = default;
};

/// Append-only sequence of evidence records with a running merge of their
/// refined contexts.
class EvidencePool {
 public:
  void append(EvidenceRecord record);

  const std::vector<EvidenceRecord>& records() const noexcept { return records_; }
  const RetrievedContext& merged_context() const noexcept { return merged_; }
  bool empty() const noexcept { return records_.empty(); }
  std::size_t size() const noexcept { return records_.size(); }
  bool contains_subquery(std::string_view id) const;

 private:
  std::vector<EvidenceRecord> records_;
  RetrievedContext merged_;
};

struct DraftStep {
  std::string claim;
  std::vector<std::string> supporting;  // sub-query ids

  friend bool operator==(const DraftStep&, const DraftStep&) = default;
};

struct LogicDraft {
  std::vector<DraftStep> steps;
  std::vector<std::string> gaps;

  friend bool operator==(const LogicDraft&, const LogicDraft&) = default;
};

enum class Verdict { accept, reject };

std::string_view to_string(Verdict verdict);

struct VerificationDecision {
  Verdict verdict = Verdict::reject;
  std::vector<std::string> missing_points;  // empty iff accept

  friend bool operator==(const VerificationDecision&, const VerificationDecision&) = default;
};

}  // namespace graphsearch
