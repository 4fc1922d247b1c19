#include "graphsearch/search_types.hpp"

#include <algorithm>
#include <cctype>

#include "graphsearch/errors.hpp"

namespace graphsearch {

std::string_view to_string(Channel channel) {
  switch (channel) {
    case Channel::semantic: return "semantic";
    case Channel::relational: return "relational";
    case Channel::hybrid: return "hybrid";
  }
  return "hybrid";
}

Channel channel_from_string(std::string_view name) {
  if (name == "semantic") return Channel::semantic;
  if (name == "relational") return Channel::relational;
  if (name == "hybrid") return Channel::hybrid;
  throw InvalidArgument("unknown channel '" + std::string(name) + "'");
}

std::string_view to_string(SubQueryStatus status) {
  switch (status) {
    case SubQueryStatus::pending: return "pending";
    case SubQueryStatus::grounded: return "grounded";
    case SubQueryStatus::answered: return "answered";
  }
  return "pending";
}

SubQueryStatus status_from_string(std::string_view name) {
  if (name == "pending") return SubQueryStatus::pending;
  if (name == "grounded") return SubQueryStatus::grounded;
  if (name == "answered") return SubQueryStatus::answered;
  throw InvalidArgument("unknown sub-query status '" + std::string(name) + "'");
}

std::string_view to_string(Verdict verdict) { return verdict == Verdict::accept ? "ACCEPT" : "REJECT"; }

std::vector<std::string> find_placeholders(std::string_view text) {
  static constexpr std::string_view kMarker = "Entity#";
  std::vector<std::string> found;
  std::size_t pos = 0;
  while ((pos = text.find(kMarker, pos)) != std::string_view::npos) {
    // Reject matches glued to a preceding word character (e.g. "MyEntity#1").
    const bool word_before = pos > 0 && (std::isalnum(static_cast<unsigned char>(text[pos - 1])) != 0 || text[pos - 1] == '_');
    std::size_t end = pos + kMarker.size();
    while (end < text.size() && std::isdigit(static_cast<unsigned char>(text[end])) != 0) ++end;
    if (!word_before && end > pos + kMarker.size()) {
      std::string marker(text.substr(pos, end - pos));
      if (std::find(found.begin(), found.end(), marker) == found.end()) found.push_back(std::move(marker));
    }
    pos = end;
  }
  return found;
}

void EvidencePool::append(EvidenceRecord record) {
  merged_ = merge_contexts(merged_, record.refined_context);
  records_.push_back(std::move(record));
}

bool EvidencePool::contains_subquery(std::string_view id) const {
  return std::any_of(records_.begin(), records_.end(), [&](const EvidenceRecord& r) { return r.sub_query.id == id; });
}

}  // namespace graphsearch
