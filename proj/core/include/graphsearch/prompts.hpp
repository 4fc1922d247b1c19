#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace graphsearch {

enum class Role { system, user, assistant };

std::string_view to_string(Role role);

struct ChatMessage {
  Role role = Role::user;
  std::string content;

  friend bool operator==(const ChatMessage&, const ChatMessage&) = default;
};

enum class TemplateId {
  qd_semantic,
  qd_relational,
  context_refine,
  query_ground,
  subquery_answer,
  logic_draft,
  evidence_verify,
  query_expand,
  final_answer,
  extract,
  judge_answer,
  judge_evidence,
};

inline constexpr TemplateId kAllTemplates[] = {
    TemplateId::qd_semantic,   TemplateId::qd_relational,   TemplateId::context_refine, TemplateId::query_ground,
    TemplateId::subquery_answer, TemplateId::logic_draft,   TemplateId::evidence_verify, TemplateId::query_expand,
    TemplateId::final_answer,  TemplateId::extract,         TemplateId::judge_answer,   TemplateId::judge_evidence,
};

std::string_view to_string(TemplateId id);
std::optional<TemplateId> template_from_string(std::string_view name);

/// A system instruction plus a user body with `{{name}}` placeholders.
/// `required_bindings` is derived from the body and the system text.
struct PromptTemplate {
  TemplateId id;
  std::string system;
  std::string body;
  std::vector<std::string> required_bindings;
};

const PromptTemplate& prompt_template(TemplateId id);

using Bindings = std::map<std::string, std::string, std::less<>>;

/// Single-pass substitution; bound values are never re-expanded. Throws
/// InvalidArgument naming the first missing placeholder.
std::vector<ChatMessage> render_prompt(TemplateId id, const Bindings& bindings);

struct ListParse {
  std::vector<std::string> items;
  bool fallback = false;  // no list markers: the whole text became one item
};

/// Splits numbered ("1." / "1)") or bulleted ("-", "*", "•") lines into
/// trimmed items. Prose before the first marker and blank lines are dropped;
/// unmarked lines after it continue the previous item.
ListParse parse_list_response(std::string_view text);

/// Strips a leading list marker, if any. Returns nullopt when absent.
std::optional<std::string_view> strip_list_marker(std::string_view line);

}  // namespace graphsearch
