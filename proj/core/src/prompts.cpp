#include "graphsearch/prompts.hpp"

#include <algorithm>
#include <array>
#include <cctype>

#include "graphsearch/errors.hpp"
#include "graphsearch/text.hpp"

namespace graphsearch {
namespace {

constexpr std::string_view kOpen = "{{";
constexpr std::string_view kClose = "}}";

std::vector<std::string> placeholders_in(std::string_view s) {
  std::vector<std::string> names;
  std::size_t pos = 0;
  while ((pos = s.find(kOpen, pos)) != std::string_view::npos) {
    const std::size_t end = s.find(kClose, pos + kOpen.size());
    if (end == std::string_view::npos) break;
    std::string name(s.substr(pos + kOpen.size(), end - pos - kOpen.size()));
    if (std::find(names.begin(), names.end(), name) == names.end()) names.push_back(std::move(name));
    pos = end + kClose.size();
  }
  return names;
}

PromptTemplate make(TemplateId id, std::string system, std::string body) {
  PromptTemplate t{id, std::move(system), std::move(body), {}};
  t.required_bindings = placeholders_in(t.system);
  for (auto& name : placeholders_in(t.body)) {
    if (std::find(t.required_bindings.begin(), t.required_bindings.end(), name) == t.required_bindings.end()) {
      t.required_bindings.push_back(std::move(name));
    }
  }
  return t;
}

std::string substitute(std::string_view tmpl, const Bindings& bindings) {
  std::string out;
  out.reserve(tmpl.size());
  std::size_t pos = 0;
  while (true) {
    const std::size_t open = tmpl.find(kOpen, pos);
    if (open == std::string_view::npos) break;
    const std::size_t close = tmpl.find(kClose, open + kOpen.size());
    if (close == std::string_view::npos) break;
    out.append(tmpl.substr(pos, open - pos));
    const auto name = tmpl.substr(open + kOpen.size(), close - open - kOpen.size());
    auto it = bindings.find(name);
    if (it == bindings.end()) throw InvalidArgument("missing prompt binding '" + std::string(name) + "'");
    out += it->second;
    pos = close + kClose.size();
  }
  out.append(tmpl.substr(pos));
  return out;
}

const std::string kAgentRole =
    "You are a careful research assistant that answers complex questions by searching a knowledge base "
    "built from documents. The knowledge base holds text chunks, entities and relations between entities.";

std::vector<PromptTemplate> build_registry() {
  std::vector<PromptTemplate> r;
  r.push_back(make(TemplateId::qd_semantic, kAgentRole,
                   "Break the question below into a short ordered list of atomic sub-questions for searching text "
                   "passages. Each sub-question must target exactly one fact. When a sub-question depends on the "
                   "answer of an earlier one, refer to that answer as Entity#n, where n is the number of the earlier "
                   "sub-question.\n\n"
                   "Question: {{question}}\n\n"
                   "Output format: a numbered list, one sub-question per line, nothing else.\n"
                   "1. <sub-question>\n2. <sub-question>"));
  r.push_back(make(TemplateId::qd_relational, kAgentRole,
                   "Rewrite the question below as an ordered chain of relational lookups over a knowledge graph. "
                   "Each lookup names a subject, a predicate and the object being sought. Use Entity#n for an "
                   "object that is only known once lookup n has been answered.\n\n"
                   "Question: {{question}}\n\n"
                   "Output format: a numbered list, one lookup per line, nothing else.\n"
                   "1. <subject> -- <predicate> --> <object or ?>"));
  r.push_back(make(TemplateId::context_refine, kAgentRole,
                   "Sub-question: {{query}}\n\n"
                   "Candidate evidence, each with an index in brackets:\n{{candidates}}\n\n"
                   "Keep only the candidates that help answer the sub-question and drop redundant or unrelated ones.\n"
                   "Output format: a single line listing the kept indices.\n"
                   "KEEP: <i>, <j>, ...\n"
                   "Write KEEP: none if nothing is useful."));
  r.push_back(make(TemplateId::query_ground, kAgentRole,
                   "Earlier sub-questions and their answers:\n{{history}}\n\n"
                   "Rewrite the following sub-question so that every reference of the form Entity#n is replaced by "
                   "the concrete answer it points to. Keep the meaning otherwise unchanged.\n\n"
                   "Sub-question: {{query}}\n\n"
                   "Output format: the rewritten sub-question on one line, nothing else."));
  r.push_back(make(TemplateId::subquery_answer, kAgentRole,
                   "Evidence:\n{{context}}\n\n"
                   "Using only the evidence above, answer the sub-question with a short phrase.\n\n"
                   "Sub-question: {{query}}\n\n"
                   "Output format: the answer on one line. Write UNKNOWN if the evidence is insufficient."));
  r.push_back(make(TemplateId::logic_draft, kAgentRole,
                   "Question: {{question}}\n\n"
                   "Collected sub-questions, answers and evidence:\n{{evidence}}\n\n"
                   "Assemble the answers into a step-by-step reasoning chain that leads from the question to its "
                   "answer. Cite the sub-question ids each step relies on. If a link in the chain is missing or two "
                   "answers contradict each other, say so.\n\n"
                   "Output format:\n"
                   "1. <claim> [refs: <id>, <id>]\n"
                   "2. <claim> [refs: <id>]\n"
                   "MISSING: <description of a missing link>   (one line per gap, omit when none)"));
  r.push_back(make(TemplateId::evidence_verify, kAgentRole,
                   "Question: {{question}}\n\n"
                   "Evidence:\n{{evidence}}\n\n"
                   "Reasoning draft:\n{{draft}}\n\n"
                   "Check whether the draft is fully supported by the evidence, internally coherent and free of "
                   "contradictions.\n\n"
                   "Output format: the first line is exactly ACCEPT or REJECT. After REJECT, list each missing or "
                   "inconsistent point on its own line starting with \"- \"."));
  r.push_back(make(TemplateId::query_expand, kAgentRole,
                   "Question: {{question}}\n\n"
                   "Evidence so far:\n{{evidence}}\n\n"
                   "Reasoning draft:\n{{draft}}\n\n"
                   "Missing points:\n{{missing}}\n\n"
                   "Write new search queries that target exactly the missing points. Tag each query with its channel: "
                   "S for a text-passage query, R for a relational graph lookup.\n\n"
                   "Output format: one query per line.\n"
                   "S: <text query>\n"
                   "R: <subject> -- <predicate> --> <object or ?>"));
  r.push_back(make(TemplateId::final_answer, kAgentRole,
                   "Question: {{question}}\n\n"
                   "Retrieved context:\n{{context}}\n\n"
                   "Intermediate answers:\n{{evidence}}\n\n"
                   "Reasoning draft:\n{{draft}}\n\n"
                   "Answer the question using the material above.\n"
                   "Output format: the final answer only, as short as possible."));
  r.push_back(make(TemplateId::extract,
                   "You extract entities and relations from text for a knowledge graph.",
                   "Text:\n{{text}}\n\n"
                   "List every named entity and every relation between two listed entities.\n"
                   "Output format, one record per line, fields separated by |, properties as key=value;key=value:\n"
                   "E|<name>|<properties>|<description>\n"
                   "R|<head name>|<tail name>|<properties>|<description>"));
  r.push_back(make(TemplateId::judge_answer, "You are a strict grader of question answering systems.",
                   "Question: {{question}}\n"
                   "Reference answer: {{golden_answer}}\n"
                   "Model response: {{prediction}}\n\n"
                   "Score the response from 0 to 10 on correctness, logical coherence and comprehensiveness, "
                   "using the reference answer as ground truth.\n"
                   "Output format: three integers separated by commas, in that order, nothing else."));
  r.push_back(make(TemplateId::judge_evidence, "You are a strict grader of question answering systems.",
                   "Question: {{question}}\n"
                   "Reference evidence:\n{{golden_evidence}}\n"
                   "Model response: {{prediction}}\n\n"
                   "Score from 0 to 10 how well the response is grounded in the reference evidence on relevance, "
                   "knowledgeability and factuality.\n"
                   "Output format: three integers separated by commas, in that order, nothing else."));
  return r;
}

bool is_bullet_prefix(std::string_view line, std::size_t& skip) {
  if (line.starts_with("- ") || line.starts_with("* ")) {
    skip = 2;
    return true;
  }
  if (line.starts_with("\xE2\x80\xA2")) {  // U+2022 bullet
    skip = 3;
    return true;
  }
  std::size_t i = 0;
  while (i < line.size() && std::isdigit(static_cast<unsigned char>(line[i]))) ++i;
  if (i == 0 || i > 3 || i >= line.size()) return false;
  if (line[i] != '.' && line[i] != ')') return false;
  if (i + 1 < line.size() && !std::isspace(static_cast<unsigned char>(line[i + 1]))) return false;
  skip = i + 1;
  return true;
}

}  // namespace

std::string_view to_string(Role role) {
  switch (role) {
    case Role::system: return "system";
    case Role::user: return "user";
    case Role::assistant: return "assistant";
  }
  return "user";
}

std::string_view to_string(TemplateId id) {
  switch (id) {
    case TemplateId::qd_semantic: return "qd_semantic";
    case TemplateId::qd_relational: return "qd_relational";
    case TemplateId::context_refine: return "context_refine";
    case TemplateId::query_ground: return "query_ground";
    case TemplateId::subquery_answer: return "subquery_answer";
    case TemplateId::logic_draft: return "logic_draft";
    case TemplateId::evidence_verify: return "evidence_verify";
    case TemplateId::query_expand: return "query_expand";
    case TemplateId::final_answer: return "final_answer";
    case TemplateId::extract: return "extract";
    case TemplateId::judge_answer: return "judge_answer";
    case TemplateId::judge_evidence: return "judge_evidence";
  }
  return "unknown";
}

std::optional<TemplateId> template_from_string(std::string_view name) {
  for (TemplateId id : kAllTemplates) {
    if (to_string(id) == name) return id;
  }
  return std::nullopt;
}

const PromptTemplate& prompt_template(TemplateId id) {
  static const std::vector<PromptTemplate> registry = build_registry();
  return registry[static_cast<std::size_t>(id)];
}

std::vector<ChatMessage> render_prompt(TemplateId id, const Bindings& bindings) {
  const PromptTemplate& t = prompt_template(id);
  for (const auto& name : t.required_bindings) {
    if (bindings.find(name) == bindings.end()) {
      throw InvalidArgument("missing prompt binding '" + name + "' for template " + std::string(to_string(id)));
    }
  }
  return {ChatMessage{Role::system, substitute(t.system, bindings)}, ChatMessage{Role::user, substitute(t.body, bindings)}};
}

std::optional<std::string_view> strip_list_marker(std::string_view line) {
  line = text::trim(line);
  std::size_t skip = 0;
  if (!is_bullet_prefix(line, skip)) return std::nullopt;
  return text::trim(line.substr(skip));
}

ListParse parse_list_response(std::string_view response) {
  ListParse out;
  bool in_list = false;
  for (std::string_view raw : text::split_lines(response)) {
    const std::string_view line = text::trim(raw);
    if (line.empty()) continue;
    if (auto item = strip_list_marker(line)) {
      in_list = true;
      if (!item->empty()) out.items.emplace_back(*item);
      continue;
    }
    if (in_list && !out.items.empty()) {
      out.items.back() += ' ';
      out.items.back() += line;
    }
  }
  if (!in_list) {
    const auto whole = text::trim(response);
    out.fallback = true;
    if (!whole.empty()) out.items.emplace_back(text::collapse_whitespace(whole));
  }
  return out;
}

}  // namespace graphsearch
