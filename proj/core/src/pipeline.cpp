#include "graphsearch/pipeline.hpp"

#include <algorithm>
#include <cctype>
#include <numeric>
#include <set>
#include <sstream>

#include "graphsearch/text.hpp"

namespace graphsearch {

using nlohmann::json;

ModuleToggles ModuleToggles::from_list(std::string_view list) {
  ModuleToggles t = all_off();
  const std::string folded = text::case_fold(text::trim(list));
  if (folded == "all") return all_on();
  if (folded.empty() || folded == "none") return t;
  std::size_t start = 0;
  while (start <= folded.size()) {
    const auto comma = folded.find(',', start);
    const auto name = text::trim(std::string_view(folded).substr(start, comma == std::string::npos ? std::string::npos : comma - start));
    if (name == "qd") t.qd = true;
    else if (name == "cr") t.cr = true;
    else if (name == "qg") t.qg = true;
    else if (name == "ld") t.ld = true;
    else if (name == "ev") t.ev = true;
    else if (name == "qe") t.qe = true;
    else throw ConfigError("unknown module toggle '" + std::string(name) + "' (expected qd, cr, qg, ld, ev, qe)");
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return t;
}

std::string ModuleToggles::to_list() const {
  std::string out;
  const auto add = [&](bool on, const char* name) {
    if (!on) return;
    if (!out.empty()) out.push_back(',');
    out += name;
  };
  add(qd, "qd");
  add(cr, "cr");
  add(qg, "qg");
  add(ld, "ld");
  add(ev, "ev");
  add(qe, "qe");
  return out.empty() ? "none" : out;
}

void ModuleToggles::validate() const {
  if (qe && !ev) throw ConfigError("query expansion (qe) requires evidence verification (ev)");
  if (ev && !ld) throw ConfigError("evidence verification (ev) requires logic drafting (ld)");
  if (qg && !qd) throw ConfigError("query grounding (qg) requires query decomposition (qd)");
}

void SearchBudget::validate() const {
  if (max_subqueries_per_decomposition == 0) throw ConfigError("max_subqueries_per_decomposition must be positive");
  if (max_expansion_queries == 0) throw ConfigError("max_expansion_queries must be positive");
  if (per_query_top_k == 0) throw ConfigError("per_query_top_k must be positive");
}

std::string_view to_string(ChannelMode mode) {
  switch (mode) {
    case ChannelMode::dual: return "dual";
    case ChannelMode::semantic: return "semantic";
    case ChannelMode::relational: return "relational";
    case ChannelMode::hybrid: return "hybrid";
  }
  return "dual";
}

ChannelMode channel_mode_from_string(std::string_view name) {
  if (name == "dual") return ChannelMode::dual;
  if (name == "semantic") return ChannelMode::semantic;
  if (name == "relational") return ChannelMode::relational;
  if (name == "hybrid") return ChannelMode::hybrid;
  throw ConfigError("unknown channel mode '" + std::string(name) + "' (expected dual, semantic, relational, hybrid)");
}

void SearchConfig::validate() const {
  toggles.validate();
  budget.validate();
}

SearchConfig SearchConfig::baseline(std::size_t top_k) {
  SearchConfig c;
  c.toggles = ModuleToggles::all_off();
  c.channel_mode = ChannelMode::hybrid;
  c.budget.per_query_top_k = top_k;
  return c;
}

json to_json(const SearchConfig& c) {
  return json{{"toggles", c.toggles.to_list()},
              {"channel_mode", to_string(c.channel_mode)},
              {"budget",
               {{"max_rounds", c.budget.max_rounds},
                {"max_subqueries_per_decomposition", c.budget.max_subqueries_per_decomposition},
                {"max_expansion_queries", c.budget.max_expansion_queries},
                {"per_query_top_k", c.budget.per_query_top_k}}}};
}

SearchConfig search_config_from_json(const json& j) {
  SearchConfig c;
  try {
    if (j.contains("toggles")) c.toggles = ModuleToggles::from_list(j.at("toggles").get<std::string>());
    if (j.contains("channel_mode")) c.channel_mode = channel_mode_from_string(j.at("channel_mode").get<std::string>());
    if (j.contains("budget")) {
      const auto& b = j.at("budget");
      c.budget.max_rounds = b.value("max_rounds", c.budget.max_rounds);
      c.budget.max_subqueries_per_decomposition =
          b.value("max_subqueries_per_decomposition", c.budget.max_subqueries_per_decomposition);
      c.budget.max_expansion_queries = b.value("max_expansion_queries", c.budget.max_expansion_queries);
      c.budget.per_query_top_k = b.value("per_query_top_k", c.budget.per_query_top_k);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("search config: ") + e.what());
  }
  c.validate();
  return c;
}

std::string render_context(const RetrievedContext& ctx) {
  if (ctx.empty()) return "(no evidence)";
  std::ostringstream out;
  if (!ctx.entities.empty()) {
    out << "Entities:\n";
    for (const auto& e : ctx.entities) out << "- " << e.entity.name << ": " << e.entity.description << "\n";
  }
  if (!ctx.relations.empty()) {
    out << "Relations:\n";
    for (const auto& r : ctx.relations) {
      out << "- " << r.head_name << " -> " << r.tail_name << ": " << r.relation.description << "\n";
    }
  }
  if (!ctx.chunks.empty()) {
    out << "Passages:\n";
    for (const auto& c : ctx.chunks) out << "- (" << c.chunk.doc_id << "#" << c.chunk.ordinal << ") " << c.chunk.text << "\n";
  }
  std::string s = out.str();
  if (!s.empty() && s.back() == '\n') s.pop_back();
  return s;
}

std::string render_refine_candidates(const RetrievedContext& ctx) {
  std::ostringstream out;
  std::size_t i = 0;
  for (const auto& c : ctx.chunks) out << "[" << i++ << "] passage (" << c.chunk.doc_id << "#" << c.chunk.ordinal << "): " << c.chunk.text << "\n";
  for (const auto& e : ctx.entities) out << "[" << i++ << "] entity " << e.entity.name << ": " << e.entity.description << "\n";
  for (const auto& r : ctx.relations) {
    out << "[" << i++ << "] relation " << r.head_name << " -> " << r.tail_name << ": " << r.relation.description << "\n";
  }
  std::string s = out.str();
  if (!s.empty() && s.back() == '\n') s.pop_back();
  return s;
}

std::string render_records(const std::vector<EvidenceRecord>& records) {
  std::ostringstream out;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    if (i > 0) out << "\n\n";
    out << "[" << r.sub_query.id << "] (" << to_string(r.sub_query.channel) << ") " << r.sub_query.text << "\n";
    out << "answer: " << (r.intermediate_answer.empty() ? "(none)" : r.intermediate_answer) << "\n";
    out << render_context(r.refined_context);
  }
  return out.str();
}

std::string render_draft(const LogicDraft& draft) {
  std::ostringstream out;
  for (std::size_t i = 0; i < draft.steps.size(); ++i) {
    out << i + 1 << ". " << draft.steps[i].claim;
    if (!draft.steps[i].supporting.empty()) {
      out << " [refs: ";
      for (std::size_t k = 0; k < draft.steps[i].supporting.size(); ++k) out << (k ? ", " : "") << draft.steps[i].supporting[k];
      out << "]";
    }
    out << "\n";
  }
  for (const auto& g : draft.gaps) out << "MISSING: " << g << "\n";
  std::string s = out.str();
  if (!s.empty() && s.back() == '\n') s.pop_back();
  return s.empty() ? "(empty draft)" : s;
}

namespace {

std::vector<std::size_t> integers_in(std::string_view s) {
  std::vector<std::size_t> out;
  std::size_t i = 0;
  while (i < s.size()) {
    if (std::isdigit(static_cast<unsigned char>(s[i])) == 0) {
      ++i;
      continue;
    }
    std::size_t v = 0;
    while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i])) != 0) v = v * 10 + static_cast<std::size_t>(s[i++] - '0');
    out.push_back(v);
  }
  return out;
}

std::string first_line(std::string_view s) {
  for (auto line : text::split_lines(s)) {
    const auto t = text::trim(line);
    if (!t.empty()) return std::string(t);
  }
  return {};
}

// "[refs: s1, r2]" at the end of a claim.
std::pair<std::string, std::vector<std::string>> split_refs(std::string_view claim) {
  const std::string folded = text::case_fold(claim);
  const auto at = folded.rfind("[refs:");
  if (at == std::string::npos) return {std::string(text::trim(claim)), {}};
  const auto close = claim.find(']', at);
  const auto inner = claim.substr(at + 6, close == std::string_view::npos ? std::string_view::npos : close - at - 6);
  std::vector<std::string> refs;
  std::size_t start = 0;
  while (start <= inner.size()) {
    const auto comma = inner.find(',', start);
    const auto ref = text::trim(inner.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (!ref.empty()) refs.emplace_back(ref);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return {std::string(text::trim(claim.substr(0, at))), refs};
}

}  // namespace

std::optional<std::vector<std::size_t>> parse_keep_indices(std::string_view response) {
  for (auto line : text::split_lines(response)) {
    const auto t = text::trim(line);
    if (!text::starts_with_ci(t, "keep:")) continue;
    const auto rest = text::trim(t.substr(5));
    if (text::case_fold(rest) == "none") return std::vector<std::size_t>{};
    return integers_in(rest);
  }
  auto all = integers_in(response);
  if (all.empty()) return std::nullopt;
  return all;
}

std::optional<LogicDraft> parse_logic_draft(std::string_view response) {
  LogicDraft d;
  for (auto raw : text::split_lines(response)) {
    const auto line = text::trim(raw);
    if (line.empty()) continue;
    if (text::starts_with_ci(line, "missing:")) {
      const auto gap = text::trim(line.substr(8));
      if (!gap.empty() && text::case_fold(gap) != "none") d.gaps.emplace_back(gap);
      continue;
    }
    if (auto item = strip_list_marker(line)) {
      auto [claim, refs] = split_refs(text::trim(*item));
      if (!claim.empty()) d.steps.push_back(DraftStep{std::move(claim), std::move(refs)});
    }
  }
  if (d.steps.empty() && d.gaps.empty()) return std::nullopt;
  return d;
}

std::optional<VerificationDecision> parse_verification(std::string_view response) {
  const auto lines = text::split_lines(text::trim(response));
  if (lines.empty()) return std::nullopt;
  const auto head = text::trim(lines.front());
  VerificationDecision v;
  if (head == "ACCEPT") {
    v.verdict = Verdict::accept;
    return v;
  }
  if (head != "REJECT") return std::nullopt;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    auto line = text::trim(lines[i]);
    if (auto item = strip_list_marker(line)) line = text::trim(*item);
    if (!line.empty()) v.missing_points.emplace_back(line);
  }
  return v;
}

std::vector<std::pair<Channel, std::string>> parse_expansion(std::string_view response) {
  std::vector<std::pair<Channel, std::string>> out;
  for (auto raw : text::split_lines(response)) {
    auto line = text::trim(raw);
    if (auto item = strip_list_marker(line)) line = text::trim(*item);
    if (line.size() < 2 || line[1] != ':') continue;
    const char tag = static_cast<char>(std::toupper(static_cast<unsigned char>(line[0])));
    if (tag != 'S' && tag != 'R') continue;
    const auto q = text::trim(line.substr(2));
    if (!q.empty()) out.emplace_back(tag == 'S' ? Channel::semantic : Channel::relational, std::string(q));
  }
  return out;
}

DeepSearch::DeepSearch(Retriever& retriever, LlmClient& llm, SearchConfig config)
    : retriever_(retriever), llm_(llm), config_(config) {
  config_.validate();
}

std::string DeepSearch::call(TemplateId id, const Bindings& bindings) {
  const auto messages = render_prompt(id, bindings);
  const std::size_t ordinal = ++ordinals_[id];
  std::string response = llm_.complete(LlmRequest{id, messages});
  trace_.add(event::llm_call, round_,
             {{"template", to_string(id)}, {"ordinal", ordinal}, {"digest", prompt_digest(messages)}, {"response", response}});
  return response;
}

void DeepSearch::warn(std::string message) { trace_.add(event::warning, round_, {{"message", std::move(message)}}); }

RetrievalMode DeepSearch::route(Channel channel) const {
  switch (config_.channel_mode) {
    case ChannelMode::semantic: return RetrievalMode::semantic;
    case ChannelMode::relational: return RetrievalMode::relational;
    case ChannelMode::hybrid: return RetrievalMode::hybrid;
    case ChannelMode::dual: break;
  }
  switch (channel) {
    case Channel::semantic: return RetrievalMode::semantic;
    case Channel::relational: return RetrievalMode::relational;
    case Channel::hybrid: return RetrievalMode::hybrid;
  }
  return RetrievalMode::hybrid;
}

Decomposition DeepSearch::decompose(const std::string& question) {
  if (text::trim(question).empty()) throw InvalidArgument("question must not be empty");
  Decomposition d;
  const auto one = [&](TemplateId id, Channel channel, const char* prefix, std::vector<SubQuery>& out) {
    const auto parsed = parse_list_response(call(id, {{"question", question}}));
    auto items = parsed.items;
    if (parsed.fallback && !items.empty()) warn(std::string(to_string(id)) + ": response had no list markers; used as one sub-query");
    if (items.size() > config_.budget.max_subqueries_per_decomposition) {
      items.resize(config_.budget.max_subqueries_per_decomposition);
    }
    if (items.empty()) {
      warn(std::string(to_string(id)) + ": empty decomposition; using the question itself");
      d.fallback = true;
      items.push_back(question);
    }
    for (std::size_t i = 0; i < items.size(); ++i) {
      out.push_back(SubQuery{prefix + std::to_string(i + 1), items[i], channel, round_, find_placeholders(items[i]),
                             SubQueryStatus::pending});
    }
  };
  one(TemplateId::qd_semantic, Channel::semantic, "s", d.semantic);
  one(TemplateId::qd_relational, Channel::relational, "r", d.relational);
  trace_.add(event::decompose, round_, {{"semantic", d.semantic}, {"relational", d.relational}, {"fallback", d.fallback}});
  return d;
}

SubQuery DeepSearch::ground_query(SubQuery sq) {
  if (sq.status != SubQueryStatus::pending) throw InvalidArgument("sub-query " + sq.id + " is not pending");
  const std::string before = sq.text;
  std::vector<const EvidenceRecord*> history;
  for (const auto& r : pool_.records()) {
    if (!r.intermediate_answer.empty()) history.push_back(&r);
  }
  if (!config_.toggles.qg || sq.placeholders.empty() || history.empty()) {
    if (config_.toggles.qg && !sq.placeholders.empty()) {
      warn("sub-query " + sq.id + ": no earlier answers to resolve placeholders; left as is");
    }
    sq.placeholders.clear();
    sq.status = SubQueryStatus::grounded;
    return sq;
  }

  std::string hist;
  for (const auto* r : history) hist += "[" + r->sub_query.id + "] " + r->sub_query.text + " => " + r->intermediate_answer + "\n";
  if (!hist.empty()) hist.pop_back();

  std::string grounded;
  for (int attempt = 0; attempt < 2; ++attempt) {
    grounded = first_line(call(TemplateId::query_ground, {{"history", hist}, {"query", sq.text}}));
    if (!grounded.empty() && find_placeholders(grounded).empty()) break;
  }
  if (grounded.empty()) {
    warn("sub-query " + sq.id + ": grounding returned nothing; kept original text");
    grounded = sq.text;
  } else if (!find_placeholders(grounded).empty()) {
    warn("sub-query " + sq.id + ": placeholders remain after grounding retry; kept best effort");
  }
  sq.text = grounded;
  sq.placeholders.clear();
  sq.status = SubQueryStatus::grounded;
  trace_.add(event::ground, round_, {{"sub_query", sq.id}, {"before", before}, {"after", sq.text}});
  return sq;
}

RetrievedContext DeepSearch::retrieve_for(const SubQuery& sq) {
  if (sq.status == SubQueryStatus::pending) throw InvalidArgument("sub-query " + sq.id + " must be grounded before retrieval");
  const RetrievalMode mode = route(sq.channel);
  const std::size_t k = config_.budget.per_query_top_k;
  RetrievedContext ctx;
  try {
    ctx = retriever_.retrieve(sq.text, mode, k);
  } catch (const std::exception& e) {
    throw RetrievalError("sub-query " + sq.id + ": " + e.what());
  }
  trace_.add(event::retrieval, round_,
             {{"sub_query", sq.id},
              {"mode", to_string(mode)},
              {"k", k},
              {"entities", ctx.entities.size()},
              {"relations", ctx.relations.size()},
              {"chunks", ctx.chunks.size()}});
  return ctx;
}

RetrievedContext DeepSearch::refine_context(const SubQuery& sq, const RetrievedContext& raw) {
  if (!config_.toggles.cr || raw.empty()) return raw;
  const std::size_t n = raw.size();
  const auto parsed = parse_keep_indices(
      call(TemplateId::context_refine, {{"query", sq.text}, {"candidates", render_refine_candidates(raw)}}));

  std::set<std::size_t> keep;
  if (!parsed) warn("sub-query " + sq.id + ": refinement response had no indices");
  for (std::size_t i : parsed.value_or(std::vector<std::size_t>{})) {
    if (i < n) {
      keep.insert(i);
    } else {
      warn("sub-query " + sq.id + ": refinement index " + std::to_string(i) + " out of range (" + std::to_string(n) +
           " candidates)");
    }
  }

  // Candidate scores in candidate-index order: chunks, entities, relations.
  std::vector<double> scores;
  for (const auto& c : raw.chunks) scores.push_back(c.score);
  for (const auto& e : raw.entities) scores.push_back(e.score);
  for (const auto& r : raw.relations) scores.push_back(r.score);

  bool fallback = false;
  if (keep.empty()) {
    fallback = true;
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    order.resize(std::min<std::size_t>(5, n));
    keep.insert(order.begin(), order.end());
    warn("sub-query " + sq.id + ": empty keep-list; kept the top " + std::to_string(keep.size()) + " items by score");
  }

  RetrievedContext refined;
  std::size_t i = 0;
  for (const auto& c : raw.chunks) {
    if (keep.count(i++)) refined.chunks.push_back(c);
  }
  for (const auto& e : raw.entities) {
    if (keep.count(i++)) refined.entities.push_back(e);
  }
  for (const auto& r : raw.relations) {
    if (keep.count(i++)) refined.relations.push_back(r);
  }
  trace_.add(event::refine, round_,
             {{"sub_query", sq.id}, {"kept", std::vector<std::size_t>(keep.begin(), keep.end())}, {"fallback", fallback}});
  return refined;
}

std::string DeepSearch::answer_subquery(const SubQuery& sq, const RetrievedContext& refined) {
  if (!config_.toggles.qg) return {};
  if (sq.status != SubQueryStatus::grounded) throw InvalidArgument("sub-query " + sq.id + " must be grounded before answering");
  std::string answer = first_line(call(TemplateId::subquery_answer, {{"context", render_context(refined)}, {"query", sq.text}}));
  if (answer.empty()) {
    warn("sub-query " + sq.id + ": empty intermediate answer recorded as UNKNOWN");
    answer = "UNKNOWN";
  }
  return answer;
}

const EvidenceRecord& DeepSearch::process_subquery(SubQuery sq) {
  EvidenceRecord record;
  record.round = round_;
  record.sub_query = ground_query(std::move(sq));
  record.raw_context = retrieve_for(record.sub_query);
  record.refined_context = refine_context(record.sub_query, record.raw_context);
  record.intermediate_answer = answer_subquery(record.sub_query, record.refined_context);
  if (config_.toggles.qg) record.sub_query.status = SubQueryStatus::answered;
  trace_.add(event::record, round_, {{"record", record}});
  pool_.append(std::move(record));
  return pool_.records().back();
}

LogicDraft DeepSearch::draft_logic(const std::string& question) {
  if (pool_.empty()) throw InvalidArgument("logic drafting needs a non-empty evidence pool");
  const std::string response =
      call(TemplateId::logic_draft, {{"question", question}, {"evidence", render_records(pool_.records())}});
  LogicDraft draft;
  if (auto parsed = parse_logic_draft(response)) {
    draft = std::move(*parsed);
    for (auto& step : draft.steps) {
      std::vector<std::string> known;
      for (auto& ref : step.supporting) {
        if (pool_.contains_subquery(ref)) {
          known.push_back(std::move(ref));
        } else {
          warn("draft cites unknown sub-query '" + ref + "'; dropped");
        }
      }
      step.supporting = std::move(known);
    }
  } else {
    warn("logic draft unparseable; wrapped raw text as a single step");
    draft.steps.push_back(DraftStep{std::string(text::trim(response)), {}});
  }
  trace_.add(event::draft, round_, {{"draft", draft}});
  return draft;
}

VerificationDecision DeepSearch::verify(const std::string& question, const LogicDraft& draft) {
  const Bindings bindings{{"question", question}, {"evidence", render_records(pool_.records())}, {"draft", render_draft(draft)}};
  std::optional<VerificationDecision> decision;
  for (int attempt = 0; attempt < 2 && !decision; ++attempt) {
    decision = parse_verification(call(TemplateId::evidence_verify, bindings));
    if (!decision && attempt == 0) warn("verification response violated the ACCEPT/REJECT grammar; retrying");
  }
  if (!decision) {
    warn("verification unparseable twice; treated as REJECT");
    decision = VerificationDecision{Verdict::reject, {"verification unparseable"}};
  }
  if (decision->verdict == Verdict::reject && decision->missing_points.empty()) {
    decision->missing_points = draft.gaps.empty() ? std::vector<std::string>{"unspecified"} : draft.gaps;
  }
  trace_.add(event::verdict, round_, {{"decision", *decision}});
  return *decision;
}

std::vector<SubQuery> DeepSearch::expand(const std::string& question, const LogicDraft& draft,
                                         const VerificationDecision& decision) {
  if (decision.verdict != Verdict::reject) throw InvalidArgument("query expansion requires a REJECT decision");
  std::string missing;
  for (const auto& p : decision.missing_points) missing += "- " + p + "\n";
  if (!missing.empty()) missing.pop_back();
  auto items = parse_expansion(call(TemplateId::query_expand, {{"question", question},
                                                               {"evidence", render_records(pool_.records())},
                                                               {"draft", render_draft(draft)},
                                                               {"missing", missing}}));
  if (items.size() > config_.budget.max_expansion_queries) items.resize(config_.budget.max_expansion_queries);
  std::vector<SubQuery> out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    out.push_back(SubQuery{"x" + std::to_string(round_) + "." + std::to_string(i + 1), items[i].second, items[i].first,
                           round_, find_placeholders(items[i].second), SubQueryStatus::pending});
  }
  trace_.add(event::expansion, round_, {{"queries", out}});
  if (out.empty()) warn("query expansion produced no queries; stopping reflection");
  return out;
}

std::string DeepSearch::generate_final_answer(const std::string& question, const std::optional<LogicDraft>& draft) {
  if (pool_.empty()) throw InvalidArgument("final answer needs a non-empty evidence pool");
  std::string answers;
  for (const auto& r : pool_.records()) {
    answers += "[" + r.sub_query.id + "] " + r.sub_query.text + " => " +
               (r.intermediate_answer.empty() ? "(none)" : r.intermediate_answer) + "\n";
  }
  answers.pop_back();
  const std::string response = call(TemplateId::final_answer, {{"question", question},
                                                                {"context", render_context(pool_.merged_context())},
                                                                {"evidence", answers},
                                                                {"draft", draft ? render_draft(*draft) : "(no draft)"}});
  return std::string(text::trim(response));
}

SearchOutcome DeepSearch::run(const std::string& question) {
  if (text::trim(question).empty()) throw InvalidArgument("question must not be empty");
  pool_ = {};
  trace_ = {};
  ordinals_.clear();
  round_ = 0;
  trace_.add(event::run_start, 0, {{"question", question}, {"config", to_json(config_)}, {"llm", llm_.identity()}});

  SearchOutcome outcome;
  try {
    std::vector<SubQuery> initial;
    if (config_.toggles.qd) {
      auto d = decompose(question);
      for (std::size_t i = 0; i < std::max(d.semantic.size(), d.relational.size()); ++i) {
        if (i < d.semantic.size()) initial.push_back(d.semantic[i]);
        if (i < d.relational.size()) initial.push_back(d.relational[i]);
      }
    } else {
      initial.push_back(SubQuery{"q1", question, Channel::hybrid, 0, find_placeholders(question), SubQueryStatus::pending});
    }
    for (auto& sq : initial) process_subquery(std::move(sq));

    std::optional<LogicDraft> draft;
    std::optional<VerificationDecision> decision;
    if (config_.toggles.ld) draft = draft_logic(question);
    if (config_.toggles.ev) decision = verify(question, *draft);
    while (decision && decision->verdict == Verdict::reject && config_.toggles.qe && round_ < config_.budget.max_rounds) {
      ++round_;
      auto queries = expand(question, *draft, *decision);
      if (queries.empty()) break;
      for (auto& sq : queries) process_subquery(std::move(sq));
      draft = draft_logic(question);
      decision = verify(question, *draft);
    }

    outcome.verification = !decision ? "not_run" : decision->verdict == Verdict::accept ? "accepted" : "unverified";
    outcome.answer = generate_final_answer(question, draft);
    outcome.draft = draft;
    trace_.add(event::final_answer, round_, {{"answer", outcome.answer}, {"verification", outcome.verification}});
    trace_.add(event::run_end, round_,
               {{"rounds", round_}, {"llm_calls", trace_.llm_calls()}, {"retrieval_calls", trace_.retrieval_calls()}});
  } catch (const std::exception& e) {
    trace_.add(event::error, round_, {{"message", e.what()}});
    throw SearchAborted(e.what(), trace_);
  }
  outcome.records = pool_.records();
  outcome.trace = trace_;
  return outcome;
}

}  // namespace graphsearch
