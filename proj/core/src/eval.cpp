#include "graphsearch/eval.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <thread>

#include "graphsearch/errors.hpp"
#include "graphsearch/text.hpp"

namespace graphsearch {

using nlohmann::json;

int sub_em(std::string_view prediction, std::string_view golden_answer) {
  const std::string gold = text::normalize_answer(golden_answer);
  if (gold.empty()) return 0;
  return text::normalize_answer(prediction).find(gold) != std::string::npos ? 1 : 0;
}

double aggregate_subem(std::span<const int> scores) {
  if (scores.empty()) throw InvalidArgument("cannot aggregate SubEM over an empty set");
  long sum = 0;
  for (int s : scores) sum += s;
  const double mean = static_cast<double>(sum) / static_cast<double>(scores.size());
  return std::round(mean * 10000.0) / 100.0;
}

double evidence_recall(const RetrievedContext& ctx, std::span<const std::string> golden) {
  if (golden.empty()) throw InvalidArgument("evidence recall needs at least one golden evidence text");
  std::vector<std::string> carriers;
  for (const auto& c : ctx.chunks) carriers.push_back(text::normalize_answer(c.chunk.text));
  for (const auto& e : ctx.entities) carriers.push_back(text::normalize_answer(e.entity.description));
  for (const auto& r : ctx.relations) carriers.push_back(text::normalize_answer(r.relation.description));
  std::size_t matched = 0;
  for (const auto& g : golden) {
    const std::string needle = text::normalize_answer(g);
    if (needle.empty()) continue;
    if (std::any_of(carriers.begin(), carriers.end(), [&](const std::string& c) { return c.find(needle) != std::string::npos; })) {
      ++matched;
    }
  }
  return static_cast<double>(matched) / static_cast<double>(golden.size());
}

std::vector<double> recall_by_step(const SearchTrace& trace, std::span<const std::string> golden) {
  if (golden.empty()) throw InvalidArgument("evidence recall needs at least one golden evidence text");
  std::vector<double> out;
  RetrievedContext merged;
  for (const auto& record : trace.records()) {
    merged = merge_contexts(merged, record.refined_context);
    out.push_back(evidence_recall(merged, golden));
  }
  return out;
}

void attach_recall_metrics(SearchTrace& trace, std::span<const std::string> golden) {
  trace.add(event::metrics, trace.rounds(), {{"recall_by_step", recall_by_step(trace, golden)}});
}

std::optional<CriterionScores> parse_judge_scores(std::string_view response) {
  std::string line;
  for (auto l : text::split_lines(response)) {
    if (!text::trim(l).empty()) {
      line = std::string(text::trim(l));
      break;
    }
  }
  CriterionScores s;
  std::size_t start = 0;
  while (start <= line.size()) {
    const auto comma = line.find(',', start);
    const auto field = text::trim(std::string_view(line).substr(start, comma == std::string::npos ? std::string::npos : comma - start));
    if (field.empty() || field.size() > 2 ||
        !std::all_of(field.begin(), field.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)) != 0; })) {
      return std::nullopt;
    }
    const int v = std::stoi(std::string(field));
    if (v > 10) return std::nullopt;
    s.values.push_back(v);
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  if (s.values.size() != 3) return std::nullopt;
  s.mean = (s.values[0] + s.values[1] + s.values[2]) / 3.0;
  return s;
}

JudgeResult judge_scores(LlmClient& judge, const std::string& question, const std::string& prediction,
                         const std::string& golden_answer, std::span<const std::string> golden_evidence) {
  JudgeResult result;
  std::string evidence;
  for (const auto& g : golden_evidence) evidence += "- " + g + "\n";
  if (evidence.empty()) evidence = "(none)";
  const auto ask = [&](TemplateId id, const Bindings& b, const char* name) -> std::optional<CriterionScores> {
    const auto messages = render_prompt(id, b);
    for (int attempt = 0; attempt < 2; ++attempt) {
      if (auto s = parse_judge_scores(judge.complete(LlmRequest{id, messages}))) return s;
    }
    result.flags.push_back(std::string(name) + " judge response invalid twice; score omitted");
    return std::nullopt;
  };
  result.answer = ask(TemplateId::judge_answer,
                      {{"question", question}, {"golden_answer", golden_answer}, {"prediction", prediction}}, "answer");
  result.evidence = ask(TemplateId::judge_evidence,
                        {{"question", question}, {"golden_evidence", evidence}, {"prediction", prediction}}, "evidence");
  return result;
}

std::vector<QAItem> parse_dataset(std::string_view jsonl) {
  std::vector<QAItem> items;
  std::size_t line_no = 0;
  for (auto line : text::split_lines(jsonl)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    const std::string where = "dataset line " + std::to_string(line_no);
    const auto j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw InvalidArgument(where + ": malformed JSON");
    QAItem item;
    try {
      item.question = j.at("question").get<std::string>();
      item.golden_answer = j.at("golden_answer").get<std::string>();
      if (j.contains("golden_evidence")) item.golden_evidence = j["golden_evidence"].get<std::vector<std::string>>();
      if (j.contains("metadata")) item.metadata = j["metadata"];
    } catch (const json::exception& e) {
      throw InvalidArgument(where + ": " + e.what());
    }
    if (text::trim(item.question).empty()) throw InvalidArgument(where + ": empty question");
    if (text::trim(item.golden_answer).empty()) throw InvalidArgument(where + ": empty golden_answer");
    items.push_back(std::move(item));
  }
  return items;
}

std::vector<QAItem> load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NotFound("cannot open dataset " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_dataset(ss.str());
}

std::string dataset_hash(std::span<const QAItem> items) {
  std::uint64_t h = text::fnv1a64("");
  for (const auto& item : items) {
    const json j{{"question", item.question},
                 {"golden_answer", item.golden_answer},
                 {"golden_evidence", item.golden_evidence},
                 {"metadata", item.metadata}};
    h = text::fnv1a64(j.dump() + "\n", h);
  }
  return text::hex64(h);
}

std::size_t RunSummary::failures() const {
  return static_cast<std::size_t>(std::count_if(items.begin(), items.end(), [](const ItemResult& r) { return r.failed(); }));
}

double RunSummary::failure_rate() const {
  return items.empty() ? 0.0 : static_cast<double>(failures()) / static_cast<double>(items.size());
}

double RunSummary::subem() const {
  std::vector<int> scores;
  for (const auto& r : items) scores.push_back(r.failed() ? 0 : r.subem);
  return aggregate_subem(scores);
}

namespace {

std::optional<double> mean_of(const std::vector<double>& v) {
  if (v.empty()) return std::nullopt;
  double sum = 0;
  for (double x : v) sum += x;
  return sum / static_cast<double>(v.size());
}

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json scores_json(const std::optional<CriterionScores>& s) {
  if (!s) return nullptr;
  return json{{"mean", s->mean}, {"criteria", s->values}};
}

std::string fmt(const std::optional<double>& v, int precision) {
  if (!v) return "-";
  std::ostringstream out;
  out << std::fixed << std::setprecision(precision) << *v;
  return out.str();
}

}  // namespace

std::optional<double> RunSummary::a_score() const {
  std::vector<double> v;
  for (const auto& r : items) {
    if (r.a_score) v.push_back(r.a_score->mean);
  }
  return mean_of(v);
}

std::optional<double> RunSummary::e_score() const {
  std::vector<double> v;
  for (const auto& r : items) {
    if (r.e_score) v.push_back(r.e_score->mean);
  }
  return mean_of(v);
}

std::optional<double> RunSummary::final_recall() const {
  std::vector<double> v;
  for (const auto& r : items) {
    if (!r.recall_by_step.empty()) v.push_back(r.recall_by_step.back());
  }
  return mean_of(v);
}

bool EvalReport::threshold_breached() const {
  return std::any_of(runs.begin(), runs.end(), [&](const RunSummary& r) { return r.failure_rate() > max_failure_rate; });
}

json to_json(const EvalReport& report) {
  json runs = json::array();
  for (const auto& run : report.runs) {
    json items = json::array();
    for (const auto& r : run.items) {
      items.push_back({{"index", r.index},
                       {"question", r.question},
                       {"golden_answer", r.golden_answer},
                       {"prediction", r.prediction},
                       {"subem", r.subem},
                       {"recall_by_step", r.recall_by_step},
                       {"a_score", scores_json(r.a_score)},
                       {"e_score", scores_json(r.e_score)},
                       {"verification", r.verification},
                       {"llm_calls", r.llm_calls},
                       {"retrieval_calls", r.retrieval_calls},
                       {"trace_path", r.trace_path},
                       {"error", r.error.empty() ? json(nullptr) : json(r.error)},
                       {"flags", r.flags}});
    }
    runs.push_back({{"mode", run.mode},
                    {"config", to_json(run.config)},
                    {"dataset_hash", report.dataset_hash},
                    {"aggregates",
                     {{"subem", run.items.empty() ? json(nullptr) : json(run.subem())},
                      {"a_score", optional_json(run.a_score())},
                      {"e_score", optional_json(run.e_score())},
                      {"final_recall", optional_json(run.final_recall())},
                      {"failures", run.failures()},
                      {"failure_rate", run.failure_rate()}}},
                    {"items", items}});
  }
  return json{{"dataset_hash", report.dataset_hash},
              {"dataset_size", report.dataset_size},
              {"max_failure_rate", report.max_failure_rate},
              {"threshold_breached", report.threshold_breached()},
              {"runs", runs}};
}

std::string render_report_table(const EvalReport& report) {
  std::ostringstream out;
  out << "dataset " << report.dataset_hash << " (" << report.dataset_size << " items)\n";
  out << std::left << std::setw(14) << "Mode" << std::right << std::setw(9) << "SubEM" << std::setw(9) << "A-Score"
      << std::setw(9) << "E-Score" << std::setw(9) << "Recall" << std::setw(10) << "Failures" << "\n";
  for (const auto& run : report.runs) {
    const std::optional<double> subem = run.items.empty() ? std::nullopt : std::optional<double>(run.subem());
    out << std::left << std::setw(14) << run.mode << std::right << std::setw(9) << fmt(subem, 2) << std::setw(9)
        << fmt(run.a_score(), 2) << std::setw(9) << fmt(run.e_score(), 2) << std::setw(9) << fmt(run.final_recall(), 3)
        << std::setw(10) << (std::to_string(run.failures()) + "/" + std::to_string(run.items.size())) << "\n";
  }
  return out.str();
}

void write_report(const EvalReport& report, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "report.json", std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + (dir / "report.json").string());
    out << to_json(report).dump(2) << "\n";
  }
  std::ofstream out(dir / "report.txt", std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + (dir / "report.txt").string());
  out << render_report_table(report);
}

namespace {

ItemResult evaluate_item(std::size_t index, const QAItem& item, const BenchmarkMode& mode, Retriever& retriever,
                         const LlmFactory& llm, const LlmFactory& judge, const std::filesystem::path& trace_dir) {
  ItemResult r;
  r.index = index;
  r.question = item.question;
  r.golden_answer = item.golden_answer;
  const std::string run = mode.label + ":" + std::to_string(index);
  SearchTrace trace;
  try {
    auto client = llm(run);
    DeepSearch engine(retriever, *client, mode.config);
    SearchOutcome outcome = engine.run(item.question);
    trace = std::move(outcome.trace);
    r.prediction = outcome.answer;
    r.verification = outcome.verification;
    r.subem = sub_em(r.prediction, item.golden_answer);
    if (!item.golden_evidence.empty()) {
      r.recall_by_step = recall_by_step(trace, item.golden_evidence);
      attach_recall_metrics(trace, item.golden_evidence);
    }
    r.flags = trace.warnings();
    if (judge) {
      auto judge_client = judge(run);
      auto j = judge_scores(*judge_client, item.question, r.prediction, item.golden_answer, item.golden_evidence);
      r.a_score = j.answer;
      r.e_score = j.evidence;
      r.flags.insert(r.flags.end(), j.flags.begin(), j.flags.end());
    }
  } catch (const SearchAborted& e) {
    trace = e.trace();
    r.error = e.what();
  } catch (const std::exception& e) {
    r.error = e.what();
  }
  r.llm_calls = trace.llm_calls();
  r.retrieval_calls = trace.retrieval_calls();
  if (!trace_dir.empty() && !trace.events().empty()) {
    const auto path = trace_dir / (mode.label + "_" + std::to_string(index) + ".jsonl");
    try {
      trace.save(path);
      r.trace_path = path.string();
    } catch (const std::exception& e) {
      r.flags.push_back(std::string("trace not written: ") + e.what());
    }
  }
  return r;
}

}  // namespace

EvalReport run_benchmark(std::span<const QAItem> items, Retriever& retriever, const LlmFactory& llm, const LlmFactory& judge,
                         const BenchmarkOptions& options) {
  if (items.empty()) throw InvalidArgument("benchmark dataset is empty");
  if (options.modes.empty()) throw InvalidArgument("benchmark needs at least one mode");
  if (!llm) throw InvalidArgument("benchmark needs an LLM factory");
  for (const auto& m : options.modes) m.config.validate();

  EvalReport report;
  report.dataset_hash = dataset_hash(items);
  report.dataset_size = items.size();
  report.max_failure_rate = options.max_failure_rate;
  for (const auto& mode : options.modes) {
    RunSummary summary{mode.label, mode.config, std::vector<ItemResult>(items.size())};
    std::atomic<std::size_t> next{0};
    const auto worker = [&] {
      for (std::size_t i = next++; i < items.size(); i = next++) {
        summary.items[i] = evaluate_item(i, items[i], mode, retriever, llm, judge, options.trace_dir);
      }
    };
    const std::size_t threads = std::clamp<std::size_t>(options.parallelism, 1, items.size());
    if (threads == 1) {
      worker();
    } else {
      std::vector<std::jthread> pool;
      for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    }
    report.runs.push_back(std::move(summary));
  }
  return report;
}

}  // namespace graphsearch
