#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "graphsearch/llm.hpp"
#include "graphsearch/pipeline.hpp"
#include "graphsearch/retrieval.hpp"
#include "graphsearch/trace.hpp"

namespace graphsearch {

/// 1 iff the normalized golden answer is a substring of the normalized
/// prediction. An empty golden answer never matches.
int sub_em(std::string_view prediction, std::string_view golden_answer);

/// Mean of 0/1 scores as a percentage rounded to two decimals. Throws
/// InvalidArgument for an empty set.
double aggregate_subem(std::span<const int> scores);

/// Fraction of golden evidence texts found (normalized substring) in any
/// chunk text or entity/relation description of `ctx`. Throws
/// InvalidArgument when `golden` is empty.
double evidence_recall(const RetrievedContext& ctx, std::span<const std::string> golden);

/// Recall of the merged evidence pool after each interaction step (one per
/// evidence record in the trace).
std::vector<double> recall_by_step(const SearchTrace& trace, std::span<const std::string> golden);

/// Appends a metrics event holding recall_by_step.
void attach_recall_metrics(SearchTrace& trace, std::span<const std::string> golden);

struct CriterionScores {
  std::vector<int> values;  // three per-criterion scores in [0, 10]
  double mean = 0.0;
};

/// Parses "a,b,c" with each value an integer in [0, 10].
std::optional<CriterionScores> parse_judge_scores(std::string_view response);

struct JudgeResult {
  std::optional<CriterionScores> answer;    // A-Score
  std::optional<CriterionScores> evidence;  // E-Score
  std::vector<std::string> flags;
};

/// Two judge calls (answer, evidence), each retried once on an invalid
/// response and left empty after that.
JudgeResult judge_scores(LlmClient& judge, const std::string& question, const std::string& prediction,
                         const std::string& golden_answer, std::span<const std::string> golden_evidence);

struct QAItem {
  std::string question;
  std::string golden_answer;
  std::vector<std::string> golden_evidence;
  nlohmann::json metadata = nlohmann::json::object();
};

/// Line-delimited {question, golden_answer, golden_evidence[], metadata}.
std::vector<QAItem> parse_dataset(std::string_view jsonl);
std::vector<QAItem> load_dataset(const std::filesystem::path& path);
/// Hex digest of the canonical serialization of the items.
std::string dataset_hash(std::span<const QAItem> items);

struct ItemResult {
  std::size_t index = 0;
  std::string question;
  std::string golden_answer;
  std::string prediction;
  int subem = 0;
  std::vector<double> recall_by_step;  // empty without golden evidence
  std::optional<CriterionScores> a_score;
  std::optional<CriterionScores> e_score;
  std::string verification;
  std::size_t llm_calls = 0;
  std::size_t retrieval_calls = 0;
  std::string trace_path;
  std::string error;  // non-empty when the item failed
  std::vector<std::string> flags;

  bool failed() const noexcept { return !error.empty(); }
};

struct RunSummary {
  std::string mode;  // label, e.g. "baseline" or "deepsearch"
  SearchConfig config;
  std::vector<ItemResult> items;

  std::size_t failures() const;
  double failure_rate() const;
  /// Failed items count as SubEM 0.
  double subem() const;
  std::optional<double> a_score() const;
  std::optional<double> e_score() const;
  /// Mean of the final recall-by-step value over items with golden evidence.
  std::optional<double> final_recall() const;
};

struct EvalReport {
  std::string dataset_hash;
  std::size_t dataset_size = 0;
  std::vector<RunSummary> runs;
  double max_failure_rate = 0.2;

  /// True when any run failed on more than max_failure_rate of its items.
  bool threshold_breached() const;
};

nlohmann::json to_json(const EvalReport& report);
/// Aggregate table: one row per run with SubEM, A-Score, E-Score, recall and
/// failures.
std::string render_report_table(const EvalReport& report);
/// Writes report.json and report.txt into `dir`.
void write_report(const EvalReport& report, const std::filesystem::path& dir);

struct BenchmarkMode {
  std::string label;
  SearchConfig config;
};

/// Creates the LLM (or judge) client for one item run; `run` is
/// "<mode>:<item index>" so scripted transcripts can scope responses.
using LlmFactory = std::function<std::unique_ptr<LlmClient>(const std::string& run)>;

struct BenchmarkOptions {
  std::vector<BenchmarkMode> modes;
  std::filesystem::path trace_dir;  // empty: traces are not written
  std::size_t parallelism = 1;
  double max_failure_rate = 0.2;
};

/// Runs every mode over every item. Items of one mode may run concurrently
/// up to `parallelism`; results keep input order. Per-item failures are
/// recorded and do not stop the run.
EvalReport run_benchmark(std::span<const QAItem> items, Retriever& retriever, const LlmFactory& llm,
                         const LlmFactory& judge, const BenchmarkOptions& options);

}  // namespace graphsearch
