#include "commands.hpp"

#include <fstream>

#include <CLI11.hpp>

#include "graphsearch/errors.hpp"
#include "graphsearch/eval.hpp"
#include "graphsearch/http.hpp"
#include "graphsearch/indexer.hpp"
#include "graphsearch/pipeline.hpp"
#include "graphsearch/trace.hpp"

namespace graphsearch::cli {

using nlohmann::json;

std::shared_ptr<EmbeddingProvider> make_embedder(const EmbedderSettings& settings) {
  if (settings.kind == EmbedderKind::hashing) return std::make_shared<HashingEmbedder>(settings.hashing_dimension);
  return std::make_shared<RemoteEmbedder>(settings.remote, make_http_transport());
}

LoadedIndex open_index(const AppConfig& config) {
  if (config.index_dir.empty()) throw ConfigError("index_dir is not set");
  LoadedIndex idx;
  idx.store = std::make_unique<LoadedKb>(load_kb(config.index_dir));
  idx.embedder = make_embedder(config.embedder);
  if (idx.store->manifest.embedder != idx.embedder->identity()) {
    throw ConfigError("index was built with embedder '" + idx.store->manifest.embedder + "' but config selects '" +
                      idx.embedder->identity() + "'");
  }
  idx.retriever = std::make_unique<GraphRetriever>(
      GraphRetriever::load(idx.store->kb, idx.embedder, config.retriever, config.index_dir));
  return idx;
}

int cmd_index(const AppConfig& config, std::ostream& out, std::ostream& err) {
  try {
    config.validate();
    if (config.index_dir.empty()) throw ConfigError("index_dir is not set");
    if (config.corpus_path.empty()) throw ConfigError("corpus path is not set");
    if (config.extractor == ExtractorKind::llm) validate_llm_config(config.llm, "llm");
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return exit_code::config;
  }

  std::vector<Document> corpus;
  try {
    corpus = load_corpus(config.corpus_path);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code::usage;
  }

  BuildConfig build;
  build.chunking.size_units = config.chunk_size_units;
  build.chunking.overlap_units = config.chunk_overlap_units;
  build.parallelism = config.index_parallelism;
  try {
    std::unique_ptr<LlmClient> llm;
    std::unique_ptr<Extractor> extractor;
    if (config.extractor == ExtractorKind::llm) {
      llm = make_llm_client(config.llm, "index");
      extractor = std::make_unique<LlmExtractor>(*llm);
      if (config.llm.backend == LlmBackend::scripted && build.parallelism > 1) {
        err << "note: scripted extraction runs with parallelism 1 so transcript order is deterministic\n";
        build.parallelism = 1;
      }
    } else {
      extractor = std::make_unique<RuleBasedExtractor>();
    }
    BuildResult result = build_index(corpus, build, *extractor);
    auto embedder = make_embedder(config.embedder);
    GraphRetriever retriever(result.kb, embedder, config.retriever);

    Manifest manifest;
    manifest.chunk_size_units = build.chunking.size_units;
    manifest.chunk_overlap_units = build.chunking.overlap_units;
    manifest.chunk_unit = build.chunking.unit_name;
    manifest.extractor = extractor->identity();
    manifest.embedder = embedder->identity();
    manifest.embedding_dimension = embedder->dimension();
    manifest.documents = result.documents;
    manifest.max_description_chars = result.kb.options().max_description_chars;
    save_kb(result.kb, config.index_dir, manifest);
    retriever.save_sidecars(config.index_dir);
    std::ofstream report(config.index_dir / "build_report.json", std::ios::binary | std::ios::trunc);
    report << to_json(result.report).dump(2) << "\n";

    out << "indexed " << result.report.documents << " documents into " << config.index_dir.string() << "\n"
        << "chunks: " << result.report.chunks << "\n"
        << "entities: " << result.report.entities << " (" << result.report.merged_entities << " merged)\n"
        << "relations: " << result.report.relations << " (" << result.report.dropped_relations << " dropped)\n"
        << "extraction failures: " << result.report.failures.size() << "\n";
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return exit_code::config;
  } catch (const BuildError& e) {
    err << "build error: " << e.what() << "\n";
    return exit_code::build;
  } catch (const std::exception& e) {
    err << "build error: " << e.what() << "\n";
    return exit_code::build;
  }
  return exit_code::ok;
}

namespace {

SearchConfig search_config_for(const AppConfig& config, const std::string& mode) {
  if (mode == "baseline") return SearchConfig::baseline(config.retriever.top_k);
  if (mode == "deepsearch") {
    SearchConfig c = config.search;
    c.budget.per_query_top_k = config.retriever.top_k;
    return c;
  }
  throw ConfigError("mode must be 'baseline' or 'deepsearch', got '" + mode + "'");
}

void save_trace(const SearchTrace& trace, const std::filesystem::path& path, std::ostream& err) {
  if (path.empty()) return;
  try {
    trace.save(path);
  } catch (const std::exception& e) {
    err << "warning: trace not written: " << e.what() << "\n";
  }
}

}  // namespace

int cmd_ask(const AppConfig& config, const std::string& question, const AskOptions& options, std::ostream& out,
            std::ostream& err) {
  SearchConfig search;
  try {
    config.validate();
    search = search_config_for(config, options.mode);
    validate_llm_config(config.llm, "llm");
    if (question.empty()) throw ConfigError("question must not be empty");
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return exit_code::config;
  }

  LoadedIndex index;
  std::unique_ptr<LlmClient> llm;
  try {
    index = open_index(config);
    llm = make_llm_client(config.llm, options.mode);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return exit_code::config;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return exit_code::usage;
  }

  try {
    DeepSearch engine(*index.retriever, *llm, search);
    SearchOutcome outcome = engine.run(question);
    save_trace(outcome.trace, options.trace_out, err);
    out << outcome.answer << "\n";
    err << "verification: " << outcome.verification << "; LLM calls: " << outcome.trace.llm_calls()
        << "; retrieval calls: " << outcome.trace.retrieval_calls() << "\n";
  } catch (const SearchAborted& e) {
    save_trace(e.trace(), options.trace_out, err);
    err << "engine error: " << e.what() << "\n";
    return exit_code::engine;
  } catch (const std::exception& e) {
    err << "engine error: " << e.what() << "\n";
    return exit_code::engine;
  }
  return exit_code::ok;
}

int cmd_eval(const AppConfig& config, const std::filesystem::path& dataset, const EvalOptions& options, std::ostream& out,
             std::ostream& err) {
  BenchmarkOptions bench;
  try {
    config.validate();
    validate_llm_config(config.llm, "llm");
    if (config.judge.enabled) validate_llm_config(config.judge.llm, "judge");
    if (options.modes != "deepsearch" && options.modes != "baseline" && options.modes != "both") {
      throw ConfigError("modes must be 'deepsearch', 'baseline' or 'both', got '" + options.modes + "'");
    }
    if (options.modes != "deepsearch") bench.modes.push_back({"baseline", search_config_for(config, "baseline")});
    if (options.modes != "baseline") {
      SearchConfig deep = search_config_for(config, "deepsearch");
      std::string label = "deepsearch";
      if (options.ablation) {
        deep.toggles = ModuleToggles::from_list(*options.ablation);
        deep.toggles.validate();
        if (deep.toggles != ModuleToggles::all_on()) label += "[" + deep.toggles.to_list() + "]";
      }
      bench.modes.push_back({label, deep});
    }
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return exit_code::config;
  }
  bench.parallelism = config.eval_parallelism;
  bench.trace_dir = options.write_traces ? options.out_dir / "traces" : std::filesystem::path{};

  std::vector<QAItem> items;
  LoadedIndex index;
  try {
    items = load_dataset(dataset);
    if (items.empty()) throw InvalidArgument("dataset " + dataset.string() + " has no items");
    index = open_index(config);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return exit_code::config;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return exit_code::usage;
  }

  const LlmFactory llm = [&](const std::string& run) { return make_llm_client(config.llm, run); };
  LlmFactory judge;
  if (config.judge.enabled) judge = [&](const std::string& run) { return make_llm_client(config.judge.llm, run); };

  EvalReport report;
  try {
    report = run_benchmark(items, *index.retriever, llm, judge, bench);
    write_report(report, options.out_dir);
  } catch (const std::exception& e) {
    err << "engine error: " << e.what() << "\n";
    return exit_code::engine;
  }
  out << render_report_table(report);
  out << "report written to " << (options.out_dir / "report.json").string() << "\n";
  for (const auto& run : report.runs) {
    for (const auto& item : run.items) {
      if (item.failed()) err << run.mode << " item " << item.index << " failed: " << item.error << "\n";
    }
  }
  if (report.threshold_breached()) {
    err << "failure rate above " << report.max_failure_rate * 100 << "%\n";
    return exit_code::threshold;
  }
  return exit_code::ok;
}

int cmd_trace_show(const std::filesystem::path& trace_path, std::ostream& out, std::ostream& err) {
  try {
    out << render_trace(SearchTrace::load(trace_path));
  } catch (const CorruptTrace& e) {
    err << "corrupt trace " << trace_path.string() << " at line " << e.offset() << ": " << e.what() << "\n";
    return exit_code::usage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return exit_code::usage;
  }
  return exit_code::ok;
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Agentic deep search over a graph knowledge base", "graphsearch"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::string index_dir;
  std::string corpus;
  std::string transcript;
  std::string llm_backend;
  std::string channel_mode;
  std::optional<std::size_t> top_k;
  std::optional<std::size_t> max_rounds;
  app.add_option("-c,--config", config_path, "JSON config file");
  app.add_option("--index-dir", index_dir, "Index directory (overrides config)");
  app.add_option("--transcript", transcript, "Scripted LLM transcript (overrides config)");
  app.add_option("--llm-backend", llm_backend, "remote or scripted (overrides config)");
  app.add_option("--top-k", top_k, "Retrieval top-k per query (overrides config)");
  app.add_option("--max-rounds", max_rounds, "Reflection rounds after the initial pass (overrides config)");
  app.add_option("--channel-mode", channel_mode, "dual, semantic, relational or hybrid (overrides config)");

  auto* index_cmd = app.add_subcommand("index", "Build an index directory from a corpus");
  index_cmd->add_option("--corpus", corpus, "Corpus JSONL (overrides config)");

  std::string question;
  AskOptions ask;
  auto* ask_cmd = app.add_subcommand("ask", "Answer one question");
  ask_cmd->add_option("question", question, "Question text")->required();
  ask_cmd->add_option("--mode", ask.mode, "deepsearch (default) or baseline");
  ask_cmd->add_option("--trace-out", ask.trace_out, "Write the run trace here");

  std::string dataset;
  EvalOptions eval;
  std::string ablation;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a QA dataset");
  eval_cmd->add_option("dataset", dataset, "Dataset JSONL")->required();
  eval_cmd->add_option("--modes", eval.modes, "deepsearch (default), baseline or both");
  auto* ablation_opt = eval_cmd->add_option("--ablation", ablation, "Enabled modules, e.g. qd,cr (or all / none)");
  eval_cmd->add_option("--out", eval.out_dir, "Report directory");
  eval_cmd->add_flag("!--no-traces", eval.write_traces, "Do not write per-item traces");

  std::string trace_path;
  auto* show_cmd = app.add_subcommand("trace-show", "Render a trace file");
  show_cmd->add_option("trace", trace_path, "Trace JSONL")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? exit_code::ok : exit_code::usage;
  }

  if (show_cmd->parsed()) return cmd_trace_show(trace_path, out, err);

  AppConfig config;
  try {
    if (!config_path.empty()) config = load_app_config(config_path);
    if (!index_dir.empty()) config.index_dir = index_dir;
    if (!corpus.empty()) config.corpus_path = corpus;
    if (!transcript.empty()) config.llm.transcript_path = transcript;
    if (!llm_backend.empty()) {
      if (llm_backend == "remote") config.llm.backend = LlmBackend::remote;
      else if (llm_backend == "scripted") config.llm.backend = LlmBackend::scripted;
      else throw ConfigError("--llm-backend must be 'remote' or 'scripted'");
    }
    if (top_k) config.retriever.top_k = *top_k;
    if (max_rounds) config.search.budget.max_rounds = *max_rounds;
    if (!channel_mode.empty()) config.search.channel_mode = channel_mode_from_string(channel_mode);
    config.search.budget.per_query_top_k = config.retriever.top_k;
    config.validate();
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return exit_code::config;
  }

  if (index_cmd->parsed()) return cmd_index(config, out, err);
  if (ask_cmd->parsed()) return cmd_ask(config, question, ask, out, err);
  if (ablation_opt->count() > 0) eval.ablation = ablation;
  return cmd_eval(config, dataset, eval, out, err);
}

}  // namespace graphsearch::cli
