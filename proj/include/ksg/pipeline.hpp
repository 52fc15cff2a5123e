#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "ksg/corpus.hpp"
#include "ksg/graph.hpp"
#include "ksg/prompts.hpp"
#include "ksg/stage2.hpp"

namespace ksg::pipeline {

struct PipelineConfig {
  std::filesystem::path corpus_path;
  std::optional<corpus::Format> corpus_format;  // inferred from the extension when unset
  std::optional<std::filesystem::path> column_mapping;
  std::filesystem::path reading_text;
  std::optional<std::filesystem::path> reading_summary;
  std::optional<std::filesystem::path> reading_prompts;

  prompts::PromptVersion stage1_version = prompts::PromptVersion::P2;
  stage2::ContextMode context_mode = stage2::ContextMode::SummaryPlusInstructor;
  std::size_t min_nodes = 4;
  std::size_t max_nodes = 10;
  std::size_t char_budget = stage2::kFullTextCharBudget;
  std::string scheme_id = "p3";

  /// Stage-3 models; the graph is built from the first. Stages 1 and 2 use
  /// `stage12_model`, defaulting to the first stage-3 model.
  std::vector<std::string> model_ids;
  std::optional<std::string> stage12_model;

  std::string backend = "stub";  // live | replay | stub
  std::optional<std::filesystem::path> stub_script;
  std::optional<std::string> replay_run;
  std::string api_base = "https://api.openai.com/v1";
  std::string api_key;  // never persisted

  std::size_t parallelism = 4;
  std::filesystem::path store_root = ".";
  std::optional<std::filesystem::path> prompts_dir;
  std::size_t depth_limit = corpus::kDefaultDepthLimit;
  double temperature = 0.0;
  std::optional<std::int64_t> seed;
  unsigned max_attempts = 3;
  std::int64_t backoff_ms = 1000;
  double requests_per_second = 0.0;

  /// Relative paths are resolved against `base_dir`. Unknown keys are an
  /// error. KSG_BACKEND, KSG_API_BASE and KSG_API_KEY fill fields the
  /// document leaves unset.
  static PipelineConfig from_json(const nlohmann::json& doc, const std::filesystem::path& base_dir = {});
  nlohmann::json to_json() const;

  const std::string& stage12_model_id() const;
};

/// Throws ksg::Error(Config) for unknown template versions, schemes, empty
/// model lists, parallelism 0 or missing backend inputs.
void check_config(const PipelineConfig& config, const prompts::PromptRegistry& registry);

struct PipelineSummary {
  std::string run_id;
  std::string lineage_run_id;
  std::size_t annotations = 0;
  std::size_t substantive = 0;
  std::size_t non_substantive = 0;
  std::size_t stage1_invalid = 0;
  std::size_t synthesis_nodes = 0;
  std::size_t linked = 0;
  std::size_t uncategorized = 0;
  std::size_t stage3_invalid = 0;
  std::filesystem::path graph_path;

  nlohmann::json to_json() const;
};

/// Stages 1 -> 2 -> 3, graph assembly and validation, with every artifact
/// written to a new run in the store. Stage-2 failure writes
/// stage2_failure.json and rethrows.
PipelineSummary run_pipeline(const PipelineConfig& config);

/// Loads and validates corpus, reading and (optionally) gold codings without
/// calling any model.
nlohmann::json ingest_check(const PipelineConfig& config, const std::optional<std::filesystem::path>& gold_path);

/// Agreement against gold codings; written to eval/agreement-<gold hash>.{json,csv}.
nlohmann::json evaluate_run(const std::filesystem::path& store_root, const std::string& run_id,
                            const std::filesystem::path& gold_path);

/// Cross-model consistency over >= 2 runs sharing micro-ideas and nodes;
/// written to the first run's eval/consistency-<hash>.{json,csv}.
nlohmann::json consistency(const std::filesystem::path& store_root, const std::vector<std::string>& run_ids);

graph::KnowledgeSynthesisGraph load_run_graph(const std::filesystem::path& store_root, const std::string& run_id);

nlohmann::json list_runs(const std::filesystem::path& store_root);

}  // namespace ksg::pipeline
