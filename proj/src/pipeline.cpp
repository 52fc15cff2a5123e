#include "ksg/pipeline.hpp"

#include <cstdlib>
#include <set>

#include "ksg/error.hpp"
#include "ksg/eval.hpp"
#include "ksg/gateway.hpp"
#include "ksg/hash.hpp"
#include "ksg/run_store.hpp"
#include "ksg/stage1.hpp"
#include "ksg/stage3.hpp"

namespace ksg::pipeline {
namespace fs = std::filesystem;
namespace {

using nlohmann::json;

Error config_error(const std::string& message)
{
  return Error(ErrorCode::Config, "config: " + message);
}

std::optional<std::string> env(const char* name)
{
  const char* v = std::getenv(name);
  if (!v || !*v) return std::nullopt;
  return std::string(v);
}

std::string dump(const json& doc)
{
  return doc.dump(2) + "\n";
}

prompts::PromptRegistry load_registry(const PipelineConfig& config)
{
  return config.prompts_dir ? prompts::PromptRegistry::load_directory(*config.prompts_dir)
                            : prompts::PromptRegistry::builtin();
}

corpus::Corpus load_corpus(const PipelineConfig& config)
{
  const auto format = config.corpus_format.value_or(
      to_lower(config.corpus_path.extension().string()) == ".csv" ? corpus::Format::Csv : corpus::Format::Json);
  if (config.column_mapping) {
    const auto mapping = corpus::ColumnMapping::load(*config.column_mapping);
    return corpus::load_annotations(config.corpus_path, format, &mapping);
  }
  return corpus::load_annotations(config.corpus_path, format);
}

corpus::Reading load_reading(const PipelineConfig& config)
{
  return corpus::load_reading(config.reading_text, config.reading_summary, config.reading_prompts);
}

prompts::PromptVersion stage3_version(const std::string& scheme_id)
{
  const auto v = prompts::parse_version(scheme_id);
  if (!v) throw config_error("scheme '" + scheme_id + "' has no matching stage-3 template version");
  return *v;
}

json read_json(const store::RunStore& store, const std::string& run_id, const fs::path& relative)
{
  try {
    return json::parse(store.read_artifact(run_id, relative));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Parse, "run '" + run_id + "', " + relative.generic_string() + ": " + e.what());
  }
}

std::string short_hash(std::string_view data)
{
  return sha256_hex(data).substr(0, 12);
}

}  // namespace

PipelineConfig PipelineConfig::from_json(const json& doc, const fs::path& base_dir)
{
  if (!doc.is_object()) throw config_error("expected a JSON object");
  PipelineConfig c;
  auto path = [&](const json& v, const std::string& key) {
    if (!v.is_string() || v.get<std::string>().empty()) throw config_error("'" + key + "' must be a non-empty path");
    fs::path p = v.get<std::string>();
    return p.is_relative() && !base_dir.empty() ? base_dir / p : p;
  };
  auto text = [&](const json& v, const std::string& key) {
    if (!v.is_string()) throw config_error("'" + key + "' must be a string");
    return v.get<std::string>();
  };
  auto count = [&](const json& v, const std::string& key) {
    if (!v.is_number_integer() || v.get<std::int64_t>() < 0) {
      throw config_error("'" + key + "' must be a non-negative integer");
    }
    return v.get<std::size_t>();
  };
  auto number = [&](const json& v, const std::string& key) {
    if (!v.is_number()) throw config_error("'" + key + "' must be a number");
    return v.get<double>();
  };

  bool backend_set = false;
  bool api_base_set = false;
  for (const auto& [key, v] : doc.items()) {
    if (key == "corpus") c.corpus_path = path(v, key);
    else if (key == "corpus_format") {
      c.corpus_format = corpus::parse_format(text(v, key));
      if (!c.corpus_format) throw config_error("unknown corpus_format '" + v.get<std::string>() + "'");
    } else if (key == "column_mapping") c.column_mapping = path(v, key);
    else if (key == "reading") c.reading_text = path(v, key);
    else if (key == "reading_summary") c.reading_summary = path(v, key);
    else if (key == "reading_prompts") c.reading_prompts = path(v, key);
    else if (key == "stage1_prompt") {
      const auto ver = prompts::parse_version(text(v, key));
      if (!ver) throw config_error("unknown stage1_prompt '" + v.get<std::string>() + "'");
      c.stage1_version = *ver;
    } else if (key == "context_mode") {
      const auto mode = stage2::parse_context_mode(text(v, key));
      if (!mode) throw config_error("unknown context_mode '" + v.get<std::string>() + "'");
      c.context_mode = *mode;
    } else if (key == "min_nodes") c.min_nodes = count(v, key);
    else if (key == "max_nodes") c.max_nodes = count(v, key);
    else if (key == "char_budget") c.char_budget = count(v, key);
    else if (key == "scheme") c.scheme_id = text(v, key);
    else if (key == "models") {
      if (v.is_string()) {
        c.model_ids.clear();
        std::string_view rest = v.get_ref<const std::string&>();
        while (!rest.empty()) {
          const auto comma = rest.find(',');
          const auto item = trim(rest.substr(0, comma));
          if (!item.empty()) c.model_ids.push_back(item);
          rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
        }
      } else if (v.is_array()) {
        for (const auto& m : v) c.model_ids.push_back(text(m, key));
      } else {
        throw config_error("'models' must be a list or a comma-separated string");
      }
    } else if (key == "stage12_model") c.stage12_model = text(v, key);
    else if (key == "backend") {
      c.backend = text(v, key);
      backend_set = true;
    } else if (key == "stub_script") c.stub_script = path(v, key);
    else if (key == "replay_run") c.replay_run = text(v, key);
    else if (key == "api_base") {
      c.api_base = text(v, key);
      api_base_set = true;
    } else if (key == "parallelism") c.parallelism = count(v, key);
    else if (key == "store") c.store_root = path(v, key);
    else if (key == "prompts_dir") c.prompts_dir = path(v, key);
    else if (key == "depth_limit") c.depth_limit = count(v, key);
    else if (key == "temperature") c.temperature = number(v, key);
    else if (key == "seed") {
      if (!v.is_null()) {
        if (!v.is_number_integer()) throw config_error("'seed' must be an integer");
        c.seed = v.get<std::int64_t>();
      }
    } else if (key == "max_attempts") c.max_attempts = static_cast<unsigned>(count(v, key));
    else if (key == "backoff_ms") c.backoff_ms = static_cast<std::int64_t>(count(v, key));
    else if (key == "requests_per_second") c.requests_per_second = number(v, key);
    else throw config_error("unknown key '" + key + "'");
  }
  if (!backend_set) {
    if (auto b = env("KSG_BACKEND")) c.backend = *b;
  }
  if (!api_base_set) {
    if (auto b = env("KSG_API_BASE")) c.api_base = *b;
  }
  if (auto k = env("KSG_API_KEY")) c.api_key = *k;
  return c;
}

json PipelineConfig::to_json() const
{
  auto opt_path = [](const std::optional<fs::path>& p) { return p ? json(p->generic_string()) : json(nullptr); };
  json doc{{"corpus", corpus_path.generic_string()},
           {"corpus_format", corpus_format ? json(*corpus_format == corpus::Format::Csv ? "csv" : "json") : json(nullptr)},
           {"column_mapping", opt_path(column_mapping)},
           {"reading", reading_text.generic_string()},
           {"reading_summary", opt_path(reading_summary)},
           {"reading_prompts", opt_path(reading_prompts)},
           {"stage1_prompt", std::string(prompts::to_string(stage1_version))},
           {"context_mode", std::string(stage2::to_string(context_mode))},
           {"min_nodes", min_nodes},
           {"max_nodes", max_nodes},
           {"char_budget", char_budget},
           {"scheme", scheme_id},
           {"models", model_ids},
           {"stage12_model", stage12_model ? json(*stage12_model) : json(nullptr)},
           {"backend", backend},
           {"stub_script", opt_path(stub_script)},
           {"replay_run", replay_run ? json(*replay_run) : json(nullptr)},
           {"api_base", api_base},
           {"parallelism", parallelism},
           {"store", store_root.generic_string()},
           {"prompts_dir", opt_path(prompts_dir)},
           {"depth_limit", depth_limit},
           {"temperature", temperature},
           {"seed", seed ? json(*seed) : json(nullptr)},
           {"max_attempts", max_attempts},
           {"backoff_ms", backoff_ms},
           {"requests_per_second", requests_per_second}};
  // Nulls mean "unset"; dropping them keeps the document loadable by from_json.
  for (auto it = doc.begin(); it != doc.end();) {
    if (it->is_null()) it = doc.erase(it);
    else ++it;
  }
  return doc;
}

const std::string& PipelineConfig::stage12_model_id() const
{
  if (stage12_model) return *stage12_model;
  if (model_ids.empty()) throw config_error("no model ids given");
  return model_ids.front();
}

void check_config(const PipelineConfig& config, const prompts::PromptRegistry& registry)
{
  if (config.corpus_path.empty()) throw config_error("'corpus' is required");
  if (config.reading_text.empty()) throw config_error("'reading' is required");
  if (config.model_ids.empty()) throw config_error("at least one model id is required");
  if (std::set<std::string>(config.model_ids.begin(), config.model_ids.end()).size() != config.model_ids.size()) {
    throw config_error("model ids must be distinct");
  }
  if (config.parallelism == 0) throw config_error("parallelism must be at least 1");
  if (config.min_nodes == 0 || config.max_nodes < config.min_nodes) {
    throw config_error("node bounds must satisfy 1 <= min_nodes <= max_nodes");
  }
  if (config.max_attempts == 0) throw config_error("max_attempts must be at least 1");
  if (config.requests_per_second < 0) throw config_error("requests_per_second must not be negative");

  if (!registry.find(1, config.stage1_version)) {
    throw config_error("no stage-1 template for version '" + std::string(prompts::to_string(config.stage1_version)) + "'");
  }
  if (config.stage1_version == prompts::PromptVersion::P3) throw config_error("version p3 applies to stage 3 only");
  if (!registry.find(2, prompts::PromptVersion::PBase)) throw config_error("no stage-2 template");
  const auto* scheme = registry.find_scheme(config.scheme_id);
  if (!scheme || scheme->stage != 3) throw config_error("unknown stage-3 scheme '" + config.scheme_id + "'");
  if (!registry.find(3, stage3_version(config.scheme_id))) {
    throw config_error("no stage-3 template for scheme '" + config.scheme_id + "'");
  }

  if (config.backend == "stub") {
    if (!config.stub_script) throw config_error("backend 'stub' needs 'stub_script'");
  } else if (config.backend == "replay") {
    if (!config.replay_run) throw config_error("backend 'replay' needs 'replay_run'");
  } else if (config.backend != "live") {
    throw config_error("unknown backend '" + config.backend + "' (expected live, replay or stub)");
  }
}

json PipelineSummary::to_json() const
{
  return {{"run_id", run_id},
          {"lineage_run_id", lineage_run_id},
          {"annotations", annotations},
          {"substantive", substantive},
          {"non_substantive", non_substantive},
          {"stage1_invalid", stage1_invalid},
          {"synthesis_nodes", synthesis_nodes},
          {"linked", linked},
          {"uncategorized", uncategorized},
          {"stage3_invalid", stage3_invalid},
          {"graph", graph_path.generic_string()}};
}

PipelineSummary run_pipeline(const PipelineConfig& config)
{
  const auto registry = load_registry(config);
  check_config(config, registry);
  const auto corpus = load_corpus(config);
  const auto reading = load_reading(config);
  if (corpus.empty()) throw Error(ErrorCode::Validation, "corpus has no annotations");
  const auto& scheme = registry.scheme(config.scheme_id);

  const store::RunStore store(config.store_root);
  std::shared_ptr<gateway::Backend> backend;
  store::RunManifest manifest;
  if (config.backend == "stub") {
    try {
      backend = gateway::StubBackend::from_script(json::parse(store::read_file(*config.stub_script)));
    } catch (const json::exception& e) {
      throw config_error("stub script " + config.stub_script->string() + ": " + e.what());
    }
  } else if (config.backend == "replay") {
    const auto source = store.read_manifest(*config.replay_run);
    backend = store.load_for_replay(*config.replay_run);
    manifest.lineage_run_id = source.lineage_run_id;
    manifest.lineage_created_at = source.lineage_created_at;
    manifest.replay_of = source.run_id;
  } else {
    gateway::HttpConfig http;
    http.api_base = config.api_base;
    http.api_key = config.api_key;
    backend = std::make_shared<gateway::LiveHttpBackend>(http);
  }

  const auto& stage12_model = config.stage12_model_id();
  const auto stage1_id = prompts::template_id(1, config.stage1_version);
  const auto stage2_id = prompts::template_id(2, prompts::PromptVersion::PBase);
  const auto stage3_id = prompts::template_id(3, stage3_version(config.scheme_id));

  manifest.corpus_fingerprint = corpus::fingerprint(corpus);
  manifest.reading_fingerprint = corpus::fingerprint(reading);
  for (const auto& id : {stage1_id, stage2_id, stage3_id}) manifest.template_hashes[id] = registry.get(id).content_hash;
  manifest.scheme_id = config.scheme_id;
  manifest.model_ids = config.model_ids;
  manifest.backend = config.backend;
  manifest.tool_version = KSG_VERSION;
  manifest.config = config.to_json();
  const auto run = store.open_run(manifest);
  const auto& lineage = manifest.lineage_run_id;

  gateway::GatewayOptions options;
  options.max_attempts = config.max_attempts;
  options.backoff_base = std::chrono::milliseconds(config.backoff_ms);
  options.requests_per_second = config.requests_per_second;
  gateway::ModelGateway gw(backend, options);
  gw.set_recorder(run.model_recorder());

  PipelineSummary summary;
  summary.run_id = run.run_id();
  summary.lineage_run_id = lineage;
  summary.annotations = corpus.size();

  stage1::Stage1Options s1;
  s1.version = config.stage1_version;
  s1.model_id = stage12_model;
  s1.parallelism = config.parallelism;
  s1.depth_limit = config.depth_limit;
  s1.temperature = config.temperature;
  s1.seed = config.seed;
  auto stage1_run = stage1::run_stage1(corpus, reading, registry, s1, gw);
  stage1_run.report.source_run_id = lineage;
  run.record(store::RecordKind::StageReport, "stage1_report.json", dump(stage1_run.report.to_json()));
  summary.substantive = stage1_run.report.substantive;
  summary.non_substantive = stage1_run.report.non_substantive;
  summary.stage1_invalid = stage1_run.report.invalid;
  const auto ideas = stage1::micro_ideas(stage1_run.outcomes);

  stage2::Stage2Options s2;
  s2.mode = config.context_mode;
  s2.min_nodes = config.min_nodes;
  s2.max_nodes = config.max_nodes;
  s2.char_budget = config.char_budget;
  s2.model_id = stage12_model;
  s2.temperature = config.temperature;
  s2.seed = config.seed;
  stage2::Stage2Result nodes;
  try {
    nodes = stage2::generate_nodes(reading, s2, registry, gw);
  } catch (const stage2::Stage2Failure& e) {
    run.record(store::RecordKind::StageReport, "stage2_failure.json",
               dump({{"error", e.what()}, {"raw_responses", e.raw_responses()}}));
    throw;
  } catch (const gateway::TransportError& e) {
    const std::string message = std::string("stage 2 request failed: ") + e.what();
    run.record(store::RecordKind::StageReport, "stage2_failure.json",
               dump({{"error", message}, {"raw_responses", json::array()}}));
    throw stage2::Stage2Failure(message, {});
  }
  run.record(store::RecordKind::StageReport, "synthesis_nodes.json",
             dump({{"source_run_id", lineage},
                   {"reading_id", reading.id},
                   {"context_mode", std::string(stage2::to_string(config.context_mode))},
                   {"template_hash", nodes.template_hash},
                   {"fingerprints", nodes.fingerprints},
                   {"nodes", stage2::nodes_to_json(nodes.nodes)}}));
  summary.synthesis_nodes = nodes.nodes.size();

  std::vector<stage3::Stage3Run> stage3_runs;
  for (const auto& model : config.model_ids) {
    stage3::Stage3Options s3;
    s3.model_id = model;
    s3.parallelism = config.parallelism;
    s3.temperature = config.temperature;
    s3.seed = config.seed;
    stage3_runs.push_back(stage3::run_stage3(ideas, nodes.nodes, scheme, registry, s3, gw));
  }
  run.record(store::RecordKind::StageReport, "stage3_outcomes.json",
             dump(stage3::outcomes_file(ideas, stage3_runs, lineage)));
  const auto& primary = stage3_runs.front();
  summary.linked = primary.report.linked;
  summary.uncategorized = primary.report.uncategorized;
  summary.stage3_invalid = primary.report.invalid;

  graph::GraphMetadata metadata;
  metadata.run_id = lineage;
  metadata.created_at = manifest.lineage_created_at;
  metadata.prompt_versions = {{"stage1", std::string(prompts::to_string(config.stage1_version))},
                              {"stage2", std::string(prompts::to_string(prompts::PromptVersion::PBase))},
                              {"stage3", config.scheme_id}};
  metadata.model_ids.push_back(stage12_model);
  for (const auto& m : config.model_ids) {
    if (m != stage12_model) metadata.model_ids.push_back(m);
  }
  const auto graph =
      stage3::assemble_graph(ideas, nodes.nodes, primary.outcomes, config.scheme_id, metadata, &registry.schemes());
  summary.graph_path = run.record(store::RecordKind::Graph, "",
                                  graph::export_graph(graph, graph::ExportFormat::Json, &registry.schemes()));
  return summary;
}

json ingest_check(const PipelineConfig& config, const std::optional<fs::path>& gold_path)
{
  if (config.corpus_path.empty()) throw config_error("'corpus' is required");
  const auto corpus = load_corpus(config);
  std::size_t replies = 0;
  std::set<std::string> documents;
  for (const auto& a : corpus.annotations()) {
    if (a.parent_id) ++replies;
    documents.insert(a.document_id);
  }
  json out{{"annotations", corpus.size()},
           {"replies", replies},
           {"documents", documents.size()},
           {"corpus_fingerprint", corpus::fingerprint(corpus)}};
  if (!config.reading_text.empty()) {
    const auto reading = load_reading(config);
    // Fails early when the configured context mode lacks the fields it needs.
    const auto context = stage2::build_stage2_context(reading, config.context_mode, config.char_budget);
    out["reading"] = {{"id", reading.id},
                      {"title", reading.title},
                      {"characters", reading.full_text.size()},
                      {"has_summary", reading.summary.has_value()},
                      {"instructor_prompts", reading.instructor_prompts.size()},
                      {"context_mode", std::string(stage2::to_string(config.context_mode))},
                      {"context_characters", context.size()},
                      {"fingerprint", corpus::fingerprint(reading)}};
  }
  if (gold_path) {
    const auto gold = corpus::load_gold(*gold_path);
    std::size_t filtered = 0;
    std::size_t unknown = 0;
    for (const auto& g : gold) {
      if (!g.label) ++filtered;
      if (!corpus.find(g.annotation_id)) ++unknown;
    }
    out["gold"] = {{"codings", gold.size()}, {"filtered", filtered}, {"unknown_ids", unknown}};
  }
  return out;
}

json evaluate_run(const fs::path& store_root, const std::string& run_id, const fs::path& gold_path)
{
  const store::RunStore store(store_root);
  const auto run = store.attach(run_id);
  const auto report = read_json(store, run_id, "stage1_report.json");
  const auto predictions = stage1::predictions_from_report(report);
  const auto gold_bytes = store::read_file(gold_path);
  const auto gold = corpus::parse_gold(gold_bytes);
  if (gold.empty()) throw Error(ErrorCode::Mismatch, "gold file " + gold_path.string() + " has no codings");

  auto template_id = report.value("template_id", std::string{});
  const auto version = template_id.substr(template_id.find('/') + 1);
  const auto agreement = eval::agreement_report(predictions, gold, version, report.value("model_id", std::string{}),
                                                report.value("source_run_id", std::string{}));
  const auto stem = "agreement-" + short_hash(gold_bytes);
  const auto json_path = run.record(store::RecordKind::EvalReport, stem + ".json", dump(agreement.to_json()));
  const auto csv_path = run.record(store::RecordKind::EvalReport, stem + ".csv", agreement.to_csv());
  auto out = agreement.to_json();
  out["run_id"] = run_id;
  out["report_json"] = json_path.generic_string();
  out["report_csv"] = csv_path.generic_string();
  return out;
}

json consistency(const fs::path& store_root, const std::vector<std::string>& run_ids)
{
  if (run_ids.size() < 2) throw Error(ErrorCode::InvalidArgument, "consistency needs at least two run ids");
  if (std::set<std::string>(run_ids.begin(), run_ids.end()).size() != run_ids.size()) {
    throw Error(ErrorCode::InvalidArgument, "run ids must be distinct");
  }
  const store::RunStore store(store_root);
  const auto first = store.read_manifest(run_ids.front());
  const auto first_nodes = read_json(store, run_ids.front(), "synthesis_nodes.json").at("nodes");

  std::vector<stage3::ModelOutcomes> models;
  std::set<std::string> seen;
  for (const auto& id : run_ids) {
    const auto manifest = store.read_manifest(id);
    auto differ = [&](const std::string& what) {
      return Error(ErrorCode::Mismatch, "runs '" + run_ids.front() + "' and '" + id + "' differ in " + what);
    };
    if (manifest.corpus_fingerprint != first.corpus_fingerprint) throw differ("corpus fingerprint");
    if (manifest.reading_fingerprint != first.reading_fingerprint) throw differ("reading fingerprint");
    if (read_json(store, id, "synthesis_nodes.json").at("nodes") != first_nodes) throw differ("synthesis nodes");
    for (auto& m : stage3::read_outcomes_file(read_json(store, id, "stage3_outcomes.json"))) {
      if (!seen.insert(m.model_id).second) m.model_id += "@" + id;
      seen.insert(m.model_id);
      models.push_back(std::move(m));
    }
  }
  const auto report = eval::consistency_report(models);

  std::string joined;
  for (const auto& id : run_ids) joined += id + "\n";
  const auto run = store.attach(run_ids.front());
  const auto stem = "consistency-" + short_hash(joined);
  const auto json_path = run.record(store::RecordKind::EvalReport, stem + ".json", dump(report.to_json()));
  const auto csv_path = run.record(store::RecordKind::EvalReport, stem + ".csv", report.to_csv());
  auto out = report.to_json();
  out["run_ids"] = run_ids;
  out["report_json"] = json_path.generic_string();
  out["report_csv"] = csv_path.generic_string();
  return out;
}

graph::KnowledgeSynthesisGraph load_run_graph(const fs::path& store_root, const std::string& run_id)
{
  const store::RunStore store(store_root);
  return graph::import_json(store.read_artifact(run_id, "graph.json"));
}

json list_runs(const fs::path& store_root)
{
  const store::RunStore store(store_root);
  json out = json::array();
  for (const auto& id : store.list_runs()) {
    const auto m = store.read_manifest(id);
    out.push_back({{"run_id", m.run_id},
                   {"created_at", m.created_at},
                   {"backend", m.backend},
                   {"scheme_id", m.scheme_id},
                   {"model_ids", m.model_ids},
                   {"replay_of", m.replay_of ? json(*m.replay_of) : json(nullptr)}});
  }
  return out;
}

}  // namespace ksg::pipeline
