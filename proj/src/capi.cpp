#include "ksg/ksg.h"

#include <cstdlib>
#include <cstring>
#include <new>

#include "ksg/corpus.hpp"
#include "ksg/error.hpp"
#include "ksg/graph.hpp"
#include "ksg/pipeline.hpp"

struct ksg_corpus {
  ksg::corpus::Corpus corpus;
};

struct ksg_graph {
  ksg::graph::KnowledgeSynthesisGraph graph;
};

namespace {

thread_local std::string last_error;

ksg_status status_of(ksg::ErrorCode code)
{
  return static_cast<ksg_status>(static_cast<int>(code));
}

ksg_status fail(ksg_status status, std::string message)
{
  last_error = std::move(message);
  return status;
}

template <typename Fn>
ksg_status guarded(Fn&& fn)
{
  try {
    last_error.clear();
    fn();
    return KSG_OK;
  } catch (const ksg::Error& e) {
    return fail(status_of(e.code()), e.what());
  } catch (const nlohmann::json::exception& e) {
    return fail(KSG_E_PARSE, e.what());
  } catch (const std::bad_alloc&) {
    return fail(KSG_E_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(KSG_E_INTERNAL, e.what());
  } catch (...) {
    return fail(KSG_E_INTERNAL, "unknown error");
  }
}

char* copy_string(std::string_view s)
{
  auto* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.data(), s.size());
  out[s.size()] = '\0';
  return out;
}

void require(const void* p, const char* name)
{
  if (!p) throw ksg::Error(ksg::ErrorCode::InvalidArgument, std::string(name) + " must not be NULL");
}

void emit(char** out, const nlohmann::json& doc)
{
  *out = copy_string(doc.dump(2));
}

}  // namespace

extern "C" {

const char* ksg_version(void)
{
  return KSG_VERSION;
}

const char* ksg_status_name(ksg_status status)
{
  if (status == KSG_OK) return "ok";
  if (status < KSG_E_INVALID_ARGUMENT || status > KSG_E_INTERNAL) return "unknown";
  static thread_local std::string name;
  name = std::string(ksg::to_string(static_cast<ksg::ErrorCode>(status)));
  return name.c_str();
}

const char* ksg_last_error(void)
{
  return last_error.c_str();
}

void ksg_string_free(char* str)
{
  std::free(str);
}

ksg_status ksg_corpus_load(const char* path, const char* format, const char* mapping_path, ksg_corpus** out)
{
  return guarded([&] {
    require(path, "path");
    require(format, "format");
    require(out, "out");
    const auto fmt = ksg::corpus::parse_format(format);
    if (!fmt) throw ksg::Error(ksg::ErrorCode::InvalidArgument, std::string("unknown corpus format '") + format + "'");
    std::optional<ksg::corpus::ColumnMapping> mapping;
    if (mapping_path) mapping = ksg::corpus::ColumnMapping::load(mapping_path);
    auto corpus = ksg::corpus::load_annotations(path, *fmt, mapping ? &*mapping : nullptr);
    *out = new ksg_corpus{std::move(corpus)};
  });
}

size_t ksg_corpus_size(const ksg_corpus* corpus)
{
  return corpus ? corpus->corpus.size() : 0;
}

ksg_status ksg_corpus_to_json(const ksg_corpus* corpus, char** out_json)
{
  return guarded([&] {
    require(corpus, "corpus");
    require(out_json, "out_json");
    *out_json = copy_string(ksg::corpus::to_canonical_json(corpus->corpus));
  });
}

void ksg_corpus_free(ksg_corpus* corpus)
{
  delete corpus;
}

ksg_status ksg_ingest_check(const char* config_json, const char* gold_path, char** out_json)
{
  return guarded([&] {
    require(config_json, "config_json");
    require(out_json, "out_json");
    const auto config = ksg::pipeline::PipelineConfig::from_json(nlohmann::json::parse(config_json));
    std::optional<std::filesystem::path> gold;
    if (gold_path) gold = gold_path;
    emit(out_json, ksg::pipeline::ingest_check(config, gold));
  });
}

ksg_status ksg_pipeline_run(const char* config_json, char** out_summary_json)
{
  return guarded([&] {
    require(config_json, "config_json");
    require(out_summary_json, "out_summary_json");
    const auto config = ksg::pipeline::PipelineConfig::from_json(nlohmann::json::parse(config_json));
    emit(out_summary_json, ksg::pipeline::run_pipeline(config).to_json());
  });
}

ksg_status ksg_eval_run(const char* store_root, const char* run_id, const char* gold_path, char** out_report_json)
{
  return guarded([&] {
    require(store_root, "store_root");
    require(run_id, "run_id");
    require(gold_path, "gold_path");
    require(out_report_json, "out_report_json");
    emit(out_report_json, ksg::pipeline::evaluate_run(store_root, run_id, gold_path));
  });
}

ksg_status ksg_consistency(const char* store_root, const char* const* run_ids, size_t run_count,
                           char** out_report_json)
{
  return guarded([&] {
    require(store_root, "store_root");
    require(out_report_json, "out_report_json");
    if (run_count > 0) require(run_ids, "run_ids");
    std::vector<std::string> ids;
    for (size_t i = 0; i < run_count; ++i) {
      require(run_ids[i], "run id");
      ids.emplace_back(run_ids[i]);
    }
    emit(out_report_json, ksg::pipeline::consistency(store_root, ids));
  });
}

ksg_status ksg_runs_list(const char* store_root, char** out_json)
{
  return guarded([&] {
    require(store_root, "store_root");
    require(out_json, "out_json");
    emit(out_json, ksg::pipeline::list_runs(store_root));
  });
}

ksg_status ksg_graph_load_run(const char* store_root, const char* run_id, ksg_graph** out)
{
  return guarded([&] {
    require(store_root, "store_root");
    require(run_id, "run_id");
    require(out, "out");
    *out = new ksg_graph{ksg::pipeline::load_run_graph(store_root, run_id)};
  });
}

ksg_status ksg_graph_import_json(const char* data, size_t size, ksg_graph** out)
{
  return guarded([&] {
    require(data, "data");
    require(out, "out");
    *out = new ksg_graph{ksg::graph::import_json(std::string_view(data, size))};
  });
}

ksg_status ksg_graph_validate(const ksg_graph* graph, size_t* out_count, char** out_json)
{
  return guarded([&] {
    require(graph, "graph");
    require(out_count, "out_count");
    const auto violations = ksg::graph::validate(graph->graph);
    *out_count = violations.size();
    if (out_json) *out_json = copy_string(ksg::graph::violations_to_json(violations));
  });
}

ksg_status ksg_graph_export(const ksg_graph* graph, ksg_export_format format, char** out_data, size_t* out_size)
{
  return guarded([&] {
    require(graph, "graph");
    require(out_data, "out_data");
    ksg::graph::ExportFormat fmt;
    switch (format) {
      case KSG_EXPORT_JSON: fmt = ksg::graph::ExportFormat::Json; break;
      case KSG_EXPORT_GRAPHML: fmt = ksg::graph::ExportFormat::GraphML; break;
      case KSG_EXPORT_DOT: fmt = ksg::graph::ExportFormat::Dot; break;
      default: throw ksg::Error(ksg::ErrorCode::InvalidArgument, "unknown export format");
    }
    const auto text = ksg::graph::export_graph(graph->graph, fmt);
    *out_data = copy_string(text);
    if (out_size) *out_size = text.size();
  });
}

ksg_status ksg_graph_diff(const ksg_graph* from, const ksg_graph* to, char** out_json, int* out_empty)
{
  return guarded([&] {
    require(from, "from");
    require(to, "to");
    require(out_json, "out_json");
    const auto delta = ksg::graph::diff(from->graph, to->graph);
    *out_json = copy_string(ksg::graph::delta_to_json(delta));
    if (out_empty) *out_empty = delta.empty() ? 1 : 0;
  });
}

void ksg_graph_free(ksg_graph* graph)
{
  delete graph;
}

}  // extern "C"
