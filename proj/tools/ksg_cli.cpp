// Command-line front end. Talks to the library only through ksg.h.
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "ksg/ksg.h"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

// Config keys holding file system paths; relative values resolve against the
// directory of the config file, or the working directory for flags.
const std::vector<std::string> kPathKeys{"corpus",          "column_mapping", "reading", "reading_summary",
                                         "reading_prompts", "stub_script",    "store",   "prompts_dir"};

class Owned {
public:
  ~Owned() { ksg_string_free(ptr); }
  char** out() { return &ptr; }
  std::string str() const { return ptr ? ptr : ""; }

private:
  char* ptr = nullptr;
};

int report(ksg_status status)
{
  std::cerr << "error [" << ksg_status_name(status) << "]: " << ksg_last_error() << "\n";
  return status == KSG_E_INVALID_ARGUMENT ? kExitUsage : kExitFailure;
}

std::string absolute(const std::string& p)
{
  return fs::absolute(p).lexically_normal().string();
}

json load_config(const std::string& path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read config " + path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw std::runtime_error("config " + path + ": " + e.what());
  }
  if (!doc.is_object()) throw std::runtime_error("config " + path + ": expected a JSON object");
  const auto base = fs::absolute(path).parent_path();
  for (const auto& key : kPathKeys) {
    if (doc.contains(key) && doc[key].is_string()) {
      fs::path p = doc[key].get<std::string>();
      if (p.is_relative()) doc[key] = (base / p).lexically_normal().string();
    }
  }
  return doc;
}

struct ConfigFlags {
  std::string config;
  std::string corpus, corpus_format, mapping, reading, summary, prompts;
  std::string backend, models, scheme, stage1_prompt, context_mode, stub_script, replay, prompts_dir;
  std::optional<std::size_t> parallelism, min_nodes, max_nodes;

  void add(CLI::App* cmd, bool pipeline_flags)
  {
    cmd->add_option("--config", config, "JSON pipeline configuration");
    cmd->add_option("--corpus", corpus, "Annotation file (.json or .csv)");
    cmd->add_option("--corpus-format", corpus_format, "json or csv")->check(CLI::IsMember({"json", "csv"}));
    cmd->add_option("--mapping", mapping, "Column mapping file");
    cmd->add_option("--reading", reading, "Reading full text");
    cmd->add_option("--summary", summary, "Reading summary");
    cmd->add_option("--prompts", prompts, "Instructor prompts, one per line");
    cmd->add_option("--context-mode", context_mode, "Stage-2 context")
        ->check(CLI::IsMember({"abstract", "summary", "fulltext", "summary_instructor"}));
    if (!pipeline_flags) return;
    cmd->add_option("--backend", backend, "live, replay or stub")->check(CLI::IsMember({"live", "replay", "stub"}));
    cmd->add_option("--models", models, "Comma-separated model ids; the first one builds the graph");
    cmd->add_option("--scheme", scheme, "Stage-3 relation scheme (p_base, p1, p2, p3)");
    cmd->add_option("--stage1-prompt", stage1_prompt, "Stage-1 template version")
        ->check(CLI::IsMember({"p_base", "p1", "p2"}));
    cmd->add_option("--stub-script", stub_script, "Rule file for the stub backend");
    cmd->add_option("--replay", replay, "Replay the model records of this run");
    cmd->add_option("--prompts-dir", prompts_dir, "Directory overriding prompt templates and schemes");
    cmd->add_option("--parallelism", parallelism, "Concurrent model requests")->check(CLI::PositiveNumber);
    cmd->add_option("--min-nodes", min_nodes, "Fewest synthesis nodes accepted");
    cmd->add_option("--max-nodes", max_nodes, "Most synthesis nodes accepted");
  }

  json build(const std::string& store, bool store_given) const
  {
    json doc = config.empty() ? json::object() : load_config(config);
    auto set_path = [&](const char* key, const std::string& v) {
      if (!v.empty()) doc[key] = absolute(v);
    };
    auto set = [&](const char* key, const std::string& v) {
      if (!v.empty()) doc[key] = v;
    };
    set_path("corpus", corpus);
    set("corpus_format", corpus_format);
    set_path("column_mapping", mapping);
    set_path("reading", reading);
    set_path("reading_summary", summary);
    set_path("reading_prompts", prompts);
    set("context_mode", context_mode);
    set("backend", backend);
    set("models", models);
    set("scheme", scheme);
    set("stage1_prompt", stage1_prompt);
    set_path("stub_script", stub_script);
    set_path("prompts_dir", prompts_dir);
    if (!replay.empty()) {
      doc["backend"] = "replay";
      doc["replay_run"] = replay;
    }
    if (parallelism) doc["parallelism"] = *parallelism;
    if (min_nodes) doc["min_nodes"] = *min_nodes;
    if (max_nodes) doc["max_nodes"] = *max_nodes;
    if (store_given || !doc.contains("store")) doc["store"] = absolute(store);
    return doc;
  }
};

std::string store_root(const std::string& flag, const std::string& config)
{
  if (!flag.empty() || config.empty()) return flag.empty() ? "." : flag;
  const auto doc = load_config(config);
  return doc.contains("store") && doc["store"].is_string() ? doc["store"].get<std::string>() : ".";
}

void print_summary(const json& s)
{
  std::cout << "run " << s.at("run_id").get<std::string>() << "\n";
  if (s.at("lineage_run_id") != s.at("run_id")) std::cout << "replay of " << s["lineage_run_id"].get<std::string>() << "\n";
  std::cout << "annotations " << s["annotations"] << ": " << s["substantive"] << " substantive, "
            << s["non_substantive"] << " filtered, " << s["stage1_invalid"] << " invalid\n"
            << "synthesis nodes " << s["synthesis_nodes"] << "\n"
            << "relations " << s["linked"] << " linked, " << s["uncategorized"] << " uncategorized, "
            << s["stage3_invalid"] << " invalid\n"
            << "graph " << s["graph"].get<std::string>() << "\n";
}

void print_agreement(const json& r)
{
  std::cout << "items " << r["n_items"] << " (model " << r["model_id"].get<std::string>() << ", prompt "
            << r["prompt_version"].get<std::string>() << ")\n"
            << "kappa " << r["kappa"] << (r["degenerate_marginals"].get<bool>() ? " (degenerate marginals)" : "")
            << "\nmacro_f1 " << r["macro_f1"] << "\nweighted_f1 " << r["weighted_f1"] << "\n";
  for (const auto& [label, f1] : r["per_class_f1"].items()) std::cout << "  f1_" << label << " " << f1 << "\n";
  std::cout << "report " << r["report_csv"].get<std::string>() << "\n";
  if (r["n_gold_unknown"].get<std::size_t>() > 0) {
    std::cerr << "warning: " << r["n_gold_unknown"] << " gold codings name annotations not in the run; skipped\n";
  }
  if (r["n_uncovered"].get<std::size_t>() > 0) {
    std::cerr << "warning: " << r["n_uncovered"] << " annotations in the run have no gold coding; skipped\n";
  }
}

void print_consistency(const json& r)
{
  std::cout << "scheme " << r["scheme_id"].get<std::string>() << ", items " << r["n_items"] << "\n"
            << "linking_consistency " << r["linking_consistency"] << "\n";
  for (const auto& m : r["model_ids"]) {
    std::cout << "  execution_rate " << m.get<std::string>() << " " << r["execution_rate_per_model"][m.get<std::string>()]
              << "\n";
  }
  std::cout << "report " << r["report_csv"].get<std::string>() << "\n";
}

bool write_output(const std::string& path, const std::string& data)
{
  if (path.empty() || path == "-") {
    std::cout << data;
    return true;
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  return static_cast<bool>(out);
}

}  // namespace

int main(int argc, char** argv)
{
  CLI::App app{"Build and evaluate knowledge synthesis graphs from social annotations"};
  app.set_version_flag("--version", std::string(ksg_version()));
  app.require_subcommand(1);

  std::string store;
  bool as_json = false;
  app.add_option("--store", store, "Run store root (default: config 'store' or the working directory)");
  app.add_flag("--json", as_json, "Print machine-readable JSON");

  ConfigFlags ingest_flags;
  std::string ingest_gold;
  auto* ingest = app.add_subcommand("ingest-check", "Validate corpus, reading and gold files without model calls");
  ingest_flags.add(ingest, false);
  ingest->add_option("--gold", ingest_gold, "Gold codings CSV");

  ConfigFlags pipeline_flags;
  auto* pipeline = app.add_subcommand("pipeline", "Run stages 1-3 and store the graph");
  pipeline_flags.add(pipeline, true);

  std::string eval_run, eval_gold;
  auto* eval = app.add_subcommand("eval", "Agreement of a run's stage-1 output with gold codings");
  eval->add_option("run_id", eval_run, "Run to evaluate")->required();
  eval->add_option("--gold", eval_gold, "Gold codings CSV")->required();

  std::vector<std::string> consistency_runs;
  auto* consistency = app.add_subcommand("consistency", "Execution rate and linking consistency across runs");
  consistency->add_option("run_ids", consistency_runs, "Two or more runs over the same corpus and nodes")->required();

  std::string export_run, export_format = "json", export_out;
  auto* exp = app.add_subcommand("export", "Write a run's graph as JSON, GraphML or DOT");
  exp->add_option("run_id", export_run, "Run to export")->required();
  exp->add_option("--format", export_format, "json, graphml or dot");
  exp->add_option("--out", export_out, "Output file (default: stdout)");

  std::string diff_a, diff_b;
  auto* diff = app.add_subcommand("diff", "Structured difference between two runs' graphs");
  diff->add_option("run_a", diff_a, "Base run")->required();
  diff->add_option("run_b", diff_b, "Compared run")->required();

  auto* runs = app.add_subcommand("runs", "Inspect the run store");
  runs->require_subcommand(1);
  auto* runs_list = runs->add_subcommand("list", "List stored runs");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    Owned out;
    if (ingest->parsed()) {
      const auto doc = ingest_flags.build(store_root(store, ingest_flags.config), !store.empty());
      const auto st = ksg_ingest_check(doc.dump().c_str(), ingest_gold.empty() ? nullptr : ingest_gold.c_str(), out.out());
      if (st != KSG_OK) return report(st);
      std::cout << out.str() << "\n";
      return 0;
    }
    if (pipeline->parsed()) {
      const auto doc = pipeline_flags.build(store_root(store, pipeline_flags.config), !store.empty());
      const auto st = ksg_pipeline_run(doc.dump().c_str(), out.out());
      if (st != KSG_OK) return report(st);
      if (as_json) std::cout << out.str() << "\n";
      else print_summary(json::parse(out.str()));
      return 0;
    }

    const auto root = store.empty() ? std::string(".") : store;
    if (eval->parsed()) {
      const auto st = ksg_eval_run(root.c_str(), eval_run.c_str(), eval_gold.c_str(), out.out());
      if (st != KSG_OK) return report(st);
      if (as_json) std::cout << out.str() << "\n";
      else print_agreement(json::parse(out.str()));
      return 0;
    }
    if (consistency->parsed()) {
      if (consistency_runs.size() < 2) {
        std::cerr << "usage: consistency needs at least two run ids\n";
        return kExitUsage;
      }
      std::vector<const char*> ids;
      for (const auto& r : consistency_runs) ids.push_back(r.c_str());
      const auto st = ksg_consistency(root.c_str(), ids.data(), ids.size(), out.out());
      if (st != KSG_OK) return report(st);
      if (as_json) std::cout << out.str() << "\n";
      else print_consistency(json::parse(out.str()));
      return 0;
    }
    if (exp->parsed()) {
      ksg_export_format fmt;
      if (export_format == "json") fmt = KSG_EXPORT_JSON;
      else if (export_format == "graphml") fmt = KSG_EXPORT_GRAPHML;
      else if (export_format == "dot") fmt = KSG_EXPORT_DOT;
      else {
        std::cerr << "usage: unknown export format '" << export_format << "' (expected json, graphml or dot)\n";
        return kExitUsage;
      }
      ksg_graph* graph = nullptr;
      auto st = ksg_graph_load_run(root.c_str(), export_run.c_str(), &graph);
      if (st != KSG_OK) return report(st);
      std::size_t size = 0;
      st = ksg_graph_export(graph, fmt, out.out(), &size);
      ksg_graph_free(graph);
      if (st != KSG_OK) return report(st);
      if (!write_output(export_out, out.str())) {
        std::cerr << "error: cannot write " << export_out << "\n";
        return kExitFailure;
      }
      return 0;
    }
    if (diff->parsed()) {
      ksg_graph* a = nullptr;
      ksg_graph* b = nullptr;
      auto st = ksg_graph_load_run(root.c_str(), diff_a.c_str(), &a);
      if (st != KSG_OK) return report(st);
      st = ksg_graph_load_run(root.c_str(), diff_b.c_str(), &b);
      if (st != KSG_OK) {
        ksg_graph_free(a);
        return report(st);
      }
      int empty = 0;
      st = ksg_graph_diff(a, b, out.out(), &empty);
      ksg_graph_free(a);
      ksg_graph_free(b);
      if (st != KSG_OK) return report(st);
      std::cout << out.str() << "\n";
      if (!as_json) std::cerr << (empty ? "graphs are identical\n" : "graphs differ\n");
      return 0;
    }
    if (runs_list->parsed()) {
      const auto st = ksg_runs_list(root.c_str(), out.out());
      if (st != KSG_OK) return report(st);
      if (as_json) {
        std::cout << out.str() << "\n";
      } else {
        for (const auto& r : json::parse(out.str())) {
          std::cout << r["run_id"].get<std::string>() << "  " << r["backend"].get<std::string>() << "  "
                    << r["scheme_id"].get<std::string>() << "  ";
          for (std::size_t i = 0; i < r["model_ids"].size(); ++i) {
            std::cout << (i ? "," : "") << r["model_ids"][i].get<std::string>();
          }
          if (r["replay_of"].is_string()) std::cout << "  replay of " << r["replay_of"].get<std::string>();
          std::cout << "\n";
        }
      }
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}
