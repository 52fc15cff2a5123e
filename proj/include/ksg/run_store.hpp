#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "ksg/gateway.hpp"

namespace ksg::store {

struct RunManifest {
  std::string run_id;
  std::string created_at;
  std::string corpus_fingerprint;
  std::string reading_fingerprint;
  std::map<std::string, std::string> template_hashes;  // template id -> hash
  std::string scheme_id;
  std::vector<std::string> model_ids;
  std::string backend;
  std::string tool_version;
  /// Run whose model responses produced this run's outputs: the run itself
  /// for live and stub runs, the original recording for replays.
  std::string lineage_run_id;
  std::string lineage_created_at;
  std::optional<std::string> replay_of;
  nlohmann::json config = nlohmann::json::object();

  nlohmann::json to_json() const;
  static RunManifest from_json(const nlohmann::json& doc);
};

enum class RecordKind { ModelRecord, StageReport, Graph, EvalReport };

class RunStore;

/// Writable view of one run directory.
class RunHandle {
public:
  const std::string& run_id() const noexcept { return run_id_; }
  const std::filesystem::path& dir() const noexcept { return dir_; }

  /// Write-once, atomic. ModelRecord keys are fingerprints (stored under
  /// records/), EvalReport keys are file names under eval/, StageReport keys
  /// are file names in the run directory, Graph ignores the key and writes
  /// graph.json. Re-recording identical bytes is a no-op; different bytes
  /// throw ksg::Error(Immutable).
  std::filesystem::path record(RecordKind kind, std::string_view key, std::string_view payload) const;

  /// Recorder for ModelGateway: first record per fingerprint wins.
  gateway::ModelGateway::Recorder model_recorder() const;

private:
  friend class RunStore;
  RunHandle(std::string run_id, std::filesystem::path dir) : run_id_(std::move(run_id)), dir_(std::move(dir)) {}

  std::string run_id_;
  std::filesystem::path dir_;
};

/// Plain-directory store rooted at `root`; runs live in root/runs/<run_id>/.
class RunStore {
public:
  explicit RunStore(std::filesystem::path root);

  const std::filesystem::path& root() const noexcept { return root_; }

  /// Assigns a fresh run id (UTC timestamp + random suffix) unless the
  /// manifest already names an unused one, creates the directory skeleton and
  /// writes manifest.json before anything else.
  RunHandle open_run(RunManifest& manifest) const;

  /// Handle for appending to an existing run (eval reports).
  RunHandle attach(std::string_view run_id) const;

  bool exists(std::string_view run_id) const;
  std::vector<std::string> list_runs() const;
  RunManifest read_manifest(std::string_view run_id) const;
  std::filesystem::path run_dir(std::string_view run_id) const;
  std::string read_artifact(std::string_view run_id, const std::filesystem::path& relative) const;

  std::vector<gateway::RunRecord> model_records(std::string_view run_id) const;

  /// Replay backend over the run's model records. Throws ksg::Error(NotFound)
  /// for a missing run or one without records.
  std::shared_ptr<gateway::ReplayBackend> load_for_replay(std::string_view run_id) const;

private:
  std::filesystem::path root_;
};

/// Writes `payload` to `path` unless it exists. Identical existing content is
/// a no-op; different content throws ksg::Error(Immutable).
void write_once(const std::filesystem::path& path, std::string_view payload);

std::string read_file(const std::filesystem::path& path);

std::string new_run_id();

}  // namespace ksg::store
