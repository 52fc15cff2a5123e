#include "ksg/run_store.hpp"

#include <fstream>
#include <random>
#include <sstream>

#include "ksg/error.hpp"

namespace ksg::store {
namespace fs = std::filesystem;
namespace {

using nlohmann::json;

std::string random_hex(std::size_t digits)
{
  thread_local std::mt19937_64 rng{std::random_device{}()};
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  for (std::size_t i = 0; i < digits; ++i) out.push_back(kHex[rng() & 0xF]);
  return out;
}

void check_key(std::string_view key)
{
  if (key.empty() || key.find('/') != std::string_view::npos || key.find('\\') != std::string_view::npos ||
      key == "." || key == "..") {
    throw Error(ErrorCode::InvalidArgument, "invalid artifact key '" + std::string(key) + "'");
  }
}

bool valid_run_id(std::string_view id)
{
  if (id.empty() || id == "." || id == "..") return false;
  return id.find_first_of("/\\") == std::string_view::npos;
}

}  // namespace

json RunManifest::to_json() const
{
  json doc{{"run_id", run_id},
           {"created_at", created_at},
           {"corpus_fingerprint", corpus_fingerprint},
           {"reading_fingerprint", reading_fingerprint},
           {"template_hashes", template_hashes},
           {"scheme_id", scheme_id},
           {"model_ids", model_ids},
           {"backend", backend},
           {"tool_version", tool_version},
           {"lineage_run_id", lineage_run_id},
           {"lineage_created_at", lineage_created_at},
           {"replay_of", replay_of ? json(*replay_of) : json(nullptr)},
           {"config", config}};
  return doc;
}

RunManifest RunManifest::from_json(const json& doc)
{
  try {
    RunManifest m;
    m.run_id = doc.at("run_id").get<std::string>();
    m.created_at = doc.at("created_at").get<std::string>();
    m.corpus_fingerprint = doc.at("corpus_fingerprint").get<std::string>();
    m.reading_fingerprint = doc.at("reading_fingerprint").get<std::string>();
    m.template_hashes = doc.at("template_hashes").get<std::map<std::string, std::string>>();
    m.scheme_id = doc.at("scheme_id").get<std::string>();
    m.model_ids = doc.at("model_ids").get<std::vector<std::string>>();
    m.backend = doc.at("backend").get<std::string>();
    m.tool_version = doc.at("tool_version").get<std::string>();
    m.lineage_run_id = doc.value("lineage_run_id", m.run_id);
    m.lineage_created_at = doc.value("lineage_created_at", m.created_at);
    if (doc.contains("replay_of") && doc["replay_of"].is_string()) m.replay_of = doc["replay_of"].get<std::string>();
    m.config = doc.value("config", json::object());
    return m;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Parse, std::string("run manifest: ") + e.what());
  }
}

std::string new_run_id()
{
  const auto now = std::chrono::system_clock::now();
  const auto t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y%m%dT%H%M%SZ", &tm);
  return std::string(buf) + "-" + random_hex(8);
}

std::string read_file(const fs::path& path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_once(const fs::path& path, std::string_view payload)
{
  auto check_existing = [&] {
    if (read_file(path) != payload) throw Error(ErrorCode::Immutable, path.string() + " already holds different content");
  };
  std::error_code ec;
  if (fs::exists(path, ec)) return check_existing();

  const auto tmp = path.parent_path() / (".tmp-" + path.filename().string() + "-" + random_hex(12));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + tmp.string());
    out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
    out.flush();
    if (!out) {
      fs::remove(tmp, ec);
      throw Error(ErrorCode::Io, "cannot write " + tmp.string());
    }
  }
  // A hard link publishes the complete file atomically and, unlike rename,
  // never replaces a file that appeared in the meantime.
  fs::create_hard_link(tmp, path, ec);
  std::error_code ignored;
  fs::remove(tmp, ignored);
  if (!ec) return;
  if (fs::exists(path, ignored)) return check_existing();
  throw Error(ErrorCode::Io, "cannot create " + path.string() + ": " + ec.message());
}

fs::path RunHandle::record(RecordKind kind, std::string_view key, std::string_view payload) const
{
  fs::path path;
  switch (kind) {
    case RecordKind::ModelRecord:
      check_key(key);
      path = dir_ / "records" / (std::string(key) + ".json");
      break;
    case RecordKind::StageReport:
      check_key(key);
      if (key == "manifest.json" || key == "graph.json") {
        throw Error(ErrorCode::InvalidArgument, "'" + std::string(key) + "' is not a stage report name");
      }
      path = dir_ / std::string(key);
      break;
    case RecordKind::Graph: path = dir_ / "graph.json"; break;
    case RecordKind::EvalReport:
      check_key(key);
      path = dir_ / "eval" / std::string(key);
      break;
  }
  write_once(path, payload);
  return path;
}

gateway::ModelGateway::Recorder RunHandle::model_recorder() const
{
  const auto records = dir_ / "records";
  return [records](const gateway::RunRecord& r) {
    const auto path = records / (r.fingerprint + ".json");
    std::error_code ec;
    if (fs::exists(path, ec)) return;
    try {
      write_once(path, gateway::to_json(r).dump(2) + "\n");
    } catch (const Error& e) {
      if (e.code() != ErrorCode::Immutable) throw;
    }
  };
}

RunStore::RunStore(fs::path root) : root_(std::move(root)) {}

fs::path RunStore::run_dir(std::string_view run_id) const
{
  if (!valid_run_id(run_id)) throw Error(ErrorCode::InvalidArgument, "invalid run id '" + std::string(run_id) + "'");
  return root_ / "runs" / std::string(run_id);
}

RunHandle RunStore::open_run(RunManifest& manifest) const
{
  const auto runs = root_ / "runs";
  std::error_code ec;
  fs::create_directories(runs, ec);
  if (ec || !fs::is_directory(runs)) {
    throw Error(ErrorCode::Io, "cannot create run store at " + runs.string() + (ec ? ": " + ec.message() : ""));
  }

  std::string id = manifest.run_id.empty() ? new_run_id() : manifest.run_id;
  fs::path dir;
  for (int attempt = 0;; ++attempt) {
    dir = run_dir(id);
    if (fs::create_directory(dir, ec)) break;
    if (ec || attempt == 16) {
      throw Error(ErrorCode::Io, "cannot create run directory " + dir.string() + (ec ? ": " + ec.message() : ""));
    }
    id = new_run_id();
  }
  fs::create_directory(dir / "records", ec);
  if (!ec) fs::create_directory(dir / "eval", ec);
  if (ec) throw Error(ErrorCode::Io, "cannot create run skeleton in " + dir.string() + ": " + ec.message());

  manifest.run_id = id;
  if (manifest.created_at.empty()) manifest.created_at = gateway::utc_timestamp();
  if (manifest.lineage_run_id.empty()) {
    manifest.lineage_run_id = manifest.run_id;
    manifest.lineage_created_at = manifest.created_at;
  }
  write_once(dir / "manifest.json", manifest.to_json().dump(2) + "\n");
  return RunHandle(id, dir);
}

RunHandle RunStore::attach(std::string_view run_id) const
{
  if (!exists(run_id)) throw Error(ErrorCode::NotFound, "run '" + std::string(run_id) + "' not found");
  return RunHandle(std::string(run_id), run_dir(run_id));
}

bool RunStore::exists(std::string_view run_id) const
{
  if (!valid_run_id(run_id)) return false;
  std::error_code ec;
  return fs::is_regular_file(run_dir(run_id) / "manifest.json", ec);
}

std::vector<std::string> RunStore::list_runs() const
{
  std::vector<std::string> out;
  std::error_code ec;
  const auto runs = root_ / "runs";
  if (!fs::is_directory(runs, ec)) return out;
  for (const auto& entry : fs::directory_iterator(runs, ec)) {
    const auto name = entry.path().filename().string();
    if (exists(name)) out.push_back(name);
  }
  std::sort(out.begin(), out.end());
  return out;
}

RunManifest RunStore::read_manifest(std::string_view run_id) const
{
  if (!exists(run_id)) throw Error(ErrorCode::NotFound, "run '" + std::string(run_id) + "' not found");
  try {
    return RunManifest::from_json(json::parse(read_file(run_dir(run_id) / "manifest.json")));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Parse, "manifest of run '" + std::string(run_id) + "': " + e.what());
  }
}

std::string RunStore::read_artifact(std::string_view run_id, const fs::path& relative) const
{
  if (!exists(run_id)) throw Error(ErrorCode::NotFound, "run '" + std::string(run_id) + "' not found");
  const auto path = run_dir(run_id) / relative;
  std::error_code ec;
  if (!fs::is_regular_file(path, ec)) {
    throw Error(ErrorCode::NotFound, "run '" + std::string(run_id) + "' has no " + relative.generic_string());
  }
  return read_file(path);
}

std::vector<gateway::RunRecord> RunStore::model_records(std::string_view run_id) const
{
  if (!exists(run_id)) throw Error(ErrorCode::NotFound, "run '" + std::string(run_id) + "' not found");
  std::vector<fs::path> files;
  std::error_code ec;
  for (const auto& entry : fs::directory_iterator(run_dir(run_id) / "records", ec)) {
    if (entry.path().extension() == ".json" && !entry.path().filename().string().starts_with(".")) {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  std::vector<gateway::RunRecord> out;
  for (const auto& f : files) {
    try {
      out.push_back(gateway::record_from_json(json::parse(read_file(f))));
    } catch (const json::exception& e) {
      throw Error(ErrorCode::Parse, f.string() + ": " + e.what());
    }
  }
  return out;
}

std::shared_ptr<gateway::ReplayBackend> RunStore::load_for_replay(std::string_view run_id) const
{
  auto records = model_records(run_id);
  if (records.empty()) throw Error(ErrorCode::NotFound, "run '" + std::string(run_id) + "' has no model records");
  return std::make_shared<gateway::ReplayBackend>(std::move(records));
}

}  // namespace ksg::store
