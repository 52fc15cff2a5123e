#include <set>
#include <thread>

#include "doctest.h"
#include "ksg/error.hpp"
#include "ksg/run_store.hpp"
#include "test_support.hpp"

using namespace ksg;
using namespace ksg::store;
using ksg::test::TempDir;

namespace {

RunManifest manifest()
{
  RunManifest m;
  m.corpus_fingerprint = "c";
  m.reading_fingerprint = "r";
  m.scheme_id = "p3";
  m.model_ids = {"model-a"};
  m.backend = "stub";
  m.tool_version = "test";
  return m;
}

gateway::RunRecord record(const std::string& text)
{
  gateway::CompletionRequest req;
  req.model_id = "model-a";
  req.user_prompt = "hello";
  gateway::RunRecord r;
  r.request = req;
  r.fingerprint = gateway::fingerprint(req);
  r.outcome = gateway::CompletionResult{text, {}, 0, 1, std::nullopt};
  r.timestamp = "2026-01-01T00:00:00Z";
  return r;
}

std::optional<ErrorCode> code_of(const std::function<void()>& fn)
{
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return std::nullopt;
}

}  // namespace

TEST_CASE("a fresh root gets a run with its manifest first")
{
  TempDir tmp;
  const RunStore store(tmp / "store");
  auto m = manifest();
  const auto run = store.open_run(m);
  CHECK_FALSE(m.run_id.empty());
  CHECK(m.lineage_run_id == m.run_id);
  CHECK(std::filesystem::exists(run.dir() / "manifest.json"));
  CHECK(std::filesystem::is_directory(run.dir() / "records"));
  const auto back = store.read_manifest(run.run_id());
  CHECK(back.scheme_id == "p3");
  CHECK(back.to_json() == m.to_json());
  CHECK(store.list_runs() == std::vector<std::string>{run.run_id()});
}

TEST_CASE("concurrent opens get distinct ids")
{
  TempDir tmp;
  const RunStore store(tmp / "store");
  std::vector<std::string> ids(8);
  std::vector<std::thread> threads;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    threads.emplace_back([&, i] {
      auto m = manifest();
      ids[i] = store.open_run(m).run_id();
    });
  }
  for (auto& t : threads) t.join();
  CHECK(std::set<std::string>(ids.begin(), ids.end()).size() == ids.size());
  CHECK(store.list_runs().size() == ids.size());

  // A requested id that is already taken is replaced.
  auto again = manifest();
  again.run_id = ids[0];
  CHECK(store.open_run(again).run_id() != ids[0]);
}

TEST_CASE("unwritable root")
{
  TempDir tmp;
  test::write_text(tmp / "file", "x");
  const RunStore store(tmp / "file" / "store");
  auto m = manifest();
  CHECK(code_of([&] { store.open_run(m); }) == ErrorCode::Io);
}

TEST_CASE("records are write-once")
{
  TempDir tmp;
  const RunStore store(tmp / "store");
  auto m = manifest();
  const auto run = store.open_run(m);
  const auto path = run.record(RecordKind::Graph, "", "{}\n");
  CHECK(path.filename() == "graph.json");
  CHECK(run.record(RecordKind::Graph, "", "{}\n") == path);
  CHECK(code_of([&] { run.record(RecordKind::Graph, "", "{\"x\":1}\n"); }) == ErrorCode::Immutable);
  CHECK(store.read_artifact(run.run_id(), "graph.json") == "{}\n");

  run.record(RecordKind::EvalReport, "agreement.csv", "a,b\r\n");
  CHECK(std::filesystem::exists(run.dir() / "eval" / "agreement.csv"));
  run.record(RecordKind::StageReport, "stage1_report.json", "{}");
  CHECK(std::filesystem::exists(run.dir() / "stage1_report.json"));
  CHECK(code_of([&] { store.read_artifact(run.run_id(), "missing.json"); }) != std::nullopt);
}

TEST_CASE("model records: first wins and feed replay")
{
  TempDir tmp;
  const RunStore store(tmp / "store");
  auto m = manifest();
  const auto run = store.open_run(m);
  const auto recorder = run.model_recorder();
  recorder(record("first"));
  recorder(record("second"));
  const auto records = store.model_records(run.run_id());
  REQUIRE(records.size() == 1);
  CHECK(std::get<gateway::CompletionResult>(records[0].outcome).raw_text == "first");

  auto replay = store.load_for_replay(run.run_id());
  CHECK(replay->size() == 1);
  CHECK(replay->send(record("").request).raw_text == "first");
}

TEST_CASE("replay of a missing or empty run is NotFound")
{
  TempDir tmp;
  const RunStore store(tmp / "store");
  CHECK(code_of([&] { store.load_for_replay("nope"); }) == ErrorCode::NotFound);
  CHECK(code_of([&] { store.attach("nope"); }) == ErrorCode::NotFound);
  auto m = manifest();
  const auto run = store.open_run(m);
  CHECK(code_of([&] { store.load_for_replay(run.run_id()); }) == ErrorCode::NotFound);
  CHECK(store.attach(run.run_id()).dir() == run.dir());
  CHECK_FALSE(store.exists("../etc"));
}

TEST_CASE("write_once")
{
  TempDir tmp;
  write_once(tmp / "a.txt", "one");
  write_once(tmp / "a.txt", "one");
  CHECK(read_file(tmp / "a.txt") == "one");
  CHECK(code_of([&] { write_once(tmp / "a.txt", "two"); }) == ErrorCode::Immutable);
  CHECK(new_run_id() != new_run_id());
}
