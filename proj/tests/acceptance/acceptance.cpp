// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "ksg/error.hpp"
#include "ksg/hash.hpp"
#include "ksg/eval.hpp"
#include "ksg/graph.hpp"
#include "ksg/run_store.hpp"
#include "ksg/schemes.hpp"
#include "ksg/stage1.hpp"
#include "ksg/stage3.hpp"
#include "test_support.hpp"

namespace {

using namespace ksg;
using nlohmann::json;
using Strings = std::vector<std::string>;
using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = true;
  std::string detail;
};

struct Check {
  Outcome outcome;
  void require(bool ok, const std::string& what)
  {
    if (!ok && outcome.pass) {
      outcome.pass = false;
      outcome.detail = what;
    }
  }
};

double seconds_since(Clock::time_point start)
{
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(double v)
{
  std::ostringstream out;
  out.precision(3);
  out << std::fixed << v;
  return out.str();
}

// ---------------------------------------------------------------- criterion 1

// Reference kappa over an explicit contingency table.
double reference_kappa(const Strings& gold, const Strings& pred)
{
  std::set<std::string> labels(gold.begin(), gold.end());
  labels.insert(pred.begin(), pred.end());
  const Strings classes(labels.begin(), labels.end());
  const auto k = classes.size();
  std::vector<std::vector<double>> table(k, std::vector<double>(k, 0.0));
  for (std::size_t i = 0; i < gold.size(); ++i) {
    std::size_t g = 0, p = 0;
    for (std::size_t c = 0; c < k; ++c) {
      if (classes[c] == gold[i]) g = c;
      if (classes[c] == pred[i]) p = c;
    }
    table[g][p] += 1.0;
  }
  const double n = static_cast<double>(gold.size());
  double po = 0.0, pe = 0.0;
  for (std::size_t c = 0; c < k; ++c) {
    po += table[c][c] / n;
    double row = 0.0, col = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      row += table[c][j];
      col += table[j][c];
    }
    pe += (row / n) * (col / n);
  }
  if (std::fabs(1.0 - pe) < 1e-15) return 1.0;
  return (po - pe) / (1.0 - pe);
}

struct ReferenceF1 {
  double macro = 0.0;
  double weighted = 0.0;
};

ReferenceF1 reference_f1(const Strings& gold, const Strings& pred, const Strings& classes)
{
  ReferenceF1 out;
  for (const auto& c : classes) {
    double tp = 0, fp = 0, fn = 0, support = 0;
    for (std::size_t i = 0; i < gold.size(); ++i) {
      if (gold[i] == c) support += 1;
      if (gold[i] == c && pred[i] == c) tp += 1;
      if (gold[i] != c && pred[i] == c) fp += 1;
      if (gold[i] == c && pred[i] != c) fn += 1;
    }
    const double f1 = (2 * tp + fp + fn) == 0 ? 0.0 : 2 * tp / (2 * tp + fp + fn);
    out.macro += f1 / static_cast<double>(classes.size());
    out.weighted += f1 * support / static_cast<double>(gold.size());
  }
  return out;
}

Outcome criterion1()
{
  Check check;
  const auto start = Clock::now();
  std::mt19937_64 rng(20261019);
  const Strings five{"descriptive", "interpretive", "analytical", "generative", "filtered"};
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t k = 4 + rng() % 2;
    const Strings classes(five.begin(), five.begin() + static_cast<long>(k));
    const std::size_t n = 1 + rng() % 50;
    // Skewed draws so degenerate and near-degenerate marginals occur too.
    const std::size_t spread = 1 + rng() % k;
    Strings gold, pred;
    for (std::size_t i = 0; i < n; ++i) {
      gold.push_back(classes[rng() % spread]);
      pred.push_back(rng() % 3 == 0 ? gold.back() : classes[rng() % k]);
    }
    const double kappa = eval::cohen_kappa(gold, pred).kappa;
    const auto f1 = eval::f1_scores(gold, pred, classes);
    const auto ref = reference_f1(gold, pred, classes);
    const double err = std::max({std::fabs(kappa - reference_kappa(gold, pred)), std::fabs(f1.macro - ref.macro),
                                 std::fabs(f1.weighted - ref.weighted)});
    worst = std::max(worst, err);
    check.require(err <= 1e-9, "trial " + std::to_string(trial) + " differs by " + std::to_string(err));
  }
  const double elapsed = seconds_since(start);
  check.require(elapsed < 5.0, "took " + fmt(elapsed) + " s");
  if (check.outcome.pass) {
    std::ostringstream d;
    d << "1000 pairs, max error " << worst << ", " << fmt(elapsed) << " s";
    check.outcome.detail = d.str();
  }
  return check.outcome;
}

// ---------------------------------------------------------------- criterion 2

Outcome criterion2()
{
  Check check;
  const Strings gold{"D", "D", "I", "A"};
  const Strings pred{"D", "I", "I", "A"};
  const Strings classes{"D", "I", "A", "G"};
  // p_o = 3/4, p_e = (2*1 + 1*2 + 1*1) / 16 = 5/16, kappa = (3/4 - 5/16) / (11/16) = 7/11.
  const auto k = eval::cohen_kappa(gold, pred);
  check.require(std::fabs(k.kappa - 7.0 / 11.0) <= 1e-9, "kappa " + std::to_string(k.kappa));
  check.require(std::fabs(k.observed_agreement - 0.75) <= 1e-9, "p_o");
  check.require(std::fabs(k.expected_agreement - 5.0 / 16.0) <= 1e-9, "p_e");
  // F1: D 2/3 (P=1, R=1/2), I 2/3 (P=1/2, R=1), A 1, G 0.
  const auto f = eval::f1_scores(gold, pred, classes);
  check.require(std::fabs(f.per_class.at("D") - 2.0 / 3.0) <= 1e-9, "F1(D)");
  check.require(std::fabs(f.per_class.at("I") - 2.0 / 3.0) <= 1e-9, "F1(I)");
  check.require(std::fabs(f.per_class.at("A") - 1.0) <= 1e-9, "F1(A)");
  check.require(std::fabs(f.per_class.at("G") - 0.0) <= 1e-9, "F1(G)");
  check.require(std::fabs(f.macro - 7.0 / 12.0) <= 1e-9, "macro " + std::to_string(f.macro));
  check.require(std::fabs(f.weighted - 0.75) <= 1e-9, "weighted " + std::to_string(f.weighted));
  if (check.outcome.pass) {
    std::ostringstream d;
    d.precision(10);
    d << "kappa " << k.kappa << ", macro " << f.macro << ", weighted " << f.weighted;
    check.outcome.detail = d.str();
  }
  return check.outcome;
}

// ---------------------------------------------------------------- criterion 3 and 9

struct CommandResult {
  int status = -1;
  std::string output;
};

CommandResult run_command(const std::string& command)
{
  CommandResult r;
  FILE* pipe = popen((command + " 2>&1").c_str(), "r");
  if (!pipe) return r;
  std::array<char, 4096> buf{};
  std::size_t n = 0;
  while ((n = fread(buf.data(), 1, buf.size(), pipe)) > 0) r.output.append(buf.data(), n);
  r.status = pclose(pipe);
  return r;
}

std::string quoted(const std::string& s) { return "'" + s + "'"; }

struct FixtureRuns {
  bool ok = false;
  std::string error;
  std::filesystem::path store;
  Strings run_ids;
  std::vector<json> manifests;
  double seconds = 0.0;
};

// Stub run plus two replays through the CLI. Any live request would go to a
// closed local port with no key, so it would fail rather than reach a service.
FixtureRuns fixture_runs(const test::TempDir& tmp)
{
  FixtureRuns out;
  out.store = tmp / "store";
  setenv("KSG_API_KEY", "", 1);
  setenv("KSG_API_BASE", "http://127.0.0.1:9/v1", 1);
  unsetenv("KSG_BACKEND");

  const std::string cli = quoted(KSG_CLI_PATH) + " --store " + quoted(out.store.string()) + " --json ";
  const auto config = test::fixture_dir() / "config.json";
  const auto gold = test::fixture_dir() / "gold.csv";
  const auto start = Clock::now();

  auto pipeline = [&](const std::string& extra) -> std::optional<std::string> {
    const auto r = run_command(cli + "pipeline --config " + quoted(config.string()) + extra);
    if (r.status != 0) {
      out.error = "pipeline" + extra + " failed: " + r.output.substr(0, 300);
      return std::nullopt;
    }
    try {
      return json::parse(r.output).at("run_id").get<std::string>();
    } catch (const std::exception& e) {
      out.error = std::string("unreadable pipeline output: ") + e.what();
      return std::nullopt;
    }
  };

  const auto first = pipeline("");
  if (!first) return out;
  out.run_ids.push_back(*first);
  for (int i = 0; i < 2; ++i) {
    const auto replay = pipeline(" --backend replay --replay " + *first);
    if (!replay) return out;
    out.run_ids.push_back(*replay);
  }
  for (const auto& id : out.run_ids) {
    const auto r = run_command(cli + "eval " + id + " --gold " + quoted(gold.string()));
    if (r.status != 0) {
      out.error = "eval failed: " + r.output.substr(0, 300);
      return out;
    }
    out.manifests.push_back(json::parse(test::read_text(out.store / "runs" / id / "manifest.json")));
  }
  out.seconds = seconds_since(start);
  out.ok = true;
  return out;
}

std::vector<std::filesystem::path> eval_csvs(const std::filesystem::path& run_dir)
{
  std::vector<std::filesystem::path> out;
  for (const auto& entry : std::filesystem::directory_iterator(run_dir / "eval")) {
    if (entry.path().extension() == ".csv") out.push_back(entry.path().filename());
  }
  std::sort(out.begin(), out.end());
  return out;
}

Outcome criterion3(const FixtureRuns& runs)
{
  Check check;
  check.require(runs.ok, runs.error);
  if (!runs.ok) return check.outcome;

  const auto dir = [&](std::size_t i) { return runs.store / "runs" / runs.run_ids[i]; };
  std::vector<std::filesystem::path> compared{"graph.json", "stage1_report.json", "synthesis_nodes.json",
                                              "stage3_outcomes.json"};
  const auto csvs = eval_csvs(dir(0));
  check.require(!csvs.empty(), "no eval CSV written");
  for (const auto& c : csvs) compared.push_back(std::filesystem::path("eval") / c);

  for (const auto& name : compared) {
    const auto reference = test::read_text(dir(0) / name);
    check.require(!reference.empty(), name.string() + " missing in the recorded run");
    for (std::size_t i = 1; i < runs.run_ids.size(); ++i) {
      check.require(test::read_text(dir(i) / name) == reference,
                    name.string() + " differs in replay " + std::to_string(i));
    }
  }
  for (std::size_t i = 1; i < runs.manifests.size(); ++i) {
    check.require(runs.manifests[i].value("replay_of", "") == runs.run_ids[0], "replay manifest lacks replay_of");
  }
  check.require(runs.seconds < 10.0, "took " + fmt(runs.seconds) + " s");
  if (check.outcome.pass) {
    check.outcome.detail = std::to_string(compared.size()) + " artifacts identical across run + 2 replays, " +
                           fmt(runs.seconds) + " s";
  }
  return check.outcome;
}

Outcome criterion9(const FixtureRuns& runs)
{
  Check check;
  const char* key = std::getenv("KSG_API_KEY");
  check.require(!key || std::string(key).empty(), "a credential is present in the environment");
  check.require(runs.ok, runs.error);
  for (const auto& m : runs.manifests) {
    const auto backend = m.value("backend", "");
    check.require(backend == "stub" || backend == "replay", "run used backend '" + backend + "'");
    check.require(m.dump().find("api_key") == std::string::npos, "manifest stores an api key field");
  }
  // Records hold no live transport errors (connection refused would show up here).
  if (runs.ok) {
    const store::RunStore store(runs.store);
    for (const auto& record : store.model_records(runs.run_ids[0])) {
      if (const auto* f = std::get_if<gateway::Failure>(&record.outcome)) {
        check.require(f->message.starts_with("scripted"), "unexpected failure: " + f->message);
      }
    }
  }
  if (check.outcome.pass) {
    check.outcome.detail = "no credentials, stub/replay only, unroutable API base never contacted";
  }
  return check.outcome;
}

// ---------------------------------------------------------------- criterion 4

const prompts::CodingScheme& scheme(const std::string& id) { return *prompts::find_builtin_scheme(id); }

Strings display_names(const std::vector<prompts::Category>& categories)
{
  Strings out;
  for (const auto& c : categories) out.push_back(c.display_name);
  return out;
}

std::vector<graph::SynthesisNode> random_nodes(std::mt19937_64& rng)
{
  std::vector<graph::SynthesisNode> nodes;
  const std::size_t n = 1 + rng() % 8;
  for (std::size_t i = 0; i < n; ++i) {
    const auto title = "Node " + std::to_string(i) + " " + std::to_string(rng() % 1000);
    nodes.push_back({stable_id("sn-", "reading", title), title, "About " + title, "reading", "summary"});
  }
  return nodes;
}

std::vector<graph::MicroIdea> random_ideas(std::mt19937_64& rng, std::size_t n)
{
  std::vector<graph::MicroIdea> ideas;
  for (std::size_t i = 0; i < n; ++i) {
    const auto annotation = "a" + std::to_string(i);
    const auto statement = "Statement " + std::to_string(rng() % 100000);
    ideas.push_back({stable_id("mi-", annotation, statement), annotation, statement, kMicroIdeaLabels[rng() % 4]});
  }
  return ideas;
}

stage3::LinkOutcome random_outcome(std::mt19937_64& rng, const prompts::CodingScheme& s,
                                   const std::vector<graph::SynthesisNode>& nodes)
{
  switch (rng() % 6) {
    case 0: return stage3::Uncategorized{rng() % 2 ? "no fit" : ""};
    case 1: return stage3::InvalidOutput{"no_object: nothing usable", {"junk", "junk"}, rng() % 2 == 0};
    default: break;
  }
  const auto categories = s.category_names();
  Strings targets;
  for (const auto& n : nodes) targets.push_back(n.id);
  std::shuffle(targets.begin(), targets.end(), rng);
  const std::size_t links = 1 + rng() % std::min<std::size_t>(graph::kMaxLinks, targets.size());
  stage3::Linked linked;
  for (std::size_t k = 0; k < links; ++k) {
    graph::EpistemicRelation r;
    r.target = targets[k];
    r.function = categories[rng() % categories.size()];
    if (s.two_level) r.stance = kStances[rng() % 2];
    r.scheme_id = s.scheme_id;
    r.rank = static_cast<unsigned>(k);
    if (rng() % 2) r.rationale = "reason " + std::to_string(k);
    linked.relations.push_back(r);
  }
  return linked;
}

std::optional<graph::ViolationKind> single_violation(const graph::KnowledgeSynthesisGraph& g)
{
  const auto v = graph::validate(g);
  if (v.size() != 1) return std::nullopt;
  return v[0].kind;
}

Outcome criterion4()
{
  Check check;
  std::mt19937_64 rng(4);
  const Strings schemes{"p_base", "p1", "p2", "p3"};
  std::size_t violations = 0;
  std::size_t relations = 0;
  for (int trial = 0; trial < 500; ++trial) {
    const auto& s = scheme(schemes[rng() % schemes.size()]);
    const auto nodes = random_nodes(rng);
    const auto ideas = random_ideas(rng, rng() % 20);
    std::vector<stage3::LinkOutcome> outcomes;
    for (std::size_t i = 0; i < ideas.size(); ++i) outcomes.push_back(random_outcome(rng, s, nodes));
    try {
      const auto g = stage3::assemble_graph(ideas, nodes, outcomes, s.scheme_id, {});
      violations += graph::validate(g).size();
      relations += g.relations.size();
    } catch (const Error& e) {
      ++violations;
      check.require(false, std::string("assembly rejected a fuzzed set: ") + e.what());
    }
  }
  check.require(violations == 0, std::to_string(violations) + " violations");

  // Corruptions of one valid graph, each expected to yield exactly one violation.
  const auto nodes = random_nodes(rng);
  const auto ideas = random_ideas(rng, 4);
  std::vector<stage3::LinkOutcome> outcomes;
  for (std::size_t i = 0; i < ideas.size(); ++i) {
    graph::EpistemicRelation r{"", nodes[0].id, Stance::BuildToward, "ground", std::nullopt, "p3", 0};
    outcomes.push_back(stage3::Linked{{r}});
  }
  const auto base = stage3::assemble_graph(ideas, nodes, outcomes, "p3", {});
  check.require(graph::validate(base).empty(), "base graph invalid");

  auto dangling = base;
  dangling.relations[0].target = "sn-does-not-exist";
  check.require(single_violation(dangling) == graph::ViolationKind::DanglingTarget, "dangling target");

  auto unknown = base;
  unknown.relations[1].function = "evaluate";
  check.require(single_violation(unknown) == graph::ViolationKind::UnknownCategory, "unknown relation label");

  auto orphan = base;
  orphan.relations.erase(orphan.relations.begin() + 2);
  check.require(single_violation(orphan) == graph::ViolationKind::UncoveredMicroIdea, "orphan micro-idea");

  // An unknown micro-idea label cannot be represented in memory; import rejects it.
  auto doc = json::parse(graph::export_graph(base, graph::ExportFormat::Json));
  doc["micro_ideas"][0]["label"] = "evaluative";
  try {
    graph::import_json(doc.dump());
    check.require(false, "unknown micro-idea label imported");
  } catch (const Error& e) {
    check.require(e.code() == ErrorCode::Schema, "unknown micro-idea label gave " + std::string(to_string(e.code())));
  }

  if (check.outcome.pass) {
    check.outcome.detail = "500 fuzzed sets (" + std::to_string(relations) +
                           " relations), 0 violations; corruptions flagged exactly";
  }
  return check.outcome;
}

// ---------------------------------------------------------------- criterion 5

Outcome criterion5()
{
  Check check;
  auto names = [](const std::string& id) { return scheme(id).category_names(); };
  check.require(names("stage1") == Strings{"descriptive", "interpretive", "analytical", "generative"}, "stage1");
  check.require(names("p_base") == Strings{"support", "challenge", "exemplify", "question"}, "p_base");
  check.require(names("p1") == Strings{"evidence", "explain", "challenge", "qualify", "summarize", "extend"}, "p1");
  check.require(names("p2") == Strings{"support", "critique", "reflect"}, "p2");

  const auto& p3 = scheme("p3");
  check.require(p3.two_level, "p3 is not two-level");
  check.require(names("p3") == Strings{"ground", "explain_elaborate", "new_idea", "question"}, "p3 functions");
  check.require(display_names(p3.categories) ==
                    Strings{"Ground", "Explain & Elaborate", "New Idea", "Question"},
                "p3 function display names");
  check.require(display_names(p3.stances) == Strings{"Build toward (+)", "Push back (-)"}, "p3 stances");
  const std::vector<Strings> cells{
      {"Provides validating evidence or examples to clarify a claim.",
       "Unpacks meaning or adds details to extend current ideas.",
       "Introduces concepts that connect other parts of synthesis.",
       "Probes for more detail to help refine the synthesis."},
      {"Provides counter-examples or edge cases to identify limitations.",
       "Deconstructs to reveal assumptions or internal contradictions.",
       "Introduces competing ideas that shift the focus away.",
       "Raises critics about validity, bias, or logic to prompt revision."}};
  check.require(p3.cells == cells, "p3 cell text");
  if (check.outcome.pass) check.outcome.detail = "stage 1 + p_base/p1/p2/p3 category lists and p3 cells exact";
  return check.outcome;
}

// ---------------------------------------------------------------- criterion 6

stage3::LinkOutcome linked_to(const std::string& target, const std::string& function, Stance stance)
{
  return stage3::Linked{{graph::EpistemicRelation{"mi", target, stance, function, std::nullopt, "p3", 0}}};
}

double pairwise_oracle(const std::map<std::string, std::vector<stage3::LinkOutcome>>& per_model)
{
  std::vector<const std::vector<stage3::LinkOutcome>*> lists;
  for (const auto& [m, o] : per_model) lists.push_back(&o);
  const auto n = lists.front()->size();
  std::size_t hits = 0;
  for (std::size_t i = 0; i < n; ++i) {
    bool hit = false;
    for (std::size_t a = 0; a < lists.size(); ++a) {
      for (std::size_t b = a + 1; b < lists.size(); ++b) {
        const auto ka = eval::canonical_primary((*lists[a])[i]);
        if (!ka.empty() && ka == eval::canonical_primary((*lists[b])[i])) hit = true;
      }
    }
    hits += hit ? 1 : 0;
  }
  return static_cast<double>(hits) / static_cast<double>(n);
}

Outcome criterion6()
{
  Check check;
  const auto B = Stance::BuildToward;
  const auto P = Stance::PushBack;
  // Item 1: A and B agree. Item 2: all differ. Item 3: C and D agree.
  std::map<std::string, std::vector<stage3::LinkOutcome>> per_model{
      {"A", {linked_to("n1", "ground", B), linked_to("n1", "ground", B), linked_to("n1", "question", P)}},
      {"B", {linked_to("n1", "ground", B), linked_to("n1", "ground", P), linked_to("n2", "question", P)}},
      {"C", {linked_to("n2", "ground", B), linked_to("n2", "ground", B), stage3::Uncategorized{"x"}}},
      {"D", {stage3::InvalidOutput{}, stage3::Uncategorized{}, stage3::Uncategorized{"y"}}}};
  const double value = eval::linking_consistency(per_model);
  check.require(std::fabs(value - 2.0 / 3.0) < 1e-12, "linking consistency " + std::to_string(value));
  check.require(std::fabs(value - pairwise_oracle(per_model)) < 1e-12, "differs from the pairwise oracle");

  std::vector<stage3::LinkOutcome> ten(8, linked_to("n1", "ground", B));
  ten.push_back(stage3::InvalidOutput{});
  ten.push_back(stage3::InvalidOutput{});
  const double rate = eval::execution_rate(ten);
  check.require(std::fabs(rate - 0.8) < 1e-12, "execution rate " + std::to_string(rate));

  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 500; ++trial) {
    std::map<std::string, std::vector<stage3::LinkOutcome>> random;
    const auto models = 2 + rng() % 4;
    const auto n = 1 + rng() % 10;
    for (std::size_t m = 0; m < models; ++m) {
      auto& list = random["m" + std::to_string(m)];
      for (std::size_t i = 0; i < n; ++i) {
        switch (rng() % 4) {
          case 0: list.push_back(stage3::Uncategorized{}); break;
          case 1: list.push_back(stage3::InvalidOutput{}); break;
          default: list.push_back(linked_to("n" + std::to_string(rng() % 2), "ground", rng() % 2 ? B : P));
        }
      }
    }
    check.require(std::fabs(eval::linking_consistency(random) - pairwise_oracle(random)) < 1e-12,
                  "random fixture " + std::to_string(trial) + " differs from the oracle");
  }
  if (check.outcome.pass) check.outcome.detail = "3x4 fixture = 2/3, 8 of 10 valid = 0.8, 500 random sets match";
  return check.outcome;
}

// ---------------------------------------------------------------- criterion 7

std::string wrap(std::mt19937_64& rng, const std::string& payload, const std::string& pretty)
{
  switch (rng() % 7) {
    case 0: return payload;
    case 1: return "Here is the result:\n" + payload + "\nHope this helps.";
    case 2: return "```json\n" + pretty + "\n```";
    case 3: return "Sure! ```\n" + payload + "\n``` Let me know {if needed}.";
    case 4: return "Reasoning: the text (see {note}) is brief.\n\n" + pretty;
    case 5: return payload + "\n\nNote: braces like } or { may appear here.";
    default: return "Answer below.\n\n```JSON\n" + pretty + "\n```\nThanks";
  }
}

Outcome criterion7()
{
  Check check;
  std::mt19937_64 rng(7);
  std::size_t recovered = 0, rejected = 0, false_accepts = 0;

  // Stage 1: valid payloads.
  for (int i = 0; i < 200; ++i) {
    stage1::Stage1Payload p;
    p.substantive = rng() % 4 != 0;
    p.statement = p.substantive ? "Idea " + std::to_string(rng() % 1000) + " about {schemas} and \"load\"" : "";
    if (p.substantive) p.label = kMicroIdeaLabels[rng() % 4];
    p.reason = "reason " + std::to_string(i);
    const auto compact = stage1::serialize_stage1_payload(p);
    const auto text = wrap(rng, compact, json::parse(compact).dump(2));
    const auto r = stage1::parse_stage1_payload(text);
    const bool ok = std::holds_alternative<stage1::Stage1Payload>(r) && std::get<stage1::Stage1Payload>(r) == p;
    recovered += ok;
    check.require(ok, "stage-1 payload not recovered from: " + text.substr(0, 120));
  }

  // Stage 1: invalid payloads, each with the expected error kind.
  using K = payload::PayloadErrorKind;
  const std::vector<std::pair<json, K>> stage1_bad{
      {json{{"statement", "s"}, {"label", "analytical"}}, K::MissingField},
      {json{{"substantive", "yes"}, {"statement", "s"}, {"label", "analytical"}}, K::WrongType},
      {json{{"substantive", true}, {"statement", "s"}, {"label", "evaluative"}}, K::LabelDomain},
      {json{{"substantive", true}, {"statement", "   "}, {"label", "analytical"}}, K::EmptyField},
      {json{{"substantive", true}, {"statement", "s"}}, K::MissingField},
      {json{{"substantive", true}, {"statement", 42}, {"label", "analytical"}}, K::WrongType},
      {json{{"substantive", true}, {"statement", "s"}, {"label", 3}}, K::WrongType}};
  for (int i = 0; i < 200; ++i) {
    std::string text;
    K expected;
    if (i % 8 == 7) {
      text = rng() % 2 ? "I would label this analytical." : "{\"substantive\": true, \"statement\": \"cut";
      expected = K::NoObject;
    } else {
      const auto& [doc, kind] = stage1_bad[rng() % stage1_bad.size()];
      text = wrap(rng, doc.dump(), doc.dump(2));
      expected = kind;
    }
    const auto r = stage1::parse_stage1_payload(text);
    if (const auto* e = std::get_if<payload::PayloadError>(&r)) {
      ++rejected;
      check.require(e->kind == expected, "stage-1 case gave " + std::string(payload::to_string(e->kind)) +
                                             " instead of " + std::string(payload::to_string(expected)));
    } else {
      ++false_accepts;
    }
  }

  // Stage 3: valid payloads under every scheme.
  const Strings scheme_ids{"p_base", "p1", "p2", "p3"};
  const std::set<std::string> node_ids{"sn-1", "sn-2", "sn-3", "sn-4"};
  const Strings node_list(node_ids.begin(), node_ids.end());
  for (int i = 0; i < 200; ++i) {
    const auto& s = scheme(scheme_ids[rng() % scheme_ids.size()]);
    const auto categories = s.category_names();
    json doc;
    std::vector<std::pair<std::string, std::string>> expected;
    if (rng() % 5 == 0) {
      doc = {{"links", "uncategorized"}, {"reason", "nothing fits"}};
    } else {
      Strings targets = node_list;
      std::shuffle(targets.begin(), targets.end(), rng);
      json links = json::array();
      const std::size_t n = 1 + rng() % graph::kMaxLinks;
      for (std::size_t k = 0; k < n; ++k) {
        json link{{"target", targets[k]}, {"function", categories[rng() % categories.size()]},
                  {"rationale", "because {it} fits"}};
        if (s.two_level) link["stance"] = std::string(to_string(kStances[rng() % 2]));
        expected.emplace_back(targets[k], link["function"].get<std::string>());
        links.push_back(link);
      }
      doc = {{"links", links}};
    }
    const auto text = wrap(rng, doc.dump(), doc.dump(2));
    const auto r = stage3::parse_stage3_payload(text, s, node_ids);
    bool ok = std::holds_alternative<stage3::LinkPayload>(r);
    if (ok) {
      const auto& p = std::get<stage3::LinkPayload>(r);
      ok = p.uncategorized == expected.empty() && p.relations.size() == expected.size();
      for (std::size_t k = 0; ok && k < expected.size(); ++k) {
        ok = p.relations[k].target == expected[k].first && p.relations[k].function == expected[k].second &&
             p.relations[k].stance.has_value() == s.two_level;
      }
    }
    recovered += ok;
    check.require(ok, "stage-3 payload not recovered from: " + text.substr(0, 120));
  }

  // Stage 3: invalid payloads.
  for (int i = 0; i < 200; ++i) {
    const auto& s = scheme(scheme_ids[rng() % scheme_ids.size()]);
    const auto category = s.category_names()[0];
    auto link = [&](const std::string& target) {
      json l{{"target", target}, {"function", category}};
      if (s.two_level) l["stance"] = "build_toward";
      return l;
    };
    json doc;
    K expected = K::NoObject;
    switch (i % 10) {
      case 0: doc = {{"links", {link("sn-99")}}}; expected = K::UnknownTarget; break;
      case 1: {
        auto l = link("sn-1");
        l["function"] = "bogus";
        doc = {{"links", {l}}};
        expected = K::FunctionDomain;
        break;
      }
      case 2: {
        auto l = link("sn-1");
        l["stance"] = s.two_level ? "neutral" : "push_back";
        doc = {{"links", {l}}};
        expected = K::StanceDomain;
        break;
      }
      case 3: doc = {{"links", {link("sn-1"), link("sn-2"), link("sn-3"), link("sn-4")}}}; expected = K::LinkCount; break;
      case 4: doc = {{"links", json::array()}}; expected = K::LinkCount; break;
      case 5: doc = {{"links", {link("sn-1"), link("sn-1")}}}; expected = K::DuplicateLink; break;
      case 6: doc = {{"links", {json{{"target", "uncategorized"}}, link("sn-2")}}}; expected = K::MixedUncategorized; break;
      case 7: doc = {{"links", link("sn-1")}}; expected = K::WrongType; break;
      case 8: {
        auto l = link("sn-1");
        l.erase("function");
        doc = {{"links", {l}}};
        expected = K::MissingField;
        break;
      }
      default: break;
    }
    const auto text = doc.is_null() ? std::string("I am not sure which node fits.") : wrap(rng, doc.dump(), doc.dump(2));
    const auto r = stage3::parse_stage3_payload(text, s, node_ids);
    if (const auto* e = std::get_if<payload::PayloadError>(&r)) {
      ++rejected;
      check.require(e->kind == expected, "stage-3 case " + std::to_string(i % 10) + " under " + s.scheme_id +
                                             " gave " + std::string(payload::to_string(e->kind)) + " instead of " +
                                             std::string(payload::to_string(expected)));
    } else {
      ++false_accepts;
    }
  }

  check.require(false_accepts == 0, std::to_string(false_accepts) + " false accepts");
  if (check.outcome.pass) {
    check.outcome.detail = std::to_string(recovered) + "/400 wrapped payloads recovered, " + std::to_string(rejected) +
                           "/400 invalid rejected with the expected error kind";
  }
  return check.outcome;
}

// ---------------------------------------------------------------- criterion 8

Outcome criterion8(const test::TempDir& tmp, const FixtureRuns& runs)
{
  Check check;
  std::mt19937_64 rng(8);
  std::size_t round_trips = 0;
  for (int i = 0; i < 200; ++i) {
    const auto g = test::random_valid_graph(rng);
    const auto bytes = graph::export_graph(g, graph::ExportFormat::Json);
    const auto back = graph::import_json(bytes);
    const bool ok = back == g && graph::diff(g, back).empty() &&
                    graph::export_graph(back, graph::ExportFormat::Json) == bytes;
    round_trips += ok;
    check.require(ok, "JSON round trip " + std::to_string(i) + " changed the graph");
  }

  const auto dir = tmp / "exports";
  std::filesystem::create_directories(dir);
  for (int i = 0; i < 40; ++i) {
    const auto g = test::random_valid_graph(rng);
    const auto name = "g" + std::to_string(i);
    bool sentinel = false;
    for (const auto& r : g.relations) sentinel = sentinel || r.uncategorized();
    test::write_text(dir / (name + ".graphml"), graph::export_graph(g, graph::ExportFormat::GraphML));
    test::write_text(dir / (name + ".dot"), graph::export_graph(g, graph::ExportFormat::Dot));
    const json expect{{"nodes", g.micro_ideas.size() + g.synthesis_nodes.size() + (sentinel ? 1 : 0)},
                      {"edges", g.relations.size()}};
    test::write_text(dir / (name + ".expect.json"), expect.dump());
  }
  // The fixture run, exported through the command line.
  check.require(runs.ok, runs.error);
  if (runs.ok) {
    const auto& id = runs.run_ids[0];
    const std::string cli = quoted(KSG_CLI_PATH) + " --store " + quoted(runs.store.string()) + " export " + id;
    for (const auto* format : {"graphml", "dot"}) {
      const auto target = dir / (std::string("fixture.") + format);
      const auto r = run_command(cli + " --format " + format + " --out " + quoted(target.string()));
      check.require(r.status == 0, std::string("export ") + format + " failed: " + r.output.substr(0, 200));
    }
    const auto g = graph::import_json(test::read_text(runs.store / "runs" / id / "graph.json"));
    bool sentinel = false;
    for (const auto& r : g.relations) sentinel = sentinel || r.uncategorized();
    const json expect{{"nodes", g.micro_ideas.size() + g.synthesis_nodes.size() + (sentinel ? 1 : 0)},
                      {"edges", g.relations.size()}};
    test::write_text(dir / "fixture.expect.json", expect.dump());
  }

  const auto script = test::source_dir() / "tests" / "acceptance" / "validate_exports.py";
  const auto xsd = test::source_dir() / "tests" / "acceptance" / "graphml.xsd";
  const std::string python = KSG_PYTHON;
  check.require(!python.empty(), "no Python interpreter configured");
  std::string validator;
  if (!python.empty()) {
    const auto r = run_command(quoted(python) + " " + quoted(script.string()) + " " + quoted(xsd.string()) + " " +
                               quoted(dir.string()));
    validator = r.output;
    check.require(r.status == 0, "external validation failed: " + r.output.substr(0, 400));
  }
  if (check.outcome.pass) {
    check.outcome.detail = std::to_string(round_trips) +
                           "/200 JSON round trips; 41 GraphML files (40 random + fixture run) valid against the schema "
                           "and loaded by networkx and igraph, matching DOT files parsed by pydot";
  }
  return check.outcome;
}

}  // namespace

int main()
{
  test::TempDir tmp;
  bool all = true;
  auto report = [&](int number, const std::string& title, const std::function<Outcome()>& fn) {
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    all = all && o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << " " << number << " " << title << ": " << o.detail << std::endl;
  };

  FixtureRuns runs;
  try {
    runs = fixture_runs(tmp);
  } catch (const std::exception& e) {
    runs.error = e.what();
  }

  report(1, "metric oracle equivalence", criterion1);
  report(2, "hand-computed metric fixtures", criterion2);
  report(3, "end-to-end determinism", [&] { return criterion3(runs); });
  report(4, "graph invariants", criterion4);
  report(5, "scheme fidelity", criterion5);
  report(6, "consistency metric", criterion6);
  report(7, "payload parsing robustness", criterion7);
  report(8, "export validity", [&] { return criterion8(tmp, runs); });
  report(9, "offline completeness", [&] { return criterion9(runs); });
  return all ? 0 : 1;
}
