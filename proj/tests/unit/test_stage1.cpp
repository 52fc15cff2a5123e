#include <random>

#include "doctest.h"
#include "ksg/error.hpp"
#include "ksg/hash.hpp"
#include "ksg/stage1.hpp"
#include "test_support.hpp"

using namespace ksg;
using namespace ksg::stage1;
using ksg::gateway::CompletionRequest;
using ksg::gateway::CompletionResult;
using ksg::gateway::Failure;
using ksg::gateway::ModelGateway;
using ksg::gateway::Outcome;
using ksg::gateway::StubBackend;
using nlohmann::json;

namespace {

corpus::Annotation ann(std::string id, std::string body, std::optional<std::string> parent = std::nullopt,
                       std::string passage = "")
{
  return corpus::Annotation{id, "anon-x", std::move(body), std::move(passage), std::move(parent), "doc", std::nullopt};
}

corpus::Reading reading()
{
  return corpus::make_reading("doc", "Doc", "Full text of the reading, long enough.", std::nullopt, {});
}

const auto& registry() { return prompts::PromptRegistry::builtin(); }

Stage1Options options()
{
  Stage1Options o;
  o.model_id = "m";
  return o;
}

std::string reply(bool substantive, const std::string& statement, const std::string& label)
{
  return json{{"substantive", substantive}, {"statement", statement}, {"label", label}, {"reason", "r"}}.dump();
}

ModelGateway gateway_for(StubBackend::Script script)
{
  gateway::GatewayOptions o;
  o.backoff_base = std::chrono::milliseconds(1);
  return ModelGateway(std::make_shared<StubBackend>(std::move(script)), o);
}

// Answers per annotation id found in the prompt; "Me too!!" posts are filtered.
Outcome scripted(const CompletionRequest& r)
{
  if (r.user_prompt.find("Me too!!") != std::string::npos) {
    return CompletionResult{R"({"substantive": false, "statement": "", "label": null, "reason": "agreement only"})",
                            {}, 0, 1, std::nullopt};
  }
  return CompletionResult{reply(true, "Working memory is limited.", "analytical"), {}, 0, 1, std::nullopt};
}

}  // namespace

TEST_CASE("bundles")
{
  const auto c = corpus::Corpus::from_annotations(
      {ann("a", "root post", std::nullopt, "passage"), ann("b", "reply", "a"), ann("c", "reply 2", "b")});
  const auto top = build_bundle(*c.find("a"), c, reading());
  CHECK(top.quoted_passage == "passage");
  CHECK(top.reply_chain.empty());
  const auto deep = build_bundle(*c.find("c"), c, reading());
  CHECK(deep.reply_chain.size() == 2);
  CHECK(deep.quoted_passage.empty());
  CHECK(build_bundle(*c.find("c"), c, reading(), 1).reply_chain.size() == 1);
}

TEST_CASE("payload parsing")
{
  const auto ok = parse_stage1_payload(reply(true, "S.", "Generative "));
  REQUIRE(std::holds_alternative<Stage1Payload>(ok));
  CHECK(std::get<Stage1Payload>(ok).label == MicroIdeaLabel::Generative);

  const auto fenced = parse_stage1_payload("Here you go:\n```json\n" + reply(true, "S.", "analytical") + "\n```\n");
  REQUIRE(std::holds_alternative<Stage1Payload>(fenced));
  CHECK(std::get<Stage1Payload>(fenced).label == MicroIdeaLabel::Analytical);

  auto kind = [](std::string_view raw) {
    const auto r = parse_stage1_payload(raw);
    REQUIRE(std::holds_alternative<payload::PayloadError>(r));
    return std::get<payload::PayloadError>(r).kind;
  };
  CHECK(kind(reply(true, "S.", "evaluative")) == payload::PayloadErrorKind::LabelDomain);
  CHECK(kind("no json at all") == payload::PayloadErrorKind::NoObject);
  CHECK(kind(R"({"statement": "x"})") == payload::PayloadErrorKind::MissingField);
  CHECK(kind(R"({"substantive": "yes"})") == payload::PayloadErrorKind::WrongType);
  CHECK(kind(reply(true, "  ", "analytical")) == payload::PayloadErrorKind::EmptyField);
  CHECK(kind(R"({"substantive": true, "statement": "s"})") == payload::PayloadErrorKind::MissingField);
  CHECK(kind(R"({"substantive": true, "statement": 5, "label": "analytical"})") ==
        payload::PayloadErrorKind::WrongType);

  const auto err = parse_stage1_payload("garbage");
  CHECK(std::get<payload::PayloadError>(err).raw_text == "garbage");
}

TEST_CASE("serialize then parse round trips")
{
  std::mt19937 rng(17);
  for (int trial = 0; trial < 300; ++trial) {
    Stage1Payload p;
    p.substantive = rng() % 2;
    p.statement = "Statement " + std::to_string(rng()) + (rng() % 2 ? " with \"quotes\" {braces}" : "");
    if (p.substantive || rng() % 2) p.label = kMicroIdeaLabels[rng() % 4];
    p.reason = rng() % 2 ? "" : "because } {";
    const auto parsed = parse_stage1_payload(serialize_stage1_payload(p));
    REQUIRE(std::holds_alternative<Stage1Payload>(parsed));
    CHECK(std::get<Stage1Payload>(parsed) == p);
  }
}

TEST_CASE("extract: filter, assign, repair, invalid")
{
  const auto c = corpus::Corpus::from_annotations({ann("a1", "Me too!!"), ann("a2", "Memory is tiny")});

  auto gw = gateway_for(scripted);
  const auto filtered = extract_micro_idea(build_bundle(*c.find("a1"), c, reading()), registry(), options(), gw);
  CHECK(std::holds_alternative<NonSubstantive>(filtered.outcome));
  CHECK(filtered.fingerprints.size() == 1);

  const auto kept = extract_micro_idea(build_bundle(*c.find("a2"), c, reading()), registry(), options(), gw);
  REQUIRE(std::holds_alternative<Substantive>(kept.outcome));
  const auto& idea = std::get<Substantive>(kept.outcome).micro_idea;
  CHECK(idea.label == MicroIdeaLabel::Analytical);
  CHECK(idea.source_annotation_id == "a2");
  CHECK(idea.id == stable_id("mi-", "a2", "Working memory is limited."));

  // First reply unusable, corrected reply accepted.
  auto repair = gateway_for([](const CompletionRequest& r) -> Outcome {
    if (r.user_prompt.find("could not be used") == std::string::npos) {
      return CompletionResult{"I think it is analytical.", {}, 0, 1, std::nullopt};
    }
    return CompletionResult{reply(true, "Fixed.", "interpretive"), {}, 0, 1, std::nullopt};
  });
  const auto repaired = extract_micro_idea(build_bundle(*c.find("a2"), c, reading()), registry(), options(), repair);
  CHECK(std::holds_alternative<Substantive>(repaired.outcome));
  CHECK(repaired.fingerprints.size() == 2);

  auto broken = gateway_for([](const CompletionRequest& r) -> Outcome {
    return CompletionResult{"malformed " + std::to_string(r.user_prompt.size()), {}, 0, 1, std::nullopt};
  });
  const auto invalid = extract_micro_idea(build_bundle(*c.find("a2"), c, reading()), registry(), options(), broken);
  REQUIRE(std::holds_alternative<InvalidOutput>(invalid.outcome));
  const auto& inv = std::get<InvalidOutput>(invalid.outcome);
  CHECK(inv.raw_texts.size() == 2);
  CHECK(inv.raw_texts[0] != inv.raw_texts[1]);
  CHECK_FALSE(inv.transport_failure);

  auto down = gateway_for([](const CompletionRequest&) -> Outcome { return Failure{ErrorCode::Transport, "x", 400}; });
  CHECK_THROWS_AS(extract_micro_idea(build_bundle(*c.find("a2"), c, reading()), registry(), options(), down),
                  gateway::TransportError);
}

TEST_CASE("over-length statements are kept and flagged")
{
  std::string statement;
  for (int i = 0; i < 61; ++i) statement += "word ";
  auto gw = gateway_for([&](const CompletionRequest&) -> Outcome {
    return CompletionResult{reply(true, statement, "descriptive"), {}, 0, 1, std::nullopt};
  });
  const auto c = corpus::Corpus::from_annotations({ann("a1", "long")});
  const auto run = run_stage1(c, reading(), registry(), options(), gw);
  REQUIRE(run.report.over_length.size() == 1);
  CHECK(std::get<Substantive>(run.outcomes[0]).over_length);
}

TEST_CASE("prompt carries the annotation, passage and thread")
{
  const auto c = corpus::Corpus::from_annotations(
      {ann("root", "Root body", std::nullopt, "The passage"), ann("kid", "Child body", "root", "The passage")});
  const auto req = build_request(build_bundle(*c.find("kid"), c, reading()), registry(), options());
  CHECK(req.user_prompt.find("Annotation id: kid\n") != std::string::npos);
  CHECK(req.user_prompt.find("Root body") != std::string::npos);
  CHECK(req.user_prompt.find("The passage") != std::string::npos);
  CHECK(req.response_schema_hint == "stage1_payload_v1");
  CHECK(req.temperature == 0.0);
}

TEST_CASE("batch runs partition the corpus")
{
  std::vector<corpus::Annotation> items;
  for (int i = 0; i < 42; ++i) items.push_back(ann("a" + std::to_string(i), i % 5 == 0 ? "Me too!!" : "Idea " + std::to_string(i)));
  const auto c = corpus::Corpus::from_annotations(items);

  auto gw = gateway_for([](const CompletionRequest& r) -> Outcome {
    if (r.user_prompt.find("Idea 7\n") != std::string::npos) return Failure{ErrorCode::Transport, "down", 400};
    if (r.user_prompt.find("Idea 9\n") != std::string::npos) return CompletionResult{"junk", {}, 0, 1, std::nullopt};
    return scripted(r);
  });
  auto opts = options();
  opts.parallelism = 4;
  const auto run = run_stage1(c, reading(), registry(), opts, gw);
  CHECK(run.outcomes.size() == 42);
  CHECK(run.report.substantive + run.report.non_substantive + run.report.invalid == 42);
  CHECK(run.report.non_substantive == 9);
  CHECK(run.report.invalid == 2);
  CHECK(run.report.transport_failures == 1);
  for (std::size_t i = 0; i < run.outcomes.size(); ++i) {
    if (const auto* s = std::get_if<Substantive>(&run.outcomes[i])) {
      CHECK(s->micro_idea.source_annotation_id == c.annotations()[i].id);
    }
  }

  opts.parallelism = 1;
  const auto sequential = run_stage1(c, reading(), registry(), opts, gw);
  CHECK(sequential.report.to_json() == run.report.to_json());

  const auto predictions = predictions_from_report(run.report.to_json());
  CHECK(predictions.size() == 42);
  CHECK(predictions[0].label == "filtered");
  CHECK(predictions[7].label == "invalid");
  CHECK(predictions[1].label == "analytical");
}

TEST_CASE("empty and all-invalid batches")
{
  auto gw = gateway_for([](const CompletionRequest&) -> Outcome {
    return CompletionResult{"nope", {}, 0, 1, std::nullopt};
  });
  const auto empty = run_stage1(corpus::Corpus{}, reading(), registry(), options(), gw);
  CHECK(empty.outcomes.empty());
  CHECK(empty.report.substantive + empty.report.non_substantive + empty.report.invalid == 0);

  const auto c = corpus::Corpus::from_annotations({ann("a", "x"), ann("b", "y"), ann("c", "z")});
  const auto bad = run_stage1(c, reading(), registry(), options(), gw);
  CHECK(bad.report.invalid == 3);

  auto opts = options();
  opts.parallelism = 0;
  CHECK_THROWS_AS(run_stage1(c, reading(), registry(), opts, gw), Error);
  opts = options();
  opts.version = prompts::PromptVersion::P3;
  CHECK_THROWS_AS(run_stage1(c, reading(), registry(), opts, gw), Error);
}
