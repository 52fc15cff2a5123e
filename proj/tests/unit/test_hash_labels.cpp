#include "doctest.h"
#include "ksg/error.hpp"
#include "ksg/hash.hpp"
#include "ksg/labels.hpp"

using namespace ksg;

TEST_CASE("sha256 known vectors")
{
  CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("stable ids join parts with a unit separator")
{
  const auto id = stable_id("mi-", "a01", "statement");
  CHECK(id == "mi-" + sha256_hex(std::string("a01") + '\x1f' + "statement").substr(0, 16));
  CHECK(id.size() == 19);
  CHECK(stable_id("mi-", "a0", "1statement") != stable_id("mi-", "a01", "statement"));
  CHECK(stable_id("sn-", "r", "t") == stable_id("sn-", "r", "t"));
}

TEST_CASE("label names round trip")
{
  for (auto label : kMicroIdeaLabels) CHECK(parse_micro_idea_label(to_string(label)) == label);
  for (auto stance : kStances) CHECK(parse_stance(to_string(stance)) == stance);
  for (auto fn : kRelationFunctions) CHECK(parse_relation_function(to_string(fn)) == fn);
}

TEST_CASE("label parsing normalizes case and spacing")
{
  CHECK(parse_micro_idea_label("Generative ") == MicroIdeaLabel::Generative);
  CHECK(parse_micro_idea_label("  ANALYTICAL") == MicroIdeaLabel::Analytical);
  CHECK_FALSE(parse_micro_idea_label("evaluative"));
  CHECK_FALSE(parse_micro_idea_label(""));
  CHECK(parse_stance("Build toward (+)") == Stance::BuildToward);
  CHECK(parse_stance("push-back") == Stance::PushBack);
  CHECK_FALSE(parse_stance("neutral"));
  CHECK(parse_relation_function("Explain & Elaborate") == RelationFunction::ExplainElaborate);
  CHECK(parse_relation_function("New Idea") == RelationFunction::NewIdea);
  CHECK_FALSE(parse_relation_function("summarize"));
}

TEST_CASE("closed enumerations have exactly the documented members")
{
  CHECK(kMicroIdeaLabels.size() == 4);
  CHECK(kStances.size() == 2);
  CHECK(kRelationFunctions.size() == 4);
  CHECK(to_string(Stance::BuildToward) == "build_toward");
  CHECK(to_string(Stance::PushBack) == "push_back");
}

TEST_CASE("text helpers")
{
  CHECK(normalize_token("Explain & Elaborate") == "explain_elaborate");
  CHECK(normalize_token("  --New   Idea--") == "new_idea");
  CHECK(trim("\t hi \n") == "hi");
  CHECK(to_lower("AbC") == "abc");
  CHECK(word_count("  one two\tthree\nfour ") == 4);
  CHECK(word_count("") == 0);
}

TEST_CASE("error codes have names")
{
  CHECK(to_string(ErrorCode::ReplayMiss) == "replay_miss");
  const Error e(ErrorCode::Immutable, "x");
  CHECK(e.code() == ErrorCode::Immutable);
  CHECK(std::string(e.what()) == "x");
}
