#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "ksg/graph.hpp"
#include "ksg/labels.hpp"
#include "ksg/schemes.hpp"

namespace ksg::test {

/// Scratch directory removed on destruction.
class TempDir {
public:
  TempDir()
  {
    std::string pattern = (std::filesystem::temp_directory_path() / "ksg-test-XXXXXX").string();
    if (!mkdtemp(pattern.data())) throw std::runtime_error("mkdtemp failed");
    path_ = pattern;
  }
  ~TempDir()
  {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const noexcept { return path_; }
  std::filesystem::path operator/(std::string_view name) const { return path_ / name; }

private:
  std::filesystem::path path_;
};

inline void write_text(const std::filesystem::path& path, std::string_view text)
{
  std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << text;
}

inline std::string read_text(const std::filesystem::path& path)
{
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline std::filesystem::path source_dir() { return KSG_SOURCE_DIR; }
inline std::filesystem::path fixture_dir() { return source_dir() / "fixtures" / "demo"; }

/// Random graph that satisfies every structural invariant: 0..8 micro-ideas,
/// 1..6 nodes, 1..3 ranked links per micro-idea under a random builtin scheme.
inline graph::KnowledgeSynthesisGraph random_valid_graph(std::mt19937_64& rng)
{
  using namespace ksg::graph;
  static const std::vector<std::string> schemes{"p_base", "p1", "p2", "p3"};
  auto pick = [&](std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng); };

  KnowledgeSynthesisGraph g;
  const auto scheme_id = schemes[pick(schemes.size())];
  const auto* scheme = prompts::find_builtin_scheme(scheme_id);
  const auto categories = scheme->category_names();

  const std::size_t n_nodes = 1 + pick(6);
  for (std::size_t i = 0; i < n_nodes; ++i) {
    g.synthesis_nodes.push_back({"sn-" + std::to_string(i) + "-" + std::to_string(rng() % 1000),
                                 "Node \"" + std::to_string(i) + "\" <&>", "desc " + std::to_string(rng() % 97),
                                 "reading-x", "summary_instructor"});
  }
  const std::size_t n_ideas = pick(9);
  for (std::size_t i = 0; i < n_ideas; ++i) {
    MicroIdea m{"mi-" + std::to_string(i) + "-" + std::to_string(rng() % 1000), "a" + std::to_string(i),
                "Statement " + std::to_string(rng() % 10000) + " with 'quotes' & unicode \xc3\xa9",
                kMicroIdeaLabels[pick(4)]};
    g.micro_ideas.push_back(m);
    if (pick(5) == 0) {
      EpistemicRelation r;
      r.micro_idea_id = m.id;
      r.scheme_id = scheme_id;
      if (pick(2) == 0) r.rationale = "no fit";
      g.relations.push_back(r);
      continue;
    }
    const std::size_t n_links = 1 + pick(3);
    for (unsigned k = 0; k < n_links; ++k) {
      EpistemicRelation r;
      r.micro_idea_id = m.id;
      r.scheme_id = scheme_id;
      r.rank = k;
      r.target = g.synthesis_nodes[pick(n_nodes)].id;
      r.function = categories[pick(categories.size())];
      if (scheme->two_level) r.stance = kStances[pick(2)];
      if (pick(2) == 0) r.rationale = "because " + std::to_string(k);
      g.relations.push_back(r);
    }
  }
  g.metadata.run_id = "run-" + std::to_string(rng() % 100000);
  g.metadata.created_at = "2026-01-01T00:00:00Z";
  g.metadata.prompt_versions = {{"stage1", "p2"}, {"stage3", scheme_id}};
  g.metadata.model_ids = {"model-a", "model-b"};
  return g;
}

}  // namespace ksg::test
