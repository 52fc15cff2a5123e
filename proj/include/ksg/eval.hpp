#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "ksg/corpus.hpp"
#include "ksg/stage1.hpp"
#include "ksg/stage3.hpp"

namespace ksg::eval {

/// Rows are gold labels, columns predicted labels.
class ConfusionMatrix {
public:
  ConfusionMatrix(std::vector<std::string> classes, std::span<const std::string> gold,
                  std::span<const std::string> predicted);

  const std::vector<std::string>& classes() const noexcept { return classes_; }
  std::size_t count(std::size_t gold_index, std::size_t predicted_index) const;
  std::size_t total() const noexcept { return total_; }
  std::size_t row_total(std::size_t gold_index) const;
  std::size_t column_total(std::size_t predicted_index) const;
  std::size_t index_of(std::string_view label) const;

  nlohmann::json to_json() const;

private:
  std::vector<std::string> classes_;
  std::vector<std::size_t> counts_;
  std::size_t total_ = 0;
};

struct KappaResult {
  double kappa = 0.0;
  double observed_agreement = 0.0;
  double expected_agreement = 0.0;
  /// Both raters used one and the same label throughout (p_e == 1); kappa is
  /// reported as 1.
  bool degenerate_marginals = false;
};

/// Cohen's kappa (p_o - p_e) / (1 - p_e). Throws ksg::Error(InvalidArgument)
/// on length mismatch or empty input.
KappaResult cohen_kappa(std::span<const std::string> gold, std::span<const std::string> predicted);

struct F1Scores {
  std::map<std::string, double> per_class;
  double macro = 0.0;
  double weighted = 0.0;
};

/// Per-class F1 = 2PR/(P+R), 0 when P+R = 0. Macro is the plain mean over
/// `classes` (absent classes count as 0); weighted uses gold support.
/// Predictions outside `classes` count as errors for the gold class. Gold
/// labels must be in `classes`.
F1Scores f1_scores(std::span<const std::string> gold, std::span<const std::string> predicted,
                   std::span<const std::string> classes);

/// Fraction of schema-valid outcomes (Linked or Uncategorized).
double execution_rate(std::span<const stage3::LinkOutcome> outcomes);
double invalid_fraction(std::span<const stage3::LinkOutcome> outcomes);
/// Stage-1 analogue: Substantive or NonSubstantive count as executed.
double execution_rate(std::span<const stage1::FilterOutcome> outcomes);

/// Canonical primary output of one item: "target|stance|function",
/// "uncategorized", or empty for Invalid (never equal to anything).
std::string canonical_primary(const stage3::LinkOutcome& outcome);

/// Fraction of items on which at least two models give identical canonical
/// primary outputs. Needs at least two models with equally long lists.
double linking_consistency(const std::map<std::string, std::vector<stage3::LinkOutcome>>& per_model);

/// Stage-1 label space for agreement: the four labels plus "filtered".
const std::vector<std::string>& agreement_classes();

struct FilterTable {
  std::size_t both_filtered = 0;       // gold filtered, model non-substantive
  std::size_t gold_only_filtered = 0;  // gold filtered, model produced a micro-idea
  std::size_t model_only_filtered = 0;
  std::size_t both_kept = 0;
  std::size_t invalid = 0;
};

struct AgreementReport {
  double kappa = 0.0;
  bool degenerate_marginals = false;
  double macro_f1 = 0.0;
  double weighted_f1 = 0.0;
  std::map<std::string, double> per_class_f1;
  std::size_t n_items = 0;
  std::size_t n_gold_unknown = 0;   // gold ids not in the run
  std::size_t n_uncovered = 0;      // run items without gold
  std::string prompt_version;
  std::string model_id;
  std::string source_run_id;
  std::vector<std::string> matrix_classes;
  std::vector<std::vector<std::size_t>> matrix;
  FilterTable filter;

  nlohmann::json to_json() const;
  std::string to_csv() const;
};

/// Pairs predictions with gold by annotation id. Throws
/// ksg::Error(Mismatch) when no item overlaps.
AgreementReport agreement_report(const std::vector<stage1::Prediction>& predictions,
                                 const std::vector<corpus::GoldCoding>& gold, std::string prompt_version,
                                 std::string model_id, std::string source_run_id);

struct ConsistencyReport {
  std::map<std::string, double> execution_rate_per_model;
  double linking_consistency = 0.0;
  std::size_t n_items = 0;
  std::string scheme_id;
  std::vector<std::string> model_ids;

  nlohmann::json to_json() const;
  /// Columns: scheme_id,model_id,execution_rate,linking_consistency,n_items.
  std::string to_csv() const;
};

/// Throws ksg::Error(Mismatch) when the sets disagree on scheme or
/// micro-idea order, ksg::Error(InvalidArgument) with fewer than two models.
ConsistencyReport consistency_report(const std::vector<stage3::ModelOutcomes>& per_model);

/// Shortest round-trip decimal form of `value`.
std::string format_number(double value);

}  // namespace ksg::eval
