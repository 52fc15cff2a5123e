#include "ksg/eval.hpp"

#include <algorithm>
#include <charconv>
#include <set>

#include "csv.hpp"
#include "ksg/error.hpp"

namespace ksg::eval {
namespace {

using nlohmann::json;

void check_pairs(std::span<const std::string> gold, std::span<const std::string> predicted)
{
  if (gold.size() != predicted.size()) {
    throw Error(ErrorCode::InvalidArgument, "gold and predicted lists differ in length (" +
                                                std::to_string(gold.size()) + " vs " +
                                                std::to_string(predicted.size()) + ")");
  }
  if (gold.empty()) throw Error(ErrorCode::InvalidArgument, "label lists are empty");
}

template <typename Outcomes>
double valid_fraction(const Outcomes& outcomes)
{
  if (outcomes.empty()) throw Error(ErrorCode::InvalidArgument, "execution rate of an empty outcome list");
  std::size_t valid = 0;
  for (const auto& o : outcomes) {
    if (o.index() != 2) ++valid;
  }
  return static_cast<double>(valid) / static_cast<double>(outcomes.size());
}

const std::vector<std::string>& matrix_classes()
{
  static const std::vector<std::string> classes = [] {
    auto c = agreement_classes();
    c.push_back("invalid");
    return c;
  }();
  return classes;
}

}  // namespace

ConfusionMatrix::ConfusionMatrix(std::vector<std::string> classes, std::span<const std::string> gold,
                                 std::span<const std::string> predicted)
    : classes_(std::move(classes)), counts_(classes_.size() * classes_.size(), 0)
{
  if (gold.size() != predicted.size()) throw Error(ErrorCode::InvalidArgument, "gold and predicted lists differ in length");
  if (std::set<std::string>(classes_.begin(), classes_.end()).size() != classes_.size()) {
    throw Error(ErrorCode::InvalidArgument, "duplicate class in confusion matrix");
  }
  for (std::size_t i = 0; i < gold.size(); ++i) {
    ++counts_[index_of(gold[i]) * classes_.size() + index_of(predicted[i])];
  }
  total_ = gold.size();
}

std::size_t ConfusionMatrix::index_of(std::string_view label) const
{
  const auto it = std::find(classes_.begin(), classes_.end(), label);
  if (it == classes_.end()) throw Error(ErrorCode::InvalidArgument, "label '" + std::string(label) + "' is not a class");
  return static_cast<std::size_t>(it - classes_.begin());
}

std::size_t ConfusionMatrix::count(std::size_t g, std::size_t p) const
{
  return counts_.at(g * classes_.size() + p);
}

std::size_t ConfusionMatrix::row_total(std::size_t g) const
{
  std::size_t sum = 0;
  for (std::size_t p = 0; p < classes_.size(); ++p) sum += count(g, p);
  return sum;
}

std::size_t ConfusionMatrix::column_total(std::size_t p) const
{
  std::size_t sum = 0;
  for (std::size_t g = 0; g < classes_.size(); ++g) sum += count(g, p);
  return sum;
}

json ConfusionMatrix::to_json() const
{
  json rows = json::array();
  for (std::size_t g = 0; g < classes_.size(); ++g) {
    json row = json::array();
    for (std::size_t p = 0; p < classes_.size(); ++p) row.push_back(count(g, p));
    rows.push_back(std::move(row));
  }
  return {{"classes", classes_}, {"counts", std::move(rows)}};
}

KappaResult cohen_kappa(std::span<const std::string> gold, std::span<const std::string> predicted)
{
  check_pairs(gold, predicted);
  std::map<std::string, std::size_t> gold_counts;
  std::map<std::string, std::size_t> pred_counts;
  std::size_t agree = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    ++gold_counts[gold[i]];
    ++pred_counts[predicted[i]];
    if (gold[i] == predicted[i]) ++agree;
  }
  const auto n = static_cast<double>(gold.size());
  std::size_t chance_pairs = 0;
  for (const auto& [label, g] : gold_counts) {
    if (auto it = pred_counts.find(label); it != pred_counts.end()) chance_pairs += g * it->second;
  }

  KappaResult r;
  r.observed_agreement = static_cast<double>(agree) / n;
  r.expected_agreement = static_cast<double>(chance_pairs) / (n * n);
  if (chance_pairs == gold.size() * gold.size()) {
    r.degenerate_marginals = true;
    r.kappa = 1.0;
    return r;
  }
  r.kappa = (r.observed_agreement - r.expected_agreement) / (1.0 - r.expected_agreement);
  return r;
}

F1Scores f1_scores(std::span<const std::string> gold, std::span<const std::string> predicted,
                   std::span<const std::string> classes)
{
  check_pairs(gold, predicted);
  if (classes.empty()) throw Error(ErrorCode::InvalidArgument, "class list is empty");
  const std::set<std::string> declared(classes.begin(), classes.end());
  if (declared.size() != classes.size()) throw Error(ErrorCode::InvalidArgument, "duplicate class in class list");
  for (const auto& g : gold) {
    if (!declared.contains(g)) throw Error(ErrorCode::InvalidArgument, "gold label '" + g + "' is not a declared class");
  }

  F1Scores out;
  double weighted_sum = 0.0;
  for (const auto& c : classes) {
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < gold.size(); ++i) {
      const bool g = gold[i] == c;
      const bool p = predicted[i] == c;
      if (g && p) ++tp;
      else if (p) ++fp;
      else if (g) ++fn;
    }
    const double precision = tp + fp == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
    const double recall = tp + fn == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fn);
    const double f1 = precision + recall == 0.0 ? 0.0 : 2.0 * precision * recall / (precision + recall);
    out.per_class[c] = f1;
    out.macro += f1;
    weighted_sum += f1 * static_cast<double>(tp + fn);
  }
  out.macro /= static_cast<double>(classes.size());
  out.weighted = weighted_sum / static_cast<double>(gold.size());
  return out;
}

double execution_rate(std::span<const stage3::LinkOutcome> outcomes)
{
  return valid_fraction(outcomes);
}

double invalid_fraction(std::span<const stage3::LinkOutcome> outcomes)
{
  if (outcomes.empty()) throw Error(ErrorCode::InvalidArgument, "invalid fraction of an empty outcome list");
  const auto invalid = std::count_if(outcomes.begin(), outcomes.end(), [](const auto& o) { return o.index() == 2; });
  return static_cast<double>(invalid) / static_cast<double>(outcomes.size());
}

double execution_rate(std::span<const stage1::FilterOutcome> outcomes)
{
  return valid_fraction(outcomes);
}

std::string canonical_primary(const stage3::LinkOutcome& outcome)
{
  if (std::holds_alternative<stage3::Uncategorized>(outcome)) return std::string(graph::kUncategorized);
  const auto* linked = std::get_if<stage3::Linked>(&outcome);
  if (!linked || linked->relations.empty()) return {};
  const auto& r = linked->relations.front();
  return r.target.value_or("") + "|" + (r.stance ? std::string(to_string(*r.stance)) : "") + "|" +
         r.function.value_or("");
}

double linking_consistency(const std::map<std::string, std::vector<stage3::LinkOutcome>>& per_model)
{
  if (per_model.size() < 2) throw Error(ErrorCode::InvalidArgument, "linking consistency needs at least two models");
  const auto n = per_model.begin()->second.size();
  for (const auto& [model, outcomes] : per_model) {
    if (outcomes.size() != n) {
      throw Error(ErrorCode::Mismatch, "model '" + model + "' has " + std::to_string(outcomes.size()) +
                                           " outcomes, expected " + std::to_string(n));
    }
  }
  if (n == 0) throw Error(ErrorCode::InvalidArgument, "linking consistency over zero items");

  std::size_t consistent = 0;
  for (std::size_t i = 0; i < n; ++i) {
    std::map<std::string, std::size_t> seen;
    bool hit = false;
    for (const auto& [model, outcomes] : per_model) {
      const auto key = canonical_primary(outcomes[i]);
      if (!key.empty() && ++seen[key] >= 2) hit = true;
    }
    if (hit) ++consistent;
  }
  return static_cast<double>(consistent) / static_cast<double>(n);
}

const std::vector<std::string>& agreement_classes()
{
  static const std::vector<std::string> classes = [] {
    std::vector<std::string> c;
    for (auto label : kMicroIdeaLabels) c.emplace_back(to_string(label));
    c.emplace_back("filtered");
    return c;
  }();
  return classes;
}

AgreementReport agreement_report(const std::vector<stage1::Prediction>& predictions,
                                 const std::vector<corpus::GoldCoding>& gold, std::string prompt_version,
                                 std::string model_id, std::string source_run_id)
{
  std::map<std::string, std::string> gold_by_id;
  for (const auto& g : gold) gold_by_id.emplace(g.annotation_id, corpus::gold_label_name(g));

  AgreementReport r;
  r.prompt_version = std::move(prompt_version);
  r.model_id = std::move(model_id);
  r.source_run_id = std::move(source_run_id);

  std::vector<std::string> g_labels;
  std::vector<std::string> p_labels;
  std::set<std::string> predicted_ids;
  for (const auto& p : predictions) {
    predicted_ids.insert(p.annotation_id);
    const auto it = gold_by_id.find(p.annotation_id);
    if (it == gold_by_id.end()) {
      ++r.n_uncovered;
      continue;
    }
    g_labels.push_back(it->second);
    p_labels.push_back(p.label);

    const bool gold_filtered = it->second == "filtered";
    if (p.label == "invalid") ++r.filter.invalid;
    else if (p.label == "filtered") ++(gold_filtered ? r.filter.both_filtered : r.filter.model_only_filtered);
    else ++(gold_filtered ? r.filter.gold_only_filtered : r.filter.both_kept);
  }
  for (const auto& g : gold) {
    if (!predicted_ids.contains(g.annotation_id)) ++r.n_gold_unknown;
  }
  if (g_labels.empty()) throw Error(ErrorCode::Mismatch, "no annotation appears in both the run and the gold file");

  r.n_items = g_labels.size();
  const auto kappa = cohen_kappa(g_labels, p_labels);
  r.kappa = kappa.kappa;
  r.degenerate_marginals = kappa.degenerate_marginals;
  const auto f1 = f1_scores(g_labels, p_labels, agreement_classes());
  r.macro_f1 = f1.macro;
  r.weighted_f1 = f1.weighted;
  r.per_class_f1 = f1.per_class;

  const ConfusionMatrix matrix(matrix_classes(), g_labels, p_labels);
  r.matrix_classes = matrix.classes();
  for (std::size_t g = 0; g < r.matrix_classes.size(); ++g) {
    std::vector<std::size_t> row;
    for (std::size_t p = 0; p < r.matrix_classes.size(); ++p) row.push_back(matrix.count(g, p));
    r.matrix.push_back(std::move(row));
  }
  return r;
}

json AgreementReport::to_json() const
{
  json per_class = json::object();
  for (const auto& c : agreement_classes()) per_class[c] = per_class_f1.at(c);
  return {{"prompt_version", prompt_version},
          {"model_id", model_id},
          {"source_run_id", source_run_id},
          {"n_items", n_items},
          {"n_gold_unknown", n_gold_unknown},
          {"n_uncovered", n_uncovered},
          {"kappa", kappa},
          {"degenerate_marginals", degenerate_marginals},
          {"macro_f1", macro_f1},
          {"weighted_f1", weighted_f1},
          {"per_class_f1", std::move(per_class)},
          {"confusion_matrix", {{"classes", matrix_classes}, {"counts", matrix}}},
          {"filter_table",
           {{"both_filtered", filter.both_filtered},
            {"gold_only_filtered", filter.gold_only_filtered},
            {"model_only_filtered", filter.model_only_filtered},
            {"both_kept", filter.both_kept},
            {"invalid", filter.invalid}}}};
}

std::string AgreementReport::to_csv() const
{
  std::vector<std::string> header{"prompt_version", "model_id", "source_run_id", "n_items",
                                  "kappa",          "macro_f1", "weighted_f1"};
  std::vector<std::string> row{prompt_version,        model_id,
                               source_run_id,         std::to_string(n_items),
                               format_number(kappa),  format_number(macro_f1),
                               format_number(weighted_f1)};
  for (const auto& c : agreement_classes()) {
    header.push_back("f1_" + c);
    row.push_back(format_number(per_class_f1.at(c)));
  }
  return detail::csv_line(header) + detail::csv_line(row);
}

ConsistencyReport consistency_report(const std::vector<stage3::ModelOutcomes>& per_model)
{
  if (per_model.size() < 2) throw Error(ErrorCode::InvalidArgument, "consistency needs at least two models");
  const auto& first = per_model.front();
  ConsistencyReport r;
  r.scheme_id = first.scheme_id;
  r.n_items = first.outcomes.size();

  std::map<std::string, std::vector<stage3::LinkOutcome>> outcomes;
  for (const auto& m : per_model) {
    if (m.scheme_id != first.scheme_id) {
      throw Error(ErrorCode::Mismatch, "model '" + m.model_id + "' used scheme '" + m.scheme_id + "', model '" +
                                           first.model_id + "' used '" + first.scheme_id + "'");
    }
    if (m.micro_idea_ids != first.micro_idea_ids) {
      throw Error(ErrorCode::Mismatch,
                  "models '" + first.model_id + "' and '" + m.model_id + "' cover different micro-ideas");
    }
    if (m.outcomes.size() != m.micro_idea_ids.size()) {
      throw Error(ErrorCode::InvalidArgument, "model '" + m.model_id + "' has misaligned outcomes");
    }
    if (!outcomes.emplace(m.model_id, m.outcomes).second) {
      throw Error(ErrorCode::InvalidArgument, "model '" + m.model_id + "' appears twice");
    }
    r.model_ids.push_back(m.model_id);
    r.execution_rate_per_model[m.model_id] = execution_rate(m.outcomes);
  }
  r.linking_consistency = linking_consistency(outcomes);
  return r;
}

json ConsistencyReport::to_json() const
{
  json rates = json::object();
  for (const auto& [model, rate] : execution_rate_per_model) rates[model] = rate;
  return {{"scheme_id", scheme_id},
          {"model_ids", model_ids},
          {"n_items", n_items},
          {"linking_consistency", linking_consistency},
          {"execution_rate_per_model", std::move(rates)}};
}

std::string ConsistencyReport::to_csv() const
{
  std::string out = detail::csv_line({"scheme_id", "model_id", "execution_rate", "linking_consistency", "n_items"});
  for (const auto& m : model_ids) {
    out += detail::csv_line({scheme_id, m, format_number(execution_rate_per_model.at(m)),
                             format_number(linking_consistency), std::to_string(n_items)});
  }
  return out;
}

std::string format_number(double value)
{
  char buf[64];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, value);
  if (ec != std::errc{}) throw Error(ErrorCode::Internal, "number formatting failed");
  return std::string(buf, end);
}

}  // namespace ksg::eval
