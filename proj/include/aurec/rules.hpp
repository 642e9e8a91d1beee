#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>

#include "aurec/common.hpp"

namespace aurec {

struct RuleCondition {
  int slot = 0;          // AU slot index into the intensity vector
  bool at_least = true;  // true: value >= threshold, false: value <= threshold
  double threshold = 0.0;
};

struct Rule {
  std::vector<RuleCondition> conditions;  // conjunction, at most 4
  std::string label;

  bool matches(const Vec& x) const;
};

struct RuleList {
  std::vector<Rule> rules;  // first match wins
  std::string default_label;
};

struct RuleRow {
  Vec intensities;  // AU intensity vector, values in [0,1]
  std::string label;
};

struct RuleConfig {
  int max_conditions = 4;
  std::uint64_t seed = 1;
};

// Sequential covering in the RIPPER style: classes by increasing frequency;
// rules grown by FOIL gain on a 2/3 split and pruned on the remaining 1/3
// maximizing (p-n)/(p+n); rule addition stops once a new rule errs on more
// than half of the prune rows it covers. Covered rows are removed after
// each accepted rule. Single-class input yields just a default label.
RuleList induce_rules(const std::vector<RuleRow>& rows, const RuleConfig& config = {});

std::string classify_expression(const Vec& x, const RuleList& rl);

// One rule per line, e.g. "(AU4 >= 0.62) and (AU7 >= 0.31) => angry"; the
// final line is "=> <default>". Slot names come from au_names.
std::string serialize_rule_list(const RuleList& rl, const std::vector<std::string>& au_names);

struct ConfusionMatrix {
  std::vector<std::string> classes;
  Mat counts;  // rows true, columns predicted

  int index_of(const std::string& label) const;
};

struct ClassMetrics {
  std::optional<double> tpr;
  std::optional<double> fpr;
  std::optional<double> precision;
};

struct EvalMetrics {
  ConfusionMatrix matrix;
  std::vector<ClassMetrics> per_class;
  double accuracy = 0.0;
};

EvalMetrics confusion_and_metrics(const std::vector<std::pair<std::string, std::string>>& pairs,
                                  const std::vector<std::string>& classes);
// Metrics straight from an existing matrix (machine-readable injection path).
EvalMetrics metrics_from_matrix(const ConfusionMatrix& matrix);

// One-vs-rest AUC by the rank statistic, ties counted half.
double roc_area(const Vec& scores, const std::vector<bool>& is_positive);

struct AuRecognitionMetrics {
  double recognition_rate = 0.0;  // exact-set matches / total
  double false_alarm = 0.0;       // sequences predicting >= 1 spurious AU / total
};

AuRecognitionMetrics au_recognition_metrics(
    const std::vector<std::pair<std::set<int>, std::set<int>>>& true_predicted);

}  // namespace aurec
