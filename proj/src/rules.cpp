#include "aurec/rules.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>

namespace aurec {

bool Rule::matches(const Vec& x) const {
  for (const auto& cond : conditions) {
    const double v = x[cond.slot];
    if (cond.at_least ? v < cond.threshold : v > cond.threshold) return false;
  }
  return true;
}

namespace {

struct SplitCounts {
  int pos = 0;
  int neg = 0;
};

SplitCounts coverage(const Rule& rule, const std::vector<const RuleRow*>& rows,
                     const std::string& target) {
  SplitCounts c;
  for (const RuleRow* row : rows) {
    if (!rule.matches(row->intensities)) continue;
    if (row->label == target)
      ++c.pos;
    else
      ++c.neg;
  }
  return c;
}

double log2_ratio(int p, int n) {
  if (p == 0) return -1e9;  // no positives left: worst possible precision
  return std::log2(double(p) / (p + n));
}

// Candidate thresholds: midpoints between adjacent distinct values of the
// attribute over the grow rows.
Vec candidate_thresholds(const std::vector<const RuleRow*>& rows, int slot) {
  Vec values;
  values.reserve(rows.size());
  for (const RuleRow* row : rows) values.push_back(row->intensities[slot]);
  std::sort(values.begin(), values.end());
  values.erase(std::unique(values.begin(), values.end()), values.end());
  Vec mids;
  for (size_t i = 0; i + 1 < values.size(); ++i)
    mids.push_back(0.5 * (values[i] + values[i + 1]));
  return mids;
}

Rule grow_rule(const std::vector<const RuleRow*>& grow, const std::string& target,
               int max_conditions, int n_slots) {
  Rule rule;
  rule.label = target;
  std::vector<const RuleRow*> covered = grow;
  while (int(rule.conditions.size()) < max_conditions) {
    SplitCounts before = coverage(rule, covered, target);
    if (before.neg == 0) break;  // already pure
    const double base = log2_ratio(before.pos, before.neg);

    double best_gain = 0.0;
    RuleCondition best_cond;
    bool found = false;
    for (int slot = 0; slot < n_slots; ++slot) {
      for (double thr : candidate_thresholds(covered, slot)) {
        for (bool at_least : {true, false}) {
          Rule trial = rule;
          trial.conditions.push_back(RuleCondition{slot, at_least, thr});
          const SplitCounts after = coverage(trial, covered, target);
          if (after.pos == 0) continue;
          // FOIL information gain.
          const double gain = after.pos * (log2_ratio(after.pos, after.neg) - base);
          if (gain > best_gain + 1e-12) {
            best_gain = gain;
            best_cond = trial.conditions.back();
            found = true;
          }
        }
      }
    }
    if (!found) break;
    rule.conditions.push_back(best_cond);
    std::vector<const RuleRow*> next;
    for (const RuleRow* row : covered)
      if (rule.matches(row->intensities)) next.push_back(row);
    covered = std::move(next);
  }
  return rule;
}

// Prune value (p - n) / (p + n); rules covering nothing rank lowest.
double prune_value(const Rule& rule, const std::vector<const RuleRow*>& prune,
                   const std::string& target) {
  const SplitCounts c = coverage(rule, prune, target);
  if (c.pos + c.neg == 0) return -1.0;
  return double(c.pos - c.neg) / (c.pos + c.neg);
}

Rule prune_rule(Rule rule, const std::vector<const RuleRow*>& prune, const std::string& target) {
  // Drop trailing condition suffixes while that improves the prune metric.
  double best = prune_value(rule, prune, target);
  size_t best_len = rule.conditions.size();
  for (size_t len = rule.conditions.size(); len-- > 1;) {
    Rule trial = rule;
    trial.conditions.resize(len);
    const double v = prune_value(trial, prune, target);
    if (v > best + 1e-12) {
      best = v;
      best_len = len;
    }
  }
  rule.conditions.resize(best_len);
  return rule;
}

std::string majority_label(const std::vector<RuleRow>& rows) {
  std::map<std::string, int> counts;
  for (const auto& row : rows) ++counts[row.label];
  std::string best;
  int best_count = -1;
  for (const auto& [label, count] : counts)
    if (count > best_count) {
      best = label;
      best_count = count;
    }
  return best;
}

}  // namespace

RuleList induce_rules(const std::vector<RuleRow>& rows, const RuleConfig& config) {
  if (rows.empty()) throw data_error("induce_rules: empty input");
  const int n_slots = int(rows[0].intensities.size());
  for (const auto& row : rows)
    if (int(row.intensities.size()) != n_slots)
      throw data_error("induce_rules: inconsistent intensity dimensions");

  std::map<std::string, int> class_counts;
  for (const auto& row : rows) ++class_counts[row.label];

  RuleList rl;
  if (class_counts.size() == 1) {
    rl.default_label = rows[0].label;
    return rl;
  }

  // Classes by increasing frequency (stable on ties via map's name order).
  std::vector<std::string> ordered;
  for (const auto& [label, count] : class_counts) ordered.push_back(label);
  std::stable_sort(ordered.begin(), ordered.end(), [&](const std::string& a, const std::string& b) {
    return class_counts[a] < class_counts[b];
  });

  std::vector<RuleRow> working = rows;
  std::mt19937_64 rng(config.seed);
  for (const std::string& target : ordered) {
    for (;;) {
      int positives = 0;
      for (const auto& row : working)
        if (row.label == target) ++positives;
      if (positives == 0) break;

      // Stratified 2:1 grow/prune split of the working set, reshuffled for
      // every candidate rule.
      std::vector<const RuleRow*> grow, prune;
      {
        std::map<std::string, std::vector<const RuleRow*>> by_class;
        for (const auto& row : working) by_class[row.label].push_back(&row);
        for (auto& [label, members] : by_class) {
          std::shuffle(members.begin(), members.end(), rng);
          const size_t cut = (members.size() * 2 + 2) / 3;  // ceil(2/3)
          for (size_t i = 0; i < members.size(); ++i)
            (i < cut ? grow : prune).push_back(members[i]);
        }
      }

      Rule rule = grow_rule(grow, target, config.max_conditions, n_slots);
      if (rule.conditions.empty()) break;  // no informative condition found
      if (!prune.empty()) rule = prune_rule(std::move(rule), prune, target);

      // Stop when the rule errs on more than half of the prune rows it covers.
      const SplitCounts pc = coverage(rule, prune, target);
      if (pc.pos + pc.neg > 0 && pc.neg > pc.pos) break;

      rl.rules.push_back(rule);
      std::vector<RuleRow> remaining;
      for (const auto& row : working)
        if (!rule.matches(row.intensities)) remaining.push_back(row);
      if (remaining.size() == working.size()) break;  // no progress
      working = std::move(remaining);
    }
  }

  rl.default_label = working.empty() ? majority_label(rows) : majority_label(working);
  return rl;
}

std::string classify_expression(const Vec& x, const RuleList& rl) {
  for (const auto& rule : rl.rules)
    if (rule.matches(x)) return rule.label;
  return rl.default_label;
}

std::string serialize_rule_list(const RuleList& rl, const std::vector<std::string>& au_names) {
  std::string out;
  for (const auto& rule : rl.rules) {
    for (size_t i = 0; i < rule.conditions.size(); ++i) {
      const auto& cond = rule.conditions[i];
      if (i) out += " and ";
      out += "(" + au_names.at(cond.slot) + (cond.at_least ? " >= " : " <= ") +
             format_double(cond.threshold) + ")";
    }
    out += " => " + rule.label + "\n";
  }
  out += "=> " + rl.default_label + "\n";
  return out;
}

int ConfusionMatrix::index_of(const std::string& label) const {
  for (size_t i = 0; i < classes.size(); ++i)
    if (classes[i] == label) return int(i);
  throw data_error("label '" + label + "' not in class list");
}

EvalMetrics confusion_and_metrics(const std::vector<std::pair<std::string, std::string>>& pairs,
                                  const std::vector<std::string>& classes) {
  if (pairs.empty()) throw data_error("confusion_and_metrics: empty input");
  ConfusionMatrix matrix;
  matrix.classes = classes;
  matrix.counts = Mat(int(classes.size()), int(classes.size()));
  for (const auto& [truth, predicted] : pairs)
    matrix.counts(matrix.index_of(truth), matrix.index_of(predicted)) += 1.0;
  return metrics_from_matrix(matrix);
}

EvalMetrics metrics_from_matrix(const ConfusionMatrix& matrix) {
  const int c = int(matrix.classes.size());
  if (c == 0 || matrix.counts.rows != c || matrix.counts.cols != c)
    throw data_error("metrics_from_matrix: malformed matrix");
  EvalMetrics out;
  out.matrix = matrix;
  double total = 0.0, trace = 0.0;
  for (int i = 0; i < c; ++i)
    for (int j = 0; j < c; ++j) total += matrix.counts(i, j);
  if (total <= 0.0) throw data_error("metrics_from_matrix: empty matrix");
  for (int i = 0; i < c; ++i) trace += matrix.counts(i, i);
  out.accuracy = trace / total;

  for (int i = 0; i < c; ++i) {
    double row_sum = 0.0, col_sum = 0.0;
    for (int j = 0; j < c; ++j) {
      row_sum += matrix.counts(i, j);
      col_sum += matrix.counts(j, i);
    }
    ClassMetrics m;
    const double diag = matrix.counts(i, i);
    if (row_sum > 0.0) m.tpr = diag / row_sum;
    if (total - row_sum > 0.0) m.fpr = (col_sum - diag) / (total - row_sum);
    if (col_sum > 0.0) m.precision = diag / col_sum;
    out.per_class.push_back(m);
  }
  return out;
}

double roc_area(const Vec& scores, const std::vector<bool>& is_positive) {
  if (scores.size() != is_positive.size()) throw data_error("roc_area: size mismatch");
  size_t npos = 0, nneg = 0;
  for (bool p : is_positive) (p ? npos : nneg)++;
  if (npos == 0 || nneg == 0) throw data_error("roc_area: undefined AUC (single-class input)");

  // Mann-Whitney rank statistic with midranks for ties.
  std::vector<size_t> order(scores.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](size_t a, size_t b) { return scores[a] < scores[b]; });
  double rank_sum_pos = 0.0;
  size_t i = 0;
  while (i < order.size()) {
    size_t j = i;
    while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double midrank = 0.5 * double(i + j) + 1.0;  // ranks are 1-based
    for (size_t k = i; k <= j; ++k)
      if (is_positive[order[k]]) rank_sum_pos += midrank;
    i = j + 1;
  }
  return (rank_sum_pos - double(npos) * (npos + 1) / 2.0) / (double(npos) * nneg);
}

AuRecognitionMetrics au_recognition_metrics(
    const std::vector<std::pair<std::set<int>, std::set<int>>>& true_predicted) {
  if (true_predicted.empty()) throw data_error("au_recognition_metrics: empty input");
  int exact = 0, spurious = 0;
  for (const auto& [truth, predicted] : true_predicted) {
    if (predicted == truth) ++exact;
    bool extra = false;
    for (int au : predicted)
      if (!truth.count(au)) extra = true;
    if (extra) ++spurious;
  }
  AuRecognitionMetrics m;
  m.recognition_rate = double(exact) / true_predicted.size();
  m.false_alarm = double(spurious) / true_predicted.size();
  return m;
}

}  // namespace aurec
