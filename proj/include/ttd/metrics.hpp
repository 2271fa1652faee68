#pragma once

// Evaluation metrics. KA/KF cover the known classes; TA/TE/CA/CE are the
// agreement metrics over discovered classes; HCA/ARI/NMI/VM are the classic
// clustering metrics computed post hoc. KA/TA/TE/CA/CE are macro averages
// (expectations over classes or clusters), TE/CE use base-2 entropy, NMI/VM
// use natural logs since their ratios are base-invariant. Groups with no
// samples are excluded from the averages; metrics whose groups are all empty
// are reported absent rather than zero.

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <vector>

#include "ttd/error.hpp"
#include "ttd/hungarian.hpp"
#include "ttd/label.hpp"

namespace ttd {

struct LabeledOutcome {
  std::int32_t true_class = 0;
  Label predicted = Label::known(0);
};

class ContingencyTable {
 public:
  explicit ContingencyTable(std::span<const LabeledOutcome> outcomes) {
    for (const LabeledOutcome& outcome : outcomes) {
      counts_[outcome.true_class][outcome.predicted] += 1;
      true_marginal_[outcome.true_class] += 1;
      predicted_marginal_[outcome.predicted] += 1;
      total_ += 1;
    }
  }

  const std::map<std::int32_t, std::map<Label, std::uint64_t>>& counts() const {
    return counts_;
  }
  const std::map<std::int32_t, std::uint64_t>& true_marginal() const { return true_marginal_; }
  const std::map<Label, std::uint64_t>& predicted_marginal() const {
    return predicted_marginal_;
  }
  std::uint64_t total() const { return total_; }

 private:
  std::map<std::int32_t, std::map<Label, std::uint64_t>> counts_;
  std::map<std::int32_t, std::uint64_t> true_marginal_;
  std::map<Label, std::uint64_t> predicted_marginal_;
  std::uint64_t total_ = 0;
};

namespace detail {

template <typename CountMap>
inline double entropy_bits(const CountMap& counts, std::uint64_t total) {
  double entropy = 0.0;
  for (const auto& [key, count] : counts) {
    if (count == 0) continue;
    const double p = static_cast<double>(count) / static_cast<double>(total);
    entropy -= p * std::log2(p);
  }
  return entropy;
}

inline double choose2(double n) { return n * (n - 1.0) / 2.0; }

}  // namespace detail

// Macro accuracy over known classes: mean over classes (with >= 1 sample) of
// the fraction predicted exactly Known(c). Callers pass outcomes already
// restricted to ground-truth-known samples.
inline std::optional<double> known_accuracy(std::span<const LabeledOutcome> outcomes) {
  std::map<std::int32_t, std::pair<std::uint64_t, std::uint64_t>> per_class;  // correct, total
  for (const LabeledOutcome& outcome : outcomes) {
    auto& [correct, total] = per_class[outcome.true_class];
    total += 1;
    if (outcome.predicted == Label::known(outcome.true_class)) correct += 1;
  }
  if (per_class.empty()) return std::nullopt;
  double sum = 0.0;
  for (const auto& [c, pair] : per_class)
    sum += static_cast<double>(pair.first) / static_cast<double>(pair.second);
  return sum / static_cast<double>(per_class.size());
}

// KF = KA_post - KA_pre; negative values mean forgetting.
inline double known_forgetting(double ka_pre, double ka_post) { return ka_post - ka_pre; }

struct AgreementMetrics {
  std::optional<double> ta, te, ca, ce;
};

// TA/TE average over true unknown classes, CA/CE over predicted Seen
// clusters. The TA maximum ranges over Seen predictions only and the CA
// maximum over unknown true classes only, per their definitions; the
// entropies cover each group's full label distribution.
inline AgreementMetrics agreement_metrics(std::span<const LabeledOutcome> outcomes,
                                          const std::set<std::int32_t>& known_classes) {
  std::map<std::int32_t, std::map<Label, std::uint64_t>> by_true;
  std::map<Label, std::map<std::int32_t, std::uint64_t>> by_cluster;
  std::map<std::int32_t, std::uint64_t> true_totals;
  std::map<Label, std::uint64_t> cluster_totals;

  for (const LabeledOutcome& outcome : outcomes) {
    if (!known_classes.count(outcome.true_class)) {
      by_true[outcome.true_class][outcome.predicted] += 1;
      true_totals[outcome.true_class] += 1;
    }
    if (outcome.predicted.is_seen()) {
      by_cluster[outcome.predicted][outcome.true_class] += 1;
      cluster_totals[outcome.predicted] += 1;
    }
  }

  AgreementMetrics metrics;
  if (!by_true.empty()) {
    double ta = 0.0, te = 0.0;
    for (const auto& [c, preds] : by_true) {
      const double total = static_cast<double>(true_totals.at(c));
      std::uint64_t best = 0;
      for (const auto& [label, count] : preds)
        if (label.is_seen() && count > best) best = count;
      ta += static_cast<double>(best) / total;
      te += detail::entropy_bits(preds, true_totals.at(c));
    }
    ta /= static_cast<double>(by_true.size());
    te /= static_cast<double>(by_true.size());
    metrics.ta = ta;
    metrics.te = te;
  }
  if (!by_cluster.empty()) {
    double ca = 0.0, ce = 0.0;
    for (const auto& [q, trues] : by_cluster) {
      const double total = static_cast<double>(cluster_totals.at(q));
      std::uint64_t best = 0;
      for (const auto& [c, count] : trues)
        if (!known_classes.count(c) && count > best) best = count;
      ca += static_cast<double>(best) / total;
      ce += detail::entropy_bits(trues, cluster_totals.at(q));
    }
    ca /= static_cast<double>(by_cluster.size());
    ce /= static_cast<double>(by_cluster.size());
    metrics.ca = ca;
    metrics.ce = ce;
  }
  return metrics;
}

struct NcdMetrics {
  double hca = 0.0;
  double ari = 0.0;
  double nmi = 0.0;
  double vm = 0.0;
};

// Hungarian cluster accuracy: optimal one-to-one cluster-to-class map that
// maximizes matched counts (min-cost assignment on negated counts).
inline double hungarian_cluster_accuracy(const ContingencyTable& table) {
  std::vector<Label> clusters;
  for (const auto& [label, count] : table.predicted_marginal()) clusters.push_back(label);
  std::vector<std::int32_t> classes;
  for (const auto& [c, count] : table.true_marginal()) classes.push_back(c);

  std::vector<std::vector<double>> cost(clusters.size(),
                                        std::vector<double>(classes.size(), 0.0));
  for (std::size_t i = 0; i < clusters.size(); ++i) {
    for (std::size_t j = 0; j < classes.size(); ++j) {
      auto row = table.counts().find(classes[j]);
      auto cell = row->second.find(clusters[i]);
      if (cell != row->second.end()) cost[i][j] = -static_cast<double>(cell->second);
    }
  }

  const Assignment assignment = hungarian_assign(cost);
  double matched = 0.0;
  for (std::size_t i = 0; i < clusters.size(); ++i) {
    const auto j = static_cast<std::size_t>(assignment.column_of_row[i]);
    if (j < classes.size()) matched -= cost[i][j];
  }
  return matched / static_cast<double>(table.total());
}

inline NcdMetrics ncd_metrics(std::span<const LabeledOutcome> outcomes) {
  if (outcomes.empty())
    throw Error(ErrorCode::invalid_argument, "ncd metrics need at least one outcome");
  const ContingencyTable table(outcomes);
  const double n = static_cast<double>(table.total());

  NcdMetrics metrics;
  metrics.hca = hungarian_cluster_accuracy(table);

  // Adjusted Rand index via pair counting. The degenerate zero-denominator
  // cases (both partitions trivial) count as perfect agreement.
  double sum_cells = 0.0, sum_true = 0.0, sum_pred = 0.0;
  for (const auto& [c, preds] : table.counts())
    for (const auto& [label, count] : preds)
      sum_cells += detail::choose2(static_cast<double>(count));
  for (const auto& [c, count] : table.true_marginal())
    sum_true += detail::choose2(static_cast<double>(count));
  for (const auto& [label, count] : table.predicted_marginal())
    sum_pred += detail::choose2(static_cast<double>(count));
  const double pairs = detail::choose2(n);
  const double expected = pairs > 0.0 ? sum_true * sum_pred / pairs : 0.0;
  const double maximum = 0.5 * (sum_true + sum_pred);
  metrics.ari = maximum - expected == 0.0
                    ? 1.0
                    : (sum_cells - expected) / (maximum - expected);

  // Entropies in nats for NMI and V-Measure.
  double h_true = 0.0, h_pred = 0.0;
  for (const auto& [c, count] : table.true_marginal()) {
    const double p = static_cast<double>(count) / n;
    h_true -= p * std::log(p);
  }
  for (const auto& [label, count] : table.predicted_marginal()) {
    const double p = static_cast<double>(count) / n;
    h_pred -= p * std::log(p);
  }

  if (h_true <= 0.0 && h_pred <= 0.0) {
    // Both sides are a single cluster covering everything: identical.
    metrics.nmi = 1.0;
    metrics.vm = 1.0;
    return metrics;
  }
  if (h_true <= 0.0 || h_pred <= 0.0) {
    metrics.nmi = 0.0;
    metrics.vm = 0.0;
    return metrics;
  }

  double mutual = 0.0;
  for (const auto& [c, preds] : table.counts()) {
    const double pc = static_cast<double>(table.true_marginal().at(c)) / n;
    for (const auto& [label, count] : preds) {
      const double joint = static_cast<double>(count) / n;
      const double pk = static_cast<double>(table.predicted_marginal().at(label)) / n;
      mutual += joint * std::log(joint / (pc * pk));
    }
  }

  metrics.nmi = 2.0 * mutual / (h_true + h_pred);
  const double homogeneity = 1.0 - (h_true - mutual) / h_true;
  const double completeness = 1.0 - (h_pred - mutual) / h_pred;
  metrics.vm = homogeneity + completeness > 0.0
                   ? 2.0 * homogeneity * completeness / (homogeneity + completeness)
                   : 0.0;
  return metrics;
}

}  // namespace ttd
