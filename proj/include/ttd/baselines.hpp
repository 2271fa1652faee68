#pragma once

// Training-free thresholding baselines. They share the prototype bank, the
// EMA maintenance, and the discoverable-class cap with the main method, but
// keep no hash memory: novelty is a single scalar test per sample.

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <vector>

#include "ttd/classifier.hpp"
#include "ttd/error.hpp"
#include "ttd/label.hpp"

namespace ttd {

enum class BaselineKind : std::uint8_t { euclidean, cosine, magnitude, entropy };

inline const char* to_string(BaselineKind kind) {
  switch (kind) {
    case BaselineKind::euclidean: return "euclidean";
    case BaselineKind::cosine: return "cosine";
    case BaselineKind::magnitude: return "magnitude";
    default: return "entropy";
  }
}

struct BaselineParams {
  BaselineKind kind = BaselineKind::euclidean;
  double tau = 0.0;
  double temperature = 0.1;  // softmax temperature, entropy kind only
  double alpha_seen = 0.9;
  std::int64_t max_discoverable = -1;
  bool oracle_labels = false;
};

class BaselineEngine {
 public:
  BaselineEngine(BaselineParams params, std::size_t dim)
      : params_(params), dim_(dim),
        allocator_(params.max_discoverable, params.oracle_labels) {
    if (dim_ == 0) throw Error(ErrorCode::invalid_argument, "dim must be >= 1");
    if (!std::isfinite(params_.tau))
      throw Error(ErrorCode::invalid_argument, "tau must be finite");
    if (params_.temperature <= 0.0)
      throw Error(ErrorCode::invalid_argument, "temperature must be positive");
  }

  void seed_known(const std::vector<std::pair<std::int32_t, FeatureVector>>& labeled) {
    if (seeded_) throw Error(ErrorCode::invalid_argument, "baseline already seeded");
    std::map<std::int32_t, std::pair<std::vector<double>, std::size_t>> sums;
    for (const auto& [id, feature] : labeled) {
      if (feature.size() != dim_)
        throw Error(ErrorCode::invalid_argument, "seed feature dimension mismatch");
      auto& [sum, count] = sums[id];
      if (sum.empty()) sum.assign(dim_, 0.0);
      for (std::size_t i = 0; i < dim_; ++i) sum[i] += feature[i];
      count += 1;
    }
    for (auto& [id, acc] : sums) {
      for (double& x : acc.first) x /= static_cast<double>(acc.second);
      const Label label = Label::known(id);
      prototypes_.emplace(label, Prototype{label, std::move(acc.first), 0});
      known_ids_.insert(id);
    }
    seeded_ = true;
  }

  PredictionRecord step(const FeatureVector& feature, std::optional<std::int32_t> gt) {
    const Scored scored = evaluate(feature);
    step_count_ += 1;
    PredictionRecord rec;
    rec.step = step_count_;
    rec.ground_truth = gt;
    rec.confidence = scored.confidence;

    if (!scored.novel) {
      rec.predicted = assignment(scored);
      rec.route = Route::prototype;
      if (rec.predicted.is_seen())
        ema_update(prototypes_.at(rec.predicted), feature, params_.alpha_seen);
      return rec;
    }

    if (auto allocation = allocator_.allocate(gt); allocation.has_value()) {
      rec.predicted = allocation->label;
      if (allocation->fresh) {
        prototypes_.emplace(allocation->label,
                            Prototype{allocation->label,
                                      std::vector<double>(feature.begin(), feature.end()), 0});
        rec.route = Route::novel;
      } else {
        rec.route = Route::prototype;  // oracle reuse of an existing Seen id
        ema_update(prototypes_.at(allocation->label), feature, params_.alpha_seen);
      }
      return rec;
    }

    rec.predicted = assignment(scored);
    rec.route = Route::capped_fallback;
    if (rec.predicted.is_seen())
      ema_update(prototypes_.at(rec.predicted), feature, params_.alpha_seen);
    return rec;
  }

  // Pure inference: would-be-novel samples take the baseline's nearest
  // prototype instead of allocating.
  PredictionRecord predict_frozen(const FeatureVector& feature,
                                  std::optional<std::int32_t> gt,
                                  std::uint64_t step_number) const {
    const Scored scored = evaluate(feature);
    PredictionRecord rec;
    rec.step = step_number;
    rec.ground_truth = gt;
    rec.confidence = scored.confidence;
    rec.predicted = assignment(scored);
    rec.route = Route::prototype;
    return rec;
  }

  const PrototypeBank& prototypes() const noexcept { return prototypes_; }
  const SeenAllocator& allocator() const noexcept { return allocator_; }
  std::int64_t discovered_classes() const noexcept { return allocator_.allocated(); }
  const std::set<std::int32_t>& known_class_ids() const noexcept { return known_ids_; }
  bool seeded() const noexcept { return seeded_; }

 private:
  struct Scored {
    Label nearest_euclidean = Label::known(0);
    Label nearest_cosine = Label::known(0);
    double confidence = 0.0;
    double norm = 0.0;
    bool novel = false;
  };

  Scored evaluate(const FeatureVector& feature) const {
    if (!seeded_) throw Error(ErrorCode::invalid_argument, "baseline is not seeded");
    if (feature.size() != dim_)
      throw Error(ErrorCode::invalid_argument, "feature dimension mismatch");
    const double norm = detail::feature_norm(feature);
    const bool needs_cosine =
        params_.kind == BaselineKind::cosine || params_.kind == BaselineKind::entropy;
    if (norm <= 0.0 && needs_cosine)
      throw Error(ErrorCode::invalid_feature, "zero-norm feature");

    Scored scored;
    scored.norm = norm;
    scored.nearest_euclidean = prototypes_.begin()->first;
    scored.nearest_cosine = prototypes_.begin()->first;

    double max_cos = -1.0;
    double min_dist = 0.0;
    bool first = true;
    for (const auto& [label, prototype] : prototypes_) {
      double dist2 = 0.0;
      for (std::size_t i = 0; i < dim_; ++i) {
        const double diff = prototype.vector[i] - feature[i];
        dist2 += diff * diff;
      }
      const double dist = std::sqrt(dist2);
      if (first || dist < min_dist) {
        min_dist = dist;
        scored.nearest_euclidean = label;
      }
      if (norm > 0.0) {
        const double sim = detail::cosine(prototype.vector, feature, norm);
        if (first || sim > max_cos) {
          max_cos = sim;
          scored.nearest_cosine = label;
        }
      }
      first = false;
    }
    if (norm > 0.0) scored.confidence = max_cos;

    switch (params_.kind) {
      case BaselineKind::euclidean:
        scored.novel = min_dist > params_.tau;
        break;
      case BaselineKind::cosine:
        scored.novel = max_cos < params_.tau;
        break;
      case BaselineKind::magnitude:
        scored.novel = norm < params_.tau;
        break;
      case BaselineKind::entropy:
        scored.novel = softmax_entropy_bits(feature, norm) > params_.tau;
        break;
    }
    return scored;
  }

  // Non-novel assignment: the euclidean kind assigns by distance, the others
  // by cosine.
  Label assignment(const Scored& scored) const {
    if (params_.kind == BaselineKind::euclidean) return scored.nearest_euclidean;
    if (scored.norm <= 0.0)
      throw Error(ErrorCode::invalid_feature, "zero-norm feature");
    return scored.nearest_cosine;
  }

  double softmax_entropy_bits(const FeatureVector& feature, double norm) const {
    std::vector<double> logits;
    logits.reserve(prototypes_.size());
    double max_logit = -1e300;
    for (const auto& [label, prototype] : prototypes_) {
      const double logit = detail::cosine(prototype.vector, feature, norm) / params_.temperature;
      logits.push_back(logit);
      max_logit = std::max(max_logit, logit);
    }
    double z = 0.0;
    for (double& l : logits) {
      l = std::exp(l - max_logit);
      z += l;
    }
    double entropy = 0.0;
    for (double l : logits) {
      const double p = l / z;
      if (p > 0.0) entropy -= p * std::log2(p);
    }
    return entropy;
  }

  BaselineParams params_;
  std::size_t dim_;
  PrototypeBank prototypes_;
  SeenAllocator allocator_;
  std::set<std::int32_t> known_ids_;
  std::uint64_t step_count_ = 0;
  bool seeded_ = false;
};

}  // namespace ttd
