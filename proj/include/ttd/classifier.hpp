#pragma once

// Prototype (global) classification and the LSH vote used for local
// decisions. Known prototypes are frozen after seeding; Seen prototypes move
// by EMA. Ties everywhere resolve Known before Seen, then lower id.

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ttd/error.hpp"
#include "ttd/label.hpp"
#include "ttd/memory.hpp"

namespace ttd {

struct Prototype {
  Label label;
  std::vector<double> vector;
  std::uint64_t update_count = 0;
};

using PrototypeBank = std::map<Label, Prototype>;

enum class Route : std::uint8_t { prototype, lsh_vote, novel, capped_fallback };

inline const char* to_string(Route route) {
  switch (route) {
    case Route::prototype: return "prototype";
    case Route::lsh_vote: return "lsh_vote";
    case Route::novel: return "novel";
    default: return "capped_fallback";
  }
}

struct PredictionRecord {
  std::uint64_t step = 0;
  std::optional<std::int32_t> ground_truth;  // evaluation only
  Label predicted = Label::known(0);
  double confidence = 0.0;  // prototype-stage u, whatever the route
  Route route = Route::prototype;
};

// Vote outcome over a candidate set; absence means the novel branch fired.
struct VoteStats {
  Label label = Label::known(0);
  std::size_t support = 0;
  double mean_distance = 0.0;
};

using LshDecision = std::optional<VoteStats>;  // nullopt == Novel

namespace detail {

inline double cosine(const std::vector<double>& prototype, const FeatureVector& feature,
                     double feature_norm) {
  double dot = 0.0, norm2 = 0.0;
  for (std::size_t i = 0; i < prototype.size(); ++i) {
    dot += prototype[i] * feature[i];
    norm2 += prototype[i] * prototype[i];
  }
  const double denom = std::sqrt(norm2) * feature_norm;
  return denom > 0.0 ? dot / denom : -1.0;
}

inline double feature_norm(const FeatureVector& feature) {
  double norm2 = 0.0;
  for (float x : feature) {
    if (!std::isfinite(x))
      throw Error(ErrorCode::invalid_feature, "feature has non-finite component");
    norm2 += static_cast<double>(x) * static_cast<double>(x);
  }
  return std::sqrt(norm2);
}

inline double euclidean(const FeatureVector& a, const FeatureVector& b) {
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double diff = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    sum += diff * diff;
  }
  return std::sqrt(sum);
}

}  // namespace detail

// Global classifier: label of the prototype with maximal cosine similarity,
// plus that maximum as the confidence u. Map order supplies the tie-break.
inline std::pair<Label, double> prototype_predict(const PrototypeBank& prototypes,
                                                  const FeatureVector& feature) {
  if (prototypes.empty())
    throw Error(ErrorCode::invalid_argument, "no prototypes available");
  const double norm = detail::feature_norm(feature);
  if (norm <= 0.0)
    throw Error(ErrorCode::invalid_feature, "zero-norm feature");

  const Prototype* best = nullptr;
  double best_sim = 0.0;
  for (const auto& [label, prototype] : prototypes) {
    const double sim = detail::cosine(prototype.vector, feature, norm);
    if (best == nullptr || sim > best_sim) {
      best = &prototype;
      best_sim = sim;
    }
  }
  return {best->label, best_sim};
}

// EMA step for a Seen prototype: vector <- alpha * vector + (1 - alpha) * f.
inline void ema_update(Prototype& prototype, const FeatureVector& feature, double alpha) {
  if (prototype.label.is_known())
    throw Error(ErrorCode::frozen_prototype, "known prototypes are never updated");
  if (alpha < 0.0 || alpha > 1.0)
    throw Error(ErrorCode::invalid_argument, "alpha must lie in [0, 1]");
  if (feature.size() != prototype.vector.size())
    throw Error(ErrorCode::invalid_argument, "feature dimension mismatch");
  for (std::size_t i = 0; i < feature.size(); ++i)
    prototype.vector[i] = alpha * prototype.vector[i] + (1.0 - alpha) * feature[i];
  prototype.update_count += 1;
}

// Majority vote over the k nearest candidates by Euclidean distance. Count
// ties fall to the label with the smallest average voter distance, then to
// label order. Returns nullopt when there are no candidates at all.
inline LshDecision vote_nearest(const std::vector<const MemoryEntry*>& candidates,
                                const FeatureVector& feature, std::size_t k_vote,
                                std::uint64_t exclude_seq = UINT64_MAX) {
  struct Scored {
    double distance;
    const MemoryEntry* entry;
  };
  std::vector<Scored> scored;
  scored.reserve(candidates.size());
  for (const MemoryEntry* entry : candidates) {
    if (entry->seq == exclude_seq) continue;
    scored.push_back({detail::euclidean(feature, entry->feature), entry});
  }
  if (scored.empty()) return std::nullopt;

  std::sort(scored.begin(), scored.end(), [](const Scored& a, const Scored& b) {
    if (a.distance != b.distance) return a.distance < b.distance;
    return a.entry->seq < b.entry->seq;
  });
  if (k_vote > 0 && scored.size() > k_vote) scored.resize(k_vote);

  struct Tally {
    std::size_t count = 0;
    double distance_sum = 0.0;
  };
  std::map<Label, Tally> tallies;
  for (const Scored& s : scored) {
    Tally& tally = tallies[s.entry->label];
    tally.count += 1;
    tally.distance_sum += s.distance;
  }

  VoteStats winner;
  bool first = true;
  double winner_mean = 0.0;
  for (const auto& [label, tally] : tallies) {
    const double mean = tally.distance_sum / static_cast<double>(tally.count);
    const bool better =
        first || tally.count > winner.support ||
        (tally.count == winner.support && mean < winner_mean);
    if (better) {
      winner = {label, tally.count, mean};
      winner_mean = mean;
      first = false;
    }
  }
  return winner;
}

// Sequential Seen-id allocation with the discoverable-class cap. In oracle
// mode the id is keyed to the sample's ground-truth class, so rediscoveries
// of the same true class reuse the existing id.
class SeenAllocator {
 public:
  struct Allocation {
    Label label;
    bool fresh;  // false when an oracle mapping was reused
  };

  SeenAllocator(std::int64_t cap, bool oracle_mode) : cap_(cap), oracle_(oracle_mode) {}

  std::optional<Allocation> allocate(std::optional<std::int32_t> ground_truth) {
    if (oracle_ && ground_truth.has_value()) {
      auto it = oracle_map_.find(*ground_truth);
      if (it != oracle_map_.end()) return Allocation{Label::seen(it->second), false};
    }
    if (cap_ >= 0 && allocated_ >= cap_) return std::nullopt;
    const std::int32_t id = next_id_++;
    allocated_ += 1;
    if (oracle_ && ground_truth.has_value()) oracle_map_[*ground_truth] = id;
    return Allocation{Label::seen(id), true};
  }

  std::int64_t allocated() const noexcept { return allocated_; }
  std::int32_t next_id() const noexcept { return next_id_; }
  std::int64_t cap() const noexcept { return cap_; }
  bool oracle_mode() const noexcept { return oracle_; }
  const std::map<std::int32_t, std::int32_t>& oracle_map() const noexcept { return oracle_map_; }

  // Snapshot restore.
  void restore(std::int32_t next_id, std::map<std::int32_t, std::int32_t> oracle_map) {
    next_id_ = next_id;
    allocated_ = next_id - 1;
    oracle_map_ = std::move(oracle_map);
  }

 private:
  std::int64_t cap_;
  bool oracle_;
  std::int32_t next_id_ = 1;
  std::int64_t allocated_ = 0;
  std::map<std::int32_t, std::int32_t> oracle_map_;
};

}  // namespace ttd
