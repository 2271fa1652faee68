#pragma once

// The streaming engine: one step hashes the feature, gates on prototype
// confidence, and otherwise consults the LSH classifier over the hash
// memory. The novel branch fires when the target bucket holds fewer than
// min_occupancy entries; the vote itself runs over the joint bucket.

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <vector>

#include "ttd/bytes.hpp"
#include "ttd/classifier.hpp"
#include "ttd/error.hpp"
#include "ttd/hashing.hpp"
#include "ttd/label.hpp"
#include "ttd/memory.hpp"

namespace ttd {

struct EngineParams {
  std::size_t memory_capacity = 20;   // K entries per class
  std::size_t min_occupancy = 1;      // target-bucket occupancy below which a sample is novel
  std::size_t neighbor_buckets = 3;   // k in the joint bucket
  bool band_restricted = false;       // restrict neighbor buckets to the query's norm band
  double epsilon = 0.7;               // prototype-confidence boundary
  std::size_t vote_k = 10;            // nearest samples consulted by the vote
  double alpha_seen = 0.9;            // EMA factor for Seen prototypes
  std::int64_t max_discoverable = -1; // discoverable-class cap, < 0 = unbounded
  bool oracle_labels = false;         // key new ids to ground-truth classes
  std::uint64_t rng_seed = 1;
};

class TtdEngine {
 public:
  TtdEngine(EngineParams params, DirectionBasis basis)
      : params_(params),
        basis_(std::move(basis)),
        memory_(basis_.dim(), params.memory_capacity),
        allocator_(params.max_discoverable, params.oracle_labels),
        rng_(params.rng_seed) {}

  // Populates the known buffers and prototypes, then freezes them. The
  // prototype of each class is the mean of all its seed features; the buffer
  // keeps at most K of them, sampled uniformly.
  void seed_known(const std::vector<std::pair<std::int32_t, FeatureVector>>& labeled) {
    if (seeded_)
      throw Error(ErrorCode::invalid_argument, "engine already seeded");
    std::map<std::int32_t, std::vector<FeatureVector>> by_class;
    for (const auto& [id, feature] : labeled) {
      if (feature.size() != basis_.dim())
        throw Error(ErrorCode::invalid_argument, "seed feature dimension mismatch");
      by_class[id].push_back(feature);
    }
    for (const auto& [id, features] : by_class) {
      const Label label = Label::known(id);
      memory_.seed_class(label, features, basis_, rng_);
      Prototype prototype{label, std::vector<double>(basis_.dim(), 0.0), 0};
      for (const auto& f : features)
        for (std::size_t i = 0; i < f.size(); ++i) prototype.vector[i] += f[i];
      for (double& x : prototype.vector) x /= static_cast<double>(features.size());
      prototypes_.emplace(label, std::move(prototype));
      known_ids_.insert(id);
    }
    seeded_ = true;
  }

  // Local classifier: Novel when the target bucket is sparser than
  // min_occupancy, otherwise a top-k vote over the joint bucket.
  LshDecision lsh_predict(const FeatureVector& feature, const HashKey& key) const {
    if (memory_.bucket_occupancy(key) < params_.min_occupancy) return std::nullopt;
    const auto members = memory_.joint_bucket(key, params_.neighbor_buckets, &feature,
                                              params_.band_restricted);
    return vote_nearest(members, feature, params_.vote_k);
  }

  // Allocates the next Seen id (or reuses the oracle-keyed one), creating the
  // prototype from the sample and storing it in memory. nullopt = cap hit.
  std::optional<Label> allocate_new_class(const FeatureVector& feature, const HashKey& key,
                                          std::optional<std::int32_t> ground_truth) {
    auto allocation = allocator_.allocate(ground_truth);
    if (!allocation.has_value()) return std::nullopt;
    if (allocation->fresh) {
      Prototype prototype{allocation->label,
                          std::vector<double>(feature.begin(), feature.end()), 0};
      prototypes_.emplace(allocation->label, std::move(prototype));
      memory_.insert(key, feature, allocation->label, rng_);
    } else {
      assign_seen(allocation->label, feature, key);
    }
    last_allocation_fresh_ = allocation->fresh;
    return allocation->label;
  }

  PredictionRecord step(const FeatureVector& feature, std::optional<std::int32_t> gt) {
    require_seeded();
    step_count_ += 1;
    PredictionRecord rec;
    rec.step = step_count_;
    rec.ground_truth = gt;

    const HashKey key = hash_feature(basis_, feature);
    const auto [y_proto, u] = prototype_predict(prototypes_, feature);
    rec.confidence = u;

    if (u > params_.epsilon) {
      rec.predicted = y_proto;
      rec.route = Route::prototype;
      if (y_proto.is_seen()) assign_seen(y_proto, feature, key);
      return rec;
    }

    if (const LshDecision vote = lsh_predict(feature, key); vote.has_value()) {
      rec.predicted = vote->label;
      rec.route = Route::lsh_vote;
      if (vote->label.is_seen()) assign_seen(vote->label, feature, key);
      return rec;
    }

    if (const auto label = allocate_new_class(feature, key, gt); label.has_value()) {
      rec.predicted = *label;
      // Oracle reuse resolves the discovery to an already-known Seen id; only
      // fresh ids are reported on the novel route.
      rec.route = last_allocation_fresh_ ? Route::novel : Route::lsh_vote;
      return rec;
    }

    // Cap exhausted: best available label, vote winner first, else the
    // prototype pick.
    const auto members = memory_.joint_bucket(key, params_.neighbor_buckets, &feature,
                                              params_.band_restricted);
    const LshDecision fallback = vote_nearest(members, feature, params_.vote_k);
    rec.predicted = fallback.has_value() ? fallback->label : y_proto;
    rec.route = Route::capped_fallback;
    if (rec.predicted.is_seen()) assign_seen(rec.predicted, feature, key);
    return rec;
  }

  // Pure inference for the pre/post evaluation phases: no memory writes, no
  // prototype updates, no allocation; would-be-novel samples fall back to the
  // nearest prototype.
  PredictionRecord predict_frozen(const FeatureVector& feature,
                                  std::optional<std::int32_t> gt,
                                  std::uint64_t step_number) const {
    require_seeded();
    PredictionRecord rec;
    rec.step = step_number;
    rec.ground_truth = gt;

    const HashKey key = hash_feature(basis_, feature);
    const auto [y_proto, u] = prototype_predict(prototypes_, feature);
    rec.confidence = u;

    if (u > params_.epsilon) {
      rec.predicted = y_proto;
      rec.route = Route::prototype;
      return rec;
    }
    if (const LshDecision vote = lsh_predict(feature, key); vote.has_value()) {
      rec.predicted = vote->label;
      rec.route = Route::lsh_vote;
      return rec;
    }
    rec.predicted = y_proto;
    rec.route = Route::prototype;
    return rec;
  }

  const EngineParams& params() const noexcept { return params_; }
  const DirectionBasis& basis() const noexcept { return basis_; }
  const HashMemory& memory() const noexcept { return memory_; }
  HashMemory& memory() noexcept { return memory_; }
  const PrototypeBank& prototypes() const noexcept { return prototypes_; }
  const SeenAllocator& allocator() const noexcept { return allocator_; }
  std::mt19937_64& rng() noexcept { return rng_; }
  std::uint64_t step_count() const noexcept { return step_count_; }
  const std::set<std::int32_t>& known_class_ids() const noexcept { return known_ids_; }
  std::int64_t discovered_classes() const noexcept { return allocator_.allocated(); }
  bool seeded() const noexcept { return seeded_; }

  // Hash of everything the known-state immutability invariant covers.
  std::uint64_t content_hash_known() const {
    bytes::Fnv1a hasher;
    for (const auto& [label, prototype] : prototypes_) {
      if (!label.is_known()) continue;
      hash_prototype(hasher, prototype);
    }
    for (const auto& [label, buffer] : memory_.buffers()) {
      if (!label.is_known()) continue;
      hash_buffer(hasher, label, buffer);
    }
    return hasher.digest();
  }

  // Hash of the full mutable state (memory, prototypes, next Seen id).
  std::uint64_t content_hash_state() const {
    bytes::Fnv1a hasher;
    for (const auto& [label, prototype] : prototypes_) hash_prototype(hasher, prototype);
    for (const auto& [label, buffer] : memory_.buffers()) hash_buffer(hasher, label, buffer);
    hasher.update_value(allocator_.next_id());
    return hasher.digest();
  }

 private:
  friend void save_snapshot(const TtdEngine& engine, std::ostream& out);
  friend TtdEngine load_snapshot(std::istream& in);

  void require_seeded() const {
    if (!seeded_)
      throw Error(ErrorCode::invalid_argument, "engine is not seeded");
  }

  void assign_seen(Label label, const FeatureVector& feature, const HashKey& key) {
    ema_update(prototypes_.at(label), feature, params_.alpha_seen);
    memory_.insert(key, feature, label, rng_);
  }

  void hash_prototype(bytes::Fnv1a& hasher, const Prototype& prototype) const {
    hasher.update_value(static_cast<std::uint32_t>(prototype.label.kind()));
    hasher.update_value(prototype.label.id());
    hasher.update_value(prototype.update_count);
    hasher.update(prototype.vector.data(), prototype.vector.size() * sizeof(double));
  }

  void hash_buffer(bytes::Fnv1a& hasher, Label label,
                   const HashMemory::ClassBuffer& buffer) const {
    hasher.update_value(static_cast<std::uint32_t>(label.kind()));
    hasher.update_value(label.id());
    hasher.update_value(buffer.stream_count);
    for (std::uint64_t seq : buffer.slots) {
      const MemoryEntry& entry = memory_.entry(seq);
      hasher.update_value(entry.seq);
      hasher.update(entry.feature.data(), entry.feature.size() * sizeof(float));
    }
  }

  EngineParams params_;
  DirectionBasis basis_;
  HashMemory memory_;
  PrototypeBank prototypes_;
  SeenAllocator allocator_;
  std::mt19937_64 rng_;
  std::set<std::int32_t> known_ids_;
  std::uint64_t step_count_ = 0;
  bool seeded_ = false;
  bool last_allocation_fresh_ = false;
};

}  // namespace ttd
