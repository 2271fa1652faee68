#pragma once

// Hash memory: per-class bounded buffers (reservoir sampling, Vitter's
// algorithm R) plus the global bucket index keyed by HashKey. Known-class
// buffers are frozen after seeding; only labels of Seen entries ever change
// (self-correction), features are immutable once stored.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <vector>

#include "ttd/error.hpp"
#include "ttd/hashing.hpp"
#include "ttd/label.hpp"

namespace ttd {

struct MemoryEntry {
  HashKey key;
  FeatureVector feature;
  Label label;
  std::uint64_t seq = 0;
};

enum class InsertOutcome : std::uint8_t { stored, replaced, rejected };

struct InsertResult {
  InsertOutcome outcome;
  std::optional<MemoryEntry> evicted;
};

class HashMemory {
 public:
  struct ClassBuffer {
    std::vector<std::uint64_t> slots;  // entry seqs, at most capacity
    std::uint64_t stream_count = 0;    // candidate insertions observed
    bool frozen = false;
  };

  struct Bucket {
    std::vector<std::uint64_t> members;  // entry seqs in insertion order
    std::vector<double> sum;             // incremental component sums
  };

  HashMemory(std::size_t dim, std::size_t capacity_per_class)
      : dim_(dim), capacity_(capacity_per_class) {
    if (dim_ == 0 || capacity_ == 0)
      throw Error(ErrorCode::invalid_argument, "memory needs dim >= 1 and capacity >= 1");
  }

  std::size_t dim() const noexcept { return dim_; }
  std::size_t capacity() const noexcept { return capacity_; }
  std::size_t size() const noexcept { return entries_.size(); }
  std::uint64_t next_seq() const noexcept { return next_seq_; }

  const std::map<Label, ClassBuffer>& buffers() const noexcept { return buffers_; }
  const std::map<HashKey, Bucket>& buckets() const noexcept { return buckets_; }
  const std::map<std::uint64_t, MemoryEntry>& entries() const noexcept { return entries_; }

  const MemoryEntry& entry(std::uint64_t seq) const { return entries_.at(seq); }

  // Seeds one known-class buffer and freezes it. When more than capacity
  // features arrive, a uniform subset is kept via reservoir sampling over the
  // input order; retained features are stored in their original order.
  void seed_class(Label label, const std::vector<FeatureVector>& features,
                  const DirectionBasis& basis, std::mt19937_64& rng) {
    if (!label.is_known())
      throw Error(ErrorCode::invalid_argument, "seed_class expects a known label");
    if (buffers_.count(label))
      throw Error(ErrorCode::invalid_argument, "class already seeded");

    std::vector<std::size_t> kept;
    kept.reserve(std::min(features.size(), capacity_));
    for (std::size_t i = 0; i < features.size(); ++i) {
      if (kept.size() < capacity_) {
        kept.push_back(i);
      } else {
        std::uniform_int_distribution<std::uint64_t> pick(0, i);
        const std::uint64_t j = pick(rng);
        if (j < capacity_) kept[static_cast<std::size_t>(j)] = i;
      }
    }
    std::sort(kept.begin(), kept.end());

    ClassBuffer& buffer = buffers_[label];
    buffer.stream_count = features.size();
    for (std::size_t i : kept) {
      if (features[i].size() != dim_)
        throw Error(ErrorCode::invalid_argument, "seed feature dimension mismatch");
      MemoryEntry entry{hash_feature(basis, features[i]), features[i], label, next_seq_++};
      buffer.slots.push_back(entry.seq);
      attach_to_bucket(entry);
      entries_.emplace(entry.seq, std::move(entry));
    }
    buffer.frozen = true;
  }

  // Reservoir insert into a Seen-class buffer (created on first use). The
  // class's stream count is incremented first, so item t replaces a slot with
  // probability K/t.
  InsertResult insert(const HashKey& key, const FeatureVector& feature, Label label,
                      std::mt19937_64& rng) {
    if (!label.is_seen())
      throw Error(ErrorCode::frozen_buffer, "known-class buffers are frozen");
    if (feature.size() != dim_)
      throw Error(ErrorCode::invalid_argument, "feature dimension mismatch");

    ClassBuffer& buffer = buffers_[label];
    buffer.stream_count += 1;

    if (buffer.slots.size() < capacity_) {
      MemoryEntry entry{key, feature, label, next_seq_++};
      buffer.slots.push_back(entry.seq);
      attach_to_bucket(entry);
      entries_.emplace(entry.seq, std::move(entry));
      return {InsertOutcome::stored, std::nullopt};
    }

    std::uniform_int_distribution<std::uint64_t> pick(0, buffer.stream_count - 1);
    const std::uint64_t j = pick(rng);
    if (j >= capacity_) return {InsertOutcome::rejected, std::nullopt};

    const std::uint64_t old_seq = buffer.slots[static_cast<std::size_t>(j)];
    MemoryEntry evicted = entries_.at(old_seq);
    detach_from_bucket(evicted);
    entries_.erase(old_seq);

    MemoryEntry entry{key, feature, label, next_seq_++};
    buffer.slots[static_cast<std::size_t>(j)] = entry.seq;
    attach_to_bucket(entry);
    entries_.emplace(entry.seq, std::move(entry));
    return {InsertOutcome::replaced, std::move(evicted)};
  }

  // Exact-match bucket query: entries whose key equals the query key.
  std::vector<const MemoryEntry*> query_bucket(const HashKey& key) const {
    std::vector<const MemoryEntry*> result;
    auto it = buckets_.find(key);
    if (it == buckets_.end()) return result;
    result.reserve(it->second.members.size());
    for (std::uint64_t seq : it->second.members) result.push_back(&entries_.at(seq));
    return result;
  }

  std::size_t bucket_occupancy(const HashKey& key) const {
    auto it = buckets_.find(key);
    return it == buckets_.end() ? 0 : it->second.members.size();
  }

  // Target bucket plus its top-k neighbor buckets ranked by descending cosine
  // between unit-normalized bucket means. An empty target is ranked against
  // the query feature's own direction when one is supplied. Similarity ties
  // break on lexicographic key order.
  std::vector<const MemoryEntry*> joint_bucket(const HashKey& key, std::size_t k_buckets,
                                               const FeatureVector* query_feature = nullptr,
                                               bool band_restricted = false) const {
    std::vector<const MemoryEntry*> result = query_bucket(key);
    if (k_buckets == 0) return result;

    std::vector<double> reference;
    auto target = buckets_.find(key);
    if (target != buckets_.end() && !target->second.members.empty()) {
      reference = unit_mean(target->second);
    } else if (query_feature != nullptr) {
      reference.assign(query_feature->begin(), query_feature->end());
      double norm2 = 0.0;
      for (double x : reference) norm2 += x * x;
      if (norm2 > 0.0)
        for (double& x : reference) x /= std::sqrt(norm2);
    } else {
      return result;  // no direction to rank against
    }

    std::vector<std::pair<double, const HashKey*>> ranked;
    for (const auto& [bucket_key, bucket] : buckets_) {
      if (bucket_key == key) continue;
      if (band_restricted && bucket_key.norm_band != key.norm_band) continue;
      ranked.emplace_back(similarity(reference, bucket), &bucket_key);
    }
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
      if (a.first != b.first) return a.first > b.first;
      return *a.second < *b.second;
    });

    const std::size_t take = std::min(k_buckets, ranked.size());
    for (std::size_t i = 0; i < take; ++i) {
      const Bucket& bucket = buckets_.at(*ranked[i].second);
      for (std::uint64_t seq : bucket.members) result.push_back(&entries_.at(seq));
    }
    return result;
  }

  // Self-correction support. Relabeling moves the entry between buffers; the
  // feature and bucket membership stay put since the key never changes.
  void relabel(std::uint64_t seq, Label to) {
    MemoryEntry& entry = entries_.at(seq);
    if (!entry.label.is_seen() || !to.is_seen())
      throw Error(ErrorCode::frozen_buffer, "relabel applies to seen entries only");
    ClassBuffer& dest = buffers_[to];
    if (dest.slots.size() >= capacity_)
      throw Error(ErrorCode::invalid_argument, "destination buffer at capacity");
    remove_slot(entry.label, seq);
    dest.slots.push_back(seq);
    dest.stream_count += 1;
    entry.label = to;
  }

  void remove(std::uint64_t seq) {
    MemoryEntry& entry = entries_.at(seq);
    if (!entry.label.is_seen())
      throw Error(ErrorCode::frozen_buffer, "known entries cannot be removed");
    remove_slot(entry.label, seq);
    detach_from_bucket(entry);
    entries_.erase(seq);
  }

  std::size_t buffer_size(Label label) const {
    auto it = buffers_.find(label);
    return it == buffers_.end() ? 0 : it->second.slots.size();
  }

  // Test hook: recompute bucket membership from the entries alone.
  std::map<HashKey, std::vector<std::uint64_t>> rebuild_membership() const {
    std::map<HashKey, std::vector<std::uint64_t>> fresh;
    for (const auto& [seq, entry] : entries_) fresh[entry.key].push_back(seq);
    return fresh;
  }

  std::vector<double> bucket_mean(const HashKey& key) const {
    const Bucket& bucket = buckets_.at(key);
    std::vector<double> mean(bucket.sum);
    for (double& x : mean) x /= static_cast<double>(bucket.members.size());
    return mean;
  }

  // Restore path: install an entry verbatim (snapshot load). Buffer order and
  // stream counts are the caller's responsibility.
  void restore_entry(MemoryEntry entry) {
    attach_to_bucket(entry);
    next_seq_ = std::max(next_seq_, entry.seq + 1);
    entries_.emplace(entry.seq, std::move(entry));
  }

  std::map<Label, ClassBuffer>& mutable_buffers() noexcept { return buffers_; }

  void overwrite_bucket_sum(const HashKey& key, std::vector<double> sum) {
    auto it = buckets_.find(key);
    if (it != buckets_.end()) it->second.sum = std::move(sum);
  }

 private:
  void attach_to_bucket(const MemoryEntry& entry) {
    Bucket& bucket = buckets_[entry.key];
    if (bucket.sum.empty()) bucket.sum.assign(dim_, 0.0);
    bucket.members.push_back(entry.seq);
    for (std::size_t i = 0; i < dim_; ++i) bucket.sum[i] += entry.feature[i];
  }

  void detach_from_bucket(const MemoryEntry& entry) {
    auto it = buckets_.find(entry.key);
    Bucket& bucket = it->second;
    bucket.members.erase(std::find(bucket.members.begin(), bucket.members.end(), entry.seq));
    if (bucket.members.empty()) {
      buckets_.erase(it);
      return;
    }
    for (std::size_t i = 0; i < dim_; ++i) bucket.sum[i] -= entry.feature[i];
  }

  void remove_slot(Label label, std::uint64_t seq) {
    ClassBuffer& buffer = buffers_.at(label);
    buffer.slots.erase(std::find(buffer.slots.begin(), buffer.slots.end(), seq));
  }

  std::vector<double> unit_mean(const Bucket& bucket) const {
    std::vector<double> mean(bucket.sum);
    double norm2 = 0.0;
    for (double& x : mean) {
      x /= static_cast<double>(bucket.members.size());
      norm2 += x * x;
    }
    if (norm2 > 0.0) {
      const double norm = std::sqrt(norm2);
      for (double& x : mean) x /= norm;
    }
    return mean;
  }

  double similarity(const std::vector<double>& reference, const Bucket& bucket) const {
    std::vector<double> mean = unit_mean(bucket);
    double norm2 = 0.0;
    for (double x : mean) norm2 += x * x;
    if (norm2 < 1e-24) return -2.0;  // degenerate mean ranks last
    double dot = 0.0;
    for (std::size_t i = 0; i < dim_; ++i) dot += reference[i] * mean[i];
    return dot;
  }

  std::size_t dim_;
  std::size_t capacity_;
  std::uint64_t next_seq_ = 0;
  std::map<std::uint64_t, MemoryEntry> entries_;
  std::map<Label, ClassBuffer> buffers_;
  std::map<HashKey, Bucket> buckets_;
};

}  // namespace ttd
