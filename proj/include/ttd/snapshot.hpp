#pragma once

// Engine state snapshots. Binary layout (little-endian): magic "TTDS",
// version u16, engine parameters, basis (parameters plus the direction
// matrix, which PCA bases cannot regenerate from the seed alone), class
// buffers with entries as (label tag+id, seq, feature float32s), bucket sums,
// prototypes, the Seen allocator, the step counter, and the RNG state.
// HashKeys are recomputed from the basis on load.

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "ttd/bytes.hpp"
#include "ttd/engine.hpp"
#include "ttd/error.hpp"

namespace ttd {

inline constexpr char kSnapshotMagic[4] = {'T', 'T', 'D', 'S'};
inline constexpr std::uint16_t kSnapshotVersion = 1;

namespace detail {

inline void write_label(std::ostream& out, Label label) {
  bytes::write_raw<std::uint32_t>(out, static_cast<std::uint32_t>(label.kind()));
  bytes::write_raw<std::uint32_t>(out, static_cast<std::uint32_t>(label.id()));
}

inline Label read_label(std::istream& in) {
  const auto kind = bytes::read_raw<std::uint32_t>(in);
  const auto id = static_cast<std::int32_t>(bytes::read_raw<std::uint32_t>(in));
  if (kind == 0) return Label::known(id);
  if (kind == 1) return Label::seen(id);
  throw Error(ErrorCode::corrupt_file, "snapshot holds an unknown label kind");
}

}  // namespace detail

inline void save_snapshot(const TtdEngine& engine, std::ostream& out) {
  out.write(kSnapshotMagic, 4);
  bytes::write_raw<std::uint16_t>(out, kSnapshotVersion);

  const EngineParams& p = engine.params_;
  bytes::write_raw<std::uint64_t>(out, p.memory_capacity);
  bytes::write_raw<std::uint64_t>(out, p.min_occupancy);
  bytes::write_raw<std::uint64_t>(out, p.neighbor_buckets);
  bytes::write_raw<std::uint8_t>(out, p.band_restricted ? 1 : 0);
  bytes::write_raw<double>(out, p.epsilon);
  bytes::write_raw<std::uint64_t>(out, p.vote_k);
  bytes::write_raw<double>(out, p.alpha_seen);
  bytes::write_raw<std::int64_t>(out, p.max_discoverable);
  bytes::write_raw<std::uint8_t>(out, p.oracle_labels ? 1 : 0);
  bytes::write_raw<std::uint64_t>(out, p.rng_seed);

  const DirectionBasis& basis = engine.basis_;
  bytes::write_raw<std::uint32_t>(out, static_cast<std::uint32_t>(basis.dim()));
  bytes::write_raw<std::uint32_t>(out, static_cast<std::uint32_t>(basis.direction_count()));
  bytes::write_raw<double>(out, basis.scale_factor());
  bytes::write_raw<std::uint8_t>(out, static_cast<std::uint8_t>(basis.mode()));
  bytes::write_raw<std::uint64_t>(out, basis.seed());
  for (const auto& direction : basis.directions())
    for (double x : direction) bytes::write_raw<double>(out, x);

  const HashMemory& memory = engine.memory_;
  bytes::write_raw<std::uint64_t>(out, memory.buffers().size());
  for (const auto& [label, buffer] : memory.buffers()) {
    detail::write_label(out, label);
    bytes::write_raw<std::uint64_t>(out, buffer.stream_count);
    bytes::write_raw<std::uint8_t>(out, buffer.frozen ? 1 : 0);
    bytes::write_raw<std::uint64_t>(out, buffer.slots.size());
    for (std::uint64_t seq : buffer.slots) {
      const MemoryEntry& entry = memory.entry(seq);
      detail::write_label(out, entry.label);
      bytes::write_raw<std::uint64_t>(out, entry.seq);
      out.write(reinterpret_cast<const char*>(entry.feature.data()),
                static_cast<std::streamsize>(entry.feature.size() * sizeof(float)));
    }
  }

  bytes::write_raw<std::uint64_t>(out, memory.buckets().size());
  for (const auto& [key, bucket] : memory.buckets()) {
    bytes::write_raw<std::uint32_t>(out, key.norm_band);
    out.write(reinterpret_cast<const char*>(key.sign_bits.data()),
              static_cast<std::streamsize>(key.sign_bits.size()));
    for (double x : bucket.sum) bytes::write_raw<double>(out, x);
  }

  bytes::write_raw<std::uint64_t>(out, engine.prototypes_.size());
  for (const auto& [label, prototype] : engine.prototypes_) {
    detail::write_label(out, label);
    bytes::write_raw<std::uint64_t>(out, prototype.update_count);
    for (double x : prototype.vector) bytes::write_raw<double>(out, x);
  }

  bytes::write_raw<std::int32_t>(out, engine.allocator_.next_id());
  bytes::write_raw<std::uint64_t>(out, engine.allocator_.oracle_map().size());
  for (const auto& [gt, id] : engine.allocator_.oracle_map()) {
    bytes::write_raw<std::int32_t>(out, gt);
    bytes::write_raw<std::int32_t>(out, id);
  }

  bytes::write_raw<std::uint64_t>(out, engine.step_count_);
  bytes::write_raw<std::uint8_t>(out, engine.seeded_ ? 1 : 0);
  bytes::write_raw<std::uint64_t>(out, engine.known_ids_.size());
  for (std::int32_t id : engine.known_ids_) bytes::write_raw<std::int32_t>(out, id);

  std::ostringstream rng_state;
  rng_state << engine.rng_;
  bytes::write_string(out, rng_state.str());
  if (!out) throw Error(ErrorCode::format_error, "snapshot write failed");
}

inline TtdEngine load_snapshot(std::istream& in) {
  char magic[4] = {};
  in.read(magic, 4);
  if (!in || !std::equal(magic, magic + 4, kSnapshotMagic))
    throw Error(ErrorCode::incompatible_snapshot, "not a TTDS snapshot");
  const auto version = bytes::read_raw<std::uint16_t>(in);
  if (version != kSnapshotVersion)
    throw Error(ErrorCode::incompatible_snapshot, "unsupported snapshot version");

  EngineParams p;
  p.memory_capacity = bytes::read_raw<std::uint64_t>(in);
  p.min_occupancy = bytes::read_raw<std::uint64_t>(in);
  p.neighbor_buckets = bytes::read_raw<std::uint64_t>(in);
  p.band_restricted = bytes::read_raw<std::uint8_t>(in) != 0;
  p.epsilon = bytes::read_raw<double>(in);
  p.vote_k = bytes::read_raw<std::uint64_t>(in);
  p.alpha_seen = bytes::read_raw<double>(in);
  p.max_discoverable = bytes::read_raw<std::int64_t>(in);
  p.oracle_labels = bytes::read_raw<std::uint8_t>(in) != 0;
  p.rng_seed = bytes::read_raw<std::uint64_t>(in);

  const auto dim = bytes::read_raw<std::uint32_t>(in);
  const auto n = bytes::read_raw<std::uint32_t>(in);
  const double kappa = bytes::read_raw<double>(in);
  const auto mode = static_cast<BasisMode>(bytes::read_raw<std::uint8_t>(in));
  const auto basis_seed = bytes::read_raw<std::uint64_t>(in);
  std::vector<std::vector<double>> directions(n, std::vector<double>(dim));
  for (auto& direction : directions)
    for (double& x : direction) x = bytes::read_raw<double>(in);

  TtdEngine engine(p, DirectionBasis(std::move(directions), kappa, mode, basis_seed));

  const auto buffer_count = bytes::read_raw<std::uint64_t>(in);
  for (std::uint64_t b = 0; b < buffer_count; ++b) {
    const Label label = detail::read_label(in);
    HashMemory::ClassBuffer buffer;
    buffer.stream_count = bytes::read_raw<std::uint64_t>(in);
    buffer.frozen = bytes::read_raw<std::uint8_t>(in) != 0;
    const auto slot_count = bytes::read_raw<std::uint64_t>(in);
    for (std::uint64_t s = 0; s < slot_count; ++s) {
      const Label entry_label = detail::read_label(in);
      const auto seq = bytes::read_raw<std::uint64_t>(in);
      FeatureVector feature(dim);
      in.read(reinterpret_cast<char*>(feature.data()),
              static_cast<std::streamsize>(dim * sizeof(float)));
      if (!in) throw Error(ErrorCode::corrupt_file, "snapshot entry truncated");
      if (entry_label != label)
        throw Error(ErrorCode::corrupt_file, "snapshot entry label disagrees with buffer");
      MemoryEntry entry{hash_feature(engine.basis_, feature), std::move(feature), entry_label,
                        seq};
      buffer.slots.push_back(entry.seq);
      engine.memory_.restore_entry(std::move(entry));
    }
    engine.memory_.mutable_buffers()[label] = std::move(buffer);
  }

  const auto bucket_count = bytes::read_raw<std::uint64_t>(in);
  for (std::uint64_t b = 0; b < bucket_count; ++b) {
    HashKey key;
    key.norm_band = bytes::read_raw<std::uint32_t>(in);
    key.sign_bits.resize(n);
    in.read(reinterpret_cast<char*>(key.sign_bits.data()), n);
    if (!in) throw Error(ErrorCode::corrupt_file, "snapshot bucket truncated");
    std::vector<double> sum(dim);
    for (double& x : sum) x = bytes::read_raw<double>(in);
    engine.memory_.overwrite_bucket_sum(key, std::move(sum));
  }

  const auto prototype_count = bytes::read_raw<std::uint64_t>(in);
  for (std::uint64_t i = 0; i < prototype_count; ++i) {
    const Label label = detail::read_label(in);
    Prototype prototype{label, std::vector<double>(dim), 0};
    prototype.update_count = bytes::read_raw<std::uint64_t>(in);
    for (double& x : prototype.vector) x = bytes::read_raw<double>(in);
    engine.prototypes_.emplace(label, std::move(prototype));
  }

  const auto next_id = bytes::read_raw<std::int32_t>(in);
  std::map<std::int32_t, std::int32_t> oracle_map;
  const auto oracle_count = bytes::read_raw<std::uint64_t>(in);
  for (std::uint64_t i = 0; i < oracle_count; ++i) {
    const auto gt = bytes::read_raw<std::int32_t>(in);
    const auto id = bytes::read_raw<std::int32_t>(in);
    oracle_map[gt] = id;
  }
  engine.allocator_.restore(next_id, std::move(oracle_map));

  engine.step_count_ = bytes::read_raw<std::uint64_t>(in);
  engine.seeded_ = bytes::read_raw<std::uint8_t>(in) != 0;
  const auto known_count = bytes::read_raw<std::uint64_t>(in);
  for (std::uint64_t i = 0; i < known_count; ++i)
    engine.known_ids_.insert(bytes::read_raw<std::int32_t>(in));

  std::istringstream rng_state(bytes::read_string(in));
  rng_state >> engine.rng_;
  if (!rng_state) throw Error(ErrorCode::corrupt_file, "snapshot rng state unreadable");
  return engine;
}

inline void save_snapshot_file(const TtdEngine& engine, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::format_error, "cannot open for writing: " + path);
  save_snapshot(engine, out);
}

inline TtdEngine load_snapshot_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::format_error, "cannot open: " + path);
  return load_snapshot(in);
}

}  // namespace ttd
