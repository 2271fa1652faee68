#pragma once

// Memory self-correction: relabel a random slice of each Seen-class buffer by
// re-running the joint-bucket vote with the entry itself excluded. Entries
// whose winner is a Known class, or whose winner's buffer is full, are
// discarded. Features never change and no new class is ever allocated here.

#include <cmath>
#include <cstdint>
#include <map>
#include <utility>
#include <vector>

#include "ttd/classifier.hpp"
#include "ttd/engine.hpp"
#include "ttd/error.hpp"

namespace ttd {

struct SCReport {
  std::size_t examined = 0;
  std::size_t relabeled = 0;
  std::size_t discarded = 0;
  // from-label x to-label counts; unchanged entries sit on the diagonal.
  std::map<std::pair<Label, Label>, std::size_t> flows;
};

inline SCReport self_correct(TtdEngine& engine, double fraction) {
  if (!(fraction >= 0.0 && fraction <= 0.1))
    throw Error(ErrorCode::invalid_argument, "sc fraction must lie in [0, 0.1]");

  HashMemory& memory = engine.memory();
  const EngineParams& params = engine.params();
  std::mt19937_64& rng = engine.rng();

  // Pick every sampled entry up front so corrections cannot influence which
  // entries a later class examines.
  std::vector<std::uint64_t> sampled;
  for (const auto& [label, buffer] : memory.buffers()) {
    if (!label.is_seen() || buffer.slots.empty()) continue;
    const auto want = static_cast<std::size_t>(
        std::ceil(fraction * static_cast<double>(buffer.slots.size())));
    if (want == 0) continue;

    std::vector<std::uint64_t> pool = buffer.slots;
    for (std::size_t i = 0; i < want; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
      std::swap(pool[i], pool[pick(rng)]);
    }
    pool.resize(want);
    std::sort(pool.begin(), pool.end());
    sampled.insert(sampled.end(), pool.begin(), pool.end());
  }

  SCReport report;
  for (std::uint64_t seq : sampled) {
    const MemoryEntry& entry = memory.entry(seq);
    const Label from = entry.label;
    report.examined += 1;

    const auto members = memory.joint_bucket(entry.key, params.neighbor_buckets,
                                             &entry.feature, params.band_restricted);
    const LshDecision vote = vote_nearest(members, entry.feature, params.vote_k, seq);
    if (!vote.has_value() || vote->label == from) {
      report.flows[{from, from}] += 1;
      continue;
    }

    const Label to = vote->label;
    if (to.is_known() || memory.buffer_size(to) >= memory.capacity()) {
      memory.remove(seq);
      report.discarded += 1;
    } else {
      memory.relabel(seq, to);
      report.relabeled += 1;
    }
    report.flows[{from, to}] += 1;
  }
  return report;
}

}  // namespace ttd
