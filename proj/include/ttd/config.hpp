#pragma once

// Experiment configuration and its JSON form. Every field has a default, so
// partial documents are valid; a run is a pure function of (config, data).

#include <cstdint>
#include <optional>
#include <string>

#include "json.hpp"
#include "ttd/baselines.hpp"
#include "ttd/engine.hpp"
#include "ttd/error.hpp"
#include "ttd/synthetic.hpp"

namespace ttd {

struct DataFiles {
  std::string seed_path;
  std::string stream_path;
};

struct ExperimentConfig {
  std::uint64_t master_seed = 1;  // engine RNG and synthetic draws
  std::uint64_t curve_stride = 50;
  bool oracle_labels = false;

  // basis
  std::size_t direction_count = 8;
  double kappa = 1.0;
  std::uint64_t basis_seed = 7;
  BasisMode basis_mode = BasisMode::random;

  // memory
  std::size_t memory_capacity = 20;
  std::size_t min_occupancy = 1;
  std::size_t neighbor_buckets = 3;
  bool band_restricted = false;

  // classifier
  double epsilon = 0.7;
  std::size_t vote_k = 10;
  double alpha_seen = 0.9;
  std::int64_t max_discoverable = -1;

  // self-correction
  double sc_fraction = 0.1;
  std::uint64_t sc_every = 100;

  // method
  std::string method = "ours";  // ours | euclidean | cosine | magnitude | entropy
  double tau = 0.0;
  double temperature = 0.1;

  // data source: exactly one of the two
  std::optional<SyntheticSpec> synthetic;
  std::optional<DataFiles> files;

  EngineParams engine_params() const {
    EngineParams params;
    params.memory_capacity = memory_capacity;
    params.min_occupancy = min_occupancy;
    params.neighbor_buckets = neighbor_buckets;
    params.band_restricted = band_restricted;
    params.epsilon = epsilon;
    params.vote_k = vote_k;
    params.alpha_seen = alpha_seen;
    params.max_discoverable = max_discoverable;
    params.oracle_labels = oracle_labels;
    params.rng_seed = master_seed;
    return params;
  }

  BaselineParams baseline_params() const {
    BaselineParams params;
    if (method == "euclidean") params.kind = BaselineKind::euclidean;
    else if (method == "cosine") params.kind = BaselineKind::cosine;
    else if (method == "magnitude") params.kind = BaselineKind::magnitude;
    else if (method == "entropy") params.kind = BaselineKind::entropy;
    else throw Error(ErrorCode::invalid_argument, "not a baseline method: " + method);
    params.tau = tau;
    params.temperature = temperature;
    params.alpha_seen = alpha_seen;
    params.max_discoverable = max_discoverable;
    params.oracle_labels = oracle_labels;
    return params;
  }

  bool is_baseline() const { return method != "ours"; }
};

namespace detail {

template <typename T>
inline void read_field(const nlohmann::json& j, const char* key, T& value) {
  if (j.contains(key)) value = j.at(key).get<T>();
}

}  // namespace detail

inline nlohmann::json synthetic_to_json(const SyntheticSpec& spec) {
  return {
      {"dim", spec.dim},
      {"known_classes", spec.known_classes},
      {"unknown_classes", spec.unknown_classes},
      {"seed_per_class", spec.seed_per_class},
      {"stream_per_class", spec.stream_per_class},
      {"sigma", spec.sigma},
      {"separation", spec.separation},
      {"norm_offset", spec.norm_offset},
      {"mean_scale", spec.mean_scale},
      {"cone_angle_deg", spec.cone_angle_deg},
      {"shuffle_seed", spec.shuffle_seed},
  };
}

inline SyntheticSpec synthetic_from_json(const nlohmann::json& j) {
  SyntheticSpec spec;
  detail::read_field(j, "dim", spec.dim);
  detail::read_field(j, "known_classes", spec.known_classes);
  detail::read_field(j, "unknown_classes", spec.unknown_classes);
  detail::read_field(j, "seed_per_class", spec.seed_per_class);
  detail::read_field(j, "stream_per_class", spec.stream_per_class);
  detail::read_field(j, "sigma", spec.sigma);
  detail::read_field(j, "separation", spec.separation);
  detail::read_field(j, "norm_offset", spec.norm_offset);
  detail::read_field(j, "mean_scale", spec.mean_scale);
  detail::read_field(j, "cone_angle_deg", spec.cone_angle_deg);
  detail::read_field(j, "shuffle_seed", spec.shuffle_seed);
  return spec;
}

inline nlohmann::json config_to_json(const ExperimentConfig& config) {
  nlohmann::json j = {
      {"seed", config.master_seed},
      {"curve_stride", config.curve_stride},
      {"oracle_labels", config.oracle_labels},
      {"basis",
       {{"directions", config.direction_count},
        {"kappa", config.kappa},
        {"seed", config.basis_seed},
        {"mode", to_string(config.basis_mode)}}},
      {"memory",
       {{"capacity", config.memory_capacity},
        {"min_occupancy", config.min_occupancy},
        {"neighbor_buckets", config.neighbor_buckets},
        {"band_restricted", config.band_restricted}}},
      {"classifier",
       {{"epsilon", config.epsilon},
        {"vote_k", config.vote_k},
        {"alpha_seen", config.alpha_seen},
        {"max_discoverable", config.max_discoverable}}},
      {"self_correction", {{"fraction", config.sc_fraction}, {"every_n", config.sc_every}}},
      {"method", {{"name", config.method}, {"tau", config.tau}, {"temperature", config.temperature}}},
  };
  if (config.synthetic.has_value())
    j["data"] = {{"synthetic", synthetic_to_json(*config.synthetic)}};
  else if (config.files.has_value())
    j["data"] = {{"files", {{"seed", config.files->seed_path}, {"stream", config.files->stream_path}}}};
  return j;
}

inline ExperimentConfig config_from_json(const nlohmann::json& j) {
  ExperimentConfig config;
  try {
    detail::read_field(j, "seed", config.master_seed);
    detail::read_field(j, "curve_stride", config.curve_stride);
    detail::read_field(j, "oracle_labels", config.oracle_labels);
    if (j.contains("basis")) {
      const auto& b = j.at("basis");
      detail::read_field(b, "directions", config.direction_count);
      detail::read_field(b, "kappa", config.kappa);
      detail::read_field(b, "seed", config.basis_seed);
      if (b.contains("mode")) {
        const std::string mode = b.at("mode").get<std::string>();
        if (mode == "random") config.basis_mode = BasisMode::random;
        else if (mode == "pca") config.basis_mode = BasisMode::pca;
        else throw Error(ErrorCode::invalid_argument, "unknown basis mode: " + mode);
      }
    }
    if (j.contains("memory")) {
      const auto& m = j.at("memory");
      detail::read_field(m, "capacity", config.memory_capacity);
      detail::read_field(m, "min_occupancy", config.min_occupancy);
      detail::read_field(m, "neighbor_buckets", config.neighbor_buckets);
      detail::read_field(m, "band_restricted", config.band_restricted);
    }
    if (j.contains("classifier")) {
      const auto& c = j.at("classifier");
      detail::read_field(c, "epsilon", config.epsilon);
      detail::read_field(c, "vote_k", config.vote_k);
      detail::read_field(c, "alpha_seen", config.alpha_seen);
      detail::read_field(c, "max_discoverable", config.max_discoverable);
    }
    if (j.contains("self_correction")) {
      const auto& s = j.at("self_correction");
      detail::read_field(s, "fraction", config.sc_fraction);
      detail::read_field(s, "every_n", config.sc_every);
    }
    if (j.contains("method")) {
      const auto& m = j.at("method");
      detail::read_field(m, "name", config.method);
      detail::read_field(m, "tau", config.tau);
      detail::read_field(m, "temperature", config.temperature);
    }
    if (j.contains("data")) {
      const auto& d = j.at("data");
      if (d.contains("synthetic") && d.contains("files"))
        throw Error(ErrorCode::invalid_argument, "data source must be synthetic or files, not both");
      if (d.contains("synthetic")) config.synthetic = synthetic_from_json(d.at("synthetic"));
      if (d.contains("files")) {
        DataFiles files;
        files.seed_path = d.at("files").at("seed").get<std::string>();
        files.stream_path = d.at("files").at("stream").get<std::string>();
        config.files = files;
      }
    }
  } catch (const Error&) {
    throw;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::invalid_argument, std::string("bad config: ") + e.what());
  }

  static const std::set<std::string> kMethods{"ours", "euclidean", "cosine", "magnitude",
                                              "entropy"};
  if (!kMethods.count(config.method))
    throw Error(ErrorCode::invalid_argument, "unknown method: " + config.method);
  if (config.direction_count == 0 || config.kappa <= 0.0)
    throw Error(ErrorCode::invalid_argument, "basis needs directions >= 1 and kappa > 0");
  if (config.memory_capacity == 0)
    throw Error(ErrorCode::invalid_argument, "memory capacity must be >= 1");
  if (config.epsilon < -1.0 || config.epsilon > 1.0)
    throw Error(ErrorCode::invalid_argument, "epsilon must lie in [-1, 1]");
  if (config.alpha_seen < 0.0 || config.alpha_seen > 1.0)
    throw Error(ErrorCode::invalid_argument, "alpha_seen must lie in [0, 1]");
  if (config.sc_fraction < 0.0 || config.sc_fraction > 0.1)
    throw Error(ErrorCode::invalid_argument, "sc fraction must lie in [0, 0.1]");
  if (config.curve_stride == 0)
    throw Error(ErrorCode::invalid_argument, "curve_stride must be >= 1");
  if (!config.synthetic.has_value() && !config.files.has_value())
    throw Error(ErrorCode::invalid_argument, "config needs a data source");
  return config;
}

}  // namespace ttd
