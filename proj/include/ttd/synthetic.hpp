#pragma once

// Gaussian stream generator for desk-scale experiments. Known class means are
// placed isotropically at norm mean_scale * separation * sigma; unknown means
// sit on a fixed-angle cone around a random axis and are scaled toward
// smaller norms by norm_offset, so novel classes are both mutually confusable
// and norm-shifted relative to the knowns. The generator retries until every
// pairwise mean distance is at least separation * sigma.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <utility>
#include <vector>

#include "ttd/error.hpp"
#include "ttd/hashing.hpp"

namespace ttd {

using LabeledFeatures = std::vector<std::pair<std::int32_t, FeatureVector>>;

struct SyntheticSpec {
  std::size_t dim = 64;
  std::size_t known_classes = 7;
  std::size_t unknown_classes = 3;
  std::size_t seed_per_class = 100;    // seed-set samples per known class
  std::size_t stream_per_class = 200;  // test-stream samples per class
  double sigma = 0.25;                 // cluster standard deviation per component
  double separation = 8.0;             // minimum pairwise mean distance, in sigma units
  double norm_offset = 0.25;           // fractional norm reduction of unknown means
  double mean_scale = 3.0;             // known mean norm = mean_scale * separation * sigma
  double cone_angle_deg = 60.0;        // angular spread of unknown means around their axis
  std::uint64_t shuffle_seed = 0;
};

struct SyntheticData {
  LabeledFeatures seed_set;  // known classes only
  LabeledFeatures stream;    // known and unknown classes, shuffled
  std::vector<std::vector<double>> means;  // one per class id
};

namespace detail {

inline std::vector<double> random_unit(std::size_t dim, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<double> v(dim);
  double norm2 = 0.0;
  do {
    norm2 = 0.0;
    for (double& x : v) {
      x = gauss(rng);
      norm2 += x * x;
    }
  } while (norm2 < 1e-24);
  const double norm = std::sqrt(norm2);
  for (double& x : v) x /= norm;
  return v;
}

inline double distance(const std::vector<double>& a, const std::vector<double>& b) {
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double diff = a[i] - b[i];
    sum += diff * diff;
  }
  return std::sqrt(sum);
}

inline bool separated(const std::vector<std::vector<double>>& means,
                      const std::vector<double>& candidate, double min_distance) {
  for (const auto& mean : means)
    if (distance(mean, candidate) < min_distance) return false;
  return true;
}

}  // namespace detail

inline SyntheticData generate_synthetic(const SyntheticSpec& spec, std::uint64_t seed) {
  if (spec.dim == 0 || spec.known_classes == 0 || spec.seed_per_class == 0 ||
      spec.stream_per_class == 0)
    throw Error(ErrorCode::invalid_argument, "synthetic spec has empty dimensions or counts");
  if (spec.sigma <= 0.0 || spec.separation <= 0.0 || spec.mean_scale <= 0.0)
    throw Error(ErrorCode::invalid_argument, "sigma, separation and mean_scale must be positive");
  if (spec.norm_offset < 0.0 || spec.norm_offset >= 1.0)
    throw Error(ErrorCode::invalid_argument, "norm_offset must lie in [0, 1)");

  std::mt19937_64 rng(seed);
  const double min_distance = spec.separation * spec.sigma;
  const double known_norm = spec.mean_scale * spec.separation * spec.sigma;
  const double unknown_norm = (1.0 - spec.norm_offset) * known_norm;
  constexpr int kMaxTries = 1000;

  SyntheticData data;

  for (std::size_t c = 0; c < spec.known_classes; ++c) {
    bool placed = false;
    for (int attempt = 0; attempt < kMaxTries && !placed; ++attempt) {
      std::vector<double> mean = detail::random_unit(spec.dim, rng);
      for (double& x : mean) x *= known_norm;
      if (detail::separated(data.means, mean, min_distance)) {
        data.means.push_back(std::move(mean));
        placed = true;
      }
    }
    if (!placed)
      throw Error(ErrorCode::generation_failure, "could not separate known class means");
  }

  if (spec.unknown_classes > 0) {
    if (2.0 * unknown_norm < min_distance)
      throw Error(ErrorCode::generation_failure,
                  "unknown-class sphere too small for the requested separation");
    // Cone angle: the configured spread unless the separation constraint
    // demands more.
    const double required =
        2.0 * std::asin(std::min(1.0, min_distance / (2.0 * unknown_norm)));
    const double phi = std::min(
        std::max(required * 1.05, spec.cone_angle_deg * M_PI / 180.0), M_PI / 2.0);

    std::vector<double> axis;
    for (std::size_t c = 0; c < spec.unknown_classes; ++c) {
      bool placed = false;
      for (int attempt = 0; attempt < kMaxTries && !placed; ++attempt) {
        std::vector<double> direction;
        if (c == 0 || spec.dim < 3) {
          direction = detail::random_unit(spec.dim, rng);
          if (c == 0) axis = direction;
        } else {
          // Random direction orthogonal to the axis, then tilt by phi.
          std::vector<double> v = detail::random_unit(spec.dim, rng);
          double dot = 0.0;
          for (std::size_t i = 0; i < spec.dim; ++i) dot += v[i] * axis[i];
          double norm2 = 0.0;
          for (std::size_t i = 0; i < spec.dim; ++i) {
            v[i] -= dot * axis[i];
            norm2 += v[i] * v[i];
          }
          if (norm2 < 1e-24) continue;
          const double norm = std::sqrt(norm2);
          direction.resize(spec.dim);
          for (std::size_t i = 0; i < spec.dim; ++i)
            direction[i] = std::cos(phi) * axis[i] + std::sin(phi) * v[i] / norm;
        }
        std::vector<double> mean(spec.dim);
        for (std::size_t i = 0; i < spec.dim; ++i) mean[i] = unknown_norm * direction[i];
        if (detail::separated(data.means, mean, min_distance)) {
          data.means.push_back(std::move(mean));
          placed = true;
        }
      }
      if (!placed)
        throw Error(ErrorCode::generation_failure, "could not separate unknown class means");
    }
  }

  std::normal_distribution<double> gauss(0.0, 1.0);
  auto draw = [&](std::size_t class_id) {
    FeatureVector f(spec.dim);
    for (std::size_t i = 0; i < spec.dim; ++i)
      f[i] = static_cast<float>(data.means[class_id][i] + spec.sigma * gauss(rng));
    return f;
  };

  for (std::size_t c = 0; c < spec.known_classes; ++c)
    for (std::size_t s = 0; s < spec.seed_per_class; ++s)
      data.seed_set.emplace_back(static_cast<std::int32_t>(c), draw(c));

  const std::size_t total_classes = spec.known_classes + spec.unknown_classes;
  for (std::size_t c = 0; c < total_classes; ++c)
    for (std::size_t s = 0; s < spec.stream_per_class; ++s)
      data.stream.emplace_back(static_cast<std::int32_t>(c), draw(c));

  std::mt19937_64 shuffle_rng(spec.shuffle_seed);
  std::shuffle(data.stream.begin(), data.stream.end(), shuffle_rng);
  return data;
}

}  // namespace ttd
