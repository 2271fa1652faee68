#pragma once

// Norm-and-direction hashing: a feature maps to (norm band, hyperplane sign
// bits). The band is floor(kappa * ||f||); bit i is the side of f relative to
// unit direction r_i. Bases come from seeded Gaussian draws or from the top
// principal directions of a seed feature matrix.

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "ttd/error.hpp"

namespace ttd {

using FeatureVector = std::vector<float>;

enum class BasisMode : std::uint8_t { random = 0, pca = 1 };

inline const char* to_string(BasisMode mode) {
  return mode == BasisMode::random ? "random" : "pca";
}

struct HashKey {
  std::uint32_t norm_band = 0;
  std::vector<std::uint8_t> sign_bits;  // one byte per direction, 0 or 1

  auto operator<=>(const HashKey&) const = default;
};

class DirectionBasis {
 public:
  // Directly constructed bases are used by tests and by the PCA path; every
  // direction must already be unit norm.
  DirectionBasis(std::vector<std::vector<double>> directions, double scale_factor,
                 BasisMode mode, std::uint64_t seed)
      : directions_(std::move(directions)),
        scale_factor_(scale_factor),
        mode_(mode),
        seed_(seed) {
    if (directions_.empty() || directions_.front().empty())
      throw Error(ErrorCode::invalid_argument, "basis needs n >= 1 directions of dim >= 1");
    if (scale_factor_ <= 0.0)
      throw Error(ErrorCode::invalid_argument, "scale factor must be positive");
    const std::size_t d = directions_.front().size();
    for (const auto& r : directions_) {
      if (r.size() != d)
        throw Error(ErrorCode::invalid_argument, "direction dimensions disagree");
      double norm2 = 0.0;
      for (double x : r) norm2 += x * x;
      if (std::abs(std::sqrt(norm2) - 1.0) > 1e-9)
        throw Error(ErrorCode::invalid_argument, "directions must be unit norm");
    }
  }

  std::size_t direction_count() const noexcept { return directions_.size(); }
  std::size_t dim() const noexcept { return directions_.front().size(); }
  double scale_factor() const noexcept { return scale_factor_; }
  BasisMode mode() const noexcept { return mode_; }
  std::uint64_t seed() const noexcept { return seed_; }
  const std::vector<std::vector<double>>& directions() const noexcept { return directions_; }

 private:
  std::vector<std::vector<double>> directions_;
  double scale_factor_;
  BasisMode mode_;
  std::uint64_t seed_;
};

namespace detail {

// Cyclic Jacobi eigendecomposition of a symmetric matrix. Small d only; the
// hash bases at play are desk scale. Returns (eigenvalues, eigenvectors as
// rows) sorted by descending eigenvalue.
inline std::pair<std::vector<double>, std::vector<std::vector<double>>> jacobi_eigen(
    std::vector<std::vector<double>> a) {
  const std::size_t n = a.size();
  std::vector<std::vector<double>> v(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) v[i][i] = 1.0;

  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += a[p][q] * a[p][q];
    if (off < 1e-24) break;

    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        if (std::abs(a[p][q]) < 1e-300) continue;
        const double theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a[k][p], akq = a[k][q];
          a[k][p] = c * akp - s * akq;
          a[k][q] = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a[p][k], aqk = a[q][k];
          a[p][k] = c * apk - s * aqk;
          a[q][k] = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v[k][p], vkq = v[k][q];
          v[k][p] = c * vkp - s * vkq;
          v[k][q] = s * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return a[x][x] > a[y][y]; });

  std::vector<double> values(n);
  std::vector<std::vector<double>> vectors(n, std::vector<double>(n));
  for (std::size_t i = 0; i < n; ++i) {
    values[i] = a[order[i]][order[i]];
    for (std::size_t k = 0; k < n; ++k) vectors[i][k] = v[k][order[i]];
  }
  return {std::move(values), std::move(vectors)};
}

inline void fix_sign(std::vector<double>& direction) {
  for (double x : direction) {
    if (std::abs(x) > 1e-12) {
      if (x < 0.0)
        for (double& y : direction) y = -y;
      return;
    }
  }
}

inline void normalize(std::vector<double>& direction) {
  double norm2 = 0.0;
  for (double x : direction) norm2 += x * x;
  const double norm = std::sqrt(norm2);
  for (double& x : direction) x /= norm;
}

}  // namespace detail

// Builds the hashing basis. Random mode draws i.i.d. standard-normal
// components per direction and normalizes; PCA mode takes the top-n principal
// directions of pca_input (centered), sign-fixed so the first nonzero
// component is positive.
inline DirectionBasis make_directions(
    std::size_t n, std::size_t d, std::uint64_t seed, BasisMode mode,
    const std::vector<FeatureVector>* pca_input = nullptr, double scale_factor = 1.0) {
  if (n == 0 || d == 0)
    throw Error(ErrorCode::invalid_argument, "make_directions requires n >= 1 and d >= 1");

  std::vector<std::vector<double>> directions;
  directions.reserve(n);

  if (mode == BasisMode::random) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    while (directions.size() < n) {
      std::vector<double> r(d);
      double norm2 = 0.0;
      for (double& x : r) {
        x = gauss(rng);
        norm2 += x * x;
      }
      if (norm2 < 1e-24) continue;  // degenerate draw, retry
      detail::normalize(r);
      directions.push_back(std::move(r));
    }
  } else {
    if (pca_input == nullptr)
      throw Error(ErrorCode::invalid_argument, "pca mode requires seed features");
    if (pca_input->size() < n)
      throw Error(ErrorCode::insufficient_rank, "pca input has fewer rows than directions");
    for (const auto& row : *pca_input)
      if (row.size() != d)
        throw Error(ErrorCode::invalid_argument, "pca input dimension mismatch");

    const std::size_t rows = pca_input->size();
    std::vector<double> mean(d, 0.0);
    for (const auto& row : *pca_input)
      for (std::size_t j = 0; j < d; ++j) mean[j] += row[j];
    for (double& m : mean) m /= static_cast<double>(rows);

    std::vector<std::vector<double>> cov(d, std::vector<double>(d, 0.0));
    for (const auto& row : *pca_input) {
      for (std::size_t i = 0; i < d; ++i) {
        const double xi = row[i] - mean[i];
        for (std::size_t j = i; j < d; ++j) cov[i][j] += xi * (row[j] - mean[j]);
      }
    }
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = i; j < d; ++j) {
        cov[i][j] /= static_cast<double>(rows);
        cov[j][i] = cov[i][j];
      }

    auto [values, vectors] = detail::jacobi_eigen(std::move(cov));
    const double floor = std::max(values.front(), 0.0) * 1e-9 + 1e-30;
    std::size_t rank = 0;
    while (rank < values.size() && values[rank] > floor) ++rank;
    if (rank < n)
      throw Error(ErrorCode::insufficient_rank, "pca input rank below direction count");

    for (std::size_t i = 0; i < n; ++i) {
      detail::fix_sign(vectors[i]);
      detail::normalize(vectors[i]);
      directions.push_back(std::move(vectors[i]));
    }
  }

  return DirectionBasis(std::move(directions), scale_factor, mode, seed);
}

// Pure function of (basis, feature). Zero dot products hash to bit 1 so the
// key is deterministic everywhere.
inline HashKey hash_feature(const DirectionBasis& basis, const FeatureVector& feature) {
  if (feature.size() != basis.dim())
    throw Error(ErrorCode::invalid_argument, "feature dimension does not match basis");
  double norm2 = 0.0;
  for (float x : feature) {
    if (!std::isfinite(x))
      throw Error(ErrorCode::invalid_feature, "feature has non-finite component");
    norm2 += static_cast<double>(x) * static_cast<double>(x);
  }

  const double banded = std::floor(basis.scale_factor() * std::sqrt(norm2));
  if (banded > static_cast<double>(std::numeric_limits<std::uint32_t>::max()))
    throw Error(ErrorCode::invalid_feature, "feature norm out of band range");

  HashKey key;
  key.norm_band = static_cast<std::uint32_t>(banded);
  key.sign_bits.resize(basis.direction_count());
  for (std::size_t i = 0; i < basis.direction_count(); ++i) {
    const auto& r = basis.directions()[i];
    double dot = 0.0;
    for (std::size_t j = 0; j < feature.size(); ++j) dot += r[j] * feature[j];
    key.sign_bits[i] = dot >= 0.0 ? 1 : 0;
  }
  return key;
}

}  // namespace ttd

template <>
struct std::hash<ttd::HashKey> {
  std::size_t operator()(const ttd::HashKey& key) const noexcept {
    std::size_t h = key.norm_band;
    for (std::uint8_t bit : key.sign_bits) h = h * 1099511628211ULL + (bit + 1);
    return h;
  }
};
