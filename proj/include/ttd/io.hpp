#pragma once

// Feature-file formats. TTDF is the little-endian binary layout:
//   magic "TTDF", version u16 = 1, dim u32, count u64,
//   then count records of (label i32, feature dim x float32),
// where label -1 marks an unlabeled sample. CSV files with a
// "label,f0,...,f{d-1}" header are accepted as a fallback.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "ttd/bytes.hpp"
#include "ttd/error.hpp"
#include "ttd/synthetic.hpp"

namespace ttd {

inline constexpr char kTtdfMagic[4] = {'T', 'T', 'D', 'F'};
inline constexpr std::uint16_t kTtdfVersion = 1;

inline void write_ttdf(const std::string& path, const LabeledFeatures& features) {
  if (features.empty())
    throw Error(ErrorCode::invalid_argument, "refusing to write an empty feature file");
  const std::size_t dim = features.front().second.size();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::format_error, "cannot open for writing: " + path);
  out.write(kTtdfMagic, 4);
  bytes::write_raw<std::uint16_t>(out, kTtdfVersion);
  bytes::write_raw<std::uint32_t>(out, static_cast<std::uint32_t>(dim));
  bytes::write_raw<std::uint64_t>(out, features.size());
  for (const auto& [label, feature] : features) {
    if (feature.size() != dim)
      throw Error(ErrorCode::invalid_argument, "feature dimensions disagree");
    bytes::write_raw<std::int32_t>(out, label);
    out.write(reinterpret_cast<const char*>(feature.data()),
              static_cast<std::streamsize>(dim * sizeof(float)));
  }
  if (!out) throw Error(ErrorCode::format_error, "write failed: " + path);
}

inline void write_features_csv(const std::string& path, const LabeledFeatures& features) {
  if (features.empty())
    throw Error(ErrorCode::invalid_argument, "refusing to write an empty feature file");
  const std::size_t dim = features.front().second.size();
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::format_error, "cannot open for writing: " + path);
  out << "label";
  for (std::size_t i = 0; i < dim; ++i) out << ",f" << i;
  out << "\n";
  out.precision(9);
  for (const auto& [label, feature] : features) {
    out << label;
    for (float x : feature) out << ',' << x;
    out << "\n";
  }
}

namespace detail {

inline void check_finite(const FeatureVector& feature) {
  for (float x : feature)
    if (!std::isfinite(x))
      throw Error(ErrorCode::invalid_feature, "feature file holds non-finite values");
}

inline LabeledFeatures load_ttdf(std::ifstream& in, const std::string& path) {
  const auto version = bytes::read_raw<std::uint16_t>(in);
  if (version != kTtdfVersion)
    throw Error(ErrorCode::format_error, "unsupported TTDF version in " + path);
  const auto dim = bytes::read_raw<std::uint32_t>(in);
  const auto count = bytes::read_raw<std::uint64_t>(in);
  if (dim == 0) throw Error(ErrorCode::corrupt_file, "TTDF header has dim 0");

  LabeledFeatures features;
  features.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto label = bytes::read_raw<std::int32_t>(in);
    FeatureVector feature(dim);
    in.read(reinterpret_cast<char*>(feature.data()),
            static_cast<std::streamsize>(dim * sizeof(float)));
    if (!in) throw Error(ErrorCode::corrupt_file, "TTDF record truncated in " + path);
    detail::check_finite(feature);
    features.emplace_back(label, std::move(feature));
  }
  return features;
}

inline LabeledFeatures load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::format_error, "cannot open: " + path);
  std::string line;
  if (!std::getline(in, line))
    throw Error(ErrorCode::format_error, "empty feature file: " + path);
  if (line.rfind("label", 0) != 0)
    throw Error(ErrorCode::format_error, "missing label header in " + path);
  const std::size_t dim = std::count(line.begin(), line.end(), ',');
  if (dim == 0) throw Error(ErrorCode::format_error, "csv header has no feature columns");

  LabeledFeatures features;
  std::size_t line_number = 1;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.empty()) continue;
    std::stringstream row(line);
    std::string cell;
    if (!std::getline(row, cell, ','))
      throw Error(ErrorCode::corrupt_file, "bad csv row " + std::to_string(line_number));
    FeatureVector feature;
    feature.reserve(dim);
    try {
      const std::int32_t label = std::stoi(cell);
      while (std::getline(row, cell, ',')) feature.push_back(std::stof(cell));
      if (feature.size() != dim)
        throw Error(ErrorCode::corrupt_file,
                    "csv row " + std::to_string(line_number) + " has wrong arity");
      detail::check_finite(feature);
      features.emplace_back(label, std::move(feature));
    } catch (const Error&) {
      throw;
    } catch (const std::exception&) {
      throw Error(ErrorCode::corrupt_file, "unparsable csv row " + std::to_string(line_number));
    }
  }
  if (features.empty()) throw Error(ErrorCode::corrupt_file, "csv has no data rows");
  return features;
}

}  // namespace detail

inline LabeledFeatures load_features(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::format_error, "cannot open: " + path);
  char magic[4] = {};
  in.read(magic, 4);
  if (in && std::equal(magic, magic + 4, kTtdfMagic)) return detail::load_ttdf(in, path);

  // Not TTDF; accept CSV, but flag binary-looking files with a bad magic.
  if (in && (magic[0] == 'T' || !std::isprint(static_cast<unsigned char>(magic[0]))))
    throw Error(ErrorCode::format_error, "bad magic bytes in " + path);
  return detail::load_csv(path);
}

}  // namespace ttd
