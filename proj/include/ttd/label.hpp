#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <string>

#include "ttd/error.hpp"

namespace ttd {

// Class label. Known(id >= 0) refers to a trained class; Seen(id >= 1) is a
// class discovered during the stream, rendered "#C<id>". Known labels order
// before Seen labels, then by id, which is the tie-break order used
// throughout the classifiers.
class Label {
 public:
  enum class Kind : std::uint8_t { known = 0, seen = 1 };

  static Label known(std::int32_t id) {
    if (id < 0) throw Error(ErrorCode::invalid_argument, "known id must be >= 0");
    return Label(Kind::known, id);
  }

  static Label seen(std::int32_t id) {
    if (id < 1) throw Error(ErrorCode::invalid_argument, "seen id must be >= 1");
    return Label(Kind::seen, id);
  }

  Kind kind() const noexcept { return kind_; }
  std::int32_t id() const noexcept { return id_; }
  bool is_known() const noexcept { return kind_ == Kind::known; }
  bool is_seen() const noexcept { return kind_ == Kind::seen; }

  std::string to_string() const {
    return is_known() ? std::to_string(id_) : "#C" + std::to_string(id_);
  }

  auto operator<=>(const Label&) const = default;

 private:
  Label(Kind kind, std::int32_t id) : kind_(kind), id_(id) {}

  Kind kind_;
  std::int32_t id_;
};

}  // namespace ttd

template <>
struct std::hash<ttd::Label> {
  std::size_t operator()(const ttd::Label& label) const noexcept {
    return (static_cast<std::size_t>(label.kind()) << 32) ^
           static_cast<std::size_t>(static_cast<std::uint32_t>(label.id()));
  }
};
