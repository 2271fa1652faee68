#pragma once

#include <stdexcept>
#include <string>

namespace ttd {

enum class ErrorCode {
  invalid_argument,
  invalid_feature,
  insufficient_rank,
  frozen_buffer,
  frozen_prototype,
  format_error,
  corrupt_file,
  incompatible_snapshot,
  generation_failure,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace ttd
