#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace rt {

enum class Errc {
  malformed_wav,
  unsupported_encoding,
  rate_mismatch,
  shape_error,
  empty_dataset,
  invalid_class,
  length_mismatch,
  dimension_mismatch,
  empty_model,
  single_class,
  empty_validation,
  empty_matrix,
  divergence,
  invalid_config,
  io_error,
  version_mismatch,
  corrupt_checkpoint,
  corrupt_cache,
  corrupt_file,
  usage,
};

std::string_view to_string(Errc code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

// Process exit codes for the command-line surface.
inline constexpr int kExitOk = 0;
inline constexpr int kExitDataError = 2;
inline constexpr int kExitUsage = 64;

inline int exit_code_for(Errc code) noexcept {
  return code == Errc::usage ? kExitUsage : kExitDataError;
}

}  // namespace rt
