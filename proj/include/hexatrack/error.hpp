#pragma once

#include <stdexcept>
#include <string>

namespace hexatrack {

enum class Errc {
  invalid_parameter,
  dimension_mismatch,
  degenerate_input,
  insufficient_data,
  degenerate_filter,
  singular_transform,
  lost_target,
  mode_error,
  encoding_error,
  malformed_frame,
  io_error,
  not_found,
};

inline const char* errc_name(Errc code) {
  switch (code) {
    case Errc::invalid_parameter: return "invalid-parameter";
    case Errc::dimension_mismatch: return "dimension-mismatch";
    case Errc::degenerate_input: return "degenerate-input";
    case Errc::insufficient_data: return "insufficient-data";
    case Errc::degenerate_filter: return "degenerate-filter";
    case Errc::singular_transform: return "singular-transform";
    case Errc::lost_target: return "lost-target";
    case Errc::mode_error: return "mode-error";
    case Errc::encoding_error: return "encoding-error";
    case Errc::malformed_frame: return "malformed-frame";
    case Errc::io_error: return "io-error";
    case Errc::not_found: return "not-found";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace hexatrack
