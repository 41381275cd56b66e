#pragma once

// RCP command frames: 3 bytes, MSB first
//   [turn][gimbal][dx sign][dx |9|][dy sign][dy |9|][00]
// Offsets are sign-magnitude; sign 1 means right/down (positive).
// On a stream each frame is preceded by a one-byte length.

#include <array>
#include <cstdint>
#include <cstdlib>
#include <span>
#include <string>
#include <vector>

#include "hexatrack/error.hpp"

namespace hexatrack {

constexpr int kRcpMaxMagnitude = 511;
constexpr std::size_t kRcpFrameSize = 3;

struct RcpCommand {
  bool turn_flag = false;
  bool gimbal_flag = false;
  int dx = 0;
  int dy = 0;

  friend bool operator==(const RcpCommand&, const RcpCommand&) = default;
};

using RcpFrame = std::array<std::uint8_t, kRcpFrameSize>;

namespace detail {

// Zero encodes with sign 0 so the all-zero command is three zero bytes.
inline std::uint32_t sign_magnitude(int v, const char* name) {
  if (v < -kRcpMaxMagnitude || v > kRcpMaxMagnitude) {
    throw Error(Errc::encoding_error, std::string(name) + " out of range: " + std::to_string(v));
  }
  return (v > 0 ? 1u << 9 : 0u) | static_cast<std::uint32_t>(std::abs(v));
}

inline int from_sign_magnitude(std::uint32_t field) {
  const int mag = static_cast<int>(field & 0x1FFu);
  return (field & 0x200u) ? mag : -mag;
}

}  // namespace detail

inline RcpFrame rcp_encode(const RcpCommand& c) {
  std::uint32_t bits = 0;
  bits |= (c.turn_flag ? 1u : 0u) << 23;
  bits |= (c.gimbal_flag ? 1u : 0u) << 22;
  bits |= detail::sign_magnitude(c.dx, "dx") << 12;
  bits |= detail::sign_magnitude(c.dy, "dy") << 2;
  return {static_cast<std::uint8_t>(bits >> 16), static_cast<std::uint8_t>(bits >> 8), static_cast<std::uint8_t>(bits)};
}

inline RcpCommand rcp_decode(std::span<const std::uint8_t> frame) {
  if (frame.size() != kRcpFrameSize) throw Error(Errc::malformed_frame, "RCP frame must be 3 bytes");
  const std::uint32_t bits = (std::uint32_t{frame[0]} << 16) | (std::uint32_t{frame[1]} << 8) | frame[2];
  if (bits & 0x3u) throw Error(Errc::malformed_frame, "RCP pad bits are set");
  RcpCommand c;
  c.turn_flag = (bits >> 23) & 1u;
  c.gimbal_flag = (bits >> 22) & 1u;
  c.dx = detail::from_sign_magnitude((bits >> 12) & 0x3FFu);
  c.dy = detail::from_sign_magnitude((bits >> 2) & 0x3FFu);
  return c;
}

/// Appends one length-prefixed frame.
inline void rcp_write(std::vector<std::uint8_t>& out, const RcpCommand& c) {
  const RcpFrame f = rcp_encode(c);
  out.push_back(static_cast<std::uint8_t>(kRcpFrameSize));
  out.insert(out.end(), f.begin(), f.end());
}

/// Incremental reader for a length-prefixed byte stream. Frames of another
/// length are skipped whole; a zero length is a framing error.
class RcpStreamReader {
 public:
  std::vector<RcpCommand> feed(std::span<const std::uint8_t> bytes) {
    buffer_.insert(buffer_.end(), bytes.begin(), bytes.end());
    std::vector<RcpCommand> out;
    std::size_t pos = 0;
    while (pos < buffer_.size()) {
      const std::size_t len = buffer_[pos];
      if (len == 0) {
        buffer_.clear();
        throw Error(Errc::malformed_frame, "zero-length RCP frame");
      }
      if (pos + 1 + len > buffer_.size()) break;
      if (len == kRcpFrameSize) {
        out.push_back(rcp_decode(std::span(buffer_).subspan(pos + 1, len)));
      } else {
        ++skipped_;
      }
      pos += 1 + len;
    }
    buffer_.erase(buffer_.begin(), buffer_.begin() + static_cast<std::ptrdiff_t>(pos));
    return out;
  }

  std::size_t skipped() const noexcept { return skipped_; }
  std::size_t buffered() const noexcept { return buffer_.size(); }

 private:
  std::vector<std::uint8_t> buffer_;
  std::size_t skipped_ = 0;
};

}  // namespace hexatrack
