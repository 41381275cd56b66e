#pragma once

// 2D discrete Fourier transform on power-of-two planes (iterative radix-2),
// enough for the correlation filter tracker.

#include <algorithm>
#include <bit>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <string>
#include <vector>

#include "hexatrack/error.hpp"

namespace hexatrack {

using Complex = std::complex<double>;

/// Row-major plane of values.
template <typename T>
struct Plane {
  int width = 0;
  int height = 0;
  std::vector<T> data;

  Plane() = default;
  Plane(int w, int h, T fill = T{}) : width(w), height(h), data(static_cast<std::size_t>(w) * h, fill) {}

  T& at(int x, int y) { return data[static_cast<std::size_t>(y) * width + x]; }
  const T& at(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x]; }
  std::size_t size() const noexcept { return data.size(); }
};

using RealPlane = Plane<double>;
using ComplexPlane = Plane<Complex>;

inline bool is_power_of_two(int n) { return n > 0 && std::has_single_bit(static_cast<unsigned>(n)); }

namespace detail {

inline void require_pow2(int w, int h) {
  if (!is_power_of_two(w) || !is_power_of_two(h)) {
    throw Error(Errc::dimension_mismatch, "dft2 needs power-of-two dimensions, got " + std::to_string(w) + "x" +
                                              std::to_string(h));
  }
}

// Plain complex arithmetic without the inf/nan recovery of operator*.
inline Complex cmul(Complex a, Complex b) {
  return {a.real() * b.real() - a.imag() * b.imag(), a.real() * b.imag() + a.imag() * b.real()};
}
inline Complex cmul_conj(Complex a, Complex b) {  // conj(a) * b
  return {a.real() * b.real() + a.imag() * b.imag(), a.real() * b.imag() - a.imag() * b.real()};
}
inline Complex cdiv_real_shift(Complex a, Complex b, double shift) {  // a / (b + shift)
  const double br = b.real() + shift;
  const double d = br * br + b.imag() * b.imag();
  return {(a.real() * br + a.imag() * b.imag()) / d, (a.imag() * br - a.real() * b.imag()) / d};
}

// Twiddles exp(-2 pi i k / n), k < n/2. Computed directly rather than by
// recurrence, so the error does not grow with n.
inline std::vector<Complex> twiddles(int n) {
  std::vector<Complex> t(static_cast<std::size_t>(std::max(n / 2, 1)));
  for (int k = 0; k < n / 2; ++k) {
    const double ang = -2.0 * std::numbers::pi * k / n;
    t[static_cast<std::size_t>(k)] = {std::cos(ang), std::sin(ang)};
  }
  return t;
}

// In-place transform of n values spaced `stride` apart. Unnormalized; the
// inverse is scaled by the caller. The products are written out by hand:
// std::complex operator* goes through the slow inf/nan-checking path.
inline void fft1(Complex* v, int n, std::size_t stride, bool inverse, const std::vector<Complex>& tw,
                 std::vector<Complex>& scratch) {
  scratch.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) scratch[i] = v[i * stride];
  for (int i = 1, j = 0; i < n; ++i) {
    int bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(scratch[i], scratch[j]);
  }
  const double sign = inverse ? -1.0 : 1.0;
  for (int len = 2; len <= n; len <<= 1) {
    const int half = len / 2;
    const int step = n / len;
    for (int i = 0; i < n; i += len) {
      for (int k = 0; k < half; ++k) {
        const Complex w = tw[static_cast<std::size_t>(k * step)];
        const double wr = w.real();
        const double wi = sign * w.imag();
        const Complex a = scratch[i + k];
        const Complex c = scratch[i + k + half];
        const double br = c.real() * wr - c.imag() * wi;
        const double bi = c.real() * wi + c.imag() * wr;
        scratch[i + k] = {a.real() + br, a.imag() + bi};
        scratch[i + k + half] = {a.real() - br, a.imag() - bi};
      }
    }
  }
  for (int i = 0; i < n; ++i) v[i * stride] = scratch[i];
}

inline void fft2_inplace(ComplexPlane& p, bool inverse) {
  require_pow2(p.width, p.height);
  std::vector<Complex> scratch;
  const auto tw_row = twiddles(p.width);
  const auto tw_col = twiddles(p.height);
  for (int y = 0; y < p.height; ++y) fft1(&p.at(0, y), p.width, 1, inverse, tw_row, scratch);
  for (int x = 0; x < p.width; ++x) {
    fft1(&p.at(x, 0), p.height, static_cast<std::size_t>(p.width), inverse, tw_col, scratch);
  }
  if (inverse) {
    const double s = 1.0 / static_cast<double>(p.size());
    for (auto& c : p.data) c *= s;
  }
}

}  // namespace detail

inline ComplexPlane dft2(const RealPlane& x) {
  detail::require_pow2(x.width, x.height);
  ComplexPlane out(x.width, x.height);
  for (std::size_t i = 0; i < x.size(); ++i) out.data[i] = x.data[i];
  detail::fft2_inplace(out, false);
  return out;
}

inline ComplexPlane dft2(ComplexPlane x) {
  detail::fft2_inplace(x, false);
  return x;
}

/// Inverse transform, scaled by 1/N.
inline ComplexPlane idft2(ComplexPlane x) {
  detail::fft2_inplace(x, true);
  return x;
}

/// Real part of the inverse transform.
inline RealPlane idft2_real(ComplexPlane x) {
  detail::fft2_inplace(x, true);
  RealPlane out(x.width, x.height);
  for (std::size_t i = 0; i < x.size(); ++i) out.data[i] = x.data[i].real();
  return out;
}

}  // namespace hexatrack
