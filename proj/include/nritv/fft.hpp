#pragma once

#include <fftw3.h>

#include <map>
#include <mutex>
#include <vector>

#include "nritv/core.hpp"

namespace nritv {
namespace detail {

struct FftPlans {
  fftw_plan fwd = nullptr;
  fftw_plan bwd = nullptr;
};

/// Plans are created once per size with FFTW_ESTIMATE (deterministic
/// algorithm choice) and FFTW_UNALIGNED (usable on any buffer), then
/// executed via the thread-safe new-array interface.
inline const FftPlans& plans_for(int n) {
  static std::mutex mtx;
  static std::map<int, FftPlans> cache;
  std::lock_guard<std::mutex> lock(mtx);
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  std::vector<cd> a(static_cast<size_t>(n) * n), b(a.size());
  FftPlans p;
  p.fwd = fftw_plan_dft_2d(n, n, reinterpret_cast<fftw_complex*>(a.data()),
                           reinterpret_cast<fftw_complex*>(b.data()), FFTW_FORWARD,
                           FFTW_ESTIMATE | FFTW_UNALIGNED);
  p.bwd = fftw_plan_dft_2d(n, n, reinterpret_cast<fftw_complex*>(a.data()),
                           reinterpret_cast<fftw_complex*>(b.data()), FFTW_BACKWARD,
                           FFTW_ESTIMATE | FFTW_UNALIGNED);
  return cache.emplace(n, p).first->second;
}

inline std::vector<cd>& fft_scratch() {
  thread_local std::vector<cd> buf;
  return buf;
}

}  // namespace detail

/// out = fftshift(DFT2(in)) / n. Unitary, so the adjoint below is also
/// the inverse. k-space storage is centered: DC lands at (n/2, n/2).
inline void fft2_centered(const CImage& in, CImage& out) {
  const int n = in.n;
  require(n >= 1, "fft2_centered: empty image");
  if (out.n != n) out = CImage(n);
  auto& tmp = detail::fft_scratch();
  tmp.resize(in.size());
  const auto& plans = detail::plans_for(n);
  fftw_execute_dft(plans.fwd,
                   reinterpret_cast<fftw_complex*>(const_cast<cd*>(in.v.data())),
                   reinterpret_cast<fftw_complex*>(tmp.data()));
  const double scale = 1.0 / n;
  const int h = n / 2;  // fftshift: source k goes to (k + h) mod n
  for (int i = 0; i < n; ++i) {
    int si = i + h;
    if (si >= n) si -= n;
    for (int j = 0; j < n; ++j) {
      int sj = j + h;
      if (sj >= n) sj -= n;
      out(si, sj) = tmp[static_cast<size_t>(i) * n + j] * scale;
    }
  }
}

/// out = IDFT2(ifftshift(in)) / n. Exact adjoint (and inverse) of
/// fft2_centered.
inline void ifft2_centered(const CImage& in, CImage& out) {
  const int n = in.n;
  require(n >= 1, "ifft2_centered: empty image");
  auto& tmp = detail::fft_scratch();
  tmp.resize(in.size());
  const int h = n / 2;  // ifftshift: undo the (k + h) mod n move
  for (int i = 0; i < n; ++i) {
    int si = i + h;
    if (si >= n) si -= n;
    for (int j = 0; j < n; ++j) {
      int sj = j + h;
      if (sj >= n) sj -= n;
      tmp[static_cast<size_t>(i) * n + j] = in(si, sj);
    }
  }
  if (out.n != n) out = CImage(n);
  const auto& plans = detail::plans_for(n);
  fftw_execute_dft(plans.bwd, reinterpret_cast<fftw_complex*>(tmp.data()),
                   reinterpret_cast<fftw_complex*>(out.v.data()));
  const double scale = 1.0 / n;
  for (cd& x : out.v) x *= scale;
}

}  // namespace nritv
