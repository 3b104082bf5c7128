#pragma once

// Thin wrapper around FFTW double-precision complex transforms.
//
// Normalization contract used across the library: the forward transform is
// unscaled, the backward transform divides by the number of grid points, so
// backward(forward(x)) == x. Plans are created with FFTW_ESTIMATE so results
// are reproducible run to run, cached per (dims, sign), and guarded by a
// mutex (FFTW planning is not thread safe; execution on distinct arrays is).

#include <fftw3.h>

#include <complex>
#include <map>
#include <mutex>
#include <vector>

#include "core.hpp"

namespace lddmm {

using cplx = std::complex<double>;

namespace fftdetail {

struct PlanKey {
  std::array<int, kMaxDim> n;
  int d;
  int sign;
  bool operator<(const PlanKey& o) const {
    if (d != o.d) return d < o.d;
    if (sign != o.sign) return sign < o.sign;
    return n < o.n;
  }
};

class PlanCache {
 public:
  static PlanCache& instance() {
    static PlanCache c;
    return c;
  }

  fftw_plan get(const GridSpec& g, int sign) {
    PlanKey key{g.dims, g.d, sign};
    std::lock_guard<std::mutex> lock(mu_);
    auto it = plans_.find(key);
    if (it != plans_.end()) return it->second;
    // Plan on a scratch buffer; FFTW_UNALIGNED lets us execute on any
    // double-aligned array later via fftw_execute_dft.
    std::vector<cplx> scratch(g.size());
    auto* p = reinterpret_cast<fftw_complex*>(scratch.data());
    fftw_plan plan = fftw_plan_dft(g.d, g.dims.data(), p, p, sign,
                                   FFTW_ESTIMATE | FFTW_UNALIGNED);
    if (!plan) throw Error("fftw plan creation failed");
    plans_.emplace(key, plan);
    return plan;
  }

 private:
  PlanCache() = default;
  std::mutex mu_;
  std::map<PlanKey, fftw_plan> plans_;
};

}  // namespace fftdetail

// In-place unscaled forward DFT.
inline void fft_forward(const GridSpec& g, cplx* data) {
  fftw_plan plan = fftdetail::PlanCache::instance().get(g, FFTW_FORWARD);
  auto* p = reinterpret_cast<fftw_complex*>(data);
  fftw_execute_dft(plan, p, p);
}

// In-place backward DFT scaled by 1/prod(dims).
inline void fft_backward(const GridSpec& g, cplx* data) {
  fftw_plan plan = fftdetail::PlanCache::instance().get(g, FFTW_BACKWARD);
  auto* p = reinterpret_cast<fftw_complex*>(data);
  fftw_execute_dft(plan, p, p);
  const double scale = 1.0 / static_cast<double>(g.size());
  const std::size_t n = g.size();
  for (std::size_t i = 0; i < n; ++i) data[i] *= scale;
}

inline std::vector<cplx> fft_of(const ScalarField& f) {
  std::vector<cplx> buf(f.size());
  for (std::size_t i = 0; i < f.size(); ++i) buf[i] = f.v[i];
  fft_forward(f.grid, buf.data());
  return buf;
}

// Real part of the scaled inverse transform. The imaginary residue of a
// conjugate-symmetric spectrum is roundoff; callers that need to assert
// symmetry do so themselves (see spectral.hpp).
inline ScalarField real_ifft(const GridSpec& g, std::vector<cplx> spectrum) {
  detail::require(spectrum.size() == g.size(), "real_ifft: spectrum size mismatch");
  fft_backward(g, spectrum.data());
  ScalarField out(g);
  for (std::size_t i = 0; i < g.size(); ++i) out.v[i] = spectrum[i].real();
  return out;
}

}  // namespace lddmm
