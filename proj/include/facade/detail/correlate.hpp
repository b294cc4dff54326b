#pragma once

#include <fftw3.h>

#include <cmath>
#include <complex>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <utility>
#include <vector>

#include "facade/error.hpp"
#include "facade/image.hpp"

namespace facade::detail {

// Smallest n' >= n whose only prime factors are 2, 3 and 5.
inline int fft_friendly_size(int n) {
  for (int m = std::max(n, 1);; ++m) {
    int r = m;
    for (int p : {2, 3, 5}) {
      while (r % p == 0) r /= p;
    }
    if (r == 1) return m;
  }
}

struct FftwDeleter {
  void operator()(void* p) const noexcept { fftw_free(p); }
};
using RealBuffer = std::unique_ptr<double[], FftwDeleter>;
using ComplexBuffer = std::unique_ptr<fftw_complex[], FftwDeleter>;

inline RealBuffer alloc_real(std::size_t n) {
  return RealBuffer(static_cast<double*>(fftw_malloc(sizeof(double) * n)));
}
inline ComplexBuffer alloc_complex(std::size_t n) {
  return ComplexBuffer(static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * n)));
}

// FFTW planning is not thread-safe; execution through the new-array interface
// is. Plans are created once per padded size and kept for the process lifetime.
class FftPlans {
 public:
  struct Pair {
    fftw_plan forward = nullptr;
    fftw_plan inverse = nullptr;
  };

  static Pair get(int rows, int cols) {
    static FftPlans instance;
    std::lock_guard lock(instance.mutex_);
    auto it = instance.plans_.find({rows, cols});
    if (it != instance.plans_.end()) return it->second;
    const std::size_t n_real = static_cast<std::size_t>(rows) * cols;
    const std::size_t n_cplx = static_cast<std::size_t>(rows) * (cols / 2 + 1);
    auto real = alloc_real(n_real);
    auto cplx = alloc_complex(n_cplx);
    Pair p;
    p.forward = fftw_plan_dft_r2c_2d(rows, cols, real.get(), cplx.get(), FFTW_ESTIMATE);
    p.inverse = fftw_plan_dft_c2r_2d(rows, cols, cplx.get(), real.get(), FFTW_ESTIMATE);
    if (!p.forward || !p.inverse) throw Error(ErrorKind::InvalidParam, "FFTW planning failed");
    instance.plans_.emplace(std::make_pair(rows, cols), p);
    return p;
  }

 private:
  FftPlans() = default;
  ~FftPlans() {
    for (auto& [key, p] : plans_) {
      fftw_destroy_plan(p.forward);
      fftw_destroy_plan(p.inverse);
    }
  }

  std::mutex mutex_;
  std::map<std::pair<int, int>, Pair> plans_;
};

/// Exact sliding dot products of integer templates against a fixed integer
/// region. The region spectrum is computed once; each template costs one
/// forward and one inverse transform. Results are rounded to the nearest
/// integer, which is exact because every true value is an integer and the
/// transform error is orders of magnitude below 0.5 at these sizes.
class RegionCorrelator {
 public:
  explicit RegionCorrelator(const GrayImage& region)
      : rw_(region.width()), rh_(region.height()),
        pw_(fft_friendly_size(region.width())), ph_(fft_friendly_size(region.height())),
        plans_(FftPlans::get(ph_, pw_)), spectrum_(alloc_complex(complex_size())) {
    auto buf = alloc_real(real_size());
    std::fill(buf.get(), buf.get() + real_size(), 0.0);
    for (int r = 0; r < rh_; ++r) {
      for (int c = 0; c < rw_; ++c) buf[static_cast<std::size_t>(r) * pw_ + c] = region.at(c, r);
    }
    fftw_execute_dft_r2c(plans_.forward, buf.get(), spectrum_.get());
  }

  int region_width() const noexcept { return rw_; }
  int region_height() const noexcept { return rh_; }

  /// out[v * (rw - tw + 1) + u] = sum_{i,j} region(u + i, v + j) * tmpl(i, j).
  std::vector<std::int64_t> correlate(const GrayImage& tmpl) const {
    const int tw = tmpl.width(), th = tmpl.height();
    if (tw > rw_ || th > rh_) {
      throw Error(ErrorKind::BandTooSmall, "template larger than search region");
    }
    auto buf = alloc_real(real_size());
    std::fill(buf.get(), buf.get() + real_size(), 0.0);
    for (int r = 0; r < th; ++r) {
      for (int c = 0; c < tw; ++c) buf[static_cast<std::size_t>(r) * pw_ + c] = tmpl.at(c, r);
    }
    auto prod = alloc_complex(complex_size());
    fftw_execute_dft_r2c(plans_.forward, buf.get(), prod.get());
    for (std::size_t k = 0; k < complex_size(); ++k) {
      // region * conj(template) gives cross-correlation.
      const double ar = spectrum_[k][0], ai = spectrum_[k][1];
      const double br = prod[k][0], bi = -prod[k][1];
      prod[k][0] = ar * br - ai * bi;
      prod[k][1] = ar * bi + ai * br;
    }
    fftw_execute_dft_c2r(plans_.inverse, prod.get(), buf.get());

    const int nu = rw_ - tw + 1, nv = rh_ - th + 1;
    const double scale = 1.0 / (static_cast<double>(pw_) * ph_);
    std::vector<std::int64_t> out(static_cast<std::size_t>(nu) * nv);
    for (int v = 0; v < nv; ++v) {
      for (int u = 0; u < nu; ++u) {
        out[static_cast<std::size_t>(v) * nu + u] =
            std::llround(buf[static_cast<std::size_t>(v) * pw_ + u] * scale);
      }
    }
    return out;
  }

 private:
  std::size_t real_size() const { return static_cast<std::size_t>(ph_) * pw_; }
  std::size_t complex_size() const { return static_cast<std::size_t>(ph_) * (pw_ / 2 + 1); }

  int rw_, rh_, pw_, ph_;
  FftPlans::Pair plans_;
  ComplexBuffer spectrum_;
};

/// Summed-area tables of values and squared values (exact, 64-bit).
class IntegralImage {
 public:
  explicit IntegralImage(const GrayImage& img)
      : w_(img.width()), h_(img.height()),
        sum_(static_cast<std::size_t>(w_ + 1) * (h_ + 1), 0),
        sq_(static_cast<std::size_t>(w_ + 1) * (h_ + 1), 0) {
    for (int r = 0; r < h_; ++r) {
      std::int64_t row_s = 0, row_q = 0;
      for (int c = 0; c < w_; ++c) {
        const std::int64_t v = img.at(c, r);
        row_s += v;
        row_q += v * v;
        sum_[idx(c + 1, r + 1)] = sum_[idx(c + 1, r)] + row_s;
        sq_[idx(c + 1, r + 1)] = sq_[idx(c + 1, r)] + row_q;
      }
    }
  }

  std::int64_t sum(int x, int y, int w, int h) const { return rect(sum_, x, y, w, h); }
  std::int64_t sum_sq(int x, int y, int w, int h) const { return rect(sq_, x, y, w, h); }

 private:
  std::size_t idx(int c, int r) const { return static_cast<std::size_t>(r) * (w_ + 1) + c; }
  std::int64_t rect(const std::vector<std::int64_t>& t, int x, int y, int w, int h) const {
    return t[idx(x + w, y + h)] - t[idx(x, y + h)] - t[idx(x + w, y)] + t[idx(x, y)];
  }

  int w_, h_;
  std::vector<std::int64_t> sum_;
  std::vector<std::int64_t> sq_;
};

}  // namespace facade::detail
