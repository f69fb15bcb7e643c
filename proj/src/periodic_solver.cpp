#include "ddfm/periodic_solver.hpp"

#include <fftw3.h>

#include <cmath>
#include <complex>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <utility>

namespace ddfm {

namespace {

// The FFTW planner is not thread-safe; execution with distinct plans is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

class PlanPair {
 public:
  PlanPair(int height, int width) : height_(height), width_(width) {
    const std::size_t real_n = static_cast<std::size_t>(height) * width;
    const std::size_t spec_n = static_cast<std::size_t>(height) * (width / 2 + 1);
    real_ = fftw_alloc_real(real_n);
    spec_ = fftw_alloc_complex(spec_n);
    std::lock_guard lock(planner_mutex());
    forward_ = fftw_plan_dft_r2c_2d(height, width, real_, spec_, FFTW_ESTIMATE);
    inverse_ = fftw_plan_dft_c2r_2d(height, width, spec_, real_, FFTW_ESTIMATE);
    eigen_.resize(spec_n);
    const int wc = width / 2 + 1;
    for (int q = 0; q < height; ++q) {
      const double lv = 2.0 - 2.0 * std::cos(2.0 * std::numbers::pi * q / height);
      for (int p = 0; p < wc; ++p) {
        const double lh = 2.0 - 2.0 * std::cos(2.0 * std::numbers::pi * p / width);
        eigen_[static_cast<std::size_t>(q) * wc + p] = lh + lv;
      }
    }
  }
  ~PlanPair() {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(forward_);
    fftw_destroy_plan(inverse_);
    fftw_free(real_);
    fftw_free(spec_);
  }
  PlanPair(const PlanPair&) = delete;
  PlanPair& operator=(const PlanPair&) = delete;

  void solve_plane(const ImageTensor& rhs, int ch, double weight, ImageTensor& out) {
    const int nc = rhs.channels();
    const std::size_t n = static_cast<std::size_t>(height_) * width_;
    for (std::size_t p = 0; p < n; ++p) real_[p] = rhs[p * nc + ch];
    fftw_execute(forward_);
    const double scale = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < eigen_.size(); ++i) {
      const double d = scale / (1.0 + weight * eigen_[i]);
      spec_[i][0] *= d;
      spec_[i][1] *= d;
    }
    fftw_execute(inverse_);
    for (std::size_t p = 0; p < n; ++p) out[p * nc + ch] = real_[p];
  }

 private:
  int height_;
  int width_;
  double* real_ = nullptr;
  fftw_complex* spec_ = nullptr;
  fftw_plan forward_ = nullptr;
  fftw_plan inverse_ = nullptr;
  std::vector<double> eigen_;
};

PlanPair& plans_for(int height, int width) {
  thread_local std::map<std::pair<int, int>, std::unique_ptr<PlanPair>> cache;
  auto& slot = cache[{height, width}];
  if (!slot) slot = std::make_unique<PlanPair>(height, width);
  return *slot;
}

}  // namespace

ImageTensor solve_identity_plus_laplacian(const ImageTensor& rhs, double weight) {
  ImageTensor out(rhs.height(), rhs.width(), rhs.channels());
  PlanPair& plans = plans_for(rhs.height(), rhs.width());
  for (int ch = 0; ch < rhs.channels(); ++ch) plans.solve_plane(rhs, ch, weight, out);
  return out;
}

}  // namespace ddfm
