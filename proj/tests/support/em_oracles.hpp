#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <random>

#include "ddfm/em.hpp"
#include "test_support.hpp"

namespace support {

// Posterior moments of the latent variance m given a residual r under
// r | m ~ N(0, m), m ~ Exp(mean g), by self-normalized importance sampling.
// The target is the unnormalized model density N(r; 0, m) Exp(m; g), so
// nothing here relies on the inverse-Gaussian algebra. The proposal is
// uniform in log m over [log(r^2) - 10, log(g) + 4]; outside that bracket the
// posterior (and its 1/m moment) is below exp(-50) of its peak.
struct LatentMoments {
  double inv_mean = 0.0;  // E[1/m | r]
  double mean = 0.0;      // E[m | r]
};

inline LatentMoments mc_latent_moments(std::mt19937_64& rng, double r, double g, int samples) {
  const double lo = std::min(std::log(r * r), std::log(g)) - 10.0;
  const double hi = std::max(std::log(r * r), std::log(g)) + 4.0;
  std::uniform_real_distribution<double> proposal(lo, hi);
  double w_sum = 0.0, inv_sum = 0.0, m_sum = 0.0;
  for (int i = 0; i < samples; ++i) {
    const double lm = proposal(rng);
    const double m = std::exp(lm);
    // Density in log m: N(r; 0, m) Exp(m; g) m, up to constants.
    const double w = std::exp(0.5 * lm - 0.5 * r * r / m - m / g);
    w_sum += w;
    inv_sum += w / m;
    m_sum += w * m;
  }
  return {inv_sum / w_sum, m_sum / w_sum};
}

// Inverse-Gaussian draw (Michael, Schucany and Haas transformation).
inline double sample_inverse_gaussian(std::mt19937_64& rng, double mu, double lambda) {
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> uniform;
  const double nu = normal(rng);
  const double y = nu * nu;
  const double x = mu + mu * mu * y / (2 * lambda) -
                   mu / (2 * lambda) * std::sqrt(4 * mu * lambda * y + mu * mu * y * y);
  return uniform(rng) <= mu / (mu + x) ? x : mu * mu / x;
}

// Quadratic form P with x^T P x = min_{k,u} psi |u|^2 + eta/2 (|u - G k|^2 + |k - x|^2)
// for a single-channel h x w image, by a dense Schur complement.
inline Eigen::MatrixXd split_regularizer(int h, int w, double psi, double eta) {
  const int n = h * w;
  const Eigen::MatrixXd g = dense_grad(h, w);
  // z = (k, u); objective z^T A z - 2 z^T B x + eta/2 x^T x.
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(3 * n, 3 * n);
  a.topLeftCorner(n, n) = 0.5 * eta * (g.transpose() * g + Eigen::MatrixXd::Identity(n, n));
  a.block(0, n, n, 2 * n) = -0.5 * eta * g.transpose();
  a.block(n, 0, 2 * n, n) = -0.5 * eta * g;
  a.bottomRightCorner(2 * n, 2 * n) = (psi + 0.5 * eta) * Eigen::MatrixXd::Identity(2 * n, 2 * n);
  Eigen::MatrixXd b = Eigen::MatrixXd::Zero(3 * n, n);
  b.topRows(n) = 0.5 * eta * Eigen::MatrixXd::Identity(n, n);
  return 0.5 * eta * Eigen::MatrixXd::Identity(n, n) - b.transpose() * a.ldlt().solve(b);
}

// Objective whose minimizer is the fixed point of EM with frozen scales:
// the Laplace terms 2 sqrt(2/gamma)|y - x| + 2 sqrt(2/rho)|x| (the factor 2
// matches the unhalved quadratic form of the M-step) plus the split regularizer.
struct TwoPixelProblem {
  double y0 = 0.0, y1 = 0.0;
  double gamma = 1.0, rho = 1.0;
  Eigen::Matrix2d p;

  double objective(double x0, double x1) const {
    const double cm = 2.0 * std::sqrt(2.0 / gamma), cn = 2.0 * std::sqrt(2.0 / rho);
    const Eigen::Vector2d x(x0, x1);
    return cm * (std::abs(y0 - x0) + std::abs(y1 - x1)) + cn * (std::abs(x0) + std::abs(x1)) +
           x.dot(p * x);
  }
};

struct GridResult {
  double x0 = 0.0, x1 = 0.0, value = 0.0;
};

inline GridResult grid_minimize(const TwoPixelProblem& prob, double lo, double hi, double step) {
  GridResult best{0.0, 0.0, prob.objective(0.0, 0.0)};
  const int n = static_cast<int>(std::lround((hi - lo) / step));
  for (int i = 0; i <= n; ++i) {
    const double x0 = lo + i * step;
    for (int j = 0; j <= n; ++j) {
      const double x1 = lo + j * step;
      const double v = prob.objective(x0, x1);
      if (v < best.value) best = {x0, x1, v};
    }
  }
  return best;
}

// EM with gamma and rho frozen: repeated e_step + (k, u, x) sweeps.
inline ddfm::ImageTensor em_fixed_scales(const ddfm::ImageTensor& y, double gamma, double rho,
                                         const ddfm::em::EmParams& params, int iters) {
  using namespace ddfm;
  ImageTensor x(y.height(), y.width(), y.channels());
  ImageTensor k(y.height(), y.width(), y.channels());
  GradientField u(y.height(), y.width(), y.channels());
  // Start away from the absorbing point x = 0.
  x = 0.5 * y;
  for (int it = 0; it < iters; ++it) {
    const em::Expectations ex = em::e_step(x, y, gamma, rho, params);
    k = em::update_k(x, u);
    u = em::update_u(k, params);
    x = em::update_x(ex.m_bar, ex.n_bar, y, k, params);
  }
  return x;
}

}  // namespace support
