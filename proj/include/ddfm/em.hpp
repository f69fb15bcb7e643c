#pragma once

#include <optional>
#include <string>

#include "ddfm/tensor.hpp"

// Likelihood rectification for infrared/visible fusion.
//
// With x = f - v and y = i - v the fusion loss |y - x|_1 + phi |x|_1 is read
// as a hierarchical model: y | x, m ~ N(x, m), m ~ Exp(mean gamma),
// x | n ~ N(0, n), n ~ Exp(mean rho), plus a penalty psi/2 |grad x|^2.
// One EM pass computes the posterior expectations of 1/m and 1/n, refreshes
// gamma and rho, then runs one half-quadratic-splitting sweep (k, u, x) on
//
//   sum m_bar (x - y)^2 + sum n_bar x^2 + psi |u|^2
//       + eta/2 (|u - grad k|^2 + |k - x|^2).
namespace ddfm::em {

// How E[1/m] is evaluated.
//  kPosterior: mean of the inverse-Gaussian posterior of 1/m implied by the
//              model, sqrt(2 / gamma) / |y - x| (the usual L1 reweighting).
//  kAsPrinted: sqrt(2 (y - x)^2 / gamma), the closed form as commonly quoted
//              for this model; kept for comparison runs.
enum class ExpectationForm { kPosterior, kAsPrinted };

std::string to_string(ExpectationForm f);
ExpectationForm parse_expectation_form(const std::string& s);

struct EmParams {
  double psi = 0.5;             // TV weight
  double eta = 0.1;             // splitting weight
  double epsilon_clamp = 1e-6;  // lower bound on |y - x|, |x|, gamma, rho
  std::optional<double> fixed_phi;  // bypass inference: m_bar = 1, n_bar = phi
  ExpectationForm form = ExpectationForm::kPosterior;

  void validate() const;  // throws ParameterError
};

struct Expectations {
  ImageTensor m_bar;  // E[1/m]
  ImageTensor n_bar;  // E[1/n]
};

struct EmState {
  ImageTensor y;
  ImageTensor x;
  ImageTensor m_bar;
  ImageTensor n_bar;
  ImageTensor k;
  GradientField u;
  double gamma = 1.0;
  double rho = 1.0;

  // gamma = rho = 1, zero u and k of the given shape.
  static EmState initial(int height, int width, int channels);
};

Expectations e_step(const ImageTensor& x, const ImageTensor& y, double gamma, double rho,
                    const EmParams& params);

struct Scales {
  double gamma = 1.0;
  double rho = 1.0;
};

// gamma' = mean E[m], rho' = mean E[n], with E[m] = 1/m_bar + gamma/2 (the
// reciprocal moment of an inverse Gaussian with mean m_bar and shape 2/gamma).
// Results are floored at epsilon_clamp.
Scales update_hyperparams(const Expectations& ex, double gamma, double rho,
                          const EmParams& params);

// argmin_k |k - x|^2 + |u - grad k|^2 (periodic FFT solve).
ImageTensor update_k(const ImageTensor& x, const GradientField& u);
// eta / (2 psi + eta) * grad k.
GradientField update_u(const ImageTensor& k, const EmParams& params);
// (2 m_bar y + eta k) / (2 m_bar + 2 n_bar + eta), element-wise.
ImageTensor update_x(const ImageTensor& m_bar, const ImageTensor& n_bar, const ImageTensor& y,
                     const ImageTensor& k, const EmParams& params);

// sum m_bar (x - y)^2 + sum n_bar x^2 + psi |grad x|^2 (negated Q up to a factor).
double q_objective(const ImageTensor& x, const ImageTensor& y, const ImageTensor& m_bar,
                   const ImageTensor& n_bar, double psi);
// x-subproblem loss: sum m_bar (x - y)^2 + sum n_bar x^2 + eta/2 |k - x|^2.
double x_objective(const ImageTensor& x, const ImageTensor& y, const ImageTensor& m_bar,
                   const ImageTensor& n_bar, const ImageTensor& k, double eta);
// Full split objective over (x, u, k).
double split_objective(const ImageTensor& x, const ImageTensor& y, const ImageTensor& m_bar,
                       const ImageTensor& n_bar, const ImageTensor& k, const GradientField& u,
                       const EmParams& params);

struct RectifyTrace {
  double q = 0.0;             // q_objective after the pass
  double x_loss_before = 0.0; // x_objective at the unrectified estimate
  double x_loss_after = 0.0;  // x_objective at the rectified estimate
  double split_before = 0.0;  // split_objective entering the M-step
  double split_after = 0.0;   // split_objective after the (k, u, x) sweep
  double gamma = 0.0;
  double rho = 0.0;
};

struct RectifyResult {
  ImageTensor f0_hat;
  RectifyTrace trace;
};

// One E + M pass turning the unconditional estimate into the rectified one.
// `ir` may be single-channel; it is replicated to vis's channel count.
// `state` carries (gamma, rho, u, k) across calls and receives x, y, m_bar, n_bar.
RectifyResult em_rectify(const ImageTensor& f0_tilde, const ImageTensor& ir,
                         const ImageTensor& vis, EmState& state, const EmParams& params);

}  // namespace ddfm::em
