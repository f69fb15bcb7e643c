#include "ddfm/em.hpp"

#include <algorithm>
#include <cmath>

#include "ddfm/error.hpp"
#include "ddfm/periodic_solver.hpp"

namespace ddfm::em {

namespace {

void require_same(const ImageTensor& a, const ImageTensor& b, const char* what) {
  if (!a.same_shape(b)) throw ShapeError(std::string(what) + ": shape mismatch");
}

}  // namespace

std::string to_string(ExpectationForm f) {
  return f == ExpectationForm::kPosterior ? "posterior" : "as_printed";
}

ExpectationForm parse_expectation_form(const std::string& s) {
  if (s == "posterior") return ExpectationForm::kPosterior;
  if (s == "as_printed") return ExpectationForm::kAsPrinted;
  throw ConfigError("expectation form must be 'posterior' or 'as_printed', got '" + s + "'");
}

void EmParams::validate() const {
  if (!(psi >= 0.0)) throw ParameterError("psi must be >= 0");
  if (!(eta > 0.0)) throw ParameterError("eta must be > 0");
  if (!(epsilon_clamp > 0.0)) throw ParameterError("epsilon_clamp must be > 0");
  if (fixed_phi && !(*fixed_phi >= 0.0)) throw ParameterError("phi must be >= 0");
}

EmState EmState::initial(int height, int width, int channels) {
  EmState s;
  s.k = ImageTensor(height, width, channels);
  s.u = GradientField(height, width, channels);
  return s;
}

Expectations e_step(const ImageTensor& x, const ImageTensor& y, double gamma, double rho,
                    const EmParams& params) {
  require_same(x, y, "e_step");
  if (!(gamma > 0.0) || !(rho > 0.0)) throw ParameterError("e_step: gamma and rho must be > 0");
  const double eps = params.epsilon_clamp;
  Expectations ex{ImageTensor(x.height(), x.width(), x.channels()),
                  ImageTensor(x.height(), x.width(), x.channels())};
  if (params.form == ExpectationForm::kPosterior) {
    const double cm = std::sqrt(2.0 / gamma);
    const double cn = std::sqrt(2.0 / rho);
    for (std::size_t i = 0; i < x.size(); ++i) {
      ex.m_bar[i] = cm / std::max(std::abs(y[i] - x[i]), eps);
      ex.n_bar[i] = cn / std::max(std::abs(x[i]), eps);
    }
  } else {
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double r = std::max(std::abs(y[i] - x[i]), eps);
      const double a = std::max(std::abs(x[i]), eps);
      ex.m_bar[i] = std::sqrt(2.0 * r * r / gamma);
      ex.n_bar[i] = std::sqrt(2.0 * a * a / rho);
    }
  }
  return ex;
}

Scales update_hyperparams(const Expectations& ex, double gamma, double rho,
                          const EmParams& params) {
  require_same(ex.m_bar, ex.n_bar, "update_hyperparams");
  if (!(gamma > 0.0) || !(rho > 0.0)) {
    throw ParameterError("update_hyperparams: gamma and rho must be > 0");
  }
  const double eps = params.epsilon_clamp;
  double sum_m = 0.0, sum_n = 0.0;
  for (std::size_t i = 0; i < ex.m_bar.size(); ++i) {
    sum_m += 1.0 / std::max(ex.m_bar[i], eps) + 0.5 * gamma;
    sum_n += 1.0 / std::max(ex.n_bar[i], eps) + 0.5 * rho;
  }
  const double count = static_cast<double>(ex.m_bar.size());
  return {std::max(sum_m / count, eps), std::max(sum_n / count, eps)};
}

ImageTensor update_k(const ImageTensor& x, const GradientField& u) {
  if (!u.matches(x)) throw ShapeError("update_k: u does not match x");
  // (I + grad^T grad) k = x + grad^T u, and grad^T = -div.
  return solve_identity_plus_laplacian(x - div(u));
}

GradientField update_u(const ImageTensor& k, const EmParams& params) {
  if (!(params.eta > 0.0)) throw ParameterError("update_u: eta must be > 0");
  GradientField u = grad(k);
  u *= params.eta / (2.0 * params.psi + params.eta);
  return u;
}

ImageTensor update_x(const ImageTensor& m_bar, const ImageTensor& n_bar, const ImageTensor& y,
                     const ImageTensor& k, const EmParams& params) {
  require_same(m_bar, n_bar, "update_x");
  require_same(m_bar, y, "update_x");
  require_same(m_bar, k, "update_x");
  const double eta = params.eta;
  ImageTensor x(y.height(), y.width(), y.channels());
  for (std::size_t i = 0; i < x.size(); ++i) {
    x[i] = (2.0 * m_bar[i] * y[i] + eta * k[i]) / (2.0 * m_bar[i] + 2.0 * n_bar[i] + eta);
  }
  return x;
}

double q_objective(const ImageTensor& x, const ImageTensor& y, const ImageTensor& m_bar,
                   const ImageTensor& n_bar, double psi) {
  require_same(x, y, "q_objective");
  require_same(x, m_bar, "q_objective");
  require_same(x, n_bar, "q_objective");
  double data = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = x[i] - y[i];
    data += m_bar[i] * r * r + n_bar[i] * x[i] * x[i];
  }
  return data + (psi == 0.0 ? 0.0 : psi * squared_norm(grad(x)));
}

double x_objective(const ImageTensor& x, const ImageTensor& y, const ImageTensor& m_bar,
                   const ImageTensor& n_bar, const ImageTensor& k, double eta) {
  require_same(x, k, "x_objective");
  const double coupling = [&] {
    double acc = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) acc += (k[i] - x[i]) * (k[i] - x[i]);
    return acc;
  }();
  return q_objective(x, y, m_bar, n_bar, 0.0) + 0.5 * eta * coupling;
}

double split_objective(const ImageTensor& x, const ImageTensor& y, const ImageTensor& m_bar,
                       const ImageTensor& n_bar, const ImageTensor& k, const GradientField& u,
                       const EmParams& params) {
  if (!u.matches(k)) throw ShapeError("split_objective: u does not match k");
  GradientField residual = grad(k);
  residual *= -1.0;
  residual.horizontal += u.horizontal;
  residual.vertical += u.vertical;
  return x_objective(x, y, m_bar, n_bar, k, params.eta) + params.psi * squared_norm(u) +
         0.5 * params.eta * squared_norm(residual);
}

RectifyResult em_rectify(const ImageTensor& f0_tilde, const ImageTensor& ir,
                         const ImageTensor& vis, EmState& state, const EmParams& params) {
  params.validate();
  require_same(f0_tilde, vis, "em_rectify");
  const ImageTensor ir_b = ir.channels() == vis.channels() ? ir : broadcast_ir(ir, vis.channels());
  require_same(ir_b, vis, "em_rectify");
  if (!state.k.same_shape(vis) || !state.u.matches(vis)) {
    throw ShapeError("em_rectify: state shape does not match the images");
  }

  // E-step.
  const ImageTensor x_tilde = f0_tilde - vis;
  state.y = ir_b - vis;
  if (params.fixed_phi) {
    state.m_bar = ImageTensor(vis.height(), vis.width(), vis.channels(), 1.0);
    state.n_bar = ImageTensor(vis.height(), vis.width(), vis.channels(), *params.fixed_phi);
  } else {
    Expectations ex = e_step(x_tilde, state.y, state.gamma, state.rho, params);
    const Scales scales = update_hyperparams(ex, state.gamma, state.rho, params);
    state.gamma = scales.gamma;
    state.rho = scales.rho;
    state.m_bar = std::move(ex.m_bar);
    state.n_bar = std::move(ex.n_bar);
  }

  // M-step: one (k, u, x) sweep.
  RectifyTrace trace;
  trace.split_before =
      split_objective(x_tilde, state.y, state.m_bar, state.n_bar, state.k, state.u, params);
  state.k = update_k(x_tilde, state.u);
  state.u = update_u(state.k, params);
  state.x = update_x(state.m_bar, state.n_bar, state.y, state.k, params);

  trace.x_loss_before = x_objective(x_tilde, state.y, state.m_bar, state.n_bar, state.k, params.eta);
  trace.x_loss_after = x_objective(state.x, state.y, state.m_bar, state.n_bar, state.k, params.eta);
  trace.split_after =
      split_objective(state.x, state.y, state.m_bar, state.n_bar, state.k, state.u, params);
  trace.q = q_objective(state.x, state.y, state.m_bar, state.n_bar, params.psi);
  trace.gamma = state.gamma;
  trace.rho = state.rho;

  return {state.x + vis, trace};
}

}  // namespace ddfm::em
