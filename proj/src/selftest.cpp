#include "ddfm/selftest.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "ddfm/pipeline.hpp"
#include "ddfm/rng.hpp"
#include "ddfm/synthetic.hpp"

namespace ddfm {

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a, double b = 0.0) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a, b);
  return buf;
}

ImageTensor random_tensor(NormalStream& rng, int h, int w, int c, double scale) {
  ImageTensor t = rng.normal_tensor(h, w, c);
  t *= scale;
  return t;
}

double max_abs(const ImageTensor& t) {
  double m = 0.0;
  for (double v : t.values()) m = std::max(m, std::abs(v));
  return m;
}

// E[1/m | r] under y - x = r ~ N(0, m), m ~ Exp(mean g), estimated by
// importance sampling from the exponential prior.
double mc_inverse_mean(NormalStream& rng, double r, double g, int samples) {
  double num = 0.0, den = 0.0;
  for (int i = 0; i < samples; ++i) {
    const double m = -g * std::log(rng.uniform());
    const double w = std::exp(-0.5 * r * r / m) / std::sqrt(m);
    num += w / m;
    den += w;
  }
  return num / den;
}

Outcome estep_monte_carlo(const SelftestOptions& o, const SelftestOps& ops) {
  const int instances = o.quick ? 10 : 50;
  const int samples = o.quick ? 40000 : 1000000;
  const double tol = o.quick ? 0.05 : 0.01;
  NormalStream rng(11);
  em::EmParams p;
  double worst = 0.0;
  for (int i = 0; i < instances; ++i) {
    const double gamma = 0.1 + 0.9 * rng.uniform();
    const double rho = 0.1 + 0.9 * rng.uniform();
    const double x = (rng.uniform() < 0.5 ? -1 : 1) * (0.1 + 0.9 * rng.uniform());
    const double r = (rng.uniform() < 0.5 ? -1 : 1) * (0.1 + 0.9 * rng.uniform());
    const ImageTensor xt(1, 1, 1, x), yt(1, 1, 1, x + r);
    const em::Expectations ex = ops.e_step(xt, yt, gamma, rho, p);
    const double mm = mc_inverse_mean(rng, r, gamma, samples);
    const double mn = mc_inverse_mean(rng, x, rho, samples);
    worst = std::max({worst, std::abs(ex.m_bar[0] - mm) / mm, std::abs(ex.n_bar[0] - mn) / mn});
  }
  return {worst <= tol, fmt("max relative error %.3g (tolerance %.3g)", worst, tol)};
}

// Dense (I + G^T G) k = x + G^T u with G built directly from periodic
// forward differences.
ImageTensor dense_k_solve(const ImageTensor& x, const GradientField& u) {
  const int h = x.height(), w = x.width(), n = h * w;
  std::vector<double> a(static_cast<std::size_t>(n) * n, 0.0), b(n, 0.0);
  auto rows = [&](int r, int c, int dr, int dc) {
    // Row of G for the difference x(r+dr, c+dc) - x(r, c).
    std::vector<std::pair<int, double>> g{{((r + dr) % h) * w + (c + dc) % w, 1.0},
                                          {r * w + c, -1.0}};
    return g;
  };
  for (int i = 0; i < n; ++i) {
    a[static_cast<std::size_t>(i) * n + i] += 1.0;
    b[i] = x[i];
  }
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const double uh = u.horizontal[r * w + c], uv = u.vertical[r * w + c];
      for (const auto& [g, val] : {std::pair{rows(r, c, 0, 1), uh}, std::pair{rows(r, c, 1, 0), uv}}) {
        for (const auto& [p, gp] : g) {
          b[p] += gp * val;
          for (const auto& [q, gq] : g) a[static_cast<std::size_t>(p) * n + q] += gp * gq;
        }
      }
    }
  }
  // Gaussian elimination with partial pivoting.
  for (int col = 0; col < n; ++col) {
    int piv = col;
    for (int r = col + 1; r < n; ++r) {
      if (std::abs(a[static_cast<std::size_t>(r) * n + col]) >
          std::abs(a[static_cast<std::size_t>(piv) * n + col])) {
        piv = r;
      }
    }
    if (piv != col) {
      for (int k = 0; k < n; ++k) std::swap(a[static_cast<std::size_t>(col) * n + k], a[static_cast<std::size_t>(piv) * n + k]);
      std::swap(b[col], b[piv]);
    }
    for (int r = col + 1; r < n; ++r) {
      const double f = a[static_cast<std::size_t>(r) * n + col] / a[static_cast<std::size_t>(col) * n + col];
      if (f == 0.0) continue;
      for (int k = col; k < n; ++k) a[static_cast<std::size_t>(r) * n + k] -= f * a[static_cast<std::size_t>(col) * n + k];
      b[r] -= f * b[col];
    }
  }
  std::vector<double> k(n);
  for (int r = n - 1; r >= 0; --r) {
    double acc = b[r];
    for (int c = r + 1; c < n; ++c) acc -= a[static_cast<std::size_t>(r) * n + c] * k[c];
    k[r] = acc / a[static_cast<std::size_t>(r) * n + r];
  }
  return ImageTensor(h, w, 1, std::move(k));
}

Outcome dense_fft(const SelftestOptions&, const SelftestOps& ops) {
  NormalStream rng(23);
  double worst = 0.0;
  for (int trial = 0; trial < 3; ++trial) {
    const ImageTensor x = random_tensor(rng, 8, 8, 1, 1.0);
    GradientField u(8, 8, 1);
    u.horizontal = random_tensor(rng, 8, 8, 1, 0.5);
    u.vertical = random_tensor(rng, 8, 8, 1, 0.5);
    worst = std::max(worst, max_abs(ops.update_k(x, u) - dense_k_solve(x, u)));
  }
  return {worst <= 1e-8, fmt("max |fft - dense| %.3g (tolerance 1e-8)", worst)};
}

Outcome mstep_residuals(const SelftestOptions&, const SelftestOps& ops) {
  NormalStream rng(37);
  em::EmParams p;
  double worst = 0.0;
  for (int trial = 0; trial < 5; ++trial) {
    const int h = 12, w = 10, c = 3;
    const ImageTensor x = random_tensor(rng, h, w, c, 0.5);
    const ImageTensor y = random_tensor(rng, h, w, c, 0.5);
    GradientField u(h, w, c);
    u.horizontal = random_tensor(rng, h, w, c, 0.2);
    u.vertical = random_tensor(rng, h, w, c, 0.2);
    const em::Expectations ex = ops.e_step(x, y, 0.7, 0.4, p);

    const ImageTensor k = ops.update_k(x, u);
    GradientField gk = grad(k);
    GradientField diff = gk;
    diff.horizontal -= u.horizontal;
    diff.vertical -= u.vertical;
    worst = std::max(worst, max_abs((k - x) - div(diff)));

    const GradientField un = ops.update_u(k, p);
    for (const auto& [uc, gc] : {std::pair{&un.horizontal, &gk.horizontal},
                                 std::pair{&un.vertical, &gk.vertical}}) {
      ImageTensor res = (2.0 * p.psi) * *uc + p.eta * (*uc - *gc);
      worst = std::max(worst, max_abs(res));
    }

    const ImageTensor xn = ops.update_x(ex.m_bar, ex.n_bar, y, k, p);
    double xres = 0.0;
    for (std::size_t i = 0; i < xn.size(); ++i) {
      const double scale = 2.0 * ex.m_bar[i] + 2.0 * ex.n_bar[i] + p.eta;
      const double g = 2.0 * ex.m_bar[i] * (xn[i] - y[i]) + 2.0 * ex.n_bar[i] * xn[i] +
                       p.eta * (xn[i] - k[i]);
      xres = std::max(xres, std::abs(g) / scale);
    }
    worst = std::max(worst, xres);
  }
  return {worst <= 1e-8, fmt("max first-order residual %.3g (tolerance 1e-8)", worst)};
}

Outcome split_descent(const SelftestOptions& o, const SelftestOps& ops) {
  const int iters = o.quick ? 10 : 40;
  NormalStream rng(41);
  em::EmParams p;
  const int h = 16, w = 16, c = 1;
  const ImageTensor y = random_tensor(rng, h, w, c, 0.5);
  ImageTensor x = random_tensor(rng, h, w, c, 0.5);
  ImageTensor k(h, w, c);
  GradientField u(h, w, c);
  double gamma = 1.0, rho = 1.0;
  int violations = 0;
  for (int it = 0; it < iters; ++it) {
    em::Expectations ex = ops.e_step(x, y, gamma, rho, p);
    const em::Scales s = em::update_hyperparams(ex, gamma, rho, p);
    gamma = s.gamma;
    rho = s.rho;
    const double before = em::split_objective(x, y, ex.m_bar, ex.n_bar, k, u, p);
    k = ops.update_k(x, u);
    u = ops.update_u(k, p);
    x = ops.update_x(ex.m_bar, ex.n_bar, y, k, p);
    const double after = em::split_objective(x, y, ex.m_bar, ex.n_bar, k, u, p);
    if (after > before * (1.0 + 1e-12)) ++violations;
  }
  return {violations == 0, fmt("%.0f increases of the split objective in %.0f sweeps",
                               violations, iters)};
}

Outcome prop3_decrease(const SelftestOptions& o, const SelftestOps&) {
  const int size = o.quick ? 32 : 64;
  const SyntheticPair pair = make_synthetic_pair(5, size, size);
  FusionConfig config;
  config.schedule.steps = o.quick ? 30 : 100;
  config.seed = 3;
  AnalyticGaussianScore score(default_prior_mean(pair.ir, pair.vis), 0.1);
  const FusionResult r = ddfm_fuse(pair.ir, pair.vis, config, score);
  int violations = 0;
  for (const StepRecord& s : r.manifest.trace) {
    if (s.x_loss_after > s.x_loss_before) ++violations;
  }
  return {violations == 0, fmt("%.0f steps with a larger rectified loss out of %.0f", violations,
                               static_cast<double>(r.manifest.trace.size()))};
}

}  // namespace

bool run_selftest(const SelftestOptions& options, const SelftestOps& ops, std::ostream& out) {
  struct Oracle {
    const char* name;
    Outcome (*run)(const SelftestOptions&, const SelftestOps&);
  };
  const Oracle oracles[] = {{"estep_monte_carlo", estep_monte_carlo},
                            {"dense_fft_solve", dense_fft},
                            {"mstep_residuals", mstep_residuals},
                            {"split_descent", split_descent},
                            {"rectified_loss_decrease", prop3_decrease}};
  bool all = true;
  for (const Oracle& o : oracles) {
    const auto start = std::chrono::steady_clock::now();
    Outcome r;
    try {
      r = o.run(options, ops);
    } catch (const std::exception& e) {
      r = {false, std::string("threw: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    out << (r.pass ? "PASS " : "FAIL ") << o.name << ": " << r.detail << " ["
        << fmt("%.2fs", secs) << "]\n";
    all = all && r.pass;
  }
  return all;
}

}  // namespace ddfm
