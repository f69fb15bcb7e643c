#include "ddfm/score.hpp"

#include <cmath>
#include <sstream>

#include "ddfm/error.hpp"
#include "ddfm/manifest.hpp"

namespace ddfm {

ImageTensor analytic_score(const ImageTensor& f_t, int t, const NoiseSchedule& schedule,
                           const ImageTensor& mu0, double var0) {
  if (!f_t.same_shape(mu0)) throw ShapeError("analytic_score: f_t and mu0 shapes differ");
  if (t < 1 || t > schedule.steps()) throw ParameterError("analytic_score: t out of range");
  const double abar = schedule.alpha_bar(t);
  const double scale = std::sqrt(abar);
  const double variance = abar * var0 + (1.0 - abar);
  ImageTensor out(f_t.height(), f_t.width(), f_t.channels());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = -(f_t[i] - scale * mu0[i]) / variance;
  }
  return out;
}

AnalyticGaussianScore::AnalyticGaussianScore(ImageTensor mu0, double var0)
    : mu0_(std::move(mu0)), var0_(var0) {
  if (!(var0 > 0.0)) throw ParameterError("var0 must be positive");
}

ImageTensor AnalyticGaussianScore::evaluate(const ImageTensor& f_t, int t,
                                            const NoiseSchedule& schedule) {
  return analytic_score(f_t, t, schedule, mu0_, var0_);
}

std::string AnalyticGaussianScore::describe() const {
  std::ostringstream os;
  os.precision(17);
  os << "analytic(var0=" << var0_ << ", mu0_sha256=" << tensor_sha256(mu0_) << ")";
  return os.str();
}

}  // namespace ddfm
