#pragma once

#include <optional>
#include <string>

#include "ddfm/schedule.hpp"
#include "ddfm/tensor.hpp"

namespace ddfm {

struct SizeHint {
  int height = 0;
  int width = 0;
};

// s_theta(f_t, t): the score grad log p_t(f_t) of the noised data marginal.
class ScoreModel {
 public:
  virtual ~ScoreModel() = default;

  // Returns a tensor of the same shape as f_t. t is the internal 1-based step.
  virtual ImageTensor evaluate(const ImageTensor& f_t, int t, const NoiseSchedule& schedule) = 0;

  // Schedule the model was trained with, when it dictates one.
  virtual std::optional<NoiseSchedule> native_schedule() const { return std::nullopt; }
  // Fixed spatial size the model accepts; nullopt means any size.
  virtual std::optional<SizeHint> supported_size() const { return std::nullopt; }
  virtual std::string describe() const = 0;
};

// Exact marginal score of x_t = sqrt(abar_t) x_0 + sqrt(1 - abar_t) e when
// x_0 ~ N(mu0, var0 I).
ImageTensor analytic_score(const ImageTensor& f_t, int t, const NoiseSchedule& schedule,
                           const ImageTensor& mu0, double var0);

class AnalyticGaussianScore final : public ScoreModel {
 public:
  AnalyticGaussianScore(ImageTensor mu0, double var0);

  ImageTensor evaluate(const ImageTensor& f_t, int t, const NoiseSchedule& schedule) override;
  std::string describe() const override;

  const ImageTensor& mu0() const { return mu0_; }
  double var0() const { return var0_; }

 private:
  ImageTensor mu0_;
  double var0_;
};

}  // namespace ddfm
