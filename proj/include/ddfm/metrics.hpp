#pragma once

#include <string>
#include <vector>

#include "ddfm/tensor.hpp"

// Fusion quality metrics. Inputs are images with samples in [0,255], one or
// three channels. Every metric works on the 8-bit grayscale view: BT.601 luma,
// rounded to nearest and clamped to [0,255].
namespace ddfm::metrics {

ImageTensor gray_view(const ImageTensor& img);

// Shannon entropy (bits) of the 256-bin histogram.
double entropy(const ImageTensor& img);
// Population standard deviation.
double std_dev(const ImageTensor& img);
// Plug-in mutual information (bits) from the 256x256 joint histogram.
double mutual_info_pair(const ImageTensor& a, const ImageTensor& b);
// MI(fused, ir) + MI(fused, vis).
double mutual_info(const ImageTensor& fused, const ImageTensor& ir, const ImageTensor& vis);

// Mean SSIM over all valid 11x11 windows (Gaussian weights, sigma 1.5,
// K1 = 0.01, K2 = 0.03, L = 255). Needs both sides >= 11.
double ssim(const ImageTensor& a, const ImageTensor& b);
// Mean of SSIM(fused, ir) and SSIM(fused, vis).
double ssim_fusion(const ImageTensor& fused, const ImageTensor& ir, const ImageTensor& vis);

// Pixel-domain multi-scale VIF (4 scales, windows 17/9/5/3 with sigma N/5,
// noise variance 2). Needs both sides >= 17. Returns 0 when the reference
// carries no variance at any scale.
double vif(const ImageTensor& reference, const ImageTensor& distorted);
// VIF(ir -> fused) + VIF(vis -> fused).
double vif_fusion(const ImageTensor& fused, const ImageTensor& ir, const ImageTensor& vis);

// Edge-preservation score: Sobel strength/orientation with
// Gamma_g = 0.9994, kappa_g = -15, sigma_g = 0.5, Gamma_a = 0.9879,
// kappa_a = -22, sigma_a = 0.8, weights g^1. Borders replicate. 0 when no
// source has any edge.
double qabf(const ImageTensor& fused, const ImageTensor& ir, const ImageTensor& vis);

struct MetricsReport {
  double en = 0.0;
  double sd = 0.0;
  double mi = 0.0;
  double vif = 0.0;
  double qabf = 0.0;
  double ssim = 0.0;

  std::vector<double> as_vector() const { return {en, sd, mi, vif, qabf, ssim}; }
};

inline const std::vector<std::string>& column_names() {
  static const std::vector<std::string> names{"EN", "SD", "MI", "VIF", "Qabf", "SSIM"};
  return names;
}

MetricsReport evaluate_all(const ImageTensor& fused, const ImageTensor& ir, const ImageTensor& vis);
MetricsReport mean_report(const std::vector<MetricsReport>& rows);

}  // namespace ddfm::metrics
