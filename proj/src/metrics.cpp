#include "ddfm/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include "ddfm/error.hpp"
#include "ddfm/png_io.hpp"

namespace ddfm::metrics {

namespace {

struct Plane {
  int h = 0;
  int w = 0;
  std::vector<double> v;

  Plane() = default;
  Plane(int h_, int w_) : h(h_), w(w_), v(static_cast<std::size_t>(h_) * w_, 0.0) {}
  double& at(int r, int c) { return v[static_cast<std::size_t>(r) * w + c]; }
  double at(int r, int c) const { return v[static_cast<std::size_t>(r) * w + c]; }
};

Plane to_plane(const ImageTensor& img) {
  const ImageTensor g = gray_view(img);
  Plane p(g.height(), g.width());
  std::copy(g.values().begin(), g.values().end(), p.v.begin());
  return p;
}

void require_same_size(const ImageTensor& a, const ImageTensor& b, const char* what) {
  if (a.height() != b.height() || a.width() != b.width()) {
    throw ShapeError(std::string(what) + ": images differ in size");
  }
}

std::vector<double> gaussian_1d(int n, double sigma) {
  std::vector<double> k(n);
  const double half = (n - 1) / 2.0;
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = i - half;
    k[i] = std::exp(-x * x / (2.0 * sigma * sigma));
    sum += k[i];
  }
  for (double& v : k) v /= sum;
  return k;
}

// 'valid' correlation with the separable kernel k x k. Empty when the image
// is smaller than the kernel.
Plane filter_valid(const Plane& in, const std::vector<double>& k) {
  const int n = static_cast<int>(k.size());
  const int oh = in.h - n + 1, ow = in.w - n + 1;
  if (oh <= 0 || ow <= 0) return Plane{};
  Plane rows(in.h, ow);
  for (int r = 0; r < in.h; ++r) {
    for (int c = 0; c < ow; ++c) {
      double acc = 0.0;
      for (int j = 0; j < n; ++j) acc += k[j] * in.at(r, c + j);
      rows.at(r, c) = acc;
    }
  }
  Plane out(oh, ow);
  for (int r = 0; r < oh; ++r) {
    for (int c = 0; c < ow; ++c) {
      double acc = 0.0;
      for (int i = 0; i < n; ++i) acc += k[i] * rows.at(r + i, c);
      out.at(r, c) = acc;
    }
  }
  return out;
}

Plane multiply(const Plane& a, const Plane& b) {
  Plane out(a.h, a.w);
  for (std::size_t i = 0; i < a.v.size(); ++i) out.v[i] = a.v[i] * b.v[i];
  return out;
}

Plane downsample2(const Plane& in) {
  Plane out((in.h + 1) / 2, (in.w + 1) / 2);
  for (int r = 0; r < out.h; ++r) {
    for (int c = 0; c < out.w; ++c) out.at(r, c) = in.at(2 * r, 2 * c);
  }
  return out;
}

std::array<double, 256> histogram(const Plane& p) {
  std::array<double, 256> h{};
  for (double v : p.v) h[static_cast<int>(v)] += 1.0;
  return h;
}

double entropy_of(const std::array<double, 256>& counts, double total) {
  double e = 0.0;
  for (double c : counts) {
    if (c > 0.0) {
      const double p = c / total;
      e -= p * std::log2(p);
    }
  }
  return e;
}

struct Sobel {
  Plane strength;
  Plane angle;
};

Sobel sobel(const Plane& p) {
  Sobel s{Plane(p.h, p.w), Plane(p.h, p.w)};
  auto px = [&](int r, int c) {
    return p.at(std::clamp(r, 0, p.h - 1), std::clamp(c, 0, p.w - 1));
  };
  for (int r = 0; r < p.h; ++r) {
    for (int c = 0; c < p.w; ++c) {
      const double gx = (px(r - 1, c + 1) + 2 * px(r, c + 1) + px(r + 1, c + 1)) -
                        (px(r - 1, c - 1) + 2 * px(r, c - 1) + px(r + 1, c - 1));
      const double gy = (px(r + 1, c - 1) + 2 * px(r + 1, c) + px(r + 1, c + 1)) -
                        (px(r - 1, c - 1) + 2 * px(r - 1, c) + px(r - 1, c + 1));
      s.strength.at(r, c) = std::sqrt(gx * gx + gy * gy);
      s.angle.at(r, c) = gx == 0.0 ? std::numbers::pi / 2 : std::atan(gy / gx);
    }
  }
  return s;
}

// Per-pixel edge preservation of source s in fused f.
double preservation(double gs, double as, double gf, double af) {
  constexpr double kGammaG = 0.9994, kKappaG = -15.0, kSigmaG = 0.5;
  constexpr double kGammaA = 0.9879, kKappaA = -22.0, kSigmaA = 0.8;
  const double big = std::max(gs, gf);
  const double g = big == 0.0 ? 1.0 : std::min(gs, gf) / big;
  const double a = 1.0 - std::abs(as - af) / (std::numbers::pi / 2);
  const double qg = kGammaG / (1.0 + std::exp(kKappaG * (g - kSigmaG)));
  const double qa = kGammaA / (1.0 + std::exp(kKappaA * (a - kSigmaA)));
  return qg * qa;
}

}  // namespace

ImageTensor gray_view(const ImageTensor& img) { return quantize8(luma(img)); }

double entropy(const ImageTensor& img) {
  const Plane p = to_plane(img);
  return entropy_of(histogram(p), static_cast<double>(p.v.size()));
}

double std_dev(const ImageTensor& img) {
  const Plane p = to_plane(img);
  const double n = static_cast<double>(p.v.size());
  double mean = 0.0;
  for (double v : p.v) mean += v;
  mean /= n;
  double ss = 0.0;
  for (double v : p.v) ss += (v - mean) * (v - mean);
  return std::sqrt(ss / n);
}

double mutual_info_pair(const ImageTensor& a, const ImageTensor& b) {
  require_same_size(a, b, "mutual_info");
  const Plane pa = to_plane(a), pb = to_plane(b);
  std::vector<double> joint(256 * 256, 0.0);
  for (std::size_t i = 0; i < pa.v.size(); ++i) {
    joint[static_cast<int>(pa.v[i]) * 256 + static_cast<int>(pb.v[i])] += 1.0;
  }
  const double n = static_cast<double>(pa.v.size());
  const auto ha = histogram(pa), hb = histogram(pb);
  double mi = 0.0;
  for (int i = 0; i < 256; ++i) {
    if (ha[i] == 0.0) continue;
    for (int j = 0; j < 256; ++j) {
      const double c = joint[i * 256 + j];
      if (c == 0.0) continue;
      mi += (c / n) * std::log2(c * n / (ha[i] * hb[j]));
    }
  }
  return std::max(mi, 0.0);
}

double mutual_info(const ImageTensor& fused, const ImageTensor& ir, const ImageTensor& vis) {
  return mutual_info_pair(fused, ir) + mutual_info_pair(fused, vis);
}

double ssim(const ImageTensor& a, const ImageTensor& b) {
  require_same_size(a, b, "ssim");
  if (a.height() < 11 || a.width() < 11) throw ShapeError("ssim: images smaller than 11x11 window");
  const Plane x = to_plane(a), y = to_plane(b);
  const auto k = gaussian_1d(11, 1.5);
  const double c1 = (0.01 * 255.0) * (0.01 * 255.0);
  const double c2 = (0.03 * 255.0) * (0.03 * 255.0);
  const Plane mx = filter_valid(x, k), my = filter_valid(y, k);
  const Plane xx = filter_valid(multiply(x, x), k);
  const Plane yy = filter_valid(multiply(y, y), k);
  const Plane xy = filter_valid(multiply(x, y), k);
  double acc = 0.0;
  for (std::size_t i = 0; i < mx.v.size(); ++i) {
    const double mux = mx.v[i], muy = my.v[i];
    const double vx = xx.v[i] - mux * mux;
    const double vy = yy.v[i] - muy * muy;
    const double cxy = xy.v[i] - mux * muy;
    acc += ((2 * mux * muy + c1) * (2 * cxy + c2)) /
           ((mux * mux + muy * muy + c1) * (vx + vy + c2));
  }
  return acc / static_cast<double>(mx.v.size());
}

double ssim_fusion(const ImageTensor& fused, const ImageTensor& ir, const ImageTensor& vis) {
  return 0.5 * (ssim(fused, ir) + ssim(fused, vis));
}

double vif(const ImageTensor& reference, const ImageTensor& distorted) {
  require_same_size(reference, distorted, "vif");
  if (reference.height() < 17 || reference.width() < 17) {
    throw ShapeError("vif: images smaller than the 17x17 analysis window");
  }
  constexpr double kNoiseVar = 2.0;
  constexpr double kTiny = 1e-10;
  Plane ref = to_plane(reference), dist = to_plane(distorted);
  double num = 0.0, den = 0.0;
  for (int scale = 1; scale <= 4; ++scale) {
    const int n = (1 << (4 - scale + 1)) + 1;
    const auto k = gaussian_1d(n, n / 5.0);
    if (scale > 1) {
      ref = filter_valid(ref, k);
      dist = filter_valid(dist, k);
      if (ref.v.empty()) break;
      ref = downsample2(ref);
      dist = downsample2(dist);
    }
    const Plane mu1 = filter_valid(ref, k);
    if (mu1.v.empty()) break;
    const Plane mu2 = filter_valid(dist, k);
    const Plane s11 = filter_valid(multiply(ref, ref), k);
    const Plane s22 = filter_valid(multiply(dist, dist), k);
    const Plane s12 = filter_valid(multiply(ref, dist), k);
    for (std::size_t i = 0; i < mu1.v.size(); ++i) {
      double sigma1 = std::max(s11.v[i] - mu1.v[i] * mu1.v[i], 0.0);
      const double sigma2 = std::max(s22.v[i] - mu2.v[i] * mu2.v[i], 0.0);
      const double sigma12 = s12.v[i] - mu1.v[i] * mu2.v[i];
      double g = sigma12 / (sigma1 + kTiny);
      double sv = sigma2 - g * sigma12;
      if (sigma1 < kTiny) {
        g = 0.0;
        sv = sigma2;
        sigma1 = 0.0;
      }
      if (sigma2 < kTiny) {
        g = 0.0;
        sv = 0.0;
      }
      if (g < 0.0) {
        sv = sigma2;
        g = 0.0;
      }
      sv = std::max(sv, kTiny);
      num += std::log10(1.0 + g * g * sigma1 / (sv + kNoiseVar));
      den += std::log10(1.0 + sigma1 / kNoiseVar);
    }
  }
  return den > 0.0 ? num / den : 0.0;
}

double vif_fusion(const ImageTensor& fused, const ImageTensor& ir, const ImageTensor& vis) {
  return vif(ir, fused) + vif(vis, fused);
}

double qabf(const ImageTensor& fused, const ImageTensor& ir, const ImageTensor& vis) {
  require_same_size(fused, ir, "qabf");
  require_same_size(fused, vis, "qabf");
  const Sobel sa = sobel(to_plane(ir)), sb = sobel(to_plane(vis)), sf = sobel(to_plane(fused));
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < sf.strength.v.size(); ++i) {
    const double wa = sa.strength.v[i], wb = sb.strength.v[i];
    const double qa = preservation(wa, sa.angle.v[i], sf.strength.v[i], sf.angle.v[i]);
    const double qb = preservation(wb, sb.angle.v[i], sf.strength.v[i], sf.angle.v[i]);
    num += qa * wa + qb * wb;
    den += wa + wb;
  }
  return den > 0.0 ? num / den : 0.0;
}

MetricsReport evaluate_all(const ImageTensor& fused, const ImageTensor& ir, const ImageTensor& vis) {
  MetricsReport r;
  r.en = entropy(fused);
  r.sd = std_dev(fused);
  r.mi = mutual_info(fused, ir, vis);
  r.vif = vif_fusion(fused, ir, vis);
  r.qabf = qabf(fused, ir, vis);
  r.ssim = ssim_fusion(fused, ir, vis);
  return r;
}

MetricsReport mean_report(const std::vector<MetricsReport>& rows) {
  MetricsReport m;
  if (rows.empty()) return m;
  for (const auto& r : rows) {
    m.en += r.en;
    m.sd += r.sd;
    m.mi += r.mi;
    m.vif += r.vif;
    m.qabf += r.qabf;
    m.ssim += r.ssim;
  }
  const double n = static_cast<double>(rows.size());
  m.en /= n;
  m.sd /= n;
  m.mi /= n;
  m.vif /= n;
  m.qabf /= n;
  m.ssim /= n;
  return m;
}

}  // namespace ddfm::metrics
