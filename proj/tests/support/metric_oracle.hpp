#pragma once

#include <cmath>
#include <vector>

#include "ccd/image.hpp"
#include "ccd/random.hpp"

// Independent loop implementations of the quality indices, written from the
// formulas with raw-moment sums rather than the library's two-pass form.
namespace ccd::oracle {

struct Moments {
  double mean = 0.0;
  double var = 0.0;
};

inline Moments moments(const ImageTensor& img, int top, int left, int bottom, int right) {
  double s = 0.0, q = 0.0, n = 0.0;
  for (int r = top; r < bottom; ++r) {
    for (int c = left; c < right; ++c) {
      s += img(r, c);
      q += img(r, c) * img(r, c);
      n += 1.0;
    }
  }
  const double mean = s / n;
  return {mean, std::max(0.0, q / n - mean * mean)};
}

inline Moments moments(const ImageTensor& img, const Roi& roi) {
  return moments(img, roi.top, roi.left, roi.bottom, roi.right);
}

inline double cnr_linear(const ImageTensor& img, const Roi& fg, const Roi& bg) {
  const Moments f = moments(img, fg), b = moments(img, bg);
  return std::fabs(f.mean - b.mean) / std::sqrt((f.var + b.var) / 2.0);
}

inline double msr(const ImageTensor& img, const Roi& fg) {
  const Moments f = moments(img, fg);
  return f.mean / std::sqrt(f.var);
}

inline double tp(const ImageTensor& den, const ImageTensor& noisy, const Roi& roi) {
  const Moments d = moments(den, roi), n = moments(noisy, roi);
  return d.var / n.var * std::sqrt(d.mean / n.mean);
}

inline double ep(const ImageTensor& den, const ImageTensor& noisy, const Roi& roi) {
  static const int kernel[3][3] = {{0, 1, 0}, {1, -4, 1}, {0, 1, 0}};
  double sd = 0, sn = 0, sdd = 0, snn = 0, sdn = 0, n = 0;
  for (int r = roi.top + 1; r + 1 < roi.bottom; ++r) {
    for (int c = roi.left + 1; c + 1 < roi.right; ++c) {
      double a = 0.0, b = 0.0;
      for (int i = -1; i <= 1; ++i) {
        for (int j = -1; j <= 1; ++j) {
          a += kernel[i + 1][j + 1] * den(r + i, c + j);
          b += kernel[i + 1][j + 1] * noisy(r + i, c + j);
        }
      }
      sd += a;
      sn += b;
      sdd += a * a;
      snn += b * b;
      sdn += a * b;
      n += 1.0;
    }
  }
  const double cov = sdn / n - (sd / n) * (sn / n);
  const double vd = sdd / n - (sd / n) * (sd / n);
  const double vn = snn / n - (sn / n) * (sn / n);
  return cov / std::sqrt(vd * vn);
}

/// Random ROI of at least min_side x min_side inside an h x w image.
inline Roi random_roi(Rng& rng, int h, int w, int min_side, RoiPurpose purpose) {
  const int rows = min_side + static_cast<int>(rng.below(static_cast<std::uint64_t>(h - min_side + 1)));
  const int cols = min_side + static_cast<int>(rng.below(static_cast<std::uint64_t>(w - min_side + 1)));
  const int top = static_cast<int>(rng.below(static_cast<std::uint64_t>(h - rows + 1)));
  const int left = static_cast<int>(rng.below(static_cast<std::uint64_t>(w - cols + 1)));
  return Roi{"r", purpose, top, left, top + rows, left + cols};
}

/// Random ROI whose rectangle differs from `other`.
inline Roi random_roi_apart(Rng& rng, int h, int w, int min_side, RoiPurpose purpose, const Roi& other) {
  for (;;) {
    Roi r = random_roi(rng, h, w, min_side, purpose);
    if (r.top != other.top || r.left != other.left || r.bottom != other.bottom || r.right != other.right) return r;
  }
}

}  // namespace ccd::oracle
