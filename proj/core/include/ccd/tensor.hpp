#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "ccd/error.hpp"

namespace ccd {

/// Dense NCHW feature map of 64-bit values. The leading dimension batches
/// independent images.
struct Tensor {
  int n = 0;
  int c = 0;
  int h = 0;
  int w = 0;
  std::vector<double> v;

  Tensor() = default;
  Tensor(int n_, int c_, int h_, int w_, double fill = 0.0)
      : n(n_), c(c_), h(h_), w(w_),
        v(static_cast<std::size_t>(n_) * c_ * h_ * w_, fill) {}

  std::size_t size() const noexcept { return v.size(); }
  std::size_t plane() const noexcept { return static_cast<std::size_t>(h) * w; }

  double& at(int in, int ic, int y, int x) noexcept {
    return v[((static_cast<std::size_t>(in) * c + ic) * h + y) * w + x];
  }
  double at(int in, int ic, int y, int x) const noexcept {
    return v[((static_cast<std::size_t>(in) * c + ic) * h + y) * w + x];
  }

  /// Contiguous H*W slice for image `in`, channel `ic`.
  std::span<double> channel(int in, int ic) noexcept {
    return {v.data() + (static_cast<std::size_t>(in) * c + ic) * plane(), plane()};
  }
  std::span<const double> channel(int in, int ic) const noexcept {
    return {v.data() + (static_cast<std::size_t>(in) * c + ic) * plane(), plane()};
  }

  bool same_shape(const Tensor& o) const noexcept {
    return n == o.n && c == o.c && h == o.h && w == o.w;
  }

  friend bool operator==(const Tensor&, const Tensor&) = default;
};

inline void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (!a.same_shape(b)) throw Error(std::string(what) + ": shape mismatch");
}

/// a += b elementwise.
void add_inplace(Tensor& a, const Tensor& b);

}  // namespace ccd
