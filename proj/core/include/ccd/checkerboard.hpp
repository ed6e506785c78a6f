#pragma once

#include <vector>

#include "ccd/image.hpp"

namespace ccd {

/// Pixel (row, col) is Even iff (row + col) is even.
enum class Parity { Even, Odd };

constexpr Parity parity_of(int row, int col) noexcept {
  return ((row + col) & 1) == 0 ? Parity::Even : Parity::Odd;
}

constexpr Parity opposite(Parity p) noexcept {
  return p == Parity::Even ? Parity::Odd : Parity::Even;
}

const char* to_string(Parity p) noexcept;

struct Pixel {
  int row = 0;
  int col = 0;
  friend auto operator<=>(const Pixel&, const Pixel&) = default;
};

/// Row-major list of every coordinate with the given parity.
std::vector<Pixel> blinded_positions(int height, int width, Parity parity);

struct BlindedImage {
  ImageTensor image;
  Parity blinded = Parity::Even;
};

/// Hides every pixel of `parity` by replacing it with the mean of its in-bounds
/// 4-neighbours. Neighbours always carry the opposite parity, so they are
/// untouched source values. A pixel without neighbours (1x1 image) is kept.
BlindedImage make_blind(const ImageTensor& img, Parity parity);

/// Odd pixels from `pred_for_odd`, Even pixels from `pred_for_even`.
ImageTensor fuse(const ImageTensor& pred_for_odd, const ImageTensor& pred_for_even);

}  // namespace ccd
