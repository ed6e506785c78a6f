#include "ccd/checkerboard.hpp"

namespace ccd {

const char* to_string(Parity p) noexcept { return p == Parity::Even ? "even" : "odd"; }

std::vector<Pixel> blinded_positions(int height, int width, Parity parity) {
  if (height < 1 || width < 1) throw Error("blinded_positions needs a positive shape");
  std::vector<Pixel> out;
  out.reserve((static_cast<std::size_t>(height) * width + 1) / 2);
  for (int r = 0; r < height; ++r) {
    int first = (parity == Parity::Even) ? (r & 1) : 1 - (r & 1);
    for (int c = first; c < width; c += 2) out.push_back({r, c});
  }
  return out;
}

BlindedImage make_blind(const ImageTensor& img, Parity parity) {
  ImageTensor out = img;
  const int h = img.height();
  const int w = img.width();
  for (const auto [r, c] : blinded_positions(h, w, parity)) {
    double sum = 0.0;
    int count = 0;
    if (r > 0) { sum += img(r - 1, c); ++count; }
    if (r + 1 < h) { sum += img(r + 1, c); ++count; }
    if (c > 0) { sum += img(r, c - 1); ++count; }
    if (c + 1 < w) { sum += img(r, c + 1); ++count; }
    if (count > 0) out(r, c) = sum / count;
  }
  return {std::move(out), parity};
}

ImageTensor fuse(const ImageTensor& pred_for_odd, const ImageTensor& pred_for_even) {
  if (!pred_for_odd.same_shape(pred_for_even)) throw Error("fuse: shape mismatch");
  ImageTensor out = pred_for_even;
  for (const auto [r, c] :
       blinded_positions(pred_for_odd.height(), pred_for_odd.width(), Parity::Odd)) {
    out(r, c) = pred_for_odd(r, c);
  }
  return out;
}

}  // namespace ccd
