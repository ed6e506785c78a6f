#include "ccd/tensor.hpp"

#include <string>

namespace ccd {

void add_inplace(Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  for (std::size_t i = 0; i < a.v.size(); ++i) a.v[i] += b.v[i];
}

}  // namespace ccd
