#include "locref/image.hpp"

#include <cmath>
#include <stdexcept>

namespace locref {

long long Mask::count() const {
  long long n = 0;
  for (auto x : v) n += x;
  return n;
}

Image difference_image(const Image& a, const Image& b) {
  if (!a.same_shape(b)) throw std::invalid_argument("difference_image: shape mismatch");
  Image d(a.c, a.h, a.w);
  for (size_t i = 0; i < a.v.size(); ++i) d.v[i] = std::abs(a.v[i] - b.v[i]);
  return d;
}

Mask binarize(const ProbMap& prob, double threshold) {
  if (!(threshold > 0.0 && threshold < 1.0)) throw std::invalid_argument("binarize: threshold must be in (0,1)");
  Mask m(prob.h, prob.w);
  for (size_t i = 0; i < prob.v.size(); ++i) m.v[i] = prob.v[i] >= threshold ? 1 : 0;
  return m;
}

Mask boundary_extract(const Mask& m) {
  Mask b(m.h, m.w);
  for (int y = 0; y < m.h; ++y) {
    for (int x = 0; x < m.w; ++x) {
      if (!m.at(y, x)) continue;
      const bool interior = y > 0 && m.at(y - 1, x) && y < m.h - 1 && m.at(y + 1, x) &&
                            x > 0 && m.at(y, x - 1) && x < m.w - 1 && m.at(y, x + 1);
      b.at(y, x) = interior ? 0 : 1;
    }
  }
  return b;
}

}  // namespace locref
