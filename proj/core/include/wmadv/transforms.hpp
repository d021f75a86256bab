#pragma once

#include <string_view>
#include <vector>

#include "wmadv/imaging.hpp"

namespace wmadv {

enum class WaveletFamily { Haar };
std::string_view to_string(WaveletFamily f);

// Detail subbands of one decomposition level. The first letter names the
// vertical filter, the second the horizontal one; for a 2x2 block
// [a b; c d]:
//   ll = (a+b+c+d)/2   lh = (a-b+c-d)/2
//   hl = (a+b-c-d)/2   hh = (a-b-c+d)/2
struct DetailBands {
  Plane lh;
  Plane hl;
  Plane hh;
};

// details[0] is the finest level (1), details[levels-1] the deepest; `ll` is
// the approximation band at the deepest level.
struct WaveletPyramid {
  int levels = 0;
  Plane ll;
  std::vector<DetailBands> details;
};

// Orthonormal 2D Haar analysis, applied recursively to the approximation band.
// levels must be in 1..3 and both dims divisible by 2^levels.
WaveletPyramid dwt2(const Plane& plane, int levels);
Plane idwt2(const WaveletPyramid& pyramid);

struct DctMatrix {
  Plane coeffs;
};

// Orthonormal DCT-II basis, row k = frequency k: B(k,n) = a_k cos(pi (2n+1) k / 2N).
Plane dct_basis(int n);

// Separable orthonormal 2D DCT-II and its DCT-III inverse.
DctMatrix dct2(const Plane& plane);
Plane idct2(const DctMatrix& m);

}  // namespace wmadv
