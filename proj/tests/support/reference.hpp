#pragma once

// Slow, obviously-correct versions of the library arithmetic. Tests compare
// the library against these; nothing here calls the code under test except
// the image plumbing (decode, resize, quantize) noted per function.

#include <array>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "wmadv/embedder.hpp"
#include "wmadv/imaging.hpp"
#include "wmadv/oracle.hpp"
#include "wmadv/transforms.hpp"

namespace ref {

using wmadv::Plane;

// n x n orthonormal one-level Haar analysis matrix: the first n/2 rows
// average pairs, the last n/2 difference them, both scaled by 1/sqrt(2).
Plane haar_matrix(int n);

// Multi-level analysis by explicit matrix products H X H^T applied to the
// top-left block, returned in the usual packed layout (LL top-left).
Plane haar_packed(const Plane& x, int levels);
// Inverse of haar_packed via H^T Y H.
Plane haar_unpacked(const Plane& packed, int levels);
// Packs a library pyramid into the same layout for comparison.
Plane pack(const wmadv::WaveletPyramid& p);

// Direct double-sum orthonormal DCT-II and DCT-III.
Plane dct_naive(const Plane& x);
Plane idct_naive(const Plane& d);

double max_abs_diff(const Plane& a, const Plane& b);
double max_abs_diff(const wmadv::ImageTensor& a, const wmadv::ImageTensor& b);

Plane random_plane(std::mt19937_64& rng, int rows, int cols, double lo = 0.0, double hi = 255.0);
wmadv::ImageTensor random_image(std::mt19937_64& rng, int w, int h, double lo = 0.0, double hi = 255.0);

// Rec.601 luma, written out here rather than taken from the library.
Plane luma(const wmadv::ImageTensor& img);
// 3x3 Sobel magnitude with replicated borders, min-max scaled to [0,255].
Plane sobel_edge(const wmadv::ImageTensor& img);
// Level-2 Haar approximation of luma as 4x4 block sums / 4, min-max scaled.
Plane dc_map(const wmadv::ImageTensor& img);

// The eight builtin features from block means (no wavelet code involved),
// on the quantized image and the largest multiple-of-4 crop for energies.
std::array<double, 8> linear_features(const wmadv::ImageTensor& img);
// softmax(W phi + b) computed in long double.
std::vector<double> linear_probs(const wmadv::LinearModel& m, const wmadv::ImageTensor& img);

// Pixel-domain results of the embedders, from the closed forms:
//   DCT: host + t s_c wm (orthonormality)
//   DWT: every 8x8 host block gains sign_c t s_c (2x2 watermark block sum) / 16
wmadv::ImageTensor dct_closed_form(const wmadv::ImageTensor& host, const wmadv::ImageTensor& wm,
                                   const wmadv::EmbedParams& p);
wmadv::ImageTensor dwt_closed_form(const wmadv::ImageTensor& host, const wmadv::ImageTensor& wm,
                                   const wmadv::EmbedParams& p);

// Indices of `probs` ordered by probability descending, then label ascending.
std::vector<std::size_t> argsort_desc(const std::vector<double>& probs, const std::vector<std::string>& labels);

// Integer L2 / Linf of the difference of two 8-bit quantized images.
struct Norms {
  double l2 = 0.0;
  double linf = 0.0;
};
Norms norms(const wmadv::ImageTensor& a, const wmadv::ImageTensor& b);

}  // namespace ref
