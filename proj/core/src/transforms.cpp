#include "wmadv/transforms.hpp"

#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>

#include <fmt/format.h>

#include "wmadv/error.hpp"

namespace wmadv {

std::string_view to_string(WaveletFamily f) {
  switch (f) {
    case WaveletFamily::Haar:
      return "haar";
  }
  return "unknown";
}

namespace {

void haar_analyze(const Plane& x, Plane& ll, DetailBands& d) {
  const Eigen::Index h = x.rows() / 2;
  const Eigen::Index w = x.cols() / 2;
  ll.resize(h, w);
  d.lh.resize(h, w);
  d.hl.resize(h, w);
  d.hh.resize(h, w);
  for (Eigen::Index i = 0; i < h; ++i) {
    for (Eigen::Index j = 0; j < w; ++j) {
      const double a = x(2 * i, 2 * j);
      const double b = x(2 * i, 2 * j + 1);
      const double c = x(2 * i + 1, 2 * j);
      const double e = x(2 * i + 1, 2 * j + 1);
      ll(i, j) = 0.5 * ((a + b) + (c + e));
      d.lh(i, j) = 0.5 * ((a - b) + (c - e));
      d.hl(i, j) = 0.5 * ((a + b) - (c + e));
      d.hh(i, j) = 0.5 * ((a - b) - (c - e));
    }
  }
}

Plane haar_synthesize(const Plane& ll, const DetailBands& d) {
  const Eigen::Index h = ll.rows();
  const Eigen::Index w = ll.cols();
  Plane x(2 * h, 2 * w);
  for (Eigen::Index i = 0; i < h; ++i) {
    for (Eigen::Index j = 0; j < w; ++j) {
      const double s = ll(i, j);
      const double lh = d.lh(i, j);
      const double hl = d.hl(i, j);
      const double hh = d.hh(i, j);
      x(2 * i, 2 * j) = 0.5 * ((s + lh) + (hl + hh));
      x(2 * i, 2 * j + 1) = 0.5 * ((s - lh) + (hl - hh));
      x(2 * i + 1, 2 * j) = 0.5 * ((s + lh) - (hl + hh));
      x(2 * i + 1, 2 * j + 1) = 0.5 * ((s - lh) - (hl - hh));
    }
  }
  return x;
}

bool same_dims(const Plane& a, const Plane& b) { return a.rows() == b.rows() && a.cols() == b.cols(); }

}  // namespace

WaveletPyramid dwt2(const Plane& plane, int levels) {
  if (levels < 1 || levels > 3) {
    throw ValidationError(fmt::format("wavelet levels must be 1..3, got {}", levels));
  }
  const Eigen::Index div = Eigen::Index{1} << levels;
  if (plane.rows() == 0 || plane.cols() == 0 || plane.rows() % div != 0 || plane.cols() % div != 0) {
    throw DimensionError(fmt::format("{}-level DWT needs dims divisible by {}, got {}x{}", levels, div,
                                     plane.cols(), plane.rows()));
  }
  WaveletPyramid pyr;
  pyr.levels = levels;
  pyr.details.resize(static_cast<std::size_t>(levels));
  Plane current = plane;
  for (int k = 0; k < levels; ++k) {
    Plane ll;
    haar_analyze(current, ll, pyr.details[static_cast<std::size_t>(k)]);
    current = std::move(ll);
  }
  pyr.ll = std::move(current);
  return pyr;
}

Plane idwt2(const WaveletPyramid& pyr) {
  if (pyr.levels < 1 || static_cast<std::size_t>(pyr.levels) != pyr.details.size()) {
    throw DimensionError(fmt::format("pyramid declares {} levels but holds {} detail sets", pyr.levels,
                                     pyr.details.size()));
  }
  Plane current = pyr.ll;
  for (int k = pyr.levels - 1; k >= 0; --k) {
    const DetailBands& d = pyr.details[static_cast<std::size_t>(k)];
    if (!same_dims(d.lh, current) || !same_dims(d.hl, current) || !same_dims(d.hh, current)) {
      throw DimensionError(fmt::format("level {} detail bands do not match approximation {}x{}", k + 1,
                                       current.cols(), current.rows()));
    }
    current = haar_synthesize(current, d);
  }
  return current;
}

Plane dct_basis(int n) {
  if (n < 1) throw DimensionError(fmt::format("DCT size must be >= 1, got {}", n));
  Plane basis(n, n);
  const double a0 = std::sqrt(1.0 / n);
  const double ak = std::sqrt(2.0 / n);
  for (int k = 0; k < n; ++k) {
    const double scale = k == 0 ? a0 : ak;
    for (int i = 0; i < n; ++i) {
      basis(k, i) = scale * std::cos(std::numbers::pi * (2.0 * i + 1.0) * k / (2.0 * n));
    }
  }
  return basis;
}

namespace {

// Basis row k is symmetric about the centre for even k and antisymmetric for
// odd k, so for even n each 1-D pass folds its input in half and runs two
// half-size products instead of one full one.
struct FoldedBasis {
  int n = 0;
  Plane full;  // odd n only
  Plane even;  // rows 0, 2, 4, ... restricted to columns [0, n/2)
  Plane odd;   // rows 1, 3, 5, ...
};

std::shared_ptr<const FoldedBasis> folded_basis(int n) {
  static std::mutex mutex;
  static std::map<int, std::shared_ptr<const FoldedBasis>> cache;
  std::lock_guard lock(mutex);
  if (const auto it = cache.find(n); it != cache.end()) return it->second;
  auto fb = std::make_shared<FoldedBasis>();
  fb->n = n;
  const Plane b = dct_basis(n);
  if (n % 2 != 0) {
    fb->full = b;
  } else {
    const int m = n / 2;
    fb->even.resize(m, m);
    fb->odd.resize(m, m);
    for (int k = 0; k < m; ++k) {
      fb->even.row(k) = b.row(2 * k).head(m);
      fb->odd.row(k) = b.row(2 * k + 1).head(m);
    }
  }
  return cache.emplace(n, std::move(fb)).first->second;
}

// B * x
Plane forward_cols(const FoldedBasis& fb, const Plane& x) {
  if (fb.n % 2 != 0) return fb.full * x;
  const Eigen::Index m = fb.n / 2;
  const Plane bottom = x.bottomRows(m).colwise().reverse();
  const Plane ye = fb.even * (x.topRows(m) + bottom);
  const Plane yo = fb.odd * (x.topRows(m) - bottom);
  Plane y(x.rows(), x.cols());
  for (Eigen::Index k = 0; k < m; ++k) {
    y.row(2 * k) = ye.row(k);
    y.row(2 * k + 1) = yo.row(k);
  }
  return y;
}

// B^T * y
Plane inverse_cols(const FoldedBasis& fb, const Plane& y) {
  if (fb.n % 2 != 0) return fb.full.transpose() * y;
  const Eigen::Index m = fb.n / 2;
  Plane ye(m, y.cols());
  Plane yo(m, y.cols());
  for (Eigen::Index k = 0; k < m; ++k) {
    ye.row(k) = y.row(2 * k);
    yo.row(k) = y.row(2 * k + 1);
  }
  const Plane e = fb.even.transpose() * ye;
  const Plane o = fb.odd.transpose() * yo;
  Plane x(y.rows(), y.cols());
  x.topRows(m) = e + o;
  x.bottomRows(m) = (e - o).colwise().reverse();
  return x;
}

}  // namespace

DctMatrix dct2(const Plane& plane) {
  if (plane.rows() < 1 || plane.cols() < 1) throw DimensionError("DCT of an empty plane");
  const auto bh = folded_basis(static_cast<int>(plane.rows()));
  const auto bw = folded_basis(static_cast<int>(plane.cols()));
  const Plane cols = forward_cols(*bh, plane);
  return {forward_cols(*bw, cols.transpose()).transpose()};
}

Plane idct2(const DctMatrix& m) {
  const Plane& c = m.coeffs;
  if (c.rows() < 1 || c.cols() < 1) throw DimensionError("inverse DCT of an empty matrix");
  const auto bh = folded_basis(static_cast<int>(c.rows()));
  const auto bw = folded_basis(static_cast<int>(c.cols()));
  const Plane cols = inverse_cols(*bh, c);
  return inverse_cols(*bw, cols.transpose()).transpose();
}

}  // namespace wmadv
