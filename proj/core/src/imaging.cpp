#include "wmadv/imaging.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>

#include <fmt/format.h>

#include "wmadv/error.hpp"

namespace wmadv {

ImageTensor::ImageTensor(int width, int height) {
  if (width < 0 || height < 0) {
    throw DimensionError(fmt::format("negative image size {}x{}", width, height));
  }
  for (auto& p : planes_) p = Plane::Zero(height, width);
}

ImageTensor::ImageTensor(std::array<Plane, 3> planes) : planes_(std::move(planes)) {
  for (int c = 1; c < 3; ++c) {
    if (planes_[c].rows() != planes_[0].rows() || planes_[c].cols() != planes_[0].cols()) {
      throw DimensionError(fmt::format("plane {} is {}x{}, plane 0 is {}x{}", c, planes_[c].cols(),
                                       planes_[c].rows(), planes_[0].cols(), planes_[0].rows()));
    }
  }
}

ImageTensor ImageTensor::filled(int width, int height, double r, double g, double b) {
  ImageTensor img(width, height);
  img[0].setConstant(r);
  img[1].setConstant(g);
  img[2].setConstant(b);
  return img;
}

bool operator==(const ImageTensor& a, const ImageTensor& b) {
  if (a.width() != b.width() || a.height() != b.height()) return false;
  for (int c = 0; c < 3; ++c) {
    if (a[c] != b[c]) return false;
  }
  return true;
}

void SizePolicy::validate() const {
  if (host_size < 8 || host_size % 8 != 0) {
    throw ValidationError(
        fmt::format("host size {} must be a positive multiple of 8 (three dyadic levels)", host_size));
  }
  if (wm_size_dwt < 2 || wm_size_dwt % 2 != 0) {
    throw ValidationError(fmt::format("watermark size {} must be a positive even number", wm_size_dwt));
  }
  if (wm_size_dwt * 4 != host_size) {
    throw ValidationError(fmt::format(
        "watermark size {} must equal host size / 4 = {} so host LL3 matches watermark LL1",
        wm_size_dwt, host_size / 4));
  }
}

std::uint8_t quantize_sample(double v) {
  if (!(v > 0.0)) return 0;  // also maps NaN to 0
  if (v >= 255.0) return 255;
  return static_cast<std::uint8_t>(std::round(v));
}

ImageTensor clamp_quantize(const ImageTensor& img) {
  ImageTensor out = img;
  for (int c = 0; c < 3; ++c) {
    out[c] = img[c].unaryExpr([](double v) { return static_cast<double>(quantize_sample(v)); });
  }
  return out;
}

namespace {

struct Tap {
  int lo;
  int hi;
  double frac;
};

// Half-pixel-centre sampling positions along one axis.
std::vector<Tap> bilinear_taps(int src, int dst) {
  std::vector<Tap> taps(static_cast<std::size_t>(dst));
  const double scale = static_cast<double>(src) / static_cast<double>(dst);
  for (int i = 0; i < dst; ++i) {
    double pos = (static_cast<double>(i) + 0.5) * scale - 0.5;
    pos = std::clamp(pos, 0.0, static_cast<double>(src - 1));
    const int lo = static_cast<int>(std::floor(pos));
    const int hi = std::min(lo + 1, src - 1);
    taps[static_cast<std::size_t>(i)] = {lo, hi, pos - lo};
  }
  return taps;
}

}  // namespace

Plane resize_plane(const Plane& plane, int width, int height) {
  if (width < 1 || height < 1) {
    throw ValidationError(fmt::format("resize target {}x{} must be at least 1x1", width, height));
  }
  if (plane.size() == 0) throw DimensionError("cannot resize an empty plane");
  const int src_w = static_cast<int>(plane.cols());
  const int src_h = static_cast<int>(plane.rows());
  if (src_w == width && src_h == height) return plane;

  const auto xt = bilinear_taps(src_w, width);
  const auto yt = bilinear_taps(src_h, height);

  // Horizontal pass, then vertical. The a + f*(b-a) form keeps constants exact.
  Plane tmp(src_h, width);
  for (int r = 0; r < src_h; ++r) {
    for (int x = 0; x < width; ++x) {
      const Tap& t = xt[static_cast<std::size_t>(x)];
      const double a = plane(r, t.lo);
      tmp(r, x) = a + t.frac * (plane(r, t.hi) - a);
    }
  }
  Plane out(height, width);
  for (int y = 0; y < height; ++y) {
    const Tap& t = yt[static_cast<std::size_t>(y)];
    for (int x = 0; x < width; ++x) {
      const double a = tmp(t.lo, x);
      out(y, x) = a + t.frac * (tmp(t.hi, x) - a);
    }
  }
  return out;
}

ImageTensor resize(const ImageTensor& img, int width, int height) {
  return ImageTensor({resize_plane(img[0], width, height), resize_plane(img[1], width, height),
                      resize_plane(img[2], width, height)});
}

std::array<Plane, 3> split(const ImageTensor& img) { return img.planes(); }

ImageTensor merge(Plane r, Plane g, Plane b) {
  return ImageTensor({std::move(r), std::move(g), std::move(b)});
}

Plane luminance(const ImageTensor& img) {
  return 0.299 * img[0] + 0.587 * img[1] + 0.114 * img[2];
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot open {} for reading", path.string()));
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError(fmt::format("error reading {}", path.string()));
  return bytes;
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(fmt::format("cannot open {} for writing", path.string()));
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError(fmt::format("error writing {}", path.string()));
}

ImageTensor load_image(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  try {
    return decode(bytes);
  } catch (const DecodeError& e) {
    throw DecodeError(fmt::format("{}: {}", path.string(), e.what()));
  }
}

void save_png(const ImageTensor& img, const std::filesystem::path& path) {
  write_file(path, encode_png(img));
}

}  // namespace wmadv
