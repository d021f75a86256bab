#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace wmadv {

// One image channel, row-major, indexed (row, col).
using Plane = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class Channel : int { R = 0, G = 1, B = 2 };
inline constexpr std::array<Channel, 3> kChannels{Channel::R, Channel::G, Channel::B};

// H x W x 3 image held as three floating-point planes. Nominal sample range
// is [0, 255]; values may leave that range during embedding and are only
// clamped when quantized.
class ImageTensor {
 public:
  ImageTensor() = default;
  ImageTensor(int width, int height);
  // Throws DimensionError unless all three planes share dimensions.
  explicit ImageTensor(std::array<Plane, 3> planes);

  static ImageTensor filled(int width, int height, double r, double g, double b);

  int width() const { return static_cast<int>(planes_[0].cols()); }
  int height() const { return static_cast<int>(planes_[0].rows()); }
  bool empty() const { return planes_[0].size() == 0; }

  Plane& plane(Channel c) { return planes_[static_cast<int>(c)]; }
  const Plane& plane(Channel c) const { return planes_[static_cast<int>(c)]; }
  Plane& operator[](int c) { return planes_[c]; }
  const Plane& operator[](int c) const { return planes_[c]; }

  const std::array<Plane, 3>& planes() const { return planes_; }

  friend bool operator==(const ImageTensor& a, const ImageTensor& b);

 private:
  std::array<Plane, 3> planes_;
};

// Target sizes applied before embedding. Host LL3 (host/8 per side) must match
// watermark LL1 (wm/2 per side) for the wavelet path, hence wm = host / 4.
struct SizePolicy {
  int host_size = 256;
  int wm_size_dwt = 64;

  int wm_size_dct() const { return host_size; }
  // Throws ValidationError.
  void validate() const;
};

// Decodes PNG or JPEG bytes into RGB. Gray is replicated, alpha dropped.
ImageTensor decode(std::span<const std::uint8_t> bytes);
ImageTensor load_image(const std::filesystem::path& path);

// Clamp to [0,255], round half away from zero, write 8-bit RGB PNG.
std::vector<std::uint8_t> encode_png(const ImageTensor& img);
void save_png(const ImageTensor& img, const std::filesystem::path& path);

// The value each sample takes after encode_png/decode.
ImageTensor clamp_quantize(const ImageTensor& img);
std::uint8_t quantize_sample(double v);

// Bilinear, half-pixel centres, edge-clamped. Deterministic.
ImageTensor resize(const ImageTensor& img, int width, int height);
Plane resize_plane(const Plane& plane, int width, int height);

std::array<Plane, 3> split(const ImageTensor& img);
ImageTensor merge(Plane r, Plane g, Plane b);

// Rec.601 luma of the three planes.
Plane luminance(const ImageTensor& img);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace wmadv
