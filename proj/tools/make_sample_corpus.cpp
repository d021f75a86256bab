// Writes the 12-image sample corpus used by the golden run:
//   <out>/hosts/*.png, <out>/hosts/labels.csv,
//   <out>/watermarks/{warm,cool}/*.png
// Images are smooth two-colour gradients with a sinusoidal texture and a
// little seeded noise. The output is checked in; rerun only to change it.
//
// usage: make_sample_corpus <out-dir>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "wmadv/imaging.hpp"

namespace {

struct Rgb {
  double r, g, b;
};

struct Scene {
  std::string dir;  // relative to the output root
  std::string name;
  int width;
  int height;
  Rgb from;      // top-left colour
  Rgb to;        // bottom-right colour
  double waves;  // texture periods across the image
  double amp;    // texture amplitude
  double noise;  // uniform noise amplitude
  std::uint32_t seed;
};

wmadv::ImageTensor render(const Scene& s) {
  std::mt19937 rng(s.seed);
  // Raw engine output only, so every standard library draws the same noise.
  const auto uniform = [&rng] { return static_cast<double>(rng() >> 8) / 16777216.0 * 2.0 - 1.0; };
  wmadv::ImageTensor img(s.width, s.height);
  const double two_pi = 2.0 * std::numbers::pi;
  for (int y = 0; y < s.height; ++y) {
    for (int x = 0; x < s.width; ++x) {
      const double u = (x + 0.5) / s.width;
      const double v = (y + 0.5) / s.height;
      const double w = 0.5 * (u + v);
      const double tex = s.amp * std::sin(two_pi * s.waves * u) * std::cos(two_pi * s.waves * 0.7 * v);
      const Rgb c{s.from.r + w * (s.to.r - s.from.r), s.from.g + w * (s.to.g - s.from.g),
                  s.from.b + w * (s.to.b - s.from.b)};
      img.plane(wmadv::Channel::R)(y, x) = c.r + tex + s.noise * uniform();
      img.plane(wmadv::Channel::G)(y, x) = c.g + tex + s.noise * uniform();
      img.plane(wmadv::Channel::B)(y, x) = c.b + tex + s.noise * uniform();
    }
  }
  return wmadv::clamp_quantize(img);
}

// label is empty for watermarks.
struct Entry {
  Scene scene;
  std::string label;
};

const std::vector<Entry>& corpus() {
  static const std::vector<Entry> entries{
      {{"hosts", "sunset", 256, 256, {214, 92, 60}, {238, 150, 72}, 3.0, 18.0, 6.0, 11}, "warm"},
      {{"hosts", "brick", 256, 256, {168, 70, 52}, {150, 96, 80}, 8.0, 26.0, 10.0, 12}, "warm"},
      {{"hosts", "sand", 300, 220, {182, 150, 110}, {170, 138, 112}, 2.0, 10.0, 8.0, 13}, "warm"},
      {{"hosts", "lake", 256, 256, {60, 110, 190}, {92, 140, 210}, 4.0, 16.0, 6.0, 14}, "cool"},
      {{"hosts", "forest", 256, 256, {52, 120, 96}, {80, 140, 120}, 6.0, 22.0, 12.0, 15}, "cool"},
      {{"hosts", "dusk", 256, 256, {120, 90, 150}, {110, 92, 160}, 3.0, 12.0, 6.0, 16}, "warm"},
      {{"watermarks/warm", "ember", 128, 128, {230, 80, 40}, {250, 140, 60}, 5.0, 20.0, 8.0, 21}, ""},
      {{"watermarks/warm", "rust", 128, 128, {180, 90, 50}, {200, 110, 70}, 9.0, 24.0, 10.0, 22}, ""},
      {{"watermarks/warm", "amber", 128, 128, {240, 180, 60}, {220, 160, 90}, 2.0, 12.0, 6.0, 23}, ""},
      {{"watermarks/cool", "ice", 128, 128, {170, 210, 245}, {140, 190, 240}, 3.0, 14.0, 6.0, 31}, ""},
      {{"watermarks/cool", "moss", 128, 128, {60, 150, 80}, {90, 170, 110}, 7.0, 22.0, 10.0, 32}, ""},
      {{"watermarks/cool", "ocean", 128, 128, {30, 90, 200}, {50, 130, 230}, 4.0, 18.0, 8.0, 33}, ""},
  };
  return entries;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc != 2) {
    std::cerr << "usage: make_sample_corpus <out-dir>\n";
    return 1;
  }
  const std::filesystem::path root = argv[1];
  try {
    std::string labels = "image_id,true_class\n";
    for (const auto& [scene, label] : corpus()) {
      const auto dir = root / scene.dir;
      std::filesystem::create_directories(dir);
      const auto file = scene.name + ".png";
      wmadv::save_png(render(scene), dir / file);
      if (!label.empty()) labels += fmt::format("{},{}\n", file, label);
    }
    std::ofstream(root / "hosts" / "labels.csv", std::ios::binary) << labels;
  } catch (const std::exception& e) {
    std::cerr << "make_sample_corpus: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
