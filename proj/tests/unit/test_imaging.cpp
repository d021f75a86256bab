#include <filesystem>
#include <random>

#include "doctest.h"
#include "reference.hpp"
#include "wmadv/error.hpp"
#include "wmadv/imaging.hpp"

using namespace wmadv;

namespace {

const std::filesystem::path kImages = std::filesystem::path(WMADV_GOLDEN_DIR) / "images";

std::string message_of(const std::vector<std::uint8_t>& bytes) {
  try {
    decode(bytes);
  } catch (const DecodeError& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST_SUITE("imaging") {
  TEST_CASE("PNG round trip is exact for quantized images") {
    std::mt19937_64 rng(7);
    for (const auto& [w, h] : {std::pair{1, 1}, {3, 5}, {64, 48}, {256, 256}}) {
      const auto img = clamp_quantize(ref::random_image(rng, w, h));
      const auto back = decode(encode_png(img));
      CHECK(back == img);
    }
  }

  TEST_CASE("quantization clamps and rounds half away from zero") {
    CHECK(quantize_sample(-3.0) == 0);
    CHECK(quantize_sample(300.0) == 255);
    CHECK(quantize_sample(1.5) == 2);
    CHECK(quantize_sample(2.5) == 3);
    CHECK(quantize_sample(2.4999) == 2);
    CHECK(quantize_sample(254.5) == 255);
    CHECK(quantize_sample(-0.5) == 0);
    const auto img = ImageTensor::filled(2, 2, -7.0, 127.5, 1e9);
    const auto q = decode(encode_png(img));
    CHECK(q[0](0, 0) == 0.0);
    CHECK(q[1](1, 1) == 128.0);
    CHECK(q[2](0, 1) == 255.0);
  }

  TEST_CASE("gray is replicated, alpha dropped, 1x1 decodes") {
    const auto gray = load_image(kImages / "gray.png");
    REQUIRE(gray.width() == 4);
    REQUIRE(gray.height() == 3);
    CHECK(gray[0](2, 3) == 220.0);
    CHECK(gray[1](2, 3) == 220.0);
    CHECK(gray[2](0, 1) == 20.0);

    const auto rgba = load_image(kImages / "rgba.png");
    CHECK(rgba[0](0, 0) == 10.0);
    CHECK(rgba[1](0, 1) == 50.0);
    CHECK(rgba[2](1, 1) == 3.0);

    const auto one = load_image(kImages / "one_pixel.png");
    CHECK(one.width() == 1);
    CHECK(one[2](0, 0) == 9.0);
  }

  TEST_CASE("JPEG decodes close to the encoded colour") {
    const auto img = load_image(kImages / "solid_red.jpg");
    REQUIRE(img.width() == 16);
    CHECK(std::abs(img[0].mean() - 200.0) < 4.0);
    CHECK(std::abs(img[1].mean() - 30.0) < 4.0);
    CHECK(std::abs(img[2].mean() - 30.0) < 4.0);
  }

  TEST_CASE("decode errors name the format and offset") {
    CHECK(message_of({}) == "empty input at byte offset 0");
    CHECK(message_of({'G', 'I', 'F', '8', '9', 'a'}).starts_with("unrecognized image signature at byte offset 0"));

    auto png = encode_png(ImageTensor::filled(32, 32, 1, 2, 3));
    png.resize(png.size() / 2);
    const auto msg = message_of(png);
    CHECK(msg.starts_with("PNG image data (" + std::to_string(png.size()) + " bytes supplied)"));

    png.resize(12);
    CHECK(message_of(png).starts_with("PNG header"));
  }

  TEST_CASE("load_image reports the missing path") {
    const auto missing = kImages / "does_not_exist.png";
    try {
      load_image(missing);
      FAIL("expected IoError");
    } catch (const IoError& e) {
      CHECK(std::string(e.what()).find("does_not_exist.png") != std::string::npos);
    }
  }

  TEST_CASE("mismatched planes are rejected") {
    CHECK_THROWS_AS(ImageTensor({Plane::Zero(2, 2), Plane::Zero(2, 2), Plane::Zero(2, 3)}), DimensionError);
    CHECK_THROWS_AS(merge(Plane::Zero(4, 4), Plane::Zero(3, 4), Plane::Zero(4, 4)), DimensionError);
  }

  TEST_CASE("split and merge are inverse") {
    std::mt19937_64 rng(3);
    const auto img = ref::random_image(rng, 5, 4);
    auto [r, g, b] = split(img);
    CHECK(merge(r, g, b) == img);
  }

  TEST_CASE("resize keeps constants exactly and is identity at the same size") {
    const auto c = ImageTensor::filled(37, 23, 17.25, 200.0, 0.1);
    for (const auto& [w, h] : {std::pair{256, 256}, {8, 8}, {64, 100}, {1, 1}}) {
      const auto r = resize(c, w, h);
      CHECK(r == ImageTensor::filled(w, h, 17.25, 200.0, 0.1));
    }
    std::mt19937_64 rng(5);
    const auto img = ref::random_image(rng, 31, 17);
    CHECK(resize(img, 31, 17) == img);
  }

  TEST_CASE("bilinear resize uses half-pixel centres") {
    Plane p(1, 2);
    p << 0.0, 100.0;
    const Plane up = resize_plane(p, 4, 1);
    CHECK(up(0, 0) == doctest::Approx(0.0));
    CHECK(up(0, 1) == doctest::Approx(25.0));
    CHECK(up(0, 2) == doctest::Approx(75.0));
    CHECK(up(0, 3) == doctest::Approx(100.0));
    Plane q(2, 2);
    q << 0.0, 10.0, 20.0, 30.0;
    CHECK(resize_plane(q, 1, 1)(0, 0) == doctest::Approx(15.0));
    CHECK_THROWS_AS(resize_plane(q, 0, 3), ValidationError);
  }

  TEST_CASE("luminance uses Rec.601 weights") {
    const auto img = ImageTensor::filled(2, 2, 100.0, 50.0, 200.0);
    CHECK(luminance(img)(1, 1) == doctest::Approx(0.299 * 100 + 0.587 * 50 + 0.114 * 200).epsilon(1e-12));
  }

  TEST_CASE("size policy ties the wavelet watermark to host/4") {
    CHECK_NOTHROW(SizePolicy{}.validate());
    CHECK(SizePolicy{}.wm_size_dct() == 256);
    CHECK_NOTHROW((SizePolicy{128, 32}.validate()));
    CHECK_THROWS_AS((SizePolicy{256, 32}.validate()), ValidationError);
    CHECK_THROWS_AS((SizePolicy{100, 25}.validate()), ValidationError);
    CHECK_THROWS_AS((SizePolicy{0, 0}.validate()), ValidationError);
  }
}
