#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>

#include "wmadv/imaging.hpp"
#include "wmadv/transforms.hpp"

namespace wmadv {

enum class EmbedAlgo { Dwt, Dct };
std::string_view to_string(EmbedAlgo a);
EmbedAlgo parse_algo(std::string_view s);

// Which Patchwork set gets the positive sign. Green is the P set (raised) in
// the default, so red and blue form Q (lowered).
enum class SignConvention { GPlusRBMinus, GMinusRBPlus };
std::string_view to_string(SignConvention s);
SignConvention parse_signs(std::string_view s);
// +1 or -1 for channel c under convention s.
double channel_sign(SignConvention s, Channel c);

// Per-channel embedding strengths (Embed_s).
struct Strengths {
  double r = 0.0;
  double g = 0.0;
  double b = 0.0;

  double operator[](Channel c) const;
  static Strengths dwt_default() { return {0.04, 0.03, 0.08}; }
  static Strengths dct_default() { return {0.04, 0.01, 0.08}; }
  static Strengths enhanced() { return {0.08, 0.08, 0.08}; }
  // "r,g,b"
  static Strengths parse(std::string_view s);
  friend bool operator==(const Strengths&, const Strengths&) = default;
};

struct EmbedParams {
  Strengths strength;
  int times = 1;  // Embed_t
  SignConvention signs = SignConvention::GPlusRBMinus;
  // The DCT path is all-additive unless a convention is set here.
  std::optional<SignConvention> dct_signs;

  // Throws ValidationError on negative strengths or times < 1.
  void validate() const;
};

// Adds sign_c * times * s_c * LL1(wm_c) to LL3(host_c) for each channel and
// inverts. Requires host dims % 8 == 0, wm dims % 2 == 0, host/8 == wm/2.
ImageTensor embed_dwt(const ImageTensor& host, const ImageTensor& wm, const EmbedParams& p);

// Adds times * s_c * DCT(wm_c) to DCT(host_c) and inverts. Same-size inputs.
ImageTensor embed_dct(const ImageTensor& host, const ImageTensor& wm, const EmbedParams& p);

// Forward DCTs of one host/watermark pair, kept so that several Embed_t
// values cost one inverse transform per channel each. embed() gives the same
// bits as embed_dct on the same inputs.
class DctPair {
 public:
  DctPair(const ImageTensor& host, const ImageTensor& wm);
  ImageTensor embed(const EmbedParams& p) const;

 private:
  ImageTensor host_;
  std::array<DctMatrix, 3> host_coeffs_;
  std::array<DctMatrix, 3> wm_coeffs_;
};

ImageTensor embed(EmbedAlgo algo, const ImageTensor& host, const ImageTensor& wm, const EmbedParams& p);

// Literal repeated embedding: p.times single-strength rounds, quantizing to
// 8 bits after each one.
ImageTensor embed_sequential(EmbedAlgo algo, const ImageTensor& host, const ImageTensor& wm,
                             const EmbedParams& p);

struct PerturbationNorms {
  double l2 = 0.0;
  double linf = 0.0;
  double per_pixel_mean = 0.0;  // mean |difference| over all samples
  double psnr = 0.0;            // dB; +inf for identical images
};

// Norms of the difference after 8-bit quantization of both images.
PerturbationNorms perturbation_norms(const ImageTensor& host, const ImageTensor& candidate);

}  // namespace wmadv
