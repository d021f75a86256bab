#include "wmadv/embedder.hpp"

#include <charconv>
#include <cmath>
#include <limits>
#include <vector>

#include <fmt/format.h>

#include "wmadv/error.hpp"
#include "wmadv/transforms.hpp"

namespace wmadv {

std::string_view to_string(EmbedAlgo a) { return a == EmbedAlgo::Dwt ? "dwt" : "dct"; }

EmbedAlgo parse_algo(std::string_view s) {
  if (s == "dwt") return EmbedAlgo::Dwt;
  if (s == "dct") return EmbedAlgo::Dct;
  throw ValidationError(fmt::format("unknown algorithm '{}' (expected dwt or dct)", s));
}

std::string_view to_string(SignConvention s) {
  return s == SignConvention::GPlusRBMinus ? "g+rb-" : "g-rb+";
}

SignConvention parse_signs(std::string_view s) {
  if (s == "g+rb-") return SignConvention::GPlusRBMinus;
  if (s == "g-rb+") return SignConvention::GMinusRBPlus;
  throw ValidationError(fmt::format("unknown sign convention '{}' (expected g+rb- or g-rb+)", s));
}

double channel_sign(SignConvention s, Channel c) {
  const bool green = c == Channel::G;
  const bool green_positive = s == SignConvention::GPlusRBMinus;
  return green == green_positive ? 1.0 : -1.0;
}

double Strengths::operator[](Channel c) const {
  switch (c) {
    case Channel::R:
      return r;
    case Channel::G:
      return g;
    case Channel::B:
      return b;
  }
  return 0.0;
}

Strengths Strengths::parse(std::string_view s) {
  double v[3];
  std::size_t pos = 0;
  for (int i = 0; i < 3; ++i) {
    const std::size_t end = i < 2 ? s.find(',', pos) : s.size();
    if (end == std::string_view::npos) {
      throw ValidationError(fmt::format("strengths '{}' must be three comma-separated numbers r,g,b", s));
    }
    std::string_view tok = s.substr(pos, end - pos);
    while (!tok.empty() && (tok.front() == ' ' || tok.front() == '\t')) tok.remove_prefix(1);
    while (!tok.empty() && (tok.back() == ' ' || tok.back() == '\t')) tok.remove_suffix(1);
    const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v[i]);
    if (ec != std::errc{} || ptr != tok.data() + tok.size() || tok.empty()) {
      throw ValidationError(fmt::format("strengths '{}': '{}' is not a number", s, tok));
    }
    pos = end + 1;
  }
  Strengths out{v[0], v[1], v[2]};
  if (out.r < 0 || out.g < 0 || out.b < 0 || !std::isfinite(out.r) || !std::isfinite(out.g) ||
      !std::isfinite(out.b)) {
    throw ValidationError(fmt::format("strengths '{}' must be finite and >= 0", s));
  }
  return out;
}

void EmbedParams::validate() const {
  for (Channel c : kChannels) {
    const double v = strength[c];
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw ValidationError(fmt::format("embedding strength {} must be finite and >= 0", v));
    }
  }
  if (times < 1) throw ValidationError(fmt::format("embedding frequency {} must be >= 1", times));
}

ImageTensor embed_dwt(const ImageTensor& host, const ImageTensor& wm, const EmbedParams& p) {
  p.validate();
  if (host.width() % 8 != 0 || host.height() % 8 != 0 || host.width() < 8 || host.height() < 8) {
    throw DimensionError(
        fmt::format("DWT host {}x{} must have dims divisible by 8", host.width(), host.height()));
  }
  if (wm.width() * 4 != host.width() || wm.height() * 4 != host.height()) {
    throw DimensionError(fmt::format("DWT watermark {}x{} must be host/4 = {}x{}", wm.width(), wm.height(),
                                     host.width() / 4, host.height() / 4));
  }
  ImageTensor out(host.width(), host.height());
  for (Channel c : kChannels) {
    const double gain = channel_sign(p.signs, c) * p.times * p.strength[c];
    if (gain == 0.0) {
      // Adding nothing is the identity; skip the round trip so it is exact.
      out.plane(c) = host.plane(c);
      continue;
    }
    WaveletPyramid pyr = dwt2(host.plane(c), 3);
    const WaveletPyramid wm_pyr = dwt2(wm.plane(c), 1);
    pyr.ll += gain * wm_pyr.ll;
    out.plane(c) = idwt2(pyr);
  }
  return out;
}

ImageTensor embed_dct(const ImageTensor& host, const ImageTensor& wm, const EmbedParams& p) {
  p.validate();
  return DctPair(host, wm).embed(p);
}

DctPair::DctPair(const ImageTensor& host, const ImageTensor& wm) : host_(host) {
  if (host.width() != wm.width() || host.height() != wm.height()) {
    throw DimensionError(fmt::format("DCT host {}x{} and watermark {}x{} must match", host.width(),
                                     host.height(), wm.width(), wm.height()));
  }
  if (host.empty()) throw DimensionError("DCT embedding of an empty image");
  for (Channel c : kChannels) {
    host_coeffs_[static_cast<std::size_t>(c)] = dct2(host.plane(c));
    wm_coeffs_[static_cast<std::size_t>(c)] = dct2(wm.plane(c));
  }
}

ImageTensor DctPair::embed(const EmbedParams& p) const {
  p.validate();
  ImageTensor out(host_.width(), host_.height());
  for (Channel c : kChannels) {
    const double sign = p.dct_signs ? channel_sign(*p.dct_signs, c) : 1.0;
    const double gain = sign * p.times * p.strength[c];
    if (gain == 0.0) {
      out.plane(c) = host_.plane(c);
      continue;
    }
    DctMatrix m = host_coeffs_[static_cast<std::size_t>(c)];
    m.coeffs += gain * wm_coeffs_[static_cast<std::size_t>(c)].coeffs;
    out.plane(c) = idct2(m);
  }
  return out;
}

ImageTensor embed(EmbedAlgo algo, const ImageTensor& host, const ImageTensor& wm, const EmbedParams& p) {
  return algo == EmbedAlgo::Dwt ? embed_dwt(host, wm, p) : embed_dct(host, wm, p);
}

ImageTensor embed_sequential(EmbedAlgo algo, const ImageTensor& host, const ImageTensor& wm,
                             const EmbedParams& p) {
  p.validate();
  EmbedParams once = p;
  once.times = 1;
  ImageTensor current = clamp_quantize(host);
  for (int i = 0; i < p.times; ++i) current = clamp_quantize(embed(algo, current, wm, once));
  return current;
}

PerturbationNorms perturbation_norms(const ImageTensor& host, const ImageTensor& candidate) {
  if (host.width() != candidate.width() || host.height() != candidate.height()) {
    throw DimensionError(fmt::format("cannot compare {}x{} with {}x{}", host.width(), host.height(),
                                     candidate.width(), candidate.height()));
  }
  // Integer accumulation keeps the norms exact and order-independent.
  std::int64_t sum_sq = 0;
  std::int64_t sum_abs = 0;
  int max_abs = 0;
  for (int c = 0; c < 3; ++c) {
    for (Eigen::Index i = 0; i < host[c].size(); ++i) {
      const int d = static_cast<int>(quantize_sample(candidate[c].data()[i])) -
                    static_cast<int>(quantize_sample(host[c].data()[i]));
      const int a = d < 0 ? -d : d;
      sum_sq += static_cast<std::int64_t>(d) * d;
      sum_abs += a;
      if (a > max_abs) max_abs = a;
    }
  }
  const double samples = 3.0 * host.width() * host.height();
  PerturbationNorms n;
  n.l2 = std::sqrt(static_cast<double>(sum_sq));
  n.linf = max_abs;
  n.per_pixel_mean = samples > 0 ? static_cast<double>(sum_abs) / samples : 0.0;
  const double mse = samples > 0 ? static_cast<double>(sum_sq) / samples : 0.0;
  n.psnr = mse == 0.0 ? std::numeric_limits<double>::infinity() : 10.0 * std::log10(255.0 * 255.0 / mse);
  return n;
}

}  // namespace wmadv
