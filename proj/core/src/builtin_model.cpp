#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "wmadv/builtin_weights.hpp"
#include "wmadv/error.hpp"
#include "wmadv/oracle.hpp"
#include "wmadv/transforms.hpp"

namespace wmadv {
namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::vector<std::string> split_ws(std::string_view s) {
  std::vector<std::string> out;
  std::istringstream in{std::string(s)};
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

std::vector<double> parse_numbers(std::string_view key, std::string_view value, int line) {
  std::vector<double> out;
  for (const auto& tok : split_ws(value)) {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc{} || ptr != tok.data() + tok.size() || !std::isfinite(v)) {
      throw ConfigError(fmt::format("line {}: '{}' value '{}' is not a finite number", line, key, tok));
    }
    out.push_back(v);
  }
  return out;
}

// Approximation band of a 2-level Haar decomposition over the largest
// multiple-of-4 top-left crop. Images smaller than 4x4 fall back to the plane
// itself scaled like a 1x1 block average.
Plane level2_approximation(const Plane& p) {
  const Eigen::Index h = p.rows() / 4 * 4;
  const Eigen::Index w = p.cols() / 4 * 4;
  if (h == 0 || w == 0) return Plane::Constant(1, 1, 4.0 * p.mean());
  return dwt2(p.topLeftCorner(h, w), 2).ll;
}

Plane rescale_0_255(const Plane& p) {
  const double lo = p.minCoeff();
  const double hi = p.maxCoeff();
  if (!(hi > lo)) return Plane::Zero(p.rows(), p.cols());
  return (p.array() - lo) * (255.0 / (hi - lo));
}

Plane sobel_magnitude(const Plane& y) {
  const Eigen::Index h = y.rows();
  const Eigen::Index w = y.cols();
  auto at = [&](Eigen::Index r, Eigen::Index c) {
    r = std::clamp<Eigen::Index>(r, 0, h - 1);
    c = std::clamp<Eigen::Index>(c, 0, w - 1);
    return y(r, c);
  };
  Plane out(h, w);
  for (Eigen::Index r = 0; r < h; ++r) {
    for (Eigen::Index c = 0; c < w; ++c) {
      const double gx = (at(r - 1, c + 1) + 2.0 * at(r, c + 1) + at(r + 1, c + 1)) -
                        (at(r - 1, c - 1) + 2.0 * at(r, c - 1) + at(r + 1, c - 1));
      const double gy = (at(r + 1, c - 1) + 2.0 * at(r + 1, c) + at(r + 1, c + 1)) -
                        (at(r - 1, c - 1) + 2.0 * at(r - 1, c) + at(r - 1, c + 1));
      out(r, c) = std::sqrt(gx * gx + gy * gy);
    }
  }
  return out;
}

}  // namespace

LinearModel LinearModel::parse(std::string_view text) {
  std::map<std::string, std::pair<std::string, int>> kv;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t end = std::min(text.find('\n', pos), text.size());
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError(fmt::format("line {}: expected 'key = value', got '{}'", line_no, line));
    }
    const std::string key(trim(line.substr(0, eq)));
    if (!kv.emplace(key, std::pair{std::string(trim(line.substr(eq + 1))), line_no}).second) {
      throw ConfigError(fmt::format("line {}: duplicate key '{}'", line_no, key));
    }
  }

  auto require = [&](const std::string& key) -> const std::pair<std::string, int>& {
    const auto it = kv.find(key);
    if (it == kv.end()) throw ConfigError(fmt::format("missing key '{}'", key));
    return it->second;
  };

  if (const auto& [fmt_value, line] = require("format"); fmt_value != "wmadv-linear-v1") {
    throw ConfigError(fmt::format("line {}: unsupported format '{}'", line, fmt_value));
  }
  LinearModel m;
  m.model = require("model").first;
  if (m.model.empty()) throw ConfigError("model name is empty");

  const auto& [classes_value, classes_line] = require("classes");
  const auto classes = parse_numbers("classes", classes_value, classes_line);
  if (classes.size() != 1 || classes[0] < 1 || classes[0] != std::floor(classes[0])) {
    throw ConfigError(fmt::format("line {}: classes must be one positive integer", classes_line));
  }
  const auto k = static_cast<std::size_t>(classes[0]);

  const auto& [labels_value, labels_line] = require("labels");
  m.labels = split_ws(labels_value);
  if (m.labels.size() != k) {
    throw ConfigError(fmt::format("line {}: {} labels for {} classes", labels_line, m.labels.size(), k));
  }
  if (std::set<std::string>(m.labels.begin(), m.labels.end()).size() != k) {
    throw ConfigError(fmt::format("line {}: labels must be unique", labels_line));
  }

  m.weights.resize(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(kLinearFeatureCount));
  for (std::size_t f = 0; f < kLinearFeatureCount; ++f) {
    const std::string key(kLinearFeatureNames[f]);
    const auto& [value, line] = require(key);
    const auto row = parse_numbers(key, value, line);
    if (row.size() != k) {
      throw ConfigError(fmt::format("line {}: '{}' has {} weights, expected {}", line, key, row.size(), k));
    }
    for (std::size_t c = 0; c < k; ++c) {
      m.weights(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(f)) = row[c];
    }
  }
  const auto& [bias_value, bias_line] = require("bias");
  const auto bias = parse_numbers("bias", bias_value, bias_line);
  if (bias.size() != k) {
    throw ConfigError(fmt::format("line {}: {} biases for {} classes", bias_line, bias.size(), k));
  }
  m.bias = Eigen::Map<const Eigen::VectorXd>(bias.data(), static_cast<Eigen::Index>(k));

  static const std::set<std::string> known = [] {
    std::set<std::string> s{"format", "model", "classes", "labels", "bias"};
    for (auto n : kLinearFeatureNames) s.emplace(n);
    return s;
  }();
  for (const auto& [key, entry] : kv) {
    if (!known.contains(key)) throw ConfigError(fmt::format("line {}: unknown key '{}'", entry.second, key));
  }
  return m;
}

LinearModel LinearModel::load(const std::filesystem::path& path) {
  std::vector<std::uint8_t> bytes;
  try {
    bytes = read_file(path);
  } catch (const IoError& e) {
    throw ConfigError(e.what());
  }
  try {
    return parse(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
  } catch (const ConfigError& e) {
    throw ConfigError(fmt::format("{}: {}", path.string(), e.what()));
  }
}

LinearModel LinearModel::shipped() {
  static const LinearModel model = parse(generated::kBuiltinWeightsV1);
  return model;
}

std::array<double, kLinearFeatureCount> linear_features(const ImageTensor& img) {
  if (img.empty()) throw DimensionError("cannot compute features of an empty image");
  const std::array<Plane, 4> planes{img[0], img[1], img[2], luminance(img)};
  std::array<double, kLinearFeatureCount> phi{};
  for (std::size_t c = 0; c < 4; ++c) {
    phi[c] = planes[c].mean() / 255.0;
    // LL2 = 4 x (4x4 block mean) under orthonormal Haar.
    const Plane ll = level2_approximation(planes[c]) / (4.0 * 255.0);
    phi[4 + c] = ll.squaredNorm() / static_cast<double>(ll.size());
  }
  return phi;
}

Eigen::VectorXd LinearModel::scores(const ImageTensor& img) const {
  const auto phi = linear_features(img);
  const Eigen::Map<const Eigen::Matrix<double, kLinearFeatureCount, 1>> x(phi.data());
  return weights * x + bias;
}

ClassProbs builtin_classify(const LinearModel& model, const ImageTensor& img) {
  const Eigen::VectorXd s = model.scores(img);
  const double top = s.maxCoeff();
  const Eigen::ArrayXd e = (s.array() - top).exp();
  const double z = e.sum();
  ClassProbs out;
  out.labels = model.labels;
  out.probs.resize(static_cast<std::size_t>(s.size()));
  for (Eigen::Index i = 0; i < s.size(); ++i) out.probs[static_cast<std::size_t>(i)] = e(i) / z;
  return out;
}

FeatureMap builtin_features(const ImageTensor& img, std::string_view layer) {
  if (img.empty()) throw DimensionError("cannot extract features of an empty image");
  Plane map;
  if (layer == "edge") {
    map = sobel_magnitude(luminance(img));
  } else if (layer == "dc") {
    map = level2_approximation(luminance(img));
  } else {
    throw CapabilityError(fmt::format("unknown feature layer '{}'; available layers: {{edge,dc}}", layer));
  }
  Plane scaled = rescale_0_255(map);
  return {std::string(layer), ImageTensor({scaled, scaled, scaled})};
}

BuiltinOracle::BuiltinOracle(LinearModel model)
    : Oracle(OracleInfo{model.labels, {std::string(kBuiltinLayers[0]), std::string(kBuiltinLayers[1])},
                        model.model}),
      model_(std::move(model)) {}

// Inputs are quantized first so the builtin sees exactly what a remote oracle
// would decode from the PNG on the wire.
ClassProbs BuiltinOracle::do_classify(const ImageTensor& img) {
  return builtin_classify(model_, clamp_quantize(img));
}

FeatureMap BuiltinOracle::do_features(const ImageTensor& img, std::string_view layer) {
  FeatureMap f = builtin_features(clamp_quantize(img), layer);
  f.image = clamp_quantize(f.image);
  return f;
}

}  // namespace wmadv
