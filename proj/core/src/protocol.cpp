#include "wmadv/protocol.hpp"

#include <array>
#include <istream>
#include <ostream>

#include <fmt/format.h>

#include "json.hpp"
#include "wmadv/error.hpp"

namespace wmadv {

using nlohmann::json;

namespace {

constexpr std::string_view kAlphabet = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

std::string excerpt(std::string_view payload) {
  constexpr std::size_t kMax = 160;
  if (payload.size() <= kMax) return std::string(payload);
  return fmt::format("{}... ({} bytes)", payload.substr(0, kMax), payload.size());
}

json parse_json(std::string_view text, std::string_view what) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw ProtocolError(fmt::format("{} is not valid JSON ({}): {}", what, e.what(), excerpt(text)));
  }
}

std::vector<std::string> string_list(const json& j, std::string_view key, std::string_view payload) {
  const auto it = j.find(key);
  if (it == j.end() || !it->is_array()) {
    throw ProtocolError(fmt::format("response lacks array '{}': {}", key, excerpt(payload)));
  }
  std::vector<std::string> out;
  for (const auto& v : *it) {
    if (!v.is_string()) throw ProtocolError(fmt::format("'{}' holds a non-string: {}", key, excerpt(payload)));
    out.push_back(v.get<std::string>());
  }
  return out;
}

void raise_if_error(const json& j, std::string_view payload) {
  const auto it = j.find("error");
  if (it == j.end()) return;
  std::string code = "protocol";
  std::string message = excerpt(payload);
  if (it->is_object()) {
    code = it->value("code", code);
    message = it->value("message", message);
  }
  if (code == "capability") throw CapabilityError(message);
  throw ProtocolError(fmt::format("oracle reported {} error: {}", code, message));
}

class ProtocolOracle final : public Oracle {
 public:
  explicit ProtocolOracle(std::unique_ptr<Transport> transport) : transport_(std::move(transport)) {
    const std::string payload = transport_->round_trip(json{{"op", "handshake"}}.dump());
    const json j = parse_json(payload, "handshake response");
    raise_if_error(j, payload);
    if (!j.is_object()) throw ProtocolError(fmt::format("handshake response not an object: {}", excerpt(payload)));
    OracleInfo info;
    info.labels = string_list(j, "labels", payload);
    if (j.contains("features")) info.feature_layers = string_list(j, "features", payload);
    info.model = j.contains("model") && j["model"].is_string() ? j["model"].get<std::string>() : "unknown";
    if (info.labels.empty()) throw ProtocolError(fmt::format("handshake lists no labels: {}", excerpt(payload)));
    set_info(std::move(info));
  }

 protected:
  ClassProbs do_classify(const ImageTensor& img) override {
    const json req{{"op", "classify"}, {"image", base64_encode(encode_png(img))}};
    const std::string payload = transport_->round_trip(req.dump());
    const json j = parse_json(payload, "classify response");
    raise_if_error(j, payload);
    ClassProbs out;
    out.labels = string_list(j, "labels", payload);
    const auto it = j.find("probs");
    if (it == j.end() || !it->is_array()) {
      throw ProtocolError(fmt::format("response lacks array 'probs': {}", excerpt(payload)));
    }
    for (const auto& v : *it) {
      if (!v.is_number()) throw ProtocolError(fmt::format("non-numeric probability: {}", excerpt(payload)));
      out.probs.push_back(v.get<double>());
    }
    try {
      out.validate();
    } catch (const ProtocolError& e) {
      throw ProtocolError(fmt::format("{}; payload: {}", e.what(), excerpt(payload)));
    }
    return out;
  }

  FeatureMap do_features(const ImageTensor& img, std::string_view layer) override {
    const json req{{"op", "features"}, {"image", base64_encode(encode_png(img))}, {"layer", layer}};
    const std::string payload = transport_->round_trip(req.dump());
    const json j = parse_json(payload, "features response");
    raise_if_error(j, payload);
    const auto it = j.find("feature");
    if (it == j.end() || !it->is_string()) {
      throw ProtocolError(fmt::format("response lacks string 'feature': {}", excerpt(payload)));
    }
    FeatureMap out;
    out.layer = j.value("layer", std::string(layer));
    try {
      out.image = decode(base64_decode(it->get<std::string>()));
    } catch (const DecodeError& e) {
      throw ProtocolError(fmt::format("feature PNG undecodable ({}): {}", e.what(), excerpt(payload)));
    }
    return out;
  }

 private:
  std::unique_ptr<Transport> transport_;
};

json error_object(std::string_view code, std::string_view message) {
  return json{{"error", {{"code", code}, {"message", message}}}};
}

ImageTensor request_image(const json& req) {
  const auto it = req.find("image");
  if (it == req.end() || !it->is_string()) throw ProtocolError("request lacks string 'image'");
  try {
    return decode(base64_decode(it->get<std::string>()));
  } catch (const DecodeError& e) {
    throw ProtocolError(fmt::format("request image undecodable: {}", e.what()));
  }
}

}  // namespace

std::string base64_encode(std::span<const std::uint8_t> bytes) {
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 2 < bytes.size(); i += 3) {
    const std::uint32_t v = (bytes[i] << 16) | (bytes[i + 1] << 8) | bytes[i + 2];
    out += kAlphabet[(v >> 18) & 63];
    out += kAlphabet[(v >> 12) & 63];
    out += kAlphabet[(v >> 6) & 63];
    out += kAlphabet[v & 63];
  }
  if (const std::size_t rest = bytes.size() - i; rest > 0) {
    std::uint32_t v = bytes[i] << 16;
    if (rest == 2) v |= bytes[i + 1] << 8;
    out += kAlphabet[(v >> 18) & 63];
    out += kAlphabet[(v >> 12) & 63];
    out += rest == 2 ? kAlphabet[(v >> 6) & 63] : '=';
    out += '=';
  }
  return out;
}

std::vector<std::uint8_t> base64_decode(std::string_view text) {
  static const std::array<int, 256> table = [] {
    std::array<int, 256> t{};
    t.fill(-1);
    for (std::size_t i = 0; i < kAlphabet.size(); ++i) t[static_cast<unsigned char>(kAlphabet[i])] = static_cast<int>(i);
    return t;
  }();
  std::vector<std::uint8_t> out;
  out.reserve(text.size() / 4 * 3);
  std::uint32_t acc = 0;
  int bits = 0;
  std::size_t padding = 0;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char ch = text[i];
    if (ch == '=') {
      ++padding;
      continue;
    }
    if (ch == '\n' || ch == '\r') continue;
    const int v = table[static_cast<unsigned char>(ch)];
    if (v < 0 || padding > 0) {
      throw ProtocolError(fmt::format("invalid base64 character at offset {}", i));
    }
    acc = (acc << 6) | static_cast<std::uint32_t>(v);
    bits += 6;
    if (bits >= 8) {
      bits -= 8;
      out.push_back(static_cast<std::uint8_t>((acc >> bits) & 0xFF));
    }
  }
  if (padding > 2) throw ProtocolError("invalid base64 padding");
  return out;
}

std::unique_ptr<Oracle> make_protocol_oracle(std::unique_ptr<Transport> transport) {
  if (!transport) throw ValidationError("null transport");
  return std::make_unique<ProtocolOracle>(std::move(transport));
}

std::string handle_request(Oracle& oracle, std::string_view request_line) {
  json req;
  try {
    req = json::parse(request_line);
  } catch (const json::exception& e) {
    return error_object("protocol", fmt::format("request is not valid JSON: {}", e.what())).dump();
  }
  try {
    if (!req.is_object() || !req.contains("op") || !req["op"].is_string()) {
      throw ProtocolError("request lacks string 'op'");
    }
    const std::string op = req["op"].get<std::string>();
    const OracleInfo& info = oracle.info();
    if (op == "handshake") {
      return json{{"labels", info.labels}, {"features", info.feature_layers}, {"model", info.model}}.dump();
    }
    if (op == "classify") {
      const ClassProbs p = oracle.classify(request_image(req));
      return json{{"labels", p.labels}, {"probs", p.probs}}.dump();
    }
    if (op == "features") {
      const auto layer = req.find("layer");
      if (layer == req.end() || !layer->is_string()) throw ProtocolError("features request lacks string 'layer'");
      const FeatureMap f = oracle.features(request_image(req), layer->get<std::string>());
      return json{{"feature", base64_encode(encode_png(f.image))}, {"layer", f.layer}}.dump();
    }
    throw ProtocolError(fmt::format("unknown op '{}'", op));
  } catch (const CapabilityError& e) {
    return error_object("capability", e.what()).dump();
  } catch (const ProtocolError& e) {
    return error_object("protocol", e.what()).dump();
  } catch (const std::exception& e) {
    return error_object("internal", e.what()).dump();
  }
}

void serve_stream(Oracle& oracle, std::istream& in, std::ostream& out) {
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    out << handle_request(oracle, line) << '\n' << std::flush;
  }
}

}  // namespace wmadv
