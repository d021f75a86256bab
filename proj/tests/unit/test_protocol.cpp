#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "reference.hpp"
#include "wmadv/error.hpp"
#include "wmadv/protocol.hpp"

using namespace wmadv;
using nlohmann::json;

namespace {

class ScriptedTransport final : public Transport {
 public:
  using Fn = std::function<std::string(const json&)>;
  explicit ScriptedTransport(Fn fn) : fn_(std::move(fn)) {}
  std::string round_trip(const std::string& request) override { return fn_(json::parse(request)); }

 private:
  Fn fn_;
};

const std::string kHandshake = R"({"labels":["a","b"],"features":["edge"],"model":"m"})";

// Handshake is answered normally; everything else gets `reply`.
std::unique_ptr<Oracle> oracle_replying(std::string reply) {
  return make_protocol_oracle(std::make_unique<ScriptedTransport>([reply](const json& req) {
    return req["op"] == "handshake" ? kHandshake : reply;
  }));
}

std::string classify_error(const std::string& reply) {
  const auto o = oracle_replying(reply);
  try {
    o->classify(ImageTensor::filled(2, 2, 1, 2, 3));
  } catch (const ProtocolError& e) {
    return e.what();
  }
  return {};
}

std::vector<std::uint8_t> bytes(std::string_view s) { return {s.begin(), s.end()}; }

}  // namespace

TEST_SUITE("protocol") {
  TEST_CASE("base64 known vectors and round trip") {
    CHECK(base64_encode(bytes("")) == "");
    CHECK(base64_encode(bytes("f")) == "Zg==");
    CHECK(base64_encode(bytes("fo")) == "Zm8=");
    CHECK(base64_encode(bytes("foo")) == "Zm9v");
    CHECK(base64_encode(bytes("foobar")) == "Zm9vYmFy");
    CHECK(base64_decode("Zm9vYg==") == bytes("foob"));
    CHECK(base64_decode("Zm9v\nYmFy") == bytes("foobar"));
    std::vector<std::uint8_t> all(256);
    for (int i = 0; i < 256; ++i) all[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(i);
    CHECK(base64_decode(base64_encode(all)) == all);
    CHECK_THROWS_AS(base64_decode("Zm9v*"), ProtocolError);
    CHECK_THROWS_AS(base64_decode("Zg==Zg"), ProtocolError);
  }

  TEST_CASE("builtin answers match the golden exchanges") {
    BuiltinOracle oracle(LinearModel::shipped());
    std::ifstream in(std::filesystem::path(WMADV_GOLDEN_DIR) / "protocol" / "builtin_exchanges.jsonl");
    REQUIRE(in);
    std::string line;
    int n = 0;
    while (std::getline(in, line)) {
      const json ex = json::parse(line);
      const json& want = ex["response"];
      const std::string request = ex["request"].is_string() ? ex["request"].get<std::string>() : ex["request"].dump();
      CAPTURE(request.substr(0, 60));
      const json got = json::parse(handle_request(oracle, request));
      ++n;
      if (want.contains("error")) {
        REQUIRE(got.contains("error"));
        CHECK(got["error"]["code"] == want["error"]["code"]);
        CHECK(got["error"]["message"].is_string());
      } else if (want.contains("probs")) {
        CHECK(got["labels"] == want["labels"]);
        REQUIRE(got["probs"].size() == want["probs"].size());
        for (std::size_t i = 0; i < want["probs"].size(); ++i) {
          CHECK(got["probs"][i].get<double>() == doctest::Approx(want["probs"][i].get<double>()).epsilon(1e-12));
        }
        // The probabilities themselves agree with the reference model.
        const auto img = decode(base64_decode(json::parse(request)["image"].get<std::string>()));
        const auto p = ref::linear_probs(oracle.model(), img);
        CHECK(want["probs"][0].get<double>() == doctest::Approx(p[0]).epsilon(1e-12));
      } else if (want.contains("feature")) {
        CHECK(got["layer"] == want["layer"]);
        CHECK(decode(base64_decode(got["feature"].get<std::string>())) ==
              decode(base64_decode(want["feature"].get<std::string>())));
      } else {
        CHECK(got == want);
      }
    }
    CHECK(n == 12);
  }

  TEST_CASE("handshake lists labels, layers and model") {
    BuiltinOracle oracle(LinearModel::shipped());
    const json h = json::parse(handle_request(oracle, R"({"op":"handshake"})"));
    CHECK(h["labels"] == json::array({"warm", "cool"}));
    CHECK(h["features"] == json::array({"edge", "dc"}));
    CHECK(h["model"] == "builtin-warmcool-v1");
  }

  TEST_CASE("serve_stream answers one line per request and skips blanks") {
    BuiltinOracle oracle(LinearModel::shipped());
    std::istringstream in("{\"op\":\"handshake\"}\n\n{\"op\":\"nope\"}\n");
    std::ostringstream out;
    serve_stream(oracle, in, out);
    std::istringstream lines(out.str());
    std::string a, b, c;
    CHECK(std::getline(lines, a));
    CHECK(std::getline(lines, b));
    CHECK(!std::getline(lines, c));
    CHECK(json::parse(b)["error"]["code"] == "protocol");
  }

  TEST_CASE("protocol oracle decodes classify and features") {
    const auto o = make_protocol_oracle(std::make_unique<ScriptedTransport>([](const json& req) -> std::string {
      if (req["op"] == "handshake") return kHandshake;
      const auto img = decode(base64_decode(req["image"].get<std::string>()));
      if (req["op"] == "classify") {
        const double p = img[0](0, 0) / 255.0;
        return json{{"labels", {"a", "b"}}, {"probs", {p, 1.0 - p}}}.dump();
      }
      return json{{"feature", base64_encode(encode_png(img))}, {"layer", req["layer"]}}.dump();
    }));
    CHECK(o->info().model == "m");
    CHECK(o->info().feature_layers == std::vector<std::string>{"edge"});
    const auto p = o->classify(ImageTensor::filled(2, 2, 51, 0, 0));
    CHECK(p.probs[0] == doctest::Approx(0.2));
    const auto f = o->features(ImageTensor::filled(2, 2, 9, 8, 7), "edge");
    CHECK(f.image == ImageTensor::filled(2, 2, 9, 8, 7));
    CHECK_THROWS_AS(o->features(ImageTensor::filled(2, 2, 9, 8, 7), "dc"), CapabilityError);
  }

  TEST_CASE("invalid classify payloads become protocol errors with an excerpt") {
    const auto sum = classify_error(R"({"labels":["a","b"],"probs":[0.7,0.4]})");
    CHECK(sum.find("sum to") != std::string::npos);
    CHECK(sum.find("\"probs\":[0.7,0.4]") != std::string::npos);
    CHECK(classify_error("not json").find("not valid JSON") != std::string::npos);
    CHECK(classify_error(R"({"labels":["a","b"]})").find("'probs'") != std::string::npos);
    CHECK(classify_error(R"({"labels":["a","b"],"probs":["x",1]})").find("non-numeric") != std::string::npos);
    CHECK(classify_error(R"({"labels":["b","a"],"probs":[0.5,0.5]})").find("differ from handshake") !=
          std::string::npos);
    CHECK(classify_error(R"({"labels":["a","b","c"],"probs":[0.5,0.25,0.25]})").find("differ") != std::string::npos);
    CHECK(classify_error(R"({"error":{"code":"internal","message":"gpu on fire"}})").find("gpu on fire") !=
          std::string::npos);
    const std::string long_reply = "{\"labels\":[\"a\",\"b\"],\"probs\":[" + std::string(500, ' ') + "2,0]}";
    CHECK(classify_error(long_reply).find("bytes)") != std::string::npos);
  }

  TEST_CASE("capability errors survive the wire") {
    const auto o = oracle_replying(R"({"error":{"code":"capability","message":"no such layer"}})");
    CHECK_THROWS_AS(o->features(ImageTensor::filled(2, 2, 1, 1, 1), "edge"), CapabilityError);
  }

  TEST_CASE("bad handshakes are rejected at connect time") {
    const auto with = [](std::string reply) {
      return [reply] { make_protocol_oracle(std::make_unique<ScriptedTransport>([reply](const json&) { return reply; })); };
    };
    CHECK_THROWS_AS(with("[]")(), ProtocolError);
    CHECK_THROWS_AS(with(R"({"labels":[]})")(), ProtocolError);
    CHECK_THROWS_AS(with(R"({"labels":[1,2]})")(), ProtocolError);
    CHECK_THROWS_AS(with("garbage")(), ProtocolError);
    CHECK_THROWS_AS(make_protocol_oracle(nullptr), ValidationError);
  }
}
