#pragma once

// JSON oracle wire protocol, shared by the subprocess (one object per line
// on stdin/stdout) and HTTP (POST /v1/oracle) transports.
//
//   request   {"op":"handshake"}
//             {"op":"classify","image":"<base64 PNG>"}
//             {"op":"features","image":"<base64 PNG>","layer":"<id>"}
//   response  {"labels":[...],"features":[...],"model":"<name>"}   handshake
//             {"labels":[...],"probs":[...]}                        classify
//             {"feature":"<base64 PNG>","layer":"<id>"}             features
//             {"error":{"code":"capability|protocol|internal","message":"..."}}

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "wmadv/oracle.hpp"

namespace wmadv {

inline constexpr std::string_view kHttpOraclePath = "/v1/oracle";

std::string base64_encode(std::span<const std::uint8_t> bytes);
// Throws ProtocolError on characters outside the standard alphabet.
std::vector<std::uint8_t> base64_decode(std::string_view text);

// Answers one request line against `oracle`. Never throws for bad input; the
// failure is reported as an error object.
std::string handle_request(Oracle& oracle, std::string_view request_line);

// Serves requests line by line until EOF on `in`.
void serve_stream(Oracle& oracle, std::istream& in, std::ostream& out);

// Serves the protocol over HTTP on a background thread.
class HttpOracleServer {
 public:
  explicit HttpOracleServer(Oracle& oracle);
  ~HttpOracleServer();
  HttpOracleServer(const HttpOracleServer&) = delete;
  HttpOracleServer& operator=(const HttpOracleServer&) = delete;

  // port 0 picks a free port. Returns the bound port.
  int start(const std::string& host, int port);
  // Blocks the calling thread serving until stop().
  void run(const std::string& host, int port);
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace wmadv
