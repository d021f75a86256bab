#pragma once

#include <array>
#include <condition_variable>
#include <cstddef>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "wmadv/imaging.hpp"

namespace wmadv {

// Classifier output aligned with the oracle's fixed label vocabulary.
struct ClassProbs {
  std::vector<std::string> labels;
  std::vector<double> probs;

  // Throws ProtocolError unless labels are non-empty and unique, sizes
  // agree, every prob is in [0,1], and the sum is within 1e-4 of 1.
  void validate() const;

  std::optional<std::size_t> index_of(std::string_view label) const;
  // Probability of `label`; throws ValidationError if absent.
  double prob(std::string_view label) const;
  // Highest probability; ties go to the lexicographically smallest label.
  std::size_t argmax() const;
  const std::string& top_label() const { return labels[argmax()]; }

  friend bool operator==(const ClassProbs&, const ClassProbs&) = default;
};

struct FeatureMap {
  std::string layer;
  ImageTensor image;  // min-max rescaled to [0,255], replicated to 3 planes
};

// What the endpoint reported at handshake.
struct OracleInfo {
  std::vector<std::string> labels;
  std::vector<std::string> feature_layers;
  std::string model;
};

enum class EndpointKind { Builtin, Subprocess, Http };

// Where an oracle lives. Parsed from strings of the form
//   builtin | builtin:<weights file> | subprocess:<command line> | http://host:port
struct OracleEndpoint {
  EndpointKind kind = EndpointKind::Builtin;
  std::string address;  // weights path, command line or URL (may be empty for builtin)

  static OracleEndpoint parse(std::string_view spec);
  std::string to_string() const;
};

// Environment variable consulted when no --oracle flag is given.
inline constexpr const char* kOracleEnvVar = "WMADV_ORACLE";

// A connected, handshaken classifier. classify()/features() enforce the
// ClassProbs and FeatureMap invariants on whatever the implementation
// returns, so callers never see an invalid vector. Implementations must be
// safe to call from several threads.
class Oracle {
 public:
  virtual ~Oracle() = default;
  Oracle(const Oracle&) = delete;
  Oracle& operator=(const Oracle&) = delete;

  const OracleInfo& info() const { return info_; }
  ClassProbs classify(const ImageTensor& img);
  FeatureMap features(const ImageTensor& img, std::string_view layer);
  bool has_layer(std::string_view layer) const;

 protected:
  Oracle() = default;
  explicit Oracle(OracleInfo info) : info_(std::move(info)) {}
  void set_info(OracleInfo info) { info_ = std::move(info); }

  virtual ClassProbs do_classify(const ImageTensor& img) = 0;
  virtual FeatureMap do_features(const ImageTensor& img, std::string_view layer) = 0;

 private:
  OracleInfo info_;
};

// ---------------------------------------------------------------------------
// Builtin linear-softmax model.

inline constexpr std::size_t kLinearFeatureCount = 8;
inline constexpr std::array<std::string_view, kLinearFeatureCount> kLinearFeatureNames{
    "mean_r", "mean_g", "mean_b", "mean_y", "energy_r", "energy_g", "energy_b", "energy_y"};

// scores = W * phi(img) + bias, probs = softmax(scores).
struct LinearModel {
  std::string model;
  std::vector<std::string> labels;
  Eigen::Matrix<double, Eigen::Dynamic, static_cast<int>(kLinearFeatureCount), Eigen::RowMajor> weights;  // K x 8
  Eigen::VectorXd bias;  // K

  // Key-value text; see data/builtin_oracle_v1.txt. Throws ConfigError.
  static LinearModel parse(std::string_view text);
  static LinearModel load(const std::filesystem::path& path);
  // The weights file shipped with the library.
  static LinearModel shipped();

  Eigen::VectorXd scores(const ImageTensor& img) const;
};

// phi: per-channel means of R, G, B and Rec.601 luma Y, then the mean squared
// level-2 Haar approximation coefficient of each, all scaled into [0,1].
std::array<double, kLinearFeatureCount> linear_features(const ImageTensor& img);

ClassProbs builtin_classify(const LinearModel& model, const ImageTensor& img);

// Builtin feature layers: "edge" is the 3x3 Sobel gradient magnitude of luma
// (replicated borders); "dc" is the level-2 Haar approximation of luma.
// Both are min-max rescaled to [0,255] (all zeros when the map is flat).
inline constexpr std::array<std::string_view, 2> kBuiltinLayers{"edge", "dc"};
FeatureMap builtin_features(const ImageTensor& img, std::string_view layer);

class BuiltinOracle final : public Oracle {
 public:
  explicit BuiltinOracle(LinearModel model);
  const LinearModel& model() const { return model_; }

 protected:
  ClassProbs do_classify(const ImageTensor& img) override;
  FeatureMap do_features(const ImageTensor& img, std::string_view layer) override;

 private:
  LinearModel model_;
};

// ---------------------------------------------------------------------------
// Protocol-backed oracles (subprocess and HTTP share one JSON schema).

// Carries one JSON request line to the endpoint and returns its response line.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual std::string round_trip(const std::string& request) = 0;
};

// Spawns `/bin/sh -c command` and talks one JSON object per line over its
// stdin/stdout. One request in flight at a time.
std::unique_ptr<Transport> make_subprocess_transport(const std::string& command, int timeout_ms = 60000);
// POSTs to <url>/v1/oracle.
std::unique_ptr<Transport> make_http_transport(const std::string& url, int timeout_ms = 60000);

// Performs the handshake immediately; throws if it fails.
std::unique_ptr<Oracle> make_protocol_oracle(std::unique_ptr<Transport> transport);

// Spreads calls over several connections; each call checks one out.
class OraclePool final : public Oracle {
 public:
  explicit OraclePool(std::vector<std::unique_ptr<Oracle>> members);
  std::size_t size() const { return members_.size(); }

 protected:
  ClassProbs do_classify(const ImageTensor& img) override;
  FeatureMap do_features(const ImageTensor& img, std::string_view layer) override;

 private:
  class Lease;
  std::vector<std::unique_ptr<Oracle>> members_;
  std::vector<std::size_t> idle_;
  std::mutex mutex_;
  std::condition_variable available_;
};

// Connects and handshakes. Builtin endpoints ignore pool_size (reentrant);
// subprocess endpoints spawn pool_size processes.
std::unique_ptr<Oracle> connect(const OracleEndpoint& endpoint, std::size_t pool_size = 1);

}  // namespace wmadv
