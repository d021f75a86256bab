#include "wmadv/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "wmadv/error.hpp"

namespace wmadv {

void ClassProbs::validate() const {
  if (labels.empty()) throw ProtocolError("class probabilities carry no labels");
  if (labels.size() != probs.size()) {
    throw ProtocolError(fmt::format("{} labels but {} probabilities", labels.size(), probs.size()));
  }
  std::set<std::string_view> seen;
  for (const auto& l : labels) {
    if (!seen.insert(l).second) throw ProtocolError(fmt::format("duplicate label '{}'", l));
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const double p = probs[i];
    if (!(p >= 0.0 && p <= 1.0)) {
      throw ProtocolError(fmt::format("probability {} for '{}' outside [0,1]", p, labels[i]));
    }
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-4) {
    throw ProtocolError(fmt::format("probabilities [{}] sum to {}, not 1", fmt::join(probs, ", "), sum));
  }
}

std::optional<std::size_t> ClassProbs::index_of(std::string_view label) const {
  const auto it = std::find(labels.begin(), labels.end(), label);
  if (it == labels.end()) return std::nullopt;
  return static_cast<std::size_t>(it - labels.begin());
}

double ClassProbs::prob(std::string_view label) const {
  const auto i = index_of(label);
  if (!i) throw ValidationError(fmt::format("label '{}' not in vocabulary", label));
  return probs[*i];
}

std::size_t ClassProbs::argmax() const {
  if (probs.empty()) throw ValidationError("argmax of empty probability vector");
  std::size_t best = 0;
  for (std::size_t i = 1; i < probs.size(); ++i) {
    if (probs[i] > probs[best] || (probs[i] == probs[best] && labels[i] < labels[best])) best = i;
  }
  return best;
}

bool Oracle::has_layer(std::string_view layer) const {
  return std::find(info_.feature_layers.begin(), info_.feature_layers.end(), layer) !=
         info_.feature_layers.end();
}

ClassProbs Oracle::classify(const ImageTensor& img) {
  ClassProbs out = do_classify(img);
  out.validate();
  if (out.labels != info_.labels) {
    throw ProtocolError(fmt::format("response labels [{}] differ from handshake vocabulary [{}]",
                                    fmt::join(out.labels, ","), fmt::join(info_.labels, ",")));
  }
  return out;
}

FeatureMap Oracle::features(const ImageTensor& img, std::string_view layer) {
  if (info_.feature_layers.empty()) {
    throw CapabilityError(fmt::format("oracle '{}' does not offer feature extraction", info_.model));
  }
  if (!has_layer(layer)) {
    throw CapabilityError(fmt::format("unknown feature layer '{}'; available layers: {{{}}}", layer,
                                      fmt::join(info_.feature_layers, ",")));
  }
  FeatureMap out = do_features(img, layer);
  if (out.image.empty()) throw ProtocolError(fmt::format("feature layer '{}' returned an empty map", layer));
  for (int c = 0; c < 3; ++c) {
    if (out.image[c].minCoeff() < 0.0 || out.image[c].maxCoeff() > 255.0) {
      throw ProtocolError(fmt::format("feature layer '{}' returned values outside [0,255]", layer));
    }
  }
  return out;
}

OracleEndpoint OracleEndpoint::parse(std::string_view spec) {
  OracleEndpoint ep;
  if (spec == "builtin") return ep;
  if (spec.starts_with("builtin:")) {
    ep.address = std::string(spec.substr(8));
    if (ep.address.empty()) throw ValidationError("builtin: needs a weights file path");
    return ep;
  }
  if (spec.starts_with("subprocess:")) {
    ep.kind = EndpointKind::Subprocess;
    ep.address = std::string(spec.substr(11));
    if (ep.address.empty()) throw ValidationError("subprocess: needs a command line");
    return ep;
  }
  if (spec.starts_with("http://")) {
    ep.kind = EndpointKind::Http;
    ep.address = std::string(spec);
    return ep;
  }
  throw ValidationError(fmt::format(
      "oracle '{}' not understood; use builtin, builtin:<weights>, subprocess:<command> or http://host:port",
      spec));
}

std::string OracleEndpoint::to_string() const {
  switch (kind) {
    case EndpointKind::Builtin:
      return address.empty() ? "builtin" : "builtin:" + address;
    case EndpointKind::Subprocess:
      return "subprocess:" + address;
    case EndpointKind::Http:
      return address;
  }
  return {};
}

class OraclePool::Lease {
 public:
  explicit Lease(OraclePool& pool) : pool_(pool) {
    std::unique_lock lock(pool_.mutex_);
    pool_.available_.wait(lock, [&] { return !pool_.idle_.empty(); });
    index_ = pool_.idle_.back();
    pool_.idle_.pop_back();
  }
  ~Lease() {
    {
      std::lock_guard lock(pool_.mutex_);
      pool_.idle_.push_back(index_);
    }
    pool_.available_.notify_one();
  }
  Lease(const Lease&) = delete;
  Lease& operator=(const Lease&) = delete;

  Oracle& oracle() { return *pool_.members_[index_]; }

 private:
  OraclePool& pool_;
  std::size_t index_ = 0;
};

OraclePool::OraclePool(std::vector<std::unique_ptr<Oracle>> members) : members_(std::move(members)) {
  if (members_.empty()) throw ValidationError("oracle pool needs at least one member");
  for (std::size_t i = 1; i < members_.size(); ++i) {
    if (members_[i]->info().labels != members_[0]->info().labels) {
      throw ProtocolError("oracle pool members disagree on the label vocabulary");
    }
  }
  set_info(members_[0]->info());
  for (std::size_t i = members_.size(); i-- > 0;) idle_.push_back(i);
}

ClassProbs OraclePool::do_classify(const ImageTensor& img) {
  Lease lease(*this);
  return lease.oracle().classify(img);
}

FeatureMap OraclePool::do_features(const ImageTensor& img, std::string_view layer) {
  Lease lease(*this);
  return lease.oracle().features(img, layer);
}

std::unique_ptr<Oracle> connect(const OracleEndpoint& endpoint, std::size_t pool_size) {
  pool_size = std::max<std::size_t>(pool_size, 1);
  switch (endpoint.kind) {
    case EndpointKind::Builtin:
      return std::make_unique<BuiltinOracle>(endpoint.address.empty() ? LinearModel::shipped()
                                                                      : LinearModel::load(endpoint.address));
    case EndpointKind::Subprocess:
    case EndpointKind::Http: {
      auto make_one = [&] {
        auto transport = endpoint.kind == EndpointKind::Subprocess ? make_subprocess_transport(endpoint.address)
                                                                   : make_http_transport(endpoint.address);
        return make_protocol_oracle(std::move(transport));
      };
      if (pool_size == 1) return make_one();
      std::vector<std::unique_ptr<Oracle>> members;
      for (std::size_t i = 0; i < pool_size; ++i) members.push_back(make_one());
      return std::make_unique<OraclePool>(std::move(members));
    }
  }
  throw ValidationError("unknown endpoint kind");
}

}  // namespace wmadv
