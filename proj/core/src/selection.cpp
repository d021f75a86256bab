#include "wmadv/selection.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <set>
#include <mutex>
#include <optional>
#include <random>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "json.hpp"
#include "wmadv/csv.hpp"
#include "wmadv/error.hpp"
#include "wmadv/parallel.hpp"

namespace wmadv {

using nlohmann::json;

std::string class_second(const ClassProbs& probs) {
  if (probs.labels.size() < 2 || probs.labels.size() != probs.probs.size()) {
    throw ValidationError("class_second needs at least two classes");
  }
  std::vector<std::size_t> order(probs.labels.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (probs.probs[a] != probs.probs[b]) return probs.probs[a] > probs.probs[b];
    return probs.labels[a] < probs.labels[b];
  });
  return probs.labels[order[1]];
}

std::vector<RankedWatermark> rank_by_confidence(std::vector<RankedWatermark> entries, std::size_t k) {
  std::sort(entries.begin(), entries.end(), [](const RankedWatermark& a, const RankedWatermark& b) {
    if (a.confidence != b.confidence) return a.confidence > b.confidence;
    return a.image_id < b.image_id;
  });
  if (entries.size() > k) entries.resize(k);
  return entries;
}

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError(fmt::format("cannot open labels manifest {}", path.string()));
  std::vector<std::string> row;
  if (!csv::read_row(in, row)) throw ValidationError(fmt::format("labels manifest {} is empty", path.string()));
  if (!row.empty() && row[0].starts_with("\xEF\xBB\xBF")) row[0].erase(0, 3);
  if (row.size() != 2 || row[0] != "image_id" || row[1] != "true_class") {
    throw ValidationError(fmt::format("labels manifest {} must start with header image_id,true_class", path.string()));
  }
  std::vector<ManifestEntry> out;
  std::size_t line = 1;
  while (csv::read_row(in, row)) {
    ++line;
    if (row.size() == 1 && row[0].empty()) continue;
    if (row.size() != 2 || row[0].empty() || row[1].empty()) {
      throw ValidationError(fmt::format("{}:{}: expected image_id,true_class", path.string(), line));
    }
    out.push_back({row[0], row[1]});
  }
  std::set<std::string_view> ids;
  for (const auto& e : out) {
    if (!ids.insert(e.image_id).second) {
      throw ValidationError(fmt::format("{}: duplicate image_id '{}'", path.string(), e.image_id));
    }
  }
  return out;
}

std::vector<std::size_t> seeded_permutation(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  std::mt19937_64 rng(seed);
  for (std::size_t i = n; i > 1; --i) {
    // Uniform j in [0, i) by rejection.
    const std::uint64_t bound = i;
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t r;
    do {
      r = rng();
    } while (r >= limit);
    std::swap(perm[i - 1], perm[static_cast<std::size_t>(r % bound)]);
  }
  return perm;
}

std::vector<std::filesystem::path> list_images(const std::filesystem::path& dir) {
  std::error_code ec;
  std::vector<std::filesystem::path> out;
  for (const auto& entry : std::filesystem::directory_iterator(dir, ec)) {
    if (!entry.is_regular_file()) continue;
    std::string ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext == ".png" || ext == ".jpg" || ext == ".jpeg") out.push_back(entry.path());
  }
  if (ec) throw IoError(fmt::format("cannot list {}: {}", dir.string(), ec.message()));
  std::sort(out.begin(), out.end());
  return out;
}

HostSelection select_hosts(const std::filesystem::path& dataset_dir, const std::filesystem::path& manifest,
                           Oracle& oracle, std::size_t n, std::uint64_t seed) {
  auto entries = read_manifest(manifest);
  std::sort(entries.begin(), entries.end(),
            [](const ManifestEntry& a, const ManifestEntry& b) { return a.image_id < b.image_id; });
  HostSelection sel;
  for (const std::size_t idx : seeded_permutation(entries.size(), seed)) {
    if (sel.hosts.size() >= n) break;
    const ManifestEntry& e = entries[idx];
    ImageTensor img;
    try {
      img = load_image(dataset_dir / e.image_id);
    } catch (const Error& err) {
      spdlog::warn("skipping host {}: {}", e.image_id, err.what());
      sel.skipped.push_back(e.image_id);
      continue;
    }
    ++sel.examined;
    ClassProbs probs = oracle.classify(img);
    if (!probs.index_of(e.true_class)) {
      spdlog::warn("host {} has class '{}' outside the oracle vocabulary", e.image_id, e.true_class);
      ++sel.misclassified;
      continue;
    }
    if (probs.top_label() != e.true_class) {
      ++sel.misclassified;
      continue;
    }
    HostRecord rec{e.image_id, e.true_class, probs, class_second(probs)};
    sel.hosts.push_back(std::move(rec));
  }
  sel.shortfall = n > sel.hosts.size() ? n - sel.hosts.size() : 0;
  if (sel.shortfall > 0) {
    spdlog::warn("found {} correctly classified hosts of {} requested ({} misclassified, {} unreadable)",
                 sel.hosts.size(), n, sel.misclassified, sel.skipped.size());
  }
  return sel;
}

WatermarkRanking rank_watermarks(const std::filesystem::path& class_dir, Oracle& oracle,
                                 std::string_view target_class, std::size_t k, std::size_t jobs) {
  if (std::find(oracle.info().labels.begin(), oracle.info().labels.end(), target_class) ==
      oracle.info().labels.end()) {
    throw ValidationError(fmt::format("target class '{}' is not in the oracle vocabulary", target_class));
  }
  const auto files = list_images(class_dir);
  if (files.empty()) throw ValidationError(fmt::format("watermark directory {} holds no images", class_dir.string()));

  std::vector<std::optional<RankedWatermark>> scored(files.size());
  parallel_for(files.size(), jobs, [&](std::size_t i) {
    const std::string id = files[i].filename().string();
    try {
      const ClassProbs p = oracle.classify(load_image(files[i]));
      scored[i] = RankedWatermark{id, p.prob(target_class)};
    } catch (const DecodeError& e) {
      spdlog::warn("skipping watermark {}: {}", id, e.what());
    } catch (const ProtocolError& e) {
      spdlog::warn("oracle rejected watermark {}: {}", id, e.what());
    } catch (const OracleError& e) {
      spdlog::warn("oracle failed on watermark {}: {}", id, e.what());
    }
  });
  std::vector<RankedWatermark> entries;
  for (auto& s : scored) {
    if (s) entries.push_back(std::move(*s));
  }
  return {std::string(target_class), rank_by_confidence(std::move(entries), k), k};
}

std::string hosts_to_json(const std::vector<HostRecord>& hosts) {
  json arr = json::array();
  for (const auto& h : hosts) {
    arr.push_back({{"image_id", h.image_id},
                   {"true_class", h.true_class},
                   {"class_second", h.class_second},
                   {"labels", h.probs.labels},
                   {"probs", h.probs.probs}});
  }
  return arr.dump(2) + "\n";
}

std::vector<HostRecord> hosts_from_json(std::string_view text) {
  std::vector<HostRecord> out;
  try {
    const json arr = json::parse(text);
    if (!arr.is_array()) throw ValidationError("host list JSON must be an array");
    for (const auto& j : arr) {
      HostRecord h;
      h.image_id = j.at("image_id").get<std::string>();
      h.true_class = j.at("true_class").get<std::string>();
      h.class_second = j.at("class_second").get<std::string>();
      h.probs.labels = j.at("labels").get<std::vector<std::string>>();
      h.probs.probs = j.at("probs").get<std::vector<double>>();
      out.push_back(std::move(h));
    }
  } catch (const json::exception& e) {
    throw ValidationError(fmt::format("malformed host list JSON: {}", e.what()));
  }
  return out;
}

std::string ranking_to_json(const WatermarkRanking& ranking) {
  json entries = json::array();
  for (const auto& e : ranking.entries) entries.push_back({{"image_id", e.image_id}, {"confidence", e.confidence}});
  return json{{"class", ranking.target_class}, {"k", ranking.k}, {"entries", entries}}.dump(2) + "\n";
}

}  // namespace wmadv
