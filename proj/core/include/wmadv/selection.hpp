#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "wmadv/oracle.hpp"

namespace wmadv {

// A correctly classified host and the class its watermarks come from.
struct HostRecord {
  std::string image_id;  // path relative to the dataset directory
  std::string true_class;
  ClassProbs probs;
  std::string class_second;

  friend bool operator==(const HostRecord&, const HostRecord&) = default;
};

struct RankedWatermark {
  std::string image_id;  // file name inside the class directory
  double confidence = 0.0;

  friend bool operator==(const RankedWatermark&, const RankedWatermark&) = default;
};

struct WatermarkRanking {
  std::string target_class;
  std::vector<RankedWatermark> entries;  // non-increasing confidence
  std::size_t k = 10;
};

// Label of the second-largest probability. Among equal runners-up the
// lexicographically smallest label wins. Throws ValidationError for fewer
// than two classes.
std::string class_second(const ClassProbs& probs);

// Sorts by confidence descending, ties by image_id ascending, keeps k.
std::vector<RankedWatermark> rank_by_confidence(std::vector<RankedWatermark> entries, std::size_t k);

struct ManifestEntry {
  std::string image_id;
  std::string true_class;
};

// CSV with header `image_id,true_class`. Throws ValidationError.
std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path);

struct HostSelection {
  std::vector<HostRecord> hosts;
  std::size_t examined = 0;
  std::size_t misclassified = 0;
  std::vector<std::string> skipped;  // unreadable images
  std::size_t shortfall = 0;         // n - hosts.size()
};

// Visits manifest entries in a seeded uniformly random order (without
// replacement) and keeps correctly classified ones until n are found.
HostSelection select_hosts(const std::filesystem::path& dataset_dir, const std::filesystem::path& manifest,
                           Oracle& oracle, std::size_t n, std::uint64_t seed);

// Classifies every PNG/JPEG in class_dir and returns the top-k by the
// confidence of target_class. Throws ValidationError for an empty directory
// or an unknown target class.
WatermarkRanking rank_watermarks(const std::filesystem::path& class_dir, Oracle& oracle,
                                 std::string_view target_class, std::size_t k, std::size_t jobs = 1);

// Seeded Fisher-Yates on mt19937_64 with rejection sampling, so the order is
// the same on every standard library.
std::vector<std::size_t> seeded_permutation(std::size_t n, std::uint64_t seed);

// Image files (png/jpg/jpeg, case-insensitive) directly inside dir, sorted.
std::vector<std::filesystem::path> list_images(const std::filesystem::path& dir);

std::string hosts_to_json(const std::vector<HostRecord>& hosts);
std::vector<HostRecord> hosts_from_json(std::string_view text);
std::string ranking_to_json(const WatermarkRanking& ranking);

}  // namespace wmadv
