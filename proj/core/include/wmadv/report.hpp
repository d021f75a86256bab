#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "wmadv/harness.hpp"

namespace wmadv {

// records.csv column order.
inline constexpr std::string_view kRecordsHeader =
    "host_id,wm_id,algo,s_r,s_g,s_b,embed_t,true_class,top_class,p_true,p_top,success,l2,linf,error";

// Doubles are written in shortest round-trip form, so read_records() gives
// back the serialized fields exactly. Errored rows leave top_class, p_true
// and p_top empty.
void write_records(std::ostream& out, std::span<const AttackRecord> records);

// The label vocabulary is not part of the CSV: parsed records carry probs
// with labels {true_class, top_class} only. host_index/wm_rank are rebuilt
// from first-appearance order. Throws ValidationError.
std::vector<AttackRecord> read_records(std::istream& in);

std::string summary_to_json(const AttackSummary& summary, std::string_view model);
std::string combined_to_json(const CombinedResult& result, std::string_view model);

// plotdata.csv: algo,model,embed_t,success_rate (one row per round and algo).
void write_plotdata(std::ostream& out, std::span<const AttackSummary> summaries, std::string_view model);
// polyline.csv: host_id,wm_id,algo,embed_t,p_true (confidence trajectory).
void write_polyline(std::ostream& out, std::span<const AttackRecord> records);

struct ReportFiles {
  std::filesystem::path records;
  std::filesystem::path summary;
  std::filesystem::path plotdata;
  std::filesystem::path polyline;
  std::filesystem::path manifest;
};

// Writes records.csv, summary.json, plotdata.csv, polyline.csv and
// manifest.json into out_dir. `summary_json` and `manifest_json` are written
// verbatim. Throws IoError naming the path.
ReportFiles emit_report(const std::filesystem::path& out_dir, std::span<const AttackRecord> records,
                        std::span<const AttackSummary> summaries, std::string_view model,
                        std::string_view summary_json, std::string_view manifest_json);

}  // namespace wmadv
