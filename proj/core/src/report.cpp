#include "wmadv/report.hpp"

#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

#include <fmt/format.h>

#include "json.hpp"
#include "wmadv/csv.hpp"
#include "wmadv/error.hpp"

namespace wmadv {

using nlohmann::json;

namespace {

std::string num(double v) { return fmt::format("{}", v); }

double parse_double(const std::string& s, std::size_t line, std::string_view column) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size()) {
    throw ValidationError(fmt::format("records.csv line {}: column {} = '{}' is not a number", line, column, s));
  }
  return v;
}

json summary_json(const AttackSummary& s) {
  json rounds = json::array();
  for (const auto& r : s.per_round) {
    rounds.push_back({{"embed_t", r.embed_t}, {"successes", r.successes}, {"hosts", r.hosts}, {"rate", r.rate}});
  }
  return {{"algo", s.algo},
          {"aggregation", to_string(s.aggregation)},
          {"hosts", s.host_count},
          {"successful_hosts", s.successful_hosts},
          {"total_success_rate", s.total_success_rate},
          {"errored_records", s.errored_records},
          {"per_round", rounds}};
}

void write_text(const std::filesystem::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(fmt::format("cannot open {} for writing", path.string()));
  out << text;
  if (!out) throw IoError(fmt::format("error writing {}", path.string()));
}

}  // namespace

void write_records(std::ostream& out, std::span<const AttackRecord> records) {
  out << kRecordsHeader << '\n';
  for (const auto& r : records) {
    const bool ok = !r.errored();
    csv::write_row(out, {r.host_id, r.wm_id, std::string(to_string(r.algo)), num(r.strengths.r), num(r.strengths.g),
                         num(r.strengths.b), std::to_string(r.embed_t), r.true_class, ok ? r.top_class() : "",
                         ok ? num(r.p_true()) : "", ok ? num(r.p_top()) : "", r.success ? "1" : "0", num(r.l2),
                         num(r.linf), r.error});
  }
}

std::vector<AttackRecord> read_records(std::istream& in) {
  std::vector<std::string> row;
  if (!csv::read_row(in, row)) throw ValidationError("records.csv is empty");
  std::ostringstream header;
  csv::write_row(header, row);
  if (header.str() != std::string(kRecordsHeader) + "\n") {
    throw ValidationError(fmt::format("records.csv header mismatch; expected {}", kRecordsHeader));
  }
  std::vector<AttackRecord> out;
  std::map<std::string, std::size_t> host_index;
  std::map<std::pair<std::string, std::string>, std::size_t> wm_rank;
  std::map<std::string, std::size_t> wm_count;
  std::size_t line = 1;
  while (csv::read_row(in, row)) {
    ++line;
    if (row.size() == 1 && row[0].empty()) continue;
    if (row.size() != 15) {
      throw ValidationError(fmt::format("records.csv line {}: {} columns, expected 15", line, row.size()));
    }
    AttackRecord r;
    r.host_id = row[0];
    r.wm_id = row[1];
    r.algo = parse_algo(row[2]);
    r.strengths = {parse_double(row[3], line, "s_r"), parse_double(row[4], line, "s_g"),
                   parse_double(row[5], line, "s_b")};
    r.embed_t = static_cast<int>(parse_double(row[6], line, "embed_t"));
    r.true_class = row[7];
    r.error = row[14];
    if (row[11] != "0" && row[11] != "1") {
      throw ValidationError(fmt::format("records.csv line {}: success must be 0 or 1", line));
    }
    r.success = row[11] == "1";
    r.l2 = parse_double(row[12], line, "l2");
    r.linf = parse_double(row[13], line, "linf");
    if (!r.errored()) {
      const double p_true = parse_double(row[9], line, "p_true");
      const double p_top = parse_double(row[10], line, "p_top");
      r.probs.labels.push_back(r.true_class);
      r.probs.probs.push_back(p_true);
      if (row[8] != r.true_class) {
        r.probs.labels.push_back(row[8]);
        r.probs.probs.push_back(p_top);
      }
    }
    const auto [hit, fresh] = host_index.emplace(r.host_id, host_index.size());
    r.host_index = hit->second;
    const auto key = std::pair{r.host_id + "\x1f" + std::string(to_string(r.algo)), r.wm_id};
    if (const auto it = wm_rank.find(key); it != wm_rank.end()) {
      r.wm_rank = it->second;
    } else {
      r.wm_rank = wm_count[key.first]++;
      wm_rank.emplace(key, r.wm_rank);
    }
    out.push_back(std::move(r));
  }
  return out;
}

std::string summary_to_json(const AttackSummary& summary, std::string_view model) {
  json j = summary_json(summary);
  j["model"] = model;
  return j.dump(2) + "\n";
}

std::string combined_to_json(const CombinedResult& result, std::string_view model) {
  const json j{{"model", model},
               {"stages", {{"dct", summary_json(result.dct)}, {"dwt", summary_json(result.dwt)}}},
               {"dwt_hosts", result.dwt_hosts},
               {"combined",
                {{"hosts", result.host_count},
                 {"successful_hosts", result.successful_hosts},
                 {"total_success_rate", result.total_success_rate}}}};
  return j.dump(2) + "\n";
}

void write_plotdata(std::ostream& out, std::span<const AttackSummary> summaries, std::string_view model) {
  out << "algo,model,embed_t,success_rate\n";
  for (const auto& s : summaries) {
    for (const auto& r : s.per_round) {
      csv::write_row(out, {s.algo, std::string(model), std::to_string(r.embed_t), num(r.rate)});
    }
  }
}

void write_polyline(std::ostream& out, std::span<const AttackRecord> records) {
  out << "host_id,wm_id,algo,embed_t,p_true\n";
  for (const auto& r : records) {
    csv::write_row(out, {r.host_id, r.wm_id, std::string(to_string(r.algo)), std::to_string(r.embed_t),
                         r.errored() ? "" : num(r.p_true())});
  }
}

ReportFiles emit_report(const std::filesystem::path& out_dir, std::span<const AttackRecord> records,
                        std::span<const AttackSummary> summaries, std::string_view model,
                        std::string_view summary_json_text, std::string_view manifest_json) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError(fmt::format("cannot create {}: {}", out_dir.string(), ec.message()));
  ReportFiles files{out_dir / "records.csv", out_dir / "summary.json", out_dir / "plotdata.csv",
                    out_dir / "polyline.csv", out_dir / "manifest.json"};
  std::ostringstream rec;
  write_records(rec, records);
  write_text(files.records, rec.str());
  write_text(files.summary, summary_json_text);
  std::ostringstream plot;
  write_plotdata(plot, summaries, model);
  write_text(files.plotdata, plot.str());
  std::ostringstream poly;
  write_polyline(poly, records);
  write_text(files.polyline, poly.str());
  write_text(files.manifest, manifest_json);
  return files;
}

}  // namespace wmadv
