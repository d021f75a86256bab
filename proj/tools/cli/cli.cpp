#include "cli/cli.hpp"

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>

#include <fmt/format.h>
#include <fmt/ranges.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "json.hpp"
#include "wmadv/embedder.hpp"
#include "wmadv/error.hpp"
#include "wmadv/harness.hpp"
#include "wmadv/imaging.hpp"
#include "wmadv/oracle.hpp"
#include "wmadv/parallel.hpp"
#include "wmadv/protocol.hpp"
#include "wmadv/report.hpp"
#include "wmadv/selection.hpp"
#include "wmadv/transforms.hpp"
#include "wmadv/version.hpp"

namespace wmadv::cli {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

struct RunConfig {
  // oracle
  std::string oracle;
  std::size_t oracle_pool = 1;
  int oracle_retries = 2;
  std::size_t jobs = default_jobs();
  // selection
  std::string dataset;
  std::string manifest;
  std::string hosts;
  std::size_t n = 100;
  std::uint64_t seed = 1;
  std::string watermarks;
  std::size_t k = 10;
  std::string class_dir;
  std::string target_class;
  // embedding
  std::string algo = "dwt";
  std::string strengths;
  std::string strengths_dct;
  std::string strengths_dwt;
  std::string schedule;
  std::string schedule_dct;
  std::string schedule_dwt;
  int t = 1;
  int host_size = 256;
  int wm_size = 64;
  std::string signs = "g+rb-";
  std::string dct_signs;
  bool sequential_quantize = false;
  bool first_watermark_only = false;
  std::string feature_layer;
  // files
  std::string host;
  std::string wm;
  std::string image;
  std::string layer;
  std::string records;
  std::string model;
  std::string out;
  std::string out_dir = "wmadv-out";
  bool no_candidates = false;
  bool timing = false;
  // oracle-builtin
  std::string weights;
  int http = -1;
  std::string bind = "127.0.0.1";
};

constexpr const char* kDwtStrengthHelp = "DWT defaults R = 0.04, G = 0.03, B = 0.08";
constexpr const char* kDctStrengthHelp = "DCT defaults R = 0.04, G = 0.01, B = 0.08";

// ---------------------------------------------------------------------------
// Flag groups. Each subcommand registers exactly the knobs it reads, and
// manifest_knobs() below lists the same names for the run manifest.

void add_oracle(CLI::App* app, RunConfig& c, bool pooled) {
  app->add_option("--oracle", c.oracle,
                  fmt::format("oracle endpoint: builtin | builtin:<weights> | subprocess:<cmd> | http://host:port "
                              "(default: ${})",
                              kOracleEnvVar));
  if (!pooled) return;
  app->add_option("--oracle-pool", c.oracle_pool, "oracle connections for subprocess/HTTP endpoints")
      ->capture_default_str();
  app->add_option("--oracle-retries", c.oracle_retries, "retries of a failed oracle call before the record is errored")
      ->capture_default_str();
}

void add_jobs(CLI::App* app, RunConfig& c) {
  app->add_option("--jobs", c.jobs, "worker threads (default: available cores)");
}

void add_sizes(CLI::App* app, RunConfig& c) {
  app->add_option("--host-size", c.host_size, "host resize target (square)")->capture_default_str();
  app->add_option("--wm-size", c.wm_size, "DWT watermark resize target (square, host/4); DCT uses the host size")
      ->capture_default_str();
}

void add_signs(CLI::App* app, RunConfig& c) {
  app->add_option("--signs", c.signs, "DWT channel signs: g+rb- or g-rb+")->capture_default_str();
  app->add_option("--dct-signs", c.dct_signs, "DCT channel signs g+rb- or g-rb+ (default: all channels +)");
  app->add_flag("--sequential-quantize", c.sequential_quantize,
                "quantize between single embeddings instead of accumulating in one pass");
}

void add_selection(CLI::App* app, RunConfig& c) {
  app->add_option("--dataset", c.dataset, "directory holding the host images");
  app->add_option("--manifest", c.manifest, "CSV image_id,true_class (default: <dataset>/labels.csv)");
  app->add_option("--n", c.n, "number of correctly classified hosts to select")->capture_default_str();
  app->add_option("--seed", c.seed, "host sampling seed")->capture_default_str();
}

void add_attack_common(CLI::App* app, RunConfig& c) {
  add_oracle(app, c, true);
  add_jobs(app, c);
  add_selection(app, c);
  app->add_option("--hosts", c.hosts, "host selection JSON from select-hosts (skips selection)");
  app->add_option("--watermarks", c.watermarks, "directory with one sub-directory of images per class")->required();
  app->add_option("--k", c.k, "watermarks per host")->capture_default_str();
  add_sizes(app, c);
  add_signs(app, c);
  app->add_flag("--first-watermark-only", c.first_watermark_only,
                "attack with the top-ranked watermark only (default: any of the k watermarks counts)");
  app->add_option("--feature-layer", c.feature_layer, "embed this oracle feature map of each watermark instead");
  app->add_option("--out-dir", c.out_dir, "report directory")->capture_default_str();
  app->add_flag("--no-candidates", c.no_candidates, "do not write candidate PNGs to <out-dir>/candidates");
  app->add_flag("--timing", c.timing, "print candidate generation latency");
}

// ---------------------------------------------------------------------------

std::string resolve_oracle(const RunConfig& c) {
  if (!c.oracle.empty()) return c.oracle;
  if (const char* env = std::getenv(kOracleEnvVar); env != nullptr && *env != '\0') return env;
  throw ValidationError(fmt::format("--oracle is required (or set {}); use --oracle builtin for the builtin model",
                                    kOracleEnvVar));
}

std::unique_ptr<Oracle> open_oracle(const RunConfig& c) {
  return connect(OracleEndpoint::parse(resolve_oracle(c)), c.oracle_pool);
}

void require(bool ok, std::string_view message) {
  if (!ok) throw ValidationError(std::string(message));
}

void write_or_print(const std::string& path, const std::string& text, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << text;
    return;
  }
  const auto* p = reinterpret_cast<const std::uint8_t*>(text.data());
  write_file(path, {p, text.size()});
}

std::string read_text(const fs::path& path) {
  const auto bytes = read_file(path);
  return {bytes.begin(), bytes.end()};
}

SizePolicy sizes_of(const RunConfig& c) {
  SizePolicy s{c.host_size, c.wm_size};
  s.validate();
  return s;
}

std::optional<SignConvention> dct_signs_of(const RunConfig& c) {
  if (c.dct_signs.empty()) return std::nullopt;
  return parse_signs(c.dct_signs);
}

Strengths strengths_or(const std::string& text, EmbedAlgo algo) {
  if (!text.empty()) return Strengths::parse(text);
  return algo == EmbedAlgo::Dwt ? Strengths::dwt_default() : Strengths::dct_default();
}

RoundSchedule schedule_or(const std::string& text, EmbedAlgo algo) {
  if (!text.empty()) return RoundSchedule::parse(text);
  return algo == EmbedAlgo::Dwt ? RoundSchedule::dwt_default() : RoundSchedule::dct_default();
}

json strengths_json(const Strengths& s) { return json::array({s.r, s.g, s.b}); }

// The knobs a subcommand recorded in manifest.json, keyed by flag name.
json manifest_knobs(const std::string& sub, const RunConfig& c) {
  const auto nullable = [](const std::string& s) { return s.empty() ? json(nullptr) : json(s); };
  json k{{"oracle", nullable(c.oracle)},
         {"oracle-pool", c.oracle_pool},
         {"oracle-retries", c.oracle_retries},
         {"jobs", c.jobs},
         {"dataset", nullable(c.dataset)},
         {"manifest", nullable(c.manifest)},
         {"n", c.n},
         {"seed", c.seed},
         {"hosts", nullable(c.hosts)},
         {"watermarks", nullable(c.watermarks)},
         {"k", c.k},
         {"host-size", c.host_size},
         {"wm-size", c.wm_size},
         {"signs", c.signs},
         {"dct-signs", nullable(c.dct_signs)},
         {"sequential-quantize", c.sequential_quantize},
         {"first-watermark-only", c.first_watermark_only},
         {"feature-layer", nullable(c.feature_layer)},
         {"out-dir", c.out_dir},
         {"no-candidates", c.no_candidates},
         {"timing", c.timing}};
  if (sub == "attack") {
    const auto algo = parse_algo(c.algo);
    k["algo"] = c.algo;
    k["strengths"] = strengths_json(strengths_or(c.strengths, algo));
    k["schedule"] = schedule_or(c.schedule, algo).values;
  } else if (sub == "combined") {
    k["strengths-dct"] = strengths_json(strengths_or(c.strengths_dct, EmbedAlgo::Dct));
    k["strengths-dwt"] = strengths_json(strengths_or(c.strengths_dwt, EmbedAlgo::Dwt));
    k["schedule-dct"] = schedule_or(c.schedule_dct, EmbedAlgo::Dct).values;
    k["schedule-dwt"] = schedule_or(c.schedule_dwt, EmbedAlgo::Dwt).values;
  } else if (sub == "report") {
    k = {{"records", c.records},
         {"first-watermark-only", c.first_watermark_only},
         {"model", nullable(c.model)},
         {"out-dir", c.out_dir}};
  }
  return k;
}

std::string manifest_json(const std::string& sub, const RunConfig& c, const Oracle* oracle,
                          const std::string& endpoint) {
  json m{{"tool", "wmadv"},
         {"version", kVersion},
         {"subcommand", sub},
         {"knobs", manifest_knobs(sub, c)},
         {"fixed",
          {{"wavelet_family", std::string(to_string(WaveletFamily::Haar))},
           {"dwt_levels", {{"host", 3}, {"watermark", 1}}},
           {"dct_normalization", "orthonormal"},
           {"resize_filter", "bilinear, half-pixel centres"},
           {"quantization", "clamp [0,255], round half away from zero, once per candidate"},
           {"repeat_mode", c.sequential_quantize ? "sequential-quantize" : "accumulate"},
           {"aggregation",
            std::string(to_string(c.first_watermark_only ? Aggregation::FirstWatermark : Aggregation::AnyWatermark))},
           {"dwt_signs", c.signs},
           {"dct_signs", c.dct_signs.empty() ? "all+" : c.dct_signs}}}};
  if (oracle != nullptr) {
    m["oracle"] = {{"endpoint", endpoint},
                   {"model", oracle->info().model},
                   {"labels", oracle->info().labels},
                   {"feature_layers", oracle->info().feature_layers}};
  }
  return m.dump(2) + "\n";
}

AttackOptions attack_options(const RunConfig& c, const Oracle& oracle) {
  AttackOptions o;
  o.sizes = sizes_of(c);
  o.signs = parse_signs(c.signs);
  o.dct_signs = dct_signs_of(c);
  o.sequential_quantize = c.sequential_quantize;
  if (!c.feature_layer.empty()) {
    require(oracle.has_layer(c.feature_layer),
            fmt::format("--feature-layer '{}' is not offered by the oracle (layers: {})", c.feature_layer,
                        fmt::join(oracle.info().feature_layers, ", ")));
    o.feature_layer = c.feature_layer;
  }
  if (!c.no_candidates) o.candidate_dir = fs::path(c.out_dir) / "candidates";
  require(c.jobs >= 1, "--jobs must be at least 1");
  o.jobs = c.jobs;
  require(c.oracle_retries >= 0, "--oracle-retries must be non-negative");
  o.oracle_retries = c.oracle_retries;
  return o;
}

std::vector<HostRecord> obtain_hosts(const RunConfig& c, Oracle& oracle) {
  if (!c.hosts.empty()) return hosts_from_json(read_text(c.hosts));
  require(!c.dataset.empty(), "--dataset (or --hosts) is required");
  const fs::path manifest = c.manifest.empty() ? fs::path(c.dataset) / "labels.csv" : fs::path(c.manifest);
  auto sel = select_hosts(c.dataset, manifest, oracle, c.n, c.seed);
  return std::move(sel.hosts);
}

std::vector<AttackTask> build_tasks(const RunConfig& c, Oracle& oracle) {
  require(c.k >= 1, "--k must be at least 1");
  const auto hosts = obtain_hosts(c, oracle);
  require(!hosts.empty(), "no usable host images");
  std::map<std::string, std::vector<WatermarkImage>> by_class;
  const std::size_t k = c.first_watermark_only ? 1 : c.k;
  std::vector<AttackTask> tasks;
  tasks.reserve(hosts.size());
  for (const auto& h : hosts) {
    auto it = by_class.find(h.class_second);
    if (it == by_class.end()) {
      const fs::path dir = fs::path(c.watermarks) / h.class_second;
      const auto ranking = rank_watermarks(dir, oracle, h.class_second, k, c.jobs);
      std::vector<WatermarkImage> wms;
      for (const auto& e : ranking.entries) wms.push_back({e.image_id, load_image(dir / e.image_id)});
      it = by_class.emplace(h.class_second, std::move(wms)).first;
    }
    const fs::path host_path = c.dataset.empty() ? fs::path(h.image_id) : fs::path(c.dataset) / h.image_id;
    tasks.push_back({h, load_image(host_path), it->second});
  }
  return tasks;
}

void print_timing(std::ostream& out, std::span<const AttackRecord> records) {
  for (const auto algo : {EmbedAlgo::Dct, EmbedAlgo::Dwt}) {
    double sum = 0.0, lo = 0.0, hi = 0.0;
    std::size_t n = 0;
    for (const auto& r : records) {
      if (r.algo != algo) continue;
      lo = n == 0 ? r.seconds : std::min(lo, r.seconds);
      hi = n == 0 ? r.seconds : std::max(hi, r.seconds);
      sum += r.seconds;
      ++n;
    }
    if (n == 0) continue;
    out << fmt::format("timing {}: {} candidates, mean {:.4f} s, min {:.4f} s, max {:.4f} s\n", to_string(algo), n,
                       sum / static_cast<double>(n), lo, hi);
  }
}

void print_summary(std::ostream& out, const AttackSummary& s) {
  out << fmt::format("{}: {}/{} hosts succeeded (total success rate {:.4f}, {} errored records)\n", s.algo,
                     s.successful_hosts, s.host_count, s.total_success_rate, s.errored_records);
}

Aggregation aggregation_of(const RunConfig& c) {
  return c.first_watermark_only ? Aggregation::FirstWatermark : Aggregation::AnyWatermark;
}

// ---------------------------------------------------------------------------
// Subcommands.

int cmd_embed(const RunConfig& c, std::ostream& out) {
  const auto algo = parse_algo(c.algo);
  EmbedParams p;
  p.strength = strengths_or(c.strengths, algo);
  p.times = c.t;
  p.signs = algo == EmbedAlgo::Dwt ? parse_signs(c.signs) : dct_signs_of(c).value_or(SignConvention::GPlusRBMinus);
  p.dct_signs = dct_signs_of(c);
  p.validate();
  const auto sizes = sizes_of(c);
  const int wm_size = algo == EmbedAlgo::Dwt ? sizes.wm_size_dwt : sizes.wm_size_dct();

  const auto t0 = std::chrono::steady_clock::now();
  const auto host = resize(load_image(c.host), sizes.host_size, sizes.host_size);
  const auto wm = resize(load_image(c.wm), wm_size, wm_size);
  const auto candidate = clamp_quantize(c.sequential_quantize ? embed_sequential(algo, host, wm, p)
                                                              : embed(algo, host, wm, p));
  const auto png = encode_png(candidate);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  const fs::path target = !c.out.empty() ? fs::path(c.out)
                                         : fs::path(candidate_name(fs::path(c.host).filename().string(),
                                                                   fs::path(c.wm).filename().string(), algo,
                                                                   p.strength, p.times));
  write_file(target, png);
  const auto norms = perturbation_norms(clamp_quantize(host), candidate);
  out << fmt::format("{}\nl2 {}\nlinf {}\nper_pixel_mean {}\npsnr {}\n", target.string(), norms.l2, norms.linf,
                     norms.per_pixel_mean, norms.psnr);
  if (c.timing) out << fmt::format("timing {}: {:.4f} s\n", to_string(algo), seconds);
  return kExitOk;
}

int cmd_select_hosts(const RunConfig& c, std::ostream& out) {
  require(!c.dataset.empty(), "--dataset is required");
  const auto oracle = open_oracle(c);
  const fs::path manifest = c.manifest.empty() ? fs::path(c.dataset) / "labels.csv" : fs::path(c.manifest);
  const auto sel = select_hosts(c.dataset, manifest, *oracle, c.n, c.seed);
  write_or_print(c.out, hosts_to_json(sel.hosts), out);
  return kExitOk;
}

int cmd_rank_watermarks(const RunConfig& c, std::ostream& out) {
  require(!c.class_dir.empty(), "--class-dir is required");
  const auto oracle = open_oracle(c);
  const std::string target = c.target_class.empty() ? fs::path(c.class_dir).filename().string() : c.target_class;
  const auto ranking = rank_watermarks(c.class_dir, *oracle, target, c.k, c.jobs);
  write_or_print(c.out, ranking_to_json(ranking), out);
  return kExitOk;
}

int cmd_attack(const RunConfig& c, std::ostream& out) {
  const auto algo = parse_algo(c.algo);
  const auto strengths = strengths_or(c.strengths, algo);
  const auto schedule = schedule_or(c.schedule, algo);
  const std::string endpoint = resolve_oracle(c);
  const auto oracle = open_oracle(c);
  const auto options = attack_options(c, *oracle);
  const auto tasks = build_tasks(c, *oracle);

  const auto records = run_attacks(tasks, algo, strengths, schedule, *oracle, options);
  const auto summary = total_success(records, aggregation_of(c));
  const auto& model = oracle->info().model;
  emit_report(c.out_dir, records, std::span(&summary, 1), model, summary_to_json(summary, model),
              manifest_json("attack", c, oracle.get(), endpoint));
  print_summary(out, summary);
  if (c.timing) print_timing(out, records);
  out << fmt::format("report written to {}\n", c.out_dir);
  return kExitOk;
}

int cmd_combined(const RunConfig& c, std::ostream& out) {
  const auto dct_s = strengths_or(c.strengths_dct, EmbedAlgo::Dct);
  const auto dwt_s = strengths_or(c.strengths_dwt, EmbedAlgo::Dwt);
  const auto dct_t = schedule_or(c.schedule_dct, EmbedAlgo::Dct);
  const auto dwt_t = schedule_or(c.schedule_dwt, EmbedAlgo::Dwt);
  const std::string endpoint = resolve_oracle(c);
  const auto oracle = open_oracle(c);
  const auto options = attack_options(c, *oracle);
  const auto tasks = build_tasks(c, *oracle);

  const auto result = combined_pipeline(tasks, dct_s, dwt_s, dct_t, dwt_t, *oracle, options, aggregation_of(c));
  const auto& model = oracle->info().model;
  const std::array summaries{result.dct, result.dwt};
  emit_report(c.out_dir, result.records, summaries, model, combined_to_json(result, model),
              manifest_json("combined", c, oracle.get(), endpoint));
  print_summary(out, result.dct);
  print_summary(out, result.dwt);
  out << fmt::format("combined: {}/{} hosts succeeded (total success rate {:.4f})\n", result.successful_hosts,
                     result.host_count, result.total_success_rate);
  if (c.timing) print_timing(out, result.records);
  out << fmt::format("report written to {}\n", c.out_dir);
  return kExitOk;
}

int cmd_features(const RunConfig& c, std::ostream& out) {
  require(!c.image.empty(), "--image is required");
  require(!c.layer.empty(), "--layer is required");
  require(!c.out.empty(), "--out is required");
  const auto oracle = open_oracle(c);
  require(oracle->has_layer(c.layer), fmt::format("--layer '{}' is not offered by the oracle (layers: {})", c.layer,
                                                  fmt::join(oracle->info().feature_layers, ", ")));
  const auto map = oracle->features(load_image(c.image), c.layer);
  save_png(map.image, c.out);
  out << fmt::format("{} {}x{} -> {}\n", map.layer, map.image.width(), map.image.height(), c.out);
  return kExitOk;
}

int cmd_report(const RunConfig& c, std::ostream& out) {
  std::ifstream in(c.records, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot open {}", c.records));
  const auto records = read_records(in);
  std::vector<AttackSummary> summaries;
  for (const auto algo : {EmbedAlgo::Dct, EmbedAlgo::Dwt}) {
    std::vector<AttackRecord> subset;
    for (const auto& r : records) {
      if (r.algo == algo) subset.push_back(r);
    }
    if (!subset.empty()) summaries.push_back(total_success(subset, aggregation_of(c)));
  }
  json j = json::array();
  for (const auto& s : summaries) j.push_back(json::parse(summary_to_json(s, c.model)));
  emit_report(c.out_dir, records, summaries, c.model, j.dump(2) + "\n", manifest_json("report", c, nullptr, ""));
  for (const auto& s : summaries) print_summary(out, s);
  out << fmt::format("report written to {}\n", c.out_dir);
  return kExitOk;
}

int cmd_oracle_builtin(const RunConfig& c, std::ostream& out) {
  BuiltinOracle oracle(c.weights.empty() ? LinearModel::shipped() : LinearModel::load(c.weights));
  if (c.http < 0) {
    serve_stream(oracle, std::cin, std::cout);
    return kExitOk;
  }
  HttpOracleServer server(oracle);
  out << fmt::format("serving {} on http://{}:{}{}\n", oracle.info().model, c.bind, c.http, kHttpOraclePath)
      << std::flush;
  server.run(c.bind, c.http);
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct Registry {
  CLI::App app{"wmadv: adversarial examples for image classifiers from DWT/DCT watermark embedding"};
  RunConfig config;
  std::map<std::string, CLI::App*> subs;
};

void build(Registry& reg) {
  auto& app = reg.app;
  auto& c = reg.config;
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kVersion));

  auto* embed_cmd = app.add_subcommand("embed", "embed one watermark into one host and write the candidate PNG");
  embed_cmd->add_option("--algo", c.algo, "dwt or dct")->required();
  embed_cmd->add_option("--host", c.host, "host image (PNG/JPEG)")->required();
  embed_cmd->add_option("--wm", c.wm, "watermark image (PNG/JPEG)")->required();
  embed_cmd->add_option("--t", c.t, "Embed_t, number of embeddings")->capture_default_str();
  embed_cmd->add_option("--strengths", c.strengths,
                        fmt::format("Embed_s as r,g,b ({}; {})", kDwtStrengthHelp, kDctStrengthHelp));
  add_sizes(embed_cmd, c);
  add_signs(embed_cmd, c);
  embed_cmd->add_option("--out", c.out, "candidate path (default: canonical candidate name in the working directory)");
  embed_cmd->add_flag("--timing", c.timing, "print candidate generation latency");

  auto* sel = app.add_subcommand("select-hosts", "pick correctly classified hosts in seeded random order");
  add_oracle(sel, c, true);
  add_selection(sel, c);
  sel->add_option("--out", c.out, "output JSON (default: stdout)");

  auto* rank = app.add_subcommand("rank-watermarks", "rank a class directory by oracle confidence in that class");
  add_oracle(rank, c, true);
  add_jobs(rank, c);
  rank->add_option("--class-dir", c.class_dir, "directory of candidate watermark images")->required();
  rank->add_option("--target-class", c.target_class, "class to rank by (default: the directory name)");
  rank->add_option("--k", c.k, "watermarks to keep")->capture_default_str();
  rank->add_option("--out", c.out, "output JSON (default: stdout)");

  auto* attack = app.add_subcommand("attack", "run one embedding method over the selected hosts");
  attack->add_option("--algo", c.algo, "dwt or dct")->capture_default_str();
  attack->add_option("--strengths", c.strengths,
                     fmt::format("Embed_s as r,g,b ({}; {})", kDwtStrengthHelp, kDctStrengthHelp));
  attack->add_option("--schedule", c.schedule,
                     "Embed_t per round, start:stop:step or a comma list (DWT default 5:50:5, i.e. 5..50; "
                     "DCT default 1:10:1, i.e. 1..10)");
  add_attack_common(attack, c);

  auto* comb = app.add_subcommand("combined", "DCT first, then DWT on the hosts DCT did not fool");
  comb->add_option("--strengths-dct", c.strengths_dct, fmt::format("DCT Embed_s as r,g,b ({})", kDctStrengthHelp));
  comb->add_option("--strengths-dwt", c.strengths_dwt, fmt::format("DWT Embed_s as r,g,b ({})", kDwtStrengthHelp));
  comb->add_option("--schedule-dct", c.schedule_dct, "DCT rounds (default 1:10:1, i.e. 1..10)");
  comb->add_option("--schedule-dwt", c.schedule_dwt, "DWT rounds (default 5:50:5, i.e. 5..50)");
  add_attack_common(comb, c);

  auto* feat = app.add_subcommand("features", "write an oracle feature map as PNG");
  add_oracle(feat, c, false);
  feat->add_option("--image", c.image, "input image")->required();
  feat->add_option("--layer", c.layer, "feature layer name")->required();
  feat->add_option("--out", c.out, "output PNG")->required();

  auto* rep = app.add_subcommand("report", "recompute summary, plot data and polylines from records.csv");
  rep->add_option("--records", c.records, "records.csv from attack or combined")->required();
  rep->add_flag("--first-watermark-only", c.first_watermark_only, "aggregate over the top-ranked watermark only");
  rep->add_option("--model", c.model, "model name for plotdata.csv");
  rep->add_option("--out-dir", c.out_dir, "report directory")->capture_default_str();

  auto* ob = app.add_subcommand("oracle-builtin", "serve the builtin model over the JSON protocol (stdio or HTTP)");
  ob->add_option("--weights", c.weights, "weights file (default: the shipped model)");
  ob->add_option("--http", c.http, "serve HTTP on this port instead of stdio");
  ob->add_option("--bind", c.bind, "HTTP bind address")->capture_default_str();

  for (auto* s : app.get_subcommands({})) reg.subs[s->get_name()] = s;
}

void route_logs_to_stderr() {
  static const bool once = [] {
    auto logger = spdlog::stderr_color_mt("wmadv");
    logger->set_pattern("wmadv: %l: %v");
    spdlog::set_default_logger(logger);
    return true;
  }();
  (void)once;
}

}  // namespace

std::vector<std::string> registered_flags(const std::string& subcommand) {
  Registry reg;
  build(reg);
  const auto it = reg.subs.find(subcommand);
  if (it == reg.subs.end()) throw ValidationError(fmt::format("unknown subcommand '{}'", subcommand));
  std::vector<std::string> names;
  for (const auto* opt : it->second->get_options()) {
    for (const auto& name : opt->get_lnames()) {
      if (name != "help") names.push_back(name);
    }
  }
  return names;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  route_logs_to_stderr();
  Registry reg;
  build(reg);
  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    reg.app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    // help()/exit() forward to the selected subcommand.
    const int code = reg.app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitValidation;
  }

  const auto& c = reg.config;
  try {
    const auto& sub = reg.app.get_subcommands().front()->get_name();
    if (sub == "embed") return cmd_embed(c, out);
    if (sub == "select-hosts") return cmd_select_hosts(c, out);
    if (sub == "rank-watermarks") return cmd_rank_watermarks(c, out);
    if (sub == "attack") return cmd_attack(c, out);
    if (sub == "combined") return cmd_combined(c, out);
    if (sub == "features") return cmd_features(c, out);
    if (sub == "report") return cmd_report(c, out);
    if (sub == "oracle-builtin") return cmd_oracle_builtin(c, out);
    err << "wmadv: unknown subcommand " << sub << '\n';
    return kExitValidation;
  } catch (const ValidationError& e) {
    err << "wmadv: " << e.what() << '\n';
    return kExitValidation;
  } catch (const ConfigError& e) {
    err << "wmadv: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    err << "wmadv: " << e.what() << '\n';
    return kExitRuntime;
  }
}

}  // namespace wmadv::cli
