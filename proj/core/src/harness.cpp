#include "wmadv/harness.hpp"

#include <algorithm>
#include <chrono>
#include <charconv>
#include <map>
#include <optional>
#include <set>

#include <fmt/format.h>
#include <fmt/ranges.h>
#include <spdlog/spdlog.h>

#include "wmadv/error.hpp"
#include "wmadv/parallel.hpp"

namespace wmadv {

RoundSchedule RoundSchedule::dwt_default() { return {{5, 10, 15, 20, 25, 30, 35, 40, 45, 50}}; }
RoundSchedule RoundSchedule::dct_default() { return {{1, 2, 3, 4, 5, 6, 7, 8, 9, 10}}; }

namespace {

int parse_int(std::string_view tok, std::string_view whole) {
  int v = 0;
  const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (tok.empty() || ec != std::errc{} || ptr != tok.data() + tok.size()) {
    throw ValidationError(fmt::format("schedule '{}': '{}' is not an integer", whole, tok));
  }
  return v;
}

std::vector<std::string_view> tokens(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  for (;;) {
    const std::size_t end = s.find(sep, pos);
    out.push_back(s.substr(pos, end == std::string_view::npos ? std::string_view::npos : end - pos));
    if (end == std::string_view::npos) return out;
    pos = end + 1;
  }
}

std::string id_stem(std::string_view id) {
  std::string stem = std::filesystem::path(std::string(id)).replace_extension().string();
  std::replace(stem.begin(), stem.end(), '/', '_');
  std::replace(stem.begin(), stem.end(), '\\', '_');
  return stem;
}

}  // namespace

RoundSchedule RoundSchedule::parse(std::string_view text) {
  RoundSchedule s;
  if (text.find(':') != std::string_view::npos) {
    const auto parts = tokens(text, ':');
    if (parts.size() != 3) throw ValidationError(fmt::format("schedule '{}' must be start:stop:step", text));
    const int start = parse_int(parts[0], text);
    const int stop = parse_int(parts[1], text);
    const int step = parse_int(parts[2], text);
    if (step < 1) throw ValidationError(fmt::format("schedule '{}': step must be >= 1", text));
    for (int v = start; v <= stop; v += step) s.values.push_back(v);
  } else {
    for (const auto tok : tokens(text, ',')) s.values.push_back(parse_int(tok, text));
  }
  s.validate();
  return s;
}

void RoundSchedule::validate() const {
  if (values.empty()) throw ValidationError("round schedule is empty");
  if (values.front() < 1) throw ValidationError("round schedule values must be >= 1");
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] <= values[i - 1]) throw ValidationError("round schedule must be strictly increasing");
  }
}

std::string RoundSchedule::to_string() const { return fmt::format("{}", fmt::join(values, ",")); }

std::string_view to_string(Aggregation a) {
  return a == Aggregation::AnyWatermark ? "any-watermark" : "first-watermark";
}

std::string AttackRecord::top_class() const { return probs.labels.empty() ? std::string() : probs.top_label(); }

double AttackRecord::p_true() const { return probs.prob(true_class); }

double AttackRecord::p_top() const { return probs.probs[probs.argmax()]; }

bool success_rule(const ClassProbs& probs, std::string_view true_class) {
  const auto idx = probs.index_of(true_class);
  if (!idx) throw ValidationError(fmt::format("true class '{}' not in the oracle vocabulary", true_class));
  if (probs.labels.size() == 2) return probs.probs[*idx] < 0.5;
  return probs.argmax() != *idx;
}

AttackSummary total_success(std::span<const AttackRecord> records, Aggregation aggregation) {
  AttackSummary s;
  s.aggregation = aggregation;
  std::set<int> rounds;
  std::set<std::string> usable;
  std::set<std::string> succeeded;
  std::map<int, std::set<std::string>> round_successes;
  std::set<std::string> algos;
  for (const auto& r : records) {
    algos.insert(std::string(to_string(r.algo)));
    if (aggregation == Aggregation::FirstWatermark && r.wm_rank != 0) continue;
    rounds.insert(r.embed_t);
    if (r.errored()) {
      ++s.errored_records;
      continue;
    }
    usable.insert(r.host_id);
    if (r.success) {
      succeeded.insert(r.host_id);
      round_successes[r.embed_t].insert(r.host_id);
    }
  }
  s.algo = algos.size() == 1 ? *algos.begin() : (algos.empty() ? "" : "mixed");
  s.host_count = usable.size();
  s.successful_hosts = succeeded.size();
  s.total_success_rate = s.host_count ? static_cast<double>(s.successful_hosts) / s.host_count : 0.0;
  for (int t : rounds) {
    RoundRate rr;
    rr.embed_t = t;
    rr.hosts = s.host_count;
    rr.successes = round_successes[t].size();
    rr.rate = rr.hosts ? static_cast<double>(rr.successes) / rr.hosts : 0.0;
    s.per_round.push_back(rr);
  }
  return s;
}

std::string candidate_name(std::string_view host_id, std::string_view wm_id, EmbedAlgo algo, const Strengths& s,
                           int embed_t) {
  return fmt::format("{}__{}__{}__{}-{}-{}__t{:02d}.png", id_stem(host_id), id_stem(wm_id), to_string(algo), s.r, s.g,
                     s.b, embed_t);
}

ImageTensor feature_watermark(Oracle& oracle, const ImageTensor& wm, std::string_view layer, int size) {
  return resize(oracle.features(wm, layer).image, size, size);
}

namespace {

ClassProbs classify_with_retry(Oracle& oracle, const ImageTensor& img, int retries, std::string& error) {
  for (int attempt = 0;; ++attempt) {
    try {
      return oracle.classify(img);
    } catch (const OracleError& e) {
      if (attempt >= retries) {
        error = e.what();
        return {};
      }
      spdlog::debug("oracle call failed (attempt {}): {}", attempt + 1, e.what());
    } catch (const ProtocolError& e) {
      error = e.what();
      return {};
    }
  }
}

struct PairJob {
  std::size_t task;
  std::size_t rank;
};

std::vector<AttackRecord> run_pair(const AttackTask& task, const ImageTensor& host_img, std::size_t task_index,
                                   std::size_t rank, EmbedAlgo algo, const Strengths& strengths,
                                   const RoundSchedule& schedule, Oracle& oracle, const AttackOptions& options) {
  using clock = std::chrono::steady_clock;
  const WatermarkImage& wm = task.watermarks[rank];
  const int wm_size = algo == EmbedAlgo::Dwt ? options.sizes.wm_size_dwt : options.sizes.wm_size_dct();
  const ImageTensor wm_img = options.feature_layer ? feature_watermark(oracle, wm.image, *options.feature_layer, wm_size)
                                                   : resize(wm.image, wm_size, wm_size);

  EmbedParams params;
  params.strength = strengths;
  params.signs = options.signs;
  params.dct_signs = options.dct_signs;

  // The forward transforms are shared by every round; their cost is charged
  // to the first candidate.
  const auto prep_start = clock::now();
  std::optional<DctPair> dct_pair;
  if (algo == EmbedAlgo::Dct && !options.sequential_quantize) dct_pair.emplace(host_img, wm_img);

  std::vector<AttackRecord> out;
  ImageTensor sequential = clamp_quantize(host_img);
  int sequential_t = 0;
  for (const int t : schedule.values) {
    const auto start = out.empty() ? prep_start : clock::now();
    ImageTensor candidate;
    if (options.sequential_quantize) {
      params.times = 1;
      for (; sequential_t < t; ++sequential_t) sequential = clamp_quantize(embed(algo, sequential, wm_img, params));
      candidate = sequential;
    } else {
      params.times = t;
      candidate = dct_pair ? dct_pair->embed(params) : embed(algo, host_img, wm_img, params);
    }
    const auto png = encode_png(candidate);
    const double seconds = std::chrono::duration<double>(clock::now() - start).count();

    if (options.candidate_dir) {
      write_file(*options.candidate_dir / candidate_name(task.host.image_id, wm.id, algo, strengths, t), png);
    }
    const ImageTensor submitted = decode(png);

    AttackRecord rec;
    rec.host_id = task.host.image_id;
    rec.wm_id = wm.id;
    rec.algo = algo;
    rec.strengths = strengths;
    rec.embed_t = t;
    rec.true_class = task.host.true_class;
    rec.host_index = task_index;
    rec.wm_rank = rank;
    rec.seconds = seconds;
    const PerturbationNorms norms = perturbation_norms(host_img, submitted);
    rec.l2 = norms.l2;
    rec.linf = norms.linf;
    rec.probs = classify_with_retry(oracle, submitted, options.oracle_retries, rec.error);
    if (!rec.errored()) {
      try {
        rec.success = success_rule(rec.probs, rec.true_class);
      } catch (const ValidationError& e) {
        rec.error = e.what();
        rec.probs = {};
      }
    }
    out.push_back(std::move(rec));
  }
  return out;
}

}  // namespace

std::vector<AttackRecord> run_attacks(std::span<const AttackTask> tasks, EmbedAlgo algo, const Strengths& strengths,
                                      const RoundSchedule& schedule, Oracle& oracle, const AttackOptions& options) {
  schedule.validate();
  options.sizes.validate();
  EmbedParams check;
  check.strength = strengths;
  check.validate();

  std::vector<ImageTensor> hosts(tasks.size());
  parallel_for(tasks.size(), options.jobs, [&](std::size_t i) {
    hosts[i] = resize(tasks[i].image, options.sizes.host_size, options.sizes.host_size);
  });

  std::vector<PairJob> jobs;
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    for (std::size_t r = 0; r < tasks[i].watermarks.size(); ++r) jobs.push_back({i, r});
  }
  if (options.candidate_dir) std::filesystem::create_directories(*options.candidate_dir);

  std::vector<std::vector<AttackRecord>> results(jobs.size());
  parallel_for(jobs.size(), options.jobs, [&](std::size_t j) {
    const PairJob& job = jobs[j];
    try {
      results[j] = run_pair(tasks[job.task], hosts[job.task], job.task, job.rank, algo, strengths, schedule, oracle,
                            options);
    } catch (const DimensionError& e) {
      spdlog::error("aborting host {} / watermark {}: {}", tasks[job.task].host.image_id,
                    tasks[job.task].watermarks[job.rank].id, e.what());
    }
  });

  std::vector<AttackRecord> out;
  for (auto& r : results) {
    std::move(r.begin(), r.end(), std::back_inserter(out));
  }
  return out;
}

std::vector<AttackRecord> run_attack(const AttackTask& task, EmbedAlgo algo, const Strengths& strengths,
                                     const RoundSchedule& schedule, Oracle& oracle, const AttackOptions& options) {
  return run_attacks(std::span<const AttackTask>(&task, 1), algo, strengths, schedule, oracle, options);
}

CombinedResult combined_pipeline(std::span<const AttackTask> tasks, const Strengths& dct_strengths,
                                 const Strengths& dwt_strengths, const RoundSchedule& dct_schedule,
                                 const RoundSchedule& dwt_schedule, Oracle& oracle, const AttackOptions& options,
                                 Aggregation aggregation) {
  CombinedResult res;
  auto dct_records = run_attacks(tasks, EmbedAlgo::Dct, dct_strengths, dct_schedule, oracle, options);
  res.dct = total_success(dct_records, aggregation);

  std::set<std::string> dct_winners;
  std::set<std::string> usable;
  for (const auto& r : dct_records) {
    if (aggregation == Aggregation::FirstWatermark && r.wm_rank != 0) continue;
    if (r.errored()) continue;
    usable.insert(r.host_id);
    if (r.success) dct_winners.insert(r.host_id);
  }

  std::vector<AttackTask> fallback;
  std::vector<std::size_t> fallback_index;
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    if (!dct_winners.contains(tasks[i].host.image_id)) {
      fallback.push_back(tasks[i]);
      fallback_index.push_back(i);
      res.dwt_hosts.push_back(tasks[i].host.image_id);
    }
  }
  auto dwt_records = run_attacks(fallback, EmbedAlgo::Dwt, dwt_strengths, dwt_schedule, oracle, options);
  for (auto& r : dwt_records) r.host_index = fallback_index[r.host_index];
  res.dwt = total_success(dwt_records, aggregation);

  std::set<std::string> winners = dct_winners;
  for (const auto& r : dwt_records) {
    if (aggregation == Aggregation::FirstWatermark && r.wm_rank != 0) continue;
    if (r.errored()) continue;
    usable.insert(r.host_id);
    if (r.success) winners.insert(r.host_id);
  }
  res.host_count = usable.size();
  res.successful_hosts = winners.size();
  res.total_success_rate = res.host_count ? static_cast<double>(res.successful_hosts) / res.host_count : 0.0;

  res.records = std::move(dct_records);
  std::move(dwt_records.begin(), dwt_records.end(), std::back_inserter(res.records));
  return res;
}

}  // namespace wmadv
