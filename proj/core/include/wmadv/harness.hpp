#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "wmadv/embedder.hpp"
#include "wmadv/imaging.hpp"
#include "wmadv/oracle.hpp"
#include "wmadv/selection.hpp"

namespace wmadv {

// Embed_t values for successive rounds; strictly increasing, non-empty.
struct RoundSchedule {
  std::vector<int> values;

  static RoundSchedule dwt_default();  // 5, 10, ..., 50
  static RoundSchedule dct_default();  // 1, 2, ..., 10
  // "start:stop:step" (inclusive) or a comma list "1,2,4".
  static RoundSchedule parse(std::string_view text);
  void validate() const;
  std::string to_string() const;
};

// How per-round and total rates reduce over a host's watermarks.
enum class Aggregation { AnyWatermark, FirstWatermark };
std::string_view to_string(Aggregation a);

struct AttackRecord {
  std::string host_id;
  std::string wm_id;
  EmbedAlgo algo = EmbedAlgo::Dwt;
  Strengths strengths;
  int embed_t = 0;
  std::string true_class;
  ClassProbs probs;  // empty when errored
  bool success = false;
  double l2 = 0.0;
  double linf = 0.0;
  std::string error;  // non-empty when the oracle call failed

  // Not serialized.
  std::size_t host_index = 0;
  std::size_t wm_rank = 0;
  double seconds = 0.0;  // embed + PNG encode latency

  bool errored() const { return !error.empty(); }
  std::string top_class() const;
  double p_true() const;
  double p_top() const;
};

// Two classes: success iff P(true) < 0.5. Three or more: success iff the
// (lexicographically tie-broken) argmax is not the true class.
bool success_rule(const ClassProbs& probs, std::string_view true_class);

struct RoundRate {
  int embed_t = 0;
  std::size_t successes = 0;
  std::size_t hosts = 0;
  double rate = 0.0;
};

struct AttackSummary {
  std::string algo;
  Aggregation aggregation = Aggregation::AnyWatermark;
  std::vector<RoundRate> per_round;
  std::size_t host_count = 0;  // hosts with at least one non-errored record
  std::size_t successful_hosts = 0;
  double total_success_rate = 0.0;
  std::size_t errored_records = 0;
};

// A host counts as a success if any of its records succeeded; the per-round
// rate at t counts hosts with a success at exactly t. Errored records are
// ignored; hosts with no usable record leave the denominator.
AttackSummary total_success(std::span<const AttackRecord> records, Aggregation aggregation = Aggregation::AnyWatermark);

struct WatermarkImage {
  std::string id;
  ImageTensor image;
};

struct AttackTask {
  HostRecord host;
  ImageTensor image;
  std::vector<WatermarkImage> watermarks;  // ranking order
};

struct AttackOptions {
  SizePolicy sizes;
  SignConvention signs = SignConvention::GPlusRBMinus;
  std::optional<SignConvention> dct_signs;
  bool sequential_quantize = false;
  // Embed oracle feature maps of the watermarks instead of the watermarks.
  std::optional<std::string> feature_layer;
  std::optional<std::filesystem::path> candidate_dir;
  std::size_t jobs = 1;
  int oracle_retries = 2;
};

// `<host>__<wm>__<algo>__sR-sG-sB__t<NN>.png`
std::string candidate_name(std::string_view host_id, std::string_view wm_id, EmbedAlgo algo, const Strengths& s,
                           int embed_t);

// Resized oracle feature map, usable as a drop-in watermark.
ImageTensor feature_watermark(Oracle& oracle, const ImageTensor& wm, std::string_view layer, int size);

std::vector<AttackRecord> run_attack(const AttackTask& task, EmbedAlgo algo, const Strengths& strengths,
                                     const RoundSchedule& schedule, Oracle& oracle, const AttackOptions& options);

// Every (host, watermark) pair on the worker pool; output in canonical order
// (task, watermark rank, round) regardless of `options.jobs`.
std::vector<AttackRecord> run_attacks(std::span<const AttackTask> tasks, EmbedAlgo algo, const Strengths& strengths,
                                      const RoundSchedule& schedule, Oracle& oracle, const AttackOptions& options);

struct CombinedResult {
  std::vector<AttackRecord> records;  // DCT stage, then DWT stage
  AttackSummary dct;
  AttackSummary dwt;  // over the hosts that reached the DWT stage
  std::vector<std::string> dwt_hosts;
  std::size_t host_count = 0;
  std::size_t successful_hosts = 0;
  double total_success_rate = 0.0;
};

// DCT schedule first; only hosts without any DCT success go on to DWT.
CombinedResult combined_pipeline(std::span<const AttackTask> tasks, const Strengths& dct_strengths,
                                 const Strengths& dwt_strengths, const RoundSchedule& dct_schedule,
                                 const RoundSchedule& dwt_schedule, Oracle& oracle, const AttackOptions& options,
                                 Aggregation aggregation = Aggregation::AnyWatermark);

}  // namespace wmadv
