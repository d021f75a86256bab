#include <atomic>
#include <filesystem>
#include <random>

#include "doctest.h"
#include "reference.hpp"
#include "support/fakes.hpp"
#include "wmadv/error.hpp"
#include "wmadv/harness.hpp"

using namespace wmadv;

namespace {

AttackRecord rec(std::string host, std::size_t rank, int t, bool success, bool errored = false) {
  AttackRecord r;
  r.host_id = std::move(host);
  r.wm_id = "wm" + std::to_string(rank);
  r.wm_rank = rank;
  r.embed_t = t;
  r.true_class = "a";
  r.success = success;
  if (errored) {
    r.error = "timeout";
  } else {
    r.probs = {{"a", "b"}, success ? std::vector<double>{0.25, 0.75} : std::vector<double>{0.75, 0.25}};
  }
  return r;
}

// P(a) falls with the mean green level: green above `threshold` flips to b.
fake::FnOracle green_oracle(double threshold) {
  return fake::FnOracle({"a", "b"}, [threshold](const ImageTensor& img) {
    const double g = img[1].mean();
    const double pa = g > threshold ? 0.25 : 0.75;
    return ClassProbs{{"a", "b"}, {pa, 1.0 - pa}};
  });
}

AttackTask task(std::string id, double level, std::size_t wms, std::mt19937_64& rng) {
  AttackTask t;
  t.host = {std::move(id), "a", {{"a", "b"}, {0.75, 0.25}}, "b"};
  t.image = ImageTensor::filled(32, 32, level, level, level);
  for (std::size_t i = 0; i < wms; ++i) {
    t.watermarks.push_back({"w" + std::to_string(i) + ".png", clamp_quantize(ref::random_image(rng, 8, 8, 100, 255))});
  }
  return t;
}

AttackOptions small() {
  AttackOptions o;
  o.sizes.host_size = 32;
  o.sizes.wm_size_dwt = 8;
  return o;
}

}  // namespace

TEST_SUITE("harness") {
  TEST_CASE("round schedules") {
    CHECK(RoundSchedule::dwt_default().values == RoundSchedule::parse("5:50:5").values);
    CHECK(RoundSchedule::dct_default().values == RoundSchedule::parse("1:10:1").values);
    CHECK(RoundSchedule::parse("1,2,4").values == std::vector<int>{1, 2, 4});
    CHECK(RoundSchedule::parse("3:9:4").values == std::vector<int>{3, 7});
    CHECK(RoundSchedule::parse("1,2,4").to_string() == "1,2,4");
    for (const char* bad : {"", "1,,2", "2,1", "0:5:1", "1:5:0", "5:1:1", "1:5", "a:b:c", "1,1", "1.5"}) {
      CAPTURE(bad);
      CHECK_THROWS_AS(RoundSchedule::parse(bad), ValidationError);
    }
    CHECK(to_string(Aggregation::FirstWatermark) == "first-watermark");
  }

  TEST_CASE("success rule for two and for several classes") {
    CHECK(success_rule({{"a", "b"}, {0.49, 0.51}}, "a"));
    CHECK(!success_rule({{"a", "b"}, {0.5, 0.5}}, "a"));
    CHECK(!success_rule({{"a", "b"}, {0.51, 0.49}}, "a"));
    // Three classes: argmax with label tie break.
    CHECK(success_rule({{"a", "b", "c"}, {0.3, 0.4, 0.3}}, "a"));
    CHECK(!success_rule({{"a", "b", "c"}, {0.4, 0.3, 0.3}}, "a"));
    CHECK(!success_rule({{"a", "b", "c"}, {0.4, 0.4, 0.2}}, "a"));
    CHECK(success_rule({{"a", "b", "c"}, {0.2, 0.4, 0.4}}, "c"));
    CHECK(!success_rule({{"a", "b", "c"}, {0.45, 0.1, 0.45}}, "a"));
    CHECK_THROWS_AS(success_rule({{"a", "b"}, {0.5, 0.5}}, "z"), ValidationError);
  }

  TEST_CASE("total success counts a host once and rounds separately") {
    const std::vector<AttackRecord> records{
        rec("h1", 0, 1, false), rec("h1", 0, 2, false), rec("h1", 1, 1, false), rec("h1", 1, 2, true),
        rec("h2", 0, 1, true),  rec("h2", 0, 2, true),  rec("h2", 1, 1, false), rec("h2", 1, 2, true),
        rec("h3", 0, 1, false), rec("h3", 0, 2, false), rec("h3", 1, 1, false), rec("h3", 1, 2, false),
    };
    const auto any = total_success(records);
    CHECK(any.host_count == 3);
    CHECK(any.successful_hosts == 2);
    CHECK(any.total_success_rate == doctest::Approx(2.0 / 3.0));
    REQUIRE(any.per_round.size() == 2);
    CHECK(any.per_round[0].embed_t == 1);
    CHECK(any.per_round[0].successes == 1);
    CHECK(any.per_round[0].rate == doctest::Approx(1.0 / 3.0));
    CHECK(any.per_round[1].successes == 2);
    CHECK(any.per_round[1].hosts == 3);

    const auto first = total_success(records, Aggregation::FirstWatermark);
    CHECK(first.successful_hosts == 1);
    CHECK(first.total_success_rate == doctest::Approx(1.0 / 3.0));
    CHECK(first.per_round[1].successes == 1);
  }

  TEST_CASE("errored records leave the denominator") {
    const std::vector<AttackRecord> records{
        rec("h1", 0, 5, true), rec("h2", 0, 5, false), rec("h3", 0, 5, false, true), rec("h3", 0, 10, false, true),
        rec("h2", 0, 10, false, true),
    };
    const auto s = total_success(records);
    CHECK(s.host_count == 2);
    CHECK(s.successful_hosts == 1);
    CHECK(s.total_success_rate == 0.5);
    CHECK(s.errored_records == 3);
    REQUIRE(s.per_round.size() == 2);
    CHECK(s.per_round[1].successes == 0);
    CHECK(s.per_round[1].hosts == 2);

    const auto none = total_success(std::vector<AttackRecord>{});
    CHECK(none.host_count == 0);
    CHECK(none.total_success_rate == 0.0);
    CHECK(none.per_round.empty());
  }

  TEST_CASE("candidate file names") {
    CHECK(candidate_name("dir/host.png", "wm.jpg", EmbedAlgo::Dwt, Strengths::dwt_default(), 5) ==
          "dir_host__wm__dwt__0.04-0.03-0.08__t05.png");
    CHECK(candidate_name("h.png", "w.png", EmbedAlgo::Dct, {0.1, 0, 0.25}, 10) == "h__w__dct__0.1-0-0.25__t10.png");
  }

  TEST_CASE("run_attacks is ordered and identical for any job count") {
    std::mt19937_64 rng(81);
    std::vector<AttackTask> tasks{task("h0", 100, 3, rng), task("h1", 150, 2, rng), task("h2", 60, 3, rng)};
    auto oracle = green_oracle(140.0);
    auto opts = small();
    const auto schedule = RoundSchedule::parse("1,2,3,4");
    opts.jobs = 1;
    const auto serial = run_attacks(tasks, EmbedAlgo::Dct, Strengths::dct_default(), schedule, oracle, opts);
    opts.jobs = 6;
    const auto parallel = run_attacks(tasks, EmbedAlgo::Dct, Strengths::dct_default(), schedule, oracle, opts);
    REQUIRE(serial.size() == (3 + 2 + 3) * 4);
    REQUIRE(parallel.size() == serial.size());
    std::size_t i = 0;
    for (std::size_t h = 0; h < tasks.size(); ++h) {
      for (std::size_t w = 0; w < tasks[h].watermarks.size(); ++w) {
        for (const int t : schedule.values) {
          CAPTURE(i);
          const auto& a = serial[i];
          const auto& b = parallel[i];
          CHECK(a.host_id == tasks[h].host.image_id);
          CHECK(a.wm_id == tasks[h].watermarks[w].id);
          CHECK(a.embed_t == t);
          CHECK(a.host_index == h);
          CHECK(a.wm_rank == w);
          CHECK(b.host_id == a.host_id);
          CHECK(b.wm_id == a.wm_id);
          CHECK(b.probs == a.probs);
          CHECK(b.l2 == a.l2);
          CHECK(b.linf == a.linf);
          CHECK(a.success == success_rule(a.probs, "a"));
          ++i;
        }
      }
    }
    // h1 starts above the threshold, so every one of its records succeeds.
    for (const auto& r : serial) {
      if (r.host_id == "h1") CHECK(r.success);
    }
  }

  TEST_CASE("records carry the submitted image's norms and class") {
    std::mt19937_64 rng(82);
    const auto t = task("h", 90, 1, rng);
    std::vector<ImageTensor> seen;
    std::mutex m;
    fake::FnOracle oracle({"a", "b"}, [&](const ImageTensor& img) {
      std::lock_guard lock(m);
      seen.push_back(img);
      return ClassProbs{{"a", "b"}, {0.75, 0.25}};
    });
    auto params = EmbedParams{};
    params.strength = Strengths::dwt_default();
    const auto out = run_attack(t, EmbedAlgo::Dwt, params.strength, RoundSchedule::parse("5,10"), oracle, small());
    REQUIRE(out.size() == 2);
    REQUIRE(seen.size() == 2);
    for (std::size_t i = 0; i < 2; ++i) {
      params.times = out[i].embed_t;
      const auto expected = clamp_quantize(ref::dwt_closed_form(t.image, t.watermarks[0].image, params));
      CHECK(seen[i] == expected);
      const auto n = ref::norms(t.image, expected);
      CHECK(out[i].l2 == doctest::Approx(n.l2).epsilon(1e-12));
      CHECK(out[i].linf == n.linf);
      CHECK(out[i].seconds > 0.0);
    }
  }

  TEST_CASE("transport failures are retried, then recorded") {
    std::mt19937_64 rng(83);
    const auto t = task("h", 90, 1, rng);
    std::atomic<int> calls{0};
    fake::FnOracle flaky({"a", "b"}, [&](const ImageTensor&) {
      if (++calls % 2 == 1) throw OracleError("connection reset");
      return ClassProbs{{"a", "b"}, {0.75, 0.25}};
    });
    auto opts = small();
    opts.oracle_retries = 1;
    const auto ok = run_attack(t, EmbedAlgo::Dct, Strengths::dct_default(), RoundSchedule::parse("1,2"), flaky, opts);
    REQUIRE(ok.size() == 2);
    CHECK(!ok[0].errored());
    CHECK(!ok[1].errored());
    CHECK(calls == 4);

    fake::FnOracle dead({"a", "b"}, [&](const ImageTensor&) -> ClassProbs { throw OracleError("down"); });
    opts.oracle_retries = 2;
    const auto bad = run_attack(t, EmbedAlgo::Dct, Strengths::dct_default(), RoundSchedule::parse("1"), dead, opts);
    REQUIRE(bad.size() == 1);
    CHECK(bad[0].errored());
    CHECK(bad[0].error == "down");
    CHECK(dead.calls() == 3);
    CHECK(bad[0].probs.labels.empty());

    // Protocol violations are not retried.
    fake::FnOracle liar({"a", "b"}, [](const ImageTensor&) { return ClassProbs{{"a", "b"}, {0.7, 0.4}}; });
    const auto lied = run_attack(t, EmbedAlgo::Dct, Strengths::dct_default(), RoundSchedule::parse("1"), liar, opts);
    CHECK(lied[0].errored());
    CHECK(liar.calls() == 1);
  }

  TEST_CASE("invalid attack parameters fail before any oracle call") {
    std::mt19937_64 rng(84);
    const std::vector<AttackTask> tasks{task("h", 90, 1, rng)};
    auto oracle = green_oracle(300);
    CHECK_THROWS_AS(run_attacks(tasks, EmbedAlgo::Dwt, {-1, 0, 0}, RoundSchedule::dwt_default(), oracle, small()),
                    ValidationError);
    CHECK_THROWS_AS(run_attacks(tasks, EmbedAlgo::Dwt, Strengths::dwt_default(), RoundSchedule{}, oracle, small()),
                    ValidationError);
    auto opts = small();
    opts.sizes.wm_size_dwt = 16;
    CHECK_THROWS_AS(run_attacks(tasks, EmbedAlgo::Dwt, Strengths::dwt_default(), RoundSchedule::dwt_default(), oracle,
                                opts),
                    ValidationError);
    CHECK(oracle.calls() == 0);
  }

  TEST_CASE("combined pipeline only sends DCT failures to DWT") {
    std::mt19937_64 rng(85);
    // h_bright flips under DCT at once; h_dark needs DWT.
    std::vector<AttackTask> tasks{task("h_dark", 40, 2, rng), task("h_bright", 139, 2, rng)};
    auto inner = green_oracle(140.0);
    fake::CountingOracle counting(inner);
    const auto dct_only = run_attacks(tasks, EmbedAlgo::Dct, Strengths::dct_default(), RoundSchedule::parse("1,2"),
                                      inner, small());
    bool bright_dct = false, dark_dct = false;
    for (const auto& r : dct_only) (r.host_id == "h_bright" ? bright_dct : dark_dct) |= r.success;
    REQUIRE(bright_dct);
    REQUIRE(!dark_dct);

    const auto res = combined_pipeline(tasks, Strengths::dct_default(), Strengths::dwt_default(),
                                       RoundSchedule::parse("1,2"), RoundSchedule::parse("5,10,15"), counting, small());
    CHECK(res.dwt_hosts == std::vector<std::string>{"h_dark"});
    std::size_t dct_records = 0, dwt_records = 0;
    for (const auto& r : res.records) {
      if (r.algo == EmbedAlgo::Dct) ++dct_records;
      if (r.algo == EmbedAlgo::Dwt) {
        ++dwt_records;
        CHECK(r.host_id == "h_dark");
        CHECK(r.host_index == 0);
      }
    }
    CHECK(dct_records == 2 * 2 * 2);
    CHECK(dwt_records == 1 * 2 * 3);
    CHECK(counting.calls() == dct_records + dwt_records);
    bool dark_dwt = false;
    for (const auto& r : res.records) {
      if (r.algo == EmbedAlgo::Dwt) dark_dwt |= r.success;
    }
    CHECK(res.host_count == 2);
    CHECK(res.successful_hosts == (dark_dwt ? 2u : 1u));
    CHECK(res.total_success_rate == doctest::Approx(res.successful_hosts / 2.0));
    CHECK(res.dct.successful_hosts == 1);
    CHECK(res.dwt.host_count == 1);
  }

  TEST_CASE("feature watermarks are resized oracle feature maps") {
    BuiltinOracle oracle(LinearModel::shipped());
    std::mt19937_64 rng(86);
    const auto wm = clamp_quantize(ref::random_image(rng, 40, 40));
    const auto f = feature_watermark(oracle, wm, "edge", 16);
    CHECK(f.width() == 16);
    CHECK(f.height() == 16);
    CHECK(f == resize(oracle.features(wm, "edge").image, 16, 16));
    CHECK_THROWS_AS(feature_watermark(oracle, wm, "conv5", 16), CapabilityError);
  }

  TEST_CASE("sequential quantization option changes the submitted images") {
    std::mt19937_64 rng(87);
    const auto t = task("h", 90, 1, rng);
    std::vector<ImageTensor> seen;
    fake::FnOracle oracle({"a", "b"}, [&](const ImageTensor& img) {
      seen.push_back(img);
      return ClassProbs{{"a", "b"}, {0.75, 0.25}};
    });
    auto opts = small();
    opts.sequential_quantize = true;
    run_attack(t, EmbedAlgo::Dwt, Strengths::dwt_default(), RoundSchedule::parse("2,3"), oracle, opts);
    EmbedParams p;
    p.strength = Strengths::dwt_default();
    p.times = 3;
    REQUIRE(seen.size() == 2);
    CHECK(seen[1] == embed_sequential(EmbedAlgo::Dwt, t.image, resize(t.watermarks[0].image, 8, 8), p));
  }
}
