#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "wmadv/error.hpp"
#include "wmadv/report.hpp"

using namespace wmadv;
namespace fs = std::filesystem;

namespace {

AttackRecord sample(std::string host, std::string wm, int t, double p_cool, EmbedAlgo algo = EmbedAlgo::Dwt) {
  AttackRecord r;
  r.host_id = std::move(host);
  r.wm_id = std::move(wm);
  r.algo = algo;
  r.strengths = algo == EmbedAlgo::Dwt ? Strengths::dwt_default() : Strengths::dct_default();
  r.embed_t = t;
  r.true_class = "warm";
  r.probs = {{"warm", "cool"}, {1.0 - p_cool, p_cool}};
  r.success = p_cool > 0.5;
  r.l2 = 1234.5678901234567;
  r.linf = 17;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

TEST_SUITE("report") {
  TEST_CASE("records round trip through CSV") {
    std::mt19937_64 rng(101);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<AttackRecord> records;
    for (const char* h : {"x/a.png", "b,c.png"}) {
      for (const char* w : {"w1.png", "w\"2.png"}) {
        for (int t = 5; t <= 15; t += 5) records.push_back(sample(h, w, t, u(rng)));
      }
    }
    records.push_back(sample("x/a.png", "w1.png", 1, 0.2, EmbedAlgo::Dct));
    AttackRecord err = sample("d.png", "w1.png", 5, 0.0);
    err.probs = {};
    err.success = false;
    err.error = "oracle 'cmd' closed its output";
    records.push_back(err);

    std::stringstream io;
    write_records(io, records);
    const auto back = read_records(io);
    REQUIRE(back.size() == records.size());
    for (std::size_t i = 0; i < records.size(); ++i) {
      CAPTURE(i);
      const auto& a = records[i];
      const auto& b = back[i];
      CHECK(b.host_id == a.host_id);
      CHECK(b.wm_id == a.wm_id);
      CHECK(b.algo == a.algo);
      CHECK(b.strengths == a.strengths);
      CHECK(b.embed_t == a.embed_t);
      CHECK(b.true_class == a.true_class);
      CHECK(b.success == a.success);
      CHECK(b.l2 == a.l2);
      CHECK(b.linf == a.linf);
      CHECK(b.error == a.error);
      CHECK(b.errored() == a.errored());
      if (!a.errored()) {
        CHECK(b.p_true() == a.p_true());
        CHECK(b.top_class() == a.top_class());
        CHECK(b.p_top() == a.p_top());
      }
    }
    CHECK(back[0].host_index == 0);
    CHECK(back[6].host_index == 1);
    CHECK(back[3].wm_rank == 1);
    CHECK(back[12].wm_rank == 0);  // first DCT record of its host

    // Re-serializing the parsed rows reproduces the file byte for byte.
    std::ostringstream again;
    write_records(again, back);
    CHECK(again.str() == io.str());

    // Summaries from parsed records match the originals.
    const auto s1 = total_success(std::span(records).first(12));
    const auto s2 = total_success(std::span(back).first(12));
    CHECK(s1.total_success_rate == s2.total_success_rate);
    CHECK(s1.per_round.size() == s2.per_round.size());
  }

  TEST_CASE("malformed records are rejected with a line number") {
    const auto error = [](const std::string& text) -> std::string {
      std::istringstream in(text);
      try {
        read_records(in);
      } catch (const ValidationError& e) {
        return e.what();
      }
      return {};
    };
    const std::string h = std::string(kRecordsHeader) + "\n";
    CHECK(error("").find("empty") != std::string::npos);
    CHECK(error("host_id,wm_id\n").find("header mismatch") != std::string::npos);
    CHECK(error(h + "a,b,dwt\n").find("line 2: 3 columns") != std::string::npos);
    CHECK(error(h + "a,b,dwt,x,0,0,5,warm,warm,0.9,0.9,0,1,1,\n").find("column s_r") != std::string::npos);
    CHECK(error(h + "a,b,dwt,0,0,0,5,warm,warm,0.9,0.9,2,1,1,\n").find("success must be 0 or 1") !=
          std::string::npos);
    CHECK(error(h + "a,b,fft,0,0,0,5,warm,warm,0.9,0.9,0,1,1,\n").find("fft") != std::string::npos);
  }

  TEST_CASE("plot data and polylines") {
    const std::vector<AttackRecord> records{sample("a.png", "w.png", 5, 0.25), sample("a.png", "w.png", 10, 0.75),
                                            sample("b.png", "w.png", 5, 0.5), sample("b.png", "w.png", 10, 0.125)};
    const auto s = total_success(records);
    std::ostringstream plot;
    write_plotdata(plot, std::span(&s, 1), "m1");
    CHECK(plot.str() == "algo,model,embed_t,success_rate\ndwt,m1,5,0\ndwt,m1,10,0.5\n");
    std::ostringstream poly;
    write_polyline(poly, records);
    CHECK(poly.str() ==
          "host_id,wm_id,algo,embed_t,p_true\na.png,w.png,dwt,5,0.75\na.png,w.png,dwt,10,0.25\n"
          "b.png,w.png,dwt,5,0.5\nb.png,w.png,dwt,10,0.875\n");
  }

  TEST_CASE("summary JSON and report files") {
    const std::vector<AttackRecord> records{sample("a.png", "w.png", 5, 0.75), sample("b.png", "w.png", 5, 0.25)};
    const auto s = total_success(records);
    const auto j = nlohmann::json::parse(summary_to_json(s, "m1"));
    CHECK(j["model"] == "m1");
    CHECK(j["total_success_rate"] == 0.5);

    CombinedResult c;
    c.dct = s;
    c.dwt = s;
    c.dwt_hosts = {"b.png"};
    c.host_count = 2;
    c.successful_hosts = 1;
    c.total_success_rate = 0.5;
    const auto cj = nlohmann::json::parse(combined_to_json(c, "m1"));
    CHECK(cj["dwt_hosts"] == nlohmann::json::array({"b.png"}));
    CHECK(cj["combined"]["total_success_rate"] == 0.5);
    CHECK(cj["stages"].contains("dct"));

    std::random_device rd;
    const fs::path dir = fs::temp_directory_path() / ("wmadv-report-" + std::to_string(rd())) / "nested";
    const auto files = emit_report(dir, records, std::span(&s, 1), "m1", "{\"k\":1}\n", "{\"m\":2}\n");
    CHECK(slurp(files.summary) == "{\"k\":1}\n");
    CHECK(slurp(files.manifest) == "{\"m\":2}\n");
    std::ifstream rin(files.records);
    CHECK(read_records(rin).size() == 2);
    CHECK(slurp(files.plotdata).starts_with("algo,model,embed_t,success_rate\n"));
    CHECK(slurp(files.polyline).starts_with("host_id,wm_id,algo,embed_t,p_true\n"));
    fs::remove_all(dir.parent_path());

    const fs::path blocker = fs::temp_directory_path() / ("wmadv-blocker-" + std::to_string(rd()));
    std::ofstream(blocker) << "x";
    CHECK_THROWS_AS(emit_report(blocker / "out", records, std::span(&s, 1), "m1", "", ""), IoError);
    fs::remove(blocker);
  }
}
