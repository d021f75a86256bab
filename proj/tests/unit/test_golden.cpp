#include <filesystem>
#include <random>

#include "doctest.h"
#include "support/golden.hpp"

namespace fs = std::filesystem;

TEST_SUITE("golden") {
  TEST_CASE("CLI reproduces the golden records at 1 and 8 jobs") {
    std::random_device rd;
    const fs::path root = fs::temp_directory_path() / ("wmadv-golden-" + std::to_string(rd()));
    for (const auto& mode : golden::kModes) {
      const auto want = golden::read_text(golden::golden_file(mode));
      for (const int jobs : {1, 8}) {
        CAPTURE(mode);
        CAPTURE(jobs);
        CHECK(golden::run_cli(mode, jobs, root / (mode + std::to_string(jobs))) == want);
      }
    }
    fs::remove_all(root);
  }

  TEST_CASE("golden rows match an independent closed-form trace") {
    for (const auto& mode : golden::kModes) {
      CAPTURE(mode);
      const auto rep = golden::trace(mode);
      CHECK(rep.rows > 0);
      CHECK(rep.max_p_diff <= 1e-9);
      CHECK(rep.max_tie_ratio <= 1.0);
      for (const auto& p : rep.problems) FAIL_CHECK(p);
    }
  }
}
