#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include "doctest.h"

#ifdef PERMSEQ_CLI_PATH

namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("permseq_cli_" + std::to_string(std::random_device{}()));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
};

int cli(const std::string& args) {
  const std::string cmd = std::string(PERMSEQ_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return status == 0 ? 0 : 1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::size_t line_count(const fs::path& p) {
  const std::string text = slurp(p);
  return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n'));
}

}  // namespace

TEST_CASE("gen-data record counts") {
  TempDir tmp;
  const auto out = [&](const char* name) { return (tmp.path / name).string(); };
  REQUIRE(cli("gen-data --experiment tower_unique --out " + out("u")) == 0);
  CHECK(line_count(tmp.path / "u" / "dataset.jsonl") == 720);
  REQUIRE(cli("gen-data --experiment tower_subsets --out " + out("s")) == 0);
  CHECK(line_count(tmp.path / "s" / "dataset.jsonl") == 1950);
  REQUIRE(cli("gen-data --experiment soma --out " + out("soma")) == 0);
  CHECK(line_count(tmp.path / "soma" / "dataset.jsonl") == 240);
  // 4 views x 3 x 3 x RGB, nested.
  CHECK(slurp(tmp.path / "soma" / "dataset.jsonl").find("\"raster\":[[[[") != std::string::npos);

  CHECK(cli("gen-data --experiment tower_unique --out " + out("u")) != 0);
  CHECK(cli("gen-data --experiment tower_unique --force --out " + out("u")) == 0);
  CHECK(cli("gen-data --experiment nonsense --out " + out("x")) != 0);

  REQUIRE(cli("gen-data --experiment tower_unique --seed 4 --out " + out("u2")) == 0);
  CHECK(slurp(tmp.path / "u2" / "dataset.jsonl") == slurp(tmp.path / "u" / "dataset.jsonl"));
}

TEST_CASE("train, eval and report") {
  TempDir tmp;
  const std::string data = (tmp.path / "data").string();
  REQUIRE(cli("gen-data --experiment tower_fixed --seed 1 --out " + data) == 0);

  auto pipeline = [&](const std::string& run) {
    for (const char* model : {"bc", "tcn", "sinkhorn"}) {
      REQUIRE(cli("train --data " + data + " --model " + model + " --seed 3 --epochs 2 --run-dir " + run) == 0);
    }
    REQUIRE(cli("eval --data " + data + " --seeds 3 --run-dir " + run) == 0);
  };
  const fs::path a = tmp.path / "run_a";
  const fs::path b = tmp.path / "run_b";
  pipeline(a.string());
  pipeline(b.string());

  const fs::path metrics = fs::path("metrics") / "tower_fixed_n200_seed3.csv";
  REQUIRE(fs::exists(a / metrics));
  CHECK(line_count(a / metrics) == 6);  // header + five model kinds
  CHECK(slurp(a / metrics) == slurp(b / metrics));
  CHECK(slurp(a / "checkpoints" / "tower_fixed_n200_sinkhorn_seed3.ckpt") ==
        slurp(b / "checkpoints" / "tower_fixed_n200_sinkhorn_seed3.ckpt"));

  REQUIRE(cli("report --run-dir " + a.string()) == 0);
  CHECK(fs::exists(a / "report" / "summary.csv"));
  CHECK(fs::exists(a / "report" / "curve.csv"));

  // Missing checkpoints.
  CHECK(cli("eval --data " + data + " --seeds 9 --run-dir " + a.string()) != 0);
  CHECK(cli("plan --run-dir " + a.string() + " --splits 1") != 0);
  // Nothing to report.
  fs::create_directories(tmp.path / "empty");
  CHECK(cli("report --run-dir " + (tmp.path / "empty").string()) != 0);
  CHECK(cli("train --data " + data + " --model lstm --run-dir " + a.string()) != 0);
}

#endif  // PERMSEQ_CLI_PATH
