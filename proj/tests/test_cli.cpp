#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cli.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("trimodal_cli_" + std::to_string(::getpid()) + "_" +
            std::to_string(std::rand()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

int run(const std::vector<std::string>& args) {
  std::vector<const char*> argv = {"trimodal"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return trimodal::cli::run_cli(static_cast<int>(argv.size()), argv.data());
}

fs::path write_tiny_config(const TempDir& tmp) {
  const fs::path cfg = tmp.path / "cfg.json";
  std::ofstream(cfg) << R"({
    "seed": 7,
    "dataset": {"n_subjects": 24, "image_side": 16},
    "train": {
      "image": {"epochs": 2, "batch_size": 8},
      "cognitive": {"epochs": 2},
      "biomarker": {"epochs": 2}
    },
    "paths": {"workdir": ")" << (tmp.path / "wk").string() << R"("}
  })";
  return cfg;
}

}  // namespace

TEST_CASE("help exits zero") { CHECK(run({"--help"}) == 0); }

TEST_CASE("unknown subcommand exits two") { CHECK(run({"trian"}) == 2); }

TEST_CASE("unknown strategy exits two") {
  TempDir tmp;
  const fs::path cfg = write_tiny_config(tmp);
  CHECK(run({"fuse", "--config", cfg.string(), "--strategy", "median"}) == 2);
}

TEST_CASE("missing inputs exit one") {
  TempDir tmp;
  CHECK(run({"train", "image", "--workdir",
             (tmp.path / "nowhere").string()}) == 1);
}

TEST_CASE("pipeline produces a complete, well-formed report") {
  TempDir tmp;
  const fs::path cfg = write_tiny_config(tmp);
  CHECK(run({"pipeline", "--config", cfg.string()}) == 0);

  const fs::path report = tmp.path / "wk" / "report.json";
  REQUIRE(fs::exists(report));
  json doc;
  std::ifstream(report) >> doc;
  CHECK(doc["dataset"]["seed"] == 7);
  REQUIRE(doc["rows"].size() == 4);
  for (const auto& row : doc["rows"]) {
    for (const char* k : {"accuracy", "precision", "recall", "f1", "auc_roc"}) {
      const double v = row[k].get<double>();
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
  }
  CHECK(doc["rows"][3]["model"].get<std::string>().find("Aggregated") == 0);
  CHECK(fs::exists(tmp.path / "wk" / "report.txt"));
  CHECK(fs::exists(tmp.path / "wk" / "roc_aggregated.csv"));
  CHECK(fs::exists(tmp.path / "wk" / "fusion_weighted.csv"));
  for (const char* m : {"image", "cognitive", "biomarker"}) {
    CHECK(fs::exists(tmp.path / "wk" / "checkpoints" / (std::string(m) + ".tmf1")));
    CHECK(fs::exists(tmp.path / "wk" / ("history_" + std::string(m) + ".csv")));
  }
}

TEST_CASE("flags override config values") {
  TempDir tmp;
  const fs::path cfg = write_tiny_config(tmp);
  CHECK(run({"generate", "--config", cfg.string(), "--seed", "11",
             "--n-subjects", "16"}) == 0);
  std::ifstream manifest(tmp.path / "wk" / "manifest.csv");
  std::string line;
  std::size_t rows = 0;
  std::getline(manifest, line);  // header
  while (std::getline(manifest, line))
    if (!line.empty()) ++rows;
  CHECK(rows == 16);
}

TEST_CASE("fuse survives a removed checkpoint with degraded confidence") {
  TempDir tmp;
  const fs::path cfg = write_tiny_config(tmp);
  REQUIRE(run({"pipeline", "--config", cfg.string()}) == 0);
  fs::remove(tmp.path / "wk" / "checkpoints" / "image.tmf1");

  CHECK(run({"fuse", "--config", cfg.string()}) == 0);
  std::ifstream csv(tmp.path / "wk" / "fusion_weighted.csv");
  std::string line;
  std::getline(csv, line);  // header
  std::size_t rows = 0;
  while (std::getline(csv, line)) {
    if (line.empty()) continue;
    ++rows;
    CHECK(line.find("MISSING") != std::string::npos);
    const double conf = std::stod(line.substr(line.rfind(',') + 1));
    CHECK(conf < 1.0);
  }
  CHECK(rows > 0);

  CHECK(run({"report", "--config", cfg.string()}) == 0);
  json doc;
  std::ifstream(tmp.path / "wk" / "report.json") >> doc;
  CHECK(doc["rows"].size() == 3);  // two modalities + aggregated
  CHECK(doc["fusion"]["modalities"].size() == 2);
}

TEST_CASE("drop-modality flag matches a missing checkpoint") {
  TempDir tmp;
  const fs::path cfg = write_tiny_config(tmp);
  REQUIRE(run({"pipeline", "--config", cfg.string()}) == 0);
  CHECK(run({"fuse", "--config", cfg.string(), "--drop-modality",
             "biomarker"}) == 0);
  std::ifstream csv(tmp.path / "wk" / "fusion_weighted.csv");
  std::string line;
  std::getline(csv, line);
  while (std::getline(csv, line)) {
    if (line.empty()) continue;
    CHECK(line.find("MISSING") != std::string::npos);
  }
}

TEST_CASE("eval prints a one-row table and exits zero") {
  TempDir tmp;
  const fs::path cfg = write_tiny_config(tmp);
  REQUIRE(run({"pipeline", "--config", cfg.string()}) == 0);
  CHECK(run({"eval", "cognitive", "--config", cfg.string(), "--split",
             "val"}) == 0);
  CHECK(run({"eval", "cognitive", "--config", cfg.string(), "--split",
             "nope"}) == 2);
}

TEST_CASE("alternate fusion strategies run end to end") {
  TempDir tmp;
  const fs::path cfg = write_tiny_config(tmp);
  REQUIRE(run({"pipeline", "--config", cfg.string()}) == 0);
  for (const char* strategy : {"majority", "bayes", "stacked"}) {
    CHECK(run({"fuse", "--config", cfg.string(), "--strategy", strategy}) == 0);
    CHECK(fs::exists(tmp.path / "wk" /
                     ("fusion_" + std::string(strategy) + ".csv")));
  }
}
