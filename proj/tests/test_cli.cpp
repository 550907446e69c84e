#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli.hpp"
#include "wip/hash.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result run(std::vector<std::string> args) {
  std::ostringstream out, err;
  args.insert(args.begin(), "-q");
  const int code = wip::cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / "wip_test_cli" / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::size_t csv_count(const fs::path& dir) {
  std::size_t n = 0;
  for (const auto& e : fs::directory_iterator(dir)) n += e.path().extension() == ".csv";
  return n;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

json read_json(const fs::path& p) { return json::parse(slurp(p)); }

void write(const fs::path& p, const std::string& s) { std::ofstream(p) << s; }

// Shared synthetic data: 3 subjects, default script.
const fs::path& data_dir() {
  static const fs::path dir = [] {
    const fs::path d = scratch("data");
    REQUIRE(run({"synth", "--subjects", "3", "--seed", "4", "--out", d.string()}).code == 0);
    return d;
  }();
  return dir;
}

std::vector<std::string> train_args(const fs::path& out, const std::string& epochs) {
  return {"train", "--data", data_dir().string(), "--target", "S2", "--out", out.string(),
          "--epochs", epochs, "--model-size", "compact", "--seed", "7"};
}

}  // namespace

TEST_CASE("option precedence: flag over env over config over default") {
  const fs::path dir = scratch("precedence");
  const fs::path cfg = dir / "cfg.json";
  write(cfg, R"({"subjects": 5, "synth": {"subjects": 3, "seed": 9}})");

  auto out = dir / "default";
  REQUIRE(run({"synth", "--out", out.string()}).code == 0);
  CHECK(csv_count(out) == 14);

  out = dir / "config";
  REQUIRE(run({"--config", cfg.string(), "synth", "--out", out.string()}).code == 0);
  CHECK(csv_count(out) == 3);  // nested key beats top level
  CHECK(read_json(out / "manifest.json").at("seed") == 9);

  ::setenv("WIP_SUBJECTS", "4", 1);
  out = dir / "env";
  REQUIRE(run({"--config", cfg.string(), "synth", "--out", out.string()}).code == 0);
  CHECK(csv_count(out) == 4);

  out = dir / "flag";
  REQUIRE(run({"--config", cfg.string(), "synth", "--subjects", "2", "--out", out.string()}).code == 0);
  CHECK(csv_count(out) == 2);
  ::unsetenv("WIP_SUBJECTS");

  ::setenv("WIP_CONFIG", cfg.string().c_str(), 1);
  out = dir / "envconfig";
  REQUIRE(run({"synth", "--out", out.string()}).code == 0);
  CHECK(csv_count(out) == 3);
  ::unsetenv("WIP_CONFIG");
}

TEST_CASE("synth: deterministic, rejects a single subject") {
  const fs::path dir = scratch("synth");
  REQUIRE(run({"synth", "--subjects", "2", "--seed", "3", "--out", (dir / "a").string()}).code == 0);
  REQUIRE(run({"synth", "--subjects", "2", "--seed", "3", "--out", (dir / "b").string()}).code == 0);
  CHECK(slurp(dir / "a" / "S1.csv") == slurp(dir / "b" / "S1.csv"));
  CHECK(slurp(dir / "a" / "S2.csv") == slurp(dir / "b" / "S2.csv"));

  const auto one = run({"synth", "--subjects", "1", "--out", (dir / "c").string()});
  CHECK(one.code == 2);
  CHECK(one.err.find("leave-one-subject-out") != std::string::npos);
}

TEST_CASE("usage errors exit with 2") {
  CHECK(run({"bogus"}).code == 2);
  CHECK(run({"synth", "--subjects", "many"}).code == 2);
  CHECK(run({"train", "--target", "S1"}).code == 2);  // --data and --out missing
  const fs::path dir = scratch("usage");
  CHECK(run({"train", "--data", data_dir().string(), "--target", "S9", "--out",
             (dir / "m.ckpt").string(), "--epochs", "0"})
            .code == 2);
}

TEST_CASE("manifest hashes match the artifacts") {
  const auto m = read_json(data_dir() / "manifest.json");
  CHECK(m.at("command") == "synth");
  CHECK(m.at("config").at("synth").at("subjects") == 3);
  CHECK(m.at("outputs").size() == 4);  // S1..S3 and the script
  for (const auto& o : m.at("outputs")) {
    fs::path p = o.at("path").get<std::string>();
    if (p.is_relative()) p = data_dir() / p;
    CHECK(wip::sha256_file(p) == o.at("sha256").get<std::string>());
  }
  CHECK(m.at("wall_clock_seconds").get<double>() >= 0.0);
  CHECK_FALSE(m.at("started_at").get<std::string>().empty());
}

TEST_CASE("train: identical seeds give byte-identical loss histories") {
  const fs::path dir = scratch("train");
  REQUIRE(run(train_args(dir / "a.ckpt", "1")).code == 0);
  REQUIRE(run(train_args(dir / "b.ckpt", "1")).code == 0);
  const auto a = slurp(dir / "a.loss.csv");
  CHECK(a.rfind("epoch,step,class_loss,disc_loss\n", 0) == 0);
  CHECK(a == slurp(dir / "b.loss.csv"));
  const auto m = read_json(dir / "a.manifest.json");
  CHECK(m.at("command") == "train");
  CHECK(m.at("seed") == 7);
}

TEST_CASE("train: zero epochs writes an untrained checkpoint and a header-only history") {
  const fs::path dir = scratch("train0");
  REQUIRE(run(train_args(dir / "z.ckpt", "0")).code == 0);
  CHECK(fs::exists(dir / "z.ckpt"));
  CHECK(slurp(dir / "z.loss.csv") == "epoch,step,class_loss,disc_loss\n");
}

TEST_CASE("eval then plot; malformed reports fail") {
  const fs::path dir = scratch("eval");
  REQUIRE(run(train_args(dir / "m.ckpt", "1")).code == 0);
  const auto e = run({"eval", "--ckpt", (dir / "m.ckpt").string(), "--data", data_dir().string(),
                      "--latency", "5", "--out", (dir / "report.json").string()});
  REQUIRE(e.code == 0);
  const auto rep = read_json(dir / "report.json");
  CHECK(rep.at("kind") == "metrics");
  CHECK(rep.contains("confusion"));
  CHECK(rep.at("latency_ms").at("total_ms").get<double>() >= 180.0);

  REQUIRE(run({"plot", "--report", (dir / "report.json").string(), "--out",
               (dir / "cm.svg").string()})
              .code == 0);
  CHECK(slurp(dir / "cm.svg").rfind("<svg", 0) == 0);

  write(dir / "bad.json", R"({"kind": "metrics", "confusion": {"labels": ["a"]}})");
  CHECK(run({"plot", "--report", (dir / "bad.json").string(), "--out", (dir / "x.svg").string()})
            .code == 1);
  write(dir / "junk.json", "not json");
  CHECK(run({"plot", "--report", (dir / "junk.json").string(), "--out", (dir / "y.svg").string()})
            .code != 0);
  CHECK_FALSE(fs::exists(dir / "x.svg"));
}

TEST_CASE("build-dataset archive feeds train") {
  const fs::path dir = scratch("archive");
  REQUIRE(run({"build-dataset", "--data", data_dir().string(), "--out", (dir / "ds").string()})
              .code == 0);
  CHECK(fs::exists(dir / "ds" / "manifest.json"));
  auto args = train_args(dir / "m.ckpt", "0");
  args[2] = (dir / "ds").string();
  CHECK(run(args).code == 0);
}
