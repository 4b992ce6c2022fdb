#include "embnli/cli.hpp"
#include "embnli/embedding.hpp"
#include "embnli/negation.hpp"

#include <doctest.h>

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

using namespace embnli;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("embnli_cli_" + std::to_string(std::random_device{}()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  [[nodiscard]] std::string operator/(const std::string& name) const { return (path / name).string(); }
};

void write(const std::string& path, const std::string& text) { std::ofstream(path) << text; }

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<nlohmann::json> trials_without_timing(const std::string& path) {
  std::vector<nlohmann::json> out;
  std::istringstream in(slurp(path));
  for (std::string line; std::getline(in, line);) {
    auto j = nlohmann::json::parse(line);
    j.erase("wall_seconds");
    out.push_back(j);
  }
  return out;
}

struct Run {
  int code;
  std::string out, err;
};

Run cli(std::vector<std::string> args) {
  args.insert(args.begin(), "embnli");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

}  // namespace

TEST_CASE("retrofit subcommand") {
  TempDir dir;
  write(dir / "emb.txt", "cat 1 0\ndog 0 1\nfish 1 1\n");
  write(dir / "lex.txt", "cat dog\n");
  const auto r = cli({"retrofit", "--embeddings", dir / "emb.txt", "--lexicon", dir / "lex.txt", "--out", dir / "r.txt"});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const auto out = load_embeddings(fs::path(dir / "r.txt"));
  CHECK(out.size() == 3);
  CHECK(fs::exists(dir / "r.txt.manifest.json"));
  const auto m = RunManifest::from_json(slurp(dir / "r.txt.manifest.json"));
  CHECK(m.subcommand == "retrofit");
  CHECK(m.input_sha256.size() == 2);
  CHECK(m.config.count("alpha") + m.config.count("--alpha") >= 1);
}

TEST_CASE("gen-negation subcommand") {
  TempDir dir;
  write(dir / "base.tsv", "cat\tanimal\thyponym\ndog\tcat\tdisjoint\nsofa\tcouch\tequal\n");
  const auto r = cli({"gen-negation", "--base", dir / "base.tsv", "--out-dir", dir / "neg", "--test-depths", "3,4",
                      "--downsample", "50"});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  CHECK(!read_negation_tsv(fs::path(dir / "neg/train.tsv")).empty());
  CHECK(fs::exists(dir / "neg/test_l3.tsv"));
  CHECK(fs::exists(dir / "neg/test_l4.tsv"));
  const auto stats = nlohmann::json::parse(slurp(dir / "neg/stats.json"));
  CHECK(stats.is_object());
}

TEST_CASE("search subcommand is reproducible") {
  TempDir dir;
  write(dir / "space.txt", "lr = log_uniform 0.001 3\nobjective = quadratic\ntarget.lr = 0.1\n");
  auto run = [&](const std::string& out) {
    return cli({"search", "--space", dir / "space.txt", "--trials", "5", "--anneal-iters", "2", "--out-dir", dir / out,
                "--seed", "7"});
  };
  REQUIRE(run("a").code == 0);
  REQUIRE(run("b").code == 0);
  CHECK(trials_without_timing(dir / "a/best.json") == trials_without_timing(dir / "b/best.json"));
  const auto trials = trials_without_timing(dir / "a/trials.jsonl");
  CHECK(trials.size() == 15);
  CHECK(trials == trials_without_timing(dir / "b/trials.jsonl"));
}

TEST_CASE("exit codes") {
  TempDir dir;
  CHECK(cli({"retrofit", "--bogus"}).code == 1);
  CHECK(cli({"nonsense"}).code == 1);
  CHECK(cli({"--help"}).code == 0);
  const auto missing = cli({"retrofit", "--embeddings", dir / "none.txt", "--lexicon", dir / "none2.txt", "--out",
                            dir / "r.txt"});
  CHECK(missing.code == 2);
  CHECK(!missing.err.empty());
}

TEST_CASE("config file values yield to flags") {
  TempDir dir;
  write(dir / "emb.txt", "cat 1 0\ndog 0 1\n");
  write(dir / "lex.txt", "cat dog\n");
  write(dir / "run.cfg", "# settings\niters = 3\nalpha = 2\n");
  const auto r = cli({"retrofit", "--config", dir / "run.cfg", "--embeddings", dir / "emb.txt", "--lexicon",
                      dir / "lex.txt", "--out", dir / "r.txt", "--iters", "5"});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const auto m = nlohmann::json::parse(slurp(dir / "r.txt.manifest.json"));
  const auto dump = m.dump();
  CHECK(dump.find("\"5\"") != std::string::npos);
  CHECK(dump.find("\"2\"") != std::string::npos);

  write(dir / "bad.cfg", "colour = blue\n");
  CHECK(cli({"retrofit", "--config", dir / "bad.cfg", "--embeddings", dir / "emb.txt", "--lexicon", dir / "lex.txt",
             "--out", dir / "r.txt"})
            .code == 1);
}

TEST_CASE("manifest is written before the computation") {
  TempDir dir;
  write(dir / "emb.txt", "cat 1 0\ndog 0 1\n");
  write(dir / "lex.txt", "cat dog\n");
  const auto r = cli({"retrofit", "--embeddings", dir / "emb.txt", "--lexicon", dir / "lex.txt", "--out", dir / "r.txt",
                      "--alpha", "-1", "--manifest", dir / "m.json"});
  CHECK(r.code != 0);
  CHECK(fs::exists(dir / "m.json"));
  CHECK(!fs::exists(dir / "r.txt"));
}
