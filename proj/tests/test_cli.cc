#include <cstdlib>
#include <filesystem>
#include <map>
#include <sstream>

#include "cli.h"
#include "doctest.h"
#include "support/temp_dir.h"

using scene2obj::testing::TempDir;
namespace cli = scene2obj::cli;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code;
  std::string out, err;
};

Outcome run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

// Runs with the working directory set to `dir`, so relative outputs land
// there and the echoed flags stay identical between runs.
Outcome run_in(const fs::path& dir, std::vector<std::string> args) {
  const fs::path saved = fs::current_path();
  fs::current_path(dir);
  Outcome o = run(std::move(args));
  fs::current_path(saved);
  return o;
}

std::map<std::string, std::string> read_tree(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    files[entry.path().filename().string()] = TempDir::read(entry.path());
  }
  return files;
}

const std::vector<std::string> kSmallWorld{"e2e-synthetic", "--out-dir", "w", "--scenes", "6",
                                           "--objects", "20", "--images", "60"};

}  // namespace

TEST_CASE("exit codes: usage errors are 2, runtime failures 1") {
  CHECK(run({}).code == cli::kExitUsage);
  CHECK(run({"frobnicate"}).code == cli::kExitUsage);
  CHECK(run({"extract", "--corpus", "x", "--out", "y", "--bogus"}).code == cli::kExitUsage);
  CHECK(run({"extract", "--corpus", "x"}).code == cli::kExitUsage);
  CHECK(run({"--threads", "0", "extract", "--corpus", "x", "--out", "y"}).code == cli::kExitUsage);
  CHECK(run({"build-matrix", "--triples", "t", "--scenes", "s", "--objects", "o", "--out", "m",
             "--self-similarity", "maybe"})
            .code == cli::kExitUsage);
  CHECK(run({"predict", "--matrix", "m", "--out", "p"}).code == cli::kExitUsage);

  TempDir dir;
  const auto missing = run({"extract", "--corpus", dir.file("absent.tsv").string(), "--out",
                            dir.file("t.tsv").string()});
  CHECK(missing.code == cli::kExitFailure);
  CHECK(!missing.err.empty());

  const auto version = run({"--version"});
  CHECK(version.code == cli::kExitOk);
  CHECK(version.out.find("0.1.0") != std::string::npos);
  CHECK(run({"--help"}).code == cli::kExitOk);
}

TEST_CASE("pipeline steps write headers with version, seed and flags") {
  TempDir dir;
  const auto corpus = dir.write("c.tsv",
                                "A\tDT\ncar\tNN\ndrove\tVBD\ndown\tIN\nthe\tDT\nstreet\tNN\n\n"
                                "Many\tJJ\npersons\tNNS\nwere\tVBD\non\tIN\nthe\tDT\nstreets\tNNS\n");
  const auto lemmas = dir.write("l.tsv", "persons\tperson\nstreets\tstreet\n");
  const auto out = dir.file("t.tsv");
  const auto r = run({"--seed", "5", "extract", "--corpus", corpus.string(), "--lemma-map",
                      lemmas.string(), "--out", out.string()});
  REQUIRE(r.code == 0);
  const std::string text = TempDir::read(out);
  CHECK(text.rfind("# scene2obj 0.1.0\n# seed: 5\n# command: extract --corpus ", 0) == 0);
  CHECK(text.find("car\tdrove down\tstreet\t1\n") != std::string::npos);
  CHECK(text.find("person\twere on\tstreet\t1\n") != std::string::npos);

  const auto scenes = dir.write("s.txt", "street\n");
  const auto objects = dir.write("o.txt", "car\nperson\n");
  REQUIRE(run({"build-matrix", "--triples", out.string(), "--scenes", scenes.string(), "--objects",
               objects.string(), "--out", dir.file("m.tsv").string()})
              .code == 0);
  const std::string matrix = TempDir::read(dir.file("m.tsv"));
  CHECK(matrix.find("--self-similarity on") != std::string::npos);
  CHECK(matrix.find("street\tcar\t1\n") != std::string::npos);
  CHECK(matrix.find("street\tperson\t1\n") != std::string::npos);
}

TEST_CASE("outputs are byte-identical across thread counts") {
  TempDir one, four;
  auto args1 = kSmallWorld;
  args1.insert(args1.begin(), {"--log-level", "off", "--threads", "1"});
  auto args4 = kSmallWorld;
  args4.insert(args4.begin(), {"--log-level", "off", "--threads", "4"});
  const auto a = run_in(one.path(), args1);
  const auto b = run_in(four.path(), args4);
  REQUIRE(a.code == 0);
  REQUIRE(b.code == 0);
  CHECK(a.out == b.out);
  const auto ta = read_tree(one.path() / "w"), tb = read_tree(four.path() / "w");
  CHECK(ta.size() >= 20);
  CHECK(ta == tb);
  for (const auto& [name, content] : ta) {
    INFO(name);
    CHECK(content.rfind("# scene2obj 0.1.0\n# seed: 0\n# command: e2e-synthetic", 0) == 0);
  }
}

TEST_CASE("SCENE2OBJ_LOG overrides the log level") {
  TempDir dir;
  ::setenv("SCENE2OBJ_LOG", "off", 1);
  const auto quiet = run_in(dir.path(), kSmallWorld);
  ::setenv("SCENE2OBJ_LOG", "bogus", 1);
  const auto bad = run_in(dir.path(), kSmallWorld);
  ::unsetenv("SCENE2OBJ_LOG");
  const auto loud = run_in(dir.path(), {kSmallWorld.begin(), kSmallWorld.end()});
  CHECK(quiet.code == 0);
  CHECK(quiet.err.empty());
  CHECK(bad.code == cli::kExitUsage);
  CHECK(loud.code == 0);
  CHECK(loud.err.find("[info]") != std::string::npos);
  CHECK(run_in(dir.path(), [] {
          auto a = kSmallWorld;
          a.insert(a.begin(), {"--log-level", "warn"});
          return a;
        }())
            .err.find("[info]") == std::string::npos);
}
