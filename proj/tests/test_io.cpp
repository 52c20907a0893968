#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "freenoise/cli.hpp"
#include "freenoise/io.hpp"
#include "freenoise/rng.hpp"

using namespace freenoise;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("freenoise_test_" + std::to_string(::getpid()) + "_" +
                                        std::to_string(counter++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
  static int counter;
};
int TempDir::counter = 0;

std::string read_bytes(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  REQUIRE(is.good());
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("container round trip is bitwise") {
  TempDir dir;
  Rng rng(1, 50);
  const Array video = rng.normal({3, 5, 6, 8});
  const std::string path = dir.file("v.fnv");
  write_container(video, path);
  CHECK(bitwise_equal(read_container(path), video));
  // byte-stable: writing the same video twice gives identical files
  const std::string path2 = dir.file("v2.fnv");
  write_container(video, path2);
  CHECK(read_bytes(path) == read_bytes(path2));
}

TEST_CASE("container header layout") {
  TempDir dir;
  const Array video({2, 3, 4, 5});
  const std::string path = dir.file("h.fnv");
  write_container(video, path);
  const std::string bytes = read_bytes(path);
  REQUIRE(bytes.size() == 4 + 16 + 2 * 3 * 4 * 5 * 4);
  CHECK(bytes.substr(0, 4) == "FNV1");
  CHECK(static_cast<unsigned char>(bytes[4]) == 3);   // frames first
  CHECK(static_cast<unsigned char>(bytes[8]) == 2);   // then channels
  CHECK(static_cast<unsigned char>(bytes[12]) == 4);  // height
  CHECK(static_cast<unsigned char>(bytes[16]) == 5);  // width
}

TEST_CASE("container rejects bad magic, truncation and empty headers") {
  TempDir dir;
  Rng rng(2, 50);
  const Array video = rng.normal({2, 2, 4, 4});
  const std::string path = dir.file("bad.fnv");
  write_container(video, path);

  std::string bytes = read_bytes(path);
  {
    std::ofstream os(dir.file("magic.fnv"), std::ios::binary);
    os << "XNV1" << bytes.substr(4);
  }
  CHECK_THROWS_AS(read_container(dir.file("magic.fnv")), FormatError);

  {
    std::ofstream os(dir.file("trunc.fnv"), std::ios::binary);
    os << bytes.substr(0, bytes.size() / 2);
  }
  try {
    read_container(dir.file("trunc.fnv"));
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    CHECK(std::string(e.what()).find("byte " + std::to_string(bytes.size() / 2)) !=
          std::string::npos);
  }

  {
    std::ofstream os(dir.file("empty.fnv"), std::ios::binary);
    std::string zeroed = bytes;
    zeroed[4] = zeroed[5] = zeroed[6] = zeroed[7] = 0;  // frames = 0
    os << zeroed;
  }
  CHECK_THROWS_AS(read_container(dir.file("empty.fnv")), FormatError);
}

TEST_CASE("p6 export writes one image per frame") {
  TempDir dir;
  Rng rng(3, 50);
  const Array video = rng.normal({3, 3, 4, 6});
  export_frames_p6(video, dir.file("frame"));
  for (int f = 0; f < 3; ++f) {
    char name[32];
    std::snprintf(name, sizeof(name), "frame_%04d.ppm", f);
    const std::string bytes = read_bytes(dir.file(name));
    CHECK(bytes.rfind("P6\n6 4\n255\n", 0) == 0);
    CHECK(bytes.size() == std::string("P6\n6 4\n255\n").size() + 3 * 4 * 6);
  }
  CHECK_THROWS_AS(export_frames_p6(Array({2, 2, 4, 4}), dir.file("x")), InputError);
}

TEST_CASE("config file parsing") {
  TempDir dir;
  const std::string path = dir.file("run.cfg");
  {
    std::ofstream os(path);
    os << "# a comment line\n"
          "mode = freenoise\n"
          "frames = 8   # trailing comment\n"
          "\n"
          "prompt = \"a man is boating on a lake\"\n"
          "prompt = a man is fishing on a lake@4\n";
  }
  const auto values = parse_config_file(path);
  CHECK(values.at("mode") == std::vector<std::string>{"freenoise"});
  CHECK(values.at("frames") == std::vector<std::string>{"8"});
  REQUIRE(values.at("prompt").size() == 2);
  CHECK(values.at("prompt")[0] == "a man is boating on a lake");
  CHECK(values.at("prompt")[1] == "a man is fishing on a lake@4");
}

// ============================================================================
// CLI end to end (in process)
// ============================================================================

TEST_CASE("generate writes a container with the requested frame count") {
  TempDir dir;
  const std::string out = dir.file("video.fnv");
  const int rc = cli::run({"generate", "--mode", "freenoise", "--frames", "8", "--n-train", "4",
                           "--unit", "2", "--seed", "7", "--steps", "3", "--height", "8",
                           "--width", "8", "--hidden", "8", "--heads", "2", "--head-dim", "4",
                           "--text-dim", "8", "--text-tokens", "4", "--time-dim", "8",
                           "--prompt", "a man is boating on a lake", "--out", out});
  CHECK(rc == 0);
  const Array video = read_container(out);
  CHECK(video.extent(0) == 3);
  CHECK(video.extent(1) == 8);
  CHECK(video.extent(2) == 8);
  CHECK(video.extent(3) == 8);
  CHECK(video.all_finite());
}

TEST_CASE("same-seed runs produce byte-identical files; modes reduce at M == n_train") {
  TempDir dir;
  auto gen = [&](const std::string& mode, const std::string& name) {
    const std::string out = dir.file(name);
    const int rc = cli::run({"generate", "--mode", mode, "--frames", "4", "--n-train", "4",
                             "--unit", "2", "--seed", "3", "--steps", "2", "--height", "8",
                             "--width", "8", "--hidden", "8", "--heads", "2", "--head-dim", "4",
                             "--text-dim", "8", "--text-tokens", "4", "--time-dim", "8",
                             "--out", out});
    REQUIRE(rc == 0);
    return read_bytes(out);
  };
  const std::string direct = gen("direct", "a.fnv");
  CHECK(direct == gen("direct", "b.fnv"));
  CHECK(direct == gen("freenoise", "c.fnv"));
  CHECK(direct == gen("sliding", "d.fnv"));
  CHECK(direct == gen("genl", "e.fnv"));
}

TEST_CASE("misaligned frame count exits 2 and names the constraint") {
  TempDir dir;
  const int rc = cli::run({"generate", "--mode", "freenoise", "--frames", "63", "--out",
                           dir.file("x.fnv")});
  CHECK(rc == 2);
  CHECK_FALSE(fs::exists(dir.file("x.fnv")));
}

TEST_CASE("flags round-trip through a config file with identical behavior") {
  TempDir dir;
  const std::string cfg_path = dir.file("run.cfg");
  {
    std::ofstream os(cfg_path);
    os << "mode = freenoise\nframes = 8\nn-train = 4\nunit = 2\nseed = 9\nsteps = 2\n"
          "height = 8\nwidth = 8\nhidden = 8\nheads = 2\nhead-dim = 4\ntext-dim = 8\n"
          "text-tokens = 4\ntime-dim = 8\nprompt = a quiet harbor\n";
  }
  const std::string from_cfg = dir.file("from_cfg.fnv");
  REQUIRE(cli::run({"generate", "--config", cfg_path, "--out", from_cfg}) == 0);

  const std::string from_flags = dir.file("from_flags.fnv");
  REQUIRE(cli::run({"generate", "--mode", "freenoise", "--frames", "8", "--n-train", "4",
                    "--unit", "2", "--seed", "9", "--steps", "2", "--height", "8", "--width",
                    "8", "--hidden", "8", "--heads", "2", "--head-dim", "4", "--text-dim", "8",
                    "--text-tokens", "4", "--time-dim", "8", "--prompt", "a quiet harbor",
                    "--out", from_flags}) == 0);
  CHECK(read_bytes(from_cfg) == read_bytes(from_flags));

  // flags override file values
  const std::string overridden = dir.file("override.fnv");
  REQUIRE(cli::run({"generate", "--config", cfg_path, "--seed", "10", "--out", overridden}) == 0);
  CHECK(read_bytes(overridden) != read_bytes(from_cfg));
}

TEST_CASE("weight dump/load through the cli") {
  TempDir dir;
  const std::string weights = dir.file("model.fnw");
  const std::string out1 = dir.file("w1.fnv");
  REQUIRE(cli::run({"generate", "--frames", "4", "--n-train", "4", "--unit", "2", "--steps",
                    "2", "--height", "8", "--width", "8", "--hidden", "8", "--heads", "2",
                    "--head-dim", "4", "--text-dim", "8", "--text-tokens", "4", "--time-dim",
                    "8", "--dump-weights", weights, "--out", out1}) == 0);
  const std::string out2 = dir.file("w2.fnv");
  REQUIRE(cli::run({"generate", "--frames", "4", "--n-train", "4", "--unit", "2", "--steps",
                    "2", "--height", "8", "--width", "8", "--load-weights", weights, "--out",
                    out2}) == 0);
  CHECK(read_bytes(out1) == read_bytes(out2));
  // the weight file itself is byte-stable
  const std::string weights2 = dir.file("model2.fnw");
  REQUIRE(cli::run({"generate", "--frames", "4", "--n-train", "4", "--unit", "2", "--steps",
                    "2", "--height", "8", "--width", "8", "--hidden", "8", "--heads", "2",
                    "--head-dim", "4", "--text-dim", "8", "--text-tokens", "4", "--time-dim",
                    "8", "--dump-weights", weights2, "--out", dir.file("w3.fnv")}) == 0);
  CHECK(read_bytes(weights) == read_bytes(weights2));
}

namespace {

std::string capture_stdout(const std::vector<std::string>& args, int expect_rc) {
  std::ostringstream captured;
  std::streambuf* old = std::cout.rdbuf(captured.rdbuf());
  const int rc = cli::run(args);
  std::cout.rdbuf(old);
  CHECK(rc == expect_rc);
  return captured.str();
}

size_t count_lines_with(const std::string& text, const std::string& needle) {
  size_t n = 0, pos = 0;
  while ((pos = text.find(needle, pos)) != std::string::npos) {
    ++n;
    pos += needle.size();
  }
  return n;
}

}  // namespace

TEST_CASE("inspect prints mapping, windows and routing") {
  // paper defaults: 64 frames, window 16, stride 4 -> 13 windows
  const std::string out = capture_stdout({"inspect", "--seed", "1"}, 0);
  CHECK(count_lines_with(out, "window ") >= 13);
  CHECK(count_lines_with(out, " -> ") == 64);     // one frame->base pair per line
  CHECK(out.find("window 12: start=48") != std::string::npos);
  CHECK(out.find("window 13:") == std::string::npos);
  CHECK(out.find("# prompt routing") != std::string::npos);
  // deterministic across runs
  CHECK(out == capture_stdout({"inspect", "--seed", "1"}, 0));

  // M == n_train: a single window
  const std::string single =
      capture_stdout({"inspect", "--frames", "16", "--seed", "1"}, 0);
  CHECK(single.find("window 0:") != std::string::npos);
  CHECK(single.find("window 1:") == std::string::npos);
}

TEST_CASE("metrics subcommand consumes containers") {
  TempDir dir;
  Rng rng(5, 50);
  for (const char* name : {"m1.fnv", "m2.fnv", "m3.fnv", "m4.fnv"}) {
    write_container(rng.normal({3, 4, 8, 8}), dir.file(name));
  }
  CHECK(cli::run({"metrics", dir.file("m1.fnv")}) == 0);
  CHECK(cli::run({"metrics", "--set-a", dir.file("m1.fnv"), "--set-a", dir.file("m2.fnv"),
                  "--set-b", dir.file("m3.fnv"), "--set-b", dir.file("m4.fnv")}) == 0);
  CHECK(cli::run({"metrics"}) == 2);
  CHECK(cli::run({"metrics", dir.file("missing.fnv")}) == 1);
}

TEST_CASE("unknown options and commands exit 2") {
  CHECK(cli::run({"generate", "--no-such-flag", "1"}) == 2);
  CHECK(cli::run({"explode"}) == 2);
  CHECK(cli::run({}) == 2);
}
