#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <sys/wait.h>
#include <unistd.h>

#include "ssa2d/config.hpp"
#include "ssa2d/container.hpp"

using namespace ssa2d;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("cli_test_" + std::to_string(std::random_device{}()));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  std::string str() const { return path.string(); }
};

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

// Runs the ssa2d binary; returns the exit code and captures combined output.
int run_cli(const std::string& args, std::string* output = nullptr) {
  static int counter = 0;
  const fs::path cap =
      fs::temp_directory_path() / ("cli_out_" + std::to_string(::getpid()) + "_" +
                                   std::to_string(counter++) + ".txt");
  const std::string cmd = std::string(SSA2D_BIN) + " " + args + " > " + cap.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  if (output) *output = slurp(cap);
  fs::remove(cap);
  REQUIRE(WIFEXITED(status));
  return WEXITSTATUS(status);
}

// Small-geometry overrides shared by the process-level tests.
const std::string kTiny =
    "--set input.t=4 --set input.h=16 --set input.w=16 "
    "--set synth.size_min=2 --set synth.size_max=3 --set synth.speed_max=1";

}  // namespace

TEST_CASE("key=value parsing") {
  SUBCASE("comments, blanks and whitespace are tolerated") {
    auto kv = parse_key_values("# header\n  seed = 7  # trailing\n\nnet.c_actor=4\n");
    REQUIRE(kv.size() == 2);
    CHECK(kv["seed"] == "7");
    CHECK(kv["net.c_actor"] == "4");
  }
  SUBCASE("a line without '=' names its line number") {
    try {
      parse_key_values("seed = 1\nbogus line\n");
      FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
      CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }
  }
  SUBCASE("later assignments win") {
    auto kv = parse_key_values("seed=1\nseed=2\n");
    CHECK(kv["seed"] == "2");
  }
}

TEST_CASE("run configuration") {
  SUBCASE("defaults finalize to the toy profile") {
    RunConfig cfg = RunConfig::parse("");
    CHECK(cfg.net.T == 8);
    CHECK(cfg.net.encoder_strides.size() == 2);
  }
  SUBCASE("typed keys reach their fields") {
    RunConfig cfg = RunConfig::parse(
        "seed = 11\ninput.t = 4\ninput.h = 16\ninput.w = 16\n"
        "net.ssa_masking = false\nloss.w_mask = 0.7\ntrain.max_steps = 5\n"
        "net.encoder_channels = 4, 6\n");
    CHECK(cfg.seed == 11);
    CHECK(cfg.net.T == 4);
    CHECK(cfg.synth.H == 16);
    CHECK(cfg.net.ssa_masking == false);
    CHECK(cfg.loss.w_mask == doctest::Approx(0.7));
    CHECK(cfg.schedule.max_steps == 5);
    CHECK(cfg.net.encoder_channels == std::vector<std::int64_t>{4, 6});
    CHECK(cfg.net.seed == 11);
    CHECK(cfg.schedule.shuffle_seed == 11);
  }
  SUBCASE("the paper profile pins the published input geometry") {
    RunConfig cfg = RunConfig::parse("profile = paper\ninput.t = 4\n");
    CHECK(cfg.net.T == 16);
    CHECK(cfg.net.H == 224);
    CHECK(cfg.net.encoder_strides.size() == 4);
  }
  SUBCASE("errors name the offending key") {
    for (const char* bad : {"net.c_actor = many", "net.ssa_masking = maybe",
                            "loss.w_mask = heavy", "nosuch.key = 1"}) {
      try {
        RunConfig::parse(bad);
        FAIL("expected ConfigError for: ", bad);
      } catch (const ConfigError& e) {
        const std::string what = e.what();
        const std::string key = std::string(bad).substr(0, std::string(bad).find(' '));
        CHECK(what.find(key) != std::string::npos);
      }
    }
  }
  SUBCASE("invalid geometry is rejected at finalize") {
    CHECK_THROWS_AS(RunConfig::parse("input.h = 30"), ConfigError);
  }
}

TEST_CASE("cli exit codes") {
  std::string out;
  CHECK(run_cli("", &out) == 2);                  // missing subcommand
  CHECK(run_cli("frobnicate", &out) == 2);        // unknown subcommand
  CHECK(run_cli("gen-data", &out) == 2);          // missing required --out
  CHECK(run_cli("eval --data x --report y", &out) == 2);  // no ckpt, no oracle
  CHECK(run_cli("bench", &out) == 2);             // no ckpt, no init
  CHECK(run_cli("gen-data --out /tmp/x --set nosuch=1 --clips 1", &out) == 2);
  CHECK(out.find("nosuch") != std::string::npos);

  TempDir tmp;
  // runtime failure (not a usage error): missing dataset for eval
  CHECK(run_cli("eval --oracle --data " + tmp.str() + "/absent --report " + tmp.str() +
                    "/r.txt",
                &out) == 1);
  // train validates the data directory up front
  CHECK(run_cli("train --data " + tmp.str() + "/absent --out " + tmp.str() + "/out", &out) == 2);
}

TEST_CASE("cli end-to-end flow") {
  TempDir tmp;
  const std::string data = tmp.str() + "/data";
  std::string out;

  REQUIRE(run_cli("gen-data --out " + data + " --clips 3 --seed 5 " + kTiny, &out) == 0);
  REQUIRE(fs::exists(data + "/manifest.txt"));
  REQUIRE(fs::exists(data + "/clip_0.stc"));

  SUBCASE("generation is deterministic") {
    const std::string data2 = tmp.str() + "/data2";
    REQUIRE(run_cli("gen-data --out " + data2 + " --clips 3 --seed 5 " + kTiny, &out) == 0);
    for (int i = 0; i < 3; ++i)
      CHECK(slurp(data + "/clip_" + std::to_string(i) + ".stc") ==
            slurp(data2 + "/clip_" + std::to_string(i) + ".stc"));
    const std::string data3 = tmp.str() + "/data3";
    REQUIRE(run_cli("gen-data --out " + data3 + " --clips 3 --seed 6 " + kTiny, &out) == 0);
    CHECK(slurp(data + "/clip_0.stc") != slurp(data3 + "/clip_0.stc"));
  }

  SUBCASE("oracle evaluation scores 1 everywhere") {
    const std::string report = tmp.str() + "/report.txt";
    REQUIRE(run_cli("eval --oracle --data " + data + " --report " + report + " " + kTiny,
                    &out) == 0);
    const std::string text = slurp(report);
    CHECK(text.find("actor.glo=1") != std::string::npos);
    CHECK(text.find("action.ave=1") != std::string::npos);
    CHECK(text.find("joint.miou=1") != std::string::npos);
    CHECK(fs::exists(report + ".json"));
  }

  SUBCASE("train, infer and bench round-trip") {
    const std::string run = tmp.str() + "/run";
    REQUIRE(run_cli("train --data " + data + " --out " + run + " " + kTiny +
                        " --set train.max_steps=2 --set net.encoder_channels=4,6"
                        " --set net.decoder_channels=4 --set net.c_ap=3"
                        " --set net.atrous_branch_channels=2",
                    &out) == 0);
    REQUIRE(fs::exists(run + "/checkpoint.stc"));
    const std::string log = slurp(run + "/train.log");
    CHECK(log.find("step=1 l_actor=") != std::string::npos);
    CHECK(log.find("step=2 ") != std::string::npos);

    const std::string pred = tmp.str() + "/pred";
    REQUIRE(run_cli("infer --ckpt " + run + "/checkpoint.stc --input " + data +
                        "/clip_0.stc --out " + pred + " --dump-frames " + kTiny +
                        " --set net.encoder_channels=4,6 --set net.decoder_channels=4"
                        " --set net.c_ap=3 --set net.atrous_branch_channels=2",
                    &out) == 0);
    REQUIRE(fs::exists(pred + "/prediction.stc"));
    const auto ts = read_container(pred + "/prediction.stc");
    REQUIRE(ts.size() == 3);
    CHECK(find_tensor(ts, "actor_pred").dims == std::vector<std::int64_t>{4, 16, 16});
    CHECK(find_tensor(ts, "action_pred").i32.size() == 4 * 16 * 16);
    CHECK(find_tensor(ts, "mask_pred").dtype == ContainerTensor::DType::I32);
    CHECK(fs::exists(pred + "/actor_0000.ppm"));
    CHECK(fs::exists(pred + "/mask_0003.ppm"));

    std::string bench_out;
    REQUIRE(run_cli("bench --ckpt " + run + "/checkpoint.stc --actors 1,2 --repeats 3 " + kTiny +
                        " --set net.encoder_channels=4,6 --set net.decoder_channels=4"
                        " --set net.c_ap=3 --set net.atrous_branch_channels=2",
                    &bench_out) == 0);
    std::istringstream rows(bench_out);
    std::string header;
    REQUIRE(std::getline(rows, header));
    CHECK(header == "actors median_ms_per_frame op_count peak_transient_bytes");
    long long ops[2] = {0, 0}, bytes[2] = {0, 0};
    for (int i = 0; i < 2; ++i) {
      int actors = 0;
      double ms = -1;
      REQUIRE((rows >> actors >> ms >> ops[i] >> bytes[i]));
      CHECK(actors == i + 1);
      CHECK(ms > 0.0);
    }
    CHECK(ops[0] == ops[1]);
    CHECK(bytes[0] == bytes[1]);
  }

  SUBCASE("corrupt input clips fail as runtime errors") {
    std::ofstream f(data + "/clip_0.stc", std::ios::binary | std::ios::trunc);
    f << "garbage";
    f.close();
    CHECK(run_cli("eval --oracle --data " + data + " --report " + tmp.str() + "/r.txt " + kTiny,
                  &out) == 1);
  }
}
