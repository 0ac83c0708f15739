#include <doctest.h>

#include <sys/wait.h>

#include <algorithm>
#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>
#include <string>

namespace {

struct Result {
  int code = -1;
  std::string out;
};

/// Runs the CLI with `args`, capturing stdout; stderr is discarded.
Result run(const std::string& args) {
  const std::string cmd = std::string(SIDDM_LAB_CLI) + " " + args + " 2>/dev/null";
  Result r;
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  std::array<char, 4096> buf{};
  std::size_t got = 0;
  while ((got = fread(buf.data(), 1, buf.size(), pipe)) > 0) r.out.append(buf.data(), got);
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("siddm_cli_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

const std::string kTiny =
    "--set embed_dim=8 --set hidden=16,16 --set eval_samples=200 --set eval_every=5 "
    "--batch 32 --seed 3";

}  // namespace

TEST_CASE("usage and exit codes") {
  CHECK(run("--help").code == 0);
  CHECK(run("").code == 1);
  CHECK(run("train --no-such-flag").code == 1);
  CHECK(run("frobnicate").code == 1);
  CHECK(run("train --iters 5").code == 1);  // needs --out-dir
  CHECK(run("eval --samples /nonexistent/s.csv").code == 2);
  CHECK(run("train --out-dir /tmp/x --lambda-afd -1").code == 1);
}

TEST_CASE("verify-theorem") {
  const Result zero = run("verify-theorem --trials 0");
  REQUIRE(zero.code == 0);
  const auto j = nlohmann::json::parse(zero.out);
  CHECK(j["summary"]["trials"] == 0);

  const Result some = run("verify-theorem --trials 50 --max-support 4 --seed 2 --summary");
  REQUIRE(some.code == 0);
  CHECK(some.out.rfind("trials=50 violations=0 ", 0) == 0);
}

TEST_CASE("train, sample, eval, plot round trip") {
  const auto dir = scratch_dir("roundtrip");
  const auto run_dir = dir / "run";
  REQUIRE(run("train --out-dir " + run_dir.string() + " --steps 2 --iters 10 " + kTiny).code ==
          0);
  const auto ck = run_dir / "checkpoint.json";
  REQUIRE(std::filesystem::exists(ck));
  CHECK(slurp(run_dir / "runlog.csv").rfind("iteration,d_loss", 0) == 0);

  // Same config and seed, same bytes.
  const auto twin = dir / "twin";
  REQUIRE(run("train --out-dir " + twin.string() + " --steps 2 --iters 10 " + kTiny).code == 0);
  CHECK(slurp(twin / "checkpoint.json") == slurp(ck));
  CHECK(slurp(twin / "runlog.csv") == slurp(run_dir / "runlog.csv"));

  // Resume continues to the new total.
  const auto more = dir / "more";
  REQUIRE(run("train --checkpoint " + ck.string() + " --iters 15 --out-dir " + more.string())
              .code == 0);
  CHECK(nlohmann::json::parse(slurp(more / "checkpoint.json"))["step"] == 15);
  CHECK(run("train --checkpoint " + ck.string() + " --out-dir " + more.string()).code == 1);

  const Result csv = run("sample --checkpoint " + ck.string() + " --n 20 --seed 1");
  REQUIRE(csv.code == 0);
  CHECK(csv.out.rfind("x,y\n", 0) == 0);
  CHECK(std::count(csv.out.begin(), csv.out.end(), '\n') == 21);
  CHECK(run("sample --checkpoint " + ck.string() + " --n 20 --steps 4").code == 1);
  CHECK(run("sample --checkpoint " + ck.string() + " --n 20 --steps 2").code == 0);

  const auto samples = dir / "s.csv";
  REQUIRE(run("sample --mog --n 3000 --seed 5 --out " + samples.string()).code == 0);
  const Result ev = run("eval --samples " + samples.string() + " --n 3000");
  REQUIRE(ev.code == 0);
  const auto m = nlohmann::json::parse(ev.out);
  CHECK(m["modes_covered"] == 25);
  CHECK(m["n_samples"] == 3000);

  const auto svg = dir / "s.svg";
  REQUIRE(run("plot --samples " + samples.string() + " --out " + svg.string() +
              " --title demo")
              .code == 0);
  CHECK(slurp(svg).rfind("<svg", 0) == 0);
  CHECK(run("plot --samples " + samples.string()).code == 1);

  CHECK(run("sample --checkpoint " + (dir / "missing.json").string()).code == 2);
  std::filesystem::remove_all(dir);
}

TEST_CASE("sweep writes a table") {
  const auto dir = scratch_dir("sweep");
  REQUIRE(run("sweep --axis steps --values 1,2 --iters 5 --out-dir " + dir.string() + " " +
              kTiny)
              .code == 0);
  const std::string table = slurp(dir / "sweep.csv");
  CHECK(table.rfind("steps,modes_covered,hq_fraction,frechet,sliced_w2\n1,", 0) == 0);
  CHECK(std::filesystem::exists(dir / "steps_2" / "checkpoint.json"));
  CHECK(run("sweep --axis width --values 1 --out-dir " + dir.string()).code == 1);
  std::filesystem::remove_all(dir);
}

TEST_CASE("vanilla gan defaults to a single step") {
  const auto dir = scratch_dir("vanilla");
  REQUIRE(run("train --objective vanilla_gan --iters 5 --out-dir " + dir.string() + " " + kTiny)
              .code == 0);
  CHECK(nlohmann::json::parse(slurp(dir / "checkpoint.json"))["config"]["steps"] == 1);
  CHECK(run("train --objective vanilla_gan --steps 2 --iters 5 --out-dir " + dir.string())
            .code == 1);
  std::filesystem::remove_all(dir);
}
