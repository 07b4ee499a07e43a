#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <string>
#include <sys/wait.h>

#include "test_util.hpp"

namespace {

std::string cli() {
  const char* p = std::getenv("NFOL_CLI_PATH");
  REQUIRE_MESSAGE(p != nullptr, "NFOL_CLI_PATH must point at the nfol binary");
  return p;
}

struct RunResult {
  int code = -1;
  std::string out;
  std::string err;
};

RunResult run(const std::string& args, const std::string& env = "") {
  static int counter = 0;
  std::string dir = testutil::make_temp_dir();
  std::string out_path = dir + "/out" + std::to_string(counter);
  std::string err_path = dir + "/err" + std::to_string(counter);
  ++counter;
  std::string cmd = env + (env.empty() ? "" : " ") + cli() + " " + args + " >" +
                    out_path + " 2>" + err_path;
  int status = std::system(cmd.c_str());
  RunResult r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = testutil::slurp(out_path);
  r.err = testutil::slurp(err_path);
  std::filesystem::remove_all(dir);
  return r;
}

}  // namespace

TEST_CASE("help exits zero") {
  CHECK(run("--help").code == 0);
  CHECK(run("gen --help").code == 0);
  RunResult r = run("answer --help");
  CHECK(r.code == 0);
  CHECK(r.out.find("--golden") != std::string::npos);
}

TEST_CASE("usage errors exit two with the error prefix") {
  RunResult none = run("");
  CHECK(none.code == 2);
  CHECK(none.err.find("error: usage:") != std::string::npos);

  CHECK(run("gen").code == 2);                       // missing --out
  CHECK(run("gen --out /tmp/x --bogus 3").code == 2);
  CHECK(run("frobnicate").code == 2);

  RunResult both = run("answer --data /tmp/nowhere --out /tmp/a.jsonl --golden --model m.json");
  CHECK(both.code == 2);
  CHECK(both.err.find("error: usage:") != std::string::npos);
  CHECK(run("answer --data /tmp/nowhere --out /tmp/a.jsonl").code == 2);
}

TEST_CASE("data errors exit three") {
  RunResult r = run("answer --data /tmp/nfol_no_such_dir --out /tmp/a.jsonl --golden");
  CHECK(r.code == 3);
  CHECK(r.err.find("error: data:") != std::string::npos);
}

TEST_CASE("thread override is validated") {
  std::string dir = testutil::make_temp_dir();
  std::string data = dir + "/data";
  REQUIRE(run("gen --out " + data + " --seed 2 --scenes 2 --qps 1").code == 0);
  RunResult r = run("answer --data " + data + " --out " + dir + "/a.jsonl --golden",
                    "NFOL_THREADS=abc");
  CHECK(r.code == 2);
  CHECK(r.err.find("NFOL_THREADS") != std::string::npos);
  RunResult ok = run("answer --data " + data + " --out " + dir + "/a.jsonl --golden",
                     "NFOL_THREADS=2");
  CHECK(ok.code == 0);
  std::filesystem::remove_all(dir);
}

TEST_CASE("gen, answer, split, eval round trip") {
  std::string dir = testutil::make_temp_dir();
  std::string data = dir + "/data";

  RunResult gen = run("gen --out " + data + " --seed 9 --scenes 6 --qps 3");
  CHECK(gen.code == 0);
  CHECK(std::filesystem::exists(data + "/vocab.json"));
  CHECK(std::filesystem::exists(data + "/scenes.jsonl"));
  CHECK(std::filesystem::exists(data + "/questions.jsonl"));

  // byte identical rerun
  std::string data2 = dir + "/data2";
  CHECK(run("gen --out " + data2 + " --seed 9 --scenes 6 --qps 3").code == 0);
  for (const char* f : {"/vocab.json", "/scenes.jsonl", "/questions.jsonl"})
    CHECK(testutil::slurp(data + f) == testutil::slurp(data2 + f));

  RunResult ans = run("answer --data " + data + " --out " + dir + "/gold.jsonl --golden");
  CHECK(ans.code == 0);
  CHECK(ans.out.find("accuracy 1.0000") != std::string::npos);

  RunResult split = run("split --data " + data + " --answers " + dir +
                        "/gold.jsonl --out " + dir + "/split.json --meta base=golden");
  CHECK(split.code == 0);
  CHECK(std::filesystem::exists(dir + "/split.json"));

  RunResult ev = run("eval --data " + data + " --answers " + dir + "/gold.jsonl --split " +
                     dir + "/split.json --out " + dir + "/report.json");
  CHECK(ev.code == 0);
  CHECK(ev.out.find("\"accuracy\": 1.0") != std::string::npos);
  CHECK(std::filesystem::exists(dir + "/report.json"));

  std::filesystem::remove_all(dir);
}

TEST_CASE("train, calibrate, and calibrated answers run end to end") {
  std::string dir = testutil::make_temp_dir();
  std::string data = dir + "/data";
  REQUIRE(run("gen --out " + data + " --seed 3 --scenes 5 --qps 2").code == 0);

  RunResult train = run("train-oracle --data " + data + " --out " + dir +
                        "/model.json --epochs 1 --hidden 8 --layers 1 --pair-proj 4"
                        " --batch-size 8 --rho 0.3 --sigma 0.1 --loss-curve " +
                        dir + "/curve.csv");
  CHECK(train.code == 0);
  CHECK(train.out.find("epoch 1") != std::string::npos);
  CHECK(std::filesystem::exists(dir + "/model.json"));
  CHECK(std::filesystem::exists(dir + "/curve.csv"));

  // deterministic retrain
  REQUIRE(run("train-oracle --data " + data + " --out " + dir +
              "/model2.json --epochs 1 --hidden 8 --layers 1 --pair-proj 4"
              " --batch-size 8 --rho 0.3 --sigma 0.1")
              .code == 0);
  CHECK(testutil::slurp(dir + "/model.json") == testutil::slurp(dir + "/model2.json"));

  RunResult cal = run("calibrate --data " + data + " --model " + dir +
                      "/model.json --out " + dir + "/table.json --epochs 1 --rho 0.3"
                      " --sigma 0.1");
  CHECK(cal.code == 0);
  CHECK(std::filesystem::exists(dir + "/table.json"));

  RunResult ans = run("answer --data " + data + " --out " + dir +
                      "/model_answers.jsonl --model " + dir + "/model.json --calibration " +
                      dir + "/table.json --rho 0.3 --sigma 0.1 --seed 11");
  CHECK(ans.code == 0);

  // calibration without a model is a usage error
  CHECK(run("answer --data " + data + " --out " + dir + "/x.jsonl --golden --calibration " +
            dir + "/table.json")
            .code == 2);

  std::filesystem::remove_all(dir);
}

TEST_CASE("selftest passes") {
  RunResult r = run("selftest");
  CHECK(r.code == 0);
  CHECK(r.out.find("selftest: pass") != std::string::npos);
}
