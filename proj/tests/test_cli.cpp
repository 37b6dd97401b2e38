#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <array>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include "sfgp/piecewise.hpp"
#include "sfgp/svgp.hpp"

using namespace sfgp;

namespace {

struct RunResult {
  int exit_code = -1;
  std::string out;
};

RunResult run(const std::string& args) {
  const std::string cmd = std::string(SFGP_CLI_PATH) + " " + args + " 2>/dev/null";
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  RunResult r;
  std::array<char, 4096> buf;
  while (std::size_t n = std::fread(buf.data(), 1, buf.size(), pipe)) r.out.append(buf.data(), n);
  const int status = pclose(pipe);
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

struct TempFile {
  std::string path;
  explicit TempFile(std::string p) : path(std::move(p)) {}
  ~TempFile() { std::remove(path.c_str()); }
};

std::string slurp(const std::string& path) {
  std::ifstream is(path);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

void write_classification_csv(const std::string& path, int n = 60) {
  std::ofstream os(path);
  os << "x1,x2,y\n";
  std::srand(7);
  for (int i = 0; i < n; ++i) {
    const double a = (std::rand() % 2000 - 1000) / 500.0;
    const double b = (std::rand() % 2000 - 1000) / 500.0;
    os << a << ',' << b << ',' << ((a + b > 0) ? 1 : 0) << '\n';
  }
}

}  // namespace

TEST_CASE("config --defaults prints the full default configuration") {
  const RunResult r = run("config --defaults");
  CHECK(r.exit_code == 0);
  CHECK(r.out.find("\"task\": \"classify\"") != std::string::npos);
  CHECK(r.out.find("\"K\": 20") != std::string::npos);
  CHECK(r.out.find("\"alpha\": 0.05") != std::string::npos);
  CHECK(r.out.find("\"folds\": 10") != std::string::npos);
  CHECK(r.out.find("\"M\": 10") != std::string::npos);
}

TEST_CASE("bound --exp matches the library value") {
  const RunResult r = run("bound --exp -K 4 --lo -3 --hi 3 --mu 0 --sigma 1");
  CHECK(r.exit_code == 0);
  std::istringstream is(r.out);
  std::string label;
  double value = 0.0;
  is >> label >> value;
  CHECK(label == "exp_mse");
  const double expected = exp_link_mse(uniform_partition(4, -3, 3), 0.0, 1.0);
  CHECK(value == doctest::Approx(expected).epsilon(1e-9));
}

TEST_CASE("bound: Lipschitz request for the exp link is refused without --force") {
  CHECK(run("bound --exp --lipschitz 1 -K 4").exit_code == 2);
  const RunResult forced = run("bound --exp --lipschitz 1 -K 4 --force");
  CHECK(forced.exit_code == 0);
  CHECK(forced.out.find("lipschitz_bound") != std::string::npos);
  // plain Lipschitz bound works on its own
  CHECK(run("bound --lipschitz 0.25 -K 8 --mu 0 --sigma 1").exit_code == 0);
  // asking for nothing is a usage error
  CHECK(run("bound -K 4").exit_code == 2);
}

TEST_CASE("CLI validation failures exit with code 2") {
  CHECK(run("no-such-command").exit_code == 2);
  CHECK(run("train").exit_code == 2);                       // --data missing
  CHECK(run("train --data no_such_file.csv").exit_code == 2);
  CHECK(run("predict --model missing.json --data missing.csv").exit_code == 2);
  CHECK(run("config").exit_code == 2);
}

TEST_CASE("linkdump: fresh sigmoid-initialized link") {
  const RunResult r = run("linkdump --task classify -K 4 --lo -3 --hi 3");
  CHECK(r.exit_code == 0);
  std::istringstream is(r.out);
  std::string line;
  std::getline(is, line);
  CHECK(line == "k,lower,upper,rep,level");
  const Partition p = uniform_partition(4, -3, 3);
  const auto reps = representatives(p);
  for (int k = 0; k < 4; ++k) {
    REQUIRE(std::getline(is, line));
    std::stringstream row(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(row, cell, ',')) cells.push_back(cell);
    REQUIRE(cells.size() == 5);
    CHECK(std::stoi(cells[0]) == k);
    CHECK(std::stod(cells[4]) ==
          doctest::Approx(1.0 / (1.0 + std::exp(-reps[k]))).epsilon(1e-12));
  }
  CHECK(run("linkdump --task regress-gauss").exit_code == 2);  // no link to dump
}

TEST_CASE("oracle: second moment of a standard normal") {
  const RunResult r = run("oracle --mu 0 --var 1 --fn square -n 200000 --seed 3");
  CHECK(r.exit_code == 0);
  std::istringstream is(r.out);
  std::string label;
  double mean = 0.0, se = 0.0;
  is >> label >> mean;
  CHECK(label == "mean");
  is >> label >> se;
  CHECK(label == "se");
  CHECK(std::abs(mean - 1.0) < 4.0 * se);
  CHECK(r.out.find("mt19937_64/splitmix64") != std::string::npos);
}

TEST_CASE("train / predict / crossval / gradcheck end to end") {
  TempFile csv("cli_e2e.csv"), ckpt("cli_e2e_ckpt.json"), preds("cli_e2e_preds.csv"),
      metrics("cli_e2e_metrics.csv"), trace("cli_e2e_trace.csv");
  write_classification_csv(csv.path);
  const std::string common =
      " --data " + csv.path + " --target y --task classify -K 6 -M 5 --link-mode point";

  const RunResult t = run("train" + common + " --iters 40 --seed 3 --out " + ckpt.path +
                          " --trace " + trace.path);
  CHECK(t.exit_code == 0);
  const Checkpoint loaded = load_checkpoint(ckpt.path);
  CHECK(loaded.task == "classify");
  CHECK(loaded.model.M() == 5);
  CHECK(loaded.link.size() == 6);

  // trace has the header and one row per step
  std::ifstream tr(trace.path);
  std::string line;
  REQUIRE(std::getline(tr, line));
  CHECK(line == "step,elbo,grad_norm");
  int rows = 0;
  while (std::getline(tr, line)) ++rows;
  CHECK(rows == 40);

  const RunResult p =
      run("predict --model " + ckpt.path + " --data " + csv.path + " --target y --out " +
          preds.path);
  CHECK(p.exit_code == 0);
  std::ifstream pf(preds.path);
  REQUIRE(std::getline(pf, line));
  CHECK(line == "row,mean,log_density,class_prob");
  rows = 0;
  while (std::getline(pf, line)) ++rows;
  CHECK(rows == 60);

  const RunResult cv = run("crossval" + common + " --iters 25 --folds 3 --seed 5 --out " +
                           metrics.path);
  CHECK(cv.exit_code == 0);
  CHECK(cv.out.find("f1:") != std::string::npos);
  CHECK(cv.out.find("log_like:") != std::string::npos);
  std::ifstream mf(metrics.path);
  REQUIRE(std::getline(mf, line));
  CHECK(line == "fold,metric,value");
  int fold_rows = 0, summary_rows = 0;
  while (std::getline(mf, line)) {
    if (line.rfind("mean,", 0) == 0 || line.rfind("sd,", 0) == 0) {
      ++summary_rows;
    } else {
      ++fold_rows;
    }
  }
  CHECK(fold_rows == 6);    // 3 folds x 2 metrics
  CHECK(summary_rows == 4);  // mean+sd per metric

  // same seed reruns bit-identical (summary and metrics file alike)
  TempFile metrics2("cli_e2e_metrics2.csv");
  const RunResult cv2 = run("crossval" + common + " --iters 25 --folds 3 --seed 5 --out " +
                            metrics2.path);
  CHECK(cv2.out == cv.out);
  CHECK(slurp(metrics2.path) == slurp(metrics.path));

  const RunResult gc = run("gradcheck" + common + " --seed 2");
  CHECK(gc.exit_code == 0);
  CHECK(gc.out.find("gradcheck passed") != std::string::npos);
}
