#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "rocsurv/model_io.hpp"
#include "support.hpp"

using namespace rocsurv;
namespace fs = std::filesystem;

namespace {

const fs::path& workdir() {
  static const fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / ("rocsurv_cli_" + std::to_string(::getpid()));
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

std::string path_of(const std::string& name) { return (workdir() / name).string(); }

int run(const std::string& args, const std::string& log = "cli.log") {
  const std::string command = std::string(ROCSURV_CLI) + " " + args + " > " + path_of(log) + " 2>&1";
  const int status = std::system(command.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::string& path, const std::string& text) { std::ofstream(path) << text; }

struct PredictionRow {
  std::string id;
  double t;
  double survival;
};

std::vector<PredictionRow> read_predictions(const std::string& path) {
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  std::vector<PredictionRow> rows;
  while (std::getline(in, line)) {
    std::stringstream ss(line);
    std::string id, t, s;
    std::getline(ss, id, ',');
    std::getline(ss, t, ',');
    std::getline(ss, s, ',');
    rows.push_back({id, std::stod(t), std::stod(s)});
  }
  return rows;
}

void simulate_once() {
  static bool done = false;
  if (done) return;
  REQUIRE(run("simulate --scenario VI --n 150 --censoring 0.25 --seed 7 --out " + path_of("train.csv")) == 0);
  REQUIRE(run("simulate --scenario VI --n 20 --censoring 0 --seed 8 --out " + path_of("new.csv")) == 0);
  done = true;
}

}  // namespace

TEST_CASE("usage errors exit with code 1") {
  CHECK(run("") == 1);
  CHECK(run("fit-tree --data x.csv") == 1);
  CHECK(run("no-such-command") == 1);
  CHECK(run("fit-tree --data x.csv --out y.json --seed 1 --q 0") == 1);
}

TEST_CASE("unreadable or malformed data exits with code 2 and writes no model") {
  CHECK(run("fit-tree --data " + path_of("missing.csv") + " --out " + path_of("m.json") + " --seed 1") == 2);
  write_text(path_of("bad.csv"), "id,tstart,tstop,status,z1\na,0,1,0,1\na,2,3,1,2\n");
  CHECK(run("fit-tree --data " + path_of("bad.csv") + " --out " + path_of("m.json") + " --seed 1") == 2);
  CHECK_FALSE(fs::exists(path_of("m.json")));
}

TEST_CASE("simulate, fit-tree and predict agree with the library") {
  simulate_once();
  REQUIRE(run("fit-tree --data " + path_of("train.csv") + " --out " + path_of("tree.json") + " --seed 3 --folds 5",
              "fit.log") == 0);
  CHECK(slurp(path_of("fit.log")).find("ICON") != std::string::npos);
  for (const auto& entry : fs::directory_iterator(workdir())) {
    CHECK(entry.path().filename().string().find(".tmp") == std::string::npos);
  }
  REQUIRE(run("predict --model " + path_of("tree.json") + " --data " + path_of("new.csv") +
              " --times 0,0.5,1,2,4 --out " + path_of("pred.csv")) == 0);
  const auto rows = read_predictions(path_of("pred.csv"));
  REQUIRE(rows.size() == 100);
  const auto tree = std::get<RocTree>(load_model(path_of("tree.json")));
  const Dataset fresh = read_dataset_file(path_of("new.csv"));
  for (std::size_t j = 0; j < fresh.size(); ++j) {
    const std::vector<double> times{0, 0.5, 1, 2, 4};
    const auto expected = survival_curve(tree, fresh.subjects[j], times);
    for (std::size_t k = 0; k < times.size(); ++k) {
      const auto& row = rows[j * 5 + k];
      CHECK(row.id == fresh.subjects[j].id);
      CHECK(row.survival == expected[k]);
      if (k == 0) CHECK(row.survival == 1.0);
      if (k > 0) CHECK(row.survival <= rows[j * 5 + k - 1].survival);
    }
  }
}

TEST_CASE("the same seed writes byte-identical model files") {
  simulate_once();
  const std::string base = "fit-forest --data " + path_of("train.csv") + " --seed 5 --trees 10 --threads 2 --out ";
  REQUIRE(run(base + path_of("f1.json")) == 0);
  REQUIRE(run(base + path_of("f2.json")) == 0);
  CHECK(slurp(path_of("f1.json")) == slurp(path_of("f2.json")));
  const std::string tree = "fit-tree --data " + path_of("train.csv") + " --seed 5 --folds 4 --out ";
  REQUIRE(run(tree + path_of("t1.json")) == 0);
  REQUIRE(run(tree + path_of("t2.json")) == 0);
  CHECK(slurp(path_of("t1.json")) == slurp(path_of("t2.json")));
}

TEST_CASE("a one-tree full-sample forest predicts like its own tree") {
  simulate_once();
  REQUIRE(run("fit-forest --data " + path_of("train.csv") + " --seed 2 --trees 1 --mtry 20 --mode full_sample --out " +
              path_of("one.json")) == 0);
  REQUIRE(run("predict --model " + path_of("one.json") + " --data " + path_of("new.csv") + " --times 0,1,2,3 --out " +
              path_of("one.csv")) == 0);
  const auto forest = std::get<ForestModel>(load_model(path_of("one.json")));
  const RocTree tree = finalize_tree(forest.trees[0].partition, *forest.data, forest.policy);
  const Dataset fresh = read_dataset_file(path_of("new.csv"));
  const auto rows = read_predictions(path_of("one.csv"));
  const std::vector<double> times{0, 1, 2, 3};
  for (std::size_t j = 0; j < fresh.size(); ++j) {
    const auto expected = survival_curve(tree, fresh.subjects[j], times);
    for (std::size_t k = 0; k < times.size(); ++k) CHECK(rows[j * 4 + k].survival == expected[k]);
  }
}

TEST_CASE("prediction data with the wrong dimension is a data error naming p") {
  simulate_once();
  REQUIRE(run("fit-tree --data " + path_of("train.csv") + " --out " + path_of("tree_dim.json") + " --seed 3 --folds 3") == 0);
  write_text(path_of("narrow.csv"), "id,tstart,tstop,status,z1\na,0,1,0,0.5\n");
  CHECK(run("predict --model " + path_of("tree_dim.json") + " --data " + path_of("narrow.csv") + " --times 0.5",
            "dim.log") == 2);
  CHECK(slurp(path_of("dim.log")).find("p = 20") != std::string::npos);
}

TEST_CASE("config file values are overridden by flags") {
  simulate_once();
  write_text(path_of("config.json"), "{\"q\": 5, \"n_min\": 30, \"folds\": 3}");
  REQUIRE(run("fit-tree --config " + path_of("config.json") + " --data " + path_of("train.csv") + " --out " +
                  path_of("cfg.json") + " --seed 1 --q 10",
              "cfg.log") == 0);
  const std::string log = slurp(path_of("cfg.log"));
  CHECK(log.find("q=10") != std::string::npos);
  CHECK(log.find("n_min=30") != std::string::npos);
}

TEST_CASE("benchmark replicates are reproducible") {
  const std::string args = "benchmark --scenario I --n 100 --censoring 0.25 --replicates 1 --seed 4 --trees 10 "
                           "--new-subjects 50 --methods tree,forest,km --out ";
  REQUIRE(run(args + path_of("b1.csv")) == 0);
  REQUIRE(run(args + path_of("b2.csv")) == 0);
  const std::string a = slurp(path_of("b1.csv"));
  CHECK(a == slurp(path_of("b2.csv")));
  CHECK(a.rfind("scenario,n,censoring,method,criterion,replicate,iae,error", 0) == 0);
}

TEST_CASE("eval-icon rewards the true risk ordering") {
  simulate_once();
  const Dataset train = read_dataset_file(path_of("train.csv"));
  std::ofstream good(path_of("good.csv")), noise(path_of("noise.csv"));
  good << "id,score\n";
  noise << "id,score\n";
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (const auto& s : train.subjects) {
    good << s.id << ',' << -s.y << '\n';  // earlier failure = higher risk
    noise << s.id << ',' << u(rng) << '\n';
  }
  good.close();
  noise.close();
  REQUIRE(run("eval-icon --data " + path_of("train.csv") + " --predictions " + path_of("good.csv"), "good.log") == 0);
  REQUIRE(run("eval-icon --data " + path_of("train.csv") + " --predictions " + path_of("noise.csv"), "noise.log") == 0);
  auto icon_of = [](const std::string& log) {
    const auto at = log.find("ICON ");
    return std::stod(log.substr(at + 5));
  };
  CHECK(icon_of(slurp(path_of("good.log"))) > 0.9);
  CHECK(std::abs(icon_of(slurp(path_of("noise.log"))) - 0.5) < 0.15);
}
