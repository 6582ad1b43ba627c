#include <doctest.h>

#include <json.hpp>
#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include "mlens/experiments.hpp"

using namespace mlens;

namespace {

int run_tool(const std::string& args, const std::string& stdout_file = "") {
  std::string cmd = std::string("'") + TOOL_PATH + "' " + args;
  cmd += stdout_file.empty() ? " > /dev/null 2> /dev/null" : (" > '" + stdout_file + "' 2> /dev/null");
  const int status = std::system(cmd.c_str());
  REQUIRE(WIFEXITED(status));
  return WEXITSTATUS(status);
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Small separable dataset written to the CSV interchange format so the tool
// can load it by path.
std::string write_csv_dataset(const std::string& path, int n, std::uint64_t seed) {
  Rng rng(derive_seed(seed, "cli-ds"));
  Dataset ds;
  ds.name = "clids";
  ds.features.resize(n, 2);
  ds.labels.resize(n, 2);
  for (int i = 0; i < n; ++i) {
    ds.features(i, 0) = 2.0 * rng_double(rng) - 1.0;
    ds.features(i, 1) = 2.0 * rng_double(rng) - 1.0;
    ds.labels(i, 0) = ds.features(i, 0) > 0.0 ? 1 : 0;
    ds.labels(i, 1) = ds.features(i, 0) + ds.features(i, 1) > 0.0 ? 1 : 0;
  }
  ds.feature_names = {"u", "v"};
  ds.feature_numeric_origin = {true, true};
  ds.label_names = {"a", "b"};
  write_dataset_csv(ds, path);
  return path;
}

}  // namespace

TEST_CASE("tool: help and usage errors") {
  CHECK(run_tool("--help") == 0);
  CHECK(run_tool("") == 2);                 // a subcommand is required
  CHECK(run_tool("frobnicate") == 2);       // unknown subcommand
  CHECK(run_tool("toy --m 0") == 2);        // positive check fails in the parser
  CHECK(run_tool("run --dataset x --layout sideways") == 2);
}

TEST_CASE("tool: toy simulation output") {
  const std::string out = "/tmp/mlens_cli_toy.txt";
  CHECK(run_tool("toy --m 5000 --seed 1", out) == 0);
  const std::string text = slurp(out);
  CHECK(text.find("label-wise vote:") != std::string::npos);
  CHECK(text.find("mode vote:") != std::string::npos);
  CHECK(text.find("truth: subset loss of (0,0,0) = 0.75") != std::string::npos);
  CHECK(text.find("hamming loss of (1,1,1) = 0.44") != std::string::npos);  // 7/16

  CHECK(run_tool("toy --m 2000 --trials 3 --seed 4", out) == 0);
  const std::string multi = slurp(out);
  CHECK(multi.find("trials: 3") != std::string::npos);
  CHECK(multi.find("/3") != std::string::npos);
  std::remove(out.c_str());
}

TEST_CASE("tool: configuration and data errors map to distinct exit codes") {
  CHECK(run_tool("run --dataset x --strategies warp") == 2);
  CHECK(run_tool("run --dataset x --set bogus_key=1") == 2);
  CHECK(run_tool("run --dataset no_such_ds --data-dir /tmp/mlens_no_dir") == 3);
  CHECK(run_tool("run") == 2);  // no datasets at all
  CHECK(run_tool("convert --in /tmp/nothing.arff --out /tmp/x.csv") == 2);  // needs --xml or --labels
  CHECK(run_tool("ranks /tmp/mlens_no_such_results.csv") == 3);
}

TEST_CASE("tool: run grid end to end on a CSV dataset") {
  const std::string csv = write_csv_dataset("/tmp/mlens_cli_ds.csv", 24, 3);
  const std::string out_dir = "/tmp/mlens_cli_out";
  const std::string console = "/tmp/mlens_cli_run.txt";

  const std::string args = "run --dataset " + csv +
                           " --ensemble emodt --m 3 --folds 2 --seed 7"
                           " --strategies gmv,ctp --losses hamming --out " +
                           out_dir;
  CHECK(run_tool(args, console) == 0);
  const std::string text = slurp(console);
  CHECK(text.find("mlens_cli_ds / emodt (M=3, 2-fold, seed 7)") != std::string::npos);
  CHECK(text.find("hamming %") != std::string::npos);
  CHECK(text.find("gmv") != std::string::npos);

  // results.csv: header + 2 strategies x 1 loss x 2 folds.
  std::ifstream results(out_dir + "/results.csv");
  REQUIRE(results.good());
  std::string line;
  std::getline(results, line);
  CHECK(line == "dataset,ensemble,strategy,loss,fold,score");
  int rows = 0;
  while (std::getline(results, line))
    if (!line.empty()) ++rows;
  CHECK(rows == 4);

  {
    std::ifstream in(out_dir + "/summary.json");
    REQUIRE(in.good());
    const nlohmann::json j = nlohmann::json::parse(in);
    CHECK(j.at("spec").at("m") == 3);
    CHECK(j.at("cells").size() == 2);
  }
  CHECK(slurp(out_dir + "/table.md").find("## emodt / hamming") != std::string::npos);

  // ranks over the produced results file.
  const std::string ranks_out = "/tmp/mlens_cli_ranks.json";
  CHECK(run_tool("ranks " + out_dir + "/results.csv --out " + ranks_out, console) == 0);
  const nlohmann::json ranks = nlohmann::json::parse(slurp(ranks_out));
  REQUIRE(ranks.size() == 1);
  CHECK(ranks[0].at("ensemble") == "emodt");
  // gmv and ctp coincide under hamming, so they tie at rank 1.5.
  CHECK(ranks[0].at("mean_ranks").at("gmv") == 1.5);
  CHECK(ranks[0].at("mean_ranks").at("ctp") == 1.5);
  CHECK(slurp(console) == slurp(ranks_out));
  std::remove(ranks_out.c_str());
  std::remove(console.c_str());
}

TEST_CASE("tool: run reports honest failure when every cell is missing") {
  const std::string csv = write_csv_dataset("/tmp/mlens_cli_small.csv", 4, 5);
  // 10 folds cannot be carved out of 4 rows: the grid completes with missing
  // cells and the command exits with a runtime failure, not silence.
  CHECK(run_tool("run --dataset " + csv + " --ensemble emodt --m 2 --folds 10 --out /tmp/mlens_cli_out2") == 1);
  CHECK(slurp("/tmp/mlens_cli_out2/table.md").find("—") != std::string::npos);
  std::remove(csv.c_str());
}

TEST_CASE("tool: sweep sizes") {
  const std::string csv = write_csv_dataset("/tmp/mlens_cli_ds.csv", 24, 3);
  const std::string out_dir = "/tmp/mlens_cli_sweep";
  const std::string base = "sweep --dataset " + csv + " --ensemble emodt --folds 2 --seed 7"
                           " --strategies ptc-mode --losses subset --out " + out_dir;
  CHECK(run_tool(base + " --sizes 1,3") == 0);
  std::ifstream in(out_dir + "/sweep.csv");
  REQUIRE(in.good());
  std::string header;
  std::getline(in, header);
  CHECK(header == "dataset,ensemble,strategy,loss,size,score");
  int rows = 0;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) ++rows;
  CHECK(rows == 2);

  CHECK(run_tool(base + " --sizes 3,1") == 2);     // not ascending
  CHECK(run_tool(base + " --sizes banana") == 2);  // not an integer
  std::remove(csv.c_str());
}

TEST_CASE("tool: ranks from hand-written results") {
  const std::string file = "/tmp/mlens_cli_handranks.csv";
  {
    std::ofstream out(file);
    out << "dataset,ensemble,strategy,loss,fold,score\n";
    out << "dsa,ebr,gmv,hamming,0,10\n";
    out << "dsa,ebr,bmv,hamming,0,20\n";
    out << "dsb,ebr,gmv,hamming,0,30\n";
    out << "dsb,ebr,bmv,hamming,0,40\n";
  }
  const std::string out = "/tmp/mlens_cli_handranks.json";
  CHECK(run_tool("ranks " + file, out) == 0);
  const nlohmann::json j = nlohmann::json::parse(slurp(out));
  REQUIRE(j.size() == 1);
  CHECK(j[0].at("n") == 2);
  CHECK(j[0].at("mean_ranks").at("gmv") == 1.0);  // lower hamming is better
  CHECK(j[0].at("mean_ranks").at("bmv") == 2.0);
  CHECK(j[0].contains("friedman"));
  CHECK(j[0].contains("nemenyi_cd"));

  {
    std::ofstream bad(file);
    bad << "wrong,header\n";
  }
  CHECK(run_tool("ranks " + file) == 3);
  std::remove(file.c_str());
  std::remove(out.c_str());
}

TEST_CASE("tool: aggregate-file applies strategies to external matrices") {
  const std::string a = "/tmp/mlens_member_a.csv";
  const std::string b = "/tmp/mlens_member_b.csv";
  {
    std::ofstream fa(a);
    fa << "0.9,0.2\n0.4,0.7\n0.1,0.55\n";
    std::ofstream fb(b);
    fb << "0.8,0.3\n0.45,0.65\n0.2,0.5\n";
  }
  const std::string out1 = "/tmp/mlens_agg_ctp.csv";
  const std::string out2 = "/tmp/mlens_agg_gmv.csv";
  CHECK(run_tool("aggregate-file " + a + " " + b + " --strategy ctp --loss hamming --out " + out1) == 0);
  CHECK(run_tool("aggregate-file " + a + " " + b + " --strategy gmv --out " + out2) == 0);
  CHECK(slurp(out1) == "1,0\n0,1\n0,1\n");
  CHECK(slurp(out1) == slurp(out2));  // gmv coincides with ctp under hamming

  {
    std::ofstream fb(b);
    fb << "0.8,1.2\n0.45,0.65\n0.2,0.5\n";  // out-of-range probability
  }
  CHECK(run_tool("aggregate-file " + a + " " + b + " --strategy gmv --out " + out2) == 3);
  {
    std::ofstream fb(b);
    fb << "0.8,0.3\n";  // shape mismatch
  }
  CHECK(run_tool("aggregate-file " + a + " " + b + " --strategy gmv --out " + out2) == 3);
  CHECK(run_tool("aggregate-file " + a + " --strategy warp --out " + out2) == 2);
  std::remove(a.c_str());
  std::remove(b.c_str());
  std::remove(out1.c_str());
  std::remove(out2.c_str());
}

TEST_CASE("tool: convert round trip preserves the dataset") {
  const std::string fixtures = TEST_FIXTURES_DIR;
  const std::string out_csv = "/tmp/mlens_cli_convert.csv";
  CHECK(run_tool("convert --in " + fixtures + "/tiny.arff --xml " + fixtures + "/tiny.xml --out " + out_csv) == 0);

  const Dataset direct = parse_arff(fixtures + "/tiny.arff", fixtures + "/tiny.xml");
  const Dataset round = read_dataset_csv(out_csv, "tiny");
  REQUIRE(round.rows() == direct.rows());
  REQUIRE(round.features.cols() == direct.features.cols());
  CHECK(round.label_names == direct.label_names);
  CHECK(round.feature_names == direct.feature_names);
  CHECK(round.feature_numeric_origin == direct.feature_numeric_origin);
  CHECK((round.labels.array() == direct.labels.array()).all());
  for (Eigen::Index i = 0; i < direct.rows(); ++i)
    for (Eigen::Index j = 0; j < direct.features.cols(); ++j) {
      if (std::isnan(direct.features(i, j)))
        CHECK(std::isnan(round.features(i, j)));
      else
        CHECK(round.features(i, j) == direct.features(i, j));
    }

  // CSV input converts too (pass-through path).
  CHECK(run_tool("convert --in " + out_csv + " --out /tmp/mlens_cli_convert2.csv") == 0);
  CHECK(slurp("/tmp/mlens_cli_convert2.csv") == slurp(out_csv));
  std::remove(out_csv.c_str());
  std::remove("/tmp/mlens_cli_convert2.csv");
}
