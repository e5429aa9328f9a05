#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "marginlab/errors.hpp"
#include "marginlab/harness.hpp"
#include "marginlab/report.hpp"

using namespace marginlab;

namespace {

ExperimentSpec small_spec() {
  ExperimentSpec spec;
  spec.params.d = 96;
  spec.params.n = 24;
  spec.params.k = 4;
  spec.params.gamma = 0.2;
  spec.params.seed = 41;
  spec.m = 2;
  spec.alpha = 0.5;
  spec.mc_trials = 400;
  spec.epsilon = 0.05;
  spec.repeats = 2;
  return spec;
}

bool same_result_modulo_time(const ExperimentResult& a, const ExperimentResult& b) {
  return a.cell_index == b.cell_index && a.repeat == b.repeat && a.d == b.d && a.n == b.n &&
         a.k == b.k && a.gamma == b.gamma && a.m == b.m && a.alpha == b.alpha && a.eta == b.eta &&
         a.seed == b.seed && a.converged == b.converged && a.T == b.T &&
         a.train_loss == b.train_loss && a.w_star_norm == b.w_star_norm &&
         a.margin_ratio == b.margin_ratio && a.A_min == b.A_min && a.A_lin == b.A_lin &&
         a.Z_frobenius == b.Z_frobenius && a.z_lin_norm == b.z_lin_norm &&
         a.test_error == b.test_error && a.test_stderr == b.test_stderr &&
         a.outcome == b.outcome;
}

std::string drop_last_column(const std::string& csv) {
  std::istringstream in(csv);
  std::ostringstream out;
  std::string line;
  while (std::getline(in, line)) {
    const auto pos = line.rfind(',');
    out << line.substr(0, pos) << '\n';
  }
  return out.str();
}

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    path = std::filesystem::temp_directory_path() /
           ("marginlab_test_" + std::to_string(std::rand()));
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
};

}  // namespace

TEST_CASE("seed derivation keeps the base slot and separates the rest") {
  CHECK(derive_seed(123, 0, 0) == 123);
  std::set<std::uint64_t> seen;
  for (long long cell = 0; cell < 8; ++cell) {
    for (int rep = 0; rep < 8; ++rep) seen.insert(derive_seed(123, cell, rep));
  }
  CHECK(seen.size() == 64);
  CHECK(derive_seed(124, 1, 1) != derive_seed(123, 1, 1));
}

TEST_CASE("a single run fills every field consistently") {
  const ExperimentSpec spec = small_spec();
  const ExperimentResult r = run_single(spec, 0, 0);
  CHECK(r.d == spec.params.d);
  CHECK(r.n == spec.params.n);
  CHECK(r.k == spec.params.k);
  CHECK(r.gamma == spec.params.gamma);
  CHECK(r.m == spec.m);
  CHECK(r.alpha == spec.alpha);
  CHECK(r.seed == spec.params.seed);
  CHECK(r.eta > 0.0);
  CHECK(r.converged);
  CHECK(r.T > 0);
  CHECK(r.train_loss == 0.0);
  CHECK(r.w_star_norm > 0.0);
  CHECK(r.margin_ratio > 0.0);
  CHECK(r.kkt_residual <= 1e-8);
  CHECK(r.wall_time_s > 0.0);

  ErrorEstimate est;
  est.estimate = r.test_error;
  est.std_error = r.test_stderr;
  est.trials = spec.mc_trials;
  CHECK(r.outcome == classify_outcome(r.train_loss, est, spec.epsilon));
}

TEST_CASE("identical runs agree bit for bit apart from the clock") {
  const ExperimentSpec spec = small_spec();
  const ExperimentResult a = run_single(spec, 0, 0);
  const ExperimentResult b = run_single(spec, 0, 0);
  CHECK(same_result_modulo_time(a, b));
}

TEST_CASE("repeats consume distinct derived seeds") {
  const ExperimentSpec spec = small_spec();
  const auto results = run_experiment(spec);
  REQUIRE(results.size() == 2);
  CHECK(results[0].seed == spec.params.seed);
  CHECK(results[1].seed == derive_seed(spec.params.seed, 0, 1));
  CHECK(results[0].seed != results[1].seed);
  CHECK(results[0].w_star_norm != results[1].w_star_norm);
}

TEST_CASE("artifacts are written when requested") {
  TempDir tmp;
  ExperimentSpec spec = small_spec();
  spec.repeats = 1;
  run_single(spec, 0, 0, tmp.path.string());
  const auto dir = tmp.path / "cell_0_rep_0";
  for (const char* name :
       {"dataset.json", "weights.json", "trace.jsonl", "maxmargin.json", "snr.json",
        "estimate.json"}) {
    INFO(name);
    CHECK(std::filesystem::exists(dir / name));
  }
}

TEST_CASE("cell indexing is row major over the canonical axis order") {
  SweepSpec sweep;
  sweep.base = small_spec();
  sweep.grid["d"] = {64, 96};
  sweep.grid["gamma"] = {0.1, 0.2, 0.3};
  CHECK(sweep_cell_count(sweep) == 6);
  // gamma is the later axis, so it varies fastest.
  CHECK(cell_spec(sweep, 0).params.d == 64);
  CHECK(cell_spec(sweep, 0).params.gamma == 0.1);
  CHECK(cell_spec(sweep, 2).params.d == 64);
  CHECK(cell_spec(sweep, 2).params.gamma == 0.3);
  CHECK(cell_spec(sweep, 3).params.d == 96);
  CHECK(cell_spec(sweep, 3).params.gamma == 0.1);
  CHECK_THROWS_AS(cell_spec(sweep, 6), ParameterError);

  sweep.max_cells = 5;
  CHECK_THROWS_AS(sweep_cell_count(sweep), ParameterError);

  sweep.max_cells = 4096;
  sweep.grid["gamma"] = {};
  CHECK_THROWS_AS(sweep_cell_count(sweep), ParameterError);
  sweep.grid.erase("gamma");
  sweep.grid["width"] = {1, 2};
  CHECK_THROWS_AS(sweep_cell_count(sweep), ParameterError);
}

TEST_CASE("sweeps are complete, sorted and schedule independent") {
  SweepSpec sweep;
  sweep.base = small_spec();
  sweep.base.repeats = 2;
  sweep.base.mc_trials = 200;
  sweep.grid["gamma"] = {0.15, 0.3};
  sweep.grid["n"] = {16, 24};
  sweep.parallelism = 3;

  const SweepTable parallel = run_sweep(sweep, "");
  REQUIRE(parallel.rows.size() == 8);
  for (std::size_t i = 0; i < parallel.rows.size(); ++i) {
    CHECK(parallel.rows[i].cell_index == static_cast<long long>(i / 2));
    CHECK(parallel.rows[i].repeat == static_cast<int>(i % 2));
  }

  sweep.parallelism = 1;
  const SweepTable serial = run_sweep(sweep, "");
  REQUIRE(serial.rows.size() == 8);
  for (std::size_t i = 0; i < 8; ++i) {
    CHECK(same_result_modulo_time(parallel.rows[i], serial.rows[i]));
  }
}

TEST_CASE("a finished checkpoint resumes without recomputation") {
  TempDir tmp;
  SweepSpec sweep;
  sweep.base = small_spec();
  sweep.base.repeats = 1;
  sweep.base.mc_trials = 200;
  sweep.grid["gamma"] = {0.15, 0.3};
  const std::string checkpoint = (tmp.path / "sweep.checkpoint.jsonl").string();

  const SweepTable first = run_sweep(sweep, checkpoint);
  REQUIRE(first.rows.size() == 2);

  // Resume restores wall times verbatim, so the tables match bit for bit.
  const SweepTable resumed = run_sweep(sweep, checkpoint);
  CHECK(table_to_csv(resumed.rows) == table_to_csv(first.rows));

  // A checkpoint from a different sweep is rejected outright.
  sweep.grid["gamma"] = {0.15, 0.35};
  CHECK_THROWS_AS(run_sweep(sweep, checkpoint), ParameterError);
}

TEST_CASE("a truncated checkpoint reruns only the missing rows") {
  TempDir tmp;
  SweepSpec sweep;
  sweep.base = small_spec();
  sweep.base.repeats = 1;
  sweep.base.mc_trials = 200;
  sweep.grid["gamma"] = {0.15, 0.3};
  const std::string checkpoint = (tmp.path / "sweep.checkpoint.jsonl").string();

  const SweepTable full = run_sweep(sweep, checkpoint);

  // Drop the final line to fake an interrupted sweep.
  std::ifstream in(checkpoint);
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) lines.push_back(line);
  in.close();
  REQUIRE(lines.size() == 3);
  std::ofstream out(checkpoint, std::ios::trunc);
  out << lines[0] << "\n" << lines[1] << "\n";
  out.close();

  const SweepTable resumed = run_sweep(sweep, checkpoint);
  REQUIRE(resumed.rows.size() == 2);
  CHECK(same_result_modulo_time(resumed.rows[0], full.rows[0]));
  CHECK(same_result_modulo_time(resumed.rows[1], full.rows[1]));
  CHECK(resumed.rows[0].wall_time_s == full.rows[0].wall_time_s);
}

TEST_CASE("results survive the JSON round trip") {
  const ExperimentResult r = run_single(small_spec(), 2, 1);
  const ExperimentResult back = experiment_result_from_json(experiment_result_to_json(r));
  CHECK(same_result_modulo_time(r, back));
  CHECK(back.wall_time_s == r.wall_time_s);
  CHECK(back.kkt_residual == r.kkt_residual);
}

TEST_CASE("specs parse from JSON with defaults") {
  const std::string text = R"({"d": 128, "n": 32, "k": 4, "gamma": 0.25, "seed": 9})";
  const ExperimentSpec spec = experiment_spec_from_json(text);
  CHECK(spec.params.d == 128);
  CHECK(spec.params.seed == 9);
  CHECK(spec.m == 4);
  CHECK(spec.alpha == 0.5);
  CHECK(spec.mc_trials == 20000);
  CHECK(spec.repeats == 1);

  const std::string sweep_text = R"({
    "fixed": {"d": 64, "n": 16, "k": 2, "gamma": 0.2, "mc_trials": 200},
    "grid": {"gamma": [0.1, 0.2], "m": [1, 2]},
    "parallelism": 2, "output_path": "out.csv"})";
  const SweepSpec sweep = sweep_spec_from_json(sweep_text);
  CHECK(sweep.base.params.d == 64);
  CHECK(sweep.grid.at("gamma").size() == 2);
  CHECK(sweep.parallelism == 2);
  CHECK(sweep.output_path == "out.csv");
  CHECK(sweep_cell_count(sweep) == 4);

  // A swept axis may be omitted from the fixed block entirely.
  const std::string sparse_text = R"({
    "fixed": {"d": 64, "n": 16, "k": 2, "seed": 5},
    "grid": {"gamma": [0.1, 0.3], "alpha": [0.25, 0.5]}})";
  const SweepSpec sparse = sweep_spec_from_json(sparse_text);
  CHECK(sparse.base.params.gamma == 0.1);
  CHECK(sparse.base.alpha == 0.25);
  CHECK(sweep_cell_count(sparse) == 4);
  CHECK(cell_spec(sparse, 3).params.gamma == 0.3);
  CHECK(cell_spec(sparse, 3).alpha == 0.5);

  CHECK_THROWS(experiment_spec_from_json(R"({"d": 128})"));
  CHECK_THROWS_AS(
      experiment_spec_from_json(
          R"({"d": 64, "n": 16, "k": 2, "gamma": 0.2, "train": {"init_mode": "Sphere"}})"),
      ParameterError);
}

TEST_CASE("invalid experiment specs are rejected before running") {
  ExperimentSpec spec = small_spec();
  spec.mc_trials = 50;
  CHECK_THROWS_AS(run_single(spec, 0, 0), ParameterError);
  spec = small_spec();
  spec.epsilon = 0.5;
  CHECK_THROWS_AS(run_single(spec, 0, 0), ParameterError);
  spec = small_spec();
  spec.repeats = 0;
  CHECK_THROWS_AS(run_experiment(spec), ParameterError);
}

TEST_CASE("the csv schema is frozen") {
  const std::string csv = table_to_csv({});
  CHECK(csv ==
        "cell_index,repeat,d,n,k,gamma,m,alpha,eta,seed,converged,T,train_loss,w_star_norm,"
        "margin_ratio,A_min,A_lin,Z_frobenius,z_lin_norm,test_error,test_stderr,outcome,"
        "wall_time_s\n");
}

TEST_CASE("csv rows round trip exactly") {
  const ExperimentSpec spec = small_spec();
  std::vector<ExperimentResult> rows;
  rows.push_back(run_single(spec, 0, 0));
  rows.push_back(run_single(spec, 1, 1));
  const std::string csv = table_to_csv(rows);
  const auto back = table_from_csv(csv);
  REQUIRE(back.size() == 2);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(same_result_modulo_time(rows[i], back[i]));
    CHECK(back[i].wall_time_s == rows[i].wall_time_s);
  }
  CHECK(table_to_csv(back) == csv);

  CHECK_THROWS_AS(table_from_csv("bogus,header\n1,2\n"), ParameterError);
}

TEST_CASE("rerunning a sweep reproduces the csv except for the clock") {
  SweepSpec sweep;
  sweep.base = small_spec();
  sweep.base.repeats = 1;
  sweep.base.mc_trials = 200;
  sweep.grid["gamma"] = {0.15, 0.3};
  sweep.parallelism = 2;
  const std::string a = table_to_csv(run_sweep(sweep, "").rows);
  const std::string b = table_to_csv(run_sweep(sweep, "").rows);
  CHECK(drop_last_column(a) == drop_last_column(b));
}

TEST_CASE("the heatmap needs exactly two swept axes") {
  SweepSpec sweep;
  sweep.base = small_spec();
  sweep.base.repeats = 1;
  sweep.base.mc_trials = 200;
  sweep.grid["gamma"] = {0.1, 0.3};
  sweep.grid["m"] = {1, 2};
  const SweepTable table = run_sweep(sweep, "");

  const std::string svg = heatmap_svg(table.rows, 0.05);
  CHECK(svg.find("<svg") != std::string::npos);
  CHECK(svg.find("gamma") != std::string::npos);
  CHECK(svg.find("error = 1/8") != std::string::npos);

  CHECK_THROWS_AS(heatmap_svg({table.rows[0]}, 0.05), ParameterError);
  CHECK_THROWS_AS(heatmap_svg({}, 0.05), ParameterError);
}

TEST_CASE("the summary counts rows and outcomes") {
  SweepSpec sweep;
  sweep.base = small_spec();
  sweep.base.repeats = 2;
  sweep.base.mc_trials = 200;
  sweep.grid["gamma"] = {0.15, 0.3};
  const SweepTable table = run_sweep(sweep, "");
  const std::string text = summary_text(table.rows);
  CHECK(text.find("runs: 4 over 2 cells") != std::string::npos);
  CHECK(text.find("converged") != std::string::npos);
  CHECK(summary_text({}) == "no rows\n");
}
