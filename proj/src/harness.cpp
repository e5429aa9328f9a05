#include "marginlab/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "marginlab/errors.hpp"
#include "marginlab/maxmargin.hpp"
#include "marginlab/oracles.hpp"

namespace marginlab {

namespace {

void validate_spec(const ExperimentSpec& spec) {
  if (spec.mc_trials < 100) throw ParameterError("mc_trials must be >= 100");
  if (!(spec.epsilon > 0.0 && spec.epsilon < 0.5)) throw ParameterError("epsilon must lie in (0, 0.5)");
  if (spec.repeats < 1) throw ParameterError("repeats must be >= 1");
  if (spec.m < 1) throw ParameterError("m must be >= 1");
  if (!(spec.alpha > 0.0 && spec.alpha <= 1.0)) throw ParameterError("alpha must lie in (0, 1]");
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << content;
}

const std::vector<std::string> kAxisOrder = {"d", "n", "k", "gamma", "m", "alpha"};

double base_axis_value(const ExperimentSpec& base, const std::string& axis) {
  if (axis == "d") return base.params.d;
  if (axis == "n") return base.params.n;
  if (axis == "k") return base.params.k;
  if (axis == "gamma") return base.params.gamma;
  if (axis == "m") return base.m;
  return base.alpha;
}

void apply_axis_value(ExperimentSpec& spec, const std::string& axis, double value) {
  if (axis == "d") spec.params.d = static_cast<int>(value);
  else if (axis == "n") spec.params.n = static_cast<int>(value);
  else if (axis == "k") spec.params.k = static_cast<int>(value);
  else if (axis == "gamma") spec.params.gamma = value;
  else if (axis == "m") spec.m = static_cast<int>(value);
  else spec.alpha = value;
}

std::vector<std::vector<double>> axis_values(const SweepSpec& spec) {
  std::vector<std::vector<double>> values;
  for (const auto& axis : kAxisOrder) {
    const auto it = spec.grid.find(axis);
    if (it == spec.grid.end()) {
      values.push_back({base_axis_value(spec.base, axis)});
    } else {
      if (it->second.empty()) throw ParameterError("empty grid axis: " + axis);
      values.push_back(it->second);
    }
  }
  for (const auto& [axis, _] : spec.grid) {
    if (std::find(kAxisOrder.begin(), kAxisOrder.end(), axis) == kAxisOrder.end()) {
      throw ParameterError("unknown grid axis: " + axis);
    }
  }
  return values;
}

std::string sweep_fingerprint(const SweepSpec& spec);

}  // namespace

std::uint64_t derive_seed(std::uint64_t base, long long cell_index, int repeat) {
  if (cell_index == 0 && repeat == 0) return base;
  const std::uint64_t tag = 0xD1B54A32D192ED03ull * static_cast<std::uint64_t>(cell_index) +
                            0x8CB92BA72F3D8DD7ull * static_cast<std::uint64_t>(repeat + 1);
  return mix64(base ^ mix64(tag));
}

ExperimentResult run_single(const ExperimentSpec& spec, long long cell_index, int repeat,
                            const std::string& artifact_dir) {
  validate_spec(spec);
  const auto start = std::chrono::steady_clock::now();

  ExperimentSpec sub = spec;
  sub.params.seed = derive_seed(spec.params.seed, cell_index, repeat);
  sub.train.seed = sub.params.seed;

  const Dataset data = sample_dataset(sub.params);
  const MaxMarginSolution sol = solve_max_margin(data);
  // Rescale to min margin exactly 1 so the alignment trace uses a strictly
  // feasible separator (the solver certifies 1 - kkt_tol).
  const Eigen::VectorXd w_feasible = sol.w_star / sol.margins.minCoeff();

  auto [net, trace] = train(data, sub.m, sub.alpha, sub.train, w_feasible);
  const SnrReport report = snr_report(net, data.params.v, sol.norm);

  PhiloxRng mc_rng = substream(sub.params.seed, "mc");
  const ErrorEstimate est = mc_generalization_error(net, data.params, sub.mc_trials, mc_rng);
  const Outcome outcome = classify_outcome(trace.final_loss, est, sub.epsilon);

  ExperimentResult r;
  r.cell_index = cell_index;
  r.repeat = repeat;
  r.d = sub.params.d;
  r.n = sub.params.n;
  r.k = sub.params.k;
  r.gamma = sub.params.gamma;
  r.m = sub.m;
  r.alpha = sub.alpha;
  r.eta = trace.eta;
  r.seed = sub.params.seed;
  r.converged = trace.converged;
  r.T = trace.T;
  r.train_loss = trace.final_loss;
  r.w_star_norm = sol.norm;
  r.margin_ratio = report.margin_ratio.value();
  r.A_min = report.activations.A_min;
  r.A_lin = report.activations.A_lin;
  r.Z_frobenius = report.Z_frobenius;
  r.z_lin_norm = report.z_lin_norm;
  r.test_error = est.estimate;
  r.test_stderr = est.std_error;
  r.outcome = outcome;
  r.kkt_residual = sol.kkt_residual;
  r.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  if (!artifact_dir.empty()) {
    const std::filesystem::path dir =
        std::filesystem::path(artifact_dir) /
        ("cell_" + std::to_string(cell_index) + "_rep_" + std::to_string(repeat));
    std::filesystem::create_directories(dir);
    write_file(dir / "dataset.json", dataset_to_json(data));
    write_file(dir / "weights.json", weights_to_json(net));
    write_file(dir / "trace.jsonl", trace_to_jsonl(trace));
    write_file(dir / "maxmargin.json", maxmargin_to_json(sol));
    write_file(dir / "snr.json", snr_report_to_json(report));
    write_file(dir / "estimate.json", error_estimate_to_json(est));
  }
  return r;
}

std::vector<ExperimentResult> run_experiment(const ExperimentSpec& spec,
                                             const std::string& artifact_dir) {
  validate_spec(spec);
  std::vector<ExperimentResult> out;
  out.reserve(static_cast<std::size_t>(spec.repeats));
  for (int r = 0; r < spec.repeats; ++r) out.push_back(run_single(spec, 0, r, artifact_dir));
  return out;
}

long long sweep_cell_count(const SweepSpec& spec) {
  long long total = 1;
  for (const auto& vals : axis_values(spec)) {
    total *= static_cast<long long>(vals.size());
    if (total > spec.max_cells) throw ParameterError("sweep grid exceeds max_cells");
  }
  return total;
}

ExperimentSpec cell_spec(const SweepSpec& spec, long long cell_index) {
  const auto values = axis_values(spec);
  long long rem = cell_index;
  ExperimentSpec out = spec.base;
  for (int a = static_cast<int>(kAxisOrder.size()) - 1; a >= 0; --a) {
    const auto& vals = values[static_cast<std::size_t>(a)];
    const long long size = static_cast<long long>(vals.size());
    apply_axis_value(out, kAxisOrder[static_cast<std::size_t>(a)],
                     vals[static_cast<std::size_t>(rem % size)]);
    rem /= size;
  }
  if (rem != 0) throw ParameterError("cell index out of range");
  return out;
}

SweepTable run_sweep(const SweepSpec& spec, const std::string& checkpoint_path) {
  const long long cells = sweep_cell_count(spec);
  validate_spec(spec.base);
  const std::string fingerprint = sweep_fingerprint(spec);

  std::map<std::pair<long long, int>, ExperimentResult> done;
  const bool have_checkpoint = !checkpoint_path.empty();
  if (have_checkpoint && std::filesystem::exists(checkpoint_path)) {
    std::ifstream in(checkpoint_path);
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      if (first) {
        first = false;
        const auto j = nlohmann::json::parse(line);
        if (j.contains("sweep_fingerprint")) {
          if (j.at("sweep_fingerprint").get<std::string>() != fingerprint) {
            throw ParameterError("checkpoint belongs to a different sweep");
          }
          continue;
        }
      }
      const ExperimentResult r = experiment_result_from_json(line);
      done[{r.cell_index, r.repeat}] = r;
    }
  }

  std::ofstream checkpoint;
  std::mutex io_mutex;
  if (have_checkpoint) {
    const bool fresh = !std::filesystem::exists(checkpoint_path);
    checkpoint.open(checkpoint_path, std::ios::app);
    if (!checkpoint) throw std::runtime_error("cannot open checkpoint " + checkpoint_path);
    if (fresh) {
      nlohmann::json head;
      head["sweep_fingerprint"] = fingerprint;
      checkpoint << head.dump() << "\n" << std::flush;
    }
  }

  std::vector<long long> pending;
  for (long long c = 0; c < cells; ++c) {
    for (int r = 0; r < spec.base.repeats; ++r) {
      if (!done.count({c, r})) {
        pending.push_back(c);
        break;
      }
    }
  }

  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  const int workers = std::max(1, std::min<int>(spec.parallelism, static_cast<int>(pending.size())));

  auto work = [&]() {
    for (;;) {
      const std::size_t slot = next.fetch_add(1);
      if (slot >= pending.size()) return;
      const long long cell = pending[slot];
      try {
        const ExperimentSpec cs = cell_spec(spec, cell);
        for (int r = 0; r < spec.base.repeats; ++r) {
          {
            std::lock_guard<std::mutex> lock(io_mutex);
            if (done.count({cell, r})) continue;
          }
          ExperimentResult result = run_single(cs, cell, r);
          std::lock_guard<std::mutex> lock(io_mutex);
          done[{cell, r}] = result;
          if (have_checkpoint) checkpoint << experiment_result_to_json(result) << "\n" << std::flush;
        }
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };

  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> threads;
    threads.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) threads.emplace_back(work);
    for (auto& t : threads) t.join();
  }
  if (first_error) std::rethrow_exception(first_error);

  SweepTable table;
  table.spec = spec;
  table.rows.reserve(done.size());
  for (auto& [key, r] : done) table.rows.push_back(r);  // map iteration is already sorted
  return table;
}

static void spec_to_json(const ExperimentSpec& spec, nlohmann::json& j) {
  j["d"] = spec.params.d;
  j["n"] = spec.params.n;
  j["k"] = spec.params.k;
  j["gamma"] = spec.params.gamma;
  j["mode"] = to_string(spec.params.mode);
  j["seed"] = spec.params.seed;
  if (spec.params.v.size() > 0) {
    j["v"] = std::vector<double>(spec.params.v.data(), spec.params.v.data() + spec.params.v.size());
  }
  j["m"] = spec.m;
  j["alpha"] = spec.alpha;
  nlohmann::json t;
  t["eta"] = spec.train.eta;
  t["init_scale"] = spec.train.init_scale;
  t["init_mode"] = spec.train.init_mode == InitMode::Zero ? "Zero" : "UniformBall";
  t["max_iters"] = spec.train.max_iters;
  t["record_trace"] = spec.train.record_trace;
  j["train"] = t;
  j["mc_trials"] = spec.mc_trials;
  j["epsilon"] = spec.epsilon;
  j["repeats"] = spec.repeats;
  if (!spec.delta_note.empty()) j["delta_note"] = spec.delta_note;
}

static ExperimentSpec spec_from_json(const nlohmann::json& j) {
  ExperimentSpec spec;
  spec.params.d = j.at("d").get<int>();
  spec.params.n = j.at("n").get<int>();
  spec.params.k = j.at("k").get<int>();
  spec.params.gamma = j.at("gamma").get<double>();
  if (j.contains("mode")) spec.params.mode = corruption_mode_from_string(j.at("mode").get<std::string>());
  if (j.contains("seed")) spec.params.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("v")) {
    const auto v = j.at("v").get<std::vector<double>>();
    spec.params.v = Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
  }
  if (j.contains("m")) spec.m = j.at("m").get<int>();
  if (j.contains("alpha")) spec.alpha = j.at("alpha").get<double>();
  if (j.contains("train")) {
    const auto& t = j.at("train");
    if (t.contains("eta")) spec.train.eta = t.at("eta").get<double>();
    if (t.contains("init_scale")) spec.train.init_scale = t.at("init_scale").get<double>();
    if (t.contains("init_mode")) {
      const auto s = t.at("init_mode").get<std::string>();
      if (s == "Zero") spec.train.init_mode = InitMode::Zero;
      else if (s == "UniformBall") spec.train.init_mode = InitMode::UniformBall;
      else throw ParameterError("unknown init_mode: " + s);
    }
    if (t.contains("max_iters")) spec.train.max_iters = t.at("max_iters").get<long long>();
    if (t.contains("record_trace")) spec.train.record_trace = t.at("record_trace").get<bool>();
  }
  if (j.contains("mc_trials")) spec.mc_trials = j.at("mc_trials").get<long long>();
  if (j.contains("epsilon")) spec.epsilon = j.at("epsilon").get<double>();
  if (j.contains("repeats")) spec.repeats = j.at("repeats").get<int>();
  if (j.contains("delta_note")) spec.delta_note = j.at("delta_note").get<std::string>();
  return spec;
}

namespace {
std::string sweep_fingerprint(const SweepSpec& spec) {
  nlohmann::json j;
  nlohmann::json base;
  spec_to_json(spec.base, base);
  j["fixed"] = base;
  j["grid"] = spec.grid;
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a64(j.dump())));
  return buf;
}
}  // namespace

std::string experiment_result_to_json(const ExperimentResult& r) {
  nlohmann::json j;
  j["cell_index"] = r.cell_index;
  j["repeat"] = r.repeat;
  j["d"] = r.d;
  j["n"] = r.n;
  j["k"] = r.k;
  j["gamma"] = r.gamma;
  j["m"] = r.m;
  j["alpha"] = r.alpha;
  j["eta"] = r.eta;
  j["seed"] = r.seed;
  j["converged"] = r.converged;
  j["T"] = r.T;
  j["train_loss"] = r.train_loss;
  j["w_star_norm"] = r.w_star_norm;
  j["margin_ratio"] = r.margin_ratio;
  j["A_min"] = r.A_min;
  j["A_lin"] = r.A_lin;
  j["Z_frobenius"] = r.Z_frobenius;
  j["z_lin_norm"] = r.z_lin_norm;
  j["test_error"] = r.test_error;
  j["test_stderr"] = r.test_stderr;
  j["outcome"] = to_string(r.outcome);
  j["wall_time_s"] = r.wall_time_s;
  j["kkt_residual"] = r.kkt_residual;
  return j.dump();
}

ExperimentResult experiment_result_from_json(const std::string& text) {
  const nlohmann::json j = nlohmann::json::parse(text);
  ExperimentResult r;
  r.cell_index = j.at("cell_index").get<long long>();
  r.repeat = j.at("repeat").get<int>();
  r.d = j.at("d").get<int>();
  r.n = j.at("n").get<int>();
  r.k = j.at("k").get<int>();
  r.gamma = j.at("gamma").get<double>();
  r.m = j.at("m").get<int>();
  r.alpha = j.at("alpha").get<double>();
  r.eta = j.at("eta").get<double>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.converged = j.at("converged").get<bool>();
  r.T = j.at("T").get<long long>();
  r.train_loss = j.at("train_loss").get<double>();
  r.w_star_norm = j.at("w_star_norm").get<double>();
  r.margin_ratio = j.at("margin_ratio").get<double>();
  r.A_min = j.at("A_min").get<double>();
  r.A_lin = j.at("A_lin").get<double>();
  r.Z_frobenius = j.at("Z_frobenius").get<double>();
  r.z_lin_norm = j.at("z_lin_norm").get<double>();
  r.test_error = j.at("test_error").get<double>();
  r.test_stderr = j.at("test_stderr").get<double>();
  r.outcome = outcome_from_string(j.at("outcome").get<std::string>());
  r.wall_time_s = j.at("wall_time_s").get<double>();
  if (j.contains("kkt_residual")) r.kkt_residual = j.at("kkt_residual").get<double>();
  return r;
}

ExperimentSpec experiment_spec_from_json(const std::string& text) {
  try {
    return spec_from_json(nlohmann::json::parse(text));
  } catch (const nlohmann::json::exception& e) {
    throw ParameterError(std::string("bad experiment spec: ") + e.what());
  }
}

SweepSpec sweep_spec_from_json(const std::string& text) {
  try {
    const nlohmann::json j = nlohmann::json::parse(text);
    SweepSpec spec;
    nlohmann::json fixed = j.at("fixed");
    // A swept axis needs no value in the fixed block; seed it with the first
    // grid entry so the base parses (every cell overrides it anyway).
    if (j.contains("grid")) {
      for (const auto& [axis, vals] : j.at("grid").items()) {
        if (fixed.contains(axis) || vals.empty()) continue;
        if (axis == "d" || axis == "n" || axis == "k" || axis == "m") {
          fixed[axis] = static_cast<long long>(vals.front().get<double>());
        } else if (axis == "gamma" || axis == "alpha") {
          fixed[axis] = vals.front().get<double>();
        }
      }
    }
    spec.base = spec_from_json(fixed);
    if (j.contains("grid")) {
      for (const auto& [axis, vals] : j.at("grid").items()) {
        spec.grid[axis] = vals.get<std::vector<double>>();
      }
    }
    if (j.contains("parallelism")) spec.parallelism = j.at("parallelism").get<int>();
    if (j.contains("output_path")) spec.output_path = j.at("output_path").get<std::string>();
    if (j.contains("max_cells")) spec.max_cells = j.at("max_cells").get<long long>();
    return spec;
  } catch (const nlohmann::json::exception& e) {
    throw ParameterError(std::string("bad sweep spec: ") + e.what());
  }
}

}  // namespace marginlab
