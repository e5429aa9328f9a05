#include "marginlab/datamodel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <json.hpp>

#include "marginlab/detail/numio.hpp"
#include "marginlab/errors.hpp"

namespace marginlab {

using detail::double_to_string;
using detail::string_to_double;

const char* to_string(CorruptionMode mode) {
  return mode == CorruptionMode::IidLabels ? "IidLabels" : "BalancedLabels";
}

CorruptionMode corruption_mode_from_string(const std::string& s) {
  if (s == "IidLabels" || s == "iid") return CorruptionMode::IidLabels;
  if (s == "BalancedLabels" || s == "balanced") return CorruptionMode::BalancedLabels;
  throw ParameterError("unknown corruption mode: " + s);
}

DataModelParams validated(const DataModelParams& params) {
  DataModelParams p = params;
  if (p.d < 1) throw ParameterError("d must be >= 1");
  if (p.n < 1) throw ParameterError("n must be >= 1");
  if (p.k < 0 || p.k > p.n) throw ParameterError("k must satisfy 0 <= k <= n");
  if (!(p.gamma >= 0.0 && p.gamma <= 1.0)) throw ParameterError("gamma must lie in [0, 1]");
  if (p.mode == CorruptionMode::BalancedLabels) {
    if (p.k % 2 != 0) throw ParameterError("BalancedLabels needs even k");
    if ((p.n - p.k) % 2 != 0) throw ParameterError("BalancedLabels needs even n - k");
  }
  if (p.v.size() == 0) {
    p.v = Eigen::VectorXd::Zero(p.d);
    p.v(0) = 1.0;
  } else {
    if (p.v.size() != p.d) throw ParameterError("v has wrong dimension");
    const double norm = p.v.norm();
    if (norm < 1e-9) throw ParameterError("v is numerically zero");
    p.v /= norm;
  }
  return p;
}

Eigen::VectorXd sample_noise_vector(const Eigen::VectorXd& v, PhiloxRng& rng) {
  const Eigen::Index d = v.size();
  if (d < 1) throw ParameterError("noise dimension must be >= 1");
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));
  Eigen::VectorXd g(d);
  for (Eigen::Index i = 0; i < d; ++i) g(i) = scale * rng.normal();
  g -= g.dot(v) * v;
  return g;
}

namespace {

// Uniform k-subset of [0, n) by partial Fisher-Yates, returned sorted.
std::vector<int> sample_subset(int n, int k, PhiloxRng& rng) {
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  for (int i = 0; i < k; ++i) {
    const int j = i + static_cast<int>(rng.below(static_cast<std::uint64_t>(n - i)));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  return idx;
}

// Assigns +1 to a uniformly chosen half of `members`, -1 to the rest.
void assign_balanced(const std::vector<int>& members, Eigen::VectorXi& y, PhiloxRng& rng) {
  std::vector<int> pool = members;
  const int half = static_cast<int>(pool.size()) / 2;
  for (int i = 0; i < half; ++i) {
    const int j = i + static_cast<int>(rng.below(static_cast<std::uint64_t>(pool.size() - i)));
    std::swap(pool[i], pool[j]);
  }
  for (int i : members) y(i) = -1;
  for (int i = 0; i < half; ++i) y(pool[i]) = 1;
}

}  // namespace

Dataset sample_dataset(const DataModelParams& raw) {
  Dataset data;
  data.params = validated(raw);
  const DataModelParams& p = data.params;

  PhiloxRng label_rng = substream(p.seed, "labels");
  PhiloxRng corrupt_rng = substream(p.seed, "corrupt");
  PhiloxRng noise_rng = substream(p.seed, "noise");

  data.corrupt_set = sample_subset(p.n, p.k, corrupt_rng);

  data.y_true.resize(p.n);
  if (p.mode == CorruptionMode::IidLabels) {
    for (int i = 0; i < p.n; ++i) data.y_true(i) = (label_rng() >> 63) ? 1 : -1;
  } else {
    std::vector<int> in_b(p.n, 0);
    for (int i : data.corrupt_set) in_b[i] = 1;
    std::vector<int> clean, corrupt;
    for (int i = 0; i < p.n; ++i) (in_b[i] ? corrupt : clean).push_back(i);
    assign_balanced(clean, data.y_true, label_rng);
    assign_balanced(corrupt, data.y_true, label_rng);
  }

  data.N.resize(p.n, p.d);
  data.X.resize(p.n, p.d);
  const double sig = std::sqrt(p.gamma);
  const double noi = std::sqrt(1.0 - p.gamma);
  for (int i = 0; i < p.n; ++i) {
    data.N.row(i) = sample_noise_vector(p.v, noise_rng).transpose();
    data.X.row(i) = sig * data.y_true(i) * p.v.transpose() + noi * data.N.row(i);
  }

  data.y_obs = data.y_true;
  for (int i : data.corrupt_set) data.y_obs(i) = -data.y_true(i);
  data.beta = data.y_true.cwiseProduct(data.y_obs);
  return data;
}

TestPoint sample_test_point(const DataModelParams& raw, PhiloxRng& rng) {
  const DataModelParams p = validated(raw);
  TestPoint tp;
  tp.y = (rng() >> 63) ? 1 : -1;
  const Eigen::VectorXd noise = sample_noise_vector(p.v, rng);
  tp.x = std::sqrt(p.gamma) * tp.y * p.v + std::sqrt(1.0 - p.gamma) * noise;
  return tp;
}

std::string dataset_to_json(const Dataset& data) {
  nlohmann::json j;
  const DataModelParams& p = data.params;
  j["d"] = p.d;
  j["n"] = p.n;
  j["k"] = p.k;
  j["gamma"] = double_to_string(p.gamma);
  j["seed"] = p.seed;
  j["mode"] = to_string(p.mode);
  auto vec_strings = [](const auto& v) {
    std::vector<std::string> out;
    out.reserve(static_cast<std::size_t>(v.size()));
    for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(double_to_string(v(i)));
    return out;
  };
  j["v"] = vec_strings(p.v);
  std::vector<std::string> x_flat;
  x_flat.reserve(static_cast<std::size_t>(p.n) * static_cast<std::size_t>(p.d));
  for (int i = 0; i < p.n; ++i)
    for (int c = 0; c < p.d; ++c) x_flat.push_back(double_to_string(data.X(i, c)));
  j["X"] = std::move(x_flat);
  j["y_true"] = std::vector<int>(data.y_true.data(), data.y_true.data() + data.y_true.size());
  j["y_obs"] = std::vector<int>(data.y_obs.data(), data.y_obs.data() + data.y_obs.size());
  j["corrupt_set"] = data.corrupt_set;
  return j.dump();
}

Dataset dataset_from_json(const std::string& text) {
  const nlohmann::json j = nlohmann::json::parse(text);
  Dataset data;
  DataModelParams p;
  p.d = j.at("d").get<int>();
  p.n = j.at("n").get<int>();
  p.k = j.at("k").get<int>();
  p.gamma = string_to_double(j.at("gamma").get<std::string>());
  p.seed = j.at("seed").get<std::uint64_t>();
  p.mode = corruption_mode_from_string(j.at("mode").get<std::string>());
  const auto v_strings = j.at("v").get<std::vector<std::string>>();
  if (static_cast<int>(v_strings.size()) != p.d) throw ParameterError("v length mismatch");
  p.v.resize(p.d);
  for (int i = 0; i < p.d; ++i) p.v(i) = string_to_double(v_strings[i]);
  data.params = p;

  const auto x_strings = j.at("X").get<std::vector<std::string>>();
  if (x_strings.size() != static_cast<std::size_t>(p.n) * static_cast<std::size_t>(p.d)) {
    throw ParameterError("X length mismatch");
  }
  data.X.resize(p.n, p.d);
  for (int i = 0; i < p.n; ++i)
    for (int c = 0; c < p.d; ++c) data.X(i, c) = string_to_double(x_strings[static_cast<std::size_t>(i) * p.d + c]);

  const auto yt = j.at("y_true").get<std::vector<int>>();
  const auto yo = j.at("y_obs").get<std::vector<int>>();
  if (static_cast<int>(yt.size()) != p.n || static_cast<int>(yo.size()) != p.n) {
    throw ParameterError("label length mismatch");
  }
  data.y_true = Eigen::Map<const Eigen::VectorXi>(yt.data(), p.n);
  data.y_obs = Eigen::Map<const Eigen::VectorXi>(yo.data(), p.n);
  data.corrupt_set = j.at("corrupt_set").get<std::vector<int>>();
  data.beta = data.y_true.cwiseProduct(data.y_obs);

  // Noise rows are implied by X: n_i = (x_i - sqrt(gamma) y_i v) / sqrt(1-gamma).
  data.N.resize(p.n, p.d);
  if (p.gamma < 1.0) {
    const double sig = std::sqrt(p.gamma);
    const double inv = 1.0 / std::sqrt(1.0 - p.gamma);
    for (int i = 0; i < p.n; ++i) {
      data.N.row(i) = inv * (data.X.row(i) - sig * data.y_true(i) * p.v.transpose());
    }
  } else {
    data.N.setZero();
  }
  return data;
}

}  // namespace marginlab
