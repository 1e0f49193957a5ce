#include "rolab/dataset.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "rolab/errors.hpp"
#include "rolab/version.hpp"

namespace rolab {

namespace {

using nlohmann::json;

json env_to_json(const EnvSpec& e) {
  json j;
  j["name"] = e.name_str();
  j["state_dim"] = e.state_dim;
  j["action_dim"] = e.action_dim;
  j["horizon"] = e.horizon;
  j["dt"] = e.dt;
  j["mass"] = e.mass;
  j["drag"] = e.drag;
  j["ctrl_kp"] = e.ctrl_kp;
  j["ctrl_kd"] = e.ctrl_kd;
  j["force_scale"] = e.force_scale;
  j["target"] = e.target;
  j["start_pos_box"] = e.start_pos_box;
  j["start_vel_box"] = e.start_vel_box;
  j["action_cost"] = e.action_cost;
  j["length"] = e.length;
  j["grav"] = e.grav;
  j["pend_mass"] = e.pend_mass;
  j["torque_limit"] = e.torque_limit;
  j["max_speed"] = e.max_speed;
  j["start_speed_box"] = e.start_speed_box;
  j["theta_cost"] = e.theta_cost;
  j["speed_cost"] = e.speed_cost;
  j["action_cost_pend"] = e.action_cost_pend;
  return j;
}

EnvSpec env_from_json(const json& j) {
  EnvSpec e = EnvSpec::by_name(j.at("name").get<std::string>());
  e.state_dim = j.at("state_dim").get<int>();
  e.action_dim = j.at("action_dim").get<int>();
  e.horizon = j.at("horizon").get<int>();
  e.dt = j.at("dt").get<double>();
  e.mass = j.at("mass").get<double>();
  e.drag = j.at("drag").get<double>();
  e.ctrl_kp = j.at("ctrl_kp").get<double>();
  e.ctrl_kd = j.at("ctrl_kd").get<double>();
  e.force_scale = j.at("force_scale").get<double>();
  e.target = j.at("target").get<std::array<double, 2>>();
  e.start_pos_box = j.at("start_pos_box").get<double>();
  e.start_vel_box = j.at("start_vel_box").get<double>();
  e.action_cost = j.at("action_cost").get<double>();
  e.length = j.at("length").get<double>();
  e.grav = j.at("grav").get<double>();
  e.pend_mass = j.at("pend_mass").get<double>();
  e.torque_limit = j.at("torque_limit").get<double>();
  e.max_speed = j.at("max_speed").get<double>();
  e.start_speed_box = j.at("start_speed_box").get<double>();
  e.theta_cost = j.at("theta_cost").get<double>();
  e.speed_cost = j.at("speed_cost").get<double>();
  e.action_cost_pend = j.at("action_cost_pend").get<double>();
  return e;
}

struct TierParams {
  double gain_scale;
  double sigma_start, sigma_end;
  std::uint8_t tag;
};

// Expert keeps a little actuation noise: with a perfectly deterministic
// behavior policy the data holds no action variation at any state, and the
// critic's action-dependence would be pure extrapolation.
TierParams tier_params(const std::string& tier) {
  if (tier == "expert") return {1.0, 0.2, 0.2, 0};
  if (tier == "medium") return {0.5, 0.3, 0.3, 1};
  if (tier == "medium-replay") return {0.5, 1.0, 0.3, 2};
  throw std::invalid_argument("unknown dataset tier: " + tier);
}

// Appends episodes generated under `params` until `target` transitions are
// present, truncating the final episode.
void collect(Dataset& ds, std::vector<Transition>& out,
             const EnvSpec& spec, const TierParams& params, std::size_t target,
             std::uint64_t seed, std::uint64_t stream) {
  PolicyFn base = expert_controller(spec, params.gain_scale);
  std::size_t ep = 0;
  while (out.size() < target) {
    Rng rng(Rng::derive(seed, stream + ep));
    Tensor state = initial_state(spec, rng);
    const double frac = static_cast<double>(out.size()) / static_cast<double>(target);
    const double sigma =
        params.sigma_start + (params.sigma_end - params.sigma_start) * frac;
    for (int t = 0; t < spec.horizon && out.size() < target; ++t) {
      Tensor action = base(state);
      if (sigma > 0.0)
        for (auto& v : action.raw()) v += sigma * rng.gaussian();
      auto [next, reward] = env_step(spec, state, action);
      Transition tr;
      tr.s = state;
      tr.a = Tensor(1, spec.action_dim);
      for (int i = 0; i < spec.action_dim; ++i) {
        const double v = action(0, i);
        tr.a(0, i) = v < -1.0 ? -1.0 : (v > 1.0 ? 1.0 : v);
      }
      tr.r = reward;
      tr.s_next = next;
      // done marks true terminals; these tasks only ever time out at the
      // horizon, so offline data bootstraps through the episode cut.
      tr.done = false;
      out.push_back(std::move(tr));
      ds.source_tags.push_back(params.tag);
      state = std::move(next);
    }
  }
}

double mean_return(const EnvSpec& spec, const PolicyFn& policy,
                   std::uint64_t seed, std::uint64_t stream, int episodes) {
  double total = 0.0;
  for (int i = 0; i < episodes; ++i)
    total += rollout(spec, policy, Rng::derive(seed, stream + static_cast<std::uint64_t>(i)))
                 .episode_return;
  return total / episodes;
}

void fill_columns(Dataset& ds, const std::vector<Transition>& transitions) {
  const int n = static_cast<int>(transitions.size());
  const int sd = ds.env.state_dim, ad = ds.env.action_dim;
  ds.s = Tensor(n, sd);
  ds.a = Tensor(n, ad);
  ds.r = Tensor(n, 1);
  ds.s_next = Tensor(n, sd);
  ds.done = Tensor(n, 1);
  for (int i = 0; i < n; ++i) {
    const Transition& tr = transitions[static_cast<std::size_t>(i)];
    for (int c = 0; c < sd; ++c) {
      ds.s(i, c) = tr.s(0, c);
      ds.s_next(i, c) = tr.s_next(0, c);
    }
    for (int c = 0; c < ad; ++c) ds.a(i, c) = tr.a(0, c);
    ds.r(i, 0) = tr.r;
    ds.done(i, 0) = tr.done ? 1.0 : 0.0;
  }
}

std::string fmt_full(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

const std::vector<std::string> kQualityTiers = {"expert", "medium-expert",
                                                "medium-replay"};

Tensor Normalizer::apply(const Tensor& states) const {
  Tensor out = states;
  const int d = states.cols();
  if (mean.cols() != d || std.cols() != d)
    throw std::invalid_argument("Normalizer: dim mismatch");
  for (int r = 0; r < out.rows(); ++r)
    for (int c = 0; c < d; ++c)
      out(r, c) = (out(r, c) - mean(0, c)) / std(0, c);
  return out;
}

void compute_state_stats(Dataset& ds) {
  const int n = ds.s.rows(), d = ds.s.cols();
  ds.state_mean = Tensor(1, d);
  ds.state_std = Tensor(1, d);
  for (int c = 0; c < d; ++c) {
    double m = 0.0;
    for (int i = 0; i < n; ++i) m += ds.s(i, c);
    m /= n;
    double var = 0.0;
    for (int i = 0; i < n; ++i) {
      const double dv = ds.s(i, c) - m;
      var += dv * dv;
    }
    var /= n;
    ds.state_mean(0, c) = m;
    ds.state_std(0, c) = std::max(std::sqrt(var), 1e-6);
  }
}

Dataset generate_dataset(const EnvSpec& spec, const std::string& tier,
                         std::size_t size, std::uint64_t seed) {
  if (size < 1) throw std::invalid_argument("generate_dataset: size must be >= 1");

  Dataset ds;
  ds.env = spec;
  ds.tier = tier;
  ds.seed = seed;
  ds.generator_version = std::to_string(kDatasetFormatVersion);

  std::vector<Transition> transitions;
  transitions.reserve(size);
  if (tier == "medium-expert") {
    const std::size_t half = size / 2;
    collect(ds, transitions, spec, tier_params("expert"), half, seed, 1000);
    collect(ds, transitions, spec, tier_params("medium"), size, seed, 500000);
  } else {
    collect(ds, transitions, spec, tier_params(tier), size, seed, 1000);
  }
  fill_columns(ds, transitions);
  compute_state_stats(ds);

  // Random-policy reference: uniform actions in [-1,1]^m, one rng per episode.
  {
    double total = 0.0;
    const int episodes = 100;
    for (int i = 0; i < episodes; ++i) {
      auto rng = std::make_shared<Rng>(Rng::derive(seed, 7000000 + static_cast<std::uint64_t>(i)));
      PolicyFn pol = [rng, &spec](const Tensor&) {
        Tensor a(1, spec.action_dim);
        for (auto& v : a.raw()) v = rng->uniform(-1.0, 1.0);
        return a;
      };
      total += rollout(spec, pol, Rng::derive(seed, 8000000 + static_cast<std::uint64_t>(i)))
                   .episode_return;
    }
    ds.ref_random_score = total / episodes;
  }
  ds.ref_expert_score =
      mean_return(spec, expert_controller(spec), seed, 9000000, 100);

  if (!(ds.ref_expert_score > ds.ref_random_score))
    throw std::runtime_error(
        "generate_dataset: expert reference does not beat random reference");
  return ds;
}

Dataset dataset_from_transitions(const EnvSpec& env, const std::string& tier,
                                 const std::vector<Transition>& transitions,
                                 std::uint64_t seed) {
  if (transitions.empty())
    throw std::invalid_argument("dataset_from_transitions: empty");
  Dataset ds;
  ds.env = env;
  ds.tier = tier;
  ds.seed = seed;
  ds.generator_version = std::to_string(kDatasetFormatVersion);
  fill_columns(ds, transitions);
  compute_state_stats(ds);
  ds.ref_random_score = 0.0;
  ds.ref_expert_score = 1.0;
  return ds;
}

void save_dataset(const Dataset& ds, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const int sd = ds.env.state_dim, ad = ds.env.action_dim;
  std::ofstream csv(dir / "data.csv", std::ios::trunc);
  if (!csv) throw std::runtime_error("save_dataset: cannot write data.csv");
  for (int c = 0; c < sd; ++c) csv << "s" << c << ",";
  for (int c = 0; c < ad; ++c) csv << "a" << c << ",";
  csv << "r,";
  for (int c = 0; c < sd; ++c) csv << "sn" << c << ",";
  csv << "done\n";
  const int n = ds.s.rows();
  for (int i = 0; i < n; ++i) {
    for (int c = 0; c < sd; ++c) csv << fmt_full(ds.s(i, c)) << ",";
    for (int c = 0; c < ad; ++c) csv << fmt_full(ds.a(i, c)) << ",";
    csv << fmt_full(ds.r(i, 0)) << ",";
    for (int c = 0; c < sd; ++c) csv << fmt_full(ds.s_next(i, c)) << ",";
    csv << static_cast<int>(ds.done(i, 0)) << "\n";
  }

  json meta;
  meta["env"] = env_to_json(ds.env);
  meta["tier"] = ds.tier;
  meta["size"] = ds.size();
  meta["seed"] = ds.seed;
  meta["state_mean"] = ds.state_mean.raw();
  meta["state_std"] = ds.state_std.raw();
  meta["ref_random_score"] = ds.ref_random_score;
  meta["ref_expert_score"] = ds.ref_expert_score;
  meta["generator_version"] = ds.generator_version;
  std::ofstream mj(dir / "meta.json", std::ios::trunc);
  if (!mj) throw std::runtime_error("save_dataset: cannot write meta.json");
  mj << meta.dump(2) << "\n";
}

Dataset load_dataset(const std::filesystem::path& dir) {
  std::ifstream mj(dir / "meta.json");
  if (!mj)
    throw MissingArtifactError("dataset metadata not found: " +
                               (dir / "meta.json").string());
  json meta = json::parse(mj);

  Dataset ds;
  ds.env = env_from_json(meta.at("env"));
  ds.tier = meta.at("tier").get<std::string>();
  ds.seed = meta.at("seed").get<std::uint64_t>();
  ds.generator_version = meta.at("generator_version").get<std::string>();
  ds.ref_random_score = meta.at("ref_random_score").get<double>();
  ds.ref_expert_score = meta.at("ref_expert_score").get<double>();
  const auto mean = meta.at("state_mean").get<std::vector<double>>();
  const auto stdv = meta.at("state_std").get<std::vector<double>>();
  ds.state_mean = Tensor::row(mean);
  ds.state_std = Tensor::row(stdv);

  std::ifstream csv(dir / "data.csv");
  if (!csv)
    throw MissingArtifactError("dataset payload not found: " +
                               (dir / "data.csv").string());
  std::string line;
  if (!std::getline(csv, line))
    throw std::runtime_error("load_dataset: empty data.csv");

  const int sd = ds.env.state_dim, ad = ds.env.action_dim;
  const std::size_t n = meta.at("size").get<std::size_t>();
  const int cols = 2 * sd + ad + 2;
  ds.s = Tensor(static_cast<int>(n), sd);
  ds.a = Tensor(static_cast<int>(n), ad);
  ds.r = Tensor(static_cast<int>(n), 1);
  ds.s_next = Tensor(static_cast<int>(n), sd);
  ds.done = Tensor(static_cast<int>(n), 1);

  std::size_t i = 0;
  std::vector<double> fields(static_cast<std::size_t>(cols));
  while (std::getline(csv, line)) {
    if (line.empty()) continue;
    if (i >= n) throw std::runtime_error("load_dataset: more rows than meta.size");
    std::stringstream ss(line);
    std::string cell;
    int c = 0;
    while (std::getline(ss, cell, ',')) {
      if (c >= cols) throw std::runtime_error("load_dataset: too many columns");
      fields[static_cast<std::size_t>(c++)] = std::stod(cell);
    }
    if (c != cols) throw std::runtime_error("load_dataset: too few columns");
    int f = 0;
    const int row = static_cast<int>(i);
    for (int k = 0; k < sd; ++k) ds.s(row, k) = fields[f++];
    for (int k = 0; k < ad; ++k) ds.a(row, k) = fields[f++];
    ds.r(row, 0) = fields[f++];
    for (int k = 0; k < sd; ++k) ds.s_next(row, k) = fields[f++];
    ds.done(row, 0) = fields[f++];
    ++i;
  }
  if (i != n) throw std::runtime_error("load_dataset: fewer rows than meta.size");
  return ds;
}

}  // namespace rolab
