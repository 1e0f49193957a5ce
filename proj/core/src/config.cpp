#include "rolab/config.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include "rolab/errors.hpp"

namespace rolab {

namespace {

// Minimal TOML subset: [section] headers and scalar key = value pairs
// (string, bool, integer, float). Comments start with '#' outside quotes.
struct TomlDoc {
  std::map<std::string, std::map<std::string, std::string>> sections;
};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string strip_comment(const std::string& line) {
  bool in_quotes = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"') in_quotes = !in_quotes;
    if (line[i] == '#' && !in_quotes) return line.substr(0, i);
  }
  return line;
}

TomlDoc parse_toml(const std::string& text) {
  TomlDoc doc;
  std::istringstream in(text);
  std::string line;
  std::string section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(strip_comment(line));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ConfigError("config line " + std::to_string(lineno) +
                          ": malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      doc.sections[section];
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) +
                        ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"')
      value = value.substr(1, value.size() - 2);
    if (key.empty() || value.empty())
      throw ConfigError("config line " + std::to_string(lineno) +
                        ": empty key or value");
    doc.sections[section][key] = value;
  }
  return doc;
}

// Tracks which keys were consumed so leftovers can be rejected.
class SectionReader {
 public:
  SectionReader(const TomlDoc& doc, const std::string& name) : name_(name) {
    auto it = doc.sections.find(name);
    if (it != doc.sections.end()) pairs_ = it->second;
  }

  bool has(const std::string& key) {
    return pairs_.find(key) != pairs_.end();
  }

  std::string str(const std::string& key, const std::string& fallback) {
    auto it = pairs_.find(key);
    if (it == pairs_.end()) return fallback;
    used_.push_back(key);
    return it->second;
  }

  std::string require_str(const std::string& key) {
    auto it = pairs_.find(key);
    if (it == pairs_.end())
      throw ConfigError("config: [" + name_ + "] is missing required key '" +
                        key + "'");
    used_.push_back(key);
    return it->second;
  }

  double num(const std::string& key, double fallback) {
    auto it = pairs_.find(key);
    if (it == pairs_.end()) return fallback;
    used_.push_back(key);
    try {
      std::size_t pos = 0;
      const double v = std::stod(it->second, &pos);
      if (pos != it->second.size()) throw std::invalid_argument("");
      return v;
    } catch (...) {
      throw ConfigError("config: [" + name_ + "] " + key +
                        " is not a number: " + it->second);
    }
  }

  long long integer(const std::string& key, long long fallback) {
    const double v = num(key, static_cast<double>(fallback));
    const long long i = static_cast<long long>(v);
    if (static_cast<double>(i) != v)
      throw ConfigError("config: [" + name_ + "] " + key + " must be an integer");
    return i;
  }

  void finish() const {
    for (const auto& [key, _] : pairs_) {
      if (std::find(used_.begin(), used_.end(), key) == used_.end())
        throw ConfigError("config: unknown key '" + key + "' in [" + name_ + "]");
    }
  }

 private:
  std::string name_;
  std::map<std::string, std::string> pairs_;
  std::vector<std::string> used_;
};

}  // namespace

std::vector<AttackKind> parse_attack_list(const std::string& csv) {
  std::vector<AttackKind> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    out.push_back(attack_kind_from_string(item));
  }
  if (out.empty()) throw ConfigError("config: empty attack list");
  return out;
}

ExperimentConfig parse_experiment_config(const std::string& toml_text) {
  TomlDoc doc = parse_toml(toml_text);
  for (const auto& [name, _] : doc.sections) {
    if (name != "env" && name != "dataset" && name != "train" &&
        name != "defense" && name != "attack_eval")
      throw ConfigError("config: unknown section [" + name + "]");
  }

  ExperimentConfig cfg;

  SectionReader env(doc, "env");
  cfg.env_name = env.require_str("name");
  (void)EnvSpec::by_name(cfg.env_name);
  env.finish();

  SectionReader dataset(doc, "dataset");
  cfg.dataset_path = dataset.require_str("path");
  dataset.finish();

  SectionReader train(doc, "train");
  TrainConfig& t = cfg.train;
  t.iterations = static_cast<int>(train.integer("iterations", t.iterations));
  t.batch_size = static_cast<int>(train.integer("batch_size", t.batch_size));
  t.gamma = train.num("gamma", t.gamma);
  t.tau = train.num("tau", t.tau);
  t.policy_period = static_cast<int>(train.integer("policy_period", t.policy_period));
  t.actor_lr = train.num("actor_lr", t.actor_lr);
  t.critic_lr = train.num("critic_lr", t.critic_lr);
  t.bc_alpha = train.num("bc_alpha", t.bc_alpha);
  t.policy_noise = train.num("policy_noise", t.policy_noise);
  t.noise_clip = train.num("noise_clip", t.noise_clip);
  t.hidden_dim = static_cast<int>(train.integer("hidden_dim", t.hidden_dim));
  t.num_hidden = static_cast<int>(train.integer("num_hidden", t.num_hidden));
  t.seed = static_cast<std::uint64_t>(train.integer("seed", 0));
  t.log_interval = static_cast<int>(train.integer("log_interval", t.log_interval));
  t.eval_episodes = static_cast<int>(train.integer("eval_episodes", t.eval_episodes));
  train.finish();

  SectionReader defense(doc, "defense");
  DefenseSpec& d = t.defense;
  d.kind = defense_kind_from_string(defense.str("kind", "none"));
  d.lambda = defense.num("lambda", d.lambda);
  const std::string default_generator =
      d.kind == DefenseSpec::Kind::Actor ? "actor" : "critic";
  d.generator = attack_kind_from_string(defense.str("generator", default_generator));
  d.budget.epsilon = defense.num("epsilon", d.budget.epsilon);
  d.budget.step_size = defense.num("step_size", d.budget.step_size);
  d.budget.num_steps = static_cast<int>(defense.integer("steps", d.budget.num_steps));
  defense.finish();

  SectionReader eval(doc, "attack_eval");
  EvalOptions& e = cfg.attack_eval;
  e.attacks = parse_attack_list(
      eval.str("attacks", "none,random,critic,actor,robust_critic"));
  e.budget.epsilon = eval.num("epsilon", e.budget.epsilon);
  e.budget.step_size = eval.num("step_size", e.budget.step_size);
  e.budget.num_steps = static_cast<int>(eval.integer("steps", e.budget.num_steps));
  e.episodes = static_cast<int>(eval.integer("episodes", e.episodes));
  e.seeds = static_cast<int>(eval.integer("seeds", e.seeds));
  eval.finish();

  t.validate();
  return cfg;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw MissingArtifactError("config file not found: " + file.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_experiment_config(buf.str());
}

}  // namespace rolab
