#include "edp/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include "edp/errors.hpp"

namespace edp {

void RunConfig::validate() const {
  train.validate();
  algo.validate();
  sampler.validate();
  eval_config().validate();
}

EvalConfig RunConfig::eval_config() const {
  EvalConfig e = eval;
  e.sampler = sampler;
  return e;
}

namespace {

[[noreturn]] void bad_value(const std::string& key, const std::string& value,
                            const char* expected) {
  throw ParameterError("config key '" + key + "': cannot parse '" + value +
                       "' as " + expected);
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used == v.size()) return d;
  } catch (const std::exception&) {
  }
  bad_value(key, v, "a number");
}

template <typename Int>
Int to_int(const std::string& key, const std::string& v) {
  Int out{};
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    bad_value(key, v, "an integer");
  }
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  bad_value(key, v, "a boolean (true|false)");
}

std::string fmt(double d) {
  std::ostringstream os;
  os.precision(17);
  os << d;
  return os.str();
}

std::string fmt(bool b) { return b ? "true" : "false"; }

struct Field {
  const char* key;
  std::function<void(RunConfig&, const std::string&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define EDP_DOUBLE(KEY, MEMBER)                                                \
  Field {                                                                      \
    KEY,                                                                       \
        [](RunConfig& c, const std::string& k, const std::string& v) {         \
          c.MEMBER = to_double(k, v);                                          \
        },                                                                     \
        [](const RunConfig& c) { return fmt(c.MEMBER); }                       \
  }
#define EDP_INT(KEY, MEMBER, TYPE)                                             \
  Field {                                                                      \
    KEY,                                                                       \
        [](RunConfig& c, const std::string& k, const std::string& v) {         \
          c.MEMBER = to_int<TYPE>(k, v);                                       \
        },                                                                     \
        [](const RunConfig& c) { return std::to_string(c.MEMBER); }            \
  }
#define EDP_BOOL(KEY, MEMBER)                                                  \
  Field {                                                                      \
    KEY,                                                                       \
        [](RunConfig& c, const std::string& k, const std::string& v) {         \
          c.MEMBER = to_bool(k, v);                                            \
        },                                                                     \
        [](const RunConfig& c) { return fmt(c.MEMBER); }                       \
  }
#define EDP_ENUM(KEY, MEMBER, PARSE)                                           \
  Field {                                                                      \
    KEY,                                                                       \
        [](RunConfig& c, const std::string&, const std::string& v) {           \
          c.MEMBER = PARSE(v);                                                 \
        },                                                                     \
        [](const RunConfig& c) { return std::string(to_string(c.MEMBER)); }    \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      EDP_DOUBLE("lr", train.lr),
      EDP_DOUBLE("critic_lr", train.critic_lr),
      EDP_INT("epochs", train.epochs, int),
      EDP_INT("iters_per_epoch", train.iters_per_epoch, int),
      EDP_INT("batch_size", train.batch_size, int),
      EDP_DOUBLE("grad_clip", train.grad_clip),
      EDP_DOUBLE("polyak_rate", train.polyak_rate),
      EDP_DOUBLE("gamma", train.gamma),
      EDP_INT("diffusion_steps", train.diffusion_steps, int),
      EDP_ENUM("schedule", train.schedule, parse_schedule_variant),
      EDP_DOUBLE("beta_min", train.beta_min),
      EDP_DOUBLE("beta_max", train.beta_max),
      EDP_INT("hidden_dim", train.hidden_dim, int),
      EDP_INT("embed_dim", train.embed_dim, int),
      EDP_ENUM("activation", train.activation, parse_activation),
      EDP_INT("seed", train.seed, std::uint64_t),
      EDP_BOOL("share_noise_draws", train.share_noise_draws),
      EDP_INT("num_next_actions", train.num_next_actions, int),
      EDP_INT("next_action_eas_n", train.next_action_eas_n, int),
      EDP_ENUM("policy_update", train.policy_update, parse_policy_update),
      EDP_DOUBLE("reward_scale", train.reward_scale),
      EDP_BOOL("normalize_states", train.normalize_states),
      EDP_INT("eval_every", train.eval_every, int),
      EDP_INT("checkpoint_every", train.checkpoint_every, int),
      EDP_ENUM("algo", algo.algo, parse_algo_kind),
      EDP_DOUBLE("lambda", algo.lambda),
      EDP_DOUBLE("temp", algo.temp),
      EDP_DOUBLE("expectile", algo.expectile),
      EDP_INT("crr_sample_n", algo.crr_sample_n, int),
      EDP_DOUBLE("crr_sigma", algo.crr_sigma),
      EDP_ENUM("likelihood", algo.likelihood, parse_likelihood_variant),
      EDP_DOUBLE("weight_cap", algo.weight_cap),
      EDP_ENUM("method", sampler.method, parse_sampler_method),
      EDP_INT("nfe", sampler.nfe, int),
      EDP_INT("ode_order", sampler.ode_order, int),
      EDP_DOUBLE("policy_scale", sampler.policy_scale),
      EDP_DOUBLE("init_noise_scale", sampler.init_noise_scale),
      EDP_INT("eas_n", eval.eas_n, int),
      EDP_INT("episodes", eval.episodes, int),
      EDP_INT("eval_seed", eval.eval_seed, std::uint64_t),
      EDP_BOOL("use_eas", eval.use_eas),
  };
  return table;
}

#undef EDP_DOUBLE
#undef EDP_INT
#undef EDP_BOOL
#undef EDP_ENUM

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

void apply_setting(RunConfig& config, const std::string& key,
                   const std::string& value) {
  for (const Field& f : fields()) {
    if (key == f.key) {
      f.set(config, key, value);
      return;
    }
  }
  throw ParameterError("unknown config key '" + key + "'");
}

void apply_assignment(RunConfig& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) {
    throw ParameterError("expected key=value, got '" + assignment + "'");
  }
  apply_setting(config, trim(assignment.substr(0, eq)),
                trim(assignment.substr(eq + 1)));
}

void load_config_file(RunConfig& config, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParameterError("cannot open config file '" + path + "'");
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    try {
      apply_assignment(config, line);
    } catch (const ParameterError& e) {
      throw ParameterError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
}

std::vector<std::pair<std::string, std::string>> to_key_values(
    const RunConfig& config) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const Field& f : fields()) out.emplace_back(f.key, f.get(config));
  return out;
}

std::string to_config_text(const RunConfig& config) {
  std::string out;
  for (const auto& [k, v] : to_key_values(config)) out += k + "=" + v + "\n";
  return out;
}

std::vector<std::string> config_keys() {
  std::vector<std::string> out;
  for (const Field& f : fields()) out.emplace_back(f.key);
  return out;
}

}  // namespace edp
