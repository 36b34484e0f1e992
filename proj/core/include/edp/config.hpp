#ifndef EDP_CONFIG_HPP_
#define EDP_CONFIG_HPP_

#include <string>
#include <utility>
#include <vector>

#include "edp/algorithms.hpp"
#include "edp/evaluation.hpp"
#include "edp/trainer.hpp"

namespace edp {

/// All tunables of a run. Keys in config files are the field names of the
/// member structs (sampler fields configure both next-action sampling during
/// training and evaluation).
struct RunConfig {
  TrainConfig train;
  AlgoConfig algo;
  SamplerConfig sampler;
  EvalConfig eval;

  void validate() const;
  EvalConfig eval_config() const;  // eval with the shared sampler settings
};

// Throws ParameterError for unknown keys or unparsable values.
void apply_setting(RunConfig& config, const std::string& key,
                   const std::string& value);
// Parses "key=value".
void apply_assignment(RunConfig& config, const std::string& assignment);

// UTF-8 text, one key=value per line; '#' starts a comment.
void load_config_file(RunConfig& config, const std::string& path);

std::vector<std::pair<std::string, std::string>> to_key_values(
    const RunConfig& config);
std::string to_config_text(const RunConfig& config);
std::vector<std::string> config_keys();

}  // namespace edp

#endif  // EDP_CONFIG_HPP_
