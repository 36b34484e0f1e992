#ifndef EDP_TRAINER_HPP_
#define EDP_TRAINER_HPP_

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "edp/algorithms.hpp"
#include "edp/checkpoint.hpp"
#include "edp/critic.hpp"
#include "edp/dataset.hpp"
#include "edp/diffusion_policy.hpp"
#include "edp/optim.hpp"

namespace edp {

enum class PolicyUpdate { kActionApprox, kFullChain };

PolicyUpdate parse_policy_update(std::string_view name);
std::string_view to_string(PolicyUpdate mode);

struct TrainConfig {
  double lr = 3e-4;
  double critic_lr = 3e-4;
  int epochs = 10;
  int iters_per_epoch = 1000;
  int batch_size = 256;
  double grad_clip = 5.0;
  double polyak_rate = 0.005;
  double gamma = 0.99;
  int diffusion_steps = 1000;
  ScheduleVariant schedule = ScheduleVariant::kVariancePreserving;
  double beta_min = 0.1;
  double beta_max = 20.0;
  int hidden_dim = 64;
  int embed_dim = 16;
  Activation activation = Activation::kMish;
  std::uint64_t seed = 0;
  bool share_noise_draws = false;
  int num_next_actions = 1;
  int next_action_eas_n = 0;  // > 0: pick a' by energy-based selection
  PolicyUpdate policy_update = PolicyUpdate::kActionApprox;
  double reward_scale = 1.0;
  bool normalize_states = true;
  int eval_every = 1;        // epochs between evaluations, 0 = never
  int checkpoint_every = 1;  // epochs between checkpoints, 0 = only at the end

  void validate() const;
  NetConfig net_config() const;
  NoiseSchedule build_schedule() const;
};

/// Everything that changes during training.
struct TrainState {
  DiffusionPolicy policy;
  AdamState policy_opt;
  DoubleQ critics;
  AdamState q1_opt, q2_opt;
  std::optional<ValueFunction> value;  // IQL only
  AdamState value_opt;
  std::optional<StateNormalizer> normalizer;
  std::uint64_t step = 0;
  std::uint64_t seed = 0;
};

TrainState make_train_state(const TrainConfig& config, AlgoKind algo,
                            int state_dim, int action_dim, double action_bound,
                            std::optional<StateNormalizer> normalizer = {});

struct StepMetrics {
  std::uint64_t step = 0;
  double l_diff = 0.0;
  double l_algo = 0.0;
  double l_td = 0.0;
  double mean_q = 0.0;
  double grad_norm_policy = 0.0;
  double grad_norm_critic = 0.0;
  std::optional<double> eval_score;
};

// Independent random streams for one step.
enum class StreamPurpose : std::uint64_t {
  kBatch = 1,
  kCritic = 2,
  kDiffusion = 3,
  kImprovement = 4,
};
Rng step_rng(std::uint64_t seed, std::uint64_t step, StreamPurpose purpose);

// One iteration: critic update (V then Q for IQL), policy update on
// L_diff + lambda * L_algo, clipping, Adam, Polyak. Throws NumericError with a
// snapshot of the step's losses if anything is non-finite.
StepMetrics rgdpl_train_step(TrainState& state, const OfflineDataset& dataset,
                             const TrainConfig& config,
                             const AlgoConfig& algo,
                             const SamplerConfig& next_action_sampler);

CheckpointData to_checkpoint(const TrainState& state);
// Copies parameters, optimizer state, counters and normalizer into a state
// built with the same configuration.
void restore_checkpoint(TrainState& state, const CheckpointData& data);

struct TrainHooks {
  std::string metric_log_path;  // empty: no log file
  std::string checkpoint_path;  // empty: no checkpoints
  // Extra metadata stored in every checkpoint (e.g. the run configuration).
  std::vector<std::pair<std::string, std::string>> checkpoint_meta;
  // Called every eval_every epochs; returns a normalized score.
  std::function<double(const TrainState&)> evaluate;
};

struct TrainResult {
  std::vector<StepMetrics> metrics;    // steps run in this call
  std::vector<double> score_history;   // all evaluations, including resumed
};

// Runs steps state.step .. epochs * iters_per_epoch. A state restored from a
// checkpoint continues where it stopped; the metric log is trimmed to the
// checkpoint's step and appended to.
TrainResult train(TrainState& state, const OfflineDataset& dataset,
                  const TrainConfig& config, const AlgoConfig& algo,
                  const SamplerConfig& next_action_sampler,
                  const TrainHooks& hooks = {},
                  std::vector<double> score_history = {});

// Metric log format.
inline constexpr std::string_view kMetricLogHeader =
    "# edp-metrics v1 step,l_diff,l_algo,l_td,mean_q,grad_norm_policy,"
    "grad_norm_critic,eval_score";
std::string format_metric_row(const StepMetrics& m);
StepMetrics parse_metric_row(const std::string& line);
std::vector<StepMetrics> read_metric_log(const std::string& path);

// Score history as stored in checkpoint metadata.
std::string format_score_history(const std::vector<double>& history);
std::vector<double> parse_score_history(const std::string& text);

}  // namespace edp

#endif  // EDP_TRAINER_HPP_
