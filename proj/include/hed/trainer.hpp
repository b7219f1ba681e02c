#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hed/config.hpp"
#include "hed/ensemble.hpp"
#include "hed/envs.hpp"
#include "hed/replay.hpp"

namespace hed {

inline constexpr const char* kCodeVersion = "hed 0.1.0";
inline constexpr const char* kProgressHeader = "episode,env_steps,eval_mean,eval_std,critic_loss,central_loss";

struct EvalResult {
  double mean = 0.0;
  double std = 0.0;
  std::vector<double> returns;
};

using PolicyFn = std::function<std::vector<double>(std::span<const double>)>;

/// Undiscounted returns of a deterministic policy over `episodes` episodes.
EvalResult evaluate_policy(const PolicyFn& policy, const Environment& env, int episodes, std::uint64_t seed);
/// Same, running the noise-free ensemble mean policy.
EvalResult evaluate(const Ensemble& e, const Environment& env, int episodes, std::uint64_t seed);

struct TrainCounters {
  std::uint64_t episodes = 0;
  std::uint64_t env_steps = 0;
  std::uint64_t critic_iterations = 0;
  std::uint64_t high_level_sessions = 0;
  std::uint64_t high_level_iterations = 0;
  std::uint64_t steps_since_burst = 0;

  bool operator==(const TrainCounters&) const = default;
};

struct ProgressRow {
  std::uint64_t episode = 0;
  std::uint64_t env_steps = 0;
  double eval_mean = 0.0;
  double eval_std = 0.0;
  double critic_loss = 0.0;
  double central_loss = 0.0;
};

std::string to_csv(const ProgressRow& row);

struct TrainReport {
  std::vector<ProgressRow> rows;
  TrainCounters counters;
};

/// Per-purpose engines; each is advanced only by its own kind of draw.
struct RngStreams {
  Rng env;
  Rng exploration;
  Rng acting;
  Rng batch;
  Rng smoothing;
  Rng session;

  static RngStreams from_seed(std::uint64_t seed);
};

/// The HED training loop: episodes collected by a randomly chosen learner, critic
/// bursts every update_interval steps, delayed low-level policy updates and
/// multi-step high-level sessions.
class Trainer {
 public:
  /// threads > 1 fans the N learner updates out over OpenMP threads.
  explicit Trainer(TrainConfig cfg, int threads = 0);

  const TrainConfig& config() const { return cfg_; }
  const EnvSpec& env_spec() const { return env_.spec(); }
  const Ensemble& ensemble() const { return ensemble_; }
  Ensemble& ensemble() { return ensemble_; }
  const ReplayBuffer& buffer() const { return buffer_; }
  const TrainCounters& counters() const { return counters_; }
  const RngStreams& streams() const { return rng_; }

  void set_max_episodes(int n) { cfg_.max_episodes = n; }
  bool done() const { return counters_.episodes >= static_cast<std::uint64_t>(cfg_.max_episodes); }

  /// Runs one episode and its training; returns a progress row when an evaluation was due.
  std::optional<ProgressRow> run_episode();

  /// Runs episodes until max_episodes. Callbacks fire per progress row and per finished episode.
  TrainReport run(const std::function<void(const ProgressRow&)>& on_row = {},
                  const std::function<void(const Trainer&)>& on_episode = {});

  /// Evaluation with the run's fixed evaluation seed.
  EvalResult evaluate_now(int episodes) const;

  void write_checkpoint(std::ostream& out) const;
  static Trainer read_checkpoint(std::istream& in, int threads = 0);
  void save_checkpoint(const std::string& path) const;
  static Trainer load_checkpoint(const std::string& path, int threads = 0);

 private:
  void critic_burst(std::size_t iterations);
  void high_level_block(std::size_t sampled_steps);
  std::size_t high_level_iterations_for(std::size_t sampled_steps) const;

  TrainConfig cfg_;
  int threads_;
  BuiltinEnvironment env_;
  Ensemble ensemble_;
  ReplayBuffer buffer_;
  RngStreams rng_;
  TrainCounters counters_;
  double critic_loss_sum_ = 0.0;
  double central_loss_sum_ = 0.0;
  std::uint64_t loss_count_ = 0;
};

TrainReport run_training(const TrainConfig& cfg, const std::function<void(const ProgressRow&)>& on_row = {});

/// Parses HED_THREADS; absent, empty or 0 means single-threaded.
int threads_from_env();

}  // namespace hed
