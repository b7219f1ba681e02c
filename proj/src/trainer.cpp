#include "hed/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "hed/binary_io.hpp"

namespace hed {
namespace {

constexpr std::uint32_t kCheckpointVersion = 1;

NetworkSpec network_from(const TrainConfig& cfg) {
  return {cfg.hidden_dims, activation_from_string(cfg.hidden_activation)};
}

AdamConfig adam_from(const TrainConfig& cfg) {
  AdamConfig a;
  a.lr = cfg.adam_lr;
  return a;
}

std::uint64_t eval_seed(const TrainConfig& cfg) { return derive_seed(cfg.seed, 0xE7A1u, 0); }

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

}  // namespace

EvalResult evaluate_policy(const PolicyFn& policy, const Environment& env, int episodes, std::uint64_t seed) {
  if (episodes < 1) throw std::invalid_argument("evaluate: episodes must be >= 1");
  Rng rng(seed);
  EvalResult res;
  for (int ep = 0; ep < episodes; ++ep) {
    auto state = env.reset(rng);
    double ret = 0.0;
    for (int t = 0; t < env.spec().max_episode_steps; ++t) {
      const auto action = policy(state);
      auto step = env.step(state, action, t);
      ret += step.reward;
      state = std::move(step.next_state);
      if (step.terminated || step.truncated) break;
    }
    res.returns.push_back(ret);
  }
  double sum = 0.0;
  for (double r : res.returns) sum += r;
  res.mean = sum / static_cast<double>(episodes);
  double sq = 0.0;
  for (double r : res.returns) sq += (r - res.mean) * (r - res.mean);
  res.std = std::sqrt(sq / static_cast<double>(episodes));
  return res;
}

EvalResult evaluate(const Ensemble& e, const Environment& env, int episodes, std::uint64_t seed) {
  return evaluate_policy([&e](std::span<const double> s) { return e.act(s); }, env, episodes, seed);
}

std::string to_csv(const ProgressRow& row) {
  return std::to_string(row.episode) + "," + std::to_string(row.env_steps) + "," + format_double(row.eval_mean) +
         "," + format_double(row.eval_std) + "," + format_double(row.critic_loss) + "," +
         format_double(row.central_loss);
}

RngStreams RngStreams::from_seed(std::uint64_t seed) {
  return {make_stream(seed, "env"),   make_stream(seed, "exploration"), make_stream(seed, "acting"),
          make_stream(seed, "batch"), make_stream(seed, "smoothing"),   make_stream(seed, "session")};
}

int threads_from_env() {
  const char* v = std::getenv("HED_THREADS");
  if (!v || !*v) return 0;
  char* end = nullptr;
  const long n = std::strtol(v, &end, 10);
  if (*end != '\0' || n < 0) throw std::invalid_argument("HED_THREADS must be a non-negative integer");
  return static_cast<int>(n);
}

Trainer::Trainer(TrainConfig cfg, int threads)
    : cfg_((validate(cfg), std::move(cfg))),
      threads_(threads),
      env_(EnvSpec::from_name(cfg_.env, cfg_.max_episode_steps)),
      ensemble_(env_.spec(), cfg_.n, network_from(cfg_), adam_from(cfg_), cfg_.seed),
      buffer_(env_.spec().state_dim, env_.spec().action_dim, cfg_.buffer_capacity),
      rng_(RngStreams::from_seed(cfg_.seed)) {}

std::size_t Trainer::high_level_iterations_for(std::size_t sampled_steps) const {
  if (sampled_steps == 0) return 0;
  if (!cfg_.high_level_fraction) return (sampled_steps + cfg_.update_interval - 1) / cfg_.update_interval;
  const double x = *cfg_.high_level_fraction * static_cast<double>(sampled_steps);
  // Guard against 0.1 * 30 = 3.0000000000000004 style round-up.
  return static_cast<std::size_t>(std::ceil(x - 1e-9));
}

void Trainer::critic_burst(std::size_t iterations) {
  const std::size_t N = ensemble_.size();
  const std::size_t action_dim = env_.spec().action_dim;
  std::vector<Matrix> next_actions(N);
  std::vector<Matrix> noise(N);
  std::vector<double> losses(N);
  const int threads = threads_ > 1 ? threads_ : 1;

  for (std::size_t it = 0; it < iterations; ++it) {
    const TransitionBatch batch = buffer_.sample(cfg_.batch_size, rng_.batch);
    // Drawn serially so that learner fan-out never reorders the smoothing stream.
    for (std::size_t i = 0; i < N; ++i) noise[i] = gaussian_noise(action_dim, batch.size(), cfg_.smoothing_std, rng_.smoothing);

#pragma omp parallel for schedule(static) num_threads(threads) if (threads > 1)
    for (std::size_t i = 0; i < N; ++i) {
      BaseLearner& l = ensemble_.learner(i);
      next_actions[i] = l.act(batch.s_next);
      const auto y = l.td_targets(batch, cfg_.gamma, next_actions[i], noise[i]);
      losses[i] = l.critic_update(batch, y);
      l.target_sync(cfg_.tau);
    }

    const Matrix next_ensemble = Ensemble::mean_action(next_actions);
    const double central_loss = ensemble_.central_critic_update(batch, cfg_.gamma, cfg_.tau, &next_ensemble);
    ++counters_.critic_iterations;

    if (counters_.critic_iterations % cfg_.policy_delay == 0) {
#pragma omp parallel for schedule(static) num_threads(threads) if (threads > 1)
      for (std::size_t i = 0; i < N; ++i) ensemble_.learner(i).low_level_policy_update(batch);
    }

    for (double l : losses) critic_loss_sum_ += l / static_cast<double>(N);
    central_loss_sum_ += central_loss;
    ++loss_count_;
  }
}

void Trainer::high_level_block(std::size_t sampled_steps) {
  const std::size_t iterations = high_level_iterations_for(sampled_steps);
  if (iterations == 0 || buffer_.size() == 0) return;
  HighLevelSession session = start_high_level_session(ensemble_, cfg_.rho0, cfg_.h_highlevel, rng_.session,
                                                      {cfg_.exclude_self, cfg_.shared_pair});
  ++counters_.high_level_sessions;
  for (std::size_t k = 0; k < iterations; ++k) {
    const TransitionBatch batch = buffer_.sample(cfg_.batch_size, rng_.batch);
    high_level_update(ensemble_, session, batch, cfg_.single_step_ablation);
    ++counters_.high_level_iterations;
  }
}

std::optional<ProgressRow> Trainer::run_episode() {
  const EnvSpec& spec = env_.spec();
  const std::size_t acting = uniform_index(rng_.acting, ensemble_.size());
  const BaseLearner& actor = ensemble_.learner(acting);

  auto state = env_.reset(rng_.env);
  std::size_t episode_steps = 0;
  for (int t = 0; t < spec.max_episode_steps; ++t) {
    auto action = actor.act(state);
    for (double& a : action) a += normal(rng_.exploration, cfg_.exploration_std);
    action = clip_action(spec, action);

    auto step = env_.step(state, action, t);
    buffer_.push({state, action, step.reward, step.next_state, step.terminated});
    ++counters_.env_steps;
    ++counters_.steps_since_burst;
    ++episode_steps;

    if (counters_.steps_since_burst >= cfg_.update_interval) {
      const std::size_t sampled = counters_.steps_since_burst;
      counters_.steps_since_burst = 0;
      critic_burst(sampled);
      if (cfg_.high_level_mode == HighLevelMode::fixed_interval) high_level_block(sampled);
    }
    state = std::move(step.next_state);
    if (step.terminated || step.truncated) break;
  }
  if (cfg_.high_level_mode == HighLevelMode::per_episode) high_level_block(episode_steps);
  ++counters_.episodes;

  if (cfg_.eval_interval > 0 && counters_.episodes % static_cast<std::uint64_t>(cfg_.eval_interval) == 0) {
    const EvalResult ev = evaluate_now(cfg_.eval_episodes);
    ProgressRow row;
    row.episode = counters_.episodes;
    row.env_steps = counters_.env_steps;
    row.eval_mean = ev.mean;
    row.eval_std = ev.std;
    const double nan = std::numeric_limits<double>::quiet_NaN();
    row.critic_loss = loss_count_ ? critic_loss_sum_ / static_cast<double>(loss_count_) : nan;
    row.central_loss = loss_count_ ? central_loss_sum_ / static_cast<double>(loss_count_) : nan;
    critic_loss_sum_ = central_loss_sum_ = 0.0;
    loss_count_ = 0;
    return row;
  }
  return std::nullopt;
}

TrainReport Trainer::run(const std::function<void(const ProgressRow&)>& on_row,
                         const std::function<void(const Trainer&)>& on_episode) {
  TrainReport report;
  while (!done()) {
    if (auto row = run_episode()) {
      report.rows.push_back(*row);
      if (on_row) on_row(*row);
    }
    if (on_episode) on_episode(*this);
  }
  report.counters = counters_;
  return report;
}

EvalResult Trainer::evaluate_now(int episodes) const { return evaluate(ensemble_, env_, episodes, eval_seed(cfg_)); }

TrainReport run_training(const TrainConfig& cfg, const std::function<void(const ProgressRow&)>& on_row) {
  Trainer trainer(cfg);
  return trainer.run(on_row);
}

// Checkpoint layout:
//   "HEDK" u32 version, manifest JSON (config, specs, RNG states), u64 counters,
//   f64 loss accumulators, per learner {5 fragments, 3 Adam states, 2 counters},
//   central + central target fragments, central Adam state, replay buffer, "HEDE".
void Trainer::write_checkpoint(std::ostream& out) const {
  nlohmann::json manifest;
  manifest["code_version"] = kCodeVersion;
  manifest["config"] = config_to_json(cfg_);
  manifest["seed"] = cfg_.seed;
  manifest["N"] = ensemble_.size();
  manifest["rng"] = {{"env", save_state(rng_.env)},         {"exploration", save_state(rng_.exploration)},
                     {"acting", save_state(rng_.acting)},   {"batch", save_state(rng_.batch)},
                     {"smoothing", save_state(rng_.smoothing)}, {"session", save_state(rng_.session)}};

  io::write_magic(out, "HEDK");
  io::write_le<std::uint32_t>(out, kCheckpointVersion);
  io::write_string(out, manifest.dump());

  for (std::uint64_t v : {counters_.episodes, counters_.env_steps, counters_.critic_iterations,
                          counters_.high_level_sessions, counters_.high_level_iterations, counters_.steps_since_burst,
                          loss_count_})
    io::write_le<std::uint64_t>(out, v);
  io::write_f64(out, critic_loss_sum_);
  io::write_f64(out, central_loss_sum_);

  io::write_le<std::uint64_t>(out, ensemble_.size());
  for (const auto& l : ensemble_.learners()) {
    write_fragment(out, l.policy());
    for (std::size_t k = 0; k < 2; ++k) write_fragment(out, l.critic(k));
    for (std::size_t k = 0; k < 2; ++k) write_fragment(out, l.target(k));
    l.policy_optimizer().write(out);
    for (std::size_t k = 0; k < 2; ++k) l.critic_optimizer(k).write(out);
    io::write_le<std::uint64_t>(out, l.critic_updates());
    io::write_le<std::uint64_t>(out, l.policy_updates());
  }
  write_fragment(out, ensemble_.central());
  write_fragment(out, ensemble_.central_target());
  ensemble_.central_optimizer().write(out);
  io::write_le<std::uint64_t>(out, ensemble_.central_updates());
  buffer_.write(out);
  io::write_magic(out, "HEDE");
}

Trainer Trainer::read_checkpoint(std::istream& in, int threads) {
  io::expect_magic(in, "HEDK");
  const auto version = io::read_le<std::uint32_t>(in);
  if (version != kCheckpointVersion) throw CheckpointError("unsupported checkpoint version " + std::to_string(version));

  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(io::read_string(in));
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("corrupt checkpoint manifest: ") + e.what());
  }
  TrainConfig cfg;
  try {
    cfg = config_from_json(manifest.at("config"));
  } catch (const std::exception& e) {
    throw CheckpointError(std::string("checkpoint config invalid: ") + e.what());
  }
  Trainer t(cfg, threads);
  try {
    const auto& rng = manifest.at("rng");
    t.rng_.env = load_state(rng.at("env").get<std::string>());
    t.rng_.exploration = load_state(rng.at("exploration").get<std::string>());
    t.rng_.acting = load_state(rng.at("acting").get<std::string>());
    t.rng_.batch = load_state(rng.at("batch").get<std::string>());
    t.rng_.smoothing = load_state(rng.at("smoothing").get<std::string>());
    t.rng_.session = load_state(rng.at("session").get<std::string>());
  } catch (const std::exception& e) {
    throw CheckpointError(std::string("checkpoint RNG state invalid: ") + e.what());
  }

  t.counters_.episodes = io::read_le<std::uint64_t>(in);
  t.counters_.env_steps = io::read_le<std::uint64_t>(in);
  t.counters_.critic_iterations = io::read_le<std::uint64_t>(in);
  t.counters_.high_level_sessions = io::read_le<std::uint64_t>(in);
  t.counters_.high_level_iterations = io::read_le<std::uint64_t>(in);
  t.counters_.steps_since_burst = io::read_le<std::uint64_t>(in);
  t.loss_count_ = io::read_le<std::uint64_t>(in);
  t.critic_loss_sum_ = io::read_f64(in);
  t.central_loss_sum_ = io::read_f64(in);

  const auto n = io::read_le<std::uint64_t>(in);
  if (n != t.ensemble_.size()) throw CheckpointError("checkpoint learner count does not match its config");

  auto read_into = [&in](Mlp& dst) {
    Mlp net = read_fragment(in);
    if (!(net.spec() == dst.spec())) throw CheckpointError("network spec in checkpoint does not match config");
    dst = std::move(net);
  };
  auto read_adam = [&in](AdamState& dst, std::size_t len) {
    AdamState s = AdamState::read(in);
    if (s.first_moment().size() != len) throw CheckpointError("Adam state length mismatch");
    dst = std::move(s);
  };
  for (auto& l : t.ensemble_.learners()) {
    read_into(l.policy());
    for (std::size_t k = 0; k < 2; ++k) read_into(l.critic(k));
    for (std::size_t k = 0; k < 2; ++k) read_into(l.target(k));
    read_adam(l.policy_optimizer(), l.policy().param_count());
    for (std::size_t k = 0; k < 2; ++k) read_adam(l.critic_optimizer(k), l.critic(k).param_count());
    const auto critic_updates = io::read_le<std::uint64_t>(in);
    const auto policy_updates = io::read_le<std::uint64_t>(in);
    l.set_counters(critic_updates, policy_updates);
  }
  read_into(t.ensemble_.central());
  read_into(t.ensemble_.central_target());
  read_adam(t.ensemble_.central_optimizer(), t.ensemble_.central().param_count());
  t.ensemble_.set_central_updates(io::read_le<std::uint64_t>(in));

  ReplayBuffer buf = ReplayBuffer::read(in);
  if (buf.state_dim() != t.buffer_.state_dim() || buf.action_dim() != t.buffer_.action_dim() ||
      buf.capacity() != t.buffer_.capacity())
    throw CheckpointError("replay buffer shape does not match config");
  t.buffer_ = std::move(buf);
  io::expect_magic(in, "HEDE");
  return t;
}

void Trainer::save_checkpoint(const std::string& path) const {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write checkpoint '" + tmp + "'");
    write_checkpoint(out);
    out.flush();
    if (!out) throw std::runtime_error("failed writing checkpoint '" + tmp + "'");
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) throw std::runtime_error("cannot move checkpoint into '" + path + "'");
}

Trainer Trainer::load_checkpoint(const std::string& path, int threads) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint '" + path + "'");
  return read_checkpoint(in, threads);
}

}  // namespace hed
