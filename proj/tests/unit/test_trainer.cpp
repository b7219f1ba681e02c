#include <filesystem>
#include <sstream>

#include "doctest.h"
#include "hed/binary_io.hpp"
#include "hed/trainer.hpp"

using namespace hed;

namespace {

TrainConfig small_config() {
  TrainConfig c;
  c.n = 3;
  c.hidden_dims = {16, 16};
  c.max_episode_steps = 100;
  c.update_interval = 25;
  c.batch_size = 32;
  c.max_episodes = 4;
  c.eval_interval = 2;
  c.eval_episodes = 2;
  c.seed = 9;
  return c;
}

std::string checkpoint_bytes(const Trainer& t) {
  std::ostringstream out;
  t.write_checkpoint(out);
  return out.str();
}

// Reward-free environment that never moves.
class Silent final : public Environment {
 public:
  Silent() : spec_(EnvSpec::make(EnvKind::pointmass2d)) {}
  const EnvSpec& spec() const override { return spec_; }
  std::vector<double> reset(Rng&) const override { return std::vector<double>(spec_.state_dim, 0.0); }
  StepResult step(std::span<const double> s, std::span<const double>, int t) const override {
    return {std::vector<double>(s.begin(), s.end()), 0.0, false, t + 1 >= spec_.max_episode_steps};
  }

 private:
  EnvSpec spec_;
};

}  // namespace

TEST_CASE("evaluation") {
  const BuiltinEnvironment pend(EnvSpec::make(EnvKind::pendulum));
  SUBCASE("reward-free stub gives mean 0 and std 0") {
    const Ensemble e(Silent().spec(), 2, {{8}, Activation::tanh}, {}, 1);
    const auto r = evaluate(e, Silent(), 5, 3);
    CHECK(r.mean == 0.0);
    CHECK(r.std == 0.0);
    CHECK(r.returns.size() == 5);
  }
  SUBCASE("single episode has std 0") {
    const Ensemble e(pend.spec(), 2, {{8}, Activation::tanh}, {}, 1);
    CHECK(evaluate(e, pend, 1, 3).std == 0.0);
  }
  SUBCASE("identical learners match single-policy evaluation") {
    Ensemble e(pend.spec(), 4, {{8}, Activation::tanh}, {}, 2);
    for (std::size_t i = 1; i < 4; ++i) e.learner(i).policy() = e.learner(0).policy();
    const auto& l = e.learner(0);
    const auto single = evaluate_policy([&l](std::span<const double> s) { return l.act(s); }, pend, 3, 5);
    const auto ens = evaluate(e, pend, 3, 5);
    for (std::size_t k = 0; k < 3; ++k) CHECK(ens.returns[k] == doctest::Approx(single.returns[k]).epsilon(1e-9));
  }
  SUBCASE("population std") {
    const auto r = evaluate_policy([](std::span<const double> s) { return std::vector<double>{s[2] > 0 ? 2.0 : -2.0}; },
                                   pend, 4, 8);
    double m = 0.0, v = 0.0;
    for (double x : r.returns) m += x / 4;
    for (double x : r.returns) v += (x - m) * (x - m) / 4;
    CHECK(r.std == doctest::Approx(std::sqrt(v)).epsilon(1e-12));
    CHECK_THROWS_AS(evaluate_policy({}, pend, 0, 1), std::invalid_argument);
  }
}

TEST_CASE("max_episodes = 0 does nothing") {
  auto c = small_config();
  c.max_episodes = 0;
  Trainer t(c);
  const auto report = t.run();
  CHECK(report.rows.empty());
  CHECK(report.counters == TrainCounters{});
  CHECK(t.buffer().size() == 0);
}

TEST_CASE("update accounting for one 200-step episode") {
  TrainConfig c;
  c.hidden_dims = {16, 16};
  c.max_episodes = 1;
  c.eval_interval = 0;
  Trainer t(c);
  t.run();
  const auto& k = t.counters();
  CHECK(k.env_steps == 200);
  CHECK(k.critic_iterations == 200);
  CHECK(k.high_level_sessions == 1);
  CHECK(k.high_level_iterations == 4);
  CHECK(k.steps_since_burst == 0);
  CHECK(t.ensemble().central_updates() == 200);
  for (const auto& l : t.ensemble().learners()) {
    CHECK(l.critic_updates() == 200);
    CHECK(l.policy_updates() == 100);
  }
}

TEST_CASE("high-level cadence") {
  SUBCASE("fraction rounds up") {
    auto c = small_config();
    c.max_episodes = 1;
    c.high_level_fraction = 0.03;
    Trainer t(c);
    t.run();
    CHECK(t.counters().high_level_iterations == 3);
  }
  SUBCASE("fixed interval runs one block per burst") {
    auto c = small_config();
    c.max_episodes = 1;
    c.high_level_mode = HighLevelMode::fixed_interval;
    Trainer t(c);
    t.run();
    CHECK(t.counters().high_level_sessions == 4);
    CHECK(t.counters().high_level_iterations == 4);
  }
  SUBCASE("bursts carry across episode boundaries") {
    auto c = small_config();
    c.max_episodes = 2;
    c.max_episode_steps = 30;
    Trainer t(c);
    t.run();
    CHECK(t.counters().env_steps == 60);
    CHECK(t.counters().critic_iterations == 50);
    CHECK(t.counters().steps_since_burst == 10);
  }
}

TEST_CASE("deterministic runs") {
  const auto a = run_training(small_config());
  const auto b = run_training(small_config());
  REQUIRE(a.rows.size() == 2);
  for (std::size_t k = 0; k < a.rows.size(); ++k) CHECK(to_csv(a.rows[k]) == to_csv(b.rows[k]));
  CHECK(a.counters == b.counters);

  auto other = small_config();
  other.seed = 10;
  CHECK(to_csv(run_training(other).rows[0]) != to_csv(a.rows[0]));
}

TEST_CASE("parallel learner updates match the serial loop") {
  auto c = small_config();
  c.max_episodes = 2;
  Trainer serial(c, 0), parallel(c, 3);
  serial.run();
  parallel.run();
  CHECK(checkpoint_bytes(serial) == checkpoint_bytes(parallel));
}

TEST_CASE("checkpoints") {
  auto c = small_config();
  c.max_episodes = 2;
  Trainer t(c);
  t.run();
  const std::string bytes = checkpoint_bytes(t);

  SUBCASE("save, load, save is byte-identical") {
    std::istringstream in(bytes);
    const Trainer back = Trainer::read_checkpoint(in);
    CHECK(checkpoint_bytes(back) == bytes);
    CHECK(back.counters() == t.counters());
    CHECK(back.config() == t.config());
  }
  SUBCASE("file round trip") {
    const auto path = std::filesystem::temp_directory_path() / "hed_test_trainer.bin";
    t.save_checkpoint(path.string());
    CHECK(checkpoint_bytes(Trainer::load_checkpoint(path.string())) == bytes);
    std::filesystem::remove(path);
  }
  SUBCASE("bad magic") {
    std::string bad = bytes;
    bad[0] = 'X';
    std::istringstream in(bad);
    CHECK_THROWS_AS(Trainer::read_checkpoint(in), CheckpointError);
  }
  SUBCASE("truncated") {
    std::istringstream in(bytes.substr(0, bytes.size() / 2));
    CHECK_THROWS_AS(Trainer::read_checkpoint(in), CheckpointError);
  }
  SUBCASE("resume matches an uninterrupted run") {
    auto full_cfg = c;
    full_cfg.max_episodes = 4;
    Trainer full(full_cfg);
    const auto full_rows = full.run().rows;

    std::istringstream in(bytes);
    Trainer resumed = Trainer::read_checkpoint(in);
    resumed.set_max_episodes(4);
    const auto rest = resumed.run().rows;
    REQUIRE(rest.size() == 1);
    CHECK(to_csv(rest[0]) == to_csv(full_rows.back()));
    CHECK(resumed.counters() == full.counters());
    auto expect = checkpoint_bytes(full);
    auto got = checkpoint_bytes(resumed);
    CHECK(got == expect);
  }
}

TEST_CASE("thread count from the environment") {
  unsetenv("HED_THREADS");
  CHECK(threads_from_env() == 0);
  setenv("HED_THREADS", "4", 1);
  CHECK(threads_from_env() == 4);
  setenv("HED_THREADS", "four", 1);
  CHECK_THROWS_AS(threads_from_env(), std::invalid_argument);
  unsetenv("HED_THREADS");
}
