#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "hed/analysis.hpp"
#include "hed/trainer.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using namespace hed;

namespace {

struct TrainArgs {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  bool deterministic = false;
  std::string resume;
  std::optional<int> max_episodes;
};

class ProgressWriter {
 public:
  ProgressWriter(const fs::path& path, bool append) {
    const bool fresh = !append || !fs::exists(path);
    file_ = std::fopen(path.c_str(), fresh ? "wb" : "ab");
    if (!file_) throw std::runtime_error("cannot open '" + path.string() + "'");
    if (fresh) write_line(kProgressHeader);
  }
  ~ProgressWriter() { std::fclose(file_); }
  ProgressWriter(const ProgressWriter&) = delete;
  ProgressWriter& operator=(const ProgressWriter&) = delete;

  // One fwrite per row, flushed immediately.
  void write_line(const std::string& line) {
    const std::string buf = line + "\n";
    if (std::fwrite(buf.data(), 1, buf.size(), file_) != buf.size() || std::fflush(file_) != 0)
      throw std::runtime_error("failed writing progress.csv");
  }

 private:
  std::FILE* file_;
};

void write_manifest(const fs::path& dir, const Trainer& t, const nlohmann::json& checkpoints) {
  const auto& s = t.streams();
  nlohmann::json m;
  m["code_version"] = kCodeVersion;
  m["seed"] = t.config().seed;
  m["config"] = config_to_json(t.config());
  m["rng"] = {{"env", save_state(s.env)},         {"exploration", save_state(s.exploration)},
              {"acting", save_state(s.acting)},   {"batch", save_state(s.batch)},
              {"smoothing", save_state(s.smoothing)}, {"session", save_state(s.session)}};
  m["checkpoints"] = checkpoints;
  const fs::path tmp = dir / "manifest.json.tmp";
  {
    std::ofstream out(tmp);
    out << m.dump(2) << '\n';
  }
  fs::rename(tmp, dir / "manifest.json");
}

int run_train(const TrainArgs& a) {
  const int threads = a.deterministic ? 0 : threads_from_env();
  const fs::path dir(a.out_dir);
  fs::create_directories(dir);

  std::optional<Trainer> trainer;
  if (!a.resume.empty()) {
    trainer.emplace(Trainer::load_checkpoint(a.resume, threads));
  } else {
    TrainConfig cfg = a.config.empty() ? TrainConfig{} : load_config(a.config);
    if (a.seed) cfg.seed = *a.seed;
    validate(cfg);
    trainer.emplace(cfg, threads);
  }
  if (a.max_episodes) {
    if (*a.max_episodes < 0) throw ConfigError("max-episodes: must be >= 0");
    trainer->set_max_episodes(*a.max_episodes);
  }
  save_config(trainer->config(), (dir / "config.json").string());

  nlohmann::json checkpoints = nlohmann::json::array();
  if (fs::exists(dir / "manifest.json") && !a.resume.empty()) {
    std::ifstream in(dir / "manifest.json");
    const auto old = nlohmann::json::parse(in, nullptr, false);
    if (old.is_object() && old.contains("checkpoints")) checkpoints = old["checkpoints"];
  }

  ProgressWriter progress(dir / "progress.csv", !a.resume.empty());
  const int every = trainer->config().checkpoint_interval;
  trainer->run([&](const ProgressRow& row) {
    progress.write_line(to_csv(row));
    std::cout << "episode " << row.episode << "  eval " << row.eval_mean << " +- " << row.eval_std << '\n';
  },
               [&](const Trainer& t) {
                 if (every > 0 && t.counters().episodes % static_cast<std::uint64_t>(every) == 0) {
                   char name[64];
                   std::snprintf(name, sizeof name, "checkpoint_ep%06llu.bin",
                                 static_cast<unsigned long long>(t.counters().episodes));
                   t.save_checkpoint((dir / name).string());
                   checkpoints.push_back(name);
                   write_manifest(dir, t, checkpoints);
                 }
               });

  trainer->save_checkpoint((dir / "checkpoint_final.bin").string());
  checkpoints.push_back("checkpoint_final.bin");
  write_manifest(dir, *trainer, checkpoints);
  return 0;
}

int run_eval(const std::string& checkpoint, int episodes, std::optional<std::uint64_t> seed) {
  const Trainer t = Trainer::load_checkpoint(checkpoint);
  const BuiltinEnvironment env(t.env_spec());
  const EvalResult r = seed ? evaluate(t.ensemble(), env, episodes, *seed) : t.evaluate_now(episodes);
  nlohmann::json out{{"episodes", episodes}, {"mean", r.mean}, {"std", r.std}};
  std::cout << out.dump() << '\n';
  return 0;
}

struct GridArgs {
  double rho_lo = 0.05, rho_hi = 0.45, lh_lo = 0.05, lh_hi = 3.95, step = 0.05, band = 0.01;
  std::string out;
};

int run_stability(const GridArgs& g) {
  const auto points = analysis::stability_grid(analysis::grid_values(g.rho_lo, g.rho_hi, g.step),
                                               analysis::grid_values(g.lh_lo, g.lh_hi, g.step), g.band);
  std::ofstream file;
  if (!g.out.empty()) {
    file.open(g.out);
    if (!file) throw std::runtime_error("cannot write '" + g.out + "'");
  }
  std::ostream& out = g.out.empty() ? std::cout : file;
  out << "rho0,lambda_h,A0,A1,A2,A3,routh_ok,pi_root_max,empirical_converged\n";
  std::size_t checked = 0, disagreements = 0;
  char buf[256];
  for (const auto& p : points) {
    const auto& a = p.absolute.a;
    std::snprintf(buf, sizeof buf, "%.4f,%.4f,%.12g,%.12g,%.12g,%.12g,%d,%.12g,%d\n", p.rho0, p.lambda_h, a[0], a[1],
                  a[2], a[3], p.absolute.routh_ok ? 1 : 0, p.absolute.pi_root_max, p.empirical_converged ? 1 : 0);
    out << buf;
    if (p.in_band) continue;
    ++checked;
    if (!p.agree) ++disagreements;
  }
  std::cerr << "stability grid: " << checked << " points outside the band, " << disagreements << " disagreements\n";
  return disagreements == 0 ? 0 : 1;
}

int run_prop2(int scenarios, std::uint64_t seed) {
  bool ok = true;
  double worst_identity = 0.0, worst_ratio = 0.0;
  for (int k = 0; k < scenarios; ++k) {
    const auto sc = analysis::random_scenario(derive_seed(seed, static_cast<std::uint64_t>(k)));
    const auto r = analysis::prop2_check(sc);
    worst_identity = std::max(worst_identity, r.identity_residual);
    worst_ratio = std::max(worst_ratio, std::abs(r.variance_ratio - r.predicted_ratio));
    ok = ok && r.passed && r.identity_residual < analysis::kIdentityTolerance;
  }
  std::cout << "scenarios " << scenarios << "  max identity residual " << worst_identity << "  max ratio error "
            << worst_ratio << '\n';
  std::cout << "rho0,variance_ratio,predicted_ratio,contracts,passed\n";
  for (double rho0 : {0.30, 1.0 / 3.0, 0.36}) {
    auto sc = analysis::random_scenario(seed ^ 0x5A5Au, 5, 5, 4, 4);
    sc.rho0 = rho0;
    const auto r = analysis::prop2_check(sc);
    std::printf("%.6f,%.15f,%.15f,%d,%d\n", rho0, r.variance_ratio, r.predicted_ratio, r.contracts ? 1 : 0,
                r.passed ? 1 : 0);
    ok = ok && r.passed;
  }
  std::cout << (ok ? "PASS" : "FAIL") << '\n';
  return ok ? 0 : 1;
}

int run_flow(const analysis::QuadraticProblem& p) {
  const auto r = analysis::quadratic_flow_run(p);
  const auto predicted = check_absolute_stability(p.rho0, p.lambda * p.h);
  std::cout << nlohmann::json{{"converged", r.converged},
                              {"diverged", r.diverged},
                              {"iterations", r.iterations},
                              {"final_error", r.final_error},
                              {"routh_ok", predicted.routh_ok},
                              {"pi_root_max", predicted.pi_root_max}}
                   .dump()
            << '\n';
  const bool initial_at_rest = p.x0 == p.theta_star && p.x1 == p.theta_star && p.x2 == p.theta_star;
  return (initial_at_rest || r.converged == predicted.routh_ok) ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Ensemble deterministic-policy training with multi-step high-level updates"};
  app.require_subcommand(1);

  TrainArgs train;
  auto* t = app.add_subcommand("train", "Train an ensemble and write progress.csv and checkpoints");
  t->add_option("--config", train.config, "JSON config file")->check(CLI::ExistingFile);
  t->add_option("--seed", train.seed, "Override the config seed");
  t->add_option("--out-dir", train.out_dir, "Output directory")->required();
  t->add_flag("--deterministic", train.deterministic, "Single-threaded; ignores HED_THREADS");
  t->add_option("--resume", train.resume, "Continue from a checkpoint")->check(CLI::ExistingFile);
  t->add_option("--max-episodes", train.max_episodes, "Override max_episodes");

  std::string ckpt;
  int eval_episodes = 50;
  std::optional<std::uint64_t> eval_seed;
  auto* e = app.add_subcommand("eval", "Evaluate the ensemble policy stored in a checkpoint");
  e->add_option("--checkpoint", ckpt, "Checkpoint file")->required()->check(CLI::ExistingFile);
  e->add_option("--episodes", eval_episodes, "Evaluation episodes")->check(CLI::PositiveNumber);
  e->add_option("--seed", eval_seed, "Evaluation seed (default: the run's evaluation seed)");

  GridArgs grid;
  auto* s = app.add_subcommand("analyze-stability", "Routh, root and empirical stability verdicts on a grid");
  s->add_option("--rho0-min", grid.rho_lo);
  s->add_option("--rho0-max", grid.rho_hi);
  s->add_option("--lh-min", grid.lh_lo);
  s->add_option("--lh-max", grid.lh_hi);
  s->add_option("--step", grid.step);
  s->add_option("--band", grid.band, "Half-width of the excluded band around lambda_h = 2 - 4 rho0");
  s->add_option("--out", grid.out, "CSV path (default stdout)");

  int scenarios = 100;
  std::uint64_t prop2_seed = 0;
  auto* p = app.add_subcommand("verify-prop2", "Exact enumeration check of the variance-contraction identity");
  p->add_option("--scenarios", scenarios)->check(CLI::PositiveNumber);
  p->add_option("--seed", prop2_seed);

  analysis::QuadraticProblem flow;
  flow.theta_star = 3.0;
  auto* q = app.add_subcommand("quadratic-flow", "Run the recurrence on a scalar quadratic objective");
  q->add_option("--rho0", flow.rho0);
  q->add_option("--lambda", flow.lambda, "Curvature lambda (> 0)");
  q->add_option("--step-size", flow.h, "Step size h");
  q->add_option("--theta-star", flow.theta_star);
  q->add_option("--x0", flow.x0);
  q->add_option("--x1", flow.x1);
  q->add_option("--x2", flow.x2);
  q->add_option("--max-iters", flow.max_iters);
  q->add_option("--tol", flow.tol);

  CLI11_PARSE(app, argc, argv);
  try {
    if (*t) return run_train(train);
    if (*e) return run_eval(ckpt, eval_episodes, eval_seed);
    if (*s) return run_stability(grid);
    if (*p) return run_prop2(scenarios, prop2_seed);
    if (*q) return run_flow(flow);
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << '\n';
    return 2;
  }
  return 1;
}
