// Command-line front end: fit, predict, calibrate, eval, simstudy, bench,
// select-basis and design.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "spem/config.hpp"
#include "spem/csv.hpp"
#include "spem/design.hpp"
#include "spem/error.hpp"
#include "spem/eval.hpp"
#include "spem/simulator.hpp"
#include "spem/workflow.hpp"

namespace fs = std::filesystem;

namespace {

struct Globals {
  std::optional<long long> seed;
  std::optional<int> threads;
  std::optional<double> jitter;
  std::string config_path;
  std::string out;
  bool verbose = false;
  std::vector<std::string> sets;
};

void report_error(const char* kind, const std::string& message) {
  nlohmann::json rec{{"error", kind}, {"message", message}};
  std::cerr << rec.dump() << std::endl;
}

spem::Config load_with_overrides(const Globals& g) {
  spem::Config cfg;
  if (!g.config_path.empty()) cfg = spem::load_config(g.config_path);
  if (g.seed) cfg.set_literal("seed", std::to_string(*g.seed));
  if (g.threads) cfg.set_literal("threads", std::to_string(*g.threads));
  if (g.jitter) cfg.set_literal("jitter", spem::csv::format_double(*g.jitter));
  if (!g.out.empty()) {
    spem::ConfigValue v;
    v.type = spem::ConfigValue::Type::String;
    v.text = g.out;
    cfg.set("data.out", v);
  }
  for (const auto& kv : g.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw spem::Error(spem::ErrorKind::Config, "--set expects key=value, got '" + kv + "'");
    cfg.set_literal(kv.substr(0, eq), kv.substr(eq + 1));
  }
  return cfg;
}

void set_string(spem::Config& cfg, const std::string& key, const std::string& value) {
  spem::ConfigValue v;
  v.type = spem::ConfigValue::Type::String;
  v.text = value;
  cfg.set(key, v);
}

void set_number(spem::Config& cfg, const std::string& key, double value) {
  spem::ConfigValue v;
  v.number = value;
  cfg.set(key, v);
}

void set_numbers(spem::Config& cfg, const std::string& key, const std::vector<double>& values) {
  spem::ConfigValue v;
  v.type = spem::ConfigValue::Type::Array;
  for (double x : values) {
    spem::ConfigValue item;
    item.number = x;
    v.items.push_back(item);
  }
  cfg.set(key, v);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sparse Gaussian-process emulation with compactly supported correlations"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--seed", g.seed, "Random seed");
  app.add_option("--threads", g.threads, "Worker threads (0 = all cores)");
  app.add_option("--config", g.config_path, "Config file")->check(CLI::ExistingFile);
  app.add_option("--out", g.out, "Output directory");
  app.add_option("--jitter", g.jitter, "Nugget added to the correlation diagonal");
  app.add_option("--set", g.sets, "Config override key=value (repeatable)");
  app.add_flag("-v,--verbose", g.verbose, "Log chain and progress messages");

  // fit
  auto* fit = app.add_subcommand("fit", "Sample the correlation parameters and write a model bundle");
  std::string fit_train;
  std::optional<int> fit_p, fit_m, fit_iter, fit_burn, fit_stride;
  std::optional<double> fit_alpha, fit_cutoff, fit_sparsity;
  std::string fit_family;
  fit->add_option("--train", fit_train, "Training CSV (x1..xd, y)");
  fit->add_option("--basis-p", fit_p, "Maximum polynomial degree");
  fit->add_option("--basis-m", fit_m, "Maximum number of interacting inputs");
  fit->add_option("--family", fit_family, "bohman | truncpow | powexp");
  fit->add_option("--alpha", fit_alpha, "Family power");
  fit->add_option("--cutoff", fit_cutoff, "Prior cutoff C on the sum of ranges");
  fit->add_option("--sparsity", fit_sparsity, "Target worst-case nonzero proportion (calibrates C)");
  fit->add_option("--iterations", fit_iter, "MCMC iterations");
  fit->add_option("--burn-in", fit_burn, "Burn-in iterations");
  fit->add_option("--stride", fit_stride, "Thinning stride for prediction");

  // predict
  auto* pred = app.add_subcommand("predict", "Posterior predictive summaries from a model bundle");
  std::string pred_model, pred_inputs, pred_output;
  std::optional<double> pred_level;
  std::optional<long long> pred_block;
  std::optional<int> pred_draws;
  bool pred_exact = false;
  pred->add_option("--model", pred_model, "Model bundle directory")->required();
  pred->add_option("--inputs", pred_inputs, "CSV with columns x1..xd")->required();
  pred->add_option("--output", pred_output, "Predictions CSV (default <out>/predictions.csv)");
  pred->add_option("--level", pred_level, "Credible level");
  pred->add_option("--block-size", pred_block, "Prediction points per block");
  pred->add_option("--draws", pred_draws, "Number of thinned draws to use");
  pred->add_flag("--exact-intervals", pred_exact, "Quantiles of the Student-t mixture instead of the normal approximation");

  // calibrate
  auto* cal = app.add_subcommand("calibrate", "Largest cutoff C meeting a sparsity target");
  std::string cal_design;
  double cal_target = 0.02;
  cal->add_option("--design", cal_design, "CSV with columns x1..xd")->required();
  cal->add_option("--sparsity", cal_target, "Worst-case nonzero proportion");

  // eval
  auto* ev = app.add_subcommand("eval", "NSE and coverage of predictions");
  std::string ev_pred, ev_truth;
  ev->add_option("--predictions", ev_pred, "Predictions CSV")->required();
  ev->add_option("--truth", ev_truth, "CSV with a y column")->required();

  // simstudy
  auto* sim = app.add_subcommand("simstudy", "Simulation study comparing dense and sparse fits");
  std::vector<int> sim_dims;
  std::vector<double> sim_alphas, sim_ranges, sim_sparsity;
  std::vector<long long> sim_n;
  std::optional<int> sim_reps, sim_iter;
  bool sim_full = false;
  sim->add_option("--dims", sim_dims, "Input dimensions");
  sim->add_option("--alphas", sim_alphas, "Generating powers");
  sim->add_option("--ranges", sim_ranges, "Generating effective ranges");
  sim->add_option("--n", sim_n, "Training sample sizes");
  sim->add_option("--sparsity", sim_sparsity, "Sparsity targets for the sparse fits");
  sim->add_option("--replicates", sim_reps, "Replicates per condition");
  sim->add_option("--iterations", sim_iter, "MCMC iterations per fit");
  sim->add_flag("--full-grid", sim_full, "Use n = 100, 150, 250, 400, 650, 1100");

  // bench
  auto* bench = app.add_subcommand("bench", "Per-step timing of the sparse and dense paths");
  std::vector<long long> bench_n;
  std::vector<double> bench_sparsity;
  std::optional<int> bench_d, bench_repeats;
  std::optional<long long> bench_cap;
  bench->add_option("--n", bench_n, "Sample sizes");
  bench->add_option("--sparsity", bench_sparsity, "Sparsity targets");
  bench->add_option("--d", bench_d, "Input dimension");
  bench->add_option("--repeats", bench_repeats, "Repeats per cell");
  bench->add_option("--dense-cap", bench_cap, "Skip the dense baseline above this n");

  // select-basis
  auto* sel = app.add_subcommand("select-basis", "Compare Legendre bases by holdout NSE");
  std::string sel_train, sel_holdout;
  double sel_fraction = 0.2;
  std::vector<int> sel_degrees{1, 2, 3, 4, 5};
  std::vector<int> sel_inter{1, 2, 3};
  sel->add_option("--train", sel_train, "CSV with x1..xd, y")->required();
  sel->add_option("--holdout", sel_holdout, "Separate holdout CSV");
  sel->add_option("--holdout-fraction", sel_fraction, "Fraction held out when no holdout CSV is given");
  sel->add_option("--degrees", sel_degrees, "Candidate maximum degrees");
  sel->add_option("--interactions", sel_inter, "Candidate interaction orders");

  // design
  auto* des = app.add_subcommand("design", "Generate a Latin hypercube (or uniform) design");
  long long des_n = 100;
  long long des_d = 2;
  bool des_uniform = false;
  std::string des_output;
  des->add_option("--n", des_n, "Number of points")->required();
  des->add_option("--d", des_d, "Dimension")->required();
  des->add_flag("--uniform", des_uniform, "Independent uniform points instead of a Latin hypercube");
  des->add_option("--output", des_output, "Design CSV (default <out>/design.csv)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    report_error("config", e.what());
    return 4;
  }

  auto log = [&](const std::string& msg) {
    if (g.verbose || msg.rfind("warning", 0) == 0) std::cerr << msg << '\n';
  };
  auto out_path = [&](const std::string& explicit_path, const std::string& name) -> fs::path {
    if (!explicit_path.empty()) return explicit_path;
    if (g.out.empty()) return name;
    fs::create_directories(g.out);
    return fs::path(g.out) / name;
  };

  try {
    spem::Config cfg = load_with_overrides(g);
    if (fit->parsed()) {
      if (!fit_train.empty()) set_string(cfg, "data.train", fit_train);
      if (fit_p) set_number(cfg, "basis.p", *fit_p);
      if (fit_m) set_number(cfg, "basis.m", *fit_m);
      if (!fit_family.empty()) set_string(cfg, "model.family", fit_family);
      if (fit_alpha) set_number(cfg, "model.alpha", *fit_alpha);
      if (fit_cutoff) set_number(cfg, "model.cutoff", *fit_cutoff);
      if (fit_sparsity) set_number(cfg, "model.sparsity", *fit_sparsity);
      if (fit_iter) set_number(cfg, "mcmc.iterations", *fit_iter);
      if (fit_burn) set_number(cfg, "mcmc.burn_in", *fit_burn);
      if (fit_stride) set_number(cfg, "mcmc.stride", *fit_stride);
      const auto rc = spem::RunConfig::from_config(cfg);
      const auto res = spem::cmd_fit(rc, log);
      std::printf("bundle=%s iterations=%zu acceptance=%.4f cutoff=%s q=%ld\n", res.bundle.string().c_str(),
                  res.chain.size(), res.chain.acceptance_rate(), spem::csv::format_double(res.cutoff).c_str(),
                  static_cast<long>(res.q));
    } else if (pred->parsed()) {
      spem::PredictRequest req;
      req.bundle = pred_model;
      req.inputs = pred_inputs;
      req.output = out_path(pred_output, "predictions.csv");
      req.level = pred_level;
      if (pred_block) req.block_size = *pred_block;
      req.draws = pred_draws;
      if (pred_exact) req.exact_intervals = true;
      req.threads = static_cast<int>(cfg.integer_or("threads", 0));
      const auto res = spem::cmd_predict(req, log);
      std::printf("predictions=%s rows=%ld draws=%zu extrapolated=%ld\n", req.output.string().c_str(),
                  static_cast<long>(res.inputs.rows()), res.draws_used, static_cast<long>(res.extrapolated));
    } else if (cal->parsed()) {
      spem::CalibrationOptions opts;
      opts.seed = static_cast<std::uint64_t>(cfg.integer_or("seed", static_cast<long long>(opts.seed)));
      opts.tolerance = cfg.number_or("calibration.tolerance", opts.tolerance);
      opts.restarts = static_cast<int>(cfg.integer_or("calibration.restarts", opts.restarts));
      opts.max_points = cfg.integer_or("calibration.max_points", opts.max_points);
      const auto rep = spem::cmd_calibrate(cal_design, cal_target, opts);
      std::string tau;
      for (Eigen::Index k = 0; k < rep.maximizer.size(); ++k) {
        tau += (k ? "," : "") + spem::csv::format_double(rep.maximizer(k));
      }
      std::printf("cutoff=%s achieved=%s maximizer=%s points_used=%ld subsampled=%s\n",
                  spem::csv::format_double(rep.cutoff).c_str(), spem::csv::format_double(rep.achieved).c_str(),
                  tau.c_str(), static_cast<long>(rep.points_used), rep.subsampled ? "true" : "false");
    } else if (ev->parsed()) {
      const auto r = spem::cmd_eval(ev_pred, ev_truth);
      std::printf("n=%ld nse=%s coverage=%s level=%s\n", static_cast<long>(r.n), spem::csv::format_double(r.nse).c_str(),
                  spem::csv::format_double(r.coverage).c_str(), spem::csv::format_double(r.level).c_str());
    } else if (sim->parsed()) {
      if (!sim_dims.empty()) set_numbers(cfg, "simstudy.dims", {sim_dims.begin(), sim_dims.end()});
      if (!sim_alphas.empty()) set_numbers(cfg, "simstudy.alphas", sim_alphas);
      if (!sim_ranges.empty()) set_numbers(cfg, "simstudy.ranges", sim_ranges);
      if (!sim_n.empty()) set_numbers(cfg, "simstudy.n", {sim_n.begin(), sim_n.end()});
      if (!sim_sparsity.empty()) set_numbers(cfg, "simstudy.sparsity", sim_sparsity);
      if (sim_reps) set_number(cfg, "simstudy.replicates", *sim_reps);
      if (sim_iter) set_number(cfg, "simstudy.iterations", *sim_iter);
      if (sim_full) cfg.set_literal("simstudy.full_grid", "true");
      const auto sc = spem::sim_study_config(cfg);
      const fs::path dir = g.out.empty() ? fs::path("simstudy") : fs::path(g.out);
      fs::create_directories(dir);
      spem::save_config(dir / "config.toml", cfg);
      const auto res = spem::run_sim_study(sc, log);
      spem::write_sim_study(dir, res);
      for (const auto& row : res.summary) {
        std::printf("%s %-12s n=%-5ld nse=%.4f (se %.4f) coverage=%.4f (se %.4f) failed=%d\n", row.condition.c_str(),
                    row.method.c_str(), static_cast<long>(row.n), row.nse_mean, row.nse_se, row.coverage_mean,
                    row.coverage_se, row.failed);
      }
    } else if (bench->parsed()) {
      if (!bench_n.empty()) set_numbers(cfg, "bench.n", {bench_n.begin(), bench_n.end()});
      if (!bench_sparsity.empty()) set_numbers(cfg, "bench.sparsity", bench_sparsity);
      if (bench_d) set_number(cfg, "bench.d", *bench_d);
      if (bench_repeats) set_number(cfg, "bench.repeats", *bench_repeats);
      if (bench_cap) set_number(cfg, "bench.dense_cap", static_cast<double>(*bench_cap));
      const auto opts = spem::benchmark_options(cfg);
      const auto report = spem::timing_benchmark(opts);
      spem::write_timing_csv(out_path("", "timing.csv"), report);
      std::cout << spem::timing_summary(report);
    } else if (sel->parsed()) {
      spem::SelectBasisRequest req;
      req.train = sel_train;
      if (!sel_holdout.empty()) req.holdout = fs::path(sel_holdout);
      req.holdout_fraction = sel_fraction;
      req.degrees = sel_degrees;
      req.interactions = sel_inter;
      req.seed = static_cast<std::uint64_t>(cfg.integer_or("seed", 1));
      const auto selection = spem::cmd_select_basis(req);
      const fs::path table = out_path("", "basis_selection.csv");
      spem::write_basis_table(table, selection);
      std::printf("p,m,q,nse\n");
      for (const auto& r : selection.report) {
        std::printf("%d,%d,%ld,%s\n", r.spec.p, r.spec.m, static_cast<long>(r.q), spem::csv::format_double(r.nse).c_str());
      }
      std::printf("selected p=%d m=%d\n", selection.best.p, selection.best.m);
    } else if (des->parsed()) {
      const auto seed = static_cast<std::uint64_t>(cfg.integer_or("seed", 1));
      const auto design = des_uniform ? spem::uniform_design(des_n, des_d, seed) : spem::latin_hypercube(des_n, des_d, seed);
      const fs::path path = out_path(des_output, "design.csv");
      spem::write_design_csv(path, design);
      std::printf("design=%s n=%lld d=%lld\n", path.string().c_str(), des_n, des_d);
    }
  } catch (const spem::Error& e) {
    report_error(spem::kind_name(e.kind()), e.what());
    return spem::exit_code_for(e.kind());
  } catch (const std::exception& e) {
    report_error("internal", e.what());
    return 1;
  }
  return 0;
}
