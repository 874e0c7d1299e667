#include "spem/workflow.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <set>

#include "spem/csv.hpp"
#include "spem/design.hpp"
#include "spem/parallel.hpp"
#include "spem/sparsecov.hpp"

namespace spem {

namespace {

ConfigValue number_value(double x) {
  ConfigValue v;
  v.type = ConfigValue::Type::Number;
  v.number = x;
  return v;
}

ConfigValue string_value(const std::string& s) {
  ConfigValue v;
  v.type = ConfigValue::Type::String;
  v.text = s;
  return v;
}

ConfigValue bool_value(bool b) {
  ConfigValue v;
  v.type = ConfigValue::Type::Bool;
  v.boolean = b;
  return v;
}

ConfigValue array_value(const std::vector<double>& xs) {
  ConfigValue v;
  v.type = ConfigValue::Type::Array;
  for (double x : xs) v.items.push_back(number_value(x));
  return v;
}

int to_int(long long v, const std::string& key) {
  if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max()) {
    throw Error(ErrorKind::Config, "config key '" + key + "' is out of range");
  }
  return static_cast<int>(v);
}

std::uint64_t to_seed(long long v) {
  if (v < 0) throw Error(ErrorKind::Config, "seed must be nonnegative");
  return static_cast<std::uint64_t>(v);
}

std::vector<std::size_t> spread_draws(const std::vector<std::size_t>& draws, std::optional<int> k) {
  if (!k) return draws;
  if (*k < 1) throw Error(ErrorKind::Config, "number of draws must be at least 1");
  const std::size_t want = static_cast<std::size_t>(*k);
  if (want >= draws.size()) return draws;
  std::vector<std::size_t> out;
  out.reserve(want);
  for (std::size_t i = 0; i < want; ++i) out.push_back(draws[i * draws.size() / want]);
  return out;
}

ProductCorrelationModel base_model(const CorrelationFamily& family, const ParameterPrior& prior, Index d) {
  if (family.compact_support()) return ProductCorrelationModel::broadcast(family, RangeVector(default_initial(prior)));
  return ProductCorrelationModel::broadcast(family, RangeVector(Eigen::VectorXd::Ones(d)));
}

ParameterPrior make_prior(const RunConfig& config, const CorrelationFamily& family, double cutoff, Index d) {
  if (family.compact_support()) return SimplexPrior(cutoff, d);
  const double lo = effective_range_to_phi(config.range_high, family.alpha);
  const double hi = effective_range_to_phi(config.range_low, family.alpha);
  return BoxPrior(Eigen::VectorXd::Constant(d, lo), Eigen::VectorXd::Constant(d, hi));
}

}  // namespace

RunConfig RunConfig::from_config(const Config& cfg) {
  RunConfig rc;
  rc.train = cfg.string_or("data.train", "");
  rc.out = cfg.string_or("data.out", "");
  rc.basis_degree = to_int(cfg.integer_or("basis.p", rc.basis_degree), "basis.p");
  rc.basis_interaction = to_int(cfg.integer_or("basis.m", rc.basis_interaction), "basis.m");
  rc.family = cfg.string_or("model.family", rc.family);
  rc.alpha = cfg.number_or("model.alpha", rc.family == "powexp" ? 1.5 : (rc.family == "truncpow" ? 1.5 : 1.0));
  rc.nu = cfg.number("model.nu");
  rc.cutoff = cfg.number("model.cutoff");
  rc.sparsity = cfg.number("model.sparsity");
  rc.range_low = cfg.number_or("model.range_low", rc.range_low);
  rc.range_high = cfg.number_or("model.range_high", rc.range_high);

  rc.mcmc.iterations = to_int(cfg.integer_or("mcmc.iterations", rc.mcmc.iterations), "mcmc.iterations");
  rc.mcmc.burn_in = to_int(cfg.integer_or("mcmc.burn_in", rc.mcmc.iterations / 6), "mcmc.burn_in");
  rc.mcmc.stride = to_int(cfg.integer_or("mcmc.stride", rc.mcmc.stride), "mcmc.stride");
  rc.mcmc.lap.adapt = cfg.boolean_or("mcmc.adapt", rc.mcmc.lap.adapt);
  rc.mcmc.lap.target_acceptance = cfg.number_or("mcmc.target_acceptance", rc.mcmc.lap.target_acceptance);
  rc.mcmc.lap.block_length = to_int(cfg.integer_or("mcmc.block_length", rc.mcmc.lap.block_length), "mcmc.block_length");
  rc.mcmc.lap.decay = cfg.number_or("mcmc.decay", rc.mcmc.lap.decay);

  rc.calibration.tolerance = cfg.number_or("calibration.tolerance", rc.calibration.tolerance);
  rc.calibration.restarts = to_int(cfg.integer_or("calibration.restarts", rc.calibration.restarts), "calibration.restarts");
  rc.calibration.max_points = cfg.integer_or("calibration.max_points", rc.calibration.max_points);

  rc.level = cfg.number_or("predict.level", rc.level);
  rc.block_size = cfg.integer_or("predict.block_size", rc.block_size);
  if (auto k = cfg.integer("predict.draws")) rc.draws = to_int(*k, "predict.draws");
  rc.exact_intervals = cfg.boolean_or("predict.exact_intervals", rc.exact_intervals);

  rc.seed = to_seed(cfg.integer_or("seed", static_cast<long long>(rc.seed)));
  rc.jitter = cfg.number_or("jitter", rc.jitter);
  rc.threads = to_int(cfg.integer_or("threads", rc.threads), "threads");
  rc.mcmc.seed = rc.seed;
  rc.calibration.seed = rc.seed;
  return rc;
}

Config RunConfig::to_config() const {
  Config c;
  c.set("data.train", string_value(train.string()));
  c.set("data.out", string_value(out.string()));
  c.set("basis.p", number_value(basis_degree));
  c.set("basis.m", number_value(basis_interaction));
  c.set("model.family", string_value(family));
  c.set("model.alpha", number_value(alpha));
  if (nu) c.set("model.nu", number_value(*nu));
  if (cutoff) c.set("model.cutoff", number_value(*cutoff));
  if (sparsity) c.set("model.sparsity", number_value(*sparsity));
  c.set("model.range_low", number_value(range_low));
  c.set("model.range_high", number_value(range_high));
  c.set("mcmc.iterations", number_value(mcmc.iterations));
  c.set("mcmc.burn_in", number_value(mcmc.burn_in));
  c.set("mcmc.stride", number_value(mcmc.stride));
  c.set("mcmc.adapt", bool_value(mcmc.lap.adapt));
  c.set("mcmc.target_acceptance", number_value(mcmc.lap.target_acceptance));
  c.set("mcmc.block_length", number_value(mcmc.lap.block_length));
  c.set("mcmc.decay", number_value(mcmc.lap.decay));
  c.set("calibration.tolerance", number_value(calibration.tolerance));
  c.set("calibration.restarts", number_value(calibration.restarts));
  c.set("calibration.max_points", number_value(static_cast<double>(calibration.max_points)));
  c.set("predict.level", number_value(level));
  c.set("predict.block_size", number_value(static_cast<double>(block_size)));
  if (draws) c.set("predict.draws", number_value(*draws));
  c.set("predict.exact_intervals", bool_value(exact_intervals));
  c.set("seed", number_value(static_cast<double>(seed)));
  c.set("jitter", number_value(jitter));
  c.set("threads", number_value(threads));
  return c;
}

CorrelationFamily RunConfig::correlation_family() const {
  if (family == "bohman") return CorrelationFamily::bohman();
  if (family == "truncpow") return CorrelationFamily::truncated_power(alpha, nu);
  if (family == "powexp") return CorrelationFamily::power_exponential(alpha, 1.0);
  throw Error(ErrorKind::Config, "unknown correlation family '" + family + "' (bohman, truncpow, powexp)");
}

void RunConfig::validate_for_fit() const {
  if (train.empty()) throw Error(ErrorKind::Config, "no training CSV given");
  if (out.empty()) throw Error(ErrorKind::Config, "no output directory given");
  if (!std::filesystem::exists(train)) throw Error(ErrorKind::Schema, "training CSV '" + train.string() + "' not found");
  const auto fam = correlation_family();
  if (fam.compact_support()) {
    if (cutoff.has_value() == sparsity.has_value()) {
      throw Error(ErrorKind::Config, "give exactly one of model.cutoff and model.sparsity");
    }
    if (cutoff && !(*cutoff > 0.0)) throw Error(ErrorKind::Config, "cutoff must be positive");
    if (sparsity && !(*sparsity > 0.0 && *sparsity < 1.0)) throw Error(ErrorKind::Config, "sparsity must lie in (0, 1)");
  } else if (!(range_low > 0.0 && range_high > range_low)) {
    throw Error(ErrorKind::Config, "effective-range prior needs 0 < range_low < range_high");
  }
  if (!(level > 0.0 && level < 1.0)) throw Error(ErrorKind::Config, "level must lie in (0, 1)");
  if (block_size < 1) throw Error(ErrorKind::Config, "block size must be positive");
  if (jitter < 0.0) throw Error(ErrorKind::Config, "jitter must be nonnegative");
  mcmc.validate();
}

TrainingTable read_training_csv(const std::filesystem::path& path, bool require_y) {
  const csv::Table t = csv::read_file(path);
  TrainingTable out;
  Index d = 0;
  while (t.column_index("x" + std::to_string(d + 1)) >= 0) ++d;
  if (d == 0) throw Error(ErrorKind::Schema, "'" + path.string() + "' has no x1 column");
  out.inputs.resize(t.values.rows(), d);
  for (Index k = 0; k < d; ++k) out.inputs.col(k) = t.values.col(t.column_index("x" + std::to_string(k + 1)));
  const Index yc = t.column_index("y");
  if (yc < 0) {
    if (require_y) throw Error(ErrorKind::Schema, "'" + path.string() + "' has no y column");
  } else {
    out.y = t.values.col(yc);
  }
  return out;
}

Eigen::MatrixXd read_inputs_csv(const std::filesystem::path& path, Index d) {
  const csv::Table t = csv::read_file(path);
  Eigen::MatrixXd x(t.values.rows(), d);
  for (Index k = 0; k < d; ++k) {
    const Index c = t.column_index("x" + std::to_string(k + 1));
    if (c < 0) throw Error(ErrorKind::Schema, "'" + path.string() + "' lacks column x" + std::to_string(k + 1));
    x.col(k) = t.values.col(c);
  }
  if (t.column_index("x" + std::to_string(d + 1)) >= 0) {
    throw Error(ErrorKind::Schema, "'" + path.string() + "' has more input columns than the model (d=" +
                                       std::to_string(d) + ")");
  }
  return x;
}

FitResult cmd_fit(const RunConfig& config, const Logger& log) {
  config.validate_for_fit();
  const TrainingTable table = read_training_csv(config.train);
  const Index n = table.inputs.rows();
  const Index d = table.inputs.cols();
  if (n < 2) throw Error(ErrorKind::Schema, "training data needs at least two rows");
  const ScalingSpec scaling = ScalingSpec::from_data(table.inputs);
  const DesignMatrix x = rescale_inputs(table.inputs, scaling);
  const BasisSpec basis(config.basis_degree, std::min<int>(config.basis_interaction, static_cast<int>(d)),
                        static_cast<int>(d));
  const Eigen::MatrixXd f = build_basis_matrix(x, basis);
  if (n <= f.cols() + 2) {
    throw Error(ErrorKind::Config, "n = " + std::to_string(n) + " must exceed q + 2 = " + std::to_string(f.cols() + 2));
  }
  const RegressionData data(x, table.y, f);
  const CorrelationFamily family = config.correlation_family();

  FitResult result;
  result.q = f.cols();
  if (family.compact_support()) {
    if (config.cutoff) {
      result.cutoff = *config.cutoff;
    } else {
      const CalibrationReport cal = calibrate_cutoff(x, *config.sparsity, config.calibration);
      result.cutoff = cal.cutoff;
      if (log) {
        log("calibrated cutoff C = " + csv::format_double(cal.cutoff) + " (worst-case nonzero proportion " +
            csv::format_double(cal.achieved) + ")");
      }
    }
  }
  const ParameterPrior prior = make_prior(config, family, result.cutoff, d);
  const ProductCorrelationModel base = base_model(family, prior, d);
  FactorOptions fopts;
  fopts.jitter = config.jitter;

  MCMCConfig mcmc = config.mcmc;
  mcmc.seed = config.seed;
  if (!family.compact_support() && mcmc.initial.size() == 0) {
    const auto& box = std::get<BoxPrior>(prior);
    mcmc.initial = isotropic_pilot(data, base, box.lower(0), box.upper(0), 20, fopts);
    mcmc.initial_proposal = (0.1 * mcmc.initial).array().square().matrix().asDiagonal();
  }
  result.chain = metropolis_run(mcmc, data, base, prior, fopts, log);
  if (log) {
    log("chain: " + std::to_string(result.chain.size()) + " iterations, acceptance " +
        csv::format_double(result.chain.acceptance_rate()));
  }

  namespace fs = std::filesystem;
  const fs::path dir = config.out;
  fs::create_directories(dir);
  {
    csv::Table t;
    t.columns = design_columns(d);
    t.columns.push_back("y");
    t.values.resize(n, d + 1);
    t.values.leftCols(d) = table.inputs;
    t.values.col(d) = table.y;
    csv::write_file(dir / "train.csv", t);
  }
  write_scaling_csv(dir / "scaling.csv", scaling);
  RunConfig echo = config;
  echo.train = fs::absolute(config.train);
  echo.out = fs::absolute(config.out);
  save_config(dir / "config.toml", echo.to_config());
  write_chain_csv((dir / "chain.csv").string(), result.chain, family.compact_support() ? "tau_" : "phi_");
  write_terms_csv((dir / "terms.csv").string(), enumerate_terms(basis));

  Config meta;
  meta.set("d", number_value(static_cast<double>(d)));
  meta.set("n", number_value(static_cast<double>(n)));
  meta.set("q", number_value(static_cast<double>(result.q)));
  meta.set("family", string_value(family.name()));
  meta.set("alpha", number_value(family.alpha));
  meta.set("nu", number_value(family.nu));
  meta.set("cutoff", number_value(result.cutoff));
  meta.set("basis.p", number_value(basis.p));
  meta.set("basis.m", number_value(basis.m));
  meta.set("burn_in", number_value(mcmc.burn_in));
  meta.set("stride", number_value(mcmc.stride));
  meta.set("acceptance", number_value(result.chain.acceptance_rate()));
  meta.set("out_of_support", number_value(static_cast<double>(result.chain.out_of_support)));
  meta.set("numerical_rejections", number_value(static_cast<double>(result.chain.numerical_rejections)));
  if (!family.compact_support()) {
    const auto& box = std::get<BoxPrior>(prior);
    meta.set("prior.lower", array_value({box.lower.data(), box.lower.data() + box.lower.size()}));
    meta.set("prior.upper", array_value({box.upper.data(), box.upper.data() + box.upper.size()}));
  }
  save_config(dir / "model.toml", meta);
  result.bundle = dir;
  return result;
}

PredictResult cmd_predict(const PredictRequest& request, const Logger& log) {
  namespace fs = std::filesystem;
  const fs::path& dir = request.bundle;
  for (const char* name : {"model.toml", "config.toml", "train.csv", "scaling.csv", "chain.csv"}) {
    if (!fs::exists(dir / name)) throw Error(ErrorKind::Schema, "model bundle lacks " + std::string(name));
  }
  const Config meta = load_config(dir / "model.toml");
  const RunConfig config = RunConfig::from_config(load_config(dir / "config.toml"));
  const Index d = meta.integer_or("d", 0);
  const TrainingTable table = read_training_csv(dir / "train.csv");
  if (table.inputs.cols() != d) throw Error(ErrorKind::Schema, "bundle training data does not match its metadata");
  const ScalingSpec scaling = read_scaling_csv(dir / "scaling.csv");
  const DesignMatrix x = rescale_inputs(table.inputs, scaling);
  const BasisSpec basis(to_int(meta.integer_or("basis.p", 0), "basis.p"), to_int(meta.integer_or("basis.m", 1), "basis.m"),
                        static_cast<int>(d));
  const RegressionData data(x, table.y, build_basis_matrix(x, basis));

  PredictResult result;
  result.inputs = read_inputs_csv(request.inputs, d);
  const Eigen::MatrixXd x0 = rescale_unchecked(result.inputs, scaling);
  const double eps = 1e-12;
  for (Index i = 0; i < x0.rows(); ++i) {
    if ((x0.row(i).array() < -eps).any() || (x0.row(i).array() > 1.0 + eps).any()) ++result.extrapolated;
  }
  if (result.extrapolated > 0 && log) {
    log("warning: " + std::to_string(result.extrapolated) +
        " prediction inputs lie outside the training box; these are extrapolations");
  }
  const Eigen::MatrixXd f0 = build_basis_rows(x0, basis);

  const CorrelationFamily family = config.correlation_family();
  const double cutoff = meta.number_or("cutoff", 0.0);
  ParameterPrior prior = family.compact_support() ? ParameterPrior(SimplexPrior(cutoff, d))
                                                  : ParameterPrior(BoxPrior::cube(1.0, d));
  const ProductCorrelationModel base = base_model(family, prior, d);
  const Chain chain = read_chain_csv((dir / "chain.csv").string(), to_int(meta.integer_or("burn_in", 0), "burn_in"),
                                     to_int(meta.integer_or("stride", 1), "stride"));
  if (!chain.states.empty() && chain.states.front().size() != d) {
    throw Error(ErrorKind::Schema, "chain parameter count does not match the model dimension");
  }
  const auto draws = spread_draws(chain.thinned(), request.draws ? request.draws : config.draws);
  if (draws.empty()) throw Error(ErrorKind::Config, "no retained draws after burn-in and thinning");
  result.draws_used = draws.size();

  FactorOptions fopts;
  fopts.jitter = config.jitter;
  PredictOptions popts;
  popts.block_size = request.block_size.value_or(config.block_size);
  popts.threads = resolve_threads(request.threads > 0 ? request.threads : config.threads);
  const double level = request.level.value_or(config.level);
  const auto moments = moments_for_draws(chain, draws, data, base, x0, f0, fopts, popts);
  result.summary = aggregate_predictions(moments, level);
  if (request.exact_intervals.value_or(config.exact_intervals)) {
    auto iv = mixture_credible_interval(moments, static_cast<double>(data.n() - data.q()), level);
    result.summary.lower = std::move(iv.lower);
    result.summary.upper = std::move(iv.upper);
  }
  if (!request.output.empty()) write_predictions_csv(request.output, result.inputs, result.summary);
  if (log) log("predicted " + std::to_string(x0.rows()) + " points from " + std::to_string(draws.size()) + " draws");
  return result;
}

void write_predictions_csv(const std::filesystem::path& path, const Eigen::MatrixXd& inputs,
                           const PredictiveSummary& summary) {
  csv::Table t;
  const Index d = inputs.cols();
  t.columns = design_columns(d);
  for (const char* c : {"mean", "variance", "lower", "upper"}) t.columns.emplace_back(c);
  t.comments.push_back("level=" + csv::format_double(summary.level));
  t.values.resize(inputs.rows(), d + 4);
  t.values.leftCols(d) = inputs;
  t.values.col(d) = summary.mean;
  t.values.col(d + 1) = summary.variance;
  t.values.col(d + 2) = summary.lower;
  t.values.col(d + 3) = summary.upper;
  csv::write_file(path, t);
}

EvalResult cmd_eval(const std::filesystem::path& predictions, const std::filesystem::path& truth) {
  const csv::Table p = csv::read_file(predictions);
  const csv::Table t = csv::read_file(truth);
  const Index mc = p.column_index("mean");
  const Index lc = p.column_index("lower");
  const Index uc = p.column_index("upper");
  if (mc < 0 || lc < 0 || uc < 0) throw Error(ErrorKind::Schema, "predictions need mean, lower and upper columns");
  const Index yc = t.column_index("y");
  if (yc < 0) throw Error(ErrorKind::Schema, "truth CSV needs a y column");
  if (p.values.rows() != t.values.rows()) throw Error(ErrorKind::Schema, "predictions and truth differ in row count");
  EvalResult r;
  r.n = p.values.rows();
  r.level = std::numeric_limits<double>::quiet_NaN();
  for (const auto& c : p.comments) {
    if (c.rfind("level=", 0) == 0) r.level = std::stod(c.substr(6));
  }
  const Eigen::VectorXd y = t.values.col(yc);
  r.nse = nse(p.values.col(mc), y);
  r.coverage = empirical_coverage(p.values.col(lc), p.values.col(uc), y);
  return r;
}

CalibrationReport cmd_calibrate(const std::filesystem::path& design, double target, const CalibrationOptions& options) {
  const TrainingTable table = read_training_csv(design, false);
  const DesignMatrix x = rescale_inputs(table.inputs, ScalingSpec::from_data(table.inputs));
  return calibrate_cutoff(x, target, options);
}

BasisSelection cmd_select_basis(const SelectBasisRequest& request) {
  const TrainingTable table = read_training_csv(request.train);
  const ScalingSpec scaling = ScalingSpec::from_data(table.inputs);
  const Index d = table.inputs.cols();
  DesignMatrix train_x;
  DesignMatrix hold_x;
  Eigen::VectorXd train_y;
  Eigen::VectorXd hold_y;
  if (request.holdout) {
    const TrainingTable h = read_training_csv(*request.holdout);
    if (h.inputs.cols() != d) throw Error(ErrorKind::Schema, "holdout has a different number of inputs");
    train_x = rescale_inputs(table.inputs, scaling);
    train_y = table.y;
    hold_x = rescale_inputs(h.inputs, scaling, true);
    hold_y = h.y;
  } else {
    if (!(request.holdout_fraction > 0.0 && request.holdout_fraction < 1.0)) {
      throw Error(ErrorKind::Config, "holdout fraction must lie in (0, 1)");
    }
    const DesignMatrix all = rescale_inputs(table.inputs, scaling);
    std::vector<Index> order(static_cast<std::size_t>(all.n()));
    std::iota(order.begin(), order.end(), Index{0});
    std::mt19937_64 rng(request.seed);
    std::shuffle(order.begin(), order.end(), rng);
    const auto n_hold = static_cast<std::size_t>(std::llround(request.holdout_fraction * static_cast<double>(all.n())));
    if (n_hold < 2 || n_hold + 2 > order.size()) throw Error(ErrorKind::Config, "holdout split leaves too few rows");
    std::vector<Index> hold(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_hold));
    std::vector<Index> fit(order.begin() + static_cast<std::ptrdiff_t>(n_hold), order.end());
    std::sort(hold.begin(), hold.end());
    std::sort(fit.begin(), fit.end());
    train_x = all.subset(fit);
    hold_x = all.subset(hold);
    train_y.resize(static_cast<Index>(fit.size()));
    hold_y.resize(static_cast<Index>(hold.size()));
    for (std::size_t i = 0; i < fit.size(); ++i) train_y(static_cast<Index>(i)) = table.y(fit[i]);
    for (std::size_t i = 0; i < hold.size(); ++i) hold_y(static_cast<Index>(i)) = table.y(hold[i]);
  }
  std::vector<BasisSpec> candidates;
  std::set<std::pair<int, int>> seen;
  for (int p : request.degrees) {
    for (int m : request.interactions) {
      const int mm = std::min<int>(m, static_cast<int>(d));
      if (seen.insert({p, mm}).second) candidates.emplace_back(p, mm, static_cast<int>(d));
    }
  }
  if (candidates.empty()) throw Error(ErrorKind::Config, "no basis candidates");
  return select_basis(train_x, train_y, hold_x, hold_y, candidates);
}

void write_basis_table(const std::filesystem::path& path, const BasisSelection& selection) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::Schema, "cannot write '" + path.string() + "'");
  out << "p,m,q,nse,selected\n";
  for (const auto& r : selection.report) {
    out << r.spec.p << ',' << r.spec.m << ',' << r.q << ',' << csv::format_double(r.nse) << ','
        << (r.spec == selection.best ? 1 : 0) << '\n';
  }
}

SimStudyConfig sim_study_config(const Config& cfg) {
  SimStudyConfig sc;
  auto ints = [&](const std::string& key, auto& dst) {
    if (auto v = cfg.numbers(key)) {
      dst.clear();
      for (double x : *v) {
        if (std::floor(x) != x) throw Error(ErrorKind::Config, "config key '" + key + "' needs integers");
        dst.push_back(static_cast<typename std::decay_t<decltype(dst)>::value_type>(x));
      }
    }
  };
  ints("simstudy.dims", sc.dims);
  if (auto v = cfg.numbers("simstudy.alphas")) sc.alphas = *v;
  if (auto v = cfg.numbers("simstudy.ranges")) sc.effective_ranges = *v;
  ints("simstudy.n", sc.n_grid);
  if (auto v = cfg.numbers("simstudy.sparsity")) sc.sparsity_targets = *v;
  sc.replicates = to_int(cfg.integer_or("simstudy.replicates", sc.replicates), "simstudy.replicates");
  sc.n_eval = cfg.integer_or("simstudy.n_eval", sc.n_eval);
  sc.level = cfg.number_or("simstudy.level", sc.level);
  sc.iterations = to_int(cfg.integer_or("simstudy.iterations", sc.iterations), "simstudy.iterations");
  sc.burn_in = to_int(cfg.integer_or("simstudy.burn_in", sc.burn_in), "simstudy.burn_in");
  sc.stride = to_int(cfg.integer_or("simstudy.stride", sc.stride), "simstudy.stride");
  sc.sparse_alpha = cfg.number_or("simstudy.sparse_alpha", sc.sparse_alpha);
  sc.basis_degree = to_int(cfg.integer_or("simstudy.basis_p", sc.basis_degree), "simstudy.basis_p");
  sc.basis_interaction = to_int(cfg.integer_or("simstudy.basis_m", sc.basis_interaction), "simstudy.basis_m");
  sc.range_low = cfg.number_or("simstudy.range_low", sc.range_low);
  sc.range_high = cfg.number_or("simstudy.range_high", sc.range_high);
  sc.run_dense = cfg.boolean_or("simstudy.dense", sc.run_dense);
  sc.generating_jitter = cfg.number_or("simstudy.generating_jitter", sc.generating_jitter);
  if (cfg.boolean_or("simstudy.full_grid", false)) sc.n_grid = {100, 150, 250, 400, 650, 1100};
  sc.seed = to_seed(cfg.integer_or("seed", static_cast<long long>(sc.seed)));
  sc.threads = to_int(cfg.integer_or("threads", sc.threads), "threads");
  sc.validate();
  return sc;
}

BenchmarkOptions benchmark_options(const Config& cfg) {
  BenchmarkOptions b;
  if (auto v = cfg.numbers("bench.n")) {
    b.n_grid.clear();
    for (double x : *v) b.n_grid.push_back(static_cast<Index>(x));
  }
  if (auto v = cfg.numbers("bench.sparsity")) b.sparsity_grid = *v;
  b.d = cfg.integer_or("bench.d", b.d);
  b.repeats = to_int(cfg.integer_or("bench.repeats", b.repeats), "bench.repeats");
  b.dense_cap = cfg.integer_or("bench.dense_cap", b.dense_cap);
  b.run_dense = cfg.boolean_or("bench.dense", b.run_dense);
  b.seed = to_seed(cfg.integer_or("seed", static_cast<long long>(b.seed)));
  return b;
}

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Schema: return 2;
    case ErrorKind::Domain: return 2;
    case ErrorKind::Numerical: return 3;
    case ErrorKind::Config: return 4;
  }
  return 1;
}

}  // namespace spem
