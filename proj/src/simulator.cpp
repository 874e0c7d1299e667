#include "spem/simulator.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <tuple>
#include <random>
#include <sstream>

#include "spem/csv.hpp"
#include "spem/error.hpp"
#include "spem/eval.hpp"
#include "spem/inference.hpp"
#include "spem/parallel.hpp"
#include "spem/predict.hpp"

namespace spem {

GPSpec GPSpec::power_exponential(Eigen::Index d, double alpha, double effective_range, double variance) {
  GPSpec spec;
  const double phi = effective_range_to_phi(effective_range, alpha);
  spec.correlation = ProductCorrelationModel::broadcast(CorrelationFamily::power_exponential(alpha, phi),
                                                        RangeVector(Eigen::VectorXd::Ones(d)));
  spec.variance = variance;
  return spec;
}

Eigen::VectorXd gp_mean(const Eigen::MatrixXd& points, const GPSpec& spec) {
  if (spec.mean_basis) {
    const Eigen::MatrixXd f = build_basis_rows(points, *spec.mean_basis);
    if (spec.beta.size() != f.cols()) throw Error(ErrorKind::Config, "mean coefficients do not match the basis");
    return f * spec.beta;
  }
  return Eigen::VectorXd::Constant(points.rows(), spec.mean_constant);
}

namespace {

Eigen::MatrixXd covariance_root(const DesignMatrix& x, const GPSpec& spec) {
  if (!(spec.variance > 0.0)) throw Error(ErrorKind::Config, "GP variance must be positive");
  if (spec.correlation.d() != x.d()) throw Error(ErrorKind::Domain, "GP correlation dimension does not match design");
  Eigen::MatrixXd k = dense_correlation(x.points(), spec.correlation);
  k.diagonal().array() += spec.jitter;
  Eigen::LLT<Eigen::MatrixXd> llt(k);
  if (llt.info() != Eigen::Success) {
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(k, Eigen::EigenvaluesOnly);
    std::ostringstream os;
    os << "GP covariance is not positive definite (smallest eigenvalue " << eig.eigenvalues()(0) << ")";
    throw Error(ErrorKind::Numerical, os.str());
  }
  Eigen::MatrixXd l = llt.matrixL();
  l *= std::sqrt(spec.variance);
  return l;
}

}  // namespace

Eigen::VectorXd sample_gp(const DesignMatrix& x, const GPSpec& spec, std::uint64_t seed) {
  return sample_gp_many(x, spec, 1, seed).col(0);
}

Eigen::MatrixXd sample_gp_many(const DesignMatrix& x, const GPSpec& spec, Eigen::Index draws, std::uint64_t seed) {
  const Eigen::MatrixXd l = covariance_root(x, spec);
  const Eigen::VectorXd mean = gp_mean(x.points(), spec);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Eigen::MatrixXd z(x.n(), draws);
  for (Eigen::Index j = 0; j < draws; ++j) {
    for (Eigen::Index i = 0; i < x.n(); ++i) z(i, j) = normal(rng);
  }
  Eigen::MatrixXd y = l.triangularView<Eigen::Lower>() * z;
  y.colwise() += mean;
  return y;
}

void SimStudyConfig::validate() const {
  auto fail = [](const std::string& msg) { throw Error(ErrorKind::Config, "simulation study: " + msg); };
  if (dims.empty() || alphas.empty() || effective_ranges.empty() || n_grid.empty()) fail("grids must be nonempty");
  for (int d : dims) if (d < 1) fail("dimensions must be positive");
  for (double a : alphas) if (!(a > 0.0 && a <= 2.0)) fail("powers must lie in (0, 2]");
  for (double r : effective_ranges) if (!(r > 0.0)) fail("effective ranges must be positive");
  for (Eigen::Index n : n_grid) if (n < 4) fail("sample sizes must be at least 4");
  for (double s : sparsity_targets) if (!(s > 0.0 && s < 1.0)) fail("sparsity targets must lie in (0, 1)");
  if (replicates < 1) fail("replicate count must be at least 1");
  if (iterations < 1 || burn_in < 0 || burn_in >= iterations || stride < 1) fail("invalid chain length settings");
  if (n_eval < 2) fail("evaluation set needs at least two points");
  if (!(level > 0.0 && level < 1.0)) fail("level must lie in (0, 1)");
  if (!(range_low > 0.0 && range_high > range_low)) fail("dense prior ranges must satisfy 0 < low < high");
  if (basis_degree < 0 || basis_interaction < 1) fail("invalid basis settings");
}

const SimSummaryRow* SimStudyResult::find(const std::string& condition, const std::string& method,
                                          Eigen::Index n) const {
  for (const auto& row : summary) {
    if (row.condition == condition && row.method == method && row.n == n) return &row;
  }
  return nullptr;
}

std::string condition_label(int d, double alpha, double effective_range) {
  return "d" + std::to_string(d) + "_alpha" + csv::format_double(alpha) + "_range" + csv::format_double(effective_range);
}

std::string sparse_method_label(double target) { return "sparse_" + csv::format_double(target); }

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  return mix(mix(mix(mix(base) ^ a) ^ b) ^ c);
}

namespace {

std::uint64_t label_hash(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  return h;
}

struct Scores {
  double nse = 0.0;
  double coverage = 0.0;
  double acceptance = 0.0;
};

Scores fit_and_score(const MCMCConfig& mcmc, const RegressionData& data, const ProductCorrelationModel& base,
                     const ParameterPrior& prior, const DesignMatrix& eval_x, const Eigen::MatrixXd& eval_f,
                     const Eigen::VectorXd& truth, double level) {
  const Chain chain = metropolis_run(mcmc, data, base, prior);
  const auto draws = chain.thinned();
  const auto moments = moments_for_draws(chain, draws, data, base, eval_x.points(), eval_f);
  const PredictiveSummary s = aggregate_predictions(moments, level);
  return {nse(s.mean, truth), empirical_coverage(s.lower, s.upper, truth), chain.acceptance_rate()};
}

}  // namespace

std::vector<SimRecord> run_sim_replicate(const SimStudyConfig& config, int d, double alpha, double effective_range,
                                         Eigen::Index n, int replicate, const StudyLog& log) {
  const std::string cond = condition_label(d, alpha, effective_range);
  const std::uint64_t seed =
      derive_seed(config.seed, label_hash(cond), static_cast<std::uint64_t>(n), static_cast<std::uint64_t>(replicate));
  std::vector<SimRecord> out;

  auto record_failure = [&](const std::string& method, const std::string& msg) {
    SimRecord r;
    r.condition = cond;
    r.method = method;
    r.n = n;
    r.replicate = replicate;
    r.ok = false;
    r.error = msg;
    out.push_back(r);
    if (log) log(cond + " " + method + " n=" + std::to_string(n) + " rep=" + std::to_string(replicate) + " failed: " + msg);
  };

  std::vector<std::string> methods;
  if (config.run_dense) methods.push_back("dense");
  for (double t : config.sparsity_targets) methods.push_back(sparse_method_label(t));

  DesignMatrix train;
  DesignMatrix eval_x;
  Eigen::VectorXd y;
  Eigen::VectorXd truth;
  try {
    train = latin_hypercube(n, d, derive_seed(seed, 1, 0, 0));
    eval_x = latin_hypercube(config.n_eval, d, derive_seed(seed, 2, 0, 0));
    Eigen::MatrixXd all(n + config.n_eval, d);
    all << train.points(), eval_x.points();
    GPSpec gp = GPSpec::power_exponential(d, alpha, effective_range);
    gp.jitter = config.generating_jitter;
    const Eigen::VectorXd y_all = sample_gp(DesignMatrix(all), gp, derive_seed(seed, 3, 0, 0));
    y = y_all.head(n);
    truth = y_all.tail(config.n_eval);
  } catch (const std::exception& e) {
    for (const auto& m : methods) record_failure(m, std::string("data generation: ") + e.what());
    return out;
  }

  MCMCConfig mcmc;
  mcmc.iterations = config.iterations;
  mcmc.burn_in = config.burn_in;
  mcmc.stride = config.stride;

  auto run = [&](const std::string& method, const std::function<Scores()>& fn) {
    try {
      const Scores s = fn();
      SimRecord r;
      r.condition = cond;
      r.method = method;
      r.n = n;
      r.replicate = replicate;
      r.nse = s.nse;
      r.coverage = s.coverage;
      r.acceptance = s.acceptance;
      out.push_back(r);
      if (log) {
        char line[200];
        std::snprintf(line, sizeof line, "%s %s n=%ld rep=%d nse=%.4f coverage=%.4f acceptance=%.3f", cond.c_str(),
                      method.c_str(), static_cast<long>(n), replicate, s.nse, s.coverage, s.acceptance);
        log(line);
      }
    } catch (const std::exception& e) {
      record_failure(method, e.what());
    }
  };

  if (config.run_dense) {
    run("dense", [&] {
      const Eigen::MatrixXd f = Eigen::MatrixXd::Ones(n, 1);
      const Eigen::MatrixXd f0 = Eigen::MatrixXd::Ones(config.n_eval, 1);
      const RegressionData data(train, y, f);
      const double phi_lo = effective_range_to_phi(config.range_high, alpha);
      const double phi_hi = effective_range_to_phi(config.range_low, alpha);
      const BoxPrior prior(Eigen::VectorXd::Constant(d, phi_lo), Eigen::VectorXd::Constant(d, phi_hi));
      const auto base = ProductCorrelationModel::broadcast(CorrelationFamily::power_exponential(alpha, 1.0),
                                                           RangeVector(Eigen::VectorXd::Ones(d)));
      const Eigen::VectorXd start = isotropic_pilot(data, base, phi_lo, phi_hi);
      MCMCConfig cfg = mcmc;
      cfg.seed = derive_seed(seed, 4, 0, 0);
      cfg.initial = start;
      cfg.initial_proposal = (0.1 * start).array().square().matrix().asDiagonal();
      return fit_and_score(cfg, data, base, prior, eval_x, f0, truth, config.level);
    });
  }

  const BasisSpec basis(config.basis_degree, std::min(config.basis_interaction, d), d);
  for (std::size_t t = 0; t < config.sparsity_targets.size(); ++t) {
    const double target = config.sparsity_targets[t];
    run(sparse_method_label(target), [&] {
      const Eigen::MatrixXd f = build_basis_matrix(train, basis);
      const Eigen::MatrixXd f0 = build_basis_matrix(eval_x, basis);
      const RegressionData data(train, y, f);
      CalibrationOptions copts;
      copts.seed = derive_seed(seed, 5, t, 0);
      const CalibrationReport cal = calibrate_cutoff(train, target, copts);
      const SimplexPrior prior(cal.cutoff, d);
      const auto base = ProductCorrelationModel::broadcast(CorrelationFamily::truncated_power(config.sparse_alpha),
                                                           RangeVector(default_initial(prior)));
      MCMCConfig cfg = mcmc;
      cfg.seed = derive_seed(seed, 6, t, 0);
      return fit_and_score(cfg, data, base, prior, eval_x, f0, truth, config.level);
    });
  }
  return out;
}

std::vector<SimSummaryRow> summarize_records(const std::vector<SimRecord>& records) {
  std::vector<SimSummaryRow> rows;
  std::map<std::tuple<std::string, std::string, Eigen::Index>, std::size_t> index;
  std::vector<std::vector<const SimRecord*>> groups;
  for (const auto& r : records) {
    const auto key = std::make_tuple(r.condition, r.method, r.n);
    auto it = index.find(key);
    if (it == index.end()) {
      it = index.emplace(key, rows.size()).first;
      SimSummaryRow row;
      row.condition = r.condition;
      row.method = r.method;
      row.n = r.n;
      rows.push_back(row);
      groups.emplace_back();
    }
    groups[it->second].push_back(&r);
  }
  for (std::size_t g = 0; g < rows.size(); ++g) {
    auto& row = rows[g];
    double sn = 0.0, sn2 = 0.0, sc = 0.0, sc2 = 0.0;
    for (const auto* r : groups[g]) {
      if (!r->ok) {
        ++row.failed;
        continue;
      }
      ++row.completed;
      sn += r->nse;
      sn2 += r->nse * r->nse;
      sc += r->coverage;
      sc2 += r->coverage * r->coverage;
    }
    const double k = row.completed;
    const double nan = std::numeric_limits<double>::quiet_NaN();
    row.nse_mean = k > 0 ? sn / k : nan;
    row.coverage_mean = k > 0 ? sc / k : nan;
    if (k > 1) {
      row.nse_se = std::sqrt(std::max(0.0, (sn2 - k * row.nse_mean * row.nse_mean) / (k - 1.0)) / k);
      row.coverage_se = std::sqrt(std::max(0.0, (sc2 - k * row.coverage_mean * row.coverage_mean) / (k - 1.0)) / k);
    } else {
      row.nse_se = nan;
      row.coverage_se = nan;
    }
  }
  return rows;
}

SimStudyResult run_sim_study(const SimStudyConfig& config, const StudyLog& log) {
  config.validate();
  struct Job {
    int d;
    double alpha;
    double range;
    Eigen::Index n;
    int rep;
  };
  std::vector<Job> jobs;
  for (int d : config.dims) {
    for (double a : config.alphas) {
      for (double r : config.effective_ranges) {
        for (int rep = 0; rep < config.replicates; ++rep) {
          for (Eigen::Index n : config.n_grid) jobs.push_back({d, a, r, n, rep});
        }
      }
    }
  }
  std::vector<std::vector<SimRecord>> slots(jobs.size());
  std::mutex log_mutex;
  const StudyLog safe_log = log ? StudyLog([&](const std::string& msg) {
    std::lock_guard<std::mutex> lock(log_mutex);
    log(msg);
  })
                                : StudyLog{};
  parallel_for(static_cast<long>(jobs.size()), resolve_threads(config.threads), [&](long i) {
    const Job& j = jobs[static_cast<std::size_t>(i)];
    slots[static_cast<std::size_t>(i)] = run_sim_replicate(config, j.d, j.alpha, j.range, j.n, j.rep, safe_log);
  });
  SimStudyResult result;
  for (auto& s : slots) {
    for (auto& r : s) result.records.push_back(std::move(r));
  }
  result.summary = summarize_records(result.records);
  return result;
}

void write_sim_study(const std::filesystem::path& dir, const SimStudyResult& result) {
  std::filesystem::create_directories(dir);
  std::map<std::string, std::ofstream> files;
  for (const auto& r : result.records) {
    if (!r.ok) continue;
    auto it = files.find(r.condition);
    if (it == files.end()) {
      it = files.emplace(r.condition, std::ofstream(dir / (r.condition + ".csv"))).first;
      if (!it->second) throw Error(ErrorKind::Schema, "cannot write study output in " + dir.string());
      it->second << "method,n,replicate,nse,coverage\n";
    }
    it->second << r.method << ',' << r.n << ',' << r.replicate << ',' << csv::format_double(r.nse) << ','
               << csv::format_double(r.coverage) << '\n';
  }
  std::ofstream summary(dir / "summary.csv");
  summary << "condition,method,n,completed,failed,nse_mean,nse_se,coverage_mean,coverage_se\n";
  for (const auto& s : result.summary) {
    summary << s.condition << ',' << s.method << ',' << s.n << ',' << s.completed << ',' << s.failed << ','
            << csv::format_double(s.nse_mean) << ',' << csv::format_double(s.nse_se) << ','
            << csv::format_double(s.coverage_mean) << ',' << csv::format_double(s.coverage_se) << '\n';
  }
  std::ofstream failures(dir / "failures.csv");
  failures << "condition,method,n,replicate,error\n";
  for (const auto& r : result.records) {
    if (r.ok) continue;
    std::string msg = r.error;
    for (char& c : msg) {
      if (c == ',' || c == '\n') c = ';';
    }
    failures << r.condition << ',' << r.method << ',' << r.n << ',' << r.replicate << ',' << msg << '\n';
  }
}

}  // namespace spem
