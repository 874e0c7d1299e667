#include "doctest.h"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "oracles.hpp"
#include "spem/config.hpp"
#include "spem/csv.hpp"
#include "spem/design.hpp"
#include "spem/eval.hpp"
#include "spem/inference.hpp"

namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Run spem_cli(const fs::path& dir, const std::string& args) {
  const fs::path o = dir / "stdout.txt";
  const fs::path e = dir / "stderr.txt";
  const std::string cmd = std::string("\"") + SPEM_CLI_PATH + "\" " + args + " >\"" + o.string() + "\" 2>\"" +
                          e.string() + "\"";
  const int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(o);
  r.err = slurp(e);
  return r;
}

std::string q(const fs::path& p) { return "\"" + p.string() + "\""; }

double field(const std::string& line, const std::string& key) {
  const auto at = line.find(key + "=");
  REQUIRE(at != std::string::npos);
  return std::stod(line.substr(at + key.size() + 1));
}

// 50 points on [0,2] x [-1,1]: quadratic trend plus a smooth wiggle.
void write_training(const fs::path& path, Eigen::Index n, std::uint64_t seed, bool with_y = true) {
  const Eigen::MatrixXd u = spem::latin_hypercube(n, 2, seed).points();
  std::ofstream out(path);
  out << "x1,x2" << (with_y ? ",y" : "") << "\n";
  out.precision(17);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double a = 2.0 * u(i, 0);
    const double b = 2.0 * u(i, 1) - 1.0;
    out << a << ',' << b;
    if (with_y) out << ',' << 1.0 + a - 0.5 * a * b + 2.0 * b * b + 0.3 * std::sin(3.0 * a + b);
    out << "\n";
  }
}

struct Fixture {
  fs::path dir = oracle::scratch_dir("cli");
  ~Fixture() { fs::remove_all(dir); }
};

}  // namespace

TEST_CASE("fit writes a chain inside the prior support, deterministically") {
  Fixture f;
  write_training(f.dir / "train.csv", 50, 3);
  const std::string args = "fit --train " + q(f.dir / "train.csv") + " --basis-p 2 --cutoff 1.2 --iterations 200 --seed 5";
  const Run a = spem_cli(f.dir, args + " --out " + q(f.dir / "a"));
  REQUIRE_MESSAGE(a.code == 0, a.err);
  CHECK(field(a.out, "iterations") == 200);
  CHECK(field(a.out, "q") == 6);
  const Run b = spem_cli(f.dir, args + " --out " + q(f.dir / "b"));
  REQUIRE(b.code == 0);
  CHECK(slurp(f.dir / "a" / "chain.csv") == slurp(f.dir / "b" / "chain.csv"));

  const spem::Chain chain = spem::read_chain_csv((f.dir / "a" / "chain.csv").string(), 0, 1);
  CHECK(chain.size() == 200);
  const spem::SimplexPrior prior(1.2, 2);
  for (const auto& s : chain.states) CHECK(prior.contains(s));
  for (const char* name : {"model.toml", "config.toml", "train.csv", "scaling.csv", "terms.csv"})
    CHECK(fs::exists(f.dir / "a" / name));
  CHECK(spem::read_scaling_csv(f.dir / "a" / "scaling.csv").d() == 2);
}

TEST_CASE("error records and exit codes") {
  Fixture f;
  write_training(f.dir / "noy.csv", 20, 1, false);
  const Run r = spem_cli(f.dir, "fit --train " + q(f.dir / "noy.csv") + " --cutoff 1 --out " + q(f.dir / "m"));
  CHECK(r.code == 2);
  const auto rec = nlohmann::json::parse(r.err.substr(r.err.find('{')));
  CHECK(rec["error"] == "schema");
  CHECK(!rec["message"].get<std::string>().empty());

  write_training(f.dir / "train.csv", 20, 1);
  const Run both = spem_cli(f.dir, "fit --train " + q(f.dir / "train.csv") + " --cutoff 1 --sparsity 0.1 --out " +
                                       q(f.dir / "m"));
  CHECK(both.code == 4);
  CHECK(nlohmann::json::parse(both.err.substr(both.err.find('{')))["error"] == "config");

  const Run bad_set = spem_cli(f.dir, "design --n 5 --d 2 --set nokeyvalue");
  CHECK(bad_set.code == 4);
  const Run unknown = spem_cli(f.dir, "frobnicate");
  CHECK(unknown.code == 4);
}

TEST_CASE("predict, eval and blocking through the command line") {
  Fixture f;
  write_training(f.dir / "train.csv", 50, 3);
  REQUIRE(spem_cli(f.dir, "fit --train " + q(f.dir / "train.csv") +
                              " --basis-p 2 --cutoff 1.2 --iterations 200 --stride 5 --seed 2 --out " + q(f.dir / "m"))
              .code == 0);

  SUBCASE("training inputs are reproduced") {
    const Run r = spem_cli(f.dir, "predict --model " + q(f.dir / "m") + " --inputs " + q(f.dir / "train.csv") +
                                      " --output " + q(f.dir / "p.csv"));
    REQUIRE_MESSAGE(r.code == 0, r.err);
    CHECK(field(r.out, "rows") == 50);
    CHECK(field(r.out, "extrapolated") == 0);
    const auto pred = spem::csv::read_file(f.dir / "p.csv");
    const auto train = spem::csv::read_file(f.dir / "train.csv");
    const Eigen::VectorXd y = train.values.col(train.column_index("y"));
    const Eigen::VectorXd mean = pred.values.col(pred.column_index("mean"));
    for (Eigen::Index i = 0; i < y.size(); ++i) CHECK(std::abs(mean(i) - y(i)) <= 1e-6 * std::abs(y(i)));
    CHECK(pred.column_index("variance") >= 0);
    CHECK(pred.column_index("lower") >= 0);
    CHECK(pred.column_index("upper") >= 0);
  }

  SUBCASE("empty input gives a header-only file") {
    { std::ofstream(f.dir / "empty.csv") << "x1,x2\n"; }
    const Run r = spem_cli(f.dir, "predict --model " + q(f.dir / "m") + " --inputs " + q(f.dir / "empty.csv") +
                                      " --output " + q(f.dir / "e.csv"));
    REQUIRE_MESSAGE(r.code == 0, r.err);
    const auto t = spem::csv::read_file(f.dir / "e.csv");
    CHECK(t.values.rows() == 0);
    CHECK(t.columns == std::vector<std::string>{"x1", "x2", "mean", "variance", "lower", "upper"});
  }

  SUBCASE("block size does not change the output") {
    write_training(f.dir / "new.csv", 30, 8, false);
    REQUIRE(spem_cli(f.dir, "predict --model " + q(f.dir / "m") + " --inputs " + q(f.dir / "new.csv") +
                                " --block-size 10 --output " + q(f.dir / "b10.csv"))
                .code == 0);
    REQUIRE(spem_cli(f.dir, "predict --model " + q(f.dir / "m") + " --inputs " + q(f.dir / "new.csv") +
                                " --block-size 30 --output " + q(f.dir / "b30.csv"))
                .code == 0);
    CHECK(slurp(f.dir / "b10.csv") == slurp(f.dir / "b30.csv"));
  }

  SUBCASE("eval reads its own predictions") {
    write_training(f.dir / "test.csv", 40, 9);
    REQUIRE(spem_cli(f.dir, "predict --model " + q(f.dir / "m") + " --inputs " + q(f.dir / "test.csv") +
                                " --exact-intervals --out " + q(f.dir / "o"))
                .code == 0);
    REQUIRE(fs::exists(f.dir / "o" / "predictions.csv"));
    const Run r = spem_cli(f.dir, "eval --predictions " + q(f.dir / "o" / "predictions.csv") + " --truth " +
                                      q(f.dir / "test.csv"));
    REQUIRE_MESSAGE(r.code == 0, r.err);
    CHECK(field(r.out, "n") == 40);
    CHECK(field(r.out, "nse") > 0.9);
    CHECK(field(r.out, "coverage") >= 0.0);
    CHECK(field(r.out, "level") == 0.95);
  }

  SUBCASE("dimension mismatch is a schema error") {
    { std::ofstream(f.dir / "one.csv") << "x1\n0.5\n"; }
    const Run r = spem_cli(f.dir, "predict --model " + q(f.dir / "m") + " --inputs " + q(f.dir / "one.csv") +
                                      " --output " + q(f.dir / "x.csv"));
    CHECK(r.code == 2);
  }
}

TEST_CASE("a config echo reproduces the fit") {
  Fixture f;
  write_training(f.dir / "train.csv", 40, 4);
  {
    std::ofstream cfg(f.dir / "run.toml");
    cfg << "seed = 17\n[data]\ntrain = \"" << (f.dir / "train.csv").string()
        << "\"\n[basis]\np = 2\nm = 2\n[model]\nfamily = \"truncpow\"\nalpha = 1.5\nsparsity = 0.3\n"
           "[mcmc]\niterations = 120\nburn_in = 20\n";
  }
  const Run a = spem_cli(f.dir, "--config " + q(f.dir / "run.toml") + " --out " + q(f.dir / "a") + " fit");
  REQUIRE_MESSAGE(a.code == 0, a.err);
  const Run b = spem_cli(f.dir, "--config " + q(f.dir / "a" / "config.toml") + " --out " + q(f.dir / "b") + " fit");
  REQUIRE_MESSAGE(b.code == 0, b.err);
  CHECK(slurp(f.dir / "a" / "chain.csv") == slurp(f.dir / "b" / "chain.csv"));
  CHECK(field(a.out, "cutoff") == field(b.out, "cutoff"));

  // --set overrides the file.
  const Run c = spem_cli(f.dir, "--config " + q(f.dir / "run.toml") + " --set mcmc.iterations=60 --set mcmc.burn_in=10 --out " +
                                    q(f.dir / "c") + " fit");
  REQUIRE(c.code == 0);
  CHECK(field(c.out, "iterations") == 60);
}

TEST_CASE("design, calibrate, select-basis, bench and simstudy outputs parse") {
  Fixture f;
  const Run d = spem_cli(f.dir, "--seed 3 design --n 200 --d 3 --output " + q(f.dir / "design.csv"));
  REQUIRE_MESSAGE(d.code == 0, d.err);
  const auto design = spem::read_design_csv(f.dir / "design.csv");
  CHECK(design.n() == 200);
  CHECK(design.d() == 3);

  const Run c = spem_cli(f.dir, "calibrate --design " + q(f.dir / "design.csv") + " --sparsity 0.05");
  REQUIRE_MESSAGE(c.code == 0, c.err);
  CHECK(field(c.out, "cutoff") > 0.0);
  CHECK(field(c.out, "achieved") <= 0.05);
  const Run bad = spem_cli(f.dir, "calibrate --design " + q(f.dir / "design.csv") + " --sparsity 0");
  CHECK(bad.code == 4);

  write_training(f.dir / "train.csv", 120, 6);
  const Run s = spem_cli(f.dir, "select-basis --train " + q(f.dir / "train.csv") + " --degrees 1 2 3 --interactions 1 2 --out " +
                                    q(f.dir / "sel"));
  REQUIRE_MESSAGE(s.code == 0, s.err);
  const auto table = spem::csv::read_text_file(f.dir / "sel" / "basis_selection.csv");
  CHECK(table.rows.size() == 6);
  CHECK(s.out.find("selected p=") != std::string::npos);

  const Run b = spem_cli(f.dir, "bench --n 200 --sparsity 0.05 --repeats 1 --d 2 --out " + q(f.dir / "bench"));
  REQUIRE_MESSAGE(b.code == 0, b.err);
  const auto samples = spem::read_timing_csv(f.dir / "bench" / "timing.csv");
  CHECK(!samples.empty());

  const Run sim = spem_cli(f.dir, "simstudy --dims 2 --alphas 1.5 --ranges 0.5 --n 60 --replicates 1 --iterations 100 "
                                  "--set simstudy.burn_in=20 --set simstudy.n_eval=50 --out " + q(f.dir / "sim"));
  REQUIRE_MESSAGE(sim.code == 0, sim.err);
  const auto summary = spem::csv::read_text_file(f.dir / "sim" / "summary.csv");
  CHECK(summary.rows.size() == 3);
  CHECK(spem::load_config(f.dir / "sim" / "config.toml").has("simstudy.n"));
}
