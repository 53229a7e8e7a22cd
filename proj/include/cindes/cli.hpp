#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "cindes/eval.hpp"
#include "cindes/explicit.hpp"

namespace cindes {

enum ExitCode : int { kExitOk = 0, kExitFailure = 1, kExitUsage = 2, kExitData = 3, kExitNumeric = 4 };

/// Runs `cindes <command> ...`; args excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Worker count: `requested` (or the core count when 0), capped by CINDES_THREADS.
int worker_threads(int requested = 0);

struct BenchmarkConfig {
  std::string dgp = "nonlinear";
  std::uint64_t structure_seed = 0;
  std::vector<Eigen::Index> sizes{500};
  int reps = 5;
  std::uint64_t seed = 0;
  TrainConfig train;
  std::optional<TvDesign> tv_design;  // default_tv_design of the DGP when empty
  Eigen::Index nll_test = 1000;
  int nll_ref_draws = 1024;
  int threads = 1;
};

struct BenchmarkRow {
  std::string experiment;
  Eigen::Index n = 0;
  std::uint64_t seed = 0;
  bool ok = false;
  double tv = 0.0;
  double nll = 0.0;
  double selected_l2 = 0.0;
  std::string error;  // failure message when !ok
};

/// Seed of replication `rep` at sample size n under a master seed.
std::uint64_t trial_seed(std::uint64_t master, Eigen::Index n, int rep);

/// One fit-and-evaluate trial; divergences come back as a failed row.
BenchmarkRow run_trial(const BenchmarkConfig& config, const DgpSpec& spec, Eigen::Index n, int rep);

/// All trials, ordered by size then replication regardless of thread count.
std::vector<BenchmarkRow> run_benchmark(const BenchmarkConfig& config);

struct BenchmarkSummary {
  Eigen::Index n = 0;
  int ok = 0;
  int failed = 0;
  double tv_mean = 0.0, tv_std = 0.0;
  double nll_mean = 0.0, nll_std = 0.0;
};

/// Mean and sample standard deviation over successful rows, per sample size.
std::vector<BenchmarkSummary> summarize(const std::vector<BenchmarkRow>& rows);

/// Header experiment,n,seed,status,tv,nll,selected_l2; then one row per trial
/// and a mean and a std row per sample size.
void write_benchmark_csv(std::ostream& out, const std::vector<BenchmarkRow>& rows);

}  // namespace cindes
