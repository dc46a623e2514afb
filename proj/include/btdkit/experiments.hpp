#pragma once

#include "btdkit/solver.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

namespace btd {

struct SynthSpec {
  Dims dims{5, 6, 7};
  Index L = 2;
  Index R = 3;
  std::uint64_t seed = 0;
  double sigma_noise = 0.0;
  bool nonneg = false;

  void validate() const;
};

struct SynthTensor {
  Tensor3 observed;
  // Scaled so that reconstruct_btd(truth) == T / ||T||_F.
  BlockFactors truth;
  std::uint64_t seed_used = 0;
};

/// observed = T/||T|| + sigma * N/||N||. Factor entries are N(0,1) (or U[0,1)
/// when nonneg), drawn A, B, C in order, then N from the same stream.
SynthTensor synth_btd_tensor(const SynthSpec& spec);

struct McConfig {
  SynthSpec base;                 // dims, L, R, seed, nonneg; sigma is overridden per level
  std::vector<double> levels{0.0, 1e-4, 1e-3, 1e-2, 1e-1};
  int runs = 50;
  int starts = 3;                 // random initializations per run, best objective kept
  SolverConfig solver;            // L and R are taken from base
  unsigned threads = 1;

  /// Tight stopping rules (1e-12 residual and stall tolerance, 5000 sweeps) so
  /// the low-noise levels are not limited by the solver tolerance.
  static McConfig defaults();
};

struct McLevel {
  double sigma = 0.0;
  std::vector<double> errors;  // successful runs in run order
  std::vector<int> failed_runs;
  double median_error = 0.0;
};

struct McReport {
  McConfig config;
  std::vector<McLevel> levels;
};

/// Run r at every level uses the same planted tensor and noise direction; only
/// sigma changes between levels.
McReport run_monte_carlo(const McConfig& cfg);

/// Least-squares slope of log(median error) against log(sigma) over the levels
/// with lo <= sigma <= hi.
double loglog_slope(const McReport& r, double lo, double hi);

double median(std::vector<double> v);

struct SwampConfig {
  SynthSpec base{{10, 15, 28}, 3, 3, 0, 0.0, false};
  int instances = 20;
  SolverConfig als;   // regularization must be empty
  SolverConfig rals;  // regularization set
  unsigned threads = 1;

  /// ALS and RALS with shared stopping rules (1e-4 residual, 20000 sweeps).
  static SwampConfig defaults();
};

struct SwampRun {
  std::uint64_t instance_seed = 0;
  std::uint64_t init_seed = 0;
  FitReport als;
  FitReport rals;

  std::optional<long> als_sweeps_to_tol() const;
  std::optional<long> rals_sweeps_to_tol() const;
};

struct SwampReport {
  SwampConfig config;
  std::vector<SwampRun> runs;

  double rals_success_rate() const;
  /// Among instances where both reach the tolerance, share with RALS <= ALS.
  /// Empty when no instance qualifies.
  std::optional<double> rals_not_slower_rate() const;
  int both_converged() const;
};

SwampReport run_swamp_bench(const SwampConfig& cfg);

// Report files. JSON carries "schema_version"; CSVs are plot inputs.
void write_mc_json(std::ostream& os, const McReport& r);
void write_mc_csv(std::ostream& os, const McReport& r);
void write_swamp_json(std::ostream& os, const SwampReport& r);
/// Trace rows every `stride` sweeps (and always the last one).
void write_swamp_csv(std::ostream& os, const SwampReport& r, long stride);

}  // namespace btd
