#pragma once

#include "btdkit/multilinear.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace btd {

enum class InitStrategy { Gaussian, UniformNonneg, Provided };

/// lambda_n = max(floor, lambda0 * decay^n)
struct LambdaSchedule {
  double lambda0 = 1.0;
  double decay = 0.95;
  double floor = 1e-8;
};

double lambda_schedule(long n, const LambdaSchedule& s);

struct SolverConfig {
  Index L = 1;
  Index R = 1;
  long max_sweeps = 20000;
  double tol_rel_objective = 1e-10;
  double tol_residual = 1e-4;
  // Number of consecutive sweeps the relative objective change has to stay
  // below tol_rel_objective before the fit stops as stalled.
  int stall_window = 10;
  // Empty means plain ALS.
  std::optional<LambdaSchedule> regularization = LambdaSchedule{};
  bool nonnegative = false;
  std::uint64_t seed = 0;
  InitStrategy init = InitStrategy::Gaussian;
  std::optional<BlockFactors> initial;  // required when init == Provided

  void validate() const;
};

enum class StopReason { ResidualReached, Stalled, MaxSweeps };
std::string to_string(StopReason r);

struct FitReport {
  BlockFactors factors;
  // Entry 0 describes the initialization, entry n the state after sweep n.
  std::vector<double> objective_trace;
  std::vector<double> relative_residual_trace;
  std::vector<double> lambda_trace;  // lambda used by sweep n; 0 at entry 0
  long sweeps_used = 0;
  bool converged = false;
  StopReason stop_reason = StopReason::MaxSweeps;
  double gradient_norm = 0.0;
  double tensor_norm = 0.0;
  long rank_deficient_solves = 0;
  std::vector<std::string> warnings;

  double final_objective() const { return objective_trace.back(); }
  double final_relative_residual() const { return relative_residual_trace.back(); }
};

/// Raised when the objective stops being finite; carries the trace so far.
class DivergenceError : public std::runtime_error {
 public:
  explicit DivergenceError(FitReport partial)
      : std::runtime_error("objective became non-finite at sweep " +
                           std::to_string(partial.sweeps_used + 1)),
        partial_(std::move(partial)) {}
  const FitReport& partial() const { return partial_; }

 private:
  FitReport partial_;
};

/// Deterministic in seed. Gaussian fills A, B, C (in that order, column-major)
/// with N(0,1) draws, UniformNonneg with [0,1) draws. Provided validates and
/// returns `provided`.
BlockFactors init_factors(Dims dims, Index L, Index R, InitStrategy strategy, std::uint64_t seed,
                          const std::optional<BlockFactors>& provided = std::nullopt);

/// True when L*R exceeds min(I*K, J*K), so the A and B designs cannot have full
/// column rank.
bool is_rank_degenerate(Dims dims, Index L, Index R);

/// One ALS sweep: A, then B (using the new A), then C (using both).
BlockFactors als_sweep(const Tensor3& t, const BlockFactors& f, bool nonneg);

/// One proximal sweep. Each block minimizes
///   ||X_(n) - Z * design^T||^2 + lambda * ||Z - Z_prev||^2
/// by stacking sqrt(lambda) * I under the design and sqrt(lambda) * Z_prev^T
/// under the right-hand side.
BlockFactors rals_sweep(const Tensor3& t, const BlockFactors& f, double lambda, bool nonneg);

FitReport fit(const Tensor3& t, const SolverConfig& cfg);

/// Gradient of ||T - reconstruct(f)||^2 ordered as [vec(A); vec(B); vec(C)].
Vector objective_gradient(const Tensor3& t, const BlockFactors& f);

struct Alignment {
  std::vector<Index> permutation;  // estimate column matched to reference column r
  std::vector<double> scales;      // multiplier applied to that estimate column
  double error = 0.0;              // ||ref - est*P*S||_F / ||ref||_F
};

/// Best column permutation and per-column scaling of `estimate` onto `reference`.
/// Exhaustive over permutations for R <= 8, greedy on |correlation| above that.
Alignment align_factors(const Matrix& reference, const Matrix& estimate);

/// Key-value header followed by "sweep lambda objective relative_residual" rows.
void write_fit_report(std::ostream& os, const FitReport& report);

}  // namespace btd
