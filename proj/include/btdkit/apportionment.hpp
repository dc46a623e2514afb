#pragma once

#include "btdkit/solver.hpp"

#include <chrono>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace btd {

/// Calendar stamp of one sample, minute resolution, local time.
struct SampleTime {
  std::chrono::year_month_day date;
  int minute_of_day = 0;

  bool is_weekend() const;
  std::string time_of_day() const;  // "HH:MM"
  std::string to_string() const;    // "YYYY-MM-DD HH:MM"
  auto operator<=>(const SampleTime&) const = default;
};

/// Accepts "YYYY-MM-DD HH:MM" or "YYYY-MM-DDTHH:MM" (optionally ":SS").
SampleTime parse_sample_time(const std::string& text);

/// Species x size bin x sample concentrations.
struct AirTensor {
  Tensor3 tensor;
  std::vector<std::string> species;
  std::vector<std::string> size_bins;  // large to small
  std::optional<Tensor3> uncertainties;
  std::vector<SampleTime> calendar;

  void validate() const;
};

inline const std::vector<std::string> kDefaultSizeBins = {"large", "medium", "small"};

/// Reads the long-format CSV
///   species,size_bin,sample_index,datetime,concentration[,uncertainty]
/// Species keep their first-appearance order, size bins follow `size_bin_order`,
/// samples are sorted chronologically (ties by sample_index).
AirTensor load_samples(const std::string& path,
                       const std::vector<std::string>& size_bin_order = kDefaultSizeBins);

/// Writes the same schema load_samples reads (sample_index is 1-based).
void write_samples(const std::string& path, const AirTensor& d);

/// Non-negative BTD of an air tensor. Column block p of C (species) and of D
/// (size bins) give the profile A_p = C_p * D_p^T; column p of B is the
/// contribution time series.
struct SourceModel {
  Index P = 0;
  Index L = 0;
  Matrix C;  // I x P*L
  Matrix D;  // J x P*L
  Matrix B;  // K x P
  FitReport fit;

  auto C_block(Index p) const { return C.middleCols(p * L, L); }
  auto D_block(Index p) const { return D.middleCols(p * L, L); }
  BlockFactors factors() const { return BlockFactors(C, D, B, L, P); }
};

/// Forces cfg.nonnegative, R = P and L; a Gaussian init is replaced by the
/// uniform non-negative one.
SourceModel fit_sources(const AirTensor& d, Index P, Index L, SolverConfig cfg);

/// `starts` independent fits seeded from cfg.seed; the lowest final objective
/// wins (ties to the earlier start). Runs the fits on `threads` workers.
SourceModel fit_sources_multistart(const AirTensor& d, Index P, Index L, const SolverConfig& cfg,
                                   int starts, unsigned threads = 1);

std::vector<Matrix> source_profiles(const SourceModel& m);

struct ContributionSeries {
  Matrix values;  // K x P
  std::vector<SampleTime> calendar;
};

ContributionSeries contribution_series(const SourceModel& m, const AirTensor& d);

/// sum ((x - xhat) / u)^2 over all entries. Requires uncertainties.
double weighted_chi_square(const AirTensor& d, const SourceModel& m);

/// Means of the per-day maxima and minima for one day class.
struct DayClassStats {
  double mean_daily_max = 0.0;
  double mean_daily_min = 0.0;
  Index days = 0;
};

struct SlotProfile {
  std::string slot;
  std::optional<DayClassStats> weekday;
  std::optional<DayClassStats> weekend;
};

inline const std::vector<std::string> kDrumSlots = {"01:00", "04:00", "07:00", "10:00",
                                                    "13:00", "16:00", "19:00", "22:00"};

/// result[p][s]: samples of source p whose time of day equals slots[s] are
/// grouped by calendar day; each day contributes its max and min, which are
/// then averaged over weekdays and weekend days separately. A day class with
/// no samples in the slot is left empty.
std::vector<std::vector<SlotProfile>> weekday_weekend_profile(
    const ContributionSeries& series, const std::vector<std::string>& slots = kDrumSlots);

/// Writes profiles.csv, contributions.csv, weekday_weekend.csv and fit_report.txt.
void export_report(const SourceModel& m, const AirTensor& d, const std::string& dir);

/// What export_report wrote, read back: profiles[p] is I x J, contributions K x P.
struct ExportedModel {
  std::vector<Matrix> profiles;
  Matrix contributions;
};
ExportedModel read_export(const std::string& dir, const AirTensor& layout);

/// xhat_ijk = sum_p a_ijp * b_kp.
Tensor3 receptor_reconstruction(const std::vector<Matrix>& profiles, const Matrix& contributions);

// ---------------------------------------------------------------------------
// Planted-source surrogate for the 27 x 3 x 316 size-resolved data set.

struct SurrogateSpec {
  Index P = 3;
  Index L = 2;
  double snr_db = 20.0;
  std::uint64_t seed = 1;
  std::string start_date = "2002-02-25";
  int full_days = 39;  // 3 samples on day one + 8 per full day + 1 on the last = 316
};

struct Surrogate {
  AirTensor data;
  SourceModel truth;  // fit member is empty
  double achieved_snr_db = 0.0;
};

/// DRUM cadence calendar: slots 16:00, 19:00, 22:00 on the first day, all eight
/// slots on each full day, 01:00 on the final day.
std::vector<SampleTime> drum_calendar(const std::string& start_date, int full_days);

Surrogate make_surrogate(const SurrogateSpec& spec);

}  // namespace btd
