#include "btdkit/apportionment.hpp"

#include "btdkit/rng.hpp"
#include "parallel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <numbers>
#include <set>
#include <sstream>
#include <tuple>

namespace btd {

namespace fs = std::filesystem;
using namespace std::chrono;

namespace {

constexpr int kDigits = std::numeric_limits<double>::max_digits10;

const char* const kSamplesHeader = "species,size_bin,sample_index,datetime,concentration";

std::string trim(std::string s) {
  const auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream is(line);
  while (std::getline(is, field, ',')) out.push_back(trim(field));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_number(const std::string& s, const std::string& where) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw std::runtime_error(where + ": cannot parse number '" + s + "'");
  }
  if (used != s.size() || !std::isfinite(v)) {
    throw std::runtime_error(where + ": cannot parse number '" + s + "'");
  }
  return v;
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream os(p, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + p.string() + " for writing");
  os << std::setprecision(kDigits);
  return os;
}

std::ifstream open_in(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + p.string());
  return is;
}

}  // namespace

// ---------------------------------------------------------------------------

bool SampleTime::is_weekend() const {
  const weekday wd{sys_days{date}};
  return wd == Saturday || wd == Sunday;
}

std::string SampleTime::time_of_day() const {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%02d:%02d", minute_of_day / 60, minute_of_day % 60);
  return buf;
}

std::string SampleTime::to_string() const {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u %s", static_cast<int>(date.year()),
                static_cast<unsigned>(date.month()), static_cast<unsigned>(date.day()),
                time_of_day().c_str());
  return buf;
}

SampleTime parse_sample_time(const std::string& text) {
  int y = 0;
  unsigned mo = 0;
  unsigned d = 0;
  int h = 0;
  int mi = 0;
  int sec = 0;
  char sep = 0;
  int consumed = 0;
  const int n = std::sscanf(text.c_str(), "%4d-%2u-%2u%c%2d:%2d%n", &y, &mo, &d, &sep, &h, &mi,
                            &consumed);
  bool ok = n == 6 && (sep == ' ' || sep == 'T');
  if (ok && static_cast<std::size_t>(consumed) != text.size()) {
    int extra = 0;
    ok = std::sscanf(text.c_str() + consumed, ":%2d%n", &sec, &extra) == 1 &&
         static_cast<std::size_t>(consumed + extra) == text.size() && sec >= 0 && sec < 60;
  }
  const year_month_day ymd{year{y}, month{mo}, day{d}};
  if (!ok || !ymd.ok() || h < 0 || h > 23 || mi < 0 || mi > 59) {
    throw std::runtime_error("unparseable datetime '" + text + "'");
  }
  return SampleTime{ymd, h * 60 + mi};
}

void AirTensor::validate() const {
  const Dims dm = tensor.dims();
  if (species.size() != static_cast<std::size_t>(dm.I) ||
      size_bins.size() != static_cast<std::size_t>(dm.J) ||
      calendar.size() != static_cast<std::size_t>(dm.K)) {
    throw ShapeError("air tensor labels do not match dimensions " + to_string(dm));
  }
  for (std::size_t n = 0; n < tensor.size(); ++n) {
    if (tensor.data()[n] < 0.0) throw std::invalid_argument("negative concentration");
  }
  if (uncertainties) {
    if (uncertainties->dims() != dm) throw ShapeError("uncertainty tensor dimensions differ");
    for (double u : uncertainties->data()) {
      if (!(u > 0.0)) throw std::invalid_argument("uncertainties must be strictly positive");
    }
  }
  if (!std::is_sorted(calendar.begin(), calendar.end())) {
    throw std::invalid_argument("calendar is not chronological");
  }
}

AirTensor load_samples(const std::string& path, const std::vector<std::string>& size_bin_order) {
  std::ifstream is = open_in(path);
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error(path + ": empty file");
  const std::string header = trim(line);
  bool with_u = false;
  if (header == std::string(kSamplesHeader) + ",uncertainty") {
    with_u = true;
  } else if (header != kSamplesHeader) {
    throw std::runtime_error(path + ": unexpected header '" + header + "'");
  }

  struct Row {
    std::size_t species;
    std::size_t bin;
    long sample;
    double value;
    double u;
    std::size_t line;
  };
  std::vector<Row> rows;
  std::vector<std::string> species;
  std::map<std::string, std::size_t> species_index;
  std::map<std::string, std::size_t> declared_bins;
  for (std::size_t b = 0; b < size_bin_order.size(); ++b) declared_bins[size_bin_order[b]] = b;
  std::set<std::size_t> bins_seen;
  std::map<long, SampleTime> sample_time;

  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto f = split_csv(trim(line));
    const std::string where = path + ":" + std::to_string(lineno);
    if (f.size() != (with_u ? 6u : 5u)) throw std::runtime_error(where + ": wrong field count");

    auto [it, inserted] = species_index.try_emplace(f[0], species.size());
    if (inserted) species.push_back(f[0]);
    const auto bin = declared_bins.find(f[1]);
    if (bin == declared_bins.end()) {
      throw std::runtime_error(where + ": unknown size bin '" + f[1] + "'");
    }
    bins_seen.insert(bin->second);

    const double idx = parse_number(f[2], where);
    if (idx != std::floor(idx)) throw std::runtime_error(where + ": sample_index must be integer");
    const long sample = static_cast<long>(idx);
    const SampleTime when = parse_sample_time(f[3]);
    auto [st, fresh] = sample_time.try_emplace(sample, when);
    if (!fresh && st->second != when) {
      throw std::runtime_error(where + ": sample " + f[2] + " has conflicting datetimes");
    }

    const double value = parse_number(f[4], where);
    if (value < 0.0) throw std::runtime_error(where + ": negative concentration");
    double u = 0.0;
    if (with_u) {
      u = parse_number(f[5], where);
      if (!(u > 0.0)) throw std::runtime_error(where + ": uncertainty must be > 0");
    }
    rows.push_back({it->second, bin->second, sample, value, u, lineno});
  }
  if (rows.empty()) throw std::runtime_error(path + ": no data rows");

  // Bins ordered as declared, restricted to the ones present.
  std::vector<std::string> bins;
  std::map<std::size_t, std::size_t> bin_pos;
  for (std::size_t b : bins_seen) {
    bin_pos[b] = bins.size();
    bins.push_back(size_bin_order[b]);
  }
  std::vector<std::pair<SampleTime, long>> order;
  for (const auto& [sample, when] : sample_time) order.emplace_back(when, sample);
  std::sort(order.begin(), order.end());
  std::map<long, std::size_t> sample_pos;
  std::vector<SampleTime> calendar;
  for (const auto& [when, sample] : order) {
    sample_pos[sample] = calendar.size();
    calendar.push_back(when);
  }

  const Dims dm{static_cast<Index>(species.size()), static_cast<Index>(bins.size()),
                static_cast<Index>(calendar.size())};
  std::vector<double> values(static_cast<std::size_t>(dm.size()), 0.0);
  std::vector<double> us(with_u ? values.size() : 0, 0.0);
  std::vector<std::size_t> seen_at(values.size(), 0);
  for (const Row& r : rows) {
    const std::size_t off = r.species + static_cast<std::size_t>(dm.I) *
                                            (bin_pos[r.bin] + static_cast<std::size_t>(dm.J) *
                                                                  sample_pos[r.sample]);
    if (seen_at[off] != 0) {
      throw std::runtime_error(path + ":" + std::to_string(r.line) + ": duplicate entry for (" +
                               species[r.species] + ", " + size_bin_order[r.bin] + ", " +
                               std::to_string(r.sample) + "), first seen on line " +
                               std::to_string(seen_at[off]));
    }
    seen_at[off] = r.line;
    values[off] = r.value;
    if (with_u) us[off] = r.u;
  }
  for (std::size_t off = 0; off < seen_at.size(); ++off) {
    if (seen_at[off] == 0) {
      const std::size_t i = off % static_cast<std::size_t>(dm.I);
      const std::size_t j = (off / static_cast<std::size_t>(dm.I)) % static_cast<std::size_t>(dm.J);
      const std::size_t k = off / static_cast<std::size_t>(dm.I * dm.J);
      throw std::runtime_error(path + ": missing entry for (" + species[i] + ", " + bins[j] +
                               ", sample " + std::to_string(order[k].second) + ")");
    }
  }

  AirTensor out;
  out.tensor = Tensor3(dm, std::move(values));
  out.species = std::move(species);
  out.size_bins = std::move(bins);
  if (with_u) out.uncertainties = Tensor3(dm, std::move(us));
  out.calendar = std::move(calendar);
  out.validate();
  return out;
}

void write_samples(const std::string& path, const AirTensor& d) {
  d.validate();
  std::ofstream os = open_out(path);
  os << kSamplesHeader << (d.uncertainties ? ",uncertainty" : "") << '\n';
  for (Index k = 0; k < d.tensor.K(); ++k) {
    const std::string when = d.calendar[static_cast<std::size_t>(k)].to_string();
    for (Index j = 0; j < d.tensor.J(); ++j) {
      for (Index i = 0; i < d.tensor.I(); ++i) {
        os << d.species[static_cast<std::size_t>(i)] << ',' << d.size_bins[static_cast<std::size_t>(j)]
           << ',' << k + 1 << ',' << when << ',' << d.tensor(i, j, k);
        if (d.uncertainties) os << ',' << (*d.uncertainties)(i, j, k);
        os << '\n';
      }
    }
  }
}

// ---------------------------------------------------------------------------

SourceModel fit_sources(const AirTensor& d, Index P, Index L, SolverConfig cfg) {
  if (P < 1 || L < 1) throw std::invalid_argument("fit_sources: P and L must be >= 1");
  d.validate();
  cfg.nonnegative = true;
  cfg.R = P;
  cfg.L = L;
  if (cfg.init == InitStrategy::Gaussian) cfg.init = InitStrategy::UniformNonneg;

  SourceModel m;
  m.P = P;
  m.L = L;
  m.fit = fit(d.tensor, cfg);
  m.C = m.fit.factors.A;
  m.D = m.fit.factors.B;
  m.B = m.fit.factors.C;
  return m;
}

SourceModel fit_sources_multistart(const AirTensor& d, Index P, Index L, const SolverConfig& cfg,
                                   int starts, unsigned threads) {
  if (starts < 1) throw std::invalid_argument("fit_sources_multistart: starts must be >= 1");
  std::vector<std::optional<SourceModel>> results(static_cast<std::size_t>(starts));
  std::vector<std::exception_ptr> errors(results.size());
  detail::parallel_for(results.size(), threads, [&](std::size_t s) {
    SolverConfig c = cfg;
    c.seed = mix_seed(cfg.seed, s);
    try {
      results[s] = fit_sources(d, P, L, c);
    } catch (...) {
      errors[s] = std::current_exception();
    }
  });

  std::optional<std::size_t> best;
  for (std::size_t s = 0; s < results.size(); ++s) {
    if (!results[s]) continue;
    if (!best || results[s]->fit.final_objective() < results[*best]->fit.final_objective()) best = s;
  }
  if (!best) std::rethrow_exception(errors.front());
  return std::move(*results[*best]);
}

std::vector<Matrix> source_profiles(const SourceModel& m) {
  std::vector<Matrix> out;
  out.reserve(static_cast<std::size_t>(m.P));
  for (Index p = 0; p < m.P; ++p) out.emplace_back(m.C_block(p) * m.D_block(p).transpose());
  return out;
}

ContributionSeries contribution_series(const SourceModel& m, const AirTensor& d) {
  if (m.B.rows() != static_cast<Index>(d.calendar.size())) {
    throw ShapeError("contribution_series: model and calendar lengths differ");
  }
  return {m.B, d.calendar};
}

double weighted_chi_square(const AirTensor& d, const SourceModel& m) {
  if (!d.uncertainties) throw std::invalid_argument("weighted_chi_square: no uncertainties");
  const Tensor3 xhat = reconstruct_btd(m.factors(), d.tensor.dims());
  double q = 0.0;
  for (std::size_t n = 0; n < xhat.size(); ++n) {
    const double r = (d.tensor.data()[n] - xhat.data()[n]) / d.uncertainties->data()[n];
    q += r * r;
  }
  return q;
}

std::vector<std::vector<SlotProfile>> weekday_weekend_profile(const ContributionSeries& series,
                                                              const std::vector<std::string>& slots) {
  if (series.values.rows() != static_cast<Index>(series.calendar.size())) {
    throw ShapeError("weekday_weekend_profile: series and calendar lengths differ");
  }
  std::vector<std::vector<SlotProfile>> out(static_cast<std::size_t>(series.values.cols()));
  for (Index p = 0; p < series.values.cols(); ++p) {
    for (const auto& slot : slots) {
      // day -> (max, min) of the samples falling in this slot
      std::map<sys_days, std::pair<double, double>> per_day;
      for (std::size_t k = 0; k < series.calendar.size(); ++k) {
        const SampleTime& t = series.calendar[k];
        if (t.time_of_day() != slot) continue;
        const double v = series.values(static_cast<Index>(k), p);
        auto [it, fresh] = per_day.try_emplace(sys_days{t.date}, v, v);
        if (!fresh) {
          it->second.first = std::max(it->second.first, v);
          it->second.second = std::min(it->second.second, v);
        }
      }
      DayClassStats wk;
      DayClassStats we;
      for (const auto& [day, mm] : per_day) {
        const weekday wd{day};
        DayClassStats& s = (wd == Saturday || wd == Sunday) ? we : wk;
        s.mean_daily_max += mm.first;
        s.mean_daily_min += mm.second;
        ++s.days;
      }
      SlotProfile sp{slot, std::nullopt, std::nullopt};
      for (auto [s, target] : {std::pair{&wk, &sp.weekday}, std::pair{&we, &sp.weekend}}) {
        if (s->days == 0) continue;
        s->mean_daily_max /= static_cast<double>(s->days);
        s->mean_daily_min /= static_cast<double>(s->days);
        *target = *s;
      }
      out[static_cast<std::size_t>(p)].push_back(std::move(sp));
    }
  }
  return out;
}

void export_report(const SourceModel& m, const AirTensor& d, const std::string& dir) {
  d.validate();
  const fs::path root(dir);
  fs::create_directories(root);
  const auto profiles = source_profiles(m);

  {
    std::ofstream os = open_out(root / "profiles.csv");
    os << "species,size_bin,source,value\n";
    for (Index p = 0; p < m.P; ++p) {
      for (Index i = 0; i < d.tensor.I(); ++i) {
        for (Index j = 0; j < d.tensor.J(); ++j) {
          os << d.species[static_cast<std::size_t>(i)] << ','
             << d.size_bins[static_cast<std::size_t>(j)] << ',' << p + 1 << ','
             << profiles[static_cast<std::size_t>(p)](i, j) << '\n';
        }
      }
    }
  }
  const ContributionSeries series = contribution_series(m, d);
  {
    std::ofstream os = open_out(root / "contributions.csv");
    os << "datetime,source,value\n";
    for (Index k = 0; k < series.values.rows(); ++k) {
      const std::string when = series.calendar[static_cast<std::size_t>(k)].to_string();
      for (Index p = 0; p < m.P; ++p) os << when << ',' << p + 1 << ',' << series.values(k, p) << '\n';
    }
  }
  {
    std::ofstream os = open_out(root / "weekday_weekend.csv");
    os << "source,slot,day_class,stat,value\n";
    const auto agg = weekday_weekend_profile(series);
    for (std::size_t p = 0; p < agg.size(); ++p) {
      for (const SlotProfile& sp : agg[p]) {
        for (auto [name, stats] : {std::pair{"weekday", &sp.weekday}, std::pair{"weekend", &sp.weekend}}) {
          if (!*stats) continue;
          os << p + 1 << ',' << sp.slot << ',' << name << ",mean_daily_max," << (*stats)->mean_daily_max << '\n';
          os << p + 1 << ',' << sp.slot << ',' << name << ",mean_daily_min," << (*stats)->mean_daily_min << '\n';
        }
      }
    }
  }
  {
    std::ofstream os = open_out(root / "fit_report.txt");
    os << "sources " << m.P << '\n' << "block_rank " << m.L << '\n';
    if (d.uncertainties) os << "weighted_chi_square " << weighted_chi_square(d, m) << '\n';
    if (!m.fit.objective_trace.empty()) write_fit_report(os, m.fit);
  }
}

ExportedModel read_export(const std::string& dir, const AirTensor& layout) {
  const fs::path root(dir);
  const Index I = layout.tensor.I();
  const Index J = layout.tensor.J();
  const Index K = layout.tensor.K();
  std::map<std::string, Index> species;
  std::map<std::string, Index> bins;
  for (Index i = 0; i < I; ++i) species[layout.species[static_cast<std::size_t>(i)]] = i;
  for (Index j = 0; j < J; ++j) bins[layout.size_bins[static_cast<std::size_t>(j)]] = j;

  ExportedModel out;
  std::string line;
  {
    std::ifstream is = open_in(root / "profiles.csv");
    std::getline(is, line);
    while (std::getline(is, line)) {
      const auto f = split_csv(line);
      if (f.size() != 4) throw std::runtime_error("profiles.csv: malformed row");
      const auto p = static_cast<std::size_t>(parse_number(f[2], "profiles.csv")) - 1;
      while (out.profiles.size() <= p) out.profiles.push_back(Matrix::Zero(I, J));
      out.profiles[p](species.at(f[0]), bins.at(f[1])) = parse_number(f[3], "profiles.csv");
    }
  }
  out.contributions = Matrix::Zero(K, static_cast<Index>(out.profiles.size()));
  {
    std::ifstream is = open_in(root / "contributions.csv");
    std::getline(is, line);
    std::map<SampleTime, Index> row_of;
    while (std::getline(is, line)) {
      const auto f = split_csv(line);
      if (f.size() != 3) throw std::runtime_error("contributions.csv: malformed row");
      const SampleTime when = parse_sample_time(f[0]);
      const auto [it, fresh] = row_of.try_emplace(when, static_cast<Index>(row_of.size()));
      const auto p = static_cast<Index>(parse_number(f[1], "contributions.csv")) - 1;
      out.contributions(it->second, p) = parse_number(f[2], "contributions.csv");
    }
  }
  return out;
}

Tensor3 receptor_reconstruction(const std::vector<Matrix>& profiles, const Matrix& contributions) {
  if (profiles.empty() || static_cast<Index>(profiles.size()) != contributions.cols()) {
    throw ShapeError("receptor_reconstruction: profile count must match contribution columns");
  }
  const Dims dm{profiles[0].rows(), profiles[0].cols(), contributions.rows()};
  std::vector<double> x(static_cast<std::size_t>(dm.size()), 0.0);
  std::size_t n = 0;
  for (Index k = 0; k < dm.K; ++k) {
    for (Index j = 0; j < dm.J; ++j) {
      for (Index i = 0; i < dm.I; ++i) {
        double s = 0.0;
        for (std::size_t p = 0; p < profiles.size(); ++p) {
          s += profiles[p](i, j) * contributions(k, static_cast<Index>(p));
        }
        x[n++] = s;
      }
    }
  }
  return Tensor3(dm, std::move(x));
}

// ---------------------------------------------------------------------------

std::vector<SampleTime> drum_calendar(const std::string& start_date, int full_days) {
  if (full_days < 0) throw std::invalid_argument("drum_calendar: negative day count");
  const sys_days first{parse_sample_time(start_date + " 00:00").date};
  std::vector<SampleTime> out;
  for (int hour : {16, 19, 22}) out.push_back({year_month_day{first}, hour * 60});
  for (int day = 1; day <= full_days; ++day) {
    for (int slot = 0; slot < 8; ++slot) out.push_back({year_month_day{first + days{day}}, (1 + 3 * slot) * 60});
  }
  out.push_back({year_month_day{first + days{full_days + 1}}, 60});
  return out;
}

namespace {

const std::vector<std::string> kSpecies = {"Na", "Mg", "Al", "Si", "P",  "S",  "Cl", "K",  "Ca",
                                           "Ti", "V",  "Cr", "Mn", "Fe", "Co", "Ni", "Cu", "Zn",
                                           "Ga", "As", "Se", "Br", "Rb", "Sr", "Zr", "Mo", "Pb"};

}  // namespace

Surrogate make_surrogate(const SurrogateSpec& spec) {
  if (spec.P < 1 || spec.L < 1) throw std::invalid_argument("surrogate: P and L must be >= 1");
  Rng rng(spec.seed);
  const Index I = static_cast<Index>(kSpecies.size());
  const Index J = static_cast<Index>(kDefaultSizeBins.size());
  const auto calendar = drum_calendar(spec.start_date, spec.full_days);
  const Index K = static_cast<Index>(calendar.size());

  // Each source owns a handful of signature species on top of a weak background,
  // which keeps the planted profiles far from each other.
  Matrix C = Matrix::Zero(I, spec.P * spec.L);
  Matrix D(J, spec.P * spec.L);
  for (Index p = 0; p < spec.P; ++p) {
    for (Index l = 0; l < spec.L; ++l) {
      auto col = C.col(p * spec.L + l);
      for (Index i = 0; i < I; ++i) col(i) = 0.05 * rng.uniform();
      for (Index i = 0; i < I; ++i) {
        if (i % spec.P == p && rng.uniform() < 0.7) col(i) += 0.5 + rng.uniform();
      }
      for (Index j = 0; j < J; ++j) D(j, p * spec.L + l) = 0.1 + rng.uniform();
    }
  }

  // Contributions: log-normal level, a source-specific diurnal cycle and a
  // weekday/weekend shift.
  Matrix B(K, spec.P);
  for (Index p = 0; p < spec.P; ++p) {
    const double phase = 2.0 * std::numbers::pi * rng.uniform();
    const double weekend_factor = 0.4 + 1.2 * rng.uniform();
    for (Index k = 0; k < K; ++k) {
      const SampleTime& t = calendar[static_cast<std::size_t>(k)];
      const double hour = t.minute_of_day / 60.0;
      const double diurnal = 1.0 + 0.6 * std::sin(2.0 * std::numbers::pi * hour / 24.0 + phase);
      const double level = std::exp(0.8 * rng.normal());
      B(k, p) = level * diurnal * (t.is_weekend() ? weekend_factor : 1.0);
    }
  }

  Surrogate out;
  out.truth.P = spec.P;
  out.truth.L = spec.L;
  out.truth.C = C;
  out.truth.D = D;
  out.truth.B = B;
  const Tensor3 clean = reconstruct_btd(out.truth.factors(), {I, J, K});

  const double signal = frobenius_norm(clean);
  std::vector<double> noise(clean.size());
  double noise_sq = 0.0;
  for (double& v : noise) {
    v = rng.normal();
    noise_sq += v * v;
  }
  const double target = signal / std::pow(10.0, spec.snr_db / 20.0);
  const double scale = noise_sq > 0.0 ? target / std::sqrt(noise_sq) : 0.0;
  const double sigma = scale;  // per-entry noise standard deviation

  std::vector<double> observed(clean.size());
  std::vector<double> unc(clean.size());
  double err_sq = 0.0;
  for (std::size_t n = 0; n < observed.size(); ++n) {
    observed[n] = std::max(0.0, clean.data()[n] + scale * noise[n]);
    const double e = observed[n] - clean.data()[n];
    err_sq += e * e;
    unc[n] = sigma + 0.05 * clean.data()[n] + 1e-12;
  }
  out.achieved_snr_db = err_sq > 0.0 ? 10.0 * std::log10(signal * signal / err_sq)
                                     : std::numeric_limits<double>::infinity();

  out.data.tensor = Tensor3({I, J, K}, std::move(observed));
  out.data.species = kSpecies;
  out.data.size_bins = kDefaultSizeBins;
  out.data.uncertainties = Tensor3({I, J, K}, std::move(unc));
  out.data.calendar = calendar;
  out.data.validate();
  return out;
}

}  // namespace btd
