#include "btdkit/experiments.hpp"

#include "btdkit/rng.hpp"
#include "parallel.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

namespace btd {

namespace {

constexpr int kSchemaVersion = 1;
constexpr int kSynthRetries = 8;

Matrix draw(Index rows, Index cols, bool nonneg, Rng& rng) {
  Matrix m(rows, cols);
  for (Index n = 0; n < m.size(); ++n) m.data()[n] = nonneg ? rng.uniform() : rng.normal();
  return m;
}

nlohmann::json solver_json(const SolverConfig& c) {
  nlohmann::json j{{"max_sweeps", c.max_sweeps},
                   {"tol_residual", c.tol_residual},
                   {"tol_rel_objective", c.tol_rel_objective},
                   {"stall_window", c.stall_window},
                   {"nonnegative", c.nonnegative}};
  if (c.regularization) {
    j["regularization"] = {{"lambda0", c.regularization->lambda0},
                           {"decay", c.regularization->decay},
                           {"floor", c.regularization->floor}};
  } else {
    j["regularization"] = nullptr;
  }
  return j;
}

nlohmann::json opt_json(const std::optional<long>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

}  // namespace

void SynthSpec::validate() const {
  if (dims.I < 1 || dims.J < 1 || dims.K < 1) throw std::invalid_argument("synth: dims must be positive");
  if (L < 1 || R < 1) throw std::invalid_argument("synth: L and R must be >= 1");
  if (!(sigma_noise >= 0.0)) throw std::invalid_argument("synth: sigma must be >= 0");
}

SynthTensor synth_btd_tensor(const SynthSpec& spec) {
  spec.validate();
  for (int attempt = 0; attempt < kSynthRetries; ++attempt) {
    const std::uint64_t seed = spec.seed + static_cast<std::uint64_t>(attempt);
    Rng rng(seed);
    Matrix a = draw(spec.dims.I, spec.L * spec.R, spec.nonneg, rng);
    Matrix b = draw(spec.dims.J, spec.L * spec.R, spec.nonneg, rng);
    Matrix c = draw(spec.dims.K, spec.R, spec.nonneg, rng);
    BlockFactors truth(std::move(a), std::move(b), std::move(c), spec.L, spec.R);
    const Tensor3 t = reconstruct_btd(truth, spec.dims);
    const double tn = frobenius_norm(t);

    std::vector<double> noise(t.size());
    for (double& v : noise) v = rng.normal();
    const double nn = Eigen::Map<const Vector>(noise.data(), static_cast<Index>(noise.size())).norm();
    if (!(tn > 0.0) || (spec.sigma_noise > 0.0 && !(nn > 0.0))) continue;

    std::vector<double> obs(t.size());
    for (std::size_t n = 0; n < obs.size(); ++n) {
      obs[n] = t.data()[n] / tn;
      if (spec.sigma_noise > 0.0) obs[n] += spec.sigma_noise * noise[n] / nn;
    }
    truth.C /= tn;
    return {Tensor3(spec.dims, std::move(obs)), std::move(truth), seed};
  }
  throw std::runtime_error("synth: planted tensor had zero norm on every retry");
}

double median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

McReport run_monte_carlo(const McConfig& cfg) {
  if (cfg.runs < 1 || cfg.levels.empty() || cfg.starts < 1) {
    throw std::invalid_argument("monte carlo: need runs >= 1, starts >= 1 and at least one level");
  }
  cfg.base.validate();
  const std::size_t nlev = cfg.levels.size();
  const std::size_t nruns = static_cast<std::size_t>(cfg.runs);

  // error[level * runs + run]; NaN marks a failed run.
  std::vector<double> error(nlev * nruns, std::numeric_limits<double>::quiet_NaN());
  detail::parallel_for(error.size(), cfg.threads, [&](std::size_t job) {
    const std::size_t level = job / nruns;
    const std::size_t run = job % nruns;
    SynthSpec spec = cfg.base;
    spec.sigma_noise = cfg.levels[level];
    spec.seed = mix_seed(cfg.base.seed, run);
    try {
      const SynthTensor st = synth_btd_tensor(spec);
      std::optional<FitReport> best;
      for (int s = 0; s < cfg.starts; ++s) {
        SolverConfig sc = cfg.solver;
        sc.L = spec.L;
        sc.R = spec.R;
        sc.nonnegative = sc.nonnegative || spec.nonneg;
        sc.init = sc.nonnegative ? InitStrategy::UniformNonneg : InitStrategy::Gaussian;
        sc.seed = mix_seed(st.seed_used, 1000 + static_cast<std::uint64_t>(s));
        FitReport f = fit(st.observed, sc);
        if (!best || f.final_objective() < best->final_objective()) best = std::move(f);
      }
      error[job] = align_factors(st.truth.C, best->factors.C).error;
    } catch (const std::exception&) {
      // recorded as a failed run
    }
  });

  McReport rep;
  rep.config = cfg;
  for (std::size_t level = 0; level < nlev; ++level) {
    McLevel l;
    l.sigma = cfg.levels[level];
    for (std::size_t run = 0; run < nruns; ++run) {
      const double e = error[level * nruns + run];
      if (std::isnan(e)) {
        l.failed_runs.push_back(static_cast<int>(run));
      } else {
        l.errors.push_back(e);
      }
    }
    l.median_error = median(l.errors);
    rep.levels.push_back(std::move(l));
  }
  return rep;
}

double loglog_slope(const McReport& r, double lo, double hi) {
  std::vector<double> xs;
  std::vector<double> ys;
  for (const auto& l : r.levels) {
    if (l.sigma >= lo && l.sigma <= hi && l.sigma > 0.0 && l.median_error > 0.0) {
      xs.push_back(std::log10(l.sigma));
      ys.push_back(std::log10(l.median_error));
    }
  }
  if (xs.size() < 2) throw std::invalid_argument("loglog_slope: need two positive levels in range");
  const double n = static_cast<double>(xs.size());
  double mx = 0.0;
  double my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i] / n;
    my += ys[i] / n;
  }
  double sxy = 0.0;
  double sxx = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
  }
  return sxy / sxx;
}

// ---------------------------------------------------------------------------

McConfig McConfig::defaults() {
  McConfig c;
  c.solver.tol_residual = 1e-12;
  c.solver.tol_rel_objective = 1e-12;
  c.solver.max_sweeps = 5000;
  return c;
}

SwampConfig SwampConfig::defaults() {
  SwampConfig c;
  for (SolverConfig* s : {&c.als, &c.rals}) {
    s->L = c.base.L;
    s->R = c.base.R;
    s->max_sweeps = 20000;
    s->tol_residual = 1e-4;
    s->init = InitStrategy::Provided;
  }
  c.als.regularization.reset();
  c.rals.regularization = LambdaSchedule{};
  return c;
}

std::optional<long> SwampRun::als_sweeps_to_tol() const {
  return als.converged ? std::optional<long>(als.sweeps_used) : std::nullopt;
}

std::optional<long> SwampRun::rals_sweeps_to_tol() const {
  return rals.converged ? std::optional<long>(rals.sweeps_used) : std::nullopt;
}

double SwampReport::rals_success_rate() const {
  if (runs.empty()) return 0.0;
  const auto hits = std::count_if(runs.begin(), runs.end(), [](const SwampRun& r) { return r.rals.converged; });
  return static_cast<double>(hits) / static_cast<double>(runs.size());
}

int SwampReport::both_converged() const {
  return static_cast<int>(std::count_if(runs.begin(), runs.end(), [](const SwampRun& r) {
    return r.als.converged && r.rals.converged;
  }));
}

std::optional<double> SwampReport::rals_not_slower_rate() const {
  int both = 0;
  int not_slower = 0;
  for (const auto& r : runs) {
    if (!r.als.converged || !r.rals.converged) continue;
    ++both;
    if (r.rals.sweeps_used <= r.als.sweeps_used) ++not_slower;
  }
  if (both == 0) return std::nullopt;
  return static_cast<double>(not_slower) / both;
}

SwampReport run_swamp_bench(const SwampConfig& cfg) {
  if (cfg.instances < 1) throw std::invalid_argument("swamp: instances must be >= 1");
  if (cfg.als.regularization) throw std::invalid_argument("swamp: the ALS config must not regularize");
  SwampReport rep;
  rep.config = cfg;
  rep.runs.resize(static_cast<std::size_t>(cfg.instances));
  detail::parallel_for(rep.runs.size(), cfg.threads, [&](std::size_t i) {
    SwampRun& run = rep.runs[i];
    SynthSpec spec = cfg.base;
    spec.sigma_noise = 0.0;
    spec.seed = mix_seed(cfg.base.seed, i);
    const SynthTensor st = synth_btd_tensor(spec);
    run.instance_seed = st.seed_used;
    run.init_seed = mix_seed(st.seed_used, 1);
    const BlockFactors init =
        init_factors(spec.dims, spec.L, spec.R, InitStrategy::Gaussian, run.init_seed);

    SolverConfig als = cfg.als;
    SolverConfig rals = cfg.rals;
    for (SolverConfig* s : {&als, &rals}) {
      s->L = spec.L;
      s->R = spec.R;
      s->init = InitStrategy::Provided;
      s->initial = init;
    }
    run.als = fit(st.observed, als);
    run.rals = fit(st.observed, rals);
  });
  return rep;
}

// ---------------------------------------------------------------------------

void write_mc_json(std::ostream& os, const McReport& r) {
  const McConfig& c = r.config;
  nlohmann::json j;
  j["schema_version"] = kSchemaVersion;
  j["kind"] = "monte_carlo";
  j["dims"] = {c.base.dims.I, c.base.dims.J, c.base.dims.K};
  j["L"] = c.base.L;
  j["R"] = c.base.R;
  j["seed"] = c.base.seed;
  j["runs"] = c.runs;
  j["starts"] = c.starts;
  j["nonneg"] = c.base.nonneg;
  j["solver"] = solver_json(c.solver);
  j["levels"] = nlohmann::json::array();
  for (const auto& l : r.levels) {
    j["levels"].push_back({{"sigma", l.sigma},
                           {"median_error", l.errors.empty() ? nlohmann::json(nullptr)
                                                             : nlohmann::json(l.median_error)},
                           {"errors", l.errors},
                           {"failed_runs", l.failed_runs}});
  }
  os << j.dump(2) << '\n';
}

void write_mc_csv(std::ostream& os, const McReport& r) {
  os << "sigma,run,error\n";
  for (const auto& l : r.levels) {
    std::size_t e = 0;
    for (int run = 0; run < r.config.runs; ++run) {
      const bool failed =
          std::find(l.failed_runs.begin(), l.failed_runs.end(), run) != l.failed_runs.end();
      os << nlohmann::json(l.sigma).dump() << ',' << run << ','
         << (failed ? std::string("nan") : nlohmann::json(l.errors[e++]).dump()) << '\n';
    }
  }
}

void write_swamp_json(std::ostream& os, const SwampReport& r) {
  const SwampConfig& c = r.config;
  nlohmann::json j;
  j["schema_version"] = kSchemaVersion;
  j["kind"] = "swamp";
  j["dims"] = {c.base.dims.I, c.base.dims.J, c.base.dims.K};
  j["L"] = c.base.L;
  j["R"] = c.base.R;
  j["seed"] = c.base.seed;
  j["instances"] = c.instances;
  j["als"] = solver_json(c.als);
  j["rals"] = solver_json(c.rals);
  j["summary"] = {{"rals_success_rate", r.rals_success_rate()},
                  {"both_converged", r.both_converged()},
                  {"rals_not_slower_rate", r.rals_not_slower_rate()
                                               ? nlohmann::json(*r.rals_not_slower_rate())
                                               : nlohmann::json(nullptr)}};
  j["runs"] = nlohmann::json::array();
  for (const auto& run : r.runs) {
    j["runs"].push_back({{"instance_seed", run.instance_seed},
                         {"init_seed", run.init_seed},
                         {"initial_objective", run.als.objective_trace.front()},
                         {"als", {{"sweeps_to_tol", opt_json(run.als_sweeps_to_tol())},
                                  {"sweeps_used", run.als.sweeps_used},
                                  {"stop_reason", to_string(run.als.stop_reason)},
                                  {"final_relative_residual", run.als.final_relative_residual()},
                                  {"gradient_norm", run.als.gradient_norm}}},
                         {"rals", {{"sweeps_to_tol", opt_json(run.rals_sweeps_to_tol())},
                                   {"sweeps_used", run.rals.sweeps_used},
                                   {"stop_reason", to_string(run.rals.stop_reason)},
                                   {"final_relative_residual", run.rals.final_relative_residual()},
                                   {"gradient_norm", run.rals.gradient_norm}}}});
  }
  os << j.dump(2) << '\n';
}

void write_swamp_csv(std::ostream& os, const SwampReport& r, long stride) {
  if (stride < 1) stride = 1;
  os << "instance,method,sweep,lambda,objective,relative_residual\n";
  for (std::size_t i = 0; i < r.runs.size(); ++i) {
    for (auto [name, f] : {std::pair{"als", &r.runs[i].als}, std::pair{"rals", &r.runs[i].rals}}) {
      const std::size_t n = f->objective_trace.size();
      for (std::size_t s = 0; s < n; ++s) {
        if (s % static_cast<std::size_t>(stride) != 0 && s + 1 != n) continue;
        os << i << ',' << name << ',' << s << ',' << nlohmann::json(f->lambda_trace[s]).dump() << ','
           << nlohmann::json(f->objective_trace[s]).dump() << ','
           << nlohmann::json(f->relative_residual_trace[s]).dump() << '\n';
      }
    }
  }
}

}  // namespace btd
