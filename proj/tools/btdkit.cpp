// btdkit: command-line front end for the BTD solver, the synthetic experiments
// and the source-apportionment pipeline.

#include "btdkit/apportionment.hpp"
#include "btdkit/experiments.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>

namespace fs = std::filesystem;
using namespace btd;

namespace {

struct SolverFlags {
  long max_sweeps = 0;
  double tol_residual = 0.0;
  double tol_rel_objective = 0.0;
  int stall_window = 0;
  double lambda0 = 1.0;
  double decay = 0.95;
  double floor = 1e-8;
  bool als = false;

  explicit SolverFlags(const SolverConfig& d)
      : max_sweeps(d.max_sweeps),
        tol_residual(d.tol_residual),
        tol_rel_objective(d.tol_rel_objective),
        stall_window(d.stall_window) {
    if (d.regularization) {
      lambda0 = d.regularization->lambda0;
      decay = d.regularization->decay;
      floor = d.regularization->floor;
    }
  }

  void add(CLI::App* app, bool with_als_switch = true) {
    app->add_option("--max-sweeps", max_sweeps, "Sweep cap")->capture_default_str();
    app->add_option("--tol-residual", tol_residual, "Relative residual target")->capture_default_str();
    app->add_option("--tol-rel-objective", tol_rel_objective, "Stall threshold on relative objective change")
        ->capture_default_str();
    app->add_option("--stall-window", stall_window, "Consecutive quiet sweeps before stalling")
        ->capture_default_str();
    app->add_option("--lambda0", lambda0, "Initial proximal weight")->capture_default_str();
    app->add_option("--decay", decay, "Geometric decay of the proximal weight")->capture_default_str();
    app->add_option("--lambda-floor", floor, "Lower bound of the proximal weight")->capture_default_str();
    if (with_als_switch) app->add_flag("--als", als, "Plain ALS (no proximal term)");
  }

  void apply(SolverConfig& c) const {
    c.max_sweeps = max_sweeps;
    c.tol_residual = tol_residual;
    c.tol_rel_objective = tol_rel_objective;
    c.stall_window = stall_window;
    if (als)
      c.regularization.reset();
    else
      c.regularization = LambdaSchedule{lambda0, decay, floor};
  }
};

fs::path prepare_out(const std::string& dir) {
  fs::create_directories(dir);
  return fs::path(dir);
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream os(p);
  if (!os) throw std::runtime_error("cannot write " + p.string());
  return os;
}

void save_matrix(const fs::path& p, const Matrix& m) {
  auto os = open_out(p);
  write_matrix(os, m);
}

void save_json(const fs::path& p, const nlohmann::json& j) {
  auto os = open_out(p);
  os << j.dump(2) << '\n';
}

nlohmann::json fit_summary(const FitReport& r) {
  return {{"sweeps_used", r.sweeps_used},
          {"converged", r.converged},
          {"stop_reason", to_string(r.stop_reason)},
          {"final_objective", r.final_objective()},
          {"final_relative_residual", r.final_relative_residual()},
          {"gradient_norm", r.gradient_norm},
          {"rank_deficient_solves", r.rank_deficient_solves},
          {"warnings", r.warnings}};
}

InitStrategy parse_init(const std::string& s) {
  if (s == "gaussian") return InitStrategy::Gaussian;
  if (s == "uniform") return InitStrategy::UniformNonneg;
  throw std::invalid_argument("unknown init strategy '" + s + "'");
}

Dims to_dims(const std::vector<Index>& v) { return Dims{v.at(0), v.at(1), v.at(2)}; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Rank-(L,L,1) block term decomposition toolkit"};
  app.require_subcommand(1);
  std::string out;

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a planted BTD tensor with Gaussian noise");
  std::vector<Index> s_dims{5, 6, 7};
  SynthSpec s_spec;
  synth->add_option("--dims", s_dims, "I J K")->expected(3)->capture_default_str();
  synth->add_option("--L", s_spec.L, "Block rank")->capture_default_str();
  synth->add_option("--R", s_spec.R, "Number of blocks")->capture_default_str();
  synth->add_option("--seed", s_spec.seed, "Random seed")->required();
  synth->add_option("--sigma", s_spec.sigma_noise, "Noise level")->capture_default_str();
  synth->add_flag("--nonneg", s_spec.nonneg, "Uniform non-negative factors");
  synth->add_option("--out", out, "Output directory")->required();

  // fit
  auto* fitcmd = app.add_subcommand("fit", "Fit a BTD to a tensor file");
  SolverConfig f_cfg;
  SolverFlags f_flags(f_cfg);
  std::string f_tensor, f_init = "gaussian";
  fitcmd->add_option("--tensor", f_tensor, "Tensor text file")->required()->check(CLI::ExistingFile);
  fitcmd->add_option("--L", f_cfg.L, "Block rank")->capture_default_str();
  fitcmd->add_option("--R", f_cfg.R, "Number of blocks")->capture_default_str();
  fitcmd->add_option("--seed", f_cfg.seed, "Initialization seed")->capture_default_str();
  fitcmd->add_option("--init", f_init, "gaussian or uniform")->capture_default_str();
  fitcmd->add_flag("--nonneg", f_cfg.nonnegative, "Non-negative factors");
  f_flags.add(fitcmd);
  fitcmd->add_option("--out", out, "Output directory")->required();

  // mc
  auto* mc = app.add_subcommand("mc", "Noise Monte Carlo on planted tensors");
  McConfig m_cfg = McConfig::defaults();
  SolverFlags m_flags(m_cfg.solver);
  std::vector<Index> m_dims{5, 6, 7};
  mc->add_option("--dims", m_dims, "I J K")->expected(3)->capture_default_str();
  mc->add_option("--L", m_cfg.base.L, "Block rank")->capture_default_str();
  mc->add_option("--R", m_cfg.base.R, "Number of blocks")->capture_default_str();
  mc->add_option("--seed", m_cfg.base.seed, "Base seed")->required();
  mc->add_option("--levels", m_cfg.levels, "Noise levels")->capture_default_str();
  mc->add_option("--runs", m_cfg.runs, "Runs per level")->capture_default_str();
  mc->add_option("--starts", m_cfg.starts, "Random starts per run")->capture_default_str();
  mc->add_option("--threads", m_cfg.threads, "Worker threads")->capture_default_str();
  mc->add_flag("--nonneg", m_cfg.base.nonneg, "Non-negative planted factors and fits");
  m_flags.add(mc);
  mc->add_option("--out", out, "Output directory")->required();

  // swamp
  auto* swamp = app.add_subcommand("swamp", "ALS against RALS from shared initializations");
  SwampConfig w_cfg = SwampConfig::defaults();
  SolverFlags w_flags(w_cfg.rals);
  std::vector<Index> w_dims{10, 15, 28};
  long w_stride = 1;
  swamp->add_option("--dims", w_dims, "I J K")->expected(3)->capture_default_str();
  swamp->add_option("--L", w_cfg.base.L, "Block rank")->capture_default_str();
  swamp->add_option("--R", w_cfg.base.R, "Number of blocks")->capture_default_str();
  swamp->add_option("--seed", w_cfg.base.seed, "Base seed")->required();
  swamp->add_option("--instances", w_cfg.instances, "Number of planted instances")->capture_default_str();
  swamp->add_option("--threads", w_cfg.threads, "Worker threads")->capture_default_str();
  swamp->add_option("--stride", w_stride, "Trace CSV keeps every n-th sweep")->capture_default_str();
  w_flags.add(swamp, false);
  swamp->add_option("--out", out, "Output directory")->required();

  // apportion
  auto* apportion = app.add_subcommand("apportion", "Non-negative source apportionment of a sample CSV");
  SolverConfig a_cfg;
  SolverFlags a_flags(a_cfg);
  std::string a_samples;
  Index a_P = 9, a_L = 9;
  int a_starts = 1;
  unsigned a_threads = 1;
  std::vector<std::string> a_bins = kDefaultSizeBins;
  apportion->add_option("--samples", a_samples, "Input CSV")->required()->check(CLI::ExistingFile);
  apportion->add_option("--P", a_P, "Number of sources")->capture_default_str();
  apportion->add_option("--L", a_L, "Rank of each source profile")->capture_default_str();
  apportion->add_option("--seed", a_cfg.seed, "Base seed for the starts")->required();
  apportion->add_option("--starts", a_starts, "Random starts, best objective kept")->capture_default_str();
  apportion->add_option("--threads", a_threads, "Worker threads")->capture_default_str();
  apportion->add_option("--bins", a_bins, "Size bin labels, large to small")->capture_default_str();
  a_flags.add(apportion);
  apportion->add_option("--out", out, "Output directory")->required();

  // surrogate
  auto* surrogate = app.add_subcommand("surrogate", "Write a planted-source sample CSV");
  SurrogateSpec g_spec;
  surrogate->add_option("--P", g_spec.P, "Planted sources")->capture_default_str();
  surrogate->add_option("--L", g_spec.L, "Rank of each planted profile")->capture_default_str();
  surrogate->add_option("--snr-db", g_spec.snr_db, "Target signal-to-noise ratio in dB")->capture_default_str();
  surrogate->add_option("--seed", g_spec.seed, "Random seed")->required();
  surrogate->add_option("--start-date", g_spec.start_date, "First sampling day")->capture_default_str();
  surrogate->add_option("--out", out, "Output directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    const fs::path dir = prepare_out(out);

    if (*synth) {
      s_spec.dims = to_dims(s_dims);
      const SynthTensor st = synth_btd_tensor(s_spec);
      save_tensor((dir / "tensor.txt").string(), st.observed);
      save_matrix(dir / "truth_A.txt", st.truth.A);
      save_matrix(dir / "truth_B.txt", st.truth.B);
      save_matrix(dir / "truth_C.txt", st.truth.C);
      save_json(dir / "synth.json", {{"schema_version", 1},
                                     {"kind", "synth"},
                                     {"dims", s_dims},
                                     {"L", s_spec.L},
                                     {"R", s_spec.R},
                                     {"seed", s_spec.seed},
                                     {"seed_used", st.seed_used},
                                     {"sigma", s_spec.sigma_noise},
                                     {"nonneg", s_spec.nonneg}});
    } else if (*fitcmd) {
      const Tensor3 t = load_tensor(f_tensor);
      f_flags.apply(f_cfg);
      f_cfg.init = parse_init(f_init);
      const FitReport rep = fit(t, f_cfg);
      {
        auto os = open_out(dir / "fit_report.txt");
        write_fit_report(os, rep);
      }
      save_matrix(dir / "A.txt", rep.factors.A);
      save_matrix(dir / "B.txt", rep.factors.B);
      save_matrix(dir / "C.txt", rep.factors.C);
      nlohmann::json j = fit_summary(rep);
      j["schema_version"] = 1;
      j["kind"] = "fit";
      save_json(dir / "fit.json", j);
      std::cout << "relative residual " << rep.final_relative_residual() << " after " << rep.sweeps_used
                << " sweeps (" << to_string(rep.stop_reason) << ")\n";
    } else if (*mc) {
      m_cfg.base.dims = to_dims(m_dims);
      m_flags.apply(m_cfg.solver);
      m_cfg.solver.nonnegative = m_cfg.base.nonneg;
      const McReport r = run_monte_carlo(m_cfg);
      {
        auto os = open_out(dir / "mc.json");
        write_mc_json(os, r);
      }
      auto os = open_out(dir / "mc.csv");
      write_mc_csv(os, r);
      for (const McLevel& l : r.levels)
        std::cout << "sigma " << l.sigma << "  median error " << l.median_error << "  failed "
                  << l.failed_runs.size() << '\n';
    } else if (*swamp) {
      w_cfg.base.dims = to_dims(w_dims);
      w_flags.apply(w_cfg.rals);
      for (SolverConfig* s : {&w_cfg.als, &w_cfg.rals}) {
        s->max_sweeps = w_cfg.rals.max_sweeps;
        s->tol_residual = w_cfg.rals.tol_residual;
        s->tol_rel_objective = w_cfg.rals.tol_rel_objective;
        s->stall_window = w_cfg.rals.stall_window;
        s->L = w_cfg.base.L;
        s->R = w_cfg.base.R;
      }
      const SwampReport r = run_swamp_bench(w_cfg);
      {
        auto os = open_out(dir / "swamp.json");
        write_swamp_json(os, r);
      }
      auto os = open_out(dir / "swamp.csv");
      write_swamp_csv(os, r, w_stride);
      std::cout << "RALS success rate " << r.rals_success_rate() << ", both converged " << r.both_converged();
      if (auto ns = r.rals_not_slower_rate()) std::cout << ", RALS not slower " << *ns;
      std::cout << '\n';
    } else if (*apportion) {
      const AirTensor d = load_samples(a_samples, a_bins);
      a_flags.apply(a_cfg);
      const SourceModel m = fit_sources_multistart(d, a_P, a_L, a_cfg, a_starts, a_threads);
      export_report(m, d, dir.string());
      nlohmann::json j = fit_summary(m.fit);
      j["schema_version"] = 1;
      j["kind"] = "apportion";
      j["dims"] = {d.tensor.I(), d.tensor.J(), d.tensor.K()};
      j["P"] = a_P;
      j["L"] = a_L;
      j["seed"] = a_cfg.seed;
      j["starts"] = a_starts;
      j["weighted_chi_square"] =
          d.uncertainties ? nlohmann::json(weighted_chi_square(d, m)) : nlohmann::json(nullptr);
      save_json(dir / "apportion.json", j);
      std::cout << "relative residual " << m.fit.final_relative_residual() << '\n';
    } else if (*surrogate) {
      const Surrogate s = make_surrogate(g_spec);
      write_samples((dir / "samples.csv").string(), s.data);
      const auto prof = source_profiles(s.truth);
      {
        auto os = open_out(dir / "truth_contributions.csv");
        os << std::setprecision(std::numeric_limits<double>::max_digits10);
        os << "datetime,source,value\n";
        for (Index k = 0; k < s.truth.B.rows(); ++k)
          for (Index p = 0; p < s.truth.P; ++p)
            os << s.data.calendar[static_cast<std::size_t>(k)].to_string() << ',' << p + 1 << ','
               << s.truth.B(k, p) << '\n';
      }
      save_json(dir / "surrogate.json", {{"schema_version", 1},
                                         {"kind", "surrogate"},
                                         {"dims", {s.data.tensor.I(), s.data.tensor.J(), s.data.tensor.K()}},
                                         {"P", g_spec.P},
                                         {"L", g_spec.L},
                                         {"seed", g_spec.seed},
                                         {"snr_db_target", g_spec.snr_db},
                                         {"snr_db_achieved", s.achieved_snr_db}});
    }
  } catch (const std::exception& e) {
    std::cerr << "btdkit: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
