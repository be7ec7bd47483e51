#include "noisebath/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "noisebath/analysis.hpp"
#include "noisebath/effective_noise.hpp"
#include "noisebath/experiments.hpp"

namespace noisebath {

namespace {

nlohmann::json read_json_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config " + path);
  try {
    return nlohmann::json::parse(f);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config " + path + " is not valid JSON: " + e.what());
  }
}

void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream f(p);
  if (!f) throw std::runtime_error("cannot write " + p.string());
  f << text;
}

// Options shared by the pipeline subcommands; unset fields leave the config untouched.
struct Overrides {
  std::string config;
  std::string out;
  std::optional<double> eps, delta, t_end, r, alpha, dephasing_ratio;
  std::optional<int> steps, N;
  std::optional<std::string> decomp, connectivity;
  bool oracle = false, no_oracle = false, fft = false, symmetrize = false, system_noise = false;

  void add_to(CLI::App* app, bool full) {
    app->add_option("--config", config, "JSON config file");
    app->add_option("--out", out, "output directory");
    app->add_option("--eps", eps, "gate error");
    app->add_option("--decomp", decomp, "ms | iswap | cnot-b | cnot-s | cz");
    app->add_option("--steps", steps, "Trotter steps (overrides t_end)");
    app->add_option("--t-end", t_end, "simulated time");
    app->add_flag("--no-oracle", no_oracle, "skip the Lindblad oracle");
    if (!full) return;
    app->add_option("--delta", delta, "system splitting");
    app->add_option("--r", r, "background rate factor");
    app->add_option("--N", N, "bath spins per mode");
    app->add_option("--dephasing-ratio", dephasing_ratio, "Gamma_bar / gamma_bar");
    app->add_option("--connectivity", connectivity, "all-to-all | swap-network");
    app->add_flag("--oracle", oracle, "also run the Lindblad oracle");
    app->add_flag("--fft", fft, "write the power spectrum");
    app->add_flag("--symmetrize", symmetrize, "insert X layers between steps");
    app->add_flag("--system-noise", system_noise, "noisy system qubit");
  }

  void apply(ExperimentConfig& c) const {
    if (eps) c.epsilon = *eps;
    if (delta) c.delta = *delta;
    if (t_end) {
      c.t_end = *t_end;
      c.steps = 0;
    }
    if (steps) c.steps = *steps;
    if (N) c.multiplicities = {*N};
    if (dephasing_ratio) c.dephasing_ratio = *dephasing_ratio;
    if (decomp) {
      try {
        c.decomposition = decomposition_from_string(*decomp);
      } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
      }
    }
    if (connectivity) c = config_from_json({{"connectivity", *connectivity}}, c);
    if (oracle) c.oracle = true;
    if (no_oracle) c.oracle = false;
    if (fft) c.fft = true;
    if (symmetrize) c.symmetrize = true;
    if (system_noise) {
      c.system_noise = true;
      c.symmetrize = true;
      if (!c.fit.system_ratio) c.fit.system_ratio = 0.5;
    }
    if (r) c.fit.system_ratio = *r;
    if (!out.empty()) c.output_dir = out;
  }
};

ExperimentConfig load(const Overrides& o, ExperimentConfig base) {
  if (!o.config.empty()) base = config_from_json(read_json_file(o.config), base);
  o.apply(base);
  base.validate();
  return base;
}

void report_run(const RunOutput& r, std::ostream& out) {
  out << std::setprecision(10);
  out << "tau " << r.prep.plan.tau << "  depth " << r.prep.plan.depth << "  steps " << r.prep.plan.steps << '\n';
  if (r.manifest.contains("v_tau")) out << "v*tau " << r.manifest["v_tau"].get<double>() << '\n';
  if (r.manifest.contains("v_tau_exact")) out << "v*tau exact " << r.manifest["v_tau_exact"].get<std::string>() << '\n';
  out << "delta*tau " << r.manifest["delta_tau"].get<double>() << '\n';
  if (r.manifest.contains("max_deviation_sim_oracle"))
    out << "max |sim - oracle| " << r.manifest["max_deviation_sim_oracle"].get<double>() << '\n';
  if (r.manifest.contains("max_deviation_spin_boson"))
    out << "max |spin - boson| " << r.manifest["max_deviation_spin_boson"].get<double>() << '\n';
  for (const auto& p : r.peaks) out << "peak " << p.omega << " power " << p.power << '\n';
  if (!r.prep.config.output_dir.empty()) out << "wrote " << r.prep.config.output_dir << '\n';
}

void finish_run(const RunOutput& r, std::ostream& out) {
  if (!r.prep.config.output_dir.empty()) write_outputs(r);
  report_run(r, out);
}

int cmd_fit(const Overrides& o, const std::string& target, std::optional<double> alpha, std::optional<int> n,
            bool homogeneous, std::optional<double> wmin, std::optional<double> wmax, std::ostream& out) {
  ExperimentConfig c;
  if (target == "ohmic") c = example_b_config(alpha.value_or(1.0));
  else if (target == "set") c = example_c_config(false, 1.0, alpha.value_or(0.25));
  else if (target == "lorentzian-sum") {
    c = example_a_config();
    c.use_target_modes = false;
  } else if (!target.empty()) throw ConfigError("unknown target '" + target + "'");
  if (!o.config.empty()) c = config_from_json(read_json_file(o.config), c);
  if (c.target.is_null()) throw ConfigError("no target given (use --target or --config)");
  if (n) c.fit.n = *n;
  if (homogeneous) c.fit.width_constraint = WidthConstraint::Homogeneous;
  if (wmin) c.fit.omega_min = *wmin;
  if (wmax) c.fit.omega_max = *wmax;
  if (o.r) c.fit.system_ratio = *o.r;
  if (!o.out.empty()) c.output_dir = o.out;
  c.use_target_modes = false;
  const SpectralTarget t = spectral_target_from_json(c.target);
  std::optional<FitResult> fr;
  const LorentzianBath bath = fit_bath(c, &fr);
  out << std::setprecision(10) << "cost " << fr->cost << "  rms residual " << fr->rms_residual << "  iterations "
      << fr->iterations << '\n';
  for (const auto& m : bath.modes)
    out << "mode center " << m.center << " width " << m.width << " weight " << m.weight() << '\n';
  if (!c.output_dir.empty()) {
    std::filesystem::create_directories(c.output_dir);
    nlohmann::json j = to_json(*fr);
    j["target"] = c.target;
    j["window"] = {c.fit.omega_min, c.fit.omega_max};
    write_text(std::filesystem::path(c.output_dir) / "fit.json", j.dump(2) + "\n");
    std::ostringstream csv;
    csv << std::setprecision(17) << "omega,target,model,residual\n";
    const int g = c.fit.grid_points;
    for (int k = 0; k < g; ++k) {
      const double w = c.fit.omega_min + (c.fit.omega_max - c.fit.omega_min) * k / (g - 1);
      const double s = evaluate(t, w), m = bath.spectral(w, 0, 0).real();
      csv << w << ',' << s << ',' << m << ',' << m - s << '\n';
    }
    write_text(std::filesystem::path(c.output_dir) / "residual.csv", csv.str());
    out << "wrote " << c.output_dir << '\n';
  }
  return kExitOk;
}

int cmd_analyze(const std::vector<std::string>& files, const std::string& column, bool hann, double prominence,
                double tail, const std::string& outdir, std::ostream& out) {
  if (files.empty()) throw ConfigError("analyze: no input files");
  nlohmann::json summary = nlohmann::json::array();
  for (const auto& f : files) {
    Trajectory tr;
    try {
      tr = Trajectory::read_csv(f);
    } catch (const std::exception& e) {
      throw ConfigError("analyze: " + f + ": " + e.what());
    }
    if (tr.t.empty()) throw ConfigError("analyze: " + f + " has no samples");
    const std::string col = column.empty() ? tr.names.front() : column;
    if (std::find(tr.names.begin(), tr.names.end(), col) == tr.names.end())
      throw ConfigError("analyze: " + f + " has no column '" + col + "'");
    const Spectrum s = power_spectrum(tr, col, hann ? WindowFn::Hann : WindowFn::None);
    const auto peaks = find_peaks(s, prominence);
    nlohmann::json entry = {{"file", f}, {"column", col}, {"resolution", s.resolution}, {"peaks", peaks_to_json(peaks)}};
    try {
      const WindowAverage w = steady_window_average(tr, col, tail);
      entry["steady"] = {{"value", w.value}, {"drift", w.drift}, {"range", w.range}};
    } catch (const std::runtime_error& e) {
      entry["steady"] = {{"error", e.what()}};
    }
    out << std::setprecision(10) << f << ": " << peaks.size() << " peaks";
    if (!peaks.empty()) out << ", strongest at " << peaks.front().omega;
    out << '\n';
    if (!outdir.empty()) {
      std::filesystem::create_directories(outdir);
      const std::string stem = std::filesystem::path(f).stem().string();
      write_spectrum_csv(s, (std::filesystem::path(outdir) / (stem + "_spectrum.csv")).string());
      write_text(std::filesystem::path(outdir) / (stem + "_peaks.json"), peaks_to_json(peaks).dump(2) + "\n");
    }
    summary.push_back(entry);
  }
  if (!outdir.empty()) write_text(std::filesystem::path(outdir) / "analysis.json", summary.dump(2) + "\n");
  return kExitOk;
}

int cmd_effective_noise(const Overrides& o, int n_bath, std::ostream& out) {
  ExperimentConfig c = example_a_config(n_bath, 0.01, Decomposition::NativeMS);
  c.oracle = false;
  c.boson_n_max = 0;
  c.fft = false;
  c.steps = 1;
  c = load(o, c);
  if (c.symmetrize || c.two_bath) throw ConfigError("effective-noise analyses a single unsymmetrized step");
  const Prepared p = prepare(c);
  if (p.circuit_qubits > 5) throw ConfigError("effective-noise supports at most 5 qubits");
  const NoiseChannelSpec noise = NoiseChannelSpec::from_plan(p.plan);
  const EffectiveLindblad e = effective_lindblad(p.period, noise, p.plan.tau);
  const FirstOrderReport fo = verify_first_order(p.period, noise, p.plan.tau, Mat(p.model.hamiltonian()));
  const DephasingFit df = extract_system_dephasing(p.period, noise, p.plan.tau, 0);
  nlohmann::json j = to_json(e);
  j["decomposition"] = to_string(c.decomposition);
  j["depth"] = p.plan.depth;
  j["per_qubit_rate"] = nlohmann::json::array();
  for (int q = 0; q < e.n_qubits; ++q) {
    double g = 0.0, z = 0.0;
    for (const auto& t : e.terms)
      if (t.qubit == q) (t.kind == NoiseKind::Damping ? g : z) += t.weight;
    j["per_qubit_rate"].push_back({{"qubit", q}, {"damping", g}, {"dephasing", z}});
  }
  j["system_dephasing"] = {{"Gamma_eff", df.Gamma_eff}, {"residual", df.residual}, {"residual_without", df.residual_without}};
  j["first_order"] = {{"eps_scale", fo.eps_scale},
                      {"product_dev", fo.product_dev},
                      {"generator_dev", fo.generator_dev},
                      {"generator_baseline", fo.generator_baseline},
                      {"ratios", fo.ratios}};
  std::ostringstream rep;
  rep << text_report(e) << std::setprecision(8) << "system dephasing " << df.Gamma_eff << "  residual " << df.residual
      << " (without " << df.residual_without << ")\n";
  for (size_t k = 0; k < fo.ratios.size(); ++k) rep << "deviation ratio " << fo.ratios[k] << '\n';
  out << rep.str();
  if (!c.output_dir.empty()) {
    std::filesystem::create_directories(c.output_dir);
    write_text(std::filesystem::path(c.output_dir) / "effective_noise.json", j.dump(2) + "\n");
    write_text(std::filesystem::path(c.output_dir) / "effective_noise.txt", rep.str());
  }
  return kExitOk;
}

int cmd_example_c(const Overrides& o, const std::vector<double>& sweep, std::ostream& out) {
  ExperimentConfig c = example_c_config(o.system_noise, o.delta.value_or(1.0), o.alpha.value_or(0.25));
  c = load(o, c);
  if (sweep.empty()) {
    finish_run(run_experiment(c), out);
    return kExitOk;
  }
  const auto pts = steady_sweep(c, sweep, true);
  const std::string csv = steady_csv(pts);
  out << csv;
  if (!c.output_dir.empty()) {
    std::filesystem::create_directories(c.output_dir);
    write_text(std::filesystem::path(c.output_dir) / "steady.csv", csv);
    write_text(std::filesystem::path(c.output_dir) / "config.json", to_json(c).dump(2) + "\n");
  }
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Noisy-hardware simulation of open quantum systems"};
  app.require_subcommand(1);

  Overrides o_fit, o_sim, o_eff, o_a, o_b, o_c;
  std::string target;
  std::optional<double> alpha;
  std::optional<int> nfit;
  bool homogeneous = false;
  std::optional<double> wmin, wmax;
  auto* fit = app.add_subcommand("fit", "fit a Lorentzian bath to a spectral target");
  o_fit.add_to(fit, false);
  fit->add_option("--target", target, "ohmic | set | lorentzian-sum");
  fit->add_option("--alpha", alpha, "coupling strength");
  fit->add_option("--n", nfit, "number of modes");
  fit->add_flag("--homogeneous", homogeneous, "identical widths");
  fit->add_option("--omega-min", wmin);
  fit->add_option("--omega-max", wmax);
  fit->add_option("--r", o_fit.r, "background rate factor");

  auto* sim = app.add_subcommand("simulate", "run the noisy circuit for a config");
  o_sim.add_to(sim, true);

  std::vector<std::string> files;
  std::string column, outdir;
  bool hann = false;
  double prominence = 0.05, tail = 0.2;
  auto* an = app.add_subcommand("analyze", "spectra, peaks and steady values of trajectory CSVs");
  an->add_option("files", files, "trajectory CSV files");
  an->add_option("--column", column, "observable column");
  an->add_flag("--hann", hann, "Hann window");
  an->add_option("--prominence", prominence, "peak prominence relative to the maximum");
  an->add_option("--tail", tail, "tail fraction for steady values");
  an->add_option("--out", outdir, "output directory");

  int n_bath = 1;
  auto* eff = app.add_subcommand("effective-noise", "effective Lindbladian of one noisy Trotter step");
  o_eff.add_to(eff, false);
  eff->add_option("--n-bath", n_bath, "bath qubits");

  auto* ea = app.add_subcommand("example-a", "broad Lorentzian mode, ultra-strong coupling");
  o_a.add_to(ea, true);
  auto* eb = app.add_subcommand("example-b", "ohmic bath with eight modes");
  o_b.add_to(eb, true);
  eb->add_option("--alpha", o_b.alpha, "ohmic coupling");
  std::vector<double> sweep;
  auto* ec = app.add_subcommand("example-c", "single-electron transistor");
  o_c.add_to(ec, true);
  ec->add_option("--alpha", o_c.alpha, "coupling strength");
  ec->add_option("--sweep", sweep, "steady-state sweep over these splittings");

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  }

  try {
    if (*fit) return cmd_fit(o_fit, target, alpha, nfit, homogeneous, wmin, wmax, out);
    if (*sim) {
      if (o_sim.config.empty()) throw ConfigError("simulate needs --config");
      ExperimentConfig c = load(o_sim, ExperimentConfig{});
      finish_run(run_experiment(c), out);
      return kExitOk;
    }
    if (*an) return cmd_analyze(files, column, hann, prominence, tail, outdir, out);
    if (*eff) return cmd_effective_noise(o_eff, n_bath, out);
    if (*ea) {
      ExperimentConfig c = example_a_config(o_a.N.value_or(8), o_a.eps.value_or(0.01),
                                            o_a.decomp ? decomposition_from_string(*o_a.decomp) : Decomposition::NativeMS);
      finish_run(run_experiment(load(o_a, c)), out);
      return kExitOk;
    }
    if (*eb) {
      finish_run(run_experiment(load(o_b, example_b_config(o_b.alpha.value_or(1.0)))), out);
      return kExitOk;
    }
    if (*ec) return cmd_example_c(o_c, sweep, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const InvariantError& e) {
    err << "numerical invariant failure: " << e.what() << '\n';
    return kExitInvariant;
  } catch (const ConvergenceError& e) {
    err << "not converged: " << e.what() << '\n';
    return kExitConvergence;
  } catch (const std::invalid_argument& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "numerical invariant failure: " << e.what() << '\n';
    return kExitInvariant;
  }
  return kExitConfig;
}

}  // namespace noisebath
