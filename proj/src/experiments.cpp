#include "noisebath/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "noisebath/effective_noise.hpp"

namespace noisebath {

namespace {

template <class F>
auto staged(const char* tag, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const ConfigError&) {
    throw;
  } catch (const InvariantError&) {
    throw;
  } catch (const ConvergenceError&) {
    throw;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string(tag) + ": " + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string(tag) + ": " + e.what());
  } catch (const std::runtime_error& e) {
    throw InvariantError(std::string(tag) + ": " + e.what());
  }
}

double num(const nlohmann::json& j, const char* key, double def) {
  if (!j.contains(key)) return def;
  if (!j[key].is_number()) throw ConfigError(std::string("field '") + key + "' must be a number");
  return j[key].get<double>();
}

void reject_unknown(const nlohmann::json& j, const std::set<std::string>& known, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!known.count(it.key())) throw ConfigError("unknown key '" + it.key() + "' in " + where);
}

}  // namespace

SpectralTarget spectral_target_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("type") || !j["type"].is_string())
    throw ConfigError("target needs a string field 'type'");
  const std::string type = j["type"];
  SpectralTarget t;
  if (type == "lorentzian-sum") {
    reject_unknown(j, {"type", "modes", "background"}, "target");
    LorentzianSum s;
    if (!j.contains("modes") || !j["modes"].is_array()) throw ConfigError("lorentzian-sum target needs 'modes'");
    for (const auto& m : j["modes"]) {
      reject_unknown(m, {"weight", "v", "center", "width"}, "target mode");
      LorentzMode lm;
      lm.weight = m.contains("v") ? std::pow(num(m, "v", 0.0), 2) : num(m, "weight", 0.0);
      lm.center = num(m, "center", 0.0);
      lm.width = num(m, "width", 1.0);
      s.modes.push_back(lm);
    }
    s.background = num(j, "background", 0.0);
    t = s;
  } else if (type == "ohmic") {
    reject_unknown(j, {"type", "alpha", "temperature", "cutoff"}, "target");
    t = OhmicExpCutoff{num(j, "alpha", 0.1), Temperature{num(j, "temperature", 0.0)}, num(j, "cutoff", 1.0)};
  } else if (type == "set") {
    reject_unknown(j, {"type", "alpha", "omega0", "width", "temperature", "cutoff", "omega1"}, "target");
    SetStructured s;
    s.alpha = num(j, "alpha", s.alpha);
    s.omega0 = num(j, "omega0", s.omega0);
    s.width = num(j, "width", s.width);
    s.temperature = Temperature{num(j, "temperature", s.temperature.value)};
    s.cutoff = num(j, "cutoff", s.cutoff);
    s.omega1 = num(j, "omega1", 0.0);
    t = s;
  } else if (type == "tabulated") {
    reject_unknown(j, {"type", "path", "grid", "values"}, "target");
    if (j.contains("path")) {
      t = staged("target", [&] { return load_tabulated_csv(j["path"].get<std::string>()); });
    } else {
      Tabulated tab;
      tab.grid = j.at("grid").get<std::vector<double>>();
      tab.values = j.at("values").get<std::vector<double>>();
      t = tab;
    }
  } else {
    throw ConfigError("unknown target type '" + type + "'");
  }
  staged("target", [&] {
    validate(t);
    return 0;
  });
  return t;
}

nlohmann::json to_json(const SpectralTarget& t) {
  nlohmann::json j;
  if (const auto* s = std::get_if<LorentzianSum>(&t)) {
    j["type"] = "lorentzian-sum";
    j["modes"] = nlohmann::json::array();
    for (const auto& m : s->modes) j["modes"].push_back({{"weight", m.weight}, {"center", m.center}, {"width", m.width}});
    j["background"] = s->background;
  } else if (const auto* o = std::get_if<OhmicExpCutoff>(&t)) {
    j = {{"type", "ohmic"}, {"alpha", o->alpha}, {"temperature", o->temperature.value}, {"cutoff", o->cutoff}};
  } else if (const auto* e = std::get_if<SetStructured>(&t)) {
    j = {{"type", "set"},          {"alpha", e->alpha},   {"omega0", e->omega0},
         {"width", e->width},      {"temperature", e->temperature.value},
         {"cutoff", e->cutoff},    {"omega1", e->omega1}};
  } else {
    const auto& tab = std::get<Tabulated>(t);
    j = {{"type", "tabulated"}, {"grid", tab.grid}, {"values", tab.values}};
  }
  return j;
}

void ExperimentConfig::validate() const {
  if (target.is_null()) throw ConfigError("config has no target");
  const SpectralTarget t = spectral_target_from_json(target);
  if (use_target_modes && !std::holds_alternative<LorentzianSum>(t))
    throw ConfigError("use_target_modes requires a lorentzian-sum target");
  if (!use_target_modes) staged("fit config", [&] {
      fit.validate();
      return 0;
    });
  if (system_noise != fit.system_ratio.has_value())
    throw ConfigError("system_noise and the background ratio r must be given together");
  if (system_noise && !two_bath) throw ConfigError("system-qubit noise maps to the background only in the two-bath model");
  if (system_noise && !symmetrize) throw ConfigError("system-qubit noise requires symmetrization");
  if (symmetrize && connectivity == Connectivity::SwapNetwork) throw ConfigError("symmetrization is not available on the swap network");
  if (two_bath && connectivity == Connectivity::SwapNetwork) throw ConfigError("the swap network supports the single-bath model only");
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw ConfigError("epsilon must lie in (0, 1)");
  if (dephasing_ratio < 0.0) throw ConfigError("dephasing ratio must be >= 0");
  if (steps < 0) throw ConfigError("steps must be >= 0");
  if (steps == 0 && !(t_end > 0.0)) throw ConfigError("t_end must be > 0");
  if (observables.empty()) throw ConfigError("at least one observable is required");
  for (const auto& o : observables)
    if (o != "sx" && o != "sy" && o != "sz" && o != "charge") throw ConfigError("unknown observable '" + o + "'");
  if (initial != "plus-x" && initial != "ground" && initial != "excited") throw ConfigError("unknown initial state '" + initial + "'");
  for (int m : multiplicities)
    if (m < 1) throw ConfigError("multiplicities must be >= 1");
  if (boson_n_max < 0) throw ConfigError("boson_n_max must be >= 0");
}

nlohmann::json to_json(const ExperimentConfig& c) {
  nlohmann::json f = {{"n", c.fit.n},
                      {"omega_min", c.fit.omega_min},
                      {"omega_max", c.fit.omega_max},
                      {"homogeneous", c.fit.width_constraint == WidthConstraint::Homogeneous},
                      {"width_ratios", c.fit.width_ratios},
                      {"grid_points", c.fit.grid_points},
                      {"max_iterations", c.fit.max_iterations},
                      {"tolerance", c.fit.tolerance}};
  if (c.fit.system_ratio) f["r"] = *c.fit.system_ratio;
  return {{"name", c.name},
          {"target", c.target},
          {"use_target_modes", c.use_target_modes},
          {"fit", f},
          {"multiplicities", c.multiplicities},
          {"decomposition", to_string(c.decomposition)},
          {"epsilon", c.epsilon},
          {"dephasing_ratio", c.dephasing_ratio},
          {"system_noise", c.system_noise},
          {"symmetrize", c.symmetrize},
          {"two_bath", c.two_bath},
          {"delta", c.delta},
          {"steps", c.steps},
          {"t_end", c.t_end},
          {"observables", c.observables},
          {"initial", c.initial},
          {"output_dir", c.output_dir},
          {"oracle", c.oracle},
          {"boson_n_max", c.boson_n_max},
          {"fft", c.fft},
          {"connectivity", c.connectivity == Connectivity::SwapNetwork ? "swap-network" : "all-to-all"}};
}

ExperimentConfig config_from_json(const nlohmann::json& j, ExperimentConfig c) {
  reject_unknown(j,
                 {"name", "target", "use_target_modes", "fit", "multiplicities", "decomposition", "epsilon",
                  "dephasing_ratio", "system_noise", "symmetrize", "two_bath", "delta", "steps", "t_end", "observables",
                  "initial", "output_dir", "oracle", "boson_n_max", "fft", "connectivity"},
                 "config");
  try {
    if (j.contains("name")) c.name = j["name"].get<std::string>();
    if (j.contains("target")) c.target = j["target"];
    if (j.contains("use_target_modes")) c.use_target_modes = j["use_target_modes"].get<bool>();
    if (j.contains("fit")) {
      const auto& f = j["fit"];
      reject_unknown(f, {"n", "omega_min", "omega_max", "homogeneous", "width_ratios", "r", "grid_points",
                         "max_iterations", "tolerance"},
                     "fit");
      if (f.contains("n")) c.fit.n = f["n"].get<int>();
      c.fit.omega_min = num(f, "omega_min", c.fit.omega_min);
      c.fit.omega_max = num(f, "omega_max", c.fit.omega_max);
      if (f.contains("homogeneous"))
        c.fit.width_constraint = f["homogeneous"].get<bool>() ? WidthConstraint::Homogeneous : WidthConstraint::FixedRatios;
      if (f.contains("width_ratios")) c.fit.width_ratios = f["width_ratios"].get<std::vector<double>>();
      if (f.contains("r")) {
        if (f["r"].is_null()) c.fit.system_ratio.reset();
        else c.fit.system_ratio = f["r"].get<double>();
      }
      if (f.contains("grid_points")) c.fit.grid_points = f["grid_points"].get<int>();
      if (f.contains("max_iterations")) c.fit.max_iterations = f["max_iterations"].get<int>();
      c.fit.tolerance = num(f, "tolerance", c.fit.tolerance);
    }
    if (j.contains("multiplicities")) c.multiplicities = j["multiplicities"].get<std::vector<int>>();
    if (j.contains("decomposition")) c.decomposition = decomposition_from_string(j["decomposition"].get<std::string>());
    c.epsilon = num(j, "epsilon", c.epsilon);
    c.dephasing_ratio = num(j, "dephasing_ratio", c.dephasing_ratio);
    if (j.contains("system_noise")) c.system_noise = j["system_noise"].get<bool>();
    if (j.contains("symmetrize")) c.symmetrize = j["symmetrize"].get<bool>();
    if (j.contains("two_bath")) c.two_bath = j["two_bath"].get<bool>();
    c.delta = num(j, "delta", c.delta);
    if (j.contains("steps")) c.steps = j["steps"].get<int>();
    c.t_end = num(j, "t_end", c.t_end);
    if (j.contains("observables")) c.observables = j["observables"].get<std::vector<std::string>>();
    if (j.contains("initial")) c.initial = j["initial"].get<std::string>();
    if (j.contains("output_dir")) c.output_dir = j["output_dir"].get<std::string>();
    if (j.contains("oracle")) c.oracle = j["oracle"].get<bool>();
    if (j.contains("boson_n_max")) c.boson_n_max = j["boson_n_max"].get<int>();
    if (j.contains("fft")) c.fft = j["fft"].get<bool>();
    if (j.contains("connectivity")) {
      const std::string s = j["connectivity"].get<std::string>();
      if (s == "all-to-all") c.connectivity = Connectivity::AllToAll;
      else if (s == "swap-network") c.connectivity = Connectivity::SwapNetwork;
      else throw ConfigError("unknown connectivity '" + s + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return c;
}

ExperimentConfig example_a_config(int N, double eps, Decomposition d) {
  ExperimentConfig c;
  c.name = "example-a";
  // v = omega0 = 2 kappa, in units of omega0
  c.target = {{"type", "lorentzian-sum"},
              {"modes", nlohmann::json::array({{{"weight", 1.0}, {"center", 1.0}, {"width", 0.5}}})},
              {"background", 0.0}};
  c.use_target_modes = true;
  c.fit.n = 1;
  c.multiplicities = {N};
  c.decomposition = d;
  c.epsilon = eps;
  c.dephasing_ratio = 0.5;
  c.delta = 0.9;
  c.t_end = 12.0;
  c.observables = {"sx"};
  c.oracle = true;
  c.boson_n_max = 5;
  c.fft = true;
  return c;
}

ExperimentConfig example_b_config(double alpha) {
  ExperimentConfig c;
  c.name = "example-b";
  c.target = {{"type", "ohmic"}, {"alpha", alpha}, {"temperature", 1.5}, {"cutoff", 10.0}};
  c.fit.n = 8;
  c.fit.omega_min = -4.0;
  c.fit.omega_max = 12.0;
  c.fit.width_constraint = WidthConstraint::Homogeneous;
  c.decomposition = Decomposition::NativeMS;
  c.epsilon = 0.05;
  c.delta = 1.0;
  c.t_end = 20.0;
  c.observables = {"sx"};
  c.oracle = true;
  return c;
}

ExperimentConfig example_c_config(bool system_noise, double delta, double alpha) {
  ExperimentConfig c;
  c.name = "example-c";
  c.target = {{"type", "set"},          {"alpha", alpha}, {"omega0", 1.0},
              {"width", 0.4},           {"temperature", 0.3},
              {"cutoff", std::sqrt(3.0)}};
  c.fit.n = 2;
  c.fit.omega_min = -1.0;
  c.fit.omega_max = 3.5;
  c.fit.width_constraint = WidthConstraint::Homogeneous;
  if (system_noise) c.fit.system_ratio = 0.5;
  c.system_noise = system_noise;
  c.symmetrize = system_noise;
  c.two_bath = true;
  c.decomposition = Decomposition::NativeMS;
  c.epsilon = 0.01;
  c.delta = delta;
  c.t_end = 40.0;
  c.observables = {"sx", "charge"};
  c.oracle = true;
  c.fft = true;
  return c;
}

LorentzianBath fit_bath(const ExperimentConfig& c, std::optional<FitResult>* fit_out) {
  const SpectralTarget t = spectral_target_from_json(c.target);
  if (c.use_target_modes) {
    const auto& s = std::get<LorentzianSum>(t);
    return LorentzianBath::single(s.modes, s.background / 4.0);
  }
  FitResult r = staged("fit", [&] { return fit(MultiChannelTarget::scalar(t), c.fit); });
  if (!r.converged) throw ConvergenceError("fit: Levenberg-Marquardt did not converge");
  if (fit_out) *fit_out = r;
  return r.bath;
}

namespace {

Mat obs_matrix(const std::string& name) {
  if (name == "sx") return pauli_x();
  if (name == "sy") return pauli_y();
  if (name == "sz") return pauli_z();
  // occupation of the upper level |1>
  return sigma_plus() * sigma_minus();
}

Vec initial_vec(const std::string& s) {
  if (s == "plus-x") return plus_x_state();
  Vec v = Vec::Zero(2);
  v(s == "excited" ? 1 : 0) = 1.0;
  return v;
}

std::vector<Observable> system_observables(const std::vector<std::string>& names, const std::vector<int>& dims) {
  std::vector<Observable> out;
  for (const auto& n : names) out.push_back({n, site_op(obs_matrix(n), 0, dims)});
  return out;
}

}  // namespace

Prepared prepare(const ExperimentConfig& c, const LorentzianBath* bath_in) {
  c.validate();
  Prepared p;
  p.config = c;
  p.bath = bath_in ? *bath_in : fit_bath(c, &p.fit);
  SystemSpec sys;
  sys.splittings = {c.delta};
  p.model = staged("spin model", [&] {
    if (c.two_bath) {
      const TwoBathForm form = c.decomposition == Decomposition::NativeISwap ? TwoBathForm::HopCounter : TwoBathForm::XY;
      return build_two_bath_model(p.bath, p.bath, sys, form, c.dephasing_ratio);
    }
    std::vector<int> mult = c.multiplicities;
    if (mult.empty()) mult.assign(p.bath.modes.size(), 1);
    if (mult.size() == 1) mult.assign(p.bath.modes.size(), mult.front());
    return bosons_to_spins(p.bath, mult, sys, c.dephasing_ratio);
  });
  if (c.system_noise) {
    p.model.system_noise.gamma = 8.0 * p.bath.system_rate(0);
    p.model.system_noise.symmetrized = true;
  }
  staged("spin model", [&] {
    check_system_noise(p.model);
    return 0;
  });
  for (const auto& a : p.model.aux) p.kappa_ref = std::max(p.kappa_ref, a.width());
  if (!(p.kappa_ref > 0.0)) throw ConfigError("spin model: bath has no broadening");

  p.plan = staged("plan", [&] { return make_plan(p.model, c.decomposition, c.epsilon, p.kappa_ref, 1, c.connectivity, c.symmetrize); });
  const double tau = p.plan.tau;
  p.plan.steps = c.steps > 0 ? c.steps : static_cast<int>(std::ceil(c.t_end / tau - 1e-9));

  staged("circuit", [&] {
    if (c.connectivity == Connectivity::SwapNetwork) {
      SwapNetworkStep sw = swap_network_step(p.model, c.decomposition, tau);
      if (sw.final_system_qubit != 0)
        throw ConfigError("circuit: the swap network leaves the system on qubit 1 for this bath size");
      p.period = sw.circuit;
    } else {
      const Circuit step = trotter_step(p.model, c.decomposition, tau);
      p.period = c.symmetrize ? symmetrize(step, p.model, c.decomposition, tau) : step;
    }
    return 0;
  });
  p.circuit_qubits = p.period.n_qubits;
  const auto cdims = qubit_dims(p.circuit_qubits);
  p.rho0 = product_state(cdims, {{0, initial_vec(c.initial)}});
  p.circuit_obs = system_observables(c.observables, cdims);
  p.model_obs = system_observables(c.observables, qubit_dims(p.model.n_qubits()));
  return p;
}

Fraction to_fraction(double x) {
  std::int64_t den = 1;
  for (int k = 0; k <= 9; ++k, den *= 10) {
    const double s = x * static_cast<double>(den);
    if (std::abs(s - std::round(s)) < 1e-12 * std::max(1.0, std::abs(s)))
      return Fraction(static_cast<std::int64_t>(std::llround(s)), den);
  }
  throw std::invalid_argument("value has no short decimal representation");
}

nlohmann::json manifest(const Prepared& p) {
  nlohmann::json m;
  m["config"] = to_json(p.config);
  if (p.fit) m["fit"] = to_json(*p.fit);
  m["bath"] = to_json(p.bath);
  m["model"] = to_json(p.model);
  m["plan"] = to_json(p.plan);
  m["tau"] = p.plan.tau;
  m["depth"] = p.plan.depth;
  m["effective_depth"] = p.plan.effective_depth;
  m["steps"] = p.plan.steps;
  m["t_end"] = p.plan.steps * p.plan.tau;
  m["kappa_ref"] = p.kappa_ref;
  m["delta_tau"] = p.config.delta * p.plan.tau;
  m["width_mismatch"] = plan_width_mismatch(p.model, p.plan);
  if (p.bath.modes.size() == 1) {
    const double v = std::abs(p.bath.modes.front().couplings.front());
    m["v_tau"] = v * p.plan.tau;
    if (p.config.use_target_modes) {
      try {
        const Fraction f = match_trotter_step_exact(p.plan.effective_depth, to_fraction(p.config.epsilon),
                                                    to_fraction(p.kappa_ref)) *
                           to_fraction(v);
        m["v_tau_exact"] = std::to_string(f.num) + "/" + std::to_string(f.den);
      } catch (const std::invalid_argument&) {
      }
    }
  }
  m["circuit"] = to_text(p.period);
  m["circuit_qubits"] = p.circuit_qubits;
  return m;
}

namespace {

double max_deviation(const Trajectory& a, const Trajectory& b, size_t col) {
  const size_t n = std::min(a.values.size(), b.values.size());
  double d = 0.0;
  for (size_t k = 0; k < n; ++k) d = std::max(d, std::abs(a.values[k][col] - b.values[k][col]));
  return d;
}

}  // namespace

RunOutput run_experiment(const ExperimentConfig& c, const LorentzianBath* bath) {
  RunOutput out;
  out.prep = prepare(c, bath);
  const Prepared& p = out.prep;
  const double tau = p.plan.tau;
  const int steps = p.plan.steps;

  SimRun r;
  r.circuit = p.period;
  r.steps = steps;
  r.tau = tau;
  r.rho0 = p.rho0;
  r.observables = p.circuit_obs;
  r.noise = NoiseChannelSpec::from_plan(p.plan);
  r.symmetrized = c.symmetrize;
  out.sim = staged("simulate", [&] { return run(r); });

  if (c.oracle) {
    out.oracle = staged("oracle", [&] {
      const LindbladSpec spec = build_spin_lindblad(p.model);
      const Mat rho0 = product_state(spec.dims, {{0, initial_vec(c.initial)}});
      return integrate(spec, rho0, steps * tau, tau, p.model_obs);
    });
  }
  if (c.boson_n_max > 0 && !c.two_bath) {
    staged("boson oracle", [&] {
      std::optional<Trajectory> prev;
      for (int n = c.boson_n_max;; n += 2) {
        const std::vector<int> nm(p.bath.modes.size(), n);
        double dim = 2.0;
        for (int x : nm) dim *= x + 1;
        if (dim > 4096) {
          if (!prev) throw ConfigError("boson oracle: Fock space too large");
          break;
        }
        const LindbladSpec spec = build_boson_lindblad(p.bath, p.model.system, nm);
        const Mat rho0 = product_state(spec.dims, {{0, initial_vec(c.initial)}});
        Trajectory t = integrate(spec, rho0, steps * tau, tau, system_observables(c.observables, spec.dims));
        const bool done = prev && max_deviation(*prev, t, 0) < 1e-3;
        prev = std::move(t);
        out.boson_n_max = n;
        if (done) break;
      }
      out.boson = std::move(prev);
      return 0;
    });
  }
  if (c.fft) {
    out.spectrum = staged("analyze", [&] { return power_spectrum(out.sim, c.observables.front()); });
    out.peaks = find_peaks(*out.spectrum);
  }
  out.manifest = manifest(p);
  out.manifest["cptp_sim"] = {{"max_trace_error", out.sim.cptp.max_trace_error},
                              {"min_eigenvalue", out.sim.cptp.min_eigenvalue},
                              {"checks", out.sim.cptp.checks}};
  if (out.oracle) {
    out.manifest["cptp_oracle"] = {{"max_trace_error", out.oracle->cptp.max_trace_error},
                                   {"min_eigenvalue", out.oracle->cptp.min_eigenvalue},
                                   {"checks", out.oracle->cptp.checks}};
    out.manifest["max_deviation_sim_oracle"] = max_deviation(out.sim, *out.oracle, 0);
  }
  if (out.boson) {
    out.manifest["boson_n_max"] = out.boson_n_max;
    if (out.oracle) out.manifest["max_deviation_spin_boson"] = max_deviation(*out.oracle, *out.boson, 0);
  }
  if (c.fft) out.manifest["peaks"] = peaks_to_json(out.peaks);
  return out;
}

void write_outputs(const RunOutput& r) {
  const std::string& dir = r.prep.config.output_dir;
  if (dir.empty()) throw ConfigError("output_dir is empty");
  std::filesystem::create_directories(dir);
  auto put = [&](const std::string& name, const std::string& text) {
    std::ofstream f(std::filesystem::path(dir) / name);
    if (!f) throw std::runtime_error("cannot write " + name);
    f << text;
  };
  put("config.json", to_json(r.prep.config).dump(2) + "\n");
  put("manifest.json", r.manifest.dump(2) + "\n");
  put("sim.csv", r.sim.to_csv());
  if (r.oracle) put("oracle.csv", r.oracle->to_csv());
  if (r.boson) put("boson.csv", r.boson->to_csv());
  if (r.spectrum) {
    put("spectrum.csv", spectrum_csv(*r.spectrum));
    put("peaks.json", peaks_to_json(r.peaks).dump(2) + "\n");
  }
}

double fermi(double energy, double temperature) {
  if (temperature <= 0.0) return energy > 0.0 ? 0.0 : energy < 0.0 ? 1.0 : 0.5;
  return 1.0 / (std::exp(energy / temperature) + 1.0);
}

int thread_budget() {
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  if (const char* e = std::getenv("NOISEBATH_THREADS")) {
    const int n = std::atoi(e);
    if (n >= 1) return n;
  }
  return static_cast<int>(hw);
}

namespace {

// Unit-trace fixed point of a linear map given as a column-stacked superoperator.
Mat fixed_point(const Mat& S, long d) {
  Mat A = S - Mat::Identity(S.rows(), S.cols());
  Vec b = Vec::Zero(A.rows());
  A.row(0).setZero();
  for (long a = 0; a < d; ++a) A(0, a * d + a) = 1.0;
  b(0) = 1.0;
  const Vec x = A.partialPivLu().solve(b);
  Mat rho = unvec(x, static_cast<int>(d));
  return 0.5 * (rho + rho.adjoint());
}

Mat lindblad_superop(const LindbladSpec& spec) {
  Mat L = commutator_superop(Mat(spec.H));
  for (const auto& c : spec.collapse) L += c.rate * dissipator_superop(Mat(c.op));
  return L;
}

SteadyPoint solve_point(const ExperimentConfig& base, double delta, const LorentzianBath& bath, bool with_sim) {
  ExperimentConfig c = base;
  c.delta = delta;
  const Prepared p = prepare(c, &bath);
  SteadyPoint pt;
  pt.delta = delta;
  const SetStructured* st = nullptr;
  const SpectralTarget t = spectral_target_from_json(c.target);
  st = std::get_if<SetStructured>(&t);
  pt.fermi = fermi(delta, st ? st->temperature.value : temperature_of(t).value);

  const Mat P1 = sigma_plus() * sigma_minus();
  const LindbladSpec spec = staged("oracle", [&] { return build_spin_lindblad(p.model); });
  const long d = spec.dim();
  Mat rho;
  if (d <= 64) {
    rho = fixed_point(Mat::Identity(d * d, d * d) + lindblad_superop(spec), d);
  } else {
    SteadyStateOptions so;
    so.tolerance = 1e-9;
    const SteadyStateResult res = staged("oracle", [&] { return steady_state(spec, product_state(spec.dims, {}), so); });
    if (!res.converged) throw ConvergenceError("oracle steady state did not converge");
    rho = res.rho;
  }
  pt.cptp.merge(check_density_matrix(rho));
  pt.oracle = expectation(site_op(P1, 0, spec.dims), rho);

  if (with_sim) {
    const NoiseChannelSpec noise = NoiseChannelSpec::from_plan(p.plan);
    Mat rs;
    if (p.circuit_qubits <= 5) {
      const long dc = 1L << p.circuit_qubits;
      rs = fixed_point(circuit_superop(p.period, &noise), dc);
    } else {
      const SimSteadyState ss = staged("simulate", [&] { return run_until_steady(p.period, p.rho0, noise, 1e-10, 200000); });
      if (!ss.converged) throw ConvergenceError("circuit steady state did not converge");
      rs = ss.rho;
    }
    pt.cptp.merge(check_density_matrix(rs));
    const SpMat n0 = site_op(P1, 0, qubit_dims(p.circuit_qubits));
    pt.sim = expectation_dense(rs, Mat(n0));
    if (c.symmetrize) {
      // The two strobe points of the super-period carry opposite first-order
      // offsets from the system damping; report their mean.
      SimRun half;
      half.circuit = p.period;
      half.steps = 1;
      half.tau = p.plan.tau;
      half.rho0 = rs;
      half.observables = {{"n", n0}};
      half.noise = noise;
      half.symmetrized = true;
      const Trajectory h = run(half);
      pt.cptp.merge(h.cptp);
      pt.sim = 0.5 * (h.values[0][0] + h.values[1][0]);
    }
  }
  if (pt.cptp.max_trace_error > 1e-8 || pt.cptp.min_eigenvalue < -1e-6)
    throw InvariantError("steady state is not a valid density matrix");
  return pt;
}

}  // namespace

std::vector<SteadyPoint> steady_sweep(const ExperimentConfig& base, const std::vector<double>& deltas, bool with_sim,
                                      int threads) {
  base.validate();
  const LorentzianBath bath = fit_bath(base);
  std::vector<SteadyPoint> out(deltas.size());
  std::vector<std::exception_ptr> errs(deltas.size());
  const int nt = std::max(1, std::min<int>(threads > 0 ? threads : thread_budget(), static_cast<int>(deltas.size())));
  std::atomic<size_t> next{0};
  auto worker = [&] {
    for (size_t i = next++; i < deltas.size(); i = next++) {
      try {
        out[i] = solve_point(base, deltas[i], bath, with_sim);
      } catch (...) {
        errs[i] = std::current_exception();
      }
    }
  };
  if (nt == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int k = 0; k < nt; ++k) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (auto& e : errs)
    if (e) std::rethrow_exception(e);
  return out;
}

std::string steady_csv(const std::vector<SteadyPoint>& pts) {
  std::ostringstream os;
  os << std::setprecision(17) << "delta,fermi,oracle,sim\n";
  for (const auto& p : pts) os << p.delta << ',' << p.fermi << ',' << p.oracle << ',' << p.sim << '\n';
  return os.str();
}

}  // namespace noisebath
