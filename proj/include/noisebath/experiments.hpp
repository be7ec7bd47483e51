#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "noisebath/analysis.hpp"
#include "noisebath/circuit.hpp"
#include "noisebath/coarse_grain.hpp"
#include "noisebath/lindblad_oracle.hpp"
#include "noisebath/noisy_sim.hpp"
#include "noisebath/spectral.hpp"
#include "noisebath/spin_model.hpp"

namespace noisebath {

// Error categories mapped to process exit codes by the CLI.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct InvariantError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ConvergenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

SpectralTarget spectral_target_from_json(const nlohmann::json& j);
nlohmann::json to_json(const SpectralTarget& t);

struct ExperimentConfig {
  std::string name = "custom";
  nlohmann::json target;      // {"type": "ohmic" | "set" | "lorentzian-sum" | "tabulated", ...}
  bool use_target_modes = false;  // lorentzian-sum targets used as the bath without fitting
  FitConfig fit;
  std::vector<int> multiplicities;  // empty: 1 per mode; one entry: broadcast
  Decomposition decomposition = Decomposition::NativeMS;
  double epsilon = 0.01;
  double dephasing_ratio = 0.0;  // Gamma_bar / gamma_bar on bath qubits
  bool system_noise = false;     // requires fit.system_ratio
  bool symmetrize = false;
  bool two_bath = false;
  double delta = 1.0;
  int steps = 0;                 // 0: ceil(t_end / tau)
  double t_end = 10.0;
  std::vector<std::string> observables{"sx"};  // sx, sy, sz, charge
  std::string initial = "plus-x";              // plus-x | ground | excited
  std::string output_dir;
  bool oracle = false;
  int boson_n_max = 0;           // > 0: also run the bosonic oracle, raising n_max until converged
  bool fft = false;
  Connectivity connectivity = Connectivity::AllToAll;

  void validate() const;
};

nlohmann::json to_json(const ExperimentConfig& c);
// Missing fields keep their defaults; unknown keys are rejected.
ExperimentConfig config_from_json(const nlohmann::json& j, ExperimentConfig base = {});

ExperimentConfig example_a_config(int N = 8, double eps = 0.01, Decomposition d = Decomposition::NativeMS);
ExperimentConfig example_b_config(double alpha = 1.0);
ExperimentConfig example_c_config(bool system_noise = false, double delta = 1.0, double alpha = 0.25);

struct Prepared {
  ExperimentConfig config;
  std::optional<FitResult> fit;
  LorentzianBath bath;
  SpinBathModel model;
  TrotterPlan plan;
  Circuit period;       // one Trotter step, or the symmetrized pair
  double kappa_ref = 0.0;
  int circuit_qubits = 0;
  Mat rho0;             // on the circuit register
  std::vector<Observable> circuit_obs;
  std::vector<Observable> model_obs;
};

LorentzianBath fit_bath(const ExperimentConfig& c, std::optional<FitResult>* fit_out = nullptr);
// bath may be supplied to skip the fit.
Prepared prepare(const ExperimentConfig& c, const LorentzianBath* bath = nullptr);

struct RunOutput {
  Prepared prep;
  Trajectory sim;
  std::optional<Trajectory> oracle;
  std::optional<Trajectory> boson;
  int boson_n_max = 0;
  std::optional<Spectrum> spectrum;
  std::vector<Peak> peaks;
  nlohmann::json manifest;
};

RunOutput run_experiment(const ExperimentConfig& c, const LorentzianBath* bath = nullptr);
nlohmann::json manifest(const Prepared& p);
// Writes config, manifest, trajectories, spectrum and peaks into c.output_dir.
void write_outputs(const RunOutput& r);

// Shortest decimal fraction equal to x within 1e-12 (denominator <= 1e9).
Fraction to_fraction(double x);

double fermi(double energy, double temperature);

struct SteadyPoint {
  double delta = 0.0;
  double fermi = 0.0;    // classical limit for the charge
  double oracle = 0.0;   // coarse-grained spin oracle
  double sim = 0.0;      // noisy circuit
  CptpLog cptp;
};

// Steady-state charge versus splitting; the fit is done once. threads <= 0 reads NOISEBATH_THREADS.
std::vector<SteadyPoint> steady_sweep(const ExperimentConfig& base, const std::vector<double>& deltas, bool with_sim,
                                      int threads = 0);
std::string steady_csv(const std::vector<SteadyPoint>& pts);

int thread_budget();

}  // namespace noisebath
