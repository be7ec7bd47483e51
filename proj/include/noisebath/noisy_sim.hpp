#pragma once

#include <vector>

#include "noisebath/circuit.hpp"
#include "noisebath/lindblad_oracle.hpp"
#include "noisebath/spin_model.hpp"

namespace noisebath {

// Per-layer channel strengths: p_gamma = gamma_bar t_gate, p_Gamma = Gamma_bar t_gate.
struct NoiseChannelSpec {
  std::vector<double> p_gamma;
  std::vector<double> p_Gamma;

  static NoiseChannelSpec none(int n);
  static NoiseChannelSpec from_plan(const TrotterPlan& plan);
  NoiseChannelSpec scaled(double f) const;
  void validate(int n) const;
  bool is_zero() const;
};

struct SimRun {
  Circuit circuit;  // one step, or a multi-step period with step_ends
  int steps = 1;
  double tau = 1.0;
  Mat rho0;
  std::vector<Observable> observables;
  NoiseChannelSpec noise;
  bool symmetrized = false;
  int cptp_every = 10;
};

void apply_gate(Mat& rho, const Gate& g, int n_qubits);
// Exact damping then dephasing on every qubit over one gate time.
void apply_layer_noise(Mat& rho, const NoiseChannelSpec& noise, int n_qubits);
// Layers [begin, end) each followed by layer noise (skipped when noise is null).
void apply_layers(Mat& rho, const Circuit& c, const NoiseChannelSpec* noise, int begin, int end);

// Records observables at t = k tau after every Trotter step.
Trajectory run(const SimRun& r);

struct SimSteadyState {
  Mat rho;
  int steps = 0;
  double change = 0.0;
  bool converged = false;
};

// Repeats the circuit period until the entrywise l1 change per period drops below tol.
SimSteadyState run_until_steady(const Circuit& c, const Mat& rho0, const NoiseChannelSpec& noise, double tol,
                                int max_periods);

// Tr(O rho) for a Hermitian observable; rejects non-Hermitian input.
double expectation_dense(const Mat& rho, const Mat& op);

// Exact single-qubit Lindblad propagator for damping gamma and dephasing Gamma over time t.
Mat single_qubit_lindblad_channel(const Mat& rho, double gamma, double Gamma, double t);

}  // namespace noisebath
