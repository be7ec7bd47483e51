#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "noisebath/circuit.hpp"
#include "noisebath/noisy_sim.hpp"

namespace noisebath {

enum class NoiseKind { Damping, Dephasing };

// Contributes weight * factor * (L rho L^+ - {L^+ L, rho}/2), factor = 1 for
// damping and 1/2 for dephasing, so that weights are p / tau.
struct NoiseOperatorTerm {
  Mat op;
  double weight = 0.0;
  NoiseKind kind = NoiseKind::Damping;
  int layer = 0;
  int qubit = 0;
  std::vector<std::pair<int, int>> merged_from;  // (layer, qubit) of merged terms

  double lindblad_rate() const { return kind == NoiseKind::Damping ? weight : 0.5 * weight; }
};

struct EffectiveLindblad {
  int n_qubits = 0;
  double tau = 0.0;
  std::vector<NoiseOperatorTerm> terms;
  bool first_order_guard_ok = true;

  double total_weight() const;
  // Superoperator (column stacking) of sum_k rate_k D[L_k].
  Mat superop() const;
};

// U_suffix op U_suffix^+ for the layers [from, depth).
Mat conjugate_through(const Circuit& c, int from_layer, const Mat& op);
Mat conjugate_through(const Circuit& suffix, const Mat& op);

enum class TwoQubitGate { CNOT, CZ };
enum class IncomingNoise { Minus, Plus, Z };
enum class Operand { Control, Target };

struct TableEntry {
  Mat op;  // 4x4 in the basis b(control) + 2 b(target)
  std::string text;
};

// Transformed noise operator for noise that arrives before the gate.
TableEntry table_transform(TwoQubitGate g, IncomingNoise n, Operand where);

EffectiveLindblad effective_lindblad(const Circuit& step, const NoiseChannelSpec& noise, double tau,
                                     double merge_tol = 1e-10);

// Superoperator of one circuit period with per-layer noise (noise may be null).
Mat circuit_superop(const Circuit& c, const NoiseChannelSpec* noise);
Mat unitary_superop(const Mat& u);
Mat hamiltonian_superop(const Mat& h);

struct FirstOrderReport {
  std::vector<double> eps_scale;        // 1, 1/2, 1/4
  std::vector<double> product_dev;      // ||S_noisy - exp(tau L_eff) U||_max
  std::vector<double> generator_dev;    // ||S_noisy - exp(tau(-i[H,.] + L_eff))||_max minus the noiseless baseline
  double generator_baseline = 0.0;      // Trotter mismatch alone
  std::vector<double> ratios;           // product_dev[k] / product_dev[k+1]
};

// noise is the reference strength; it is scaled by 1, 1/2, 1/4.
FirstOrderReport verify_first_order(const Circuit& step, const NoiseChannelSpec& noise, double tau,
                                    const Mat& hamiltonian);

// Least-squares system dephasing: exp(tau (L_phys + (G/2) D[sigma_z^s])) U fitted to the noisy step.
// L_phys has sigma_- at p_gamma D / tau and sigma_z at p_Gamma D / (2 tau) on every qubit.
struct DephasingFit {
  double Gamma_eff = 0.0;
  double residual = 0.0;
  double residual_without = 0.0;
};
DephasingFit extract_system_dephasing(const Circuit& step, const NoiseChannelSpec& noise, double tau,
                                      int system_qubit = 0);

// "0.5 XZI + ..." with qubit 0 first; coefficients below tol dropped.
std::string pauli_string(const Mat& op, int n_qubits, double tol = 1e-10);

nlohmann::json to_json(const EffectiveLindblad& e);
std::string text_report(const EffectiveLindblad& e);

}  // namespace noisebath
