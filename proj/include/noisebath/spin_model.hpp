#pragma once

#include <complex>
#include <cstdint>
#include <string>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "noisebath/coarse_grain.hpp"
#include "noisebath/linalg.hpp"

namespace noisebath {

enum class Axis { X, Y, Z };

// How an auxiliary spin couples to its system spin.
//   Axis:    (g/2) sigma_a^s sigma_x^b
//   Hop:     g (sigma_+^s sigma_-^b + h.c.)
//   Counter: g (sigma_+^s sigma_+^b + h.c.)
enum class AuxTerm { Axis, Hop, Counter };

enum class Decomposition { NativeMS, NativeISwap, CnotB, CnotS, ControlZ };
enum class ModelKind { XXOnly, TwoBath };
enum class Connectivity { AllToAll, SwapNetwork };
enum class TwoBathForm { XY, HopCounter };

struct SystemSpec {
  std::vector<double> splittings{1.0};                              // Delta_ii
  std::vector<std::tuple<int, int, std::complex<double>>> hopping;  // (i, j, Delta_ij), i < j
  std::vector<Axis> group_axes{Axis::X};                            // system operator per bath group

  int n_s() const { return static_cast<int>(splittings.size()); }
  void validate() const;
};

// Effective (continuous-time) system-qubit noise.
struct SystemNoise {
  double gamma = 0.0;       // damping rate
  double Gamma = 0.0;       // dephasing rate (collapse sigma_z at Gamma/2)
  bool symmetrized = false; // damping appears as sigma_x and sigma_y flips, each at gamma/4
  double flip_rate = 0.0;   // direct sigma_x collapse (single-bath background scheme)

  bool any() const { return gamma > 0.0 || Gamma > 0.0 || flip_rate > 0.0; }
};

struct AuxSpin {
  double omega = 0.0;
  std::vector<std::complex<double>> couplings{1.0};  // g per system spin, already divided by sqrt(N)
  int mode = 0;
  int member = 0;
  int multiplicity = 1;
  int group = 0;
  AuxTerm term = AuxTerm::Axis;
  Axis axis = Axis::X;
  double gamma = 0.0;  // effective damping rate
  double Gamma = 0.0;  // effective dephasing rate

  double coupling() const { return couplings.front().real(); }
  double width() const { return gamma + 2.0 * Gamma; }
};

struct QubitRates {
  double gamma = 0.0;
  double Gamma = 0.0;
};

struct SpinBathModel {
  SystemSpec system;
  std::vector<AuxSpin> aux;  // qubit n_s + k holds aux[k]
  SystemNoise system_noise;
  ModelKind kind = ModelKind::XXOnly;
  TwoBathForm form = TwoBathForm::XY;
  double background_rate = 0.0;  // kappa_system of the fitted bath

  int n_s() const { return system.n_s(); }
  int n_bath() const { return static_cast<int>(aux.size()); }
  int n_qubits() const { return n_s() + n_bath(); }
  int qubit_of_aux(int k) const { return n_s() + k; }
  std::vector<QubitRates> qubit_rates() const;

  // Spin Hamiltonian on all qubits (little-endian).
  SpMat hamiltonian() const;
  // Weak-coupling spectral function seen by system spin i through the X group.
  double spectral(double omega, int group = 0) const;
  void validate() const;
};

// kappa = gamma + 2 Gamma
double effective_broadening(double gamma, double Gamma);

// epsilon = t_gate (gamma + 2 Gamma)
double gate_error(double t_gate, double gamma_bar, double Gamma_bar);

// Conversions from epsilon for damping-only noise.
inline double one_qubit_pauli_error(double eps) { return eps / 2.0; }
inline double one_qubit_average_error(double eps) { return eps / 3.0; }
inline double two_qubit_pauli_error(double eps) { return eps; }
inline double two_qubit_average_error(double eps) { return 4.0 * eps / 5.0; }

// dephasing_ratio = Gamma_bar / gamma_bar for every bath qubit.
SpinBathModel bosons_to_spins(const LorentzianBath& bath, const std::vector<int>& multiplicities,
                              const SystemSpec& system, double dephasing_ratio = 0.0);

// Two identical baths coupled via sigma_x and sigma_y (XY form) or via the
// equivalent excitation-hop and counter-rotating terms (HopCounter form).
SpinBathModel build_two_bath_model(const LorentzianBath& bath_x, const LorentzianBath& bath_y,
                                   const SystemSpec& system, TwoBathForm form = TwoBathForm::XY,
                                   double dephasing_ratio = 0.0);

int circuit_depth(Decomposition d, int n_q, ModelKind kind, Connectivity c = Connectivity::AllToAll,
                  int n_swap = 3);

double match_trotter_step(int depth, double eps, double kappa);

struct Fraction {
  std::int64_t num = 0;
  std::int64_t den = 1;
  Fraction() = default;
  Fraction(std::int64_t n, std::int64_t d);
  bool operator==(const Fraction& o) const { return num == o.num && den == o.den; }
  double value() const { return static_cast<double>(num) / static_cast<double>(den); }
};
Fraction operator*(const Fraction& a, const Fraction& b);
Fraction operator/(const Fraction& a, const Fraction& b);

// tau = D eps / kappa in exact rational arithmetic.
Fraction match_trotter_step_exact(int depth, Fraction eps, Fraction kappa);

struct TrotterPlan {
  double tau = 0.0;
  int steps = 1;
  Decomposition decomposition = Decomposition::NativeMS;
  Connectivity connectivity = Connectivity::AllToAll;
  bool symmetrized = false;
  int depth = 1;            // layers of one Trotter step
  int effective_depth = 1;  // layers per step including symmetrization X layers
  double epsilon = 0.0;
  std::vector<double> p_gamma;  // per qubit, per layer
  std::vector<double> p_Gamma;
};

// Chooses tau = D_eff eps / kappa_ref and per-layer strengths p = rate * tau / D_eff.
TrotterPlan make_plan(const SpinBathModel& model, Decomposition d, double eps, double kappa_ref, int steps,
                      Connectivity c = Connectivity::AllToAll, bool symmetrize = false);

// Checks gamma_q + 2 Gamma_q = D_eff (p_gamma + 2 p_Gamma) / tau for every qubit.
double plan_width_mismatch(const SpinBathModel& model, const TrotterPlan& plan);

// System noise must reproduce the fitted background. Throws when it cannot
// or when the mismatch exceeds tol (relative).
void check_system_noise(const SpinBathModel& model, double tol = 1e-9);

const char* to_string(Decomposition d);
Decomposition decomposition_from_string(const std::string& s);

nlohmann::json to_json(const SpinBathModel& m);
SpinBathModel model_from_json(const nlohmann::json& j);
nlohmann::json to_json(const TrotterPlan& p);

}  // namespace noisebath
