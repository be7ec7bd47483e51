#pragma once

#include <string>
#include <vector>

#include "noisebath/linalg.hpp"
#include "noisebath/spin_model.hpp"

namespace noisebath {

enum class GateKind { Rx, Ry, Rz, X, MS, ISwap, CNOT, CZ };

// Rotations use R_a(t) = exp(-i t sigma_a / 2); MS(t) = exp(-i t XX / 2);
// ISwap(t) = exp(-i t (s+s- + s-s+) / 2). CNOT operands are (control, target).
struct Gate {
  GateKind kind = GateKind::X;
  std::vector<int> qubits;
  double theta = 0.0;

  bool two_qubit() const { return qubits.size() == 2; }
  bool has_angle() const;
  // 2x2, or 4x4 in the basis b(q0) + 2 b(q1).
  Mat matrix() const;
};

Gate rx(int q, double t);
Gate ry(int q, double t);
Gate rz(int q, double t);
Gate xgate(int q);
Gate ms(int a, int b, double t);
Gate iswap(int a, int b, double t);
Gate cnot(int control, int target);
Gate cz(int a, int b);

enum class Role { System, Bath };

using Layer = std::vector<Gate>;

struct Circuit {
  int n_qubits = 0;
  std::vector<Role> roles;
  std::vector<Layer> layers;
  std::vector<int> step_ends;  // layer counts at which a Trotter step is complete

  int depth() const { return static_cast<int>(layers.size()); }
  void add(Layer l);
  void add(const std::vector<Layer>& ls);
  // Throws on out-of-range operands or qubits used twice in a layer.
  void validate() const;
};

enum class XXScheme { CnotB, CnotS, ControlZ, ISwapPair, NativeMS };

// exp(-i theta sigma_x^s sigma_x^b / 2) up to global phase, as time-ordered layers.
std::vector<Layer> decompose_xx(double theta, XXScheme scheme, int q_s, int q_b);
// exp(-i theta sigma_y^s sigma_x^b / 2).
std::vector<Layer> decompose_yx(double theta, XXScheme scheme, int q_s, int q_b);
// exp(-i theta (XX + YY) / 2), equal to ISwap(2 theta), from two MS gates.
std::vector<Layer> decompose_hop(double theta, int q_s, int q_b);

XXScheme scheme_for(Decomposition d);

// One first-order Trotter step: free-evolution Rz layer, then each coupling in
// ascending bath-qubit order.
Circuit trotter_step(const SpinBathModel& model, Decomposition d, double tau);

// The model seen through X on the system qubit: Delta -> -Delta, Y and Z
// couplings change sign, hop and counter-rotating terms swap.
SpinBathModel conjugated_model(const SpinBathModel& model);

// Two-step super-period: U, then X_s, U-bar, X_s. step_ends marks both steps.
Circuit symmetrize(const Circuit& step, const SpinBathModel& model, Decomposition d, double tau);

struct SwapNetworkStep {
  Circuit circuit;
  int final_system_qubit = 0;
  // Nearest-neighbour couplings available in the layout.
  std::vector<std::pair<int, int>> edges;
};

// Single system spin held by qubits 0 and 1; bath qubit 2 + k sits next to
// system qubit (k / 2) % 2. The system state is SWAPped between the two
// registers after every pair of bath qubits.
SwapNetworkStep swap_network_step(const SpinBathModel& model, Decomposition d, double tau, int n_swap = 3);

bool respects_edges(const Circuit& c, const std::vector<std::pair<int, int>>& edges);

// Product of the layer unitaries (qubit count <= 10).
Mat unitary_of(const Circuit& c);

// True when no non-Rz gate with |theta| >= pi/4 (or an X gate) touches a bath qubit.
bool no_large_bath_rotations(const Circuit& c);

std::string to_text(const Circuit& c);
Circuit circuit_from_text(const std::string& text, int n_qubits, const std::vector<Role>& roles = {});

const char* gate_name(GateKind k);

}  // namespace noisebath
