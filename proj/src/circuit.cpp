#include "noisebath/circuit.hpp"

#include <cmath>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

namespace noisebath {

bool Gate::has_angle() const {
  return kind == GateKind::Rx || kind == GateKind::Ry || kind == GateKind::Rz || kind == GateKind::MS ||
         kind == GateKind::ISwap;
}

Mat Gate::matrix() const {
  const double c = std::cos(0.5 * theta);
  const double s = std::sin(0.5 * theta);
  switch (kind) {
    case GateKind::Rx: return c * pauli_i() - kI * s * pauli_x();
    case GateKind::Ry: return c * pauli_i() - kI * s * pauli_y();
    case GateKind::Rz: return c * pauli_i() - kI * s * pauli_z();
    case GateKind::X: return pauli_x();
    case GateKind::MS: {
      Mat m = Mat::Zero(4, 4);
      for (int k = 0; k < 4; ++k) {
        m(k, k) = c;
        m(k, 3 - k) = -kI * s;
      }
      return m;
    }
    case GateKind::ISwap: {
      Mat m = Mat::Identity(4, 4);
      m(1, 1) = c;
      m(2, 2) = c;
      m(1, 2) = -kI * s;
      m(2, 1) = -kI * s;
      return m;
    }
    case GateKind::CNOT: {
      // control is q0 (bit 0), target q1 (bit 1)
      Mat m = Mat::Zero(4, 4);
      m(0, 0) = 1.0;
      m(2, 2) = 1.0;
      m(3, 1) = 1.0;
      m(1, 3) = 1.0;
      return m;
    }
    case GateKind::CZ: {
      Mat m = Mat::Identity(4, 4);
      m(3, 3) = -1.0;
      return m;
    }
  }
  return pauli_i();
}

Gate rx(int q, double t) { return {GateKind::Rx, {q}, t}; }
Gate ry(int q, double t) { return {GateKind::Ry, {q}, t}; }
Gate rz(int q, double t) { return {GateKind::Rz, {q}, t}; }
Gate xgate(int q) { return {GateKind::X, {q}, 0.0}; }
Gate ms(int a, int b, double t) { return {GateKind::MS, {a, b}, t}; }
Gate iswap(int a, int b, double t) { return {GateKind::ISwap, {a, b}, t}; }
Gate cnot(int control, int target) { return {GateKind::CNOT, {control, target}, 0.0}; }
Gate cz(int a, int b) { return {GateKind::CZ, {a, b}, 0.0}; }

void Circuit::add(Layer l) { layers.push_back(std::move(l)); }

void Circuit::add(const std::vector<Layer>& ls) {
  for (const auto& l : ls) layers.push_back(l);
}

void Circuit::validate() const {
  if (static_cast<int>(roles.size()) != n_qubits) throw std::invalid_argument("circuit: one role per qubit required");
  for (size_t li = 0; li < layers.size(); ++li) {
    std::set<int> used;
    for (const auto& g : layers[li]) {
      const size_t want = (g.kind == GateKind::MS || g.kind == GateKind::ISwap || g.kind == GateKind::CNOT ||
                           g.kind == GateKind::CZ)
                              ? 2
                              : 1;
      if (g.qubits.size() != want) throw std::invalid_argument("circuit: wrong operand count");
      if (!std::isfinite(g.theta)) throw std::invalid_argument("circuit: non-finite angle");
      for (int q : g.qubits) {
        if (q < 0 || q >= n_qubits) throw std::invalid_argument("circuit: operand out of range");
        if (!used.insert(q).second)
          throw std::invalid_argument("circuit: qubit " + std::to_string(q) + " used twice in layer " +
                                      std::to_string(li));
      }
    }
  }
  int prev = 0;
  for (int e : step_ends) {
    if (e < prev || e > depth()) throw std::invalid_argument("circuit: bad step boundaries");
    prev = e;
  }
}

std::vector<Layer> decompose_xx(double theta, XXScheme scheme, int s, int b) {
  const double h = 0.5 * kPi;
  switch (scheme) {
    case XXScheme::NativeMS: return {{ms(s, b, theta)}};
    case XXScheme::CnotB: return {{cnot(b, s)}, {rx(b, theta)}, {cnot(b, s)}};
    case XXScheme::CnotS: return {{cnot(s, b)}, {rx(s, theta)}, {cnot(s, b)}};
    case XXScheme::ControlZ: return {{ry(s, -h)}, {cz(s, b)}, {rx(b, theta)}, {cz(s, b)}, {ry(s, h)}};
    case XXScheme::ISwapPair: return {{iswap(s, b, theta)}, {rx(s, kPi)}, {iswap(s, b, theta)}, {rx(s, kPi)}};
  }
  return {};
}

std::vector<Layer> decompose_yx(double theta, XXScheme scheme, int s, int b) {
  std::vector<Layer> out{{rz(s, -0.5 * kPi)}};
  for (auto& l : decompose_xx(theta, scheme, s, b)) out.push_back(std::move(l));
  out.push_back({rz(s, 0.5 * kPi)});
  return out;
}

std::vector<Layer> decompose_hop(double theta, int s, int b) {
  const double h = 0.5 * kPi;
  return {{ms(s, b, theta)}, {rz(s, h), rz(b, h)}, {ms(s, b, theta)}, {rz(s, -h), rz(b, -h)}};
}

XXScheme scheme_for(Decomposition d) {
  switch (d) {
    case Decomposition::NativeMS: return XXScheme::NativeMS;
    case Decomposition::NativeISwap: return XXScheme::ISwapPair;
    case Decomposition::CnotB: return XXScheme::CnotB;
    case Decomposition::CnotS: return XXScheme::CnotS;
    case Decomposition::ControlZ: return XXScheme::ControlZ;
  }
  return XXScheme::NativeMS;
}

namespace {

std::vector<Layer> coupling_layers(const AuxSpin& a, Decomposition d, double tau, int s, int b) {
  if (a.couplings.front().imag() != 0.0) throw std::invalid_argument("circuits need real couplings");
  const double g = a.coupling();
  switch (a.term) {
    case AuxTerm::Axis:
      if (a.axis == Axis::X) return decompose_xx(g * tau, scheme_for(d), s, b);
      if (a.axis == Axis::Y) return decompose_yx(g * tau, scheme_for(d), s, b);
      throw std::invalid_argument("sigma_z system coupling has no circuit decomposition");
    case AuxTerm::Hop:
      if (d == Decomposition::NativeISwap) return {{iswap(s, b, 2.0 * g * tau)}};
      if (d == Decomposition::NativeMS) return decompose_hop(g * tau, s, b);
      break;
    case AuxTerm::Counter:
      if (d == Decomposition::NativeISwap) return {{rx(s, kPi)}, {iswap(s, b, 2.0 * g * tau)}, {rx(s, kPi)}};
      break;
  }
  throw std::invalid_argument(std::string("decomposition ") + to_string(d) + " does not support this coupling");
}

void check_form(const SpinBathModel& model, Decomposition d) {
  if (model.kind != ModelKind::TwoBath) return;
  const bool hc = model.form == TwoBathForm::HopCounter;
  if (hc != (d == Decomposition::NativeISwap))
    throw std::invalid_argument("two-bath model: iswap needs the hop/counter form, other decompositions the xy form");
}

std::vector<Role> roles_for(int n_system, int n_bath) {
  std::vector<Role> r(static_cast<size_t>(n_system), Role::System);
  r.resize(static_cast<size_t>(n_system + n_bath), Role::Bath);
  return r;
}

}  // namespace

Circuit trotter_step(const SpinBathModel& model, Decomposition d, double tau) {
  model.validate();
  if (model.n_s() != 1) throw std::invalid_argument("trotter_step supports one system spin");
  if (!(tau > 0.0)) throw std::invalid_argument("tau must be > 0");
  check_form(model, d);
  Circuit c;
  c.n_qubits = model.n_qubits();
  c.roles = roles_for(1, model.n_bath());
  Layer free{rz(0, -model.system.splittings[0] * tau)};
  for (int k = 0; k < model.n_bath(); ++k) free.push_back(rz(model.qubit_of_aux(k), -model.aux[static_cast<size_t>(k)].omega * tau));
  c.add(std::move(free));
  for (int k = 0; k < model.n_bath(); ++k)
    c.add(coupling_layers(model.aux[static_cast<size_t>(k)], d, tau, 0, model.qubit_of_aux(k)));
  c.step_ends = {c.depth()};
  c.validate();
  return c;
}

SpinBathModel conjugated_model(const SpinBathModel& model) {
  SpinBathModel m = model;
  for (auto& d : m.system.splittings) d = -d;
  for (auto& a : m.aux) {
    if (a.term == AuxTerm::Hop) {
      a.term = AuxTerm::Counter;
    } else if (a.term == AuxTerm::Counter) {
      a.term = AuxTerm::Hop;
    } else if (a.axis != Axis::X) {
      for (auto& g : a.couplings) g = -g;
    }
  }
  return m;
}

Circuit symmetrize(const Circuit& step, const SpinBathModel& model, Decomposition d, double tau) {
  if (model.n_s() != 1) throw std::invalid_argument("symmetrize supports one system spin");
  // Hop <-> counter swaps change the layer pattern, so U-bar is rebuilt from the conjugated model.
  const Circuit bar = trotter_step(conjugated_model(model), d, tau);
  Circuit c;
  c.n_qubits = step.n_qubits;
  c.roles = step.roles;
  c.add(step.layers);
  c.step_ends.push_back(c.depth());
  c.add(Layer{xgate(0)});
  c.add(bar.layers);
  c.add(Layer{xgate(0)});
  c.step_ends.push_back(c.depth());
  c.validate();
  return c;
}

SwapNetworkStep swap_network_step(const SpinBathModel& model, Decomposition d, double tau, int n_swap) {
  model.validate();
  if (model.n_s() != 1 || model.kind != ModelKind::XXOnly)
    throw std::invalid_argument("swap network supports the single-bath model with one system spin");
  const int nq = model.n_bath();
  if (nq % 2 != 0 || nq < 2) throw std::invalid_argument("swap network needs an even bath-qubit count");
  if (n_swap != 3) throw std::invalid_argument("only the three-CNOT SWAP is implemented");
  SwapNetworkStep out;
  Circuit& c = out.circuit;
  c.n_qubits = nq + 2;
  c.roles = roles_for(2, nq);
  out.edges.emplace_back(0, 1);
  for (int k = 0; k < nq; ++k) out.edges.emplace_back((k / 2) % 2, 2 + k);

  Layer free{rz(0, -model.system.splittings[0] * tau)};
  for (int k = 0; k < nq; ++k) free.push_back(rz(2 + k, -model.aux[static_cast<size_t>(k)].omega * tau));
  c.add(std::move(free));
  int holder = 0;
  for (int p = 0; p < nq / 2; ++p) {
    for (int k = 2 * p; k < 2 * p + 2; ++k) c.add(coupling_layers(model.aux[static_cast<size_t>(k)], d, tau, holder, 2 + k));
    if (p + 1 < nq / 2) {
      const int other = 1 - holder;
      c.add(std::vector<Layer>{{cnot(holder, other)}, {cnot(other, holder)}, {cnot(holder, other)}});
      holder = other;
    }
  }
  out.final_system_qubit = holder;
  c.step_ends = {c.depth()};
  c.validate();
  return out;
}

bool respects_edges(const Circuit& c, const std::vector<std::pair<int, int>>& edges) {
  std::set<std::pair<int, int>> e;
  for (auto [a, b] : edges) {
    e.insert({a, b});
    e.insert({b, a});
  }
  for (const auto& l : c.layers)
    for (const auto& g : l)
      if (g.two_qubit() && !e.count({g.qubits[0], g.qubits[1]})) return false;
  return true;
}

Mat unitary_of(const Circuit& c) {
  c.validate();
  if (c.n_qubits > 10) throw std::invalid_argument("unitary_of: too many qubits");
  const long d = 1L << c.n_qubits;
  Mat u = Mat::Identity(d, d);
  for (const auto& l : c.layers) {
    for (const auto& g : l) {
      const SpMat op = g.two_qubit() ? embed2(g.matrix(), g.qubits[0], g.qubits[1], c.n_qubits)
                                     : embed_qubit(g.matrix(), g.qubits[0], c.n_qubits);
      u = (op * u).eval();
    }
  }
  return u;
}

bool no_large_bath_rotations(const Circuit& c) {
  for (const auto& l : c.layers) {
    for (const auto& g : l) {
      if (g.kind == GateKind::Rz || g.kind == GateKind::CNOT || g.kind == GateKind::CZ) continue;
      const bool large = g.kind == GateKind::X || std::abs(g.theta) >= 0.25 * kPi;
      if (!large) continue;
      for (int q : g.qubits)
        if (c.roles.at(static_cast<size_t>(q)) == Role::Bath) return false;
    }
  }
  return true;
}

const char* gate_name(GateKind k) {
  switch (k) {
    case GateKind::Rx: return "RX";
    case GateKind::Ry: return "RY";
    case GateKind::Rz: return "RZ";
    case GateKind::X: return "X";
    case GateKind::MS: return "MS";
    case GateKind::ISwap: return "ISWAP";
    case GateKind::CNOT: return "CNOT";
    case GateKind::CZ: return "CZ";
  }
  return "?";
}

std::string to_text(const Circuit& c) {
  std::ostringstream os;
  os << std::setprecision(17);
  os << "#qubits " << c.n_qubits << "\n#roles";
  for (Role r : c.roles) os << ' ' << (r == Role::System ? 's' : 'b');
  os << "\n#steps";
  for (int e : c.step_ends) os << ' ' << e;
  os << '\n';
  for (const auto& l : c.layers) {
    for (size_t i = 0; i < l.size(); ++i) {
      const auto& g = l[i];
      if (i) os << "; ";
      os << gate_name(g.kind);
      if (g.has_angle()) os << '(' << g.theta << ')';
      for (int q : g.qubits) os << ' ' << q;
    }
    os << '\n';
  }
  return os.str();
}

Circuit circuit_from_text(const std::string& text, int n_qubits, const std::vector<Role>& roles) {
  static const std::map<std::string, GateKind> kinds = {
      {"RX", GateKind::Rx}, {"RY", GateKind::Ry},       {"RZ", GateKind::Rz},     {"X", GateKind::X},
      {"MS", GateKind::MS}, {"ISWAP", GateKind::ISwap}, {"CNOT", GateKind::CNOT}, {"CZ", GateKind::CZ}};
  Circuit c;
  c.n_qubits = n_qubits;
  c.roles = roles;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::istringstream hs(line.substr(1));
      std::string key;
      hs >> key;
      if (key == "qubits") {
        hs >> c.n_qubits;
      } else if (key == "roles") {
        c.roles.clear();
        char r;
        while (hs >> r) c.roles.push_back(r == 's' ? Role::System : Role::Bath);
      } else if (key == "steps") {
        int e;
        while (hs >> e) c.step_ends.push_back(e);
      }
      continue;
    }
    Layer layer;
    std::istringstream ls(line);
    std::string item;
    while (std::getline(ls, item, ';')) {
      std::istringstream gs(item);
      std::string head;
      if (!(gs >> head)) continue;
      Gate g;
      const auto paren = head.find('(');
      const std::string name = head.substr(0, paren);
      auto it = kinds.find(name);
      if (it == kinds.end()) throw std::invalid_argument("unknown gate " + name);
      g.kind = it->second;
      if (paren != std::string::npos) g.theta = std::stod(head.substr(paren + 1));
      int q;
      while (gs >> q) g.qubits.push_back(q);
      layer.push_back(g);
    }
    c.layers.push_back(std::move(layer));
  }
  if (c.roles.empty()) c.roles.assign(static_cast<size_t>(c.n_qubits), Role::Bath);
  if (c.step_ends.empty()) c.step_ends = {c.depth()};
  c.validate();
  return c;
}

}  // namespace noisebath
