#include "noisebath/spin_model.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace noisebath {

void SystemSpec::validate() const {
  if (splittings.empty()) throw std::invalid_argument("system needs at least one spin");
  for (double d : splittings)
    if (!std::isfinite(d)) throw std::invalid_argument("system splittings must be finite");
  for (const auto& [i, j, h] : hopping) {
    if (i < 0 || j >= n_s() || i >= j) throw std::invalid_argument("hopping needs 0 <= i < j < n_s");
    if (!std::isfinite(h.real()) || !std::isfinite(h.imag())) throw std::invalid_argument("hopping must be finite");
  }
  if (group_axes.empty()) throw std::invalid_argument("system needs at least one coupling axis");
}

std::vector<QubitRates> SpinBathModel::qubit_rates() const {
  std::vector<QubitRates> r(static_cast<size_t>(n_qubits()));
  for (int i = 0; i < n_s(); ++i) r[static_cast<size_t>(i)] = {system_noise.gamma, system_noise.Gamma};
  for (int k = 0; k < n_bath(); ++k) {
    const auto& a = aux[static_cast<size_t>(k)];
    r[static_cast<size_t>(qubit_of_aux(k))] = {a.gamma, a.Gamma};
  }
  return r;
}

namespace {

Mat axis_op(Axis a) {
  switch (a) {
    case Axis::X: return pauli_x();
    case Axis::Y: return pauli_y();
    case Axis::Z: return pauli_z();
  }
  return pauli_x();
}

Mat kron2(const Mat& on_q0, const Mat& on_q1) {
  // basis index b0 + 2 b1
  Mat out(4, 4);
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) out(r, c) = on_q0(r & 1, c & 1) * on_q1(r >> 1, c >> 1);
  return out;
}

}  // namespace

SpMat SpinBathModel::hamiltonian() const {
  validate();
  const int n = n_qubits();
  const long d = 1L << n;
  SpMat h(d, d);
  for (int i = 0; i < n_s(); ++i) h += embed_qubit(-0.5 * system.splittings[static_cast<size_t>(i)] * pauli_z(), i, n);
  for (const auto& [i, j, dij] : system.hopping) {
    const Mat t = 0.5 * (dij * kron2(sigma_plus(), sigma_minus()) + std::conj(dij) * kron2(sigma_minus(), sigma_plus()));
    h += embed2(t, i, j, n);
  }
  for (int k = 0; k < n_bath(); ++k) {
    const auto& a = aux[static_cast<size_t>(k)];
    const int q = qubit_of_aux(k);
    h += embed_qubit(a.omega * (sigma_plus() * sigma_minus()), q, n);
    for (int s = 0; s < n_s(); ++s) {
      const std::complex<double> g = a.couplings.at(static_cast<size_t>(s));
      if (g == std::complex<double>(0.0)) continue;
      Mat t;
      switch (a.term) {
        case AuxTerm::Axis: {
          // (1/2) sigma_a (g* sigma_+^b + g sigma_-^b) = (1/2) sigma_a (Re g X - Im g Y)
          const Mat bath_op = g.real() * pauli_x() - g.imag() * pauli_y();
          t = 0.5 * kron2(axis_op(a.axis), bath_op);
          break;
        }
        case AuxTerm::Hop:
          t = g * kron2(sigma_plus(), sigma_minus()) + std::conj(g) * kron2(sigma_minus(), sigma_plus());
          break;
        case AuxTerm::Counter:
          t = g * kron2(sigma_plus(), sigma_plus()) + std::conj(g) * kron2(sigma_minus(), sigma_minus());
          break;
      }
      h += embed2(t, s, q, n);
    }
  }
  h.prune(cplx(0.0));
  return h;
}

double SpinBathModel::spectral(double omega, int group) const {
  double s = 4.0 * background_rate;
  for (const auto& a : aux) {
    if (a.group != group || a.term != AuxTerm::Axis) continue;
    const double k = a.width();
    const double dd = omega - a.omega;
    s += std::norm(a.couplings.front()) * k / (0.25 * k * k + dd * dd);
  }
  return s;
}

void SpinBathModel::validate() const {
  system.validate();
  if (n_qubits() > 30) throw std::invalid_argument("model too large");
  for (const auto& a : aux) {
    if (static_cast<int>(a.couplings.size()) != n_s()) throw std::invalid_argument("aux spin coupling count");
    if (a.gamma < 0.0 || a.Gamma < 0.0) throw std::invalid_argument("rates must be >= 0");
    if (a.group < 0 || a.group >= static_cast<int>(system.group_axes.size()))
      throw std::invalid_argument("aux spin group out of range");
  }
  if (system_noise.gamma < 0.0 || system_noise.Gamma < 0.0 || system_noise.flip_rate < 0.0)
    throw std::invalid_argument("system rates must be >= 0");
}

double effective_broadening(double gamma, double Gamma) {
  if (gamma < 0.0 || Gamma < 0.0) throw std::invalid_argument("rates must be >= 0");
  return gamma + 2.0 * Gamma;
}

double gate_error(double t_gate, double gamma_bar, double Gamma_bar) {
  if (t_gate < 0.0 || gamma_bar < 0.0 || Gamma_bar < 0.0) throw std::invalid_argument("inputs must be >= 0");
  return t_gate * (gamma_bar + 2.0 * Gamma_bar);
}

namespace {

void split_width(double kappa, double ratio, double& gamma, double& Gamma) {
  gamma = kappa / (1.0 + 2.0 * ratio);
  Gamma = ratio * gamma;
}

}  // namespace

SpinBathModel bosons_to_spins(const LorentzianBath& bath, const std::vector<int>& multiplicities,
                              const SystemSpec& system, double dephasing_ratio) {
  system.validate();
  if (multiplicities.size() != bath.modes.size()) throw std::invalid_argument("one multiplicity per mode required");
  if (bath.n_s != system.n_s()) throw std::invalid_argument("bath and system spin counts differ");
  if (dephasing_ratio < 0.0) throw std::invalid_argument("dephasing ratio must be >= 0");
  SpinBathModel m;
  m.system = system;
  m.kind = ModelKind::XXOnly;
  m.background_rate = bath.system_rate(0);
  for (size_t i = 0; i < bath.modes.size(); ++i) {
    const int n = multiplicities[i];
    if (n < 1) throw std::invalid_argument("multiplicities must be >= 1");
    const auto& mode = bath.modes[i];
    for (int j = 0; j < n; ++j) {
      AuxSpin a;
      a.omega = mode.center;
      a.couplings.clear();
      for (const auto& v : mode.couplings) a.couplings.push_back(v / std::sqrt(static_cast<double>(n)));
      a.mode = static_cast<int>(i);
      a.member = j;
      a.multiplicity = n;
      a.group = 0;
      a.axis = system.group_axes.front();
      split_width(mode.width, dephasing_ratio, a.gamma, a.Gamma);
      m.aux.push_back(std::move(a));
    }
  }
  m.validate();
  return m;
}

SpinBathModel build_two_bath_model(const LorentzianBath& bath_x, const LorentzianBath& bath_y,
                                   const SystemSpec& system, TwoBathForm form, double dephasing_ratio) {
  if (system.n_s() != 1) throw std::invalid_argument("two-bath model needs exactly one system spin");
  if (bath_x.n_s != 1 || bath_y.n_s != 1) throw std::invalid_argument("two-bath model needs single-spin baths");
  if (!bath_y.modes.empty() && bath_y.modes.size() != bath_x.modes.size())
    throw std::invalid_argument("the two baths must have the same mode count");
  SpinBathModel m;
  m.system = system;
  m.system.group_axes = {Axis::X, Axis::Y};
  m.kind = ModelKind::TwoBath;
  m.form = form;
  m.background_rate = bath_x.system_rate(0);
  const bool empty_y = bath_y.modes.empty();
  for (size_t k = 0; k < bath_x.modes.size(); ++k) {
    const auto& mx = bath_x.modes[k];
    if (!empty_y) {
      const auto& my = bath_y.modes[k];
      if (std::abs(mx.center - my.center) > 1e-12 * (1.0 + std::abs(mx.center)) ||
          std::abs(mx.width - my.width) > 1e-12 * mx.width ||
          std::abs(std::abs(mx.couplings[0]) - std::abs(my.couplings[0])) > 1e-12 * (1.0 + std::abs(mx.couplings[0])))
        throw std::invalid_argument("the two baths must be identical");
    }
    const double v = std::abs(mx.couplings[0]);
    AuxSpin a;
    a.omega = mx.center;
    a.mode = static_cast<int>(k);
    split_width(mx.width, dephasing_ratio, a.gamma, a.Gamma);
    if (empty_y) {
      // Degenerates to the single-bath model with coefficient v/2.
      a.couplings = {v};
      a.group = 0;
      a.axis = Axis::X;
      m.aux.push_back(a);
      continue;
    }
    if (form == TwoBathForm::XY) {
      a.couplings = {std::sqrt(2.0) * v};
      a.group = 0;
      a.axis = Axis::X;
      m.aux.push_back(a);
      a.group = 1;
      a.axis = Axis::Y;
      m.aux.push_back(a);
    } else {
      a.couplings = {v};
      a.group = 0;
      a.term = AuxTerm::Hop;
      m.aux.push_back(a);
      a.group = 1;
      a.term = AuxTerm::Counter;
      m.aux.push_back(a);
    }
  }
  if (empty_y) {
    m.kind = ModelKind::XXOnly;
    m.system.group_axes = {Axis::X};
  }
  m.validate();
  return m;
}

namespace {

// Layers per coupling term for each decomposition.
int layers_axis_x(Decomposition d) {
  switch (d) {
    case Decomposition::NativeMS: return 1;
    case Decomposition::NativeISwap: return 4;
    case Decomposition::CnotB:
    case Decomposition::CnotS: return 3;
    case Decomposition::ControlZ: return 5;
  }
  return 1;
}

}  // namespace

int circuit_depth(Decomposition d, int n_q, ModelKind kind, Connectivity c, int n_swap) {
  if (n_q < 1) throw std::invalid_argument("n_q must be >= 1");
  int depth = 0;
  if (kind == ModelKind::XXOnly) {
    depth = 1 + layers_axis_x(d) * n_q;
  } else {
    if (n_q % 2 != 0) throw std::invalid_argument("two-bath model needs an even bath-qubit count");
    switch (d) {
      case Decomposition::NativeMS:
      case Decomposition::NativeISwap: depth = 1 + 2 * n_q; break;
      case Decomposition::CnotB:
      case Decomposition::CnotS: depth = 1 + 4 * n_q; break;
      case Decomposition::ControlZ: depth = 1 + 6 * n_q; break;
    }
  }
  if (c == Connectivity::SwapNetwork) {
    if (n_q % 2 != 0) throw std::invalid_argument("swap network needs an even bath-qubit count");
    if (kind != ModelKind::XXOnly) throw std::invalid_argument("swap network supports the single-bath model only");
    depth += (n_q / 2 - 1) * n_swap;
  }
  return depth;
}

double match_trotter_step(int depth, double eps, double kappa) {
  if (depth <= 0 || !(eps > 0.0) || !(kappa > 0.0)) throw std::invalid_argument("D, eps, kappa must be > 0");
  return depth * eps / kappa;
}

Fraction::Fraction(std::int64_t n, std::int64_t d) : num(n), den(d) {
  if (d == 0) throw std::invalid_argument("zero denominator");
  if (den < 0) {
    num = -num;
    den = -den;
  }
  const std::int64_t g = std::gcd(num < 0 ? -num : num, den);
  if (g > 1) {
    num /= g;
    den /= g;
  }
}

Fraction operator*(const Fraction& a, const Fraction& b) { return Fraction(a.num * b.num, a.den * b.den); }
Fraction operator/(const Fraction& a, const Fraction& b) { return Fraction(a.num * b.den, a.den * b.num); }

Fraction match_trotter_step_exact(int depth, Fraction eps, Fraction kappa) {
  if (depth <= 0 || eps.num <= 0 || kappa.num <= 0) throw std::invalid_argument("D, eps, kappa must be > 0");
  return Fraction(depth, 1) * eps / kappa;
}

TrotterPlan make_plan(const SpinBathModel& model, Decomposition d, double eps, double kappa_ref, int steps,
                      Connectivity c, bool symmetrize) {
  model.validate();
  if (steps < 1) throw std::invalid_argument("steps must be >= 1");
  if (symmetrize && model.n_s() != 1) throw std::invalid_argument("symmetrization needs one system spin");
  TrotterPlan p;
  p.decomposition = d;
  p.connectivity = c;
  p.symmetrized = symmetrize;
  p.steps = steps;
  p.epsilon = eps;
  p.depth = circuit_depth(d, model.n_bath(), model.kind, c);
  // A pair of steps carries two extra X layers on the system qubit.
  p.effective_depth = p.depth + (symmetrize ? 1 : 0);
  p.tau = match_trotter_step(p.effective_depth, eps, kappa_ref);
  const int nq = model.n_qubits() + (c == Connectivity::SwapNetwork ? 1 : 0);
  p.p_gamma.assign(static_cast<size_t>(nq), 0.0);
  p.p_Gamma.assign(static_cast<size_t>(nq), 0.0);
  const auto rates = model.qubit_rates();
  const double scale = p.tau / p.effective_depth;
  auto put = [&](int phys, const QubitRates& r) {
    p.p_gamma[static_cast<size_t>(phys)] = r.gamma * scale;
    p.p_Gamma[static_cast<size_t>(phys)] = r.Gamma * scale;
  };
  if (c == Connectivity::SwapNetwork) {
    // Two system registers (qubits 0 and 1) share the system noise.
    put(0, rates[0]);
    put(1, rates[0]);
    for (int k = 0; k < model.n_bath(); ++k) put(2 + k, rates[static_cast<size_t>(model.qubit_of_aux(k))]);
  } else {
    for (int q = 0; q < model.n_qubits(); ++q) put(q, rates[static_cast<size_t>(q)]);
  }
  for (size_t q = 0; q < p.p_gamma.size(); ++q)
    if (p.p_gamma[q] >= 1.0 || p.p_Gamma[q] >= 1.0) throw std::invalid_argument("per-layer noise strength >= 1");
  return p;
}

double plan_width_mismatch(const SpinBathModel& model, const TrotterPlan& plan) {
  double worst = 0.0;
  for (int k = 0; k < model.n_bath(); ++k) {
    const auto& a = model.aux[static_cast<size_t>(k)];
    const size_t q = static_cast<size_t>(plan.connectivity == Connectivity::SwapNetwork ? 2 + k : model.qubit_of_aux(k));
    const double rebuilt = plan.effective_depth * (plan.p_gamma[q] + 2.0 * plan.p_Gamma[q]) / plan.tau;
    worst = std::max(worst, std::abs(rebuilt - a.width()) / a.width());
  }
  return worst;
}

void check_system_noise(const SpinBathModel& model, double tol) {
  const auto& sn = model.system_noise;
  const double bg = model.background_rate;
  auto rel = [](double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-300}); };
  if (!sn.any()) {
    if (bg > 0.0) throw std::invalid_argument("fitted background requires system noise");
    return;
  }
  if (sn.flip_rate > 0.0) {
    if (sn.gamma > 0.0 || sn.Gamma > 0.0) throw std::invalid_argument("mixed system noise cannot map to a background");
    if (model.kind != ModelKind::XXOnly) throw std::invalid_argument("sigma_x system noise maps only in the single-bath model");
    if (rel(sn.flip_rate, bg) > tol) throw std::invalid_argument("system flip rate does not match kappa_system");
    return;
  }
  if (model.kind != ModelKind::TwoBath || !sn.symmetrized || sn.Gamma > 0.0)
    throw std::invalid_argument("system damping maps to the background only in the symmetrized two-bath model");
  // Symmetrized damping flips the system down at gamma/2; the background 4 kappa_system does the same.
  if (rel(sn.gamma, 8.0 * bg) > tol) throw std::invalid_argument("system damping rate does not match 8 kappa_system");
}

const char* to_string(Decomposition d) {
  switch (d) {
    case Decomposition::NativeMS: return "ms";
    case Decomposition::NativeISwap: return "iswap";
    case Decomposition::CnotB: return "cnot-b";
    case Decomposition::CnotS: return "cnot-s";
    case Decomposition::ControlZ: return "cz";
  }
  return "ms";
}

Decomposition decomposition_from_string(const std::string& s) {
  if (s == "ms") return Decomposition::NativeMS;
  if (s == "iswap") return Decomposition::NativeISwap;
  if (s == "cnot-b") return Decomposition::CnotB;
  if (s == "cnot-s") return Decomposition::CnotS;
  if (s == "cz") return Decomposition::ControlZ;
  throw std::invalid_argument("unknown decomposition: " + s);
}

namespace {

const char* axis_name(Axis a) { return a == Axis::X ? "x" : a == Axis::Y ? "y" : "z"; }
Axis axis_from(const std::string& s) {
  if (s == "x") return Axis::X;
  if (s == "y") return Axis::Y;
  if (s == "z") return Axis::Z;
  throw std::invalid_argument("unknown axis " + s);
}
const char* term_name(AuxTerm t) { return t == AuxTerm::Axis ? "axis" : t == AuxTerm::Hop ? "hop" : "counter"; }
AuxTerm term_from(const std::string& s) {
  if (s == "axis") return AuxTerm::Axis;
  if (s == "hop") return AuxTerm::Hop;
  if (s == "counter") return AuxTerm::Counter;
  throw std::invalid_argument("unknown term " + s);
}

}  // namespace

nlohmann::json to_json(const SpinBathModel& m) {
  nlohmann::json j;
  j["kind"] = m.kind == ModelKind::XXOnly ? "xx" : "two-bath";
  j["form"] = m.form == TwoBathForm::XY ? "xy" : "hop-counter";
  j["splittings"] = m.system.splittings;
  j["hopping"] = nlohmann::json::array();
  for (const auto& [a, b, h] : m.system.hopping) j["hopping"].push_back({a, b, h.real(), h.imag()});
  for (Axis a : m.system.group_axes) j["group_axes"].push_back(axis_name(a));
  j["system_noise"] = {{"gamma", m.system_noise.gamma},
                       {"Gamma", m.system_noise.Gamma},
                       {"symmetrized", m.system_noise.symmetrized},
                       {"flip_rate", m.system_noise.flip_rate}};
  j["background_rate"] = m.background_rate;
  j["aux"] = nlohmann::json::array();
  for (int k = 0; k < m.n_bath(); ++k) {
    const auto& a = m.aux[static_cast<size_t>(k)];
    std::vector<double> re, im;
    for (const auto& g : a.couplings) {
      re.push_back(g.real());
      im.push_back(g.imag());
    }
    j["aux"].push_back({{"qubit", m.qubit_of_aux(k)},
                        {"omega", a.omega},
                        {"coupling_re", re},
                        {"coupling_im", im},
                        {"mode", a.mode},
                        {"member", a.member},
                        {"multiplicity", a.multiplicity},
                        {"group", a.group},
                        {"term", term_name(a.term)},
                        {"axis", axis_name(a.axis)},
                        {"gamma", a.gamma},
                        {"Gamma", a.Gamma}});
  }
  return j;
}

SpinBathModel model_from_json(const nlohmann::json& j) {
  SpinBathModel m;
  m.kind = j.value("kind", std::string("xx")) == "xx" ? ModelKind::XXOnly : ModelKind::TwoBath;
  m.form = j.value("form", std::string("xy")) == "xy" ? TwoBathForm::XY : TwoBathForm::HopCounter;
  m.system.splittings = j.at("splittings").get<std::vector<double>>();
  if (j.contains("hopping"))
    for (const auto& h : j["hopping"])
      m.system.hopping.emplace_back(h[0].get<int>(), h[1].get<int>(),
                                    std::complex<double>(h[2].get<double>(), h[3].get<double>()));
  m.system.group_axes.clear();
  for (const auto& a : j.at("group_axes")) m.system.group_axes.push_back(axis_from(a.get<std::string>()));
  if (j.contains("system_noise")) {
    const auto& s = j["system_noise"];
    m.system_noise.gamma = s.value("gamma", 0.0);
    m.system_noise.Gamma = s.value("Gamma", 0.0);
    m.system_noise.symmetrized = s.value("symmetrized", false);
    m.system_noise.flip_rate = s.value("flip_rate", 0.0);
  }
  m.background_rate = j.value("background_rate", 0.0);
  for (const auto& ja : j.at("aux")) {
    AuxSpin a;
    a.omega = ja.at("omega").get<double>();
    const auto re = ja.at("coupling_re").get<std::vector<double>>();
    const auto im = ja.value("coupling_im", std::vector<double>(re.size(), 0.0));
    a.couplings.clear();
    for (size_t k = 0; k < re.size(); ++k) a.couplings.emplace_back(re[k], im.at(k));
    a.mode = ja.value("mode", 0);
    a.member = ja.value("member", 0);
    a.multiplicity = ja.value("multiplicity", 1);
    a.group = ja.value("group", 0);
    a.term = term_from(ja.value("term", std::string("axis")));
    a.axis = axis_from(ja.value("axis", std::string("x")));
    a.gamma = ja.value("gamma", 0.0);
    a.Gamma = ja.value("Gamma", 0.0);
    m.aux.push_back(std::move(a));
  }
  m.validate();
  return m;
}

nlohmann::json to_json(const TrotterPlan& p) {
  return {{"tau", p.tau},
          {"steps", p.steps},
          {"decomposition", to_string(p.decomposition)},
          {"connectivity", p.connectivity == Connectivity::AllToAll ? "all-to-all" : "swap-network"},
          {"symmetrized", p.symmetrized},
          {"depth", p.depth},
          {"effective_depth", p.effective_depth},
          {"epsilon", p.epsilon},
          {"p_gamma", p.p_gamma},
          {"p_Gamma", p.p_Gamma}};
}

}  // namespace noisebath
