#include "noisebath/effective_noise.hpp"

#include <cmath>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include <unsupported/Eigen/MatrixFunctions>

namespace noisebath {

double EffectiveLindblad::total_weight() const {
  double w = 0.0;
  for (const auto& t : terms) w += t.weight;
  return w;
}

Mat EffectiveLindblad::superop() const {
  const long d = 1L << n_qubits;
  Mat s = Mat::Zero(d * d, d * d);
  for (const auto& t : terms) s += t.lindblad_rate() * dissipator_superop(t.op);
  return s;
}

namespace {

Mat layer_unitary(const Layer& l, int n) {
  const long d = 1L << n;
  Mat u = Mat::Identity(d, d);
  for (const auto& g : l) {
    const SpMat op = g.two_qubit() ? embed2(g.matrix(), g.qubits[0], g.qubits[1], n) : embed_qubit(g.matrix(), g.qubits[0], n);
    u = (op * u).eval();
  }
  return u;
}

}  // namespace

Mat conjugate_through(const Circuit& c, int from_layer, const Mat& op) {
  const long d = 1L << c.n_qubits;
  if (op.rows() != d || op.cols() != d) throw std::invalid_argument("conjugate_through: dimension mismatch");
  Mat out = op;
  for (int l = from_layer; l < c.depth(); ++l) {
    const Mat u = layer_unitary(c.layers[static_cast<size_t>(l)], c.n_qubits);
    out = u * out * u.adjoint();
  }
  return out;
}

Mat conjugate_through(const Circuit& suffix, const Mat& op) { return conjugate_through(suffix, 0, op); }

TableEntry table_transform(TwoQubitGate g, IncomingNoise n, Operand where) {
  // qubit 0 = control, qubit 1 = target
  auto on = [](const Mat& c, const Mat& t) {
    Mat out(4, 4);
    for (int r = 0; r < 4; ++r)
      for (int k = 0; k < 4; ++k) out(r, k) = c(r & 1, k & 1) * t(r >> 1, k >> 1);
    return out;
  };
  const Mat I = pauli_i(), X = pauli_x(), Z = pauli_z(), M = sigma_minus(), P = sigma_plus();
  const Mat P0 = 0.5 * (I + Z), P1 = 0.5 * (I - Z);
  const Mat& incoming = n == IncomingNoise::Minus ? M : n == IncomingNoise::Plus ? P : Z;
  const Mat& flipped = n == IncomingNoise::Minus ? P : M;
  const std::string name = n == IncomingNoise::Minus ? "s-" : n == IncomingNoise::Plus ? "s+" : "sz";
  const std::string fname = n == IncomingNoise::Minus ? "s+" : "s-";
  if (g == TwoQubitGate::CNOT) {
    if (where == Operand::Control) {
      if (n == IncomingNoise::Z) return {on(Z, I), "sz^c"};
      return {on(incoming, X), name + "^c sx^t"};
    }
    if (n == IncomingNoise::Z) return {on(Z, Z), "sz^c sz^t"};
    return {on(P0, incoming) + on(P1, flipped), "P0^c " + name + "^t + P1^c " + fname + "^t"};
  }
  if (where == Operand::Control) {
    if (n == IncomingNoise::Z) return {on(Z, I), "sz^c"};
    return {on(incoming, Z), name + "^c sz^t"};
  }
  if (n == IncomingNoise::Z) return {on(I, Z), "sz^t"};
  return {on(Z, incoming), name + "^t sz^c"};
}

EffectiveLindblad effective_lindblad(const Circuit& step, const NoiseChannelSpec& noise, double tau, double merge_tol) {
  step.validate();
  noise.validate(step.n_qubits);
  if (!(tau > 0.0)) throw std::invalid_argument("tau must be > 0");
  if (step.n_qubits > 8) throw std::invalid_argument("effective_lindblad limited to 8 qubits");
  const int n = step.n_qubits;
  EffectiveLindblad e;
  e.n_qubits = n;
  e.tau = tau;
  double strength = 0.0;
  for (int q = 0; q < n; ++q) strength += step.depth() * (noise.p_gamma[static_cast<size_t>(q)] + noise.p_Gamma[static_cast<size_t>(q)]);
  e.first_order_guard_ok = strength < 0.5;

  // Suffix unitaries from the back.
  std::vector<Mat> suffix(static_cast<size_t>(step.depth()) + 1);
  const long d = 1L << n;
  suffix[static_cast<size_t>(step.depth())] = Mat::Identity(d, d);
  for (int l = step.depth() - 1; l >= 0; --l)
    suffix[static_cast<size_t>(l)] = suffix[static_cast<size_t>(l) + 1] * layer_unitary(step.layers[static_cast<size_t>(l)], n);

  std::vector<NoiseOperatorTerm> raw;
  for (int l = 0; l < step.depth(); ++l) {
    // noise after layer l passes through layers l+1 ...
    const Mat& u = suffix[static_cast<size_t>(l) + 1];
    for (int q = 0; q < n; ++q) {
      const double pg = noise.p_gamma[static_cast<size_t>(q)], pz = noise.p_Gamma[static_cast<size_t>(q)];
      if (pg > 0.0) {
        const Mat op = Mat(embed_qubit(sigma_minus(), q, n));
        raw.push_back({u * op * u.adjoint(), pg / tau, NoiseKind::Damping, l, q, {{l, q}}});
      }
      if (pz > 0.0) {
        const Mat op = Mat(embed_qubit(pauli_z(), q, n));
        raw.push_back({u * op * u.adjoint(), pz / tau, NoiseKind::Dephasing, l, q, {{l, q}}});
      }
    }
  }
  for (auto& t : raw) {
    bool merged = false;
    for (auto& m : e.terms) {
      if (m.kind != t.kind) continue;
      if (phase_aligned_distance(t.op, m.op) < merge_tol) {
        m.weight += t.weight;
        m.merged_from.insert(m.merged_from.end(), t.merged_from.begin(), t.merged_from.end());
        merged = true;
        break;
      }
    }
    if (!merged) e.terms.push_back(std::move(t));
  }
  return e;
}

Mat circuit_superop(const Circuit& c, const NoiseChannelSpec* noise) {
  const long d = 1L << c.n_qubits;
  if (c.n_qubits > 6) throw std::invalid_argument("circuit_superop limited to 6 qubits");
  Mat s(d * d, d * d);
  for (long b = 0; b < d; ++b) {
    for (long a = 0; a < d; ++a) {
      Mat rho = Mat::Zero(d, d);
      rho(a, b) = 1.0;
      // apply_layers only relies on linearity, so non-Hermitian inputs are fine.
      apply_layers(rho, c, noise, 0, c.depth());
      s.col(b * d + a) = vec(rho);
    }
  }
  return s;
}

Mat unitary_superop(const Mat& u) { return left_right_superop(u, u.adjoint()); }

Mat hamiltonian_superop(const Mat& h) { return commutator_superop(h); }

namespace {

double max_abs(const Mat& m) { return m.cwiseAbs().maxCoeff(); }

}  // namespace

FirstOrderReport verify_first_order(const Circuit& step, const NoiseChannelSpec& noise, double tau, const Mat& hamiltonian) {
  if (step.n_qubits > 5) throw std::invalid_argument("verify_first_order limited to 5 qubits");
  const Mat U = circuit_superop(step, nullptr);
  const Mat LH = hamiltonian_superop(hamiltonian);
  FirstOrderReport rep;
  rep.generator_baseline = max_abs(U - Mat((tau * LH).exp()));
  for (double f : {1.0, 0.5, 0.25}) {
    const NoiseChannelSpec ns = noise.scaled(f);
    const Mat S = circuit_superop(step, &ns);
    const EffectiveLindblad e = effective_lindblad(step, ns, tau);
    const Mat L = e.superop();
    const Mat model = Mat((tau * L).exp()) * U;
    const Mat gen = Mat((tau * (LH + L)).exp());
    rep.eps_scale.push_back(f);
    rep.product_dev.push_back(max_abs(S - model));
    rep.generator_dev.push_back(max_abs(S - gen) - rep.generator_baseline);
  }
  for (size_t k = 0; k + 1 < rep.product_dev.size(); ++k) rep.ratios.push_back(rep.product_dev[k] / rep.product_dev[k + 1]);
  return rep;
}

DephasingFit extract_system_dephasing(const Circuit& step, const NoiseChannelSpec& noise, double tau, int sq) {
  const int n = step.n_qubits;
  if (n > 5) throw std::invalid_argument("extract_system_dephasing limited to 5 qubits");
  noise.validate(n);
  const Mat U = circuit_superop(step, nullptr);
  const Mat S = circuit_superop(step, &noise);
  const double D = step.depth();
  const long d = 1L << n;
  Mat Lphys = Mat::Zero(d * d, d * d);
  double scale = 0.0;
  for (int q = 0; q < n; ++q) {
    const double g = D * noise.p_gamma[static_cast<size_t>(q)] / tau;
    const double z = D * noise.p_Gamma[static_cast<size_t>(q)] / tau;
    if (g > 0.0) Lphys += g * dissipator_superop(Mat(embed_qubit(sigma_minus(), q, n)));
    if (z > 0.0) Lphys += 0.5 * z * dissipator_superop(Mat(embed_qubit(pauli_z(), q, n)));
    scale += g + z;
  }
  const Mat Dz = dissipator_superop(Mat(embed_qubit(pauli_z(), sq, n)));
  auto resid = [&](double G) { return (Mat((tau * (Lphys + 0.5 * G * Dz)).exp()) * U - S).norm(); };
  double lo = 0.0, hi = std::max(2.0 * scale, 1e-12);
  const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
  double x1 = hi - phi * (hi - lo), x2 = lo + phi * (hi - lo);
  double f1 = resid(x1), f2 = resid(x2);
  for (int it = 0; it < 80; ++it) {
    if (f1 < f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - phi * (hi - lo);
      f1 = resid(x1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + phi * (hi - lo);
      f2 = resid(x2);
    }
  }
  DephasingFit fit;
  fit.Gamma_eff = 0.5 * (lo + hi);
  fit.residual = resid(fit.Gamma_eff);
  fit.residual_without = resid(0.0);
  if (fit.residual_without <= fit.residual) {
    fit.Gamma_eff = 0.0;
    fit.residual = fit.residual_without;
  }
  return fit;
}

std::string pauli_string(const Mat& op, int n, double tol) {
  const long d = 1L << n;
  if (op.rows() != d) throw std::invalid_argument("pauli_string: dimension mismatch");
  std::ostringstream os;
  os << std::setprecision(6);
  bool first = true;
  const long count = 1L << (2 * n);
  for (long code = 0; code < count; ++code) {
    // digit k (base 4) is the Pauli on qubit k: 0 I, 1 X, 2 Y, 3 Z
    long flip = 0;
    for (int k = 0; k < n; ++k) {
      const int p = static_cast<int>((code >> (2 * k)) & 3);
      if (p == 1 || p == 2) flip |= 1L << k;
    }
    cplx tr = 0.0;
    for (long x = 0; x < d; ++x) {
      const long y = x ^ flip;
      cplx ph = 1.0;
      for (int k = 0; k < n; ++k) {
        const int p = static_cast<int>((code >> (2 * k)) & 3);
        const int xb = static_cast<int>((x >> k) & 1);
        if (p == 2) ph *= xb == 0 ? -kI : kI;
        if (p == 3 && xb == 1) ph = -ph;
      }
      tr += ph * op(y, x);  // P_{x,y} op_{y,x}
    }
    const cplx c = tr / static_cast<double>(d);
    if (std::abs(c) < tol) continue;
    if (!first) os << " + ";
    first = false;
    if (std::abs(c.imag()) < tol) os << c.real();
    else if (std::abs(c.real()) < tol) os << c.imag() << "i";
    else os << "(" << c.real() << (c.imag() < 0 ? "" : "+") << c.imag() << "i)";
    os << ' ';
    for (int k = 0; k < n; ++k) os << "IXYZ"[(code >> (2 * k)) & 3];
  }
  return first ? "0" : os.str();
}

nlohmann::json to_json(const EffectiveLindblad& e) {
  nlohmann::json j;
  j["n_qubits"] = e.n_qubits;
  j["tau"] = e.tau;
  j["first_order_guard_ok"] = e.first_order_guard_ok;
  j["total_weight"] = e.total_weight();
  j["terms"] = nlohmann::json::array();
  for (const auto& t : e.terms) {
    nlohmann::json jt;
    jt["kind"] = t.kind == NoiseKind::Damping ? "damping" : "dephasing";
    jt["weight"] = t.weight;
    jt["layer"] = t.layer;
    jt["qubit"] = t.qubit;
    jt["merged"] = t.merged_from.size();
    jt["pauli"] = pauli_string(t.op, e.n_qubits, 1e-8);
    j["terms"].push_back(jt);
  }
  return j;
}

std::string text_report(const EffectiveLindblad& e) {
  std::ostringstream os;
  os << std::setprecision(8);
  os << "qubits " << e.n_qubits << "  tau " << e.tau << "  total weight " << e.total_weight() << '\n';
  if (!e.first_order_guard_ok) os << "warning: noise too strong for a first-order description\n";
  os << std::left << std::setw(10) << "kind" << std::setw(8) << "layer" << std::setw(8) << "qubit" << std::setw(16)
     << "weight" << "operator\n";
  for (const auto& t : e.terms) {
    os << std::setw(10) << (t.kind == NoiseKind::Damping ? "damping" : "dephasing") << std::setw(8) << t.layer
       << std::setw(8) << t.qubit << std::setw(16) << t.weight << pauli_string(t.op, e.n_qubits, 1e-8) << '\n';
  }
  return os.str();
}

}  // namespace noisebath
