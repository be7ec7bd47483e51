#include <doctest.h>

#include <cmath>
#include <random>
#include <set>

#include <unsupported/Eigen/MatrixFunctions>

#include "noisebath/circuit.hpp"

using namespace noisebath;

namespace {

constexpr double pi = 3.14159265358979323846;

// Kronecker product with q1 as the more significant factor.
Mat kron(const Mat& hi, const Mat& lo) {
  Mat out(hi.rows() * lo.rows(), hi.cols() * lo.cols());
  for (int a = 0; a < hi.rows(); ++a)
    for (int b = 0; b < hi.cols(); ++b) out.block(a * lo.rows(), b * lo.cols(), lo.rows(), lo.cols()) = hi(a, b) * lo;
  return out;
}

Mat X() { Mat m(2, 2); m << 0, 1, 1, 0; return m; }
Mat Y() { Mat m(2, 2); m << 0, cplx(0, -1), cplx(0, 1), 0; return m; }
Mat Z() { Mat m(2, 2); m << 1, 0, 0, -1; return m; }
Mat I2() { return Mat::Identity(2, 2); }

Mat expm_herm(const Mat& h, double t) { return Mat(cplx(0, -t) * h).exp(); }

Circuit two_qubit(const std::vector<Layer>& layers) {
  Circuit c;
  c.n_qubits = 2;
  c.roles = {Role::System, Role::Bath};
  c.add(layers);
  return c;
}

// operator on n qubits from a list of single-qubit factors, qubit 0 first
Mat product(const std::vector<Mat>& f) {
  Mat out = f.back();
  for (int i = static_cast<int>(f.size()) - 2; i >= 0; --i) out = kron(out, f[static_cast<size_t>(i)]);
  return out;
}

Mat on(int n, int q, const Mat& op) {
  std::vector<Mat> f(static_cast<size_t>(n), I2());
  f[static_cast<size_t>(q)] = op;
  return product(f);
}

SpinBathModel xx_model(int nq, double v) {
  std::vector<LorentzMode> modes;
  for (int k = 0; k < nq; ++k) modes.push_back({v * v, 0.6 + 0.3 * k, 0.5});
  SystemSpec s;
  s.splittings = {0.9};
  return bosons_to_spins(LorentzianBath::single(modes), std::vector<int>(static_cast<size_t>(nq), 1), s, 0.5);
}

}  // namespace

TEST_CASE("gate matrices") {
  CHECK((rx(0, pi).matrix() - cplx(0, -1) * X()).cwiseAbs().maxCoeff() < 1e-15);
  CHECK((rz(0, 0.3).matrix() - expm_herm(Z(), 0.15)).cwiseAbs().maxCoeff() < 1e-15);
  CHECK((ms(0, 1, 0.4).matrix() - expm_herm(kron(X(), X()), 0.2)).cwiseAbs().maxCoeff() < 1e-15);
  const Mat hop = 0.5 * (kron(X(), X()) + kron(Y(), Y()));  // s+s- + s-s+
  CHECK((iswap(0, 1, 0.7).matrix() - expm_herm(hop, 0.35)).cwiseAbs().maxCoeff() < 1e-15);
  // CNOT with control on qubit 0 flips qubit 1
  const Mat cn = cnot(0, 1).matrix();
  const Mat p0 = 0.5 * (I2() + Z()), p1 = 0.5 * (I2() - Z());
  CHECK((cn - (kron(I2(), p0) + kron(X(), p1))).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("unitary_of basics") {
  Circuit empty;
  empty.n_qubits = 2;
  empty.roles = {Role::System, Role::Bath};
  CHECK((unitary_of(empty) - Mat::Identity(4, 4)).cwiseAbs().maxCoeff() == 0.0);
  Circuit one;
  one.n_qubits = 1;
  one.roles = {Role::System};
  one.add(Layer{rx(0, pi)});
  CHECK((unitary_of(one) - cplx(0, -1) * X()).cwiseAbs().maxCoeff() < 1e-15);
  const auto c = trotter_step(xx_model(3, 0.8), Decomposition::CnotB, 0.2);
  const Mat u = unitary_of(c);
  CHECK((u.adjoint() * u - Mat::Identity(16, 16)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("XX decompositions match the exact exponential") {
  const Mat xx = kron(X(), X());
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> ang(-pi, pi);
  std::vector<double> thetas{0.0, 0.1, 0.18, 1.0};
  for (int i = 0; i < 20; ++i) thetas.push_back(ang(rng));
  for (auto scheme : {XXScheme::NativeMS, XXScheme::CnotB, XXScheme::CnotS, XXScheme::ControlZ, XXScheme::ISwapPair}) {
    for (double t : thetas) {
      const Mat u = unitary_of(two_qubit(decompose_xx(t, scheme, 0, 1)));
      CHECK(phase_aligned_distance(u, expm_herm(xx, 0.5 * t)) < 1e-12);
    }
  }
  // Y-X coupling
  const Mat yx = kron(X(), Y());
  for (double t : thetas) {
    const Mat u = unitary_of(two_qubit(decompose_yx(t, XXScheme::CnotB, 0, 1)));
    CHECK(phase_aligned_distance(u, expm_herm(yx, 0.5 * t)) < 1e-12);
  }
}

TEST_CASE("hop decomposition") {
  const Mat h = kron(X(), X()) + kron(Y(), Y());
  for (double t : {0.0, 0.2, 0.7, -1.3}) {
    const auto layers = decompose_hop(t, 0, 1);
    const Mat u = unitary_of(two_qubit(layers));
    CHECK(phase_aligned_distance(u, expm_herm(h, 0.5 * t)) < 1e-12);
    CHECK(phase_aligned_distance(u, iswap(0, 1, 2.0 * t).matrix()) < 1e-12);
    // coupling angles below pi/4 leave Rz as the only large-angle gate
    if (std::abs(t) < pi / 4)
      for (const auto& l : layers)
        for (const auto& g : l)
          if (std::abs(g.theta) >= pi / 4) CHECK(g.kind == GateKind::Rz);
  }
  CHECK(phase_aligned_distance(unitary_of(two_qubit(decompose_hop(0.0, 0, 1))), Mat::Identity(4, 4)) < 1e-15);
}

TEST_CASE("CNOT-B uses the bath qubit as control") {
  const auto l = decompose_xx(0.3, XXScheme::CnotB, 0, 1);
  CHECK(l.size() == 3);
  CHECK(l[0][0].kind == GateKind::CNOT);
  CHECK(l[0][0].qubits[0] == 1);
  const auto s = decompose_xx(0.3, XXScheme::CnotS, 0, 1);
  CHECK(s[0][0].qubits[0] == 0);
}

TEST_CASE("Trotter step equals the product of exponentials") {
  const auto m = xx_model(2, 0.7);
  const double tau = 0.3;
  // exp(-i tau (H_S + H_B)) then each coupling in order
  const int n = 3;
  Mat h0 = -0.45 * on(n, 0, Z());
  Mat u = Mat::Identity(8, 8);
  for (int k = 0; k < 2; ++k) h0 += m.aux[static_cast<size_t>(k)].omega * on(n, 1 + k, 0.5 * (I2() - Z()));
  u = expm_herm(h0, tau);
  for (int k = 0; k < 2; ++k) {
    const Mat hc = 0.5 * m.aux[static_cast<size_t>(k)].coupling() * on(n, 0, X()) * on(n, 1 + k, X());
    u = (expm_herm(hc, tau) * u).eval();
  }
  for (auto d : {Decomposition::NativeMS, Decomposition::NativeISwap, Decomposition::CnotB, Decomposition::CnotS,
                 Decomposition::ControlZ}) {
    const auto c = trotter_step(m, d, tau);
    CHECK(c.depth() == circuit_depth(d, 2, ModelKind::XXOnly));
    CHECK(phase_aligned_distance(unitary_of(c), u) < 1e-12);
  }
  const auto ms8 = trotter_step(xx_model(8, 0.7), Decomposition::NativeMS, tau);
  CHECK(ms8.depth() == 9);
  for (size_t l = 1; l < ms8.layers.size(); ++l) CHECK(ms8.layers[l][0].theta == doctest::Approx(0.7 * tau));
}

TEST_CASE("depth law for every decomposition and model kind") {
  const auto bath = LorentzianBath::single({{0.25, 1.0, 0.5}, {0.16, 2.0, 0.5}});
  SystemSpec s;
  s.splittings = {1.0};
  for (int nq : {2, 4, 8}) {
    const auto m = xx_model(nq, 0.5);
    for (auto d : {Decomposition::NativeMS, Decomposition::NativeISwap, Decomposition::CnotB, Decomposition::CnotS,
                   Decomposition::ControlZ})
      CHECK(trotter_step(m, d, 0.1).depth() == circuit_depth(d, nq, ModelKind::XXOnly));
  }
  const auto xy = build_two_bath_model(bath, bath, s);
  const auto hc = build_two_bath_model(bath, bath, s, TwoBathForm::HopCounter);
  for (auto d : {Decomposition::NativeMS, Decomposition::CnotB, Decomposition::CnotS, Decomposition::ControlZ})
    CHECK(trotter_step(xy, d, 0.1).depth() == circuit_depth(d, 4, ModelKind::TwoBath));
  CHECK(trotter_step(hc, Decomposition::NativeISwap, 0.1).depth() == circuit_depth(Decomposition::NativeISwap, 4, ModelKind::TwoBath));
  CHECK_THROWS(trotter_step(hc, Decomposition::NativeMS, 0.1));
}

TEST_CASE("two-bath steps reproduce their Hamiltonians") {
  const auto bath = LorentzianBath::single({{0.25, 1.0, 0.5}});
  SystemSpec s;
  s.splittings = {1.1};
  const double tau = 0.2;
  for (auto form : {TwoBathForm::XY, TwoBathForm::HopCounter}) {
    const auto m = build_two_bath_model(bath, bath, s, form);
    const Mat h = Mat(m.hamiltonian());
    // free part first, then the two couplings in order
    SpinBathModel free = m;
    for (auto& a : free.aux) a.couplings = {0.0};
    const Mat h0 = Mat(free.hamiltonian());
    Mat u = expm_herm(h0, tau);
    for (int k = 0; k < 2; ++k) {
      SpinBathModel only = m;
      only.system.splittings = {0.0};
      for (int j = 0; j < 2; ++j) {
        only.aux[static_cast<size_t>(j)].omega = 0.0;
        if (j != k) only.aux[static_cast<size_t>(j)].couplings = {0.0};
      }
      u = (expm_herm(Mat(only.hamiltonian()), tau) * u).eval();
    }
    const auto d = form == TwoBathForm::XY ? Decomposition::NativeMS : Decomposition::NativeISwap;
    CHECK(phase_aligned_distance(unitary_of(trotter_step(m, d, tau)), u) < 1e-12);
    CHECK((h - h.adjoint()).cwiseAbs().maxCoeff() < 1e-15);
  }
}

TEST_CASE("no large-angle rotations on bath qubits") {
  const auto m = xx_model(4, 0.8);
  for (auto d : {Decomposition::NativeMS, Decomposition::NativeISwap, Decomposition::CnotB, Decomposition::ControlZ})
    CHECK(no_large_bath_rotations(trotter_step(m, d, 0.2)));
  CHECK(no_large_bath_rotations(swap_network_step(m, Decomposition::NativeMS, 0.2).circuit));
  Circuit bad = two_qubit({{rx(1, pi)}});
  CHECK_FALSE(no_large_bath_rotations(bad));
}

TEST_CASE("symmetrized super-period") {
  const auto m = xx_model(2, 0.7);
  const double tau = 0.25;
  const auto step = trotter_step(m, Decomposition::NativeMS, tau);
  const auto sym = symmetrize(step, m, Decomposition::NativeMS, tau);
  CHECK(sym.depth() == 2 * step.depth() + 2);
  REQUIRE(sym.step_ends.size() == 2);
  // coupling angles are identical in both halves
  const int D = step.depth();
  for (int l = 1; l < D; ++l) CHECK(sym.layers[static_cast<size_t>(D + 1 + l)][0].theta == step.layers[static_cast<size_t>(l)][0].theta);
  // X U-bar X = U for an XX coupling, so the pair is U^2
  const Mat u = unitary_of(step);
  CHECK(phase_aligned_distance(unitary_of(sym), u * u) < 1e-12);

  // Y couplings flip sign in U-bar
  const auto bath = LorentzianBath::single({{0.25, 1.0, 0.5}});
  SystemSpec s;
  s.splittings = {1.0};
  const auto two = build_two_bath_model(bath, bath, s);
  const auto bar = conjugated_model(two);
  CHECK(bar.aux[1].coupling() == -two.aux[1].coupling());
  CHECK(bar.aux[0].coupling() == two.aux[0].coupling());
  const auto tstep = trotter_step(two, Decomposition::NativeMS, tau);
  const Mat ut = unitary_of(tstep);
  CHECK(phase_aligned_distance(unitary_of(symmetrize(tstep, two, Decomposition::NativeMS, tau)), ut * ut) < 1e-12);
}

TEST_CASE("swap network reproduces the all-to-all step") {
  const auto m = xx_model(4, 0.6);
  const double tau = 0.3;
  const auto sw = swap_network_step(m, Decomposition::NativeMS, tau);
  CHECK(sw.circuit.n_qubits == 6);
  CHECK(sw.circuit.depth() == trotter_step(m, Decomposition::NativeMS, tau).depth() + 3);
  CHECK(sw.circuit.depth() == circuit_depth(Decomposition::NativeMS, 4, ModelKind::XXOnly, Connectivity::SwapNetwork));
  CHECK(respects_edges(sw.circuit, sw.edges));
  const Mat ua = unitary_of(trotter_step(m, Decomposition::NativeMS, tau));
  const Mat us = unitary_of(sw.circuit);
  // embed 5-qubit states as (system on qubit src, |0> on the other register, bath on 2..5)
  auto iso = [](int src) {
    Mat e = Mat::Zero(64, 32);
    for (int x = 0; x < 32; ++x) {
      const int sbit = x & 1;
      const int bath = x >> 1;
      e((bath << 2) | (sbit << src), x) = 1.0;
    }
    return e;
  };
  const Mat lhs = us * iso(0);
  const Mat rhs = iso(sw.final_system_qubit) * ua;
  CHECK(phase_aligned_distance(lhs, rhs) < 1e-10);
  // the system register alternates and touches every bath qubit
  CHECK(sw.final_system_qubit == 1);
  std::set<int> touched;
  for (const auto& l : sw.circuit.layers)
    for (const auto& g : l)
      if (g.kind == GateKind::MS) touched.insert(g.qubits[1]);
  CHECK(touched.size() == 4);
  CHECK_THROWS(swap_network_step(xx_model(3, 0.6), Decomposition::NativeMS, tau));
}

TEST_CASE("layer disjointness and text round trip") {
  Circuit bad = two_qubit({{rx(0, 0.1), ms(0, 1, 0.2)}});
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  const auto c = trotter_step(xx_model(3, 0.8), Decomposition::ControlZ, 0.2);
  const std::string txt = to_text(c);
  const auto back = circuit_from_text(txt, 0);
  CHECK(back.n_qubits == c.n_qubits);
  CHECK(back.depth() == c.depth());
  CHECK((unitary_of(back) - unitary_of(c)).cwiseAbs().maxCoeff() == 0.0);
  CHECK(to_text(back) == txt);
  CHECK_THROWS(circuit_from_text("FOO 0\n", 1));
}
