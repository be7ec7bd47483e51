#include <doctest.h>

#include <cmath>

#include "noisebath/effective_noise.hpp"

using namespace noisebath;

namespace {

// 4x4 operator in the basis b(control) + 2 b(target)
Mat pair_op(const Mat& on_control, const Mat& on_target) {
  Mat out(4, 4);
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) out(r, c) = on_target(r >> 1, c >> 1) * on_control(r & 1, c & 1);
  return out;
}

Mat m2(cplx a, cplx b, cplx c, cplx d) {
  Mat m(2, 2);
  m << a, b, c, d;
  return m;
}

const Mat I2 = Mat::Identity(2, 2);
const Mat SM = m2(0, 1, 0, 0);  // |0><1|
const Mat SP = m2(0, 0, 1, 0);
const Mat SZ = m2(1, 0, 0, -1);
const Mat SX = m2(0, 1, 1, 0);
const Mat P0 = m2(1, 0, 0, 0);
const Mat P1 = m2(0, 0, 0, 1);

Mat gate_matrix(TwoQubitGate g) {
  return g == TwoQubitGate::CNOT ? Mat(pair_op(P0, I2) + pair_op(P1, SX)) : Mat(pair_op(P0, I2) + pair_op(P1, SZ));
}

Mat incoming(IncomingNoise n) { return n == IncomingNoise::Minus ? SM : n == IncomingNoise::Plus ? SP : SZ; }

SpinBathModel xx_model(int nq, double v) {
  std::vector<LorentzMode> modes;
  for (int k = 0; k < nq; ++k) modes.push_back({v * v, 1.0 + 0.3 * k, 0.5 * v});
  SystemSpec s;
  s.splittings = {0.9};
  return bosons_to_spins(LorentzianBath::single(modes), std::vector<int>(static_cast<size_t>(nq), 1), s, 0.5);
}

double rel_dist(const Mat& a, const Mat& b) { return (a - b).cwiseAbs().maxCoeff(); }

}  // namespace

TEST_CASE("two-qubit noise table matches matrix conjugation") {
  int checked = 0;
  for (auto g : {TwoQubitGate::CNOT, TwoQubitGate::CZ})
    for (auto n : {IncomingNoise::Minus, IncomingNoise::Plus, IncomingNoise::Z})
      for (auto w : {Operand::Control, Operand::Target}) {
        const Mat u = gate_matrix(g);
        const Mat op = w == Operand::Control ? pair_op(incoming(n), I2) : pair_op(I2, incoming(n));
        const auto e = table_transform(g, n, w);
        CHECK(rel_dist(e.op, u * op * u.adjoint()) < 1e-12);
        CHECK_FALSE(e.text.empty());
        ++checked;
      }
  CHECK(checked == 12);

  SUBCASE("quoted entries") {
    CHECK(rel_dist(table_transform(TwoQubitGate::CNOT, IncomingNoise::Plus, Operand::Control).op, pair_op(SP, SX)) < 1e-12);
    CHECK(rel_dist(table_transform(TwoQubitGate::CNOT, IncomingNoise::Minus, Operand::Control).op, pair_op(SM, SX)) < 1e-12);
    CHECK(rel_dist(table_transform(TwoQubitGate::CNOT, IncomingNoise::Z, Operand::Control).op, pair_op(SZ, I2)) < 1e-12);
    CHECK(rel_dist(table_transform(TwoQubitGate::CNOT, IncomingNoise::Minus, Operand::Target).op,
                   pair_op(P0, SM) + pair_op(P1, SP)) < 1e-12);
    CHECK(rel_dist(table_transform(TwoQubitGate::CZ, IncomingNoise::Minus, Operand::Target).op, pair_op(SZ, SM)) < 1e-12);
    CHECK(rel_dist(table_transform(TwoQubitGate::CZ, IncomingNoise::Z, Operand::Target).op, pair_op(I2, SZ)) < 1e-12);
  }
}

TEST_CASE("conjugation through a circuit suffix") {
  Circuit c;
  c.n_qubits = 3;
  c.roles = {Role::System, Role::Bath, Role::Bath};
  const Mat sm0 = Mat(embed_qubit(sigma_minus(), 0, 3));
  CHECK(rel_dist(conjugate_through(c, sm0), sm0) == 0.0);

  c.add(Layer{cnot(0, 2)});
  const Mat expect = sm0 * Mat(embed_qubit(pauli_x(), 2, 3));
  CHECK(rel_dist(conjugate_through(c, sm0), expect) < 1e-12);
  const Mat z0 = Mat(embed_qubit(pauli_z(), 0, 3));
  CHECK(rel_dist(conjugate_through(c, z0), z0) < 1e-12);

  c.add({Layer{rx(1, 0.4), ry(2, -0.9)}, Layer{ms(0, 1, 0.3)}, Layer{iswap(1, 2, 1.1)}, Layer{cz(0, 2), rz(1, 2.2)}});
  std::srand(17);
  const Mat op = Mat::Random(8, 8);
  for (int from = 0; from <= c.depth(); ++from)
    CHECK(std::abs(conjugate_through(c, from, op).norm() - op.norm()) < 1e-12);
}

TEST_CASE("effective Lindbladian bookkeeping") {
  const auto m = xx_model(2, 1.0);
  for (auto d : {Decomposition::NativeMS, Decomposition::NativeISwap, Decomposition::CnotB, Decomposition::CnotS,
                 Decomposition::ControlZ}) {
    CAPTURE(to_string(d));
    const auto plan = make_plan(m, d, 0.01, 0.5, 1);
    const auto step = trotter_step(m, d, plan.tau);
    const auto noise = NoiseChannelSpec::from_plan(plan);
    const auto e = effective_lindblad(step, noise, plan.tau);
    double expected = 0.0;
    for (int q = 0; q < 3; ++q) expected += step.depth() * (noise.p_gamma[static_cast<size_t>(q)] + noise.p_Gamma[static_cast<size_t>(q)]);
    CHECK(e.total_weight() == doctest::Approx(expected / plan.tau).epsilon(1e-14));
    size_t origins = 0;
    for (const auto& t : e.terms) {
      CHECK(t.weight > 0.0);
      CHECK(t.op.cwiseAbs().maxCoeff() > 0.0);
      origins += t.merged_from.size();
    }
    // two bath qubits, two channels each, every layer
    CHECK(origins == static_cast<size_t>(4 * step.depth()));
    CHECK(e.first_order_guard_ok);

    // the generator annihilates the trace
    const Mat L = e.superop();
    const Vec id = vec(Mat::Identity(8, 8));
    CHECK((id.adjoint() * L).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("native MS step keeps the physical noise form") {
  const auto m = xx_model(2, 1.0);
  const auto plan = make_plan(m, Decomposition::NativeMS, 0.01, 0.5, 1);
  const auto step = trotter_step(m, Decomposition::NativeMS, plan.tau);
  const auto e = effective_lindblad(step, NoiseChannelSpec::from_plan(plan), plan.tau);
  for (int k = 0; k < m.n_bath(); ++k) {
    const int q = m.qubit_of_aux(k);
    const auto& a = m.aux[static_cast<size_t>(k)];
    double g = 0.0, z = 0.0;
    for (const auto& t : e.terms) {
      if (t.qubit != q) continue;
      (t.kind == NoiseKind::Damping ? g : z) += t.weight;
      // small coupling angles barely rotate the operator
      const Mat bare = Mat(embed_qubit(t.kind == NoiseKind::Damping ? sigma_minus() : pauli_z(), q, 3));
      CHECK(rel_dist(t.op, bare) < plan.tau);
    }
    CHECK(g == doctest::Approx(a.gamma).epsilon(1e-6));
    CHECK(z == doctest::Approx(a.Gamma).epsilon(1e-6));
  }
}

// Share of an operator's Pauli content on strings with Z on the system qubit
// and only I or Z elsewhere: dephasing that reads the system population.
double system_z_share(const Mat& op, int n) {
  const long d = 1L << n;
  double num = 0.0, den = 0.0;
  for (long code = 0; code < (1L << (2 * n)); ++code) {
    Mat p = Mat::Identity(1, 1);
    bool diag = true;
    // qubit k becomes the outer factor, so qubit 0 stays least significant
    for (int k = 0; k < n; ++k) {
      const int c = static_cast<int>((code >> (2 * k)) & 3);
      const Mat f = c == 0 ? I2 : c == 1 ? SX : c == 2 ? m2(0, cplx(0, -1), cplx(0, 1), 0) : SZ;
      diag = diag && (c == 0 || c == 3);
      Mat next(p.rows() * 2, p.cols() * 2);
      for (int r = 0; r < 2; ++r)
        for (int cc = 0; cc < 2; ++cc) next.block(r * p.rows(), cc * p.cols(), p.rows(), p.cols()) = f(r, cc) * p;
      p = next;
    }
    const double w = std::norm((p.adjoint() * op).trace() / static_cast<double>(d));
    den += w;
    if (diag && (code & 3) == 3) num += w;
  }
  return num / den;
}

TEST_CASE("control-system CNOT produces system dephasing, bath-control CNOT does not") {
  const auto m = xx_model(2, 1.0);
  auto share = [&](Decomposition d) {
    const auto plan = make_plan(m, d, 0.0036, 0.5, 1);
    const auto e = effective_lindblad(trotter_step(m, d, plan.tau), NoiseChannelSpec::from_plan(plan), plan.tau);
    double w = 0.0;
    for (const auto& t : e.terms) w += t.weight * system_z_share(t.op, 3);
    return w / e.total_weight();
  };
  CHECK(share(Decomposition::CnotS) > 1e-2);
  CHECK(share(Decomposition::CnotB) < 1e-2);
  CHECK(share(Decomposition::NativeMS) < 1e-2);

  SUBCASE("least-squares system dephasing is non-negative and never worsens the match") {
    for (auto d : {Decomposition::CnotS, Decomposition::CnotB}) {
      const auto plan = make_plan(m, d, 0.0036, 0.5, 1);
      const auto step = trotter_step(m, d, plan.tau);
      const auto fit = extract_system_dephasing(step, NoiseChannelSpec::from_plan(plan), plan.tau, 0);
      CHECK(fit.Gamma_eff >= 0.0);
      CHECK(fit.residual <= fit.residual_without);
    }
  }
}

TEST_CASE("noise-attributable deviation is second order") {
  const auto m = xx_model(2, 1.0);
  const Mat h = Mat(m.hamiltonian());
  for (auto d : {Decomposition::NativeMS, Decomposition::NativeISwap, Decomposition::CnotB, Decomposition::CnotS,
                 Decomposition::ControlZ}) {
    CAPTURE(to_string(d));
    const auto plan = make_plan(m, d, 0.01, 0.5, 1);
    const auto step = trotter_step(m, d, plan.tau);
    const auto rep = verify_first_order(step, NoiseChannelSpec::from_plan(plan), plan.tau, h);
    REQUIRE(rep.ratios.size() == 2);
    CHECK(rep.ratios[0] > 4.0 / 1.5);
    CHECK(rep.ratios[0] < 4.0 * 1.5);
  }
  SUBCASE("zero noise leaves the Trotter mismatch only") {
    const auto plan = make_plan(m, Decomposition::NativeMS, 0.01, 0.5, 1);
    const auto step = trotter_step(m, Decomposition::NativeMS, plan.tau);
    const auto rep = verify_first_order(step, NoiseChannelSpec::none(3), plan.tau, h);
    for (double v : rep.product_dev) CHECK(v < 1e-13);
    for (double v : rep.generator_dev) CHECK(std::abs(v) < 1e-13);
    CHECK(rep.generator_baseline > 0.0);
  }
}

TEST_CASE("reports") {
  CHECK(pauli_string(Mat(embed_qubit(pauli_z(), 1, 2)), 2) == "1 IZ");
  const auto m = xx_model(1, 1.0);
  const auto plan = make_plan(m, Decomposition::CnotB, 0.01, 0.5, 1);
  const auto e = effective_lindblad(trotter_step(m, Decomposition::CnotB, plan.tau), NoiseChannelSpec::from_plan(plan), plan.tau);
  const auto j = to_json(e);
  CHECK(j.at("terms").size() == e.terms.size());
  CHECK(text_report(e).find("weight") != std::string::npos);
}
