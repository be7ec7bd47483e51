#include "noisebath/noisy_sim.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace noisebath {

NoiseChannelSpec NoiseChannelSpec::none(int n) {
  NoiseChannelSpec s;
  s.p_gamma.assign(static_cast<size_t>(n), 0.0);
  s.p_Gamma.assign(static_cast<size_t>(n), 0.0);
  return s;
}

NoiseChannelSpec NoiseChannelSpec::from_plan(const TrotterPlan& plan) { return {plan.p_gamma, plan.p_Gamma}; }

NoiseChannelSpec NoiseChannelSpec::scaled(double f) const {
  NoiseChannelSpec s = *this;
  for (auto& p : s.p_gamma) p *= f;
  for (auto& p : s.p_Gamma) p *= f;
  return s;
}

void NoiseChannelSpec::validate(int n) const {
  if (static_cast<int>(p_gamma.size()) != n || static_cast<int>(p_Gamma.size()) != n)
    throw std::invalid_argument("noise spec needs one strength per qubit");
  for (int q = 0; q < n; ++q) {
    const double a = p_gamma[static_cast<size_t>(q)], b = p_Gamma[static_cast<size_t>(q)];
    if (!(a >= 0.0 && a < 1.0 && b >= 0.0 && b < 1.0)) throw std::invalid_argument("noise strengths must lie in [0, 1)");
  }
}

bool NoiseChannelSpec::is_zero() const {
  for (double p : p_gamma)
    if (p != 0.0) return false;
  for (double p : p_Gamma)
    if (p != 0.0) return false;
  return true;
}

namespace {

void left_1q(Mat& rho, const Mat& u, long m) {
  const long d = rho.rows();
  for (long c = 0; c < d; ++c) {
    cplx* col = rho.col(c).data();
    for (long a = 0; a < d; ++a) {
      if (a & m) continue;
      const cplx x0 = col[a], x1 = col[a | m];
      col[a] = u(0, 0) * x0 + u(0, 1) * x1;
      col[a | m] = u(1, 0) * x0 + u(1, 1) * x1;
    }
  }
}

void right_1q_adj(Mat& rho, const Mat& u, long m) {
  const long d = rho.rows();
  const cplx c00 = std::conj(u(0, 0)), c01 = std::conj(u(0, 1)), c10 = std::conj(u(1, 0)), c11 = std::conj(u(1, 1));
  for (long b = 0; b < d; ++b) {
    if (b & m) continue;
    cplx* y0 = rho.col(b).data();
    cplx* y1 = rho.col(b | m).data();
    for (long r = 0; r < d; ++r) {
      const cplx x0 = y0[r], x1 = y1[r];
      y0[r] = x0 * c00 + x1 * c01;
      y1[r] = x0 * c10 + x1 * c11;
    }
  }
}

void left_2q(Mat& rho, const Mat& u, long m0, long m1) {
  const long d = rho.rows();
  const long idx[4] = {0, m0, m1, m0 | m1};
  for (long c = 0; c < d; ++c) {
    cplx* col = rho.col(c).data();
    for (long a = 0; a < d; ++a) {
      if (a & (m0 | m1)) continue;
      cplx x[4];
      for (int k = 0; k < 4; ++k) x[k] = col[a | idx[k]];
      for (int r = 0; r < 4; ++r) {
        cplx acc = 0.0;
        for (int k = 0; k < 4; ++k) acc += u(r, k) * x[k];
        col[a | idx[r]] = acc;
      }
    }
  }
}

void right_2q_adj(Mat& rho, const Mat& u, long m0, long m1) {
  const long d = rho.rows();
  const long idx[4] = {0, m0, m1, m0 | m1};
  const Mat ua = u.adjoint();  // rho U^+ : new_col_j = sum_k col_k (U^+)_{kj}
  for (long b = 0; b < d; ++b) {
    if (b & (m0 | m1)) continue;
    cplx* y[4];
    for (int k = 0; k < 4; ++k) y[k] = rho.col(b | idx[k]).data();
    for (long r = 0; r < d; ++r) {
      cplx x[4];
      for (int k = 0; k < 4; ++k) x[k] = y[k][r];
      for (int j = 0; j < 4; ++j) {
        cplx acc = 0.0;
        for (int k = 0; k < 4; ++k) acc += x[k] * ua(k, j);
        y[j][r] = acc;
      }
    }
  }
}

void noise_one(Mat& rho, long m, double p_gamma, double p_Gamma) {
  if (p_gamma == 0.0 && p_Gamma == 0.0) return;
  const double eta = -std::expm1(-p_gamma);
  const double keep = 1.0 - eta;
  const double coh = std::sqrt(keep) * std::exp(-p_Gamma);
  const long d = rho.rows();
  for (long b = 0; b < d; ++b) {
    if (b & m) continue;
    cplx* c0 = rho.col(b).data();
    cplx* c1 = rho.col(b | m).data();
    for (long a = 0; a < d; ++a) {
      if (a & m) continue;
      c0[a] += eta * c1[a | m];
      c1[a | m] *= keep;
      c1[a] *= coh;
      c0[a | m] *= coh;
    }
  }
}

void check_state(const Mat& rho, bool positivity, const std::string& where, CptpLog* log) {
  const CptpLog l = check_density_matrix(rho, positivity);
  if (log) log->merge(l);
  if (l.max_trace_error > 1e-10 || l.max_hermiticity_error > 1e-10 || l.min_eigenvalue < -1e-8) {
    std::ostringstream os;
    os << "density-matrix invariant violated at " << where << ": trace error " << l.max_trace_error
       << ", Hermiticity error " << l.max_hermiticity_error << ", min eigenvalue " << l.min_eigenvalue;
    throw std::runtime_error(os.str());
  }
}

}  // namespace

void apply_gate(Mat& rho, const Gate& g, int n) {
  for (int q : g.qubits)
    if (q < 0 || q >= n) throw std::invalid_argument("apply_gate: operand out of range");
  const Mat u = g.matrix();
  if (g.two_qubit()) {
    const long m0 = 1L << g.qubits[0], m1 = 1L << g.qubits[1];
    left_2q(rho, u, m0, m1);
    right_2q_adj(rho, u, m0, m1);
  } else {
    const long m = 1L << g.qubits[0];
    left_1q(rho, u, m);
    right_1q_adj(rho, u, m);
  }
}

void apply_layer_noise(Mat& rho, const NoiseChannelSpec& noise, int n) {
  for (int q = 0; q < n; ++q) noise_one(rho, 1L << q, noise.p_gamma[static_cast<size_t>(q)], noise.p_Gamma[static_cast<size_t>(q)]);
}

void apply_layers(Mat& rho, const Circuit& c, const NoiseChannelSpec* noise, int begin, int end) {
  for (int l = begin; l < end; ++l) {
    for (const auto& g : c.layers[static_cast<size_t>(l)]) apply_gate(rho, g, c.n_qubits);
    if (noise) apply_layer_noise(rho, *noise, c.n_qubits);
  }
}

namespace {

std::vector<std::pair<int, int>> segments(const Circuit& c) {
  std::vector<std::pair<int, int>> seg;
  int prev = 0;
  for (int e : c.step_ends) {
    if (e > prev) seg.emplace_back(prev, e);
    prev = e;
  }
  if (prev < c.depth()) {
    if (seg.empty()) seg.emplace_back(prev, c.depth());
    else seg.back().second = c.depth();
  }
  if (seg.empty()) seg.emplace_back(0, c.depth());
  return seg;
}

}  // namespace

Trajectory run(const SimRun& r) {
  const Circuit& c = r.circuit;
  c.validate();
  if (c.n_qubits > 10) throw std::invalid_argument("simulator limited to 10 qubits");
  if (r.steps < 1) throw std::invalid_argument("steps must be >= 1");
  const long d = 1L << c.n_qubits;
  if (r.rho0.rows() != d || r.rho0.cols() != d) throw std::invalid_argument("initial state dimension");
  r.noise.validate(c.n_qubits);
  const auto seg = segments(c);
  if (r.symmetrized && seg.size() != 2) throw std::invalid_argument("symmetrized runs need a two-step period");

  Trajectory tr;
  for (const auto& o : r.observables) tr.names.push_back(o.name);
  Mat rho = r.rho0;
  auto record = [&](int k) {
    tr.t.push_back(k * r.tau);
    std::vector<double> row;
    for (const auto& o : r.observables) row.push_back(expectation(o.op, rho));
    tr.values.push_back(std::move(row));
  };
  check_state(rho, true, "start", &tr.cptp);
  record(0);
  const NoiseChannelSpec* noise = r.noise.is_zero() ? nullptr : &r.noise;
  for (int k = 1; k <= r.steps; ++k) {
    const auto [b, e] = seg[static_cast<size_t>((k - 1) % static_cast<int>(seg.size()))];
    apply_layers(rho, c, noise, b, e);
    rho = (0.5 * (rho + rho.adjoint())).eval();
    record(k);
    const bool pos = r.cptp_every > 0 && (k % r.cptp_every == 0 || k == r.steps);
    if (pos) check_state(rho, true, "step " + std::to_string(k), &tr.cptp);
  }
  return tr;
}

SimSteadyState run_until_steady(const Circuit& c, const Mat& rho0, const NoiseChannelSpec& noise, double tol,
                                int max_periods) {
  c.validate();
  noise.validate(c.n_qubits);
  SimSteadyState s;
  s.rho = rho0;
  const NoiseChannelSpec* np = noise.is_zero() ? nullptr : &noise;
  const int per = static_cast<int>(segments(c).size());
  for (int p = 0; p < max_periods; ++p) {
    const Mat prev = s.rho;
    apply_layers(s.rho, c, np, 0, c.depth());
    s.rho = (0.5 * (s.rho + s.rho.adjoint())).eval();
    s.steps += per;
    s.change = (s.rho - prev).cwiseAbs().sum();
    if (p % 50 == 49) check_state(s.rho, true, "period " + std::to_string(p + 1), nullptr);
    if (s.change < tol) {
      s.converged = true;
      break;
    }
  }
  check_state(s.rho, true, "steady state", nullptr);
  return s;
}

double expectation_dense(const Mat& rho, const Mat& op) {
  if ((op - op.adjoint()).cwiseAbs().maxCoeff() > 1e-12) throw std::invalid_argument("observable must be Hermitian");
  const cplx v = (op * rho).trace();
  if (std::abs(v.imag()) > 1e-10) throw std::runtime_error("expectation value has an imaginary part");
  return v.real();
}

Mat single_qubit_lindblad_channel(const Mat& rho, double gamma, double Gamma, double t) {
  Mat out = rho;
  const double p1 = std::real(rho(1, 1)) * std::exp(-gamma * t);
  out(1, 1) = p1;
  out(0, 0) = std::real(rho(0, 0)) + std::real(rho(1, 1)) - p1;
  const double f = std::exp(-(0.5 * gamma + Gamma) * t);
  out(0, 1) = rho(0, 1) * f;
  out(1, 0) = rho(1, 0) * f;
  return out;
}

}  // namespace noisebath
