#include "noisebath/lindblad_oracle.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>

namespace noisebath {

void LindbladSpec::validate() const {
  if (H.rows() != H.cols() || H.rows() == 0) throw std::invalid_argument("Hamiltonian must be square and non-empty");
  long total = 1;
  for (int x : dims) total *= x;
  if (!dims.empty() && total != H.rows()) throw std::invalid_argument("dims do not match the Hamiltonian");
  const SpMat diff = SpMat(H.adjoint()) - H;
  double worst = 0.0;
  for (int k = 0; k < diff.outerSize(); ++k)
    for (SpMat::InnerIterator it(diff, k); it; ++it) worst = std::max(worst, std::abs(it.value()));
  if (worst > 1e-12) throw std::invalid_argument("Hamiltonian is not Hermitian");
  for (const auto& c : collapse) {
    if (c.rate < 0.0 || !std::isfinite(c.rate)) throw std::invalid_argument("collapse rates must be >= 0");
    if (c.op.rows() != H.rows() || c.op.cols() != H.cols()) throw std::invalid_argument("collapse operator shape");
  }
}

void CptpLog::merge(const CptpLog& o) {
  max_trace_error = std::max(max_trace_error, o.max_trace_error);
  max_hermiticity_error = std::max(max_hermiticity_error, o.max_hermiticity_error);
  min_eigenvalue = std::min(min_eigenvalue, o.min_eigenvalue);
  checks += o.checks;
}

std::vector<double> Trajectory::column(size_t i) const {
  std::vector<double> out;
  out.reserve(values.size());
  for (const auto& row : values) out.push_back(row.at(i));
  return out;
}

std::vector<double> Trajectory::column(const std::string& name) const {
  auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) throw std::invalid_argument("no observable named " + name);
  return column(static_cast<size_t>(it - names.begin()));
}

std::string Trajectory::to_csv() const {
  std::ostringstream os;
  os << "t";
  for (const auto& n : names) os << ", " << n;
  os << '\n' << std::setprecision(17);
  for (size_t k = 0; k < t.size(); ++k) {
    os << t[k];
    for (double v : values[k]) os << ", " << v;
    os << '\n';
  }
  return os.str();
}

void Trajectory::write_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << to_csv();
}

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream ss(line);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(trim(item));
  return out;
}

}  // namespace

Trajectory Trajectory::read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  Trajectory tr;
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty trajectory file " + path);
  auto head = split_csv(line);
  if (head.empty() || head[0] != "t") throw std::runtime_error("trajectory header must start with t");
  tr.names.assign(head.begin() + 1, head.end());
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    auto cells = split_csv(line);
    if (cells.size() != head.size()) throw std::runtime_error("trajectory row has the wrong column count");
    tr.t.push_back(std::stod(cells[0]));
    std::vector<double> row;
    for (size_t i = 1; i < cells.size(); ++i) row.push_back(std::stod(cells[i]));
    tr.values.push_back(std::move(row));
  }
  for (size_t k = 1; k < tr.t.size(); ++k)
    if (!(tr.t[k] > tr.t[k - 1])) throw std::runtime_error("trajectory time grid must increase");
  return tr;
}

Mat boson_annihilation(int n_max) {
  if (n_max < 1) throw std::invalid_argument("n_max must be >= 1");
  Mat b = Mat::Zero(n_max + 1, n_max + 1);
  for (int n = 1; n <= n_max; ++n) b(n - 1, n) = std::sqrt(static_cast<double>(n));
  return b;
}

namespace {

Mat axis_matrix(Axis a) { return a == Axis::X ? pauli_x() : a == Axis::Y ? pauli_y() : pauli_z(); }

SpMat system_hamiltonian(const SystemSpec& s, const std::vector<int>& dims) {
  const long d = std::accumulate(dims.begin(), dims.end(), 1L, std::multiplies<long>());
  SpMat h(d, d);
  for (int i = 0; i < s.n_s(); ++i) h += embed(-0.5 * s.splittings[static_cast<size_t>(i)] * pauli_z(), i, dims);
  for (const auto& [i, j, dij] : s.hopping) {
    const SpMat a = embed(sigma_plus(), i, dims) * embed(sigma_minus(), j, dims);
    h += 0.5 * (dij * a + std::conj(dij) * SpMat(a.adjoint()));
  }
  return h;
}

void add_system_noise(LindbladSpec& spec, const SystemNoise& sn, int n_s) {
  for (int i = 0; i < n_s; ++i) {
    const std::string tag = "s" + std::to_string(i);
    if (sn.gamma > 0.0) {
      if (sn.symmetrized) {
        spec.collapse.push_back({embed(pauli_x(), i, spec.dims), 0.25 * sn.gamma, "sx_" + tag});
        spec.collapse.push_back({embed(pauli_y(), i, spec.dims), 0.25 * sn.gamma, "sy_" + tag});
      } else {
        spec.collapse.push_back({embed(sigma_minus(), i, spec.dims), sn.gamma, "sm_" + tag});
      }
    }
    if (sn.Gamma > 0.0) spec.collapse.push_back({embed(pauli_z(), i, spec.dims), 0.5 * sn.Gamma, "sz_" + tag});
    if (sn.flip_rate > 0.0) spec.collapse.push_back({embed(pauli_x(), i, spec.dims), sn.flip_rate, "sx_" + tag});
  }
}

}  // namespace

LindbladSpec build_spin_lindblad(const SpinBathModel& model) {
  model.validate();
  if (model.n_qubits() > 12) throw std::invalid_argument("spin oracle limited to 12 qubits");
  LindbladSpec spec;
  spec.dims = qubit_dims(model.n_qubits());
  spec.H = model.hamiltonian();
  const int n = model.n_qubits();
  for (int k = 0; k < model.n_bath(); ++k) {
    const auto& a = model.aux[static_cast<size_t>(k)];
    const int q = model.qubit_of_aux(k);
    if (a.gamma > 0.0) spec.collapse.push_back({embed_qubit(sigma_minus(), q, n), a.gamma, "sm_" + std::to_string(q)});
    if (a.Gamma > 0.0)
      spec.collapse.push_back({embed_qubit(pauli_z(), q, n), 0.5 * a.Gamma, "sz_" + std::to_string(q)});
  }
  add_system_noise(spec, model.system_noise, model.n_s());
  spec.validate();
  return spec;
}

LindbladSpec build_boson_lindblad(const LorentzianBath& bath, const SystemSpec& system, int n_max) {
  return build_boson_lindblad(bath, system, std::vector<int>(bath.modes.size(), n_max));
}

LindbladSpec build_boson_lindblad(const LorentzianBath& bath, const SystemSpec& system, const std::vector<int>& n_max) {
  system.validate();
  if (bath.n_s != system.n_s()) throw std::invalid_argument("bath and system spin counts differ");
  if (n_max.size() != bath.modes.size()) throw std::invalid_argument("one Fock cutoff per mode required");
  LindbladSpec spec;
  spec.dims = qubit_dims(system.n_s());
  long d = 1L << system.n_s();
  for (int nm : n_max) {
    if (nm < 1) throw std::invalid_argument("Fock cutoff must be >= 1");
    spec.dims.push_back(nm + 1);
    d *= nm + 1;
  }
  if (d > 4096) throw std::invalid_argument("boson oracle dimension exceeds 4096");
  spec.H = system_hamiltonian(system, spec.dims);
  const Axis axis = system.group_axes.front();
  for (size_t i = 0; i < bath.modes.size(); ++i) {
    const auto& m = bath.modes[i];
    const int site = system.n_s() + static_cast<int>(i);
    const SpMat b = embed(boson_annihilation(n_max[i]), site, spec.dims);
    const SpMat bd = SpMat(b.adjoint());
    spec.H += m.center * SpMat(bd * b);
    for (int s = 0; s < system.n_s(); ++s) {
      const std::complex<double> v = m.couplings.at(static_cast<size_t>(s));
      const SpMat field = std::conj(v) * bd + v * b;
      spec.H += 0.5 * SpMat(embed(axis_matrix(axis), s, spec.dims) * field);
    }
    spec.collapse.push_back({b, m.width, "b_" + std::to_string(i)});
  }
  for (int s = 0; s < system.n_s(); ++s) {
    const double r = bath.system_rate(s);
    if (r > 0.0) spec.collapse.push_back({embed(axis_matrix(axis), s, spec.dims), r, "sx_s" + std::to_string(s)});
  }
  spec.H.prune(cplx(0.0));
  spec.validate();
  return spec;
}

Mat lindblad_apply(const LindbladSpec& spec, const Mat& rho) {
  Mat out = -kI * (spec.H * rho - (spec.H.adjoint() * rho.adjoint()).adjoint());
  for (const auto& c : spec.collapse) {
    if (c.rate == 0.0) continue;
    const SpMat ld = SpMat(c.op.adjoint());
    const SpMat ldl = ld * c.op;
    const Mat lr = c.op * rho;
    const Mat lrl = c.op * Mat(lr.adjoint());  // L (L rho)^+ = L rho L^+ for Hermitian rho
    const Mat a = ldl * rho;
    out += c.rate * (lrl.adjoint() - 0.5 * a - 0.5 * a.adjoint());
  }
  return out;
}

namespace {

bool is_diagonal(const SpMat& m) {
  for (int k = 0; k < m.outerSize(); ++k)
    for (SpMat::InnerIterator it(m, k); it; ++it)
      if (it.row() != it.col() && it.value() != cplx(0.0)) return false;
  return true;
}

// At most one nonzero per column (sigma_-, boson annihilation): L rho L^+ as a scatter.
struct MonomialJump {
  std::vector<int> row;   // -1 where the column is empty
  std::vector<cplx> val;
  std::vector<int> active;
};

std::optional<MonomialJump> as_monomial(const SpMat& l, double scale) {
  MonomialJump m;
  m.row.assign(static_cast<size_t>(l.cols()), -1);
  m.val.assign(static_cast<size_t>(l.cols()), cplx(0.0));
  for (int k = 0; k < l.outerSize(); ++k)
    for (SpMat::InnerIterator it(l, k); it; ++it) {
      if (it.value() == cplx(0.0)) continue;
      if (m.row[static_cast<size_t>(it.col())] >= 0) return std::nullopt;
      m.row[static_cast<size_t>(it.col())] = static_cast<int>(it.row());
      m.val[static_cast<size_t>(it.col())] = scale * it.value();
    }
  for (int c = 0; c < static_cast<int>(l.cols()); ++c)
    if (m.row[static_cast<size_t>(c)] >= 0) m.active.push_back(c);
  return m;
}

// Splits L into an elementwise-exact part F (diagonal Hamiltonian and diagonal
// jumps, trace neutral) and a trace-annihilating remainder
// N(rho) = A rho + rho A^+ + sum L rho L^+, with A = -i H_off - K/2.
struct Split {
  int d = 0;
  Mat F;                             // rho_ab' = F_ab rho_ab
  Eigen::SparseMatrix<cplx> A;       // column-major for A * rho
  std::vector<MonomialJump> fast;
  std::vector<SpMat> jumps;          // sqrt(rate) L without the monomial structure

  explicit Split(const LindbladSpec& spec) {
    d = spec.dim();
    SpMat off = spec.H;
    for (int k = 0; k < off.outerSize(); ++k)
      for (SpMat::InnerIterator it(off, k); it; ++it)
        if (it.row() == it.col()) it.valueRef() = 0.0;
    off.prune(cplx(0.0));
    SpMat gen = -kI * off;
    const Eigen::VectorXcd h = spec.H.diagonal();
    F = Mat::Zero(d, d);
    for (int b = 0; b < d; ++b)
      for (int a = 0; a < d; ++a) F(a, b) = -kI * (h(a) - std::conj(h(b)));
    for (const auto& c : spec.collapse) {
      if (c.rate == 0.0) continue;
      if (is_diagonal(c.op)) {
        const Eigen::VectorXcd l = c.op.diagonal();
        for (int b = 0; b < d; ++b)
          for (int a = 0; a < d; ++a)
            F(a, b) += c.rate * (l(a) * std::conj(l(b)) - 0.5 * (std::norm(l(a)) + std::norm(l(b))));
        continue;
      }
      gen -= (0.5 * c.rate) * SpMat(SpMat(c.op.adjoint()) * c.op);
      if (auto m = as_monomial(c.op, std::sqrt(c.rate))) fast.push_back(std::move(*m));
      else jumps.push_back(std::sqrt(c.rate) * c.op);
    }
    gen.prune(cplx(0.0));
    A = gen;
  }

  bool has_remainder() const { return A.nonZeros() > 0 || !jumps.empty() || !fast.empty(); }

  // Remainder applied to a Hermitian matrix; x is scratch.
  void apply(const Mat& rho, Mat& out, Mat& x) const {
    x.noalias() = A * rho;
    out = x + x.adjoint();
    for (const auto& m : fast) {
      for (int b : m.active) {
        const cplx vb = std::conj(m.val[static_cast<size_t>(b)]);
        const cplx* src = rho.col(b).data();
        cplx* dst = out.col(m.row[static_cast<size_t>(b)]).data();
        for (int a : m.active) dst[m.row[static_cast<size_t>(a)]] += m.val[static_cast<size_t>(a)] * src[a] * vb;
      }
    }
    for (const auto& j : jumps) {
      const Mat y = j * rho;
      out.noalias() += j * y.adjoint();
    }
  }

  Mat apply(const Mat& rho) const {
    Mat out(d, d), x(d, d);
    apply(rho, out, x);
    return out;
  }

  double radius() const {
    if (!has_remainder()) return 0.0;
    std::mt19937_64 rng(12345);
    std::normal_distribution<double> nd;
    Mat x(d, d);
    for (int b = 0; b < d; ++b)
      for (int a = 0; a < d; ++a) x(a, b) = cplx(nd(rng), nd(rng));
    x = 0.5 * (x + x.adjoint()).eval();
    x /= x.norm();
    double log_sum = 0.0;
    const int iters = 40;
    for (int k = 0; k < iters; ++k) {
      Mat y = apply(x);
      const double n = y.norm();
      if (n == 0.0) return 0.0;
      log_sum += std::log(n);
      x = y / n;
    }
    return 1.1 * std::exp(log_sum / iters);
  }
};

struct Stepper {
  const Split& s;
  double dt;
  Mat P, P2;

  Stepper(const Split& split, double h) : s(split), dt(h) {
    P = (s.F * (0.5 * dt)).array().exp().matrix();
    P2 = P.cwiseProduct(P);
  }

  void step(Mat& rho) const {
    if (!s.has_remainder()) {
      rho = P2.cwiseProduct(rho);
      return;
    }
    const int d = s.d;
    if (k1.rows() != d) {
      for (Mat* m : {&k1, &k2, &k3, &k4, &tmp, &prho, &x}) m->resize(d, d);
    }
    s.apply(rho, k1, x);
    tmp = P.cwiseProduct(rho + (0.5 * dt) * k1);
    s.apply(tmp, k2, x);
    prho = P.cwiseProduct(rho);
    tmp = prho + (0.5 * dt) * k2;
    s.apply(tmp, k3, x);
    tmp = P.cwiseProduct(prho + dt * k3);
    s.apply(tmp, k4, x);
    tmp = P2.cwiseProduct(rho + (dt / 6.0) * k1) + (dt / 3.0) * P.cwiseProduct(k2 + k3) + (dt / 6.0) * k4;
    rho = 0.5 * (tmp + tmp.adjoint());
  }

 private:
  mutable Mat k1, k2, k3, k4, tmp, prho, x;
};

void enforce(const CptpLog& log, const IntegrateOptions& opt, double t) {
  std::ostringstream msg;
  msg << std::setprecision(3);
  if (log.max_trace_error > opt.trace_tol) msg << "trace error " << log.max_trace_error;
  else if (log.max_hermiticity_error > opt.hermiticity_tol) msg << "Hermiticity error " << log.max_hermiticity_error;
  else if (log.min_eigenvalue < opt.positivity_tol) msg << "negative eigenvalue " << log.min_eigenvalue;
  else return;
  msg << " at t = " << t;
  throw std::runtime_error("density-matrix invariant violated: " + msg.str());
}

}  // namespace

double stiff_radius(const LindbladSpec& spec) { return Split(spec).radius(); }

CptpLog check_density_matrix(const Mat& rho, bool positivity) {
  CptpLog log;
  log.max_trace_error = std::abs(rho.trace() - cplx(1.0));
  log.max_hermiticity_error = (rho - rho.adjoint()).cwiseAbs().maxCoeff();
  log.min_eigenvalue = positivity ? min_eigenvalue(rho) : 1.0;
  log.checks = 1;
  return log;
}

double expectation(const SpMat& op, const Mat& rho) {
  cplx acc = 0.0;
  for (int k = 0; k < op.outerSize(); ++k)
    for (SpMat::InnerIterator it(op, k); it; ++it) acc += it.value() * rho(it.col(), it.row());
  return acc.real();
}

Trajectory integrate(const LindbladSpec& spec, const Mat& rho0, double t_end, double dt_out,
                     const std::vector<Observable>& observables, const IntegrateOptions& opt) {
  spec.validate();
  if (rho0.rows() != spec.dim() || rho0.cols() != spec.dim()) throw std::invalid_argument("initial state dimension");
  if (!(dt_out > 0.0) || !(t_end >= 0.0)) throw std::invalid_argument("need dt_out > 0 and t_end >= 0");
  const Split split(spec);
  const double radius = split.radius();
  int sub = opt.substeps;
  if (sub <= 0) {
    sub = std::max(1, static_cast<int>(std::ceil(dt_out * radius / opt.stability_bound)));
  } else if (dt_out / sub * radius >= opt.stability_bound) {
    throw std::invalid_argument("integrate: step violates the stability guard");
  }
  const Stepper stepper(split, dt_out / sub);
  const long n_out = std::lround(std::floor(t_end / dt_out + 1e-9));

  Trajectory tr;
  for (const auto& o : observables) tr.names.push_back(o.name);
  Mat rho = rho0;
  auto record = [&](long k) {
    const double t = k * dt_out;
    tr.t.push_back(t);
    std::vector<double> row;
    for (const auto& o : observables) row.push_back(expectation(o.op, rho));
    tr.values.push_back(std::move(row));
    if (opt.store_states) tr.states.push_back(rho);
    const bool pos = opt.positivity_every > 0 && (k % opt.positivity_every == 0 || k == n_out);
    const CptpLog log = check_density_matrix(rho, pos);
    tr.cptp.merge(log);
    enforce(log, opt, t);
  };
  record(0);
  for (long k = 1; k <= n_out; ++k) {
    for (int j = 0; j < sub; ++j) stepper.step(rho);
    record(k);
  }
  return tr;
}

SteadyStateResult steady_state(const LindbladSpec& spec, const Mat& rho0, const SteadyStateOptions& opt) {
  spec.validate();
  bool dissipative = false;
  for (const auto& c : spec.collapse) dissipative = dissipative || c.rate > 0.0;
  if (!dissipative) throw std::invalid_argument("steady_state needs a dissipative term");
  const Split split(spec);
  const double radius = split.radius();
  double dt = opt.dt;
  if (dt <= 0.0) dt = radius > 0.0 ? 0.1 / radius : opt.check_every;
  const int per_check = std::max(1, static_cast<int>(std::ceil(opt.check_every / dt)));
  dt = opt.check_every / per_check;
  const Stepper stepper(split, dt);
  SteadyStateResult res;
  res.rho = rho0;
  while (true) {
    res.residual = lindblad_apply(spec, res.rho).cwiseAbs().sum();
    if (res.residual < opt.tolerance) {
      res.converged = true;
      break;
    }
    if (res.time >= opt.max_time) break;
    for (int j = 0; j < per_check; ++j) stepper.step(res.rho);
    res.time += opt.check_every;
  }
  res.cptp = check_density_matrix(res.rho, true);
  return res;
}

Vec plus_x_state() {
  Vec v(2);
  v << 1.0 / std::sqrt(2.0), 1.0 / std::sqrt(2.0);
  return v;
}

Mat product_state(const std::vector<int>& dims, const std::vector<std::pair<int, Vec>>& sites) {
  std::vector<Vec> local;
  for (int d : dims) {
    Vec v = Vec::Zero(d);
    v(0) = 1.0;
    local.push_back(v);
  }
  for (const auto& [s, v] : sites) {
    if (s < 0 || s >= static_cast<int>(dims.size()) || v.size() != dims[static_cast<size_t>(s)])
      throw std::invalid_argument("product_state: bad site state");
    local[static_cast<size_t>(s)] = v / v.norm();
  }
  long total = 1;
  for (int d : dims) total *= d;
  Vec psi(total);
  for (long idx = 0; idx < total; ++idx) {
    long rem = idx;
    cplx amp = 1.0;
    for (size_t s = 0; s < dims.size(); ++s) {
      amp *= local[s](rem % dims[s]);
      rem /= dims[s];
    }
    psi(idx) = amp;
  }
  return psi * psi.adjoint();
}

}  // namespace noisebath
