#include "noisebath/coarse_grain.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "noisebath/linalg.hpp"

namespace noisebath {

double LorentzianBath::system_rate(int i) const {
  if (system_rates.empty()) return 0.0;
  return system_rates.at(static_cast<size_t>(i));
}

std::complex<double> LorentzianBath::spectral(double omega, int i, int j) const {
  std::complex<double> s = 0.0;
  for (const auto& m : modes) {
    const double h = 0.5 * m.width;
    const double d = omega - m.center;
    const double l = m.width / (h * h + d * d);
    s += m.couplings.at(static_cast<size_t>(i)) * std::conj(m.couplings.at(static_cast<size_t>(j))) * l;
  }
  if (i == j) s += 4.0 * system_rate(i);
  return s;
}

LorentzianSum LorentzianBath::to_lorentzian_sum(int channel) const {
  LorentzianSum out;
  for (const auto& m : modes) out.modes.push_back({m.weight(channel), m.center, m.width});
  out.background = 4.0 * system_rate(channel);
  return out;
}

LorentzianBath LorentzianBath::single(const std::vector<LorentzMode>& modes, double system_rate) {
  LorentzianBath b;
  int slot = 0;
  for (const auto& m : modes) {
    b.modes.push_back({{std::sqrt(m.weight)}, m.center, m.width, slot++});
  }
  if (system_rate != 0.0) b.system_rates = {system_rate};
  return b;
}

void FitConfig::validate() const {
  if (n < 1) throw std::invalid_argument("fit: n must be >= 1");
  if (!(omega_min < omega_max)) throw std::invalid_argument("fit: degenerate window");
  if (grid_points < 3) throw std::invalid_argument("fit: grid_points must be >= 3");
  if (width_constraint == WidthConstraint::FixedRatios) {
    if (static_cast<int>(width_ratios.size()) != n) throw std::invalid_argument("fit: need one width ratio per mode");
    for (double r : width_ratios)
      if (!(r > 0.0)) throw std::invalid_argument("fit: width ratios must be > 0");
  }
  if (system_ratio && *system_ratio < 0.0) throw std::invalid_argument("fit: system ratio must be >= 0");
  for (double r : system_ratios)
    if (r < 0.0) throw std::invalid_argument("fit: system ratios must be >= 0");
}

namespace {

struct Grid {
  std::vector<double> omega;
  std::vector<double> weight;
};

Grid make_grid(double lo, double hi, int points) {
  if (!(lo < hi)) throw std::invalid_argument("empty window");
  if (points < 2) throw std::invalid_argument("grid needs >= 2 points");
  Grid g;
  const double h = (hi - lo) / (points - 1);
  for (int k = 0; k < points; ++k) {
    g.omega.push_back(k == points - 1 ? hi : lo + k * h);
    g.weight.push_back((k == 0 || k == points - 1) ? 0.5 * h : h);
  }
  return g;
}

std::vector<std::pair<int, int>> channels(int n_s) {
  std::vector<std::pair<int, int>> out;
  for (int i = 0; i < n_s; ++i)
    for (int j = i; j < n_s; ++j) out.emplace_back(i, j);
  return out;
}

double ratio_of(const FitConfig& c, int m) {
  return c.width_constraint == WidthConstraint::FixedRatios ? c.width_ratios[static_cast<size_t>(m)] : 1.0;
}

std::vector<double> background_ratios(const FitConfig& c, int n_s) {
  std::vector<double> r(static_cast<size_t>(n_s), 0.0);
  if (!c.system_ratios.empty()) {
    if (static_cast<int>(c.system_ratios.size()) != n_s) throw std::invalid_argument("fit: system ratio count");
    r = c.system_ratios;
  } else if (c.system_ratio) {
    std::fill(r.begin(), r.end(), *c.system_ratio);
  }
  return r;
}

int params_per_mode(int n_s) { return n_s == 1 ? 2 : 1 + 2 * n_s; }

// Centers are kept inside the window widened by half its length on each side:
// center = mid + half * tanh(u).
struct CenterMap {
  double mid, half;
  explicit CenterMap(const FitConfig& c)
      : mid(0.5 * (c.omega_min + c.omega_max)), half(c.omega_max - c.omega_min) {}
  double center(double u) const { return mid + half * std::tanh(u); }
  double derivative(double u) const {
    const double t = std::tanh(u);
    return half * (1.0 - t * t);
  }
  double param(double center) const {
    const double x = std::clamp((center - mid) / half, -1.0 + 1e-12, 1.0 - 1e-12);
    return std::atanh(x);
  }
};

// Least-squares problem over the quadrature grid.
class Problem {
 public:
  Problem(const MultiChannelTarget& target, const FitConfig& cfg)
      : cfg_(cfg), n_s_(target.dimension()), grid_(make_grid(cfg.omega_min, cfg.omega_max, cfg.grid_points)),
        chans_(channels(n_s_)), rbg_(background_ratios(cfg, n_s_)), cmap_(cfg) {
    for (auto [i, j] : chans_) {
      std::vector<std::complex<double>> vals;
      for (double w : grid_.omega) vals.push_back(target(w, i, j));
      target_.push_back(std::move(vals));
    }
    rows_ = 0;
    for (auto [i, j] : chans_) rows_ += (i == j ? 1 : 2) * static_cast<int>(grid_.omega.size());
    cols_ = cfg.n * params_per_mode(n_s_) + 1;
  }

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  const Grid& grid() const { return grid_; }

  double scale() const {
    double s = 0.0;
    for (const auto& ch : target_)
      for (size_t k = 0; k < ch.size(); ++k) s += grid_.weight[k] * std::norm(ch[k]);
    return s;
  }

  double peak() const {
    double p = 0.0;
    for (const auto& ch : target_)
      for (const auto& v : ch) p = std::max(p, std::abs(v));
    return p;
  }

  // Residual and (optionally) its Jacobian.
  void evaluate(const Eigen::VectorXd& p, Eigen::VectorXd& r, Eigen::MatrixXd* jac) const {
    const int ppm = params_per_mode(n_s_);
    const int n = cfg_.n;
    const double kappa = std::exp(p(cols_ - 1));
    r.setZero(rows_);
    if (jac) jac->setZero(rows_, cols_);

    struct ModeView {
      double center, dcenter, width;
      std::vector<std::complex<double>> v;
    };
    std::vector<ModeView> modes(static_cast<size_t>(n));
    for (int m = 0; m < n; ++m) {
      auto& mv = modes[static_cast<size_t>(m)];
      mv.center = cmap_.center(p(m * ppm));
      mv.dcenter = cmap_.derivative(p(m * ppm));
      mv.width = ratio_of(cfg_, m) * kappa;
      if (n_s_ == 1) {
        mv.v = {std::sqrt(std::exp(p(m * ppm + 1)))};
      } else {
        for (int i = 0; i < n_s_; ++i) mv.v.emplace_back(p(m * ppm + 1 + 2 * i), p(m * ppm + 2 + 2 * i));
      }
    }

    int row = 0;
    for (size_t c = 0; c < chans_.size(); ++c) {
      const auto [i, j] = chans_[c];
      const int npts = static_cast<int>(grid_.omega.size());
      for (int k = 0; k < npts; ++k) {
        const double w = grid_.omega[static_cast<size_t>(k)];
        const double sw = std::sqrt(grid_.weight[static_cast<size_t>(k)]);
        std::complex<double> model = 0.0;
        std::complex<double> dlogk = 0.0;
        for (int m = 0; m < n; ++m) {
          const auto& mv = modes[static_cast<size_t>(m)];
          const double h = 0.5 * mv.width;
          const double d = w - mv.center;
          const double den = h * h + d * d;
          const double l = mv.width / den;
          const double dl_dw = mv.width * 2.0 * d / (den * den);
          const double dl_dk = (den - 0.5 * mv.width * mv.width) / (den * den);
          const std::complex<double> coef = mv.v[static_cast<size_t>(i)] * std::conj(mv.v[static_cast<size_t>(j)]);
          model += coef * l;
          dlogk += coef * dl_dk * mv.width;
          if (jac) {
            const int base = m * ppm;
            put(*jac, row, k, npts, i, j, base, coef * dl_dw * mv.dcenter, sw);
            if (n_s_ == 1) {
              put(*jac, row, k, npts, i, j, base + 1, coef * l, sw);
            } else {
              for (int q = 0; q < n_s_; ++q) {
                std::complex<double> dre = 0.0, dim = 0.0;
                if (q == i) {
                  dre += std::conj(mv.v[static_cast<size_t>(j)]);
                  dim += kI * std::conj(mv.v[static_cast<size_t>(j)]);
                }
                if (q == j) {
                  dre += mv.v[static_cast<size_t>(i)];
                  dim += -kI * mv.v[static_cast<size_t>(i)];
                }
                put(*jac, row, k, npts, i, j, base + 1 + 2 * q, dre * l, sw);
                put(*jac, row, k, npts, i, j, base + 2 + 2 * q, dim * l, sw);
              }
            }
          }
        }
        if (i == j) {
          const double bg = 4.0 * rbg_[static_cast<size_t>(i)] * kappa;
          model += bg;
          dlogk += bg;
        }
        if (jac) put(*jac, row, k, npts, i, j, cols_ - 1, dlogk, sw);
        const std::complex<double> diff = model - target_[c][static_cast<size_t>(k)];
        r(row + k) = sw * diff.real();
        if (i != j) r(row + npts + k) = sw * diff.imag();
      }
      row += (i == j ? 1 : 2) * npts;
    }
  }

 private:
  static void put(Eigen::MatrixXd& jac, int row, int k, int npts, int i, int j, int col, std::complex<double> v,
                  double sw) {
    jac(row + k, col) += sw * v.real();
    if (i != j) jac(row + npts + k, col) += sw * v.imag();
  }

  const FitConfig& cfg_;
  int n_s_;
  Grid grid_;
  std::vector<std::pair<int, int>> chans_;
  std::vector<double> rbg_;
  CenterMap cmap_;
  std::vector<std::vector<std::complex<double>>> target_;
  int rows_ = 0;
  int cols_ = 0;
};

}  // namespace

double cost(const LorentzianBath& bath, const MultiChannelTarget& target, double omega_min, double omega_max,
            int grid_points) {
  if (bath.n_s != target.dimension()) throw std::invalid_argument("cost: bath/target dimension mismatch");
  const Grid g = make_grid(omega_min, omega_max, grid_points);
  double c = 0.0;
  for (auto [i, j] : channels(bath.n_s)) {
    for (size_t k = 0; k < g.omega.size(); ++k) {
      const double w = g.omega[k];
      c += g.weight[k] * std::norm(bath.spectral(w, i, j) - target(w, i, j));
    }
  }
  return c;
}

double relative_rms_residual(const LorentzianBath& bath, const MultiChannelTarget& target, double omega_min,
                             double omega_max, int grid_points) {
  const Grid g = make_grid(omega_min, omega_max, grid_points);
  double peak = 0.0;
  const auto chans = channels(bath.n_s);
  for (auto [i, j] : chans)
    for (double w : g.omega) peak = std::max(peak, std::abs(target(w, i, j)));
  if (peak == 0.0) return 0.0;
  const double c = cost(bath, target, omega_min, omega_max, grid_points);
  return std::sqrt(c / ((omega_max - omega_min) * static_cast<double>(chans.size()))) / peak;
}

Eigen::VectorXd initial_guess(const MultiChannelTarget& target, const FitConfig& config) {
  config.validate();
  const int n_s = target.dimension();
  const int ppm = params_per_mode(n_s);
  const int n = config.n;
  Eigen::VectorXd p(n * ppm + 1);

  if (config.initial_guess == InitialGuessKind::UserProvided) {
    const auto& ug = config.user_guess;
    if (static_cast<int>(ug.modes.size()) != n || ug.n_s != n_s)
      throw std::invalid_argument("fit: user guess does not match mode count");
    for (int m = 0; m < n; ++m) {
      const auto& bm = ug.modes[static_cast<size_t>(m)];
      p(m * ppm) = CenterMap(config).param(bm.center);
      if (n_s == 1) {
        p(m * ppm + 1) = std::log(std::max(bm.weight(0), 1e-300));
      } else {
        for (int i = 0; i < n_s; ++i) {
          p(m * ppm + 1 + 2 * i) = bm.couplings[static_cast<size_t>(i)].real();
          p(m * ppm + 2 + 2 * i) = bm.couplings[static_cast<size_t>(i)].imag();
        }
      }
    }
    p(n * ppm) = std::log(ug.modes.front().width / ratio_of(config, 0));
    return p;
  }

  const double width = (config.omega_max - config.omega_min) / n;
  const auto rbg = background_ratios(config, n_s);
  const int sub = 200;
  for (int m = 0; m < n; ++m) {
    const double lo = config.omega_min + m * width;
    const double hi = lo + width;
    p(m * ppm) = CenterMap(config).param(0.5 * (lo + hi));
    for (int i = 0; i < n_s; ++i) {
      const Grid g = make_grid(lo, hi, sub + 1);
      double integral = 0.0;
      for (size_t k = 0; k < g.omega.size(); ++k) integral += g.weight[k] * target(g.omega[k], i, i).real();
      integral -= 4.0 * rbg[static_cast<size_t>(i)] * width * (hi - lo);
      const double floor = 1e-12 * std::max(std::abs(integral), 1e-300);
      const double v2 = std::max(integral, floor) / (2.0 * kPi);
      if (n_s == 1) {
        p(m * ppm + 1) = std::log(std::max(v2, 1e-300));
      } else {
        p(m * ppm + 1 + 2 * i) = std::sqrt(std::max(v2, 0.0));
        p(m * ppm + 2 + 2 * i) = 0.0;
      }
    }
  }
  p(n * ppm) = std::log(width);
  return p;
}

LorentzianBath unpack_parameters(const Eigen::VectorXd& p, const FitConfig& config, int n_s) {
  const int ppm = params_per_mode(n_s);
  const int n = config.n;
  const double kappa = std::exp(p(n * ppm));
  LorentzianBath b;
  b.n_s = n_s;
  for (int m = 0; m < n; ++m) {
    BathMode bm;
    bm.center = CenterMap(config).center(p(m * ppm));
    bm.width = ratio_of(config, m) * kappa;
    bm.slot = m;
    if (n_s == 1) {
      bm.couplings = {std::sqrt(std::exp(p(m * ppm + 1)))};
    } else {
      for (int i = 0; i < n_s; ++i) bm.couplings.emplace_back(p(m * ppm + 1 + 2 * i), p(m * ppm + 2 + 2 * i));
    }
    b.modes.push_back(std::move(bm));
  }
  const auto rbg = background_ratios(config, n_s);
  if (std::any_of(rbg.begin(), rbg.end(), [](double r) { return r != 0.0; })) {
    for (double r : rbg) b.system_rates.push_back(r * kappa);
    if (config.system_ratios.empty()) b.ratio = config.system_ratio;
  }
  std::stable_sort(b.modes.begin(), b.modes.end(),
                   [](const BathMode& a, const BathMode& c) { return a.center < c.center; });
  return b;
}

namespace {

struct LmOutcome {
  Eigen::VectorXd p;
  double cost = 0.0;
  int iterations = 0;
  bool converged = false;
};

LmOutcome levenberg_marquardt(const Problem& prob, Eigen::VectorXd p, const FitConfig& config) {
  Eigen::VectorXd r(prob.rows()), r_try(prob.rows());
  Eigen::MatrixXd jac(prob.rows(), prob.cols());
  prob.evaluate(p, r, nullptr);
  double c = r.squaredNorm();
  const double scale = std::max(prob.scale(), 1e-300);

  double lambda = 1e-3;
  bool converged = false;
  int it = 0;
  for (; it < config.max_iterations && !converged; ++it) {
    if (c <= 1e-28 * scale) {
      converged = true;
      break;
    }
    prob.evaluate(p, r, &jac);
    const Eigen::MatrixXd a = jac.transpose() * jac;
    const Eigen::VectorXd g = jac.transpose() * r;
    const double dmax = std::max(a.diagonal().maxCoeff(), 1e-300);
    bool accepted = false;
    while (!accepted) {
      Eigen::MatrixXd m = a;
      for (int k = 0; k < m.rows(); ++k) m(k, k) += lambda * std::max(a(k, k), 1e-12 * dmax);
      const Eigen::VectorXd step = m.ldlt().solve(-g);
      const Eigen::VectorXd trial = p + step;
      double c_try = std::numeric_limits<double>::infinity();
      if (trial.allFinite()) {
        prob.evaluate(trial, r_try, nullptr);
        c_try = r_try.squaredNorm();
      }
      if (std::isfinite(c_try) && c_try < c) {
        const double decrease = c - c_try;
        p = trial;
        r = r_try;
        c = c_try;
        lambda = std::max(lambda / 3.0, 1e-15);
        accepted = true;
        if (decrease <= config.tolerance * c_try || c <= 1e-28 * scale) converged = true;
      } else {
        lambda *= 4.0;
        if (lambda > 1e16) {
          converged = true;  // no descent direction left at working precision
          break;
        }
      }
    }
  }
  return {p, c, it, converged};
}

}  // namespace

FitResult fit(const MultiChannelTarget& target, const FitConfig& config) {
  config.validate();
  const int n_s = target.dimension();
  Problem prob(target, config);
  const Eigen::VectorXd p0 = initial_guess(target, config);

  // Even-spacing guesses are also tried with shifted centers and rescaled widths.
  std::vector<Eigen::VectorXd> starts{p0};
  if (config.initial_guess == InitialGuessKind::EvenSpacing) {
    const int ppm = params_per_mode(n_s);
    const double spacing = (config.omega_max - config.omega_min) / config.n;
    const CenterMap cm(config);
    for (double shift : {0.0, 0.25, -0.25}) {
      for (double wf : {1.0, 1.5, 2.0, 0.7, 0.3, 0.1}) {
        if (shift == 0.0 && wf == 1.0) continue;
        Eigen::VectorXd q = p0;
        for (int m = 0; m < config.n; ++m) q(m * ppm) = cm.param(cm.center(p0(m * ppm)) + shift * spacing);
        q(config.n * ppm) += std::log(wf);
        starts.push_back(q);
      }
    }
    // Centers on the strongest local maxima of the target.
    if (n_s == 1) {
      const Grid g = make_grid(config.omega_min, config.omega_max, config.grid_points);
      std::vector<std::pair<double, double>> peaks;
      for (size_t k = 1; k + 1 < g.omega.size(); ++k) {
        const double a = target(g.omega[k - 1], 0, 0).real(), b = target(g.omega[k], 0, 0).real(),
                     c = target(g.omega[k + 1], 0, 0).real();
        if (b > a && b >= c) peaks.emplace_back(b, g.omega[k]);
      }
      std::sort(peaks.rbegin(), peaks.rend());
      if (!peaks.empty()) {
        Eigen::VectorXd q = p0;
        for (int m = 0; m < config.n && m < static_cast<int>(peaks.size()); ++m) {
          q(m * ppm) = cm.param(peaks[static_cast<size_t>(m)].second);
          const double v2 = peaks[static_cast<size_t>(m)].first * spacing / 4.0;
          q(m * ppm + 1) = std::log(std::max(v2, 1e-300));
        }
        for (double wf : {1.0, 0.3, 0.1, 0.03}) {
          Eigen::VectorXd r = q;
          r(config.n * ppm) = std::log(spacing * wf);
          for (int m = 0; m < config.n && m < static_cast<int>(peaks.size()); ++m)
            r(m * ppm + 1) = std::log(std::max(peaks[static_cast<size_t>(m)].first * spacing * wf / 4.0, 1e-300));
          starts.push_back(r);
        }
      }
    }
  }
  LmOutcome best;
  best.cost = std::numeric_limits<double>::infinity();
  int total = 0;
  for (const auto& s : starts) {
    LmOutcome o = levenberg_marquardt(prob, s, config);
    total += o.iterations;
    if (o.cost < best.cost) best = std::move(o);
  }
  // Modes whose weight collapsed are moved to the largest remaining deficit and refitted.
  if (n_s == 1) {
    const int ppm = params_per_mode(n_s);
    const CenterMap cm(config);
    for (int round = 0; round < config.n; ++round) {
      double wmax = -std::numeric_limits<double>::infinity();
      for (int m = 0; m < config.n; ++m) wmax = std::max(wmax, best.p(m * ppm + 1));
      int dead = -1;
      for (int m = 0; m < config.n && dead < 0; ++m)
        if (best.p(m * ppm + 1) < wmax + std::log(1e-8)) dead = m;
      if (dead < 0) break;
      const LorentzianBath cur = unpack_parameters(best.p, config, n_s);
      const Grid g = make_grid(config.omega_min, config.omega_max, config.grid_points);
      double gap = 0.0, at = 0.0;
      for (double w : g.omega) {
        const double d = target(w, 0, 0).real() - cur.spectral(w, 0, 0).real();
        if (d > gap) {
          gap = d;
          at = w;
        }
      }
      if (gap <= 0.0) break;
      Eigen::VectorXd q = best.p;
      const double kappa = std::exp(q(config.n * ppm)) * ratio_of(config, dead);
      q(dead * ppm) = cm.param(at);
      q(dead * ppm + 1) = std::log(gap * kappa / 4.0);
      LmOutcome o = levenberg_marquardt(prob, q, config);
      total += o.iterations;
      if (!(o.cost < best.cost * (1.0 - 1e-9))) break;
      best = std::move(o);
    }
  }
  const Eigen::VectorXd& p = best.p;
  const bool converged = best.converged;
  const int it = total;

  FitResult res;
  res.bath = unpack_parameters(p, config, n_s);
  res.cost = cost(res.bath, target, config.omega_min, config.omega_max, config.grid_points);
  res.rms_residual = relative_rms_residual(res.bath, target, config.omega_min, config.omega_max, config.grid_points);
  res.iterations = it;
  res.converged = converged;
  return res;
}

nlohmann::json to_json(const LorentzianBath& bath) {
  nlohmann::json j;
  j["n_s"] = bath.n_s;
  j["system_rates"] = bath.system_rates;
  j["kappa_system"] = bath.system_rate(0);
  if (bath.ratio) j["ratio"] = *bath.ratio;
  j["modes"] = nlohmann::json::array();
  for (const auto& m : bath.modes) {
    nlohmann::json jm;
    jm["center"] = m.center;
    jm["width"] = m.width;
    jm["slot"] = m.slot;
    std::vector<double> re, im;
    for (const auto& v : m.couplings) {
      re.push_back(v.real());
      im.push_back(v.imag());
    }
    jm["coupling_re"] = re;
    jm["coupling_im"] = im;
    j["modes"].push_back(jm);
  }
  return j;
}

LorentzianBath bath_from_json(const nlohmann::json& j) {
  LorentzianBath b;
  b.n_s = j.value("n_s", 1);
  if (j.contains("system_rates")) b.system_rates = j["system_rates"].get<std::vector<double>>();
  if (j.contains("ratio")) b.ratio = j["ratio"].get<double>();
  for (const auto& jm : j.at("modes")) {
    BathMode m;
    m.center = jm.at("center").get<double>();
    m.width = jm.at("width").get<double>();
    m.slot = jm.value("slot", 0);
    const auto re = jm.at("coupling_re").get<std::vector<double>>();
    const auto im = jm.value("coupling_im", std::vector<double>(re.size(), 0.0));
    if (re.size() != static_cast<size_t>(b.n_s) || im.size() != re.size())
      throw std::invalid_argument("bath json: coupling count does not match n_s");
    for (size_t k = 0; k < re.size(); ++k) m.couplings.emplace_back(re[k], im[k]);
    if (!(m.width > 0.0)) throw std::invalid_argument("bath json: widths must be > 0");
    b.modes.push_back(std::move(m));
  }
  return b;
}

nlohmann::json to_json(const FitResult& r) {
  nlohmann::json j;
  j["bath"] = to_json(r.bath);
  j["cost"] = r.cost;
  j["rms_residual"] = r.rms_residual;
  j["iterations"] = r.iterations;
  j["converged"] = r.converged;
  return j;
}

FitResult fit_result_from_json(const nlohmann::json& j) {
  FitResult r;
  r.bath = bath_from_json(j.at("bath"));
  r.cost = j.value("cost", 0.0);
  r.rms_residual = j.value("rms_residual", 0.0);
  r.iterations = j.value("iterations", 0);
  r.converged = j.value("converged", false);
  return r;
}

}  // namespace noisebath
