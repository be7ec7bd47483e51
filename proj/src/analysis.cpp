#include "noisebath/analysis.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <unsupported/Eigen/FFT>

namespace noisebath {

Spectrum power_spectrum(const std::vector<double>& t, const std::vector<double>& x, WindowFn w) {
  const size_t m = x.size();
  if (m < 8) throw std::invalid_argument("power spectrum needs at least 8 samples");
  if (t.size() != m) throw std::invalid_argument("time and value lengths differ");
  const double tau = t[1] - t[0];
  if (!(tau > 0.0)) throw std::invalid_argument("time grid must increase");
  for (size_t k = 1; k < m; ++k)
    if (std::abs((t[k] - t[k - 1]) - tau) > 1e-9 * std::max(1.0, std::abs(t[k])))
      throw std::invalid_argument("time grid must be uniform");

  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(m);
  double scale = 0.0;
  for (double v : x) scale = std::max(scale, std::abs(v));
  // deviations at round-off level of the mean are not resolvable
  const double floor = 8.0 * std::numeric_limits<double>::epsilon() * scale;
  std::vector<double> y(m);
  for (size_t k = 0; k < m; ++k) {
    double wk = 1.0;
    if (w == WindowFn::Hann) wk = 0.5 - 0.5 * std::cos(2.0 * kPi * static_cast<double>(k) / static_cast<double>(m - 1));
    const double dx = x[k] - mean;
    y[k] = std::abs(dx) <= floor ? 0.0 : dx * wk;
  }
  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> f;
  fft.fwd(f, y);

  Spectrum s;
  s.resolution = 2.0 * kPi / (static_cast<double>(m) * tau);
  s.omega.resize(m);
  s.power.resize(m);
  for (size_t k = 0; k < m; ++k) {
    const long kk = k < (m + 1) / 2 ? static_cast<long>(k) : static_cast<long>(k) - static_cast<long>(m);
    s.omega[k] = s.resolution * static_cast<double>(kk);
    s.power[k] = std::norm(f[k]);
  }
  return s;
}

Spectrum power_spectrum(const Trajectory& tr, const std::string& column, WindowFn w) {
  return power_spectrum(tr.t, tr.column(column), w);
}

std::vector<Peak> find_peaks(const Spectrum& s, double min_prominence) {
  std::vector<std::pair<double, double>> pos;
  for (size_t k = 0; k < s.omega.size(); ++k)
    if (s.omega[k] >= 0.0) pos.emplace_back(s.omega[k], s.power[k]);
  std::sort(pos.begin(), pos.end());
  std::vector<Peak> out;
  if (pos.size() < 2) return out;
  double pmax = 0.0;
  for (const auto& p : pos) pmax = std::max(pmax, p.second);
  if (pmax <= 0.0) return out;
  const double need = min_prominence * pmax;
  const size_t n = pos.size();
  for (size_t k = 0; k < n; ++k) {
    const double p = pos[k].second;
    const bool left_ok = k == 0 || p > pos[k - 1].second;
    const bool right_ok = k + 1 == n || p >= pos[k + 1].second;
    if (!left_ok || !right_ok) continue;
    if (k + 1 < n && p == pos[k + 1].second) {
      // plateau: keep it only if it eventually descends
      size_t j = k + 1;
      while (j < n && pos[j].second == p) ++j;
      if (j < n && pos[j].second > p) continue;
    }
    // Walk outwards until a higher point or the edge; the higher of the two minima sets the base.
    double lmin = p, rmin = p;
    size_t j = k;
    while (j > 0 && pos[j - 1].second <= p) lmin = std::min(lmin, pos[--j].second);
    j = k;
    while (j + 1 < n && pos[j + 1].second <= p) rmin = std::min(rmin, pos[++j].second);
    const double base = std::max(k == 0 ? rmin : lmin, k + 1 == n ? lmin : rmin);
    if (p - base >= need && p - base > 0.0) out.push_back({pos[k].first, p});
  }
  std::sort(out.begin(), out.end(), [](const Peak& a, const Peak& b) { return a.power > b.power; });
  return out;
}

ErrorBudget error_budget(int n, int N, double eps, int D0, double omega_c, double v, double delta) {
  if (n <= 0 || N <= 0 || D0 <= 0 || !(eps > 0.0) || !(omega_c > 0.0))
    throw std::invalid_argument("error budget inputs must be > 0");
  ErrorBudget b;
  b.n = n;
  b.N = N;
  b.epsilon = eps;
  b.D0 = D0;
  b.omega_c = omega_c;
  b.tau_omega_c = static_cast<double>(n) * n * N * D0 * eps;
  b.tau = b.tau_omega_c / omega_c;
  b.kappa = omega_c / n;
  b.depth = n * N * D0;
  b.v_tau = v * b.tau;
  b.delta_tau = delta * b.tau;
  b.gaussianity = 1.0 / N;
  return b;
}

GaussianityResult gaussianity_check(int N, int s) {
  if (N < 1 || N > 20) throw std::invalid_argument("N must lie in [1, 20]");
  if (s < 0 || s > N) throw std::invalid_argument("s must lie in [0, N]");
  // Dicke state: uniform superposition of the C(N, s) strings with s ones.
  // S- maps it to sum_y c_y |y>, c_y = number of parents of y.
  const std::uint32_t full = 1u << N;
  std::int64_t states = 0;
  std::vector<std::int64_t> c(full, 0);
  for (std::uint32_t x = 0; x < full; ++x) {
    if (std::popcount(x) != s) continue;
    ++states;
    for (int q = 0; q < N; ++q)
      if (x & (1u << q)) ++c[x & ~(1u << q)];
  }
  std::int64_t num = 0;
  for (auto v : c) num += v * v;
  GaussianityResult r;
  std::int64_t den = states * N;
  const std::int64_t g = std::gcd(num, den);
  r.num = num / (g ? g : 1);
  r.den = den / (g ? g : 1);
  r.collective = static_cast<double>(r.num) / static_cast<double>(r.den);
  r.bosonic = s;
  r.error = r.collective - r.bosonic;
  return r;
}

WindowAverage steady_window_average(const std::vector<double>& x, double tail_fraction, double drift_tol) {
  if (x.empty()) throw std::invalid_argument("empty series");
  if (!(tail_fraction > 0.0 && tail_fraction <= 1.0)) throw std::invalid_argument("tail fraction must lie in (0, 1]");
  const size_t n = x.size();
  const size_t len = std::max<size_t>(2, static_cast<size_t>(std::ceil(tail_fraction * static_cast<double>(n))));
  const size_t start = n >= len ? n - len : 0;
  const size_t mid = start + (n - start) / 2;
  auto mean = [&](size_t a, size_t b) {
    return b > a ? std::accumulate(x.begin() + static_cast<long>(a), x.begin() + static_cast<long>(b), 0.0) /
                       static_cast<double>(b - a)
                 : x[a];
  };
  WindowAverage w;
  w.value = mean(start, n);
  w.drift = n - start >= 2 ? std::abs(mean(start, mid) - mean(mid, n)) : 0.0;
  const auto [lo, hi] = std::minmax_element(x.begin(), x.end());
  w.range = *hi - *lo;
  if (w.drift > drift_tol * w.range) {
    std::ostringstream os;
    os << "series not settled: tail drift " << w.drift << " exceeds " << drift_tol << " of range " << w.range;
    throw std::runtime_error(os.str());
  }
  return w;
}

WindowAverage steady_window_average(const Trajectory& tr, const std::string& column, double tail_fraction,
                                    double drift_tol) {
  return steady_window_average(tr.column(column), tail_fraction, drift_tol);
}

std::string spectrum_csv(const Spectrum& s) {
  std::vector<size_t> order(s.omega.size());
  std::iota(order.begin(), order.end(), size_t{0});
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) { return s.omega[a] < s.omega[b]; });
  std::ostringstream os;
  os << std::setprecision(17) << "omega,power\n";
  for (size_t k : order) os << s.omega[k] << ',' << s.power[k] << '\n';
  return os.str();
}

void write_spectrum_csv(const Spectrum& s, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << spectrum_csv(s);
}

nlohmann::json peaks_to_json(const std::vector<Peak>& peaks) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& p : peaks) j.push_back({{"omega", p.omega}, {"power", p.power}});
  return j;
}

}  // namespace noisebath
