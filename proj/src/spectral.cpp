#include "noisebath/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "noisebath/linalg.hpp"

namespace noisebath {

namespace {

void require_finite(double x, const char* what) {
  if (!std::isfinite(x)) throw std::invalid_argument(std::string(what) + " must be finite");
}

double lorentzian(double omega, double center, double width) {
  const double h = 0.5 * width;
  const double d = omega - center;
  return width / (h * h + d * d);
}

}  // namespace

double thermal_factor(double omega, Temperature t) {
  require_finite(omega, "omega");
  if (t.value < 0.0 || !std::isfinite(t.value)) throw std::invalid_argument("temperature must be >= 0");
  if (t.is_zero()) return omega > 0.0 ? omega : 0.0;
  const double x = omega / t.value;
  if (std::abs(x) < 1e-7) return t.value * (1.0 + 0.5 * x + x * x / 12.0);
  return omega / (-std::expm1(-x));
}

double eval_ohmic(double omega, double alpha, Temperature t, double cutoff) {
  require_finite(alpha, "alpha");
  require_finite(cutoff, "cutoff");
  if (alpha < 0.0) throw std::invalid_argument("alpha must be >= 0");
  if (cutoff <= 0.0) throw std::invalid_argument("cutoff must be > 0");
  return 4.0 * kPi * alpha * thermal_factor(omega, t) * std::exp(-std::abs(omega) / cutoff);
}

double eval_lorentzian_sum(double omega, const LorentzianSum& bath) {
  require_finite(omega, "omega");
  double s = bath.background;
  for (const auto& m : bath.modes) s += m.weight * lorentzian(omega, m.center, m.width);
  return s;
}

double eval_set_target(double omega, const SetStructured& p) {
  require_finite(omega, "omega");
  if (p.alpha < 0.0 || p.width <= 0.0 || p.cutoff <= 0.0) throw std::invalid_argument("invalid structured target");
  const double thermal = p.alpha * thermal_factor(omega, p.temperature);
  const double peaks = lorentzian(omega, p.omega0, p.width) + lorentzian(omega, p.second_resonance(), p.width);
  const double r = omega / p.cutoff;
  return thermal * peaks / (2.0 * kPi) / (1.0 + r * r * r * r);
}

double eval_tabulated(double omega, const Tabulated& tab) {
  require_finite(omega, "omega");
  const auto& g = tab.grid;
  if (g.size() < 2) throw std::invalid_argument("tabulated target needs at least two samples");
  if (omega < g.front() || omega > g.back()) throw std::out_of_range("omega outside tabulated grid");
  auto it = std::upper_bound(g.begin(), g.end(), omega);
  size_t hi = static_cast<size_t>(it - g.begin());
  if (hi >= g.size()) hi = g.size() - 1;
  const size_t lo = hi - 1;
  const double f = (omega - g[lo]) / (g[hi] - g[lo]);
  return (1.0 - f) * tab.values[lo] + f * tab.values[hi];
}

double evaluate(const SpectralTarget& target, double omega) {
  return std::visit(
      [omega](const auto& t) -> double {
        using T = std::decay_t<decltype(t)>;
        if constexpr (std::is_same_v<T, LorentzianSum>) return eval_lorentzian_sum(omega, t);
        else if constexpr (std::is_same_v<T, OhmicExpCutoff>) return eval_ohmic(omega, t.alpha, t.temperature, t.cutoff);
        else if constexpr (std::is_same_v<T, SetStructured>) return eval_set_target(omega, t);
        else return eval_tabulated(omega, t);
      },
      target);
}

void validate(const SpectralTarget& target) {
  std::visit(
      [](const auto& t) {
        using T = std::decay_t<decltype(t)>;
        if constexpr (std::is_same_v<T, LorentzianSum>) {
          for (const auto& m : t.modes) {
            if (!(m.width > 0.0)) throw std::invalid_argument("Lorentzian widths must be > 0");
            if (m.weight < 0.0) throw std::invalid_argument("Lorentzian weights must be >= 0");
          }
          if (t.background < 0.0) throw std::invalid_argument("background must be >= 0");
        } else if constexpr (std::is_same_v<T, OhmicExpCutoff>) {
          if (t.alpha < 0.0 || t.temperature.value < 0.0 || t.cutoff <= 0.0)
            throw std::invalid_argument("invalid ohmic parameters");
        } else if constexpr (std::is_same_v<T, SetStructured>) {
          if (t.alpha < 0.0 || t.temperature.value < 0.0 || t.cutoff <= 0.0 || t.width <= 0.0)
            throw std::invalid_argument("invalid structured parameters");
        } else {
          if (t.grid.size() != t.values.size() || t.grid.size() < 2)
            throw std::invalid_argument("tabulated grid/values mismatch");
          for (size_t k = 1; k < t.grid.size(); ++k)
            if (!(t.grid[k] > t.grid[k - 1])) throw std::invalid_argument("tabulated grid must increase strictly");
          for (double v : t.values)
            if (v < 0.0) throw std::invalid_argument("tabulated values must be >= 0");
        }
      },
      target);
}

bool is_thermal(const SpectralTarget& target) {
  return std::holds_alternative<OhmicExpCutoff>(target) || std::holds_alternative<SetStructured>(target);
}

Temperature temperature_of(const SpectralTarget& target) {
  if (auto* o = std::get_if<OhmicExpCutoff>(&target)) return o->temperature;
  if (auto* s = std::get_if<SetStructured>(&target)) return s->temperature;
  throw std::invalid_argument("target has no temperature");
}

Tabulated load_tabulated_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  Tabulated tab;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ss(line);
    double w = 0.0, s = 0.0;
    if (!(ss >> w >> s)) {
      if (tab.grid.empty()) continue;  // header
      throw std::runtime_error("malformed row in " + path + ": " + line);
    }
    tab.grid.push_back(w);
    tab.values.push_back(s);
  }
  validate(SpectralTarget{tab});
  return tab;
}

MultiChannelTarget::MultiChannelTarget(int n_s) : n_s_(n_s) {
  if (n_s < 1) throw std::invalid_argument("n_s must be >= 1");
}

MultiChannelTarget MultiChannelTarget::scalar(const SpectralTarget& target) {
  MultiChannelTarget m(1);
  m.set(0, 0, target);
  return m;
}

void MultiChannelTarget::set(int i, int j, ChannelFunction f) {
  if (i < 0 || j < 0 || i >= n_s_ || j >= n_s_) throw std::out_of_range("channel index out of range");
  if (i > j) {
    entries_[{j, i}] = [g = std::move(f)](double w) { return std::conj(g(w)); };
  } else {
    entries_[{i, j}] = std::move(f);
  }
}

void MultiChannelTarget::set(int i, int j, const SpectralTarget& target) {
  validate(target);
  set(i, j, ChannelFunction([target](double w) { return std::complex<double>(evaluate(target, w), 0.0); }));
}

bool MultiChannelTarget::has(int i, int j) const {
  if (i > j) std::swap(i, j);
  return entries_.count({i, j}) > 0;
}

std::complex<double> MultiChannelTarget::operator()(double omega, int i, int j) const {
  if (i < 0 || j < 0 || i >= n_s_ || j >= n_s_) throw std::out_of_range("channel index out of range");
  const bool flip = i > j;
  if (flip) std::swap(i, j);
  auto it = entries_.find({i, j});
  if (it == entries_.end()) return {0.0, 0.0};
  const std::complex<double> v = it->second(omega);
  return flip ? std::conj(v) : v;
}

std::complex<double> eval_multichannel(double omega, const MultiChannelTarget& target, int i, int j) {
  return target(omega, i, j);
}

}  // namespace noisebath
