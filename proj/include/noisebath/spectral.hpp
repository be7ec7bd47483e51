#pragma once

#include <complex>
#include <functional>
#include <map>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace noisebath {

// Temperature in angular-frequency units. value == 0 means the zero-temperature limit.
struct Temperature {
  double value = 0.0;
  static Temperature zero_temperature() { return Temperature{0.0}; }
  bool is_zero() const { return value == 0.0; }
};

struct LorentzMode {
  double weight = 0.0;  // v^2
  double center = 0.0;  // omega_i
  double width = 1.0;   // kappa_i
};

struct LorentzianSum {
  std::vector<LorentzMode> modes;
  double background = 0.0;  // 4 * kappa_system
};

struct OhmicExpCutoff {
  double alpha = 0.0;
  Temperature temperature;
  double cutoff = 1.0;
};

struct SetStructured {
  double alpha = 0.25;
  double omega0 = 1.0;
  double width = 0.4;  // kappa'
  Temperature temperature{0.3};
  double cutoff = 1.7320508075688772;
  // Second resonance; defaults to 2 * omega0 when left at zero.
  double omega1 = 0.0;
  double second_resonance() const { return omega1 != 0.0 ? omega1 : 2.0 * omega0; }
};

struct Tabulated {
  std::vector<double> grid;
  std::vector<double> values;
};

using SpectralTarget = std::variant<LorentzianSum, OhmicExpCutoff, SetStructured, Tabulated>;

// omega / (1 - exp(-omega/T)), with the analytic branch near omega = 0.
double thermal_factor(double omega, Temperature t);

double eval_ohmic(double omega, double alpha, Temperature t, double cutoff);
double eval_lorentzian_sum(double omega, const LorentzianSum& bath);
double eval_set_target(double omega, const SetStructured& p);
double eval_tabulated(double omega, const Tabulated& tab);
double evaluate(const SpectralTarget& target, double omega);

// Throws std::invalid_argument when a variant violates its invariants.
void validate(const SpectralTarget& target);

// True for variants that carry a temperature (ohmic and structured).
bool is_thermal(const SpectralTarget& target);
Temperature temperature_of(const SpectralTarget& target);

Tabulated load_tabulated_csv(const std::string& path);

using ChannelFunction = std::function<std::complex<double>(double)>;

// Matrix-valued target S_ij(omega). Only i <= j entries are stored.
class MultiChannelTarget {
 public:
  explicit MultiChannelTarget(int n_s = 1);
  static MultiChannelTarget scalar(const SpectralTarget& target);

  int dimension() const { return n_s_; }
  void set(int i, int j, ChannelFunction f);
  void set(int i, int j, const SpectralTarget& target);
  bool has(int i, int j) const;
  std::complex<double> operator()(double omega, int i, int j) const;

 private:
  int n_s_;
  std::map<std::pair<int, int>, ChannelFunction> entries_;
};

std::complex<double> eval_multichannel(double omega, const MultiChannelTarget& target, int i, int j);

}  // namespace noisebath
