#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "noisebath/lindblad_oracle.hpp"

namespace noisebath {

enum class WindowFn { None, Hann };

// FFT ordering: bin k holds 2 pi k / (m tau) for k < m/2 and 2 pi (k - m) / (m tau) above.
struct Spectrum {
  std::vector<double> omega;
  std::vector<double> power;
  double resolution = 0.0;
};

Spectrum power_spectrum(const std::vector<double>& t, const std::vector<double>& x, WindowFn w = WindowFn::None);
Spectrum power_spectrum(const Trajectory& tr, const std::string& column, WindowFn w = WindowFn::None);

struct Peak {
  double omega = 0.0;
  double power = 0.0;
};

// Local maxima at omega >= 0 whose topographic prominence is at least
// min_prominence * max power, strongest first.
std::vector<Peak> find_peaks(const Spectrum& s, double min_prominence = 0.05);

struct ErrorBudget {
  int n = 1;
  int N = 1;
  double epsilon = 0.0;
  int D0 = 1;
  double omega_c = 0.0;
  double tau_omega_c = 0.0;  // n^2 N eps D0
  double tau = 0.0;
  double kappa = 0.0;        // omega_c / n
  int depth = 0;             // n N D0
  double v_tau = 0.0;
  double delta_tau = 0.0;
  double gaussianity = 0.0;  // 1 / N
};

ErrorBudget error_budget(int n, int N, double eps, int D0, double omega_c, double v = 0.0, double delta = 0.0);

struct GaussianityResult {
  // <sum s+ sum s-> / N as the exact fraction num / den
  std::int64_t num = 0;
  std::int64_t den = 1;
  double collective = 0.0;
  double bosonic = 0.0;
  double error = 0.0;
};

// Evaluated on the symmetric N-spin state with s excitations.
GaussianityResult gaussianity_check(int N, int s);

struct WindowAverage {
  double value = 0.0;
  double drift = 0.0;  // |mean(first half of tail) - mean(second half)|
  double range = 0.0;  // max - min over the whole series
};

// Throws std::runtime_error when drift exceeds drift_tol * range.
WindowAverage steady_window_average(const std::vector<double>& x, double tail_fraction = 0.2, double drift_tol = 0.01);
WindowAverage steady_window_average(const Trajectory& tr, const std::string& column, double tail_fraction = 0.2,
                                    double drift_tol = 0.01);

std::string spectrum_csv(const Spectrum& s);
void write_spectrum_csv(const Spectrum& s, const std::string& path);
nlohmann::json peaks_to_json(const std::vector<Peak>& peaks);

}  // namespace noisebath
