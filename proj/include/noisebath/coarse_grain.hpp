#pragma once

#include <complex>
#include <optional>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "noisebath/spectral.hpp"

namespace noisebath {

struct BathMode {
  std::vector<std::complex<double>> couplings;  // v_im, one per system spin
  double center = 0.0;
  double width = 1.0;
  int slot = 0;  // position in the fit's width-ratio list

  double weight(int i = 0) const { return std::norm(couplings.at(static_cast<size_t>(i))); }
};

struct LorentzianBath {
  int n_s = 1;
  std::vector<BathMode> modes;
  std::vector<double> system_rates;  // kappa_system per system spin (empty = zero)
  std::optional<double> ratio;       // r, when the background is tied to the width scale

  double system_rate(int i = 0) const;
  // Model spectral function S_ij including the diagonal background 4*kappa_system.
  std::complex<double> spectral(double omega, int i, int j) const;
  LorentzianSum to_lorentzian_sum(int channel = 0) const;
  static LorentzianBath single(const std::vector<LorentzMode>& modes, double system_rate = 0.0);
};

enum class WidthConstraint { Homogeneous, FixedRatios };
enum class InitialGuessKind { EvenSpacing, UserProvided };

struct FitConfig {
  int n = 1;
  double omega_min = -1.0;
  double omega_max = 1.0;
  WidthConstraint width_constraint = WidthConstraint::Homogeneous;
  std::vector<double> width_ratios;        // rho_i for FixedRatios
  std::optional<double> system_ratio;      // r
  std::vector<double> system_ratios;       // r_j per system spin (overrides system_ratio)
  int grid_points = 2001;
  InitialGuessKind initial_guess = InitialGuessKind::EvenSpacing;
  LorentzianBath user_guess;
  int max_iterations = 500;
  double tolerance = 1e-12;

  void validate() const;
};

struct FitResult {
  LorentzianBath bath;
  double cost = 0.0;
  double rms_residual = 0.0;
  int iterations = 0;
  bool converged = false;
};

double cost(const LorentzianBath& bath, const MultiChannelTarget& target, double omega_min, double omega_max,
            int grid_points = 2001);

// Parameter layout per mode: u with omega = mid + L tanh(u) (window length L), then log(v^2) for one system spin or
// (Re v_j, Im v_j) pairs for several; the last entry is log(kappa).
Eigen::VectorXd initial_guess(const MultiChannelTarget& target, const FitConfig& config);
LorentzianBath unpack_parameters(const Eigen::VectorXd& p, const FitConfig& config, int n_s);

FitResult fit(const MultiChannelTarget& target, const FitConfig& config);

// rms of |S_model - S_target| over the window divided by the peak |S_target|.
double relative_rms_residual(const LorentzianBath& bath, const MultiChannelTarget& target, double omega_min,
                             double omega_max, int grid_points);

nlohmann::json to_json(const LorentzianBath& bath);
LorentzianBath bath_from_json(const nlohmann::json& j);
nlohmann::json to_json(const FitResult& r);
FitResult fit_result_from_json(const nlohmann::json& j);

}  // namespace noisebath
