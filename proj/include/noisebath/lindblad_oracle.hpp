#pragma once

#include <string>
#include <vector>

#include "noisebath/coarse_grain.hpp"
#include "noisebath/linalg.hpp"
#include "noisebath/spin_model.hpp"

namespace noisebath {

struct CollapseTerm {
  SpMat op;
  double rate = 0.0;
  std::string label;
};

// d rho/dt = -i[H, rho] + sum_k r_k (L_k rho L_k^+ - {L_k^+ L_k, rho}/2)
struct LindbladSpec {
  SpMat H;
  std::vector<CollapseTerm> collapse;
  std::vector<int> dims;  // subsystem dimensions, site 0 least significant

  int dim() const { return static_cast<int>(H.rows()); }
  void validate() const;
};

struct Observable {
  std::string name;
  SpMat op;
};

struct CptpLog {
  double max_trace_error = 0.0;
  double max_hermiticity_error = 0.0;
  double min_eigenvalue = 1.0;
  int checks = 0;
  void merge(const CptpLog& o);
};

struct Trajectory {
  std::vector<double> t;
  std::vector<std::string> names;
  std::vector<std::vector<double>> values;  // values[k][obs]
  std::vector<Mat> states;                  // optional
  CptpLog cptp;

  std::vector<double> column(const std::string& name) const;
  std::vector<double> column(size_t i) const;
  void write_csv(const std::string& path) const;
  std::string to_csv() const;
  static Trajectory read_csv(const std::string& path);
};

struct IntegrateOptions {
  int substeps = 0;              // RK4 steps per output interval; 0 picks the smallest stable count
  double stability_bound = 0.1;  // dt * spectral radius of the non-diagonal part
  bool store_states = false;
  int positivity_every = 10;     // outputs between eigenvalue checks
  double trace_tol = 1e-8;
  double hermiticity_tol = 1e-10;
  double positivity_tol = -1e-6;
};

LindbladSpec build_spin_lindblad(const SpinBathModel& model);
LindbladSpec build_boson_lindblad(const LorentzianBath& bath, const SystemSpec& system, int n_max);
LindbladSpec build_boson_lindblad(const LorentzianBath& bath, const SystemSpec& system, const std::vector<int>& n_max);

// L[rho]
Mat lindblad_apply(const LindbladSpec& spec, const Mat& rho);

// Spectral radius estimate of the part of L not absorbed into the exact diagonal factor.
double stiff_radius(const LindbladSpec& spec);

// Samples every dt_out from 0 to t_end (inclusive).
Trajectory integrate(const LindbladSpec& spec, const Mat& rho0, double t_end, double dt_out,
                     const std::vector<Observable>& observables, const IntegrateOptions& opt = {});

struct SteadyStateOptions {
  double tolerance = 1e-8;   // entrywise l1 norm of L[rho]
  double dt = 0.0;           // 0 picks a stable step
  double max_time = 1e6;
  double check_every = 5.0;  // time between residual checks
};

struct SteadyStateResult {
  Mat rho;
  double residual = 0.0;
  double time = 0.0;
  bool converged = false;
  CptpLog cptp;
};

SteadyStateResult steady_state(const LindbladSpec& spec, const Mat& rho0, const SteadyStateOptions& opt = {});

// Checks trace, Hermiticity and (optionally) positivity.
CptpLog check_density_matrix(const Mat& rho, bool positivity = true);

double expectation(const SpMat& op, const Mat& rho);

// Pure product state: system qubits in the given single-qubit states, everything else in |0>.
Mat product_state(const std::vector<int>& dims, const std::vector<std::pair<int, Vec>>& sites);
Vec plus_x_state();

// Operator on one site of a tensor product.
inline SpMat site_op(const Mat& op, int site, const std::vector<int>& dims) { return embed(op, site, dims); }

Mat boson_annihilation(int n_max);

}  // namespace noisebath
