#pragma once

#include <complex>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace noisebath {

using cplx = std::complex<double>;
using Mat = Eigen::MatrixXcd;
using Vec = Eigen::VectorXcd;
using SpMat = Eigen::SparseMatrix<cplx, Eigen::RowMajor>;

constexpr double kPi = 3.14159265358979323846;
constexpr cplx kI{0.0, 1.0};

// Single-qubit operators. |0> is the ground state: sigma_z = diag(1, -1),
// sigma_minus = |0><1|.
Mat pauli_i();
Mat pauli_x();
Mat pauli_y();
Mat pauli_z();
Mat sigma_minus();
Mat sigma_plus();

// Operator on one subsystem of a tensor product with local dimensions dims.
// Subsystem 0 is the least significant digit of the basis index.
SpMat embed(const Mat& op, int site, const std::vector<int>& dims);

// Two-qubit operator (4x4, basis index b0 + 2*b1) on qubits q0, q1 of n.
SpMat embed2(const Mat& op4, int q0, int q1, int n);

inline std::vector<int> qubit_dims(int n) { return std::vector<int>(static_cast<size_t>(n), 2); }

inline SpMat embed_qubit(const Mat& op, int q, int n) { return embed(op, q, qubit_dims(n)); }

SpMat sparse_identity(int d);

// Max-entry distance between a and b after removing the global phase,
// aligned on the largest-magnitude entry of b.
double phase_aligned_distance(const Mat& a, const Mat& b);

// Column-stacking superoperators: vec(A X B) = (B^T kron A) vec(X).
Mat left_right_superop(const Mat& a, const Mat& b);
Mat commutator_superop(const Mat& h);
Mat dissipator_superop(const Mat& l);

Mat unvec(const Vec& v, int d);
Vec vec(const Mat& m);

// Smallest eigenvalue of the Hermitian part of rho.
double min_eigenvalue(const Mat& rho);

}  // namespace noisebath
