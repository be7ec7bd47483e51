#include "noisebath/linalg.hpp"

#include <stdexcept>

#include <unsupported/Eigen/KroneckerProduct>

namespace noisebath {

Mat pauli_i() { return Mat::Identity(2, 2); }

Mat pauli_x() {
  Mat m = Mat::Zero(2, 2);
  m(0, 1) = 1.0;
  m(1, 0) = 1.0;
  return m;
}

Mat pauli_y() {
  Mat m = Mat::Zero(2, 2);
  m(0, 1) = -kI;
  m(1, 0) = kI;
  return m;
}

Mat pauli_z() {
  Mat m = Mat::Zero(2, 2);
  m(0, 0) = 1.0;
  m(1, 1) = -1.0;
  return m;
}

Mat sigma_minus() {
  Mat m = Mat::Zero(2, 2);
  m(0, 1) = 1.0;
  return m;
}

Mat sigma_plus() {
  Mat m = Mat::Zero(2, 2);
  m(1, 0) = 1.0;
  return m;
}

SpMat embed(const Mat& op, int site, const std::vector<int>& dims) {
  if (site < 0 || site >= static_cast<int>(dims.size())) throw std::out_of_range("embed: site out of range");
  const int ds = dims[static_cast<size_t>(site)];
  if (op.rows() != ds || op.cols() != ds) throw std::invalid_argument("embed: operator dimension mismatch");
  long stride = 1;
  for (int k = 0; k < site; ++k) stride *= dims[static_cast<size_t>(k)];
  long total = 1;
  for (int x : dims) total *= x;
  const long block = stride * ds;

  std::vector<Eigen::Triplet<cplx>> trips;
  for (long base = 0; base < total; base += block) {
    for (long low = 0; low < stride; ++low) {
      for (int r = 0; r < ds; ++r) {
        for (int c = 0; c < ds; ++c) {
          const cplx v = op(r, c);
          if (v == cplx(0.0)) continue;
          trips.emplace_back(base + low + r * stride, base + low + c * stride, v);
        }
      }
    }
  }
  SpMat out(total, total);
  out.setFromTriplets(trips.begin(), trips.end());
  return out;
}

SpMat embed2(const Mat& op4, int q0, int q1, int n) {
  if (q0 == q1 || q0 < 0 || q1 < 0 || q0 >= n || q1 >= n) throw std::out_of_range("embed2: bad qubits");
  const long d = 1L << n;
  const long m0 = 1L << q0, m1 = 1L << q1;
  std::vector<Eigen::Triplet<cplx>> trips;
  for (long a = 0; a < d; ++a) {
    if (a & (m0 | m1)) continue;
    for (int r = 0; r < 4; ++r) {
      const long row = a | ((r & 1) ? m0 : 0) | ((r & 2) ? m1 : 0);
      for (int c = 0; c < 4; ++c) {
        const cplx v = op4(r, c);
        if (v == cplx(0.0)) continue;
        const long col = a | ((c & 1) ? m0 : 0) | ((c & 2) ? m1 : 0);
        trips.emplace_back(row, col, v);
      }
    }
  }
  SpMat out(d, d);
  out.setFromTriplets(trips.begin(), trips.end());
  return out;
}

SpMat sparse_identity(int d) {
  SpMat id(d, d);
  id.setIdentity();
  return id;
}

double phase_aligned_distance(const Mat& a, const Mat& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw std::invalid_argument("phase_aligned_distance: shape");
  Eigen::Index r = 0, c = 0;
  b.cwiseAbs().maxCoeff(&r, &c);
  cplx phase(1.0, 0.0);
  if (std::abs(a(r, c)) > 0.0 && std::abs(b(r, c)) > 0.0) {
    phase = (b(r, c) / a(r, c));
    phase /= std::abs(phase);
  }
  return (a * phase - b).cwiseAbs().maxCoeff();
}

Mat left_right_superop(const Mat& a, const Mat& b) {
  return Eigen::kroneckerProduct(Mat(b.transpose()), a).eval();
}

Mat commutator_superop(const Mat& h) {
  const Mat id = Mat::Identity(h.rows(), h.cols());
  return (-kI) * (left_right_superop(h, id) - left_right_superop(id, h));
}

Mat dissipator_superop(const Mat& l) {
  const Mat id = Mat::Identity(l.rows(), l.cols());
  const Mat ldl = l.adjoint() * l;
  return left_right_superop(l, l.adjoint()) - 0.5 * left_right_superop(ldl, id) - 0.5 * left_right_superop(id, ldl);
}

Mat unvec(const Vec& v, int d) {
  Mat m(d, d);
  for (int c = 0; c < d; ++c)
    for (int r = 0; r < d; ++r) m(r, c) = v(static_cast<Eigen::Index>(c) * d + r);
  return m;
}

Vec vec(const Mat& m) {
  const auto d = m.rows();
  Vec v(m.size());
  for (Eigen::Index c = 0; c < m.cols(); ++c)
    for (Eigen::Index r = 0; r < d; ++r) v(c * d + r) = m(r, c);
  return v;
}

double min_eigenvalue(const Mat& rho) {
  const Mat herm = 0.5 * (rho + rho.adjoint());
  Eigen::SelfAdjointEigenSolver<Mat> es(herm, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

}  // namespace noisebath
