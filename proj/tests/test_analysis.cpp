#include <doctest.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <complex>
#include <numeric>
#include <random>

#include "noisebath/analysis.hpp"

using namespace noisebath;

namespace {

std::vector<double> grid(size_t m, double tau) {
  std::vector<double> t(m);
  for (size_t k = 0; k < m; ++k) t[k] = tau * static_cast<double>(k);
  return t;
}

// <S+ S-> / N on the Dicke state, built as a dense 2^N vector and matrix.
double dense_dicke(int N, int s) {
  const int d = 1 << N;
  Vec psi = Vec::Zero(d);
  for (int x = 0; x < d; ++x)
    if (std::popcount(static_cast<unsigned>(x)) == s) psi(x) = 1.0;
  psi.normalize();
  Mat sm = Mat::Zero(d, d);
  for (int x = 0; x < d; ++x)
    for (int q = 0; q < N; ++q)
      if (x & (1 << q)) sm(x & ~(1 << q), x) += 1.0;
  const Mat n = sm.adjoint() * sm;
  return (psi.adjoint() * n * psi)(0, 0).real() / N;
}

}  // namespace

TEST_CASE("cosine gives a single peak within one bin") {
  const size_t m = 400;
  const double tau = 0.05;
  const auto t = grid(m, tau);
  const double w0 = 3.3;
  std::vector<double> x(m);
  for (size_t k = 0; k < m; ++k) x[k] = std::cos(w0 * t[k]);
  const auto s = power_spectrum(t, x);
  CHECK(s.resolution == doctest::Approx(2.0 * kPi / (m * tau)));
  const auto p = find_peaks(s, 0.2);
  REQUIRE(p.size() == 1);
  CHECK(std::abs(p[0].omega - w0) <= s.resolution);
}

TEST_CASE("periodogram matches a direct DFT and obeys Parseval") {
  std::mt19937 rng(11);
  std::normal_distribution<double> nd;
  const size_t m = 97;
  const auto t = grid(m, 0.3);
  std::vector<double> x(m);
  for (auto& v : x) v = nd(rng) + 2.0;
  const auto s = power_spectrum(t, x);
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / m;
  double e = 0.0;
  for (double v : x) e += (v - mean) * (v - mean);
  const double sum = std::accumulate(s.power.begin(), s.power.end(), 0.0);
  CHECK(std::abs(sum / m - e) <= 1e-9 * e);

  for (size_t k = 0; k < m; ++k) {
    std::complex<double> f = 0.0;
    for (size_t j = 0; j < m; ++j) f += (x[j] - mean) * std::polar(1.0, -2.0 * kPi * double(k * j) / m);
    CHECK(s.power[k] == doctest::Approx(std::norm(f)).epsilon(1e-9));
    const double wk = s.omega[k];
    // bin frequency matches k or k - m
    const double kk = std::round(wk / s.resolution);
    CHECK((kk == double(k) || kk == double(k) - double(m)));
  }
}

TEST_CASE("constant series has no spectral content") {
  const auto t = grid(64, 0.1);
  const std::vector<double> x(64, 0.7);
  const auto s = power_spectrum(t, x);
  CHECK(*std::max_element(s.power.begin(), s.power.end()) < 1e-25);
  CHECK(find_peaks(s).empty());
}

TEST_CASE("two cosines give two peaks, strongest first") {
  const size_t m = 512;
  const auto t = grid(m, 0.1);
  const double w1 = 1.4, w2 = 4.1;
  std::vector<double> x(m);
  for (size_t k = 0; k < m; ++k) x[k] = std::cos(w1 * t[k]) + 0.6 * std::cos(w2 * t[k]);
  const auto s = power_spectrum(t, x, WindowFn::Hann);
  const auto p = find_peaks(s, 0.1);
  REQUIRE(p.size() == 2);
  CHECK(std::abs(p[0].omega - w1) <= s.resolution);
  CHECK(std::abs(p[1].omega - w2) <= s.resolution);
  CHECK(p[0].power > p[1].power);
  const auto j = peaks_to_json(p);
  CHECK(j.size() == 2);
  CHECK(j[0]["omega"].get<double>() == p[0].omega);
}

TEST_CASE("flat spectrum reports no peaks") {
  Spectrum s;
  for (int k = 0; k < 32; ++k) {
    s.omega.push_back(0.1 * k);
    s.power.push_back(1.0);
  }
  s.resolution = 0.1;
  CHECK(find_peaks(s).empty());
}

TEST_CASE("Hann window suppresses leakage") {
  const size_t m = 256;
  const auto t = grid(m, 0.1);
  std::vector<double> x(m);
  for (size_t k = 0; k < m; ++k) x[k] = std::cos(2.07 * t[k]);
  const auto a = power_spectrum(t, x);
  const auto b = power_spectrum(t, x, WindowFn::Hann);
  auto far = [](const Spectrum& s) {
    double w = 0.0;
    double top = *std::max_element(s.power.begin(), s.power.end());
    for (size_t k = 0; k < s.omega.size(); ++k)
      if (std::abs(std::abs(s.omega[k]) - 2.07) > 2.0 && std::abs(s.omega[k]) > 1.0) w = std::max(w, s.power[k] / top);
    return w;
  };
  CHECK(far(b) < 0.1 * far(a));
}

TEST_CASE("spectrum input validation and CSV") {
  CHECK_THROWS(power_spectrum(grid(4, 0.1), {1, 2, 3, 4}));
  auto t = grid(10, 0.1);
  std::vector<double> x(10, 1.0);
  x[3] = 2.0;
  CHECK_THROWS(power_spectrum(grid(9, 0.1), x));
  t[5] += 0.01;
  CHECK_THROWS(power_spectrum(t, x));
  const auto s = power_spectrum(grid(10, 0.1), x);
  const std::string csv = spectrum_csv(s);
  CHECK(csv.rfind("omega,power\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 11);
  // rows sorted by frequency
  Trajectory tr;
  tr.t = grid(10, 0.1);
  tr.names = {"x"};
  for (double v : x) tr.values.push_back({v});
  const auto s2 = power_spectrum(tr, "x");
  CHECK(s2.power == s.power);
}

TEST_CASE("error budget") {
  const auto b = error_budget(2, 1, 0.01, 1, 1.0);
  CHECK(b.tau_omega_c == doctest::Approx(0.04).epsilon(1e-15));
  CHECK(b.kappa == doctest::Approx(0.5));
  CHECK(b.depth == 2);
  CHECK(b.gaussianity == 1.0);
  CHECK(error_budget(4, 1, 0.01, 1, 1.0).tau_omega_c == doctest::Approx(4 * b.tau_omega_c).epsilon(1e-15));
  for (int N0 : {2, 3, 5}) {
    const double a = error_budget(3, N0, 0.02, 2, 5.0).tau_omega_c;
    const double c = error_budget(3 * N0, 1, 0.02, 2, 5.0).tau_omega_c;
    CHECK(c / a == doctest::Approx(N0).epsilon(1e-14));
  }
  const auto v = error_budget(2, 4, 0.01, 3, 2.0, 1.5, 0.5);
  CHECK(v.tau == doctest::Approx(v.tau_omega_c / 2.0));
  CHECK(v.v_tau == doctest::Approx(1.5 * v.tau));
  CHECK(v.delta_tau == doctest::Approx(0.5 * v.tau));
  CHECK(v.gaussianity == 0.25);
  CHECK_THROWS(error_budget(0, 1, 0.01, 1, 1.0));
  CHECK_THROWS(error_budget(1, 1, 0.0, 1, 1.0));
}

TEST_CASE("collective excitation number on Dicke states") {
  SUBCASE("vacuum and single excitation match the boson") {
    for (int N : {1, 3, 8}) {
      const auto z = gaussianity_check(N, 0);
      CHECK(z.collective == 0.0);
      CHECK(z.error == 0.0);
      const auto o = gaussianity_check(N, 1);
      CHECK(o.collective == 1.0);
      CHECK(o.bosonic == 1.0);
      CHECK(o.error == 0.0);
    }
  }
  SUBCASE("agrees with a dense matrix evaluation") {
    for (int N = 1; N <= 7; ++N)
      for (int s = 0; s <= N; ++s) {
        const auto g = gaussianity_check(N, s);
        CHECK(g.collective == doctest::Approx(dense_dicke(N, s)).epsilon(1e-12));
        CHECK(g.bosonic == s);
        CHECK(g.error == doctest::Approx(g.collective - s));
      }
  }
  SUBCASE("exact fraction for N = 8, s = 2") {
    const auto g = gaussianity_check(8, 2);
    CHECK(g.collective == doctest::Approx(dense_dicke(8, 2)).epsilon(1e-12));
    // s (N - s + 1) / N = 14 / 8
    CHECK(g.num == 7);
    CHECK(g.den == 4);
  }
  SUBCASE("fractions are reduced") {
    for (int N = 1; N <= 10; ++N)
      for (int s = 0; s <= N; ++s) {
        const auto g = gaussianity_check(N, s);
        CHECK(std::gcd(g.num, g.den) == (g.num == 0 ? g.den : 1));
      }
  }
  CHECK_THROWS(gaussianity_check(3, 4));
  CHECK_THROWS(gaussianity_check(3, -1));
}

TEST_CASE("steady window average") {
  SUBCASE("constant series") {
    const auto w = steady_window_average(std::vector<double>(50, 0.42));
    CHECK(w.value == doctest::Approx(0.42).epsilon(1e-15));
    CHECK(w.drift == 0.0);
  }
  SUBCASE("damped qubit population") {
    LindbladSpec s;
    s.dims = {2};
    s.H = SpMat(2, 2);
    const double g = 0.5;
    s.collapse.push_back({SpMat(sigma_minus().sparseView()), g, "sm"});
    Mat rho = Mat::Zero(2, 2);
    rho(1, 1) = 1.0;
    const auto tr = integrate(s, rho, 10.0 / g, 0.1, {{"n", SpMat((sigma_plus() * sigma_minus()).sparseView())}});
    const auto w = steady_window_average(tr, "n");
    CHECK(std::abs(w.value) < 1e-3);
  }
  SUBCASE("damped oscillation settles to the oracle steady state") {
    LindbladSpec s;
    s.dims = {2};
    s.H = SpMat((0.6 * pauli_x()).sparseView());
    s.collapse.push_back({SpMat(sigma_minus().sparseView()), 0.8, "sm"});
    Mat rho = Mat::Zero(2, 2);
    rho(0, 0) = 1.0;
    const Observable z{"z", SpMat(pauli_z().sparseView())};
    const auto tr = integrate(s, rho, 40.0, 0.1, {z});
    const auto w = steady_window_average(tr, "z");
    const auto ss = steady_state(s, rho);
    const double ref = expectation(z.op, ss.rho);
    CHECK(std::abs(w.value - ref) <= 2.0 * 0.01 * w.range);
  }
  SUBCASE("unsettled series throws") {
    std::vector<double> x(100);
    for (size_t k = 0; k < x.size(); ++k) x[k] = static_cast<double>(k);
    CHECK_THROWS_AS(steady_window_average(x), std::runtime_error);
  }
  CHECK_THROWS(steady_window_average(std::vector<double>{}));
  CHECK_THROWS(steady_window_average(std::vector<double>(5, 1.0), 0.0));
}
