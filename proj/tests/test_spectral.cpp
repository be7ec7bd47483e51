#include <doctest.h>

#include <cmath>
#include <complex>
#include <cstdio>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "noisebath/spectral.hpp"

using namespace noisebath;

namespace {

constexpr double pi = 3.14159265358979323846;

// Trapezoid on [a, b] with n intervals.
template <class F>
double trapz(F f, double a, double b, int n) {
  const double h = (b - a) / n;
  double s = 0.5 * (f(a) + f(b));
  for (int i = 1; i < n; ++i) s += f(a + i * h);
  return s * h;
}

}  // namespace

TEST_CASE("ohmic zero-frequency limit") {
  const Temperature t{1.5};
  const double expected = 4.0 * pi * 0.02 * 1.5;
  CHECK(eval_ohmic(0.0, 0.02, t, 10.0) == doctest::Approx(expected).epsilon(1e-12));
  CHECK(expected == doctest::Approx(0.377).epsilon(1e-3));
  // both sides approach the same value
  const double lo = eval_ohmic(-1e-8, 0.02, t, 10.0);
  const double hi = eval_ohmic(1e-8, 0.02, t, 10.0);
  CHECK(lo == doctest::Approx(expected).epsilon(1e-7));
  CHECK(hi == doctest::Approx(expected).epsilon(1e-7));
  CHECK(lo < expected);
  CHECK(hi > expected);
}

TEST_CASE("ohmic closed form and detailed balance") {
  const Temperature t{1.5};
  for (double w : {-12.0, -3.0, -0.4, 0.3, 1.0, 7.5}) {
    const double direct = 4.0 * pi * 0.3 * w / (1.0 - std::exp(-w / 1.5)) * std::exp(-std::abs(w) / 10.0);
    CHECK(eval_ohmic(w, 0.3, t, 10.0) == doctest::Approx(direct).epsilon(1e-12));
    const double ratio = eval_ohmic(-w, 0.3, t, 10.0) / eval_ohmic(w, 0.3, t, 10.0);
    CHECK(ratio == doctest::Approx(std::exp(-w / 1.5)).epsilon(1e-12));
  }
}

TEST_CASE("ohmic at zero temperature has no emission side") {
  const auto t0 = Temperature::zero_temperature();
  CHECK(eval_ohmic(-2.0, 1.0, t0, 5.0) == 0.0);
  CHECK(eval_ohmic(2.0, 1.0, t0, 5.0) == doctest::Approx(4.0 * pi * 2.0 * std::exp(-0.4)));
}

TEST_CASE("non-finite input is rejected") {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  const double inf = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(eval_ohmic(nan, 0.1, Temperature{1.0}, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(eval_ohmic(inf, 0.1, Temperature{1.0}, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(eval_lorentzian_sum(nan, LorentzianSum{}), std::invalid_argument);
}

TEST_CASE("Lorentzian sum peak height, area and background") {
  LorentzianSum b;
  b.modes.push_back({0.7 * 0.7, 1.3, 0.4});
  CHECK(eval_lorentzian_sum(1.3, b) == doctest::Approx(4.0 * 0.49 / 0.4).epsilon(1e-14));
  const double area = trapz([&](double w) { return eval_lorentzian_sum(w, b); }, 1.3 - 200 * 0.4, 1.3 + 200 * 0.4, 400000);
  // the tails beyond +-200 kappa carry about 1/(100 pi) of the area
  const double tail = 2.0 * 0.49 * 2.0 * std::atan(1.0 / (2.0 * 200.0));
  CHECK(area == doctest::Approx(2.0 * pi * 0.49 - tail).epsilon(1e-6));
  CHECK(area == doctest::Approx(2.0 * pi * 0.49).epsilon(4e-3));

  LorentzianSum flat;
  flat.background = 4.0 * 0.125;
  for (double w : {-50.0, 0.0, 3.0}) CHECK(eval_lorentzian_sum(w, flat) == 0.5);
}

TEST_CASE("structured target") {
  SetStructured p;  // alpha 0.25, kappa' 0.4, T 0.3, cutoff sqrt 3
  CHECK(p.second_resonance() == 2.0);
  auto direct = [&](double w) {
    auto lor = [&](double c) { return p.width / (0.25 * p.width * p.width + (w - c) * (w - c)); };
    const double th = w / (1.0 - std::exp(-w / 0.3));
    const double r = w / p.cutoff;
    return p.alpha * th * (lor(1.0) + lor(2.0)) / (2.0 * pi) / (1.0 + std::pow(r, 4));
  };
  for (double w = -1.0; w <= 3.5; w += 0.25) {
    if (std::abs(w) < 1e-12) continue;
    CHECK(eval_set_target(w, p) == doctest::Approx(direct(w)).epsilon(1e-12));
  }
  // finite at zero and continuous
  const double s0 = eval_set_target(0.0, p);
  CHECK(std::isfinite(s0));
  CHECK(eval_set_target(1e-7, p) == doctest::Approx(s0).epsilon(1e-5));
  CHECK(eval_set_target(-1e-7, p) == doctest::Approx(s0).epsilon(1e-5));
  // omega^-3 decay far above the cutoff (thermal factor -> omega)
  const double wc = p.cutoff;
  const double ratio = eval_set_target(20 * wc, p) / eval_set_target(10 * wc, p);
  CHECK(ratio == doctest::Approx(0.125).epsilon(0.2));
}

TEST_CASE("detailed balance holds for thermal variants across a window") {
  SetStructured p;
  OhmicExpCutoff o{0.1, Temperature{1.5}, 10.0};
  // resonances sit at positive frequency only, so the structured form carries
  // the Boltzmann factor times the Lorentzian asymmetry
  auto peaks = [&](double w) {
    auto l = [&](double c) { return 0.4 / (0.04 + (w - c) * (w - c)); };
    return l(1.0) + l(2.0);
  };
  for (double w = 0.05; w < 4.0; w += 0.37) {
    CHECK(evaluate(p, -w) / evaluate(p, w) == doctest::Approx(std::exp(-w / 0.3) * peaks(-w) / peaks(w)).epsilon(1e-12));
    CHECK(evaluate(o, -w) / evaluate(o, w) == doctest::Approx(std::exp(-w / 1.5)).epsilon(1e-12));
    CHECK(evaluate(p, w) >= 0.0);
    CHECK(evaluate(o, -w) >= 0.0);
  }
  CHECK(is_thermal(p));
  CHECK_FALSE(is_thermal(LorentzianSum{}));
  CHECK(temperature_of(o).value == 1.5);
}

TEST_CASE("validation of target variants") {
  LorentzianSum bad;
  bad.modes.push_back({1.0, 0.0, -1.0});
  CHECK_THROWS_AS(validate(bad), std::invalid_argument);
  Tabulated unsorted{{0.0, 2.0, 1.0}, {1.0, 1.0, 1.0}};
  CHECK_THROWS_AS(validate(unsorted), std::invalid_argument);
  CHECK_NOTHROW(validate(OhmicExpCutoff{0.1, Temperature{1.0}, 10.0}));
}

TEST_CASE("tabulated target interpolates and loads from CSV") {
  Tabulated tab{{0.0, 1.0, 3.0}, {0.0, 2.0, 6.0}};
  CHECK(eval_tabulated(0.5, tab) == doctest::Approx(1.0));
  CHECK(eval_tabulated(2.0, tab) == doctest::Approx(4.0));
  CHECK_THROWS(eval_tabulated(4.0, tab));

  const std::string path = "tabulated_test.csv";
  {
    std::ofstream f(path);
    f << "omega,S\n0,0\n1,2\n3,6\n";
  }
  const Tabulated loaded = load_tabulated_csv(path);
  REQUIRE(loaded.grid.size() == 3);
  CHECK(eval_tabulated(2.0, loaded) == doctest::Approx(4.0));
  std::remove(path.c_str());
}

TEST_CASE("multichannel target") {
  MultiChannelTarget m(2);
  m.set(0, 0, OhmicExpCutoff{0.1, Temperature{1.0}, 5.0});
  m.set(0, 1, [](double w) { return std::complex<double>(w, 0.5 * w); });
  CHECK(eval_multichannel(0.7, m, 0, 0).real() == doctest::Approx(eval_ohmic(0.7, 0.1, Temperature{1.0}, 5.0)));
  CHECK(eval_multichannel(0.7, m, 0, 0).imag() == 0.0);
  const auto a = eval_multichannel(0.7, m, 0, 1);
  const auto b = eval_multichannel(0.7, m, 1, 0);
  CHECK(b == std::conj(a));
  CHECK_THROWS(eval_multichannel(0.7, m, 2, 0));

  const SetStructured p;
  const auto s = MultiChannelTarget::scalar(p);
  CHECK(s.dimension() == 1);
  for (double w : {-0.5, 0.0, 1.0, 2.5}) CHECK(eval_multichannel(w, s, 0, 0).real() == evaluate(p, w));
}
