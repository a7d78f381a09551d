#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "vineda/bicop.hpp"
#include "vineda/numerics.hpp"
#include "vineda/rng.hpp"

using namespace vineda;

namespace {

// Independent adaptive-Simpson oracle.
double simpson(double a, double b, double fa, double fm, double fb) {
  return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

template <class F>
double adapt(F&& f, double a, double b, double fa, double fm, double fb,
             double whole, double eps, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = f(lm);
  const double frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  if (depth <= 0 || std::fabs(left + right - whole) <= 15.0 * eps)
    return left + right + (left + right - whole) / 15.0;
  return adapt(f, a, m, fa, flm, fm, left, eps / 2.0, depth - 1) +
         adapt(f, m, b, fm, frm, fb, right, eps / 2.0, depth - 1);
}

template <class F>
double integrate(F&& f, double a, double b, double eps = 1e-12) {
  const double fa = f(a);
  const double fb = f(b);
  const double fm = f(0.5 * (a + b));
  return adapt(f, a, b, fa, fm, fb, simpson(a, b, fa, fm, fb), eps, 44);
}

std::vector<BivCopula> test_copulas() {
  std::vector<BivCopula> cs;
  cs.push_back({CopulaFamily::Product, 0, 4, 0});
  for (double r : {-0.9, -0.5, 0.0, 0.5, 0.9})
    cs.push_back({CopulaFamily::Normal, r, 4, 0});
  const double tp[5][2] = {{-0.8, 1}, {-0.3, 4}, {0, 7}, {0.5, 2.5}, {0.9, 15}};
  for (const auto& p : tp)
    cs.push_back({CopulaFamily::StudentT, p[0], p[1], 0});
  // Parameters are capped where the conditional cdf saturates to 1 within
  // double precision at the grid corners (the inverse is then ill-posed).
  for (double th : {0.1, 0.5, 2.0, 5.0, 8.0}) {
    cs.push_back({CopulaFamily::Clayton, 0, 4, th});
    cs.push_back({CopulaFamily::ClaytonRotated, 0, 4, -th});
  }
  for (double th : {1.001, 1.5, 3.0, 5.0, 7.0}) {
    cs.push_back({CopulaFamily::Gumbel, 0, 4, th});
    cs.push_back({CopulaFamily::GumbelRotated, 0, 4, -th});
  }
  return cs;
}

// Draws (x, v) from the copula: v uniform, then x through the conditional
// inverse.
void sample_pair(const BivCopula& c, Rng& rng, double& x, double& v) {
  v = rng.uniform();
  x = h_inv(c, rng.uniform(), v);
}

}  // namespace

TEST_CASE("bivariate normal cdf matches quadrature golds") {
  const double golds[][4] = {
      {0, 0, 0.5, 1.0 / 3.0},
      {0.5, -0.3, 0.2, 0.29076428813655367},
      {1, 1, 0.9, 0.7981798295654442},
      {-1, 2, -0.7, 0.14021985419403971},
      {0.3, 0.7, 0.99, 0.61787693405970098},
      {1.2, -0.4, -0.95, 0.22967654014225332},
      {2, 2, 0.999, 0.97628684304427668},
      {0, 0, -0.999, 0.0071182187031198275},
      {-0.8, -0.8, 0.95, 0.17525432950512378},
      {0.1, 3, 0.6, 0.53981336400664218},
  };
  for (const auto& g : golds) {
    CHECK(std::fabs(bvn_cdf(g[0], g[1], g[2]) - g[3]) <= 1e-11);
    CHECK(std::fabs(bvn_cdf(g[1], g[0], g[2]) - g[3]) <= 1e-11);  // symmetry
  }
  CHECK(bvn_cdf(0.7, -0.2, 0.0) ==
        doctest::Approx(std_normal_cdf(0.7) * std_normal_cdf(-0.2)).epsilon(1e-14));
  CHECK(bvn_cdf(1.3, 0.4, 1.0) == doctest::Approx(std_normal_cdf(0.4)).epsilon(1e-14));
  CHECK(bvn_cdf(1.3, -1.3, -1.0) == doctest::Approx(0.0).scale(1).epsilon(1e-14));
}

TEST_CASE("bivariate t cdf matches quadrature golds") {
  const double golds[][5] = {
      {0.5, -0.2, 0.4, 1, 0.33475065946143209},
      {1, 1, 0.9, 2.5, 0.7511208355894731},
      {-0.3, 0.8, -0.6, 4.5, 0.22074831115778969},
      {0, 0, 0.35, 7, 0.30690920865200739},
      {2, -1, 0, 10, 0.16248068517975585},
      {0.7, 0.3, -0.2, 30, 0.44290808699023563},
      {1.5, 1.5, 0.97, 3.3, 0.87222923750763986},
      {-2, -2, -0.9, 1, 0.0040173245217270025},
      {0.2, 1.1, 0.96, 2.2, 0.56851583702232652},
      {-0.5, 0.4, -0.97, 5, 0.021288869966260853},
      {1, -1, 0.995, 8, 0.17329675327821139},
  };
  for (const auto& g : golds) {
    CHECK(std::fabs(bvt_cdf(g[0], g[1], g[2], g[3]) - g[4]) <= 1e-9);
    CHECK(std::fabs(bvt_cdf(g[1], g[0], g[2], g[3]) - g[4]) <= 1e-9);
  }
}

TEST_CASE("coarse bivariate t cdf tracks the full quadrature") {
  for (double rho : {-0.95, -0.6, -0.2, 0.2, 0.6, 0.95})
    for (double nu : {1.0, 2.5, 7.0, 22.0})
      for (double x : {-2.0, -0.5, 0.3, 1.7})
        for (double y : {-1.4, 0.0, 0.9, 2.3})
          CHECK(std::fabs(bvt_cdf_coarse(x, y, rho, nu) -
                          bvt_cdf(x, y, rho, nu)) <= 5e-5);
}

TEST_CASE("conditional and inverse round-trip across the parameter grid") {
  for (const BivCopula& c : test_copulas()) {
    for (double v = 0.1; v < 0.95; v += 0.1) {
      for (double x = 0.1; x < 0.95; x += 0.1) {
        const double u = h_func(c, x, v);
        CHECK(std::fabs(h_inv(c, u, v) - x) <= 1e-7);
        CHECK(std::fabs(h_func(c, h_inv(c, x, v), v) - x) <= 1e-7);
        const double w = h2_func(c, x, v);
        CHECK(std::fabs(h2_inv(c, w, v) - x) <= 1e-7);
      }
    }
  }
}

TEST_CASE("h2 equals h for exchangeable families and the cdf derivative for all") {
  const double d = 1e-6;
  for (const BivCopula& c : test_copulas()) {
    for (double u : {0.25, 0.6}) {
      for (double y : {0.3, 0.75}) {
        const double fd = (copula_cdf(c, u + d, y) - copula_cdf(c, u - d, y)) / (2.0 * d);
        CHECK(h2_func(c, y, u) == doctest::Approx(fd).epsilon(5e-5).scale(1.0));
      }
    }
  }
}

TEST_CASE("cdf equals the integral of h over the conditioning variable") {
  for (const BivCopula& c : test_copulas()) {
    const double u = 0.3;
    const double v = 0.6;
    const double got = copula_cdf(c, u, v);
    const double expect =
        integrate([&](double t) { return h_func(c, u, t); }, 1e-12, v, 1e-11);
    CHECK(got == doctest::Approx(expect).epsilon(2e-7).scale(1.0));
  }
}

TEST_CASE("pdf equals the derivative of h in its first argument") {
  const double d = 1e-6;
  for (const BivCopula& c : test_copulas()) {
    for (double x : {0.3, 0.7}) {
      for (double v : {0.2, 0.55}) {
        const double fd = (h_func(c, x + d, v) - h_func(c, x - d, v)) / (2.0 * d);
        CHECK(copula_pdf(c, x, v) == doctest::Approx(fd).epsilon(1e-4).scale(1.0));
      }
    }
  }
}

TEST_CASE("cdf respects the Frechet-Hoeffding bounds") {
  for (const BivCopula& c : test_copulas()) {
    for (double u = 0.05; u < 1.0; u += 0.137) {
      for (double v = 0.05; v < 1.0; v += 0.137) {
        const double val = copula_cdf(c, u, v);
        CHECK(val >= std::max(0.0, u + v - 1.0) - 1e-12);
        CHECK(val <= std::min(u, v) + 1e-12);
      }
    }
  }
}

TEST_CASE("extreme clayton parameters stay finite in log space") {
  const BivCopula c{CopulaFamily::Clayton, 0, 4, 50.0};
  const double h = h_func(c, 1e-9, 0.5);
  CHECK(std::isfinite(h));
  CHECK(h >= 0.0);
  CHECK(h <= 1.0);
  const double hi = h_inv(c, 1e-9, 0.5);
  CHECK(std::isfinite(hi));
  CHECK(std::isfinite(copula_log_pdf(c, 1e-9, 1.0 - 1e-9)));
  CHECK(copula_cdf(c, 0.4, 0.4) <= 0.4);
  // near-perfect dependence: C(u,u) approaches u
  CHECK(copula_cdf(c, 0.4, 0.4) == doctest::Approx(0.4).epsilon(0.02));
}

TEST_CASE("pseudo-observations are rescaled ranks") {
  const std::vector<double> xs = {0.1, 0.4, 0.25, 0.9};
  const std::vector<double> ys = {0.2, 0.1, 0.3, 0.4};
  const PseudoSample s = to_pseudo_obs(xs, ys);
  CHECK(s.u == std::vector<double>{0.2, 0.6, 0.4, 0.8});
  CHECK(s.v == std::vector<double>{0.4, 0.2, 0.6, 0.8});
  CHECK(empirical_copula(s, 0.5, 0.5) == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(empirical_copula(s, 1.0, 1.0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(empirical_copula(s, 0.1, 0.9) == doctest::Approx(0.0).scale(1));
}

TEST_CASE("cvm statistic matches a brute-force evaluation") {
  Rng rng(2024);
  const int n = 60;
  std::vector<double> xs(n), ys(n);
  const BivCopula truth{CopulaFamily::Clayton, 0, 4, 1.5};
  for (int i = 0; i < n; ++i) sample_pair(truth, rng, xs[i], ys[i]);
  const PseudoSample s = to_pseudo_obs(xs, ys);
  const BivCopula cand{CopulaFamily::Normal, 0.5, 4, 0};

  double brute = 0.0;
  for (int i = 0; i < n; ++i) {
    int dom = 0;
    for (int j = 0; j < n; ++j)
      if (s.u[j] <= s.u[i] && s.v[j] <= s.v[i]) ++dom;
    const double diff =
        static_cast<double>(dom) / n - copula_cdf(cand, s.u[i], s.v[i]);
    brute += diff * diff;
  }
  CHECK(cvm_statistic(s, cand) == doctest::Approx(brute).epsilon(1e-12));
}

TEST_CASE("independence test separates independent from dependent data") {
  Rng rng(77);
  const int n = 100;
  std::vector<double> xs(n), ys(n), zs(n);
  for (int i = 0; i < n; ++i) {
    xs[i] = rng.uniform();
    ys[i] = rng.uniform();
    zs[i] = xs[i] + 0.1 * rng.uniform();  // strong positive dependence
  }
  const IndependenceTest ind = independence_test(to_pseudo_obs(xs, ys), 5);
  const IndependenceTest dep = independence_test(to_pseudo_obs(xs, zs), 5);
  CHECK(ind.p_value > 0.1);
  CHECK(dep.p_value == doctest::Approx(0.01).epsilon(1e-12));
  // deterministic for a fixed seed
  const IndependenceTest again = independence_test(to_pseudo_obs(xs, ys), 5);
  CHECK(again.p_value == ind.p_value);
  CHECK(again.statistic == ind.statistic);
  CHECK_THROWS_AS(independence_test(PseudoSample{{0.1}, {0.2}}, 1),
                  std::invalid_argument);
}

TEST_CASE("tau inversion uses the closed forms with clamps") {
  CHECK(fit_by_tau(CopulaFamily::Normal, 0.5903344706017331).rho ==
        doctest::Approx(0.8).epsilon(1e-12));
  CHECK(fit_by_tau(CopulaFamily::Normal, 0.9999).rho == doctest::Approx(0.999));
  CHECK(fit_by_tau(CopulaFamily::Clayton, 0.5).theta == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(fit_by_tau(CopulaFamily::Clayton, 0.999).theta == doctest::Approx(50.0));
  CHECK(fit_by_tau(CopulaFamily::Gumbel, 0.5).theta == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(fit_by_tau(CopulaFamily::ClaytonRotated, -0.5).theta ==
        doctest::Approx(-2.0).epsilon(1e-12));
  CHECK(fit_by_tau(CopulaFamily::GumbelRotated, -0.5).theta ==
        doctest::Approx(-2.0).epsilon(1e-12));
  CHECK_THROWS_AS(fit_by_tau(CopulaFamily::Clayton, -0.3), std::invalid_argument);
  CHECK_THROWS_AS(fit_by_tau(CopulaFamily::GumbelRotated, 0.3), std::invalid_argument);
  CHECK(family_admits_tau(CopulaFamily::Normal, -0.9));
  CHECK(!family_admits_tau(CopulaFamily::Gumbel, 0.0));
}

TEST_CASE("simulated tau matches the parameter for closed-form families") {
  Rng rng(31337);
  const int n = 4000;
  std::vector<double> xs(n), ys(n);
  const BivCopula c{CopulaFamily::StudentT, 0.5, 5, 0};  // tau = asin(.5)*2/pi
  for (int i = 0; i < n; ++i) sample_pair(c, rng, xs[i], ys[i]);
  CHECK(kendall_tau(xs, ys) == doctest::Approx(1.0 / 3.0).epsilon(0.08));
}

TEST_CASE("t degrees-of-freedom fit recovers the generating value") {
  Rng rng(8);
  const int n = 2000;
  std::vector<double> xs(n), ys(n);
  const BivCopula c{CopulaFamily::StudentT, 0.5, 5, 0};
  for (int i = 0; i < n; ++i) sample_pair(c, rng, xs[i], ys[i]);
  const PseudoSample s = to_pseudo_obs(xs, ys);
  const double nu = fit_t_df(s, std::sin(M_PI_2 * kendall_tau(s.u, s.v)));
  CHECK(nu > 3.0);
  CHECK(nu < 9.0);
}

TEST_CASE("selection picks the generating family on simulated data") {
  const auto simulate = [](const BivCopula& truth, std::uint64_t seed, int n) {
    Rng rng(seed);
    std::vector<double> xs(n), ys(n);
    for (int i = 0; i < n; ++i) sample_pair(truth, rng, xs[i], ys[i]);
    return to_pseudo_obs(xs, ys);
  };
  const std::vector<CopulaFamily> all = {
      CopulaFamily::Product,        CopulaFamily::Normal,
      CopulaFamily::StudentT,       CopulaFamily::Clayton,
      CopulaFamily::ClaytonRotated, CopulaFamily::Gumbel,
      CopulaFamily::GumbelRotated};

  const BivCopula clay =
      select_copula(simulate({CopulaFamily::Clayton, 0, 4, 2.0}, 11, 400), all, 1);
  CHECK(clay.family == CopulaFamily::Clayton);
  CHECK(clay.theta == doctest::Approx(2.0).epsilon(0.35));

  const BivCopula gum =
      select_copula(simulate({CopulaFamily::Gumbel, 0, 4, 3.0}, 12, 400), all, 2);
  CHECK(gum.family == CopulaFamily::Gumbel);
  CHECK(gum.theta == doctest::Approx(3.0).epsilon(0.35));

  const BivCopula rot = select_copula(
      simulate({CopulaFamily::ClaytonRotated, 0, 4, -2.0}, 13, 400), all, 3);
  CHECK(rot.family == CopulaFamily::ClaytonRotated);
  CHECK(rot.theta == doctest::Approx(-2.0).epsilon(0.35));

  // independent data falls back to the product copula
  Rng rng(14);
  std::vector<double> xs(200), ys(200);
  for (auto& x : xs) x = rng.uniform();
  for (auto& y : ys) y = rng.uniform();
  const BivCopula ind = select_copula(to_pseudo_obs(xs, ys), all, 4);
  CHECK(ind.family == CopulaFamily::Product);
}

TEST_CASE("family metadata") {
  CHECK(parameter_count(CopulaFamily::Product) == 0);
  CHECK(parameter_count(CopulaFamily::StudentT) == 2);
  CHECK(parameter_count(CopulaFamily::Gumbel) == 1);
  CHECK(family_name(CopulaFamily::ClaytonRotated) == "clayton90");
  CHECK_NOTHROW(validate(BivCopula{CopulaFamily::Gumbel, 0, 4, 2.0}));
  CHECK_THROWS_AS(validate(BivCopula{CopulaFamily::Gumbel, 0, 4, 0.5}),
                  std::invalid_argument);
  CHECK_THROWS_AS(validate(BivCopula{CopulaFamily::Normal, 1.5, 4, 0}),
                  std::invalid_argument);
  CHECK_THROWS_AS(validate(BivCopula{CopulaFamily::ClaytonRotated, 0, 4, 2.0}),
                  std::invalid_argument);
}
