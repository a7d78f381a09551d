#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "vineda/margins.hpp"
#include "vineda/mvmodel.hpp"
#include "vineda/numerics.hpp"
#include "vineda/rng.hpp"

using namespace vineda;

namespace {

std::vector<std::vector<double>> zip_columns(
    const std::vector<std::vector<double>>& cols) {
  std::vector<std::vector<double>> rows(cols.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (const auto& c : cols) rows[i].push_back(c[i]);
  return rows;
}

double pearson(const std::vector<std::vector<double>>& rows, int a, int b) {
  double ma = 0, mb = 0;
  for (const auto& r : rows) {
    ma += r[a];
    mb += r[b];
  }
  ma /= double(rows.size());
  mb /= double(rows.size());
  double saa = 0, sbb = 0, sab = 0;
  for (const auto& r : rows) {
    saa += (r[a] - ma) * (r[a] - ma);
    sbb += (r[b] - mb) * (r[b] - mb);
    sab += (r[a] - ma) * (r[b] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

}  // namespace

TEST_CASE("correlation matches the sine transform of a frozen tau") {
  // This permutation has 7 of 28 pairs discordant, so tau = 0.5 exactly.
  const std::vector<double> xs = {1, 2, 3, 4, 5, 6, 7, 8};
  const std::vector<double> ys = {2, 1, 3, 4, 8, 7, 6, 5};
  CHECK(kendall_tau(xs, ys) == doctest::Approx(0.5).epsilon(1e-15));
  const auto r = estimate_correlation(zip_columns({xs, ys}));
  CHECK(r.dim == 2);
  CHECK(r.at(0, 1) == doctest::Approx(0.7071067811865475).epsilon(1e-13));
  CHECK(r.at(1, 0) == r.at(0, 1));
  CHECK(r.at(0, 0) == 1.0);
}

TEST_CASE("comonotone columns clamp at 0.999") {
  const std::vector<double> xs = {0.5, 1.5, 2.0, 3.25, 7.0};
  std::vector<double> ys;
  for (double x : xs) ys.push_back(2.0 * x + 1.0);
  const auto r = estimate_correlation(zip_columns({xs, ys}));
  CHECK(r.at(0, 1) == 0.999);
}

TEST_CASE("independent columns give near-zero correlations") {
  Rng rng(404);
  std::vector<std::vector<double>> rows(1000, std::vector<double>(3));
  for (auto& row : rows)
    for (auto& x : row) x = rng.uniform();
  const auto r = estimate_correlation(rows);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      if (i != j) CHECK(std::fabs(r.at(i, j)) < 0.1);
}

TEST_CASE("correlation estimation needs three rows") {
  const std::vector<std::vector<double>> rows = {{0.0, 1.0}, {1.0, 0.0}};
  CHECK_THROWS_AS((void)estimate_correlation(rows), std::invalid_argument);
}

TEST_CASE("pd repair leaves definite matrices alone") {
  auto id = CorrelationMatrix::identity(4);
  const auto before = id.entries;
  pd_correction(id);
  CHECK(id.entries == before);

  CorrelationMatrix r = CorrelationMatrix::identity(3);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      if (i != j) r.at(i, j) = 0.9;  // eigenvalues {0.1, 0.1, 2.8}
  const auto kept = r.entries;
  pd_correction(r);
  CHECK(r.entries == kept);
}

TEST_CASE("pd repair fixes an indefinite matrix and is idempotent") {
  CorrelationMatrix r = CorrelationMatrix::identity(3);
  r.at(0, 1) = r.at(1, 0) = 0.9;
  r.at(0, 2) = r.at(2, 0) = 0.9;
  r.at(1, 2) = r.at(2, 1) = -0.9;  // smallest eigenvalue -0.8
  CHECK(smallest_eigenvalue(r) < 0.0);
  pd_correction(r);
  CHECK(smallest_eigenvalue(r) >= 1e-6);
  for (int i = 0; i < 3; ++i) CHECK(r.at(i, i) == 1.0);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) CHECK(r.at(i, j) == r.at(j, i));
  const auto once = r.entries;
  pd_correction(r);
  CHECK(r.entries == once);
}

TEST_CASE("correlation is invariant under the margin cdf transform") {
  Rng rng(77);
  std::vector<std::vector<double>> rows(60, std::vector<double>(3));
  for (auto& row : rows)
    for (auto& x : row) x = std_normal_quantile(rng.uniform()) * 2.0 + 1.0;
  const auto margins = fit_independence(rows, MarginKind::Kernel).margins;
  auto transformed = rows;
  for (auto& row : transformed)
    for (int j = 0; j < 3; ++j) row[j] = cdf(margins[j], row[j]);
  const auto raw = estimate_correlation(rows);
  const auto cooked = estimate_correlation(transformed);
  for (std::size_t k = 0; k < raw.entries.size(); ++k)
    CHECK(raw.entries[k] == doctest::Approx(cooked.entries[k]).epsilon(1e-14));
}

TEST_CASE("gaussian copula fit recovers the generating correlation") {
  GaussianCopulaModel truth;
  truth.margins = {Margin{NormalMargin{0.0, 1.0}}, Margin{NormalMargin{0.0, 1.0}}};
  truth.corr = CorrelationMatrix::identity(2);
  truth.corr.at(0, 1) = truth.corr.at(1, 0) = 0.8;
  truth.chol = {1.0, 0.0, 0.8, 0.6};
  const auto rows = sample(truth, 2000, 5150);

  const auto fit = fit_gaussian_copula(rows, MarginKind::Normal);
  double frob = 0.0;
  for (std::size_t k = 0; k < fit.corr.entries.size(); ++k) {
    const double d = fit.corr.entries[k] - truth.corr.entries[k];
    frob += d * d;
  }
  CHECK(std::sqrt(frob) < 0.1);

  // chol * chol^T must reproduce the correlation matrix
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      double s = 0.0;
      for (int k = 0; k < 2; ++k)
        s += fit.chol[std::size_t(i) * 2 + k] * fit.chol[std::size_t(j) * 2 + k];
      CHECK(s == doctest::Approx(fit.corr.at(i, j)).epsilon(1e-10));
    }
}

TEST_CASE("independence sampling hits the margin moments") {
  IndependenceModel m;
  m.margins = {Margin{NormalMargin{0.0, 1.0}}, Margin{NormalMargin{3.0, 4.0}}};
  const auto rows = sample(m, 100000, 99);
  double m0 = 0, m1 = 0;
  for (const auto& r : rows) {
    m0 += r[0];
    m1 += r[1];
  }
  CHECK(m0 / 1e5 == doctest::Approx(0.0).scale(1).epsilon(0.02));
  CHECK(m1 / 1e5 == doctest::Approx(3.0).epsilon(0.02));
}

TEST_CASE("gaussian sampling reproduces the requested dependence") {
  GaussianCopulaModel ind;
  ind.margins = {Margin{NormalMargin{0.0, 1.0}}, Margin{NormalMargin{0.0, 1.0}},
                 Margin{NormalMargin{0.0, 1.0}}};
  ind.corr = CorrelationMatrix::identity(3);
  ind.chol = {1, 0, 0, 0, 1, 0, 0, 0, 1};
  const auto free = sample(ind, 10000, 31);
  CHECK(std::fabs(pearson(free, 0, 1)) < 0.03);
  CHECK(std::fabs(pearson(free, 0, 2)) < 0.03);
  CHECK(std::fabs(pearson(free, 1, 2)) < 0.03);

  GaussianCopulaModel dep;
  dep.margins = {Margin{NormalMargin{0.0, 1.0}}, Margin{NormalMargin{0.0, 1.0}}};
  dep.corr = CorrelationMatrix::identity(2);
  dep.corr.at(0, 1) = dep.corr.at(1, 0) = 0.8;
  dep.chol = {1.0, 0.0, 0.8, 0.6};
  const auto tied = sample(dep, 10000, 32);
  CHECK(pearson(tied, 0, 1) == doctest::Approx(0.8).epsilon(0.04));
}

TEST_CASE("sampling is reproducible by seed") {
  IndependenceModel m;
  m.margins = {Margin{NormalMargin{0.0, 1.0}}};
  CHECK(sample(m, 50, 7) == sample(m, 50, 7));
  CHECK(sample(m, 50, 7) != sample(m, 50, 8));

  GaussianCopulaModel g;
  g.margins = {Margin{NormalMargin{0.0, 1.0}}, Margin{NormalMargin{0.0, 1.0}}};
  g.corr = CorrelationMatrix::identity(2);
  g.chol = {1, 0, 0, 1};
  CHECK(sample(g, 50, 7) == sample(g, 50, 7));
}

TEST_CASE("a single-variable model degenerates to its margin") {
  Rng rng(12);
  std::vector<std::vector<double>> rows(40, std::vector<double>(1));
  for (auto& row : rows) row[0] = rng.uniform() * 5.0;
  const auto fit = fit_gaussian_copula(rows, MarginKind::Kernel);
  CHECK(fit.corr.dim == 1);
  CHECK(fit.corr.entries == std::vector<double>{1.0});
  CHECK(fit.chol == std::vector<double>{1.0});
  CHECK(sample(fit, 10, 3).size() == 10);
}

TEST_CASE("degenerate columns are rejected") {
  std::vector<std::vector<double>> rows(20, std::vector<double>{1.0, 2.5});
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i][0] = double(i);
  CHECK_THROWS_AS((void)fit_independence(rows, MarginKind::Normal),
                  DegenerateSampleError);
  CHECK_THROWS_AS((void)fit_gaussian_copula(rows, MarginKind::Kernel),
                  DegenerateSampleError);
}

TEST_CASE("sample rejects non-positive counts") {
  IndependenceModel m;
  m.margins = {Margin{NormalMargin{0.0, 1.0}}};
  CHECK_THROWS_AS((void)sample(m, 0, 1), std::invalid_argument);
}
