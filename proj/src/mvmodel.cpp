#include "vineda/mvmodel.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

#include "vineda/numerics.hpp"
#include "vineda/rng.hpp"

namespace vineda {

namespace {

using EigenRowMajor =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Eigen::Map<const EigenRowMajor> as_eigen(const CorrelationMatrix& r) {
  return {r.entries.data(), r.dim, r.dim};
}

std::vector<std::vector<double>> extract_columns(
    std::span<const std::vector<double>> rows) {
  const std::size_t dim = rows.empty() ? 0 : rows.front().size();
  std::vector<std::vector<double>> cols(dim, std::vector<double>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != dim)
      throw std::invalid_argument("ragged sample rows");
    for (std::size_t j = 0; j < dim; ++j) cols[j][i] = rows[i][j];
  }
  return cols;
}

std::vector<Margin> fit_margins(std::span<const std::vector<double>> rows,
                                MarginKind kind) {
  if (rows.empty()) throw std::invalid_argument("empty sample");
  std::vector<Margin> ms;
  for (const auto& col : extract_columns(rows))
    ms.push_back(fit_margin(kind, col));
  return ms;
}

std::vector<double> cholesky_factor(CorrelationMatrix& corr) {
  // Pathological inputs can defeat one clipping pass; escalate eps until the
  // factorization succeeds.
  double eps = 1e-6;
  for (int attempt = 0; attempt < 8; ++attempt) {
    Eigen::LLT<EigenRowMajor> llt(as_eigen(corr));
    if (llt.info() == Eigen::Success) {
      EigenRowMajor l = llt.matrixL();
      return {l.data(), l.data() + l.size()};
    }
    eps *= 10.0;
    pd_correction(corr, eps);
  }
  throw std::runtime_error("correlation matrix not factorizable");
}

}  // namespace

CorrelationMatrix CorrelationMatrix::identity(int dim) {
  CorrelationMatrix r;
  r.dim = dim;
  r.entries.assign(std::size_t(dim) * dim, 0.0);
  for (int i = 0; i < dim; ++i) r.at(i, i) = 1.0;
  return r;
}

CorrelationMatrix estimate_correlation(
    std::span<const std::vector<double>> rows) {
  if (rows.size() < 3)
    throw std::invalid_argument("need at least 3 rows to estimate correlation");
  const auto cols = extract_columns(rows);
  const int dim = int(cols.size());
  CorrelationMatrix r = CorrelationMatrix::identity(dim);
  for (int i = 0; i < dim; ++i)
    for (int j = i + 1; j < dim; ++j) {
      const double tau = kendall_tau(cols[i], cols[j]);
      double rho = std::sin(0.5 * M_PI * tau);
      rho = std::clamp(rho, -0.999, 0.999);
      r.at(i, j) = r.at(j, i) = rho;
    }
  pd_correction(r);
  return r;
}

CorrelationMatrix pearson_correlation(
    std::span<const std::vector<double>> rows) {
  if (rows.size() < 3)
    throw std::invalid_argument("need at least 3 rows to estimate correlation");
  const int dim = int(rows.front().size());
  Eigen::MatrixXd x(rows.size(), dim);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (int(rows[i].size()) != dim) throw std::invalid_argument("ragged sample rows");
    for (int j = 0; j < dim; ++j) x(long(i), j) = rows[i][j];
  }
  x.rowwise() -= x.colwise().mean();
  const Eigen::MatrixXd c = x.transpose() * x;
  CorrelationMatrix r = CorrelationMatrix::identity(dim);
  for (int i = 0; i < dim; ++i) {
    if (c(i, i) <= 0.0) throw DegenerateSampleError("constant sample column");
    for (int j = i + 1; j < dim; ++j) {
      const double rho =
          std::clamp(c(i, j) / std::sqrt(c(i, i) * c(j, j)), -1.0, 1.0);
      r.at(i, j) = r.at(j, i) = rho;
    }
  }
  // A sample correlation is positive semidefinite by construction, and with
  // more rows than columns almost surely strictly definite, so no repair is
  // applied here; factorization failures are handled where the Cholesky is
  // taken. Flooring eigenvalues here would put a width floor under genuinely
  // near-degenerate data and stall searches that need to follow a narrow
  // valley.
  return r;
}

double smallest_eigenvalue(const CorrelationMatrix& r) {
  Eigen::SelfAdjointEigenSolver<EigenRowMajor> es(as_eigen(r),
                                                  Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

void pd_correction(CorrelationMatrix& r, double eps) {
  for (int pass = 0; pass < 100; ++pass) {
    Eigen::SelfAdjointEigenSolver<EigenRowMajor> es(as_eigen(r),
                                                    Eigen::EigenvaluesOnly);
    const double lmin = es.eigenvalues().minCoeff();
    if (lmin >= eps) return;
    // Shrink toward the identity just enough to lift the smallest eigenvalue:
    // eigenvalues map to a*l + (1-a), so this lands the floor at 2*eps (the
    // headroom keeps the acceptance test exact in floating point). Shrinking
    // keeps the unit diagonal for free, and unlike eigenvalue clipping it
    // pulls extreme off-diagonals away from +-1, so a near-singular fit does
    // not lock a generational search into the same degenerate shape forever.
    const double a = (1.0 - 2.0 * eps) / (1.0 - lmin);
    for (int i = 0; i < r.dim; ++i)
      for (int j = 0; j < r.dim; ++j)
        if (i != j) r.at(i, j) *= a;
  }
  throw std::runtime_error("positive-definiteness repair did not converge");
}

IndependenceModel fit_independence(std::span<const std::vector<double>> rows,
                                   MarginKind kind) {
  return {fit_margins(rows, kind)};
}

GaussianCopulaModel fit_gaussian_copula(
    std::span<const std::vector<double>> rows, MarginKind kind) {
  GaussianCopulaModel m;
  m.margins = fit_margins(rows, kind);
  const int dim = int(m.margins.size());
  if (dim == 1 || rows.size() < 3) {
    m.corr = CorrelationMatrix::identity(dim);
  } else if (kind == MarginKind::Normal) {
    // With normal margins the model is the plain multivariate normal, so the
    // correlation is the Pearson sample correlation (the rank route caps
    // near-perfect dependence and cannot follow a valley-shaped fitness
    // landscape all the way in).
    m.corr = pearson_correlation(rows);
  } else {
    // Estimated on the margin-cdf scale, matching the sampling path (tau is
    // rank-based, so this agrees with raw-data estimation).
    std::vector<std::vector<double>> u(rows.begin(), rows.end());
    for (auto& row : u)
      for (int j = 0; j < dim; ++j) row[j] = cdf(m.margins[j], row[j]);
    m.corr = estimate_correlation(u);
  }
  m.chol = cholesky_factor(m.corr);
  return m;
}

std::vector<std::vector<double>> sample(const IndependenceModel& m, int count,
                                        std::uint64_t seed) {
  if (count < 1) throw std::invalid_argument("count must be positive");
  const std::size_t dim = m.margins.size();
  Rng rng(seed);
  std::vector<std::vector<double>> x(count, std::vector<double>(dim));
  for (auto& row : x)
    for (std::size_t j = 0; j < dim; ++j) {
      if (const auto* nm = std::get_if<NormalMargin>(&m.margins[j])) {
        row[j] = nm->mean + std::sqrt(nm->variance) * std_normal_quantile(rng.uniform());
      } else {
        // The kernel margin is a mixture of normals centered on the fitting
        // points, so with independent coordinates it can be drawn directly:
        // pick a point, then perturb by the bandwidth. Same distribution as
        // inverting the kernel cdf, without the per-draw root-find.
        const auto& km = std::get<KernelMargin>(m.margins[j]);
        const auto pick = std::min(
            km.points.size() - 1,
            std::size_t(rng.uniform() * double(km.points.size())));
        row[j] = km.points[pick] +
                 km.bandwidth * std_normal_quantile(rng.uniform());
      }
    }
  return x;
}

std::vector<std::vector<double>> sample(const GaussianCopulaModel& m, int count,
                                        std::uint64_t seed) {
  if (count < 1) throw std::invalid_argument("count must be positive");
  const int dim = int(m.margins.size());
  Rng rng(seed);
  std::vector<std::vector<double>> u(count, std::vector<double>(dim));
  std::vector<double> g(dim);
  for (auto& row : u) {
    for (int j = 0; j < dim; ++j) g[j] = std_normal_quantile(rng.uniform());
    for (int i = 0; i < dim; ++i) {
      double z = 0.0;
      for (int j = 0; j <= i; ++j) z += m.chol[std::size_t(i) * dim + j] * g[j];
      // For a normal margin the cdf/quantile round trip is the identity, so
      // apply it in closed form; other margins invert their cdf from u.
      if (const auto* nm = std::get_if<NormalMargin>(&m.margins[std::size_t(i)]))
        row[i] = nm->mean + std::sqrt(nm->variance) * z;
      else
        row[i] = std_normal_cdf(z);
    }
  }
  std::vector<int> kernel_cols;
  for (int j = 0; j < dim; ++j)
    if (std::holds_alternative<KernelMargin>(m.margins[std::size_t(j)]))
      kernel_cols.push_back(j);
  for (int j : kernel_cols) {
    std::vector<double> us(u.size()), out(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) us[i] = u[i][std::size_t(j)];
    quantile_batch(m.margins[std::size_t(j)], us, out);
    for (std::size_t i = 0; i < u.size(); ++i) u[i][std::size_t(j)] = out[i];
  }
  return u;
}

}  // namespace vineda
