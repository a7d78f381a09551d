#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "vineda/margins.hpp"

namespace vineda {

// Dense symmetric matrix with unit diagonal, row-major.
struct CorrelationMatrix {
  int dim = 0;
  std::vector<double> entries;

  static CorrelationMatrix identity(int dim);
  double at(int i, int j) const { return entries[std::size_t(i) * dim + j]; }
  double& at(int i, int j) { return entries[std::size_t(i) * dim + j]; }
};

// Pairwise Kendall tau mapped through sin(pi tau / 2), clamped to |r| <=
// 0.999, then repaired to be positive definite. Rows are observations;
// requires at least 3 of them.
CorrelationMatrix estimate_correlation(std::span<const std::vector<double>> rows);

// Plain sample (Pearson) correlation. Used with normal margins, where the
// Gaussian copula model reduces to the multivariate normal and rank-based
// estimation would cap strong dependence. Positive semidefinite by
// construction, so it is not eigenvalue-floored; callers factorizing it
// repair only on failure.
CorrelationMatrix pearson_correlation(std::span<const std::vector<double>> rows);

// Shrinks the off-diagonal toward the identity until the smallest eigenvalue
// clears eps (the shrink factor is chosen to land it at 2*eps, so one pass
// suffices). No-op on matrices that already satisfy the bound, which also
// makes the repair idempotent.
void pd_correction(CorrelationMatrix& r, double eps = 1e-6);

double smallest_eigenvalue(const CorrelationMatrix& r);  // exposed for testing

struct IndependenceModel {
  std::vector<Margin> margins;
};

struct GaussianCopulaModel {
  std::vector<Margin> margins;
  CorrelationMatrix corr;
  std::vector<double> chol;  // lower-triangular factor of corr, row-major
};

// Margins are fitted per column; the Gaussian model then estimates the
// correlation on the margin-cdf-transformed sample. Degenerate columns
// raise DegenerateSampleError.
IndependenceModel fit_independence(std::span<const std::vector<double>> rows,
                                   MarginKind kind);
GaussianCopulaModel fit_gaussian_copula(std::span<const std::vector<double>> rows,
                                        MarginKind kind);

// Deterministic given the seed. Independence: coordinates are drawn from
// each margin directly (normal margins in closed form, kernel margins as the
// point-plus-bandwidth-noise mixture they are). Gaussian: z = chol * g with
// g standard normal, u = Phi(z), then margin quantiles.
std::vector<std::vector<double>> sample(const IndependenceModel& m, int count,
                                        std::uint64_t seed);
std::vector<std::vector<double>> sample(const GaussianCopulaModel& m, int count,
                                        std::uint64_t seed);

}  // namespace vineda
