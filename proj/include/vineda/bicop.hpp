#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace vineda {

// Families are listed in selection tie-break order: when two candidates reach
// the same fit statistic, the one listed first wins.
enum class CopulaFamily {
  Product,
  Normal,
  StudentT,
  Clayton,
  ClaytonRotated,  // 90-degree style rotation for negative dependence
  Gumbel,
  GumbelRotated,
};

std::string_view family_name(CopulaFamily f);
int parameter_count(CopulaFamily f);  // Product 0, StudentT 2, others 1

struct BivCopula {
  CopulaFamily family = CopulaFamily::Product;
  double rho = 0.0;    // Normal, StudentT
  double nu = 4.0;     // StudentT
  double theta = 0.0;  // (rotated) Clayton / Gumbel
};

void validate(const BivCopula& c);  // throws std::invalid_argument

double copula_cdf(const BivCopula& c, double u, double v);
double copula_pdf(const BivCopula& c, double u, double v);
double copula_log_pdf(const BivCopula& c, double u, double v);

// h_func(x, v) = P(U <= x | V = v), the cdf derivative in the second
// argument; h_inv solves it for x. h2 conditions on the first argument
// instead, which differs from h only for the rotated (non-exchangeable)
// families.
double h_func(const BivCopula& c, double x, double v);
double h_inv(const BivCopula& c, double u, double v);
double h2_func(const BivCopula& c, double y, double u);
double h2_inv(const BivCopula& c, double w, double u);

// Lower-orthant bivariate cdfs on the latent scale; exposed for testing.
double bvn_cdf(double x, double y, double rho);
double bvt_cdf(double x, double y, double rho, double nu);
// Reduced-quadrature variant (~1e-5 absolute) for scoring rank statistics,
// where the empirical side carries far more noise than that.
double bvt_cdf_coarse(double x, double y, double rho, double nu);

struct PseudoSample {
  std::vector<double> u;
  std::vector<double> v;
};

// Rank/(N+1) rescaling of both coordinates (ties broken by input position).
PseudoSample to_pseudo_obs(std::span<const double> xs, std::span<const double> ys);

// Fraction of sample points dominated by (u, v) componentwise.
double empirical_copula(const PseudoSample& s, double u, double v);

// Sum of squared cdf errors at the rank-rescaled sample points.
double cvm_statistic(const PseudoSample& s, const BivCopula& c);

struct IndependenceTest {
  double statistic = 0.0;
  double p_value = 1.0;
};

// Permutation test of the distance between the empirical copula and the
// product copula; larger p-values mean the data look independent.
IndependenceTest independence_test(const PseudoSample& s, std::uint64_t seed,
                                   int permutations = 99);

// Decision-only variant: same shuffle stream and statistic as the full
// test, same accept/reject outcome at the given level, but the permutation
// loop stops as soon as the exceedance count forces the outcome. This is
// most of the fitting cost on clearly dependent or clearly independent
// pairs, so edge selection uses it instead of the full p-value.
bool independence_accepted(const PseudoSample& s, std::uint64_t seed,
                           double level, int permutations = 99);

// Moment fit through Kendall's tau. Throws when the family cannot represent
// dependence of the given sign. StudentT keeps the default nu.
BivCopula fit_by_tau(CopulaFamily family, double tau);
bool family_admits_tau(CopulaFamily family, double tau);

// Profile likelihood fit of the t degrees of freedom on [1, 30].
double fit_t_df(const PseudoSample& s, double rho);

// Full selection step: independence test first, then the best-fitting
// sign-compatible candidate by the Cramer-von Mises distance.
BivCopula select_copula(const PseudoSample& s,
                        std::span<const CopulaFamily> candidates,
                        std::uint64_t seed, double independence_level = 0.1);

}  // namespace vineda
