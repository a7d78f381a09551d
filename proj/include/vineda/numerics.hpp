#pragma once

#include <span>
#include <stdexcept>
#include <utility>

namespace vineda {

struct Interval {
  double lo;
  double hi;
};

double std_normal_cdf(double x);
double std_normal_pdf(double x);

// Inverse standard normal CDF, p in (0,1). Rational approximation polished by
// one Halley step; absolute error stays below 1e-13 over the full range.
double std_normal_quantile(double p);

// I_x(a,b), continued-fraction evaluation
double regularized_incomplete_beta(double x, double a, double b);
// Variant taking the exactly computed complement xc = 1 - x, which avoids
// cancellation when x is within a few ulp of 1.
double regularized_incomplete_beta_c(double x, double xc, double a, double b);

double student_t_cdf(double x, double nu);
double student_t_pdf(double x, double nu);
double student_t_log_pdf(double x, double nu);
double student_t_quantile(double p, double nu);

// Same as student_t_quantile but started from a caller-supplied guess, which
// saves most of the work when evaluating many nearby quantiles.
double student_t_quantile_hinted(double p, double nu, double hint);

// Kendall's tau-a by direct concordance count over all pairs; tied pairs
// count as neither concordant nor discordant.
double kendall_tau(std::span<const double> xs, std::span<const double> ys);

namespace detail {
double safeguarded_root(double (*f)(double, const void*), const void* ctx, Interval br,
                        double fa, double fb, double tol, int max_iter);
}

// Brent's method on [bracket.lo, bracket.hi]; requires a sign change.
template <class F>
double brent_root(F&& f, Interval bracket, double tol = 1e-12, int max_iter = 200) {
  const double fa = f(bracket.lo);
  const double fb = f(bracket.hi);
  auto thunk = [](double x, const void* ctx) -> double {
    return (*static_cast<const std::remove_reference_t<F>*>(ctx))(x);
  };
  return detail::safeguarded_root(+thunk, &f, bracket, fa, fb, tol, max_iter);
}

}  // namespace vineda
