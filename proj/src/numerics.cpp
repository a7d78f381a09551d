#include "vineda/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

namespace vineda {

double std_normal_cdf(double x) { return 0.5 * std::erfc(-x * M_SQRT1_2); }

double std_normal_pdf(double x) {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
}

namespace {

// Acklam's rational approximation, |relative error| < 1.15e-9 before polish
constexpr double kQa[6] = {-3.969683028665376e+01, 2.209460984245205e+02,
                           -2.759285104469687e+02, 1.383577518672690e+02,
                           -3.066479806614716e+01, 2.506628277459239e+00};
constexpr double kQb[5] = {-5.447609879822406e+01, 1.615858368580409e+02,
                           -1.556989798598866e+02, 6.680131188771972e+01,
                           -1.328068155288572e+01};
constexpr double kQc[6] = {-7.784894002430293e-03, -3.223964580411365e-01,
                           -2.400758277161838e+00, -2.549732539343734e+00,
                           4.374664141464968e+00,  2.938163982698783e+00};
constexpr double kQd[4] = {7.784695709041462e-03, 3.224671290700398e-01,
                           2.445134137142996e+00, 3.754408661907416e+00};

double acklam_tail(double q) {
  return (((((kQc[0] * q + kQc[1]) * q + kQc[2]) * q + kQc[3]) * q + kQc[4]) * q + kQc[5]) /
         ((((kQd[0] * q + kQd[1]) * q + kQd[2]) * q + kQd[3]) * q + 1.0);
}

}  // namespace

double std_normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0))
    throw std::invalid_argument("std_normal_quantile: p outside (0,1)");
  double x;
  if (p < 0.02425) {
    x = acklam_tail(std::sqrt(-2.0 * std::log(p)));
  } else if (p <= 0.97575) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((kQa[0] * r + kQa[1]) * r + kQa[2]) * r + kQa[3]) * r + kQa[4]) * r + kQa[5]) * q /
        (((((kQb[0] * r + kQb[1]) * r + kQb[2]) * r + kQb[3]) * r + kQb[4]) * r + 1.0);
  } else {
    x = -acklam_tail(std::sqrt(-2.0 * std::log1p(-p)));
  }
  if (std::fabs(x) < 37.0) {  // beyond this exp(x^2/2) is unsafe and the seed is already fine
    const double e = std_normal_cdf(x) - p;
    const double u = e * std::sqrt(2.0 * M_PI) * std::exp(0.5 * x * x);
    x -= u / (1.0 + 0.5 * x * u);
  }
  return x;
}

double regularized_incomplete_beta(double x, double a, double b) {
  return regularized_incomplete_beta_c(x, 1.0 - x, a, b);
}

double regularized_incomplete_beta_c(double x, double xc, double a, double b) {
  if (!(a > 0.0) || !(b > 0.0))
    throw std::invalid_argument("regularized_incomplete_beta: a,b must be positive");
  if (x <= 0.0) return 0.0;
  if (xc <= 0.0) return 1.0;

  // modified Lentz continued fraction for I_x(a,b)
  const auto cf = [](double xx, double aa, double bb) {
    const double qab = aa + bb, qap = aa + 1.0, qam = aa - 1.0;
    const double tiny = 1e-30;
    double c = 1.0;
    double d = 1.0 - qab * xx / qap;
    if (std::fabs(d) < tiny) d = tiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= 300; ++m) {
      const double m2 = 2.0 * m;
      double num = m * (bb - m) * xx / ((qam + m2) * (aa + m2));
      d = 1.0 + num * d;
      if (std::fabs(d) < tiny) d = tiny;
      c = 1.0 + num / c;
      if (std::fabs(c) < tiny) c = tiny;
      d = 1.0 / d;
      h *= d * c;
      num = -(aa + m) * (qab + m) * xx / ((aa + m2) * (qap + m2));
      d = 1.0 + num * d;
      if (std::fabs(d) < tiny) d = tiny;
      c = 1.0 + num / c;
      if (std::fabs(c) < tiny) c = tiny;
      d = 1.0 / d;
      const double del = d * c;
      h *= del;
      if (std::fabs(del - 1.0) < 3e-16) break;
    }
    return h;
  };

  // callers hammer this with a fixed (a, b) and varying x, so the gamma
  // prefactor is worth remembering
  static thread_local double ca = -1.0, cb = -1.0, clg = 0.0;
  if (a != ca || b != cb) {
    clg = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b);
    ca = a;
    cb = b;
  }
  const double ln_front = clg + a * std::log(x) + b * std::log(xc);
  const double front = std::exp(ln_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * cf(x, a, b) / a;
  return 1.0 - front * cf(xc, b, a) / b;
}

double student_t_cdf(double x, double nu) {
  if (!(nu > 0.0)) throw std::invalid_argument("student_t_cdf: nu must be positive");
  if (x == 0.0) return 0.5;
  const double x2 = x * x;
  const double p = 0.5 * regularized_incomplete_beta_c(nu / (x2 + nu),
                                                       x2 / (x2 + nu), 0.5 * nu, 0.5);
  return x > 0.0 ? 1.0 - p : p;
}

double student_t_log_pdf(double x, double nu) {
  if (!(nu > 0.0)) throw std::invalid_argument("student_t_log_pdf: nu must be positive");
  static thread_local double cnu = -1.0, cc = 0.0;
  if (nu != cnu) {
    cc = std::lgamma(0.5 * (nu + 1.0)) - std::lgamma(0.5 * nu) -
         0.5 * std::log(nu * M_PI);
    cnu = nu;
  }
  return cc - 0.5 * (nu + 1.0) * std::log1p(x * x / nu);
}

double student_t_pdf(double x, double nu) { return std::exp(student_t_log_pdf(x, nu)); }

namespace {

// Cornish-Fisher style expansion around the normal quantile; rough for small
// nu, but the safeguarded refinement below tolerates a poor seed.
double t_quantile_seed(double p, double nu) {
  const double z = std_normal_quantile(p);
  const double z2 = z * z;
  const double g1 = z * (z2 + 1.0) / 4.0;
  const double g2 = z * ((5.0 * z2 + 16.0) * z2 + 3.0) / 96.0;
  const double g3 = z * (((3.0 * z2 + 19.0) * z2 + 17.0) * z2 - 15.0) / 384.0;
  const double g4 =
      z * ((((79.0 * z2 + 776.0) * z2 + 1482.0) * z2 - 1920.0) * z2 - 945.0) / 92160.0;
  const double in = 1.0 / nu;
  return z + in * (g1 + in * (g2 + in * (g3 + in * g4)));
}

double t_quantile_refine(double p, double nu, double x0) {
  // expand to a sign-changing bracket around the seed
  double lo = x0, hi = x0;
  double flo = student_t_cdf(lo, nu) - p;
  double fhi = flo;
  double step = 0.25 * (std::fabs(x0) + 1.0);
  for (int k = 0; k < 200 && flo > 0.0; ++k) {
    hi = lo;
    fhi = flo;
    lo -= step;
    step *= 2.0;
    flo = student_t_cdf(lo, nu) - p;
  }
  for (int k = 0; k < 200 && fhi < 0.0; ++k) {
    lo = hi;
    flo = fhi;
    hi += step;
    step *= 2.0;
    fhi = student_t_cdf(hi, nu) - p;
  }
  if (flo == 0.0) return lo;
  if (fhi == 0.0) return hi;

  double x = std::clamp(x0, lo, hi);
  for (int it = 0; it < 100; ++it) {
    const double f = student_t_cdf(x, nu) - p;
    if (f == 0.0 || std::fabs(f) < 1e-15) return x;
    if (f > 0.0) hi = x; else lo = x;
    const double dens = student_t_pdf(x, nu);
    double nx = std::numeric_limits<double>::quiet_NaN();
    if (dens > 0.0) {
      const double u = f / dens;
      const double corr = 1.0 + 0.5 * u * (nu + 1.0) * x / (nu + x * x);
      nx = x - (corr > 0.25 ? u / corr : u);
    }
    if (!(nx > lo && nx < hi)) nx = 0.5 * (lo + hi);
    if (hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() *
                       (std::fabs(lo) + std::fabs(hi)) + 1e-300)
      return nx;
    x = nx;
  }
  return x;
}

}  // namespace

double student_t_quantile(double p, double nu) {
  if (!(nu > 0.0)) throw std::invalid_argument("student_t_quantile: nu must be positive");
  if (!(p > 0.0 && p < 1.0))
    throw std::invalid_argument("student_t_quantile: p outside (0,1)");
  if (p == 0.5) return 0.0;
  if (nu == 1.0) return std::tan(M_PI * (p - 0.5));
  if (nu == 2.0) return (2.0 * p - 1.0) / std::sqrt(2.0 * p * (1.0 - p));
  return t_quantile_refine(p, nu, t_quantile_seed(p, nu));
}

double student_t_quantile_hinted(double p, double nu, double hint) {
  if (!(nu > 0.0)) throw std::invalid_argument("student_t_quantile: nu must be positive");
  if (!(p > 0.0 && p < 1.0))
    throw std::invalid_argument("student_t_quantile: p outside (0,1)");
  if (p == 0.5) return 0.0;
  if (!std::isfinite(hint)) return student_t_quantile(p, nu);
  return t_quantile_refine(p, nu, hint);
}

namespace {

// strict inversions (i < j with v[i] > v[j]) counted during a merge sort
long long merge_count(std::vector<double>& v, std::vector<double>& buf,
                      std::size_t lo, std::size_t hi) {
  if (hi - lo < 2) return 0;
  const std::size_t mid = lo + (hi - lo) / 2;
  long long count = merge_count(v, buf, lo, mid) + merge_count(v, buf, mid, hi);
  std::size_t i = lo, j = mid, k = lo;
  while (i < mid && j < hi) {
    if (v[j] < v[i]) {
      count += static_cast<long long>(mid - i);
      buf[k++] = v[j++];
    } else {
      buf[k++] = v[i++];
    }
  }
  while (i < mid) buf[k++] = v[i++];
  while (j < hi) buf[k++] = v[j++];
  std::copy(buf.begin() + lo, buf.begin() + hi, v.begin() + lo);
  return count;
}

long long tied_pairs(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  long long pairs = 0, run = 1;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] == v[i - 1]) ++run;
    else {
      pairs += run * (run - 1) / 2;
      run = 1;
    }
  }
  return pairs + run * (run - 1) / 2;
}

}  // namespace

// concordant-minus-discordant via Knight's algorithm: sort by (x, y), count
// inversions of the y sequence, and correct for tied pairs; pairs tied in
// either coordinate contribute zero, the denominator stays n(n-1)/2 (tau-a).
double kendall_tau(std::span<const double> xs, std::span<const double> ys) {
  const std::size_t n = xs.size();
  if (ys.size() != n) throw std::invalid_argument("kendall_tau: length mismatch");
  if (n < 2) throw std::invalid_argument("kendall_tau: need at least two points");
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    if (xs[a] != xs[b]) return xs[a] < xs[b];
    return ys[a] < ys[b];
  });
  std::vector<double> yseq(n);
  for (std::size_t i = 0; i < n; ++i) yseq[i] = ys[idx[i]];

  long long xtie = 0, ntie = 0, xrun = 1, xyrun = 1;
  for (std::size_t i = 1; i < n; ++i) {
    const bool same_x = xs[idx[i]] == xs[idx[i - 1]];
    const bool same_xy = same_x && yseq[i] == yseq[i - 1];
    if (same_x) ++xrun;
    else {
      xtie += xrun * (xrun - 1) / 2;
      xrun = 1;
    }
    if (same_xy) ++xyrun;
    else {
      ntie += xyrun * (xyrun - 1) / 2;
      xyrun = 1;
    }
  }
  xtie += xrun * (xrun - 1) / 2;
  ntie += xyrun * (xyrun - 1) / 2;
  const long long ytie = tied_pairs(yseq);

  std::vector<double> buf(n);
  const long long dis = merge_count(yseq, buf, 0, n);
  const long long tot = static_cast<long long>(n) * (n - 1) / 2;
  const long long net = tot - xtie - ytie + ntie - 2 * dis;
  return static_cast<double>(net) / (0.5 * static_cast<double>(n) * static_cast<double>(n - 1));
}

namespace detail {

double safeguarded_root(double (*f)(double, const void*), const void* ctx, Interval br,
                        double fa, double fb, double tol, int max_iter) {
  double a = br.lo, b = br.hi;
  if (fa == 0.0) return a;
  if (fb == 0.0) return b;
  if ((fa > 0.0) == (fb > 0.0))
    throw std::invalid_argument("brent_root: bracket does not straddle a root");

  double c = a, fc = fa;
  double d = b - a, e = d;
  for (int it = 0; it < max_iter; ++it) {
    if ((fb > 0.0) == (fc > 0.0)) {
      c = a;
      fc = fa;
      d = b - a;
      e = d;
    }
    if (std::fabs(fc) < std::fabs(fb)) {
      a = b; b = c; c = a;
      fa = fb; fb = fc; fc = fa;
    }
    const double tol1 = 2.0 * std::numeric_limits<double>::epsilon() * std::fabs(b) + 0.5 * tol;
    const double xm = 0.5 * (c - b);
    if (std::fabs(xm) <= tol1 || fb == 0.0) return b;
    if (std::fabs(e) >= tol1 && std::fabs(fa) > std::fabs(fb)) {
      double p, q;
      const double s = fb / fa;
      if (a == c) {
        p = 2.0 * xm * s;
        q = 1.0 - s;
      } else {
        q = fa / fc;
        const double r = fb / fc;
        p = s * (2.0 * xm * q * (q - r) - (b - a) * (r - 1.0));
        q = (q - 1.0) * (r - 1.0) * (s - 1.0);
      }
      if (p > 0.0) q = -q;
      p = std::fabs(p);
      if (2.0 * p < std::min(3.0 * xm * q - std::fabs(tol1 * q), std::fabs(e * q))) {
        e = d;
        d = p / q;
      } else {
        d = xm;
        e = d;
      }
    } else {
      d = xm;
      e = d;
    }
    a = b;
    fa = fb;
    b += std::fabs(d) > tol1 ? d : (xm > 0.0 ? tol1 : -tol1);
    fb = f(b, ctx);
  }
  throw std::runtime_error("brent_root: iteration limit reached");
}

}  // namespace detail

}  // namespace vineda
