#include "vineda/margins.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>

#include "vineda/numerics.hpp"

namespace vineda {

namespace {

// Kernels beyond this many bandwidths contribute 0 or 1 to the cdf (and
// nothing to the pdf) at double precision relevant to our tolerances.
constexpr double kKernelReach = 8.5;

struct Moments {
  double mean;
  double variance;  // N-1 divisor
};

Moments sample_moments(std::span<const double> xs) {
  const std::size_t n = xs.size();
  if (n < 2) throw std::invalid_argument("margin fit needs at least 2 points");
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(n);
  double ss = 0.0;
  for (double x : xs) {
    const double d = x - mean;
    ss += d * d;
  }
  return {mean, ss / static_cast<double>(n - 1)};
}

// Quantile of a sorted sample by linear interpolation of order statistics.
double sorted_sample_quantile(const std::vector<double>& sorted, double p) {
  const std::size_t n = sorted.size();
  const double pos = p * static_cast<double>(n - 1);
  const auto lo = static_cast<std::size_t>(pos);
  if (lo + 1 >= n) return sorted.back();
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

double kernel_cdf(const KernelMargin& m, double x) {
  const auto& ys = m.points;
  const double h = m.bandwidth;
  const auto first =
      std::lower_bound(ys.begin(), ys.end(), x - kKernelReach * h);
  const auto last = std::upper_bound(first, ys.end(), x + kKernelReach * h);
  double acc = static_cast<double>(first - ys.begin());  // saturated kernels
  for (auto it = first; it != last; ++it)
    acc += std_normal_cdf((x - *it) / h);
  return acc / static_cast<double>(ys.size());
}

double kernel_pdf(const KernelMargin& m, double x) {
  const auto& ys = m.points;
  const double h = m.bandwidth;
  const auto first =
      std::lower_bound(ys.begin(), ys.end(), x - kKernelReach * h);
  const auto last = std::upper_bound(first, ys.end(), x + kKernelReach * h);
  double acc = 0.0;
  for (auto it = first; it != last; ++it)
    acc += std_normal_pdf((x - *it) / h);
  return acc / (static_cast<double>(ys.size()) * h);
}

// Solves kernel_cdf(x) = u by Newton iteration started from the empirical
// quantile (or a caller-provided hint), falling back to bisection on the
// bracket [min - 10h, max + 10h] whenever a step misbehaves.
double kernel_quantile(const KernelMargin& m, double u, double hint) {
  if (!(u > 0.0 && u < 1.0))
    throw std::domain_error("quantile requires u in (0,1)");
  const double h = m.bandwidth;
  double lo = m.points.front() - 10.0 * h;
  double hi = m.points.back() + 10.0 * h;
  double x = std::isfinite(hint) ? hint : sorted_sample_quantile(m.points, u);
  if (!(x > lo && x < hi)) x = 0.5 * (lo + hi);
  constexpr double kTol = 1e-11;
  constexpr int kMaxIter = 100;
  for (int it = 0; it < kMaxIter; ++it) {
    const double f = kernel_cdf(m, x) - u;
    if (std::fabs(f) <= kTol) return x;
    if (f > 0.0)
      hi = std::min(hi, x);
    else
      lo = std::max(lo, x);
    // When the kernels have collapsed to near-point masses the cdf is a
    // staircase and no x can meet the |f| tolerance between steps; the
    // bracket width is then the only meaningful convergence measure.
    if (hi - lo <= 1e-14 * (1.0 + std::fabs(lo))) return 0.5 * (lo + hi);
    const double d = kernel_pdf(m, x);
    double nx = x - f / d;
    if (!(nx > lo && nx < hi)) nx = 0.5 * (lo + hi);  // also catches d == 0
    x = nx;
  }
  // Newton made poor progress (essentially flat cdf); finish by bisection.
  for (int it = 0; it < 200 && hi - lo > 1e-14 * (1.0 + std::fabs(lo)); ++it) {
    const double mid = 0.5 * (lo + hi);
    if (kernel_cdf(m, mid) - u > 0.0)
      hi = mid;
    else
      lo = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

NormalMargin fit_normal(std::span<const double> xs) {
  const Moments mo = sample_moments(xs);
  if (!(mo.variance > 0.0) || !std::isfinite(mo.variance))
    throw DegenerateSampleError("sample variance is zero");
  return {mo.mean, mo.variance};
}

KernelMargin fit_kernel(std::span<const double> xs) {
  const Moments mo = sample_moments(xs);
  if (!(mo.variance > 0.0) || !std::isfinite(mo.variance))
    throw DegenerateSampleError("sample variance is zero");
  KernelMargin m;
  m.points.assign(xs.begin(), xs.end());
  std::sort(m.points.begin(), m.points.end());
  const double sd = std::sqrt(mo.variance);
  const double iqr =
      sorted_sample_quantile(m.points, 0.75) - sorted_sample_quantile(m.points, 0.25);
  const double scale = iqr > 0.0 ? std::min(sd, iqr / 1.34) : sd;
  m.bandwidth =
      0.9 * scale * std::pow(static_cast<double>(xs.size()), -0.2);
  return m;
}

Margin fit_margin(MarginKind kind, std::span<const double> xs) {
  if (kind == MarginKind::Normal) return fit_normal(xs);
  return fit_kernel(xs);
}

double cdf(const Margin& m, double x) {
  if (const auto* nm = std::get_if<NormalMargin>(&m))
    return std_normal_cdf((x - nm->mean) / std::sqrt(nm->variance));
  return kernel_cdf(std::get<KernelMargin>(m), x);
}

double pdf(const Margin& m, double x) {
  if (const auto* nm = std::get_if<NormalMargin>(&m)) {
    const double sd = std::sqrt(nm->variance);
    return std_normal_pdf((x - nm->mean) / sd) / sd;
  }
  return kernel_pdf(std::get<KernelMargin>(m), x);
}

double log_pdf(const Margin& m, double x) {
  if (const auto* nm = std::get_if<NormalMargin>(&m)) {
    const double d = x - nm->mean;
    return -0.5 * (std::log(2.0 * M_PI * nm->variance) + d * d / nm->variance);
  }
  return std::log(pdf(m, x));
}

double quantile(const Margin& m, double u) {
  if (const auto* nm = std::get_if<NormalMargin>(&m)) {
    if (!(u > 0.0 && u < 1.0))
      throw std::domain_error("quantile requires u in (0,1)");
    return nm->mean + std::sqrt(nm->variance) * std_normal_quantile(u);
  }
  return kernel_quantile(std::get<KernelMargin>(m), u,
                         std::numeric_limits<double>::quiet_NaN());
}

void quantile_batch(const Margin& m, std::span<const double> us,
                    std::span<double> out) {
  if (us.size() != out.size())
    throw std::invalid_argument("quantile_batch size mismatch");
  if (const auto* nm = std::get_if<NormalMargin>(&m)) {
    const double sd = std::sqrt(nm->variance);
    for (std::size_t i = 0; i < us.size(); ++i) {
      if (!(us[i] > 0.0 && us[i] < 1.0))
        throw std::domain_error("quantile requires u in (0,1)");
      out[i] = nm->mean + sd * std_normal_quantile(us[i]);
    }
    return;
  }
  const auto& km = std::get<KernelMargin>(m);
  std::vector<std::size_t> idx(us.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(),
            [&us](std::size_t a, std::size_t b) { return us[a] < us[b]; });
  double hint = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t i : idx) {
    hint = kernel_quantile(km, us[i], hint);
    out[i] = hint;
  }
}

std::vector<std::vector<double>> quantile_rows(const std::vector<Margin>& margins,
                                               std::vector<std::vector<double>> u) {
  const std::size_t count = u.size();
  std::vector<double> in(count), out(count);
  for (std::size_t j = 0; j < margins.size(); ++j) {
    for (std::size_t i = 0; i < count; ++i) in[i] = u[i][j];
    quantile_batch(margins[j], in, out);
    for (std::size_t i = 0; i < count; ++i) u[i][j] = out[i];
  }
  return u;
}

}  // namespace vineda
