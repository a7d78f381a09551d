#pragma once

#include <span>
#include <stdexcept>
#include <variant>
#include <vector>

namespace vineda {

// Raised when a sample column has zero variance, so no continuous margin fits.
struct DegenerateSampleError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NormalMargin {
  double mean = 0.0;
  double variance = 1.0;
};

// Gaussian kernel smoothing of the empirical distribution with a
// Silverman-rule bandwidth.
struct KernelMargin {
  std::vector<double> points;  // sorted copy of the fitting sample
  double bandwidth = 1.0;
};

using Margin = std::variant<NormalMargin, KernelMargin>;

enum class MarginKind { Normal, Kernel };

NormalMargin fit_normal(std::span<const double> xs);
KernelMargin fit_kernel(std::span<const double> xs);
Margin fit_margin(MarginKind kind, std::span<const double> xs);

double cdf(const Margin& m, double x);
double pdf(const Margin& m, double x);
double log_pdf(const Margin& m, double x);
double quantile(const Margin& m, double u);  // u in (0,1)

// Fills out[i] = quantile(m, us[i]). Processes the inputs in ascending order
// and reuses each solution as the start for the next, which is far cheaper
// than independent cold starts for kernel margins.
void quantile_batch(const Margin& m, std::span<const double> us, std::span<double> out);

// Applies quantile_batch column by column: u[i][j] in (0,1) becomes
// quantile(margins[j], u[i][j]) in place.
std::vector<std::vector<double>> quantile_rows(const std::vector<Margin>& margins,
                                               std::vector<std::vector<double>> u);

}  // namespace vineda
