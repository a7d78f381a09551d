#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vineda/eda.hpp"

namespace vineda {

enum class BenchFunction { Sphere, Griewank, Ackley, SummationCancellation };

// Exact formula evaluation. The first three are minimized with optimum 0 at
// the origin; summation cancellation is maximized, its optimum is 1/1e-5 at
// the origin (the cumulative sums all vanish).
double evaluate(BenchFunction fn, std::span<const double> x);

std::string_view function_name(BenchFunction fn);  // "sphere", "sumcan", ...
std::optional<BenchFunction> parse_function(std::string_view name);

// Initialization intervals used throughout the experiments: a symmetric box
// centered on the optimum and a shifted one with the same width.
Interval symmetric_box(BenchFunction fn);
Interval asymmetric_box(BenchFunction fn);

Problem make_problem(BenchFunction fn, int dimension, Interval box);

struct BisectionConfig {
  int initial_size = 16;        // >= 4
  int required_successes = 30;  // out of `runs` probe runs per size
  int runs = 30;
  double relative_width_stop = 0.05;  // in (0,1)
  int max_size = 2000;
};

struct CriticalSearch {
  int population = 0;  // smallest passing size probed; max_size when !found
  bool found = false;
};

// Doubling from initial_size until a size passes (or max_size fails), then
// bisection between the last failing and first passing size until the
// relative width (hi - lo) / hi drops to the stop value.
CriticalSearch find_critical_size(const std::function<bool(int)>& succeeds,
                                  const BisectionConfig& cfg);

struct ExperimentSpec {
  BenchFunction function = BenchFunction::Sphere;
  int dimension = 10;
  Interval box{-600.0, 600.0};
  EdaConfig eda;  // population size and seed are overwritten per probe run
  BisectionConfig search;
  std::string label;  // CSV algorithm column; algorithm_label(eda) if empty
  bool trace_first_run = false;
};

struct ExperimentResult {
  std::string algorithm;
  std::string function;
  std::string box;  // "lo:hi"
  int successes = 0;
  int runs = 0;
  int population = 0;
  bool critical_found = false;
  double evals_mean = 0.0;
  double evals_std = 0.0;
  double best_mean = 0.0;
  double best_std = 0.0;
  // Per final run, not serialized: deepest vine fitted, and the first run's
  // per-generation trace when requested.
  std::vector<int> model_depths;
  std::vector<TraceRecord> trace;
};

// "umda-normal", "dveda-aic-greedy-kernel", "cveda-full-greedy-normal-f=normal"
std::string algorithm_label(const EdaConfig& cfg);

// Seeded success count at a fixed population size, using the same seed
// stream as the bisection probes: mix(seed, size, run index).
int count_successes(const ExperimentSpec& spec, int population, int runs,
                    std::uint64_t seed);

// Finds the critical population with all-runs-must-pass probes, then reports
// statistics over `runs` fresh seeded runs at that size. Means and standard
// deviations cover successful runs only, or every run when none succeed.
ExperimentResult run_experiment(const ExperimentSpec& spec, int runs,
                                std::uint64_t seed);

// columns: algorithm,function,box,success,population,evals_mean,evals_std,
// best_mean,best_std. Doubles are written with %.17g so parsing an emitted
// file reproduces the values bit-exactly.
void write_csv(std::ostream& os, std::span<const ExperimentResult> rows);
std::vector<ExperimentResult> parse_csv(std::istream& is);

// columns: generation,best,mean,var_0..var_{n-1}
void write_trace_csv(std::ostream& os, std::span<const TraceRecord> trace);

// Experiment rows of the published tables (1-10) at the configured scale.
std::vector<ExperimentSpec> table_preset(int table);

// Flag-driven entry point (args exclude the program name). Returns 0 on
// completion, 2 on configuration errors.
int cli_main(std::vector<std::string> args);

}  // namespace vineda
