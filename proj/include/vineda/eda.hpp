#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "vineda/margins.hpp"
#include "vineda/numerics.hpp"
#include "vineda/vine.hpp"

namespace vineda {

enum class Direction { Minimize, Maximize };

// Umda fits independent margins, Gceda a Gaussian copula, and the vine
// variants a C- or D-vine, all over the same margin choices.
enum class Algorithm { Umda, Gceda, Cveda, Dveda };

struct Problem {
  int dimension = 0;
  std::function<double(std::span<const double>)> objective;
  Direction direction = Direction::Minimize;
  double optimum_value = 0.0;
  std::vector<Interval> init_box;  // one per variable, lo < hi
};

struct EdaConfig {
  Algorithm algorithm = Algorithm::Umda;
  MarginKind margins = MarginKind::Normal;
  int population_size = 100;  // >= 2
  double selection_fraction = 0.3;
  double precision = 1e-6;
  long long max_evaluations = 500000;
  VineFitConfig vine;  // truncation/structure/families for the vine variants
  std::uint64_t seed = 0;
  bool record_trace = false;
};

struct TraceRecord {
  int generation = 0;
  double best = 0.0;  // best-so-far after this generation was evaluated
  double mean = 0.0;  // mean objective of this generation
  std::vector<double> variances;  // per-variable population variance
  int model_depth = 0;  // trees kept by the model fitted on this generation
};

struct RunResult {
  bool success = false;
  long long evaluations_used = 0;
  double best_value = 0.0;
  int generations = 0;      // populations evaluated, counting the initial one
  int max_model_depth = 0;  // deepest vine fitted anywhere in the run
  std::vector<TraceRecord> trace;
};

// Top floor(fraction * N) rows by fitness, best first, direction-aware;
// ties keep the original index order. Throws when the cut is empty.
std::vector<std::vector<double>> truncation_select(
    std::span<const std::vector<double>> population,
    std::span<const double> fitness, double fraction, Direction direction);

// Generational loop: uniform initialization inside init_box, then
// evaluate -> stop on |best - optimum| <= precision or an exhausted
// evaluation budget -> truncation selection -> model fit -> resample the
// full population (no elitism). Degenerate-sample errors raised while
// fitting end the run with the current best. Deterministic per seed.
RunResult run_eda(const Problem& problem, const EdaConfig& config);

}  // namespace vineda
