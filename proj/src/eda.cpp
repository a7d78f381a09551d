#include "vineda/eda.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "vineda/mvmodel.hpp"
#include "vineda/rng.hpp"

namespace vineda {

namespace {

bool better(double a, double b, Direction d) {
  return d == Direction::Minimize ? a < b : a > b;
}

void validate(const Problem& p, const EdaConfig& c) {
  if (p.dimension < 1) throw std::invalid_argument("dimension must be positive");
  if (!p.objective) throw std::invalid_argument("objective is not set");
  if (p.init_box.size() != std::size_t(p.dimension))
    throw std::invalid_argument("init_box size must match dimension");
  for (const auto& iv : p.init_box)
    if (!(iv.lo < iv.hi))
      throw std::invalid_argument("init_box intervals need lo < hi");
  if (c.population_size < 2)
    throw std::invalid_argument("population_size must be at least 2");
  if (!(c.selection_fraction > 0.0 && c.selection_fraction < 1.0))
    throw std::invalid_argument("selection_fraction must be in (0,1)");
  if (int(c.selection_fraction * c.population_size) < 1)
    throw std::invalid_argument("selection would be empty at this population size");
  if (!(c.precision >= 0.0)) throw std::invalid_argument("precision must be >= 0");
  if (c.max_evaluations < 1)
    throw std::invalid_argument("max_evaluations must be positive");
}

TraceRecord make_record(int gen, double best,
                        std::span<const double> fitness,
                        std::span<const std::vector<double>> pop) {
  TraceRecord r;
  r.generation = gen;
  r.best = best;
  r.mean = std::accumulate(fitness.begin(), fitness.end(), 0.0) /
           double(fitness.size());
  const std::size_t dim = pop.front().size();
  r.variances.resize(dim);
  for (std::size_t j = 0; j < dim; ++j) {
    double m = 0.0;
    for (const auto& row : pop) m += row[j];
    m /= double(pop.size());
    double v = 0.0;
    for (const auto& row : pop) v += (row[j] - m) * (row[j] - m);
    r.variances[j] = v / double(pop.size());
  }
  return r;
}

}  // namespace

std::vector<std::vector<double>> truncation_select(
    std::span<const std::vector<double>> population,
    std::span<const double> fitness, double fraction, Direction direction) {
  if (population.empty()) throw std::invalid_argument("empty population");
  if (fitness.size() != population.size())
    throw std::invalid_argument("fitness size must match population size");
  if (!(fraction > 0.0 && fraction < 1.0))
    throw std::invalid_argument("selection fraction must be in (0,1)");
  const std::size_t keep =
      std::size_t(fraction * double(population.size()));
  if (keep == 0) throw std::invalid_argument("selection cut is empty");

  std::vector<std::size_t> idx(population.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return better(fitness[a], fitness[b], direction);
  });

  std::vector<std::vector<double>> out;
  out.reserve(keep);
  for (std::size_t i = 0; i < keep; ++i) out.push_back(population[idx[i]]);
  return out;
}

RunResult run_eda(const Problem& problem, const EdaConfig& config) {
  validate(problem, config);
  const int n = problem.dimension;
  const int pop_size = config.population_size;
  const Direction dir = problem.direction;

  std::vector<std::vector<double>> pop(pop_size, std::vector<double>(n));
  {
    Rng rng(mix_seed(config.seed, 0));
    for (auto& row : pop)
      for (int j = 0; j < n; ++j) {
        const Interval& iv = problem.init_box[j];
        row[j] = iv.lo + (iv.hi - iv.lo) * rng.uniform();
      }
  }

  RunResult out;
  double best = dir == Direction::Minimize
                    ? std::numeric_limits<double>::infinity()
                    : -std::numeric_limits<double>::infinity();
  std::vector<double> fitness(pop_size);
  long long evals = 0;

  for (int gen = 0;; ++gen) {
    for (int i = 0; i < pop_size; ++i) fitness[i] = problem.objective(pop[i]);
    evals += pop_size;
    for (double f : fitness)
      if (better(f, best, dir)) best = f;
    out.generations = gen + 1;
    if (config.record_trace) out.trace.push_back(make_record(gen, best, fitness, pop));

    if (std::abs(best - problem.optimum_value) <= config.precision) {
      out.success = true;
      break;
    }
    if (evals >= config.max_evaluations) break;

    auto selected =
        truncation_select(pop, fitness, config.selection_fraction, dir);

    // A zero-variance column (or a selection too small for the model) means
    // the search has collapsed; keep the best found so far.
    int depth = 0;
    std::vector<std::vector<double>> next;
    try {
      const std::uint64_t sample_seed = mix_seed(config.seed, gen + 1, 1);
      switch (config.algorithm) {
        case Algorithm::Umda:
          next = sample(fit_independence(selected, config.margins), pop_size,
                        sample_seed);
          break;
        case Algorithm::Gceda:
          next = sample(fit_gaussian_copula(selected, config.margins),
                        pop_size, sample_seed);
          break;
        case Algorithm::Cveda:
        case Algorithm::Dveda: {
          VineFitConfig vc = config.vine;
          vc.margins = config.margins;
          vc.seed = mix_seed(config.seed, gen + 1, 2);
          const VineKind kind = config.algorithm == Algorithm::Cveda
                                    ? VineKind::CVine
                                    : VineKind::DVine;
          VineModel m = fit_vine(selected, kind, vc);
          depth = m.truncation_level;
          next = vine_sample(m, pop_size, sample_seed);
          break;
        }
      }
    } catch (const std::runtime_error&) {
      break;  // degenerate column or other numerical failure while fitting
    } catch (const std::invalid_argument&) {
      break;  // selection too small for the model's minimum sample size
    }
    out.max_model_depth = std::max(out.max_model_depth, depth);
    if (config.record_trace) out.trace.back().model_depth = depth;
    pop = std::move(next);
  }

  out.evaluations_used = evals;
  out.best_value = best;
  return out;
}

}  // namespace vineda
