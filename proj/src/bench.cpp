#include "vineda/bench.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "vineda/bicop.hpp"
#include "vineda/rng.hpp"

namespace vineda {

double evaluate(BenchFunction fn, std::span<const double> x) {
  const std::size_t n = x.size();
  switch (fn) {
    case BenchFunction::Sphere: {
      double s = 0.0;
      for (double v : x) s += v * v;
      return s;
    }
    case BenchFunction::Griewank: {
      double s = 0.0, p = 1.0;
      for (std::size_t i = 0; i < n; ++i) {
        s += x[i] * x[i];
        p *= std::cos(x[i] / std::sqrt(double(i + 1)));
      }
      return 1.0 + s / 4000.0 - p;
    }
    case BenchFunction::Ackley: {
      double s = 0.0, c = 0.0;
      for (double v : x) {
        s += v * v;
        c += std::cos(2.0 * M_PI * v);
      }
      // Grouped so both parts vanish exactly at the origin.
      return 20.0 * (1.0 - std::exp(-0.2 * std::sqrt(s / double(n)))) +
             (std::exp(1.0) - std::exp(c / double(n)));
    }
    case BenchFunction::SummationCancellation: {
      double y = 0.0, s = 0.0;
      for (double v : x) {
        y += v;
        s += std::abs(y);
      }
      return 1.0 / (1e-5 + s);
    }
  }
  return 0.0;
}

std::string_view function_name(BenchFunction fn) {
  switch (fn) {
    case BenchFunction::Sphere: return "sphere";
    case BenchFunction::Griewank: return "griewank";
    case BenchFunction::Ackley: return "ackley";
    case BenchFunction::SummationCancellation: return "sumcan";
  }
  return "?";
}

std::optional<BenchFunction> parse_function(std::string_view name) {
  for (BenchFunction fn :
       {BenchFunction::Sphere, BenchFunction::Griewank, BenchFunction::Ackley,
        BenchFunction::SummationCancellation})
    if (name == function_name(fn)) return fn;
  return std::nullopt;
}

Interval symmetric_box(BenchFunction fn) {
  switch (fn) {
    case BenchFunction::Sphere:
    case BenchFunction::Griewank: return {-600.0, 600.0};
    case BenchFunction::Ackley: return {-30.0, 30.0};
    case BenchFunction::SummationCancellation: return {-0.16, 0.16};
  }
  return {-1.0, 1.0};
}

Interval asymmetric_box(BenchFunction fn) {
  switch (fn) {
    case BenchFunction::Sphere:
    case BenchFunction::Griewank: return {-300.0, 900.0};
    case BenchFunction::Ackley: return {-15.0, 45.0};
    case BenchFunction::SummationCancellation: return {-0.08, 0.24};
  }
  return {-0.5, 1.5};
}

Problem make_problem(BenchFunction fn, int dimension, Interval box) {
  Problem p;
  p.dimension = dimension;
  p.objective = [fn](std::span<const double> x) { return evaluate(fn, x); };
  if (fn == BenchFunction::SummationCancellation) {
    p.direction = Direction::Maximize;
    p.optimum_value = 1.0 / 1e-5;
  } else {
    p.direction = Direction::Minimize;
    p.optimum_value = 0.0;
  }
  p.init_box.assign(std::size_t(dimension), box);
  return p;
}

CriticalSearch find_critical_size(const std::function<bool(int)>& succeeds,
                                  const BisectionConfig& cfg) {
  if (cfg.initial_size < 4)
    throw std::invalid_argument("initial_size must be at least 4");
  if (!(cfg.relative_width_stop > 0.0 && cfg.relative_width_stop < 1.0))
    throw std::invalid_argument("relative_width_stop must be in (0,1)");
  if (cfg.max_size < cfg.initial_size)
    throw std::invalid_argument("max_size must be at least initial_size");

  int size = cfg.initial_size;
  int last_fail = 0;
  while (!succeeds(size)) {
    last_fail = size;
    if (size >= cfg.max_size) return {cfg.max_size, false};
    size = std::min(size * 2, cfg.max_size);
  }
  if (last_fail == 0) return {size, true};  // the first probe already passed

  int lo = last_fail, hi = size;
  while (double(hi - lo) / double(hi) > cfg.relative_width_stop) {
    const int mid = lo + (hi - lo) / 2;
    if (mid == lo) break;
    if (succeeds(mid))
      hi = mid;
    else
      lo = mid;
  }
  return {hi, true};
}

std::string algorithm_label(const EdaConfig& cfg) {
  std::string algo;
  switch (cfg.algorithm) {
    case Algorithm::Umda: algo = "umda"; break;
    case Algorithm::Gceda: algo = "gceda"; break;
    case Algorithm::Cveda: algo = "cveda"; break;
    case Algorithm::Dveda: algo = "dveda"; break;
  }
  const std::string marg = cfg.margins == MarginKind::Normal ? "normal" : "kernel";
  if (cfg.algorithm == Algorithm::Umda || cfg.algorithm == Algorithm::Gceda)
    return algo + "-" + marg;

  std::string trunc;
  switch (cfg.vine.truncation.mode) {
    case TruncationMode::Aic: trunc = "aic"; break;
    case TruncationMode::Bic: trunc = "bic"; break;
    case TruncationMode::Fixed:
      trunc = cfg.vine.truncation.level < 0
                  ? "full"
                  : std::to_string(cfg.vine.truncation.level);
      break;
  }
  const std::string structure =
      cfg.vine.structure == StructureMode::Greedy ? "greedy" : "random";
  std::string label = algo + "-" + trunc + "-" + structure + "-" + marg;
  if (!cfg.vine.families.empty()) {
    label += "-f=";
    for (std::size_t i = 0; i < cfg.vine.families.size(); ++i) {
      if (i) label += "+";
      label += family_name(cfg.vine.families[i]);
    }
  }
  return label;
}

namespace {

RunResult run_at(const ExperimentSpec& spec, const Problem& problem,
                 int population, std::uint64_t run_seed, bool trace) {
  EdaConfig cfg = spec.eda;
  cfg.population_size = population;
  cfg.seed = run_seed;
  cfg.record_trace = trace;
  return run_eda(problem, cfg);
}

std::pair<double, double> mean_std(std::span<const double> xs) {
  if (xs.empty()) return {0.0, 0.0};
  const double m =
      std::accumulate(xs.begin(), xs.end(), 0.0) / double(xs.size());
  if (xs.size() < 2) return {m, 0.0};
  double s = 0.0;
  for (double x : xs) s += (x - m) * (x - m);
  return {m, std::sqrt(s / double(xs.size() - 1))};
}

std::string format_interval(Interval iv) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%g:%g", iv.lo, iv.hi);
  return buf;
}

}  // namespace

int count_successes(const ExperimentSpec& spec, int population, int runs,
                    std::uint64_t seed) {
  const Problem problem = make_problem(spec.function, spec.dimension, spec.box);
  int successes = 0;
  for (int i = 0; i < runs; ++i)
    if (run_at(spec, problem, population,
               mix_seed(seed, std::uint64_t(population), std::uint64_t(i)),
               false)
            .success)
      ++successes;
  return successes;
}

ExperimentResult run_experiment(const ExperimentSpec& spec, int runs,
                                std::uint64_t seed) {
  if (runs < 1) throw std::invalid_argument("runs must be positive");
  BisectionConfig search = spec.search;
  search.runs = runs;
  search.required_successes = runs;
  const Problem problem = make_problem(spec.function, spec.dimension, spec.box);

  // Probes abort on the first failure beyond what required_successes allows.
  auto succeeds = [&](int size) {
    int failures = 0;
    for (int i = 0; i < search.runs; ++i)
      if (!run_at(spec, problem, size,
                  mix_seed(seed, std::uint64_t(size), std::uint64_t(i)), false)
               .success)
        if (++failures > search.runs - search.required_successes) return false;
    return true;
  };
  const CriticalSearch crit = find_critical_size(succeeds, search);

  ExperimentResult out;
  out.algorithm = spec.label.empty() ? algorithm_label(spec.eda) : spec.label;
  out.function = std::string(function_name(spec.function));
  out.box = format_interval(spec.box);
  out.runs = runs;
  out.population = crit.population;
  out.critical_found = crit.found;

  // Fresh seeds for the reported runs: offset past the probe stream.
  std::vector<double> ok_evals, ok_bests, all_evals, all_bests;
  for (int i = 0; i < runs; ++i) {
    const bool trace = spec.trace_first_run && i == 0;
    RunResult r = run_at(
        spec, problem, crit.population,
        mix_seed(seed, std::uint64_t(crit.population), std::uint64_t(runs + i)),
        trace);
    if (trace) out.trace = std::move(r.trace);
    out.model_depths.push_back(r.max_model_depth);
    all_evals.push_back(double(r.evaluations_used));
    all_bests.push_back(r.best_value);
    if (r.success) {
      ++out.successes;
      ok_evals.push_back(double(r.evaluations_used));
      ok_bests.push_back(r.best_value);
    }
  }
  const bool any = out.successes > 0;
  std::tie(out.evals_mean, out.evals_std) = mean_std(any ? ok_evals : all_evals);
  std::tie(out.best_mean, out.best_std) = mean_std(any ? ok_bests : all_bests);
  return out;
}

namespace {

constexpr const char* kCsvHeader =
    "algorithm,function,box,success,population,evals_mean,evals_std,"
    "best_mean,best_std";

std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    if (pos == std::string::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

}  // namespace

void write_csv(std::ostream& os, std::span<const ExperimentResult> rows) {
  os << kCsvHeader << "\n";
  for (const auto& r : rows) {
    os << r.algorithm << "," << r.function << "," << r.box << ","
       << r.successes << "/" << r.runs << "," << r.population << ","
       << format_double(r.evals_mean) << "," << format_double(r.evals_std)
       << "," << format_double(r.best_mean) << ","
       << format_double(r.best_std) << "\n";
  }
}

std::vector<ExperimentResult> parse_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != kCsvHeader)
    throw std::invalid_argument("unrecognized CSV header");
  std::vector<ExperimentResult> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto f = split(line, ',');
    if (f.size() != 9) throw std::invalid_argument("malformed CSV row");
    ExperimentResult r;
    r.algorithm = f[0];
    r.function = f[1];
    r.box = f[2];
    const auto ratio = split(f[3], '/');
    if (ratio.size() != 2) throw std::invalid_argument("malformed success ratio");
    r.successes = std::stoi(ratio[0]);
    r.runs = std::stoi(ratio[1]);
    r.population = std::stoi(f[4]);
    r.critical_found = r.population > 0;
    r.evals_mean = std::strtod(f[5].c_str(), nullptr);
    r.evals_std = std::strtod(f[6].c_str(), nullptr);
    r.best_mean = std::strtod(f[7].c_str(), nullptr);
    r.best_std = std::strtod(f[8].c_str(), nullptr);
    rows.push_back(std::move(r));
  }
  return rows;
}

void write_trace_csv(std::ostream& os, std::span<const TraceRecord> trace) {
  const std::size_t dim = trace.empty() ? 0 : trace.front().variances.size();
  os << "generation,best,mean";
  for (std::size_t j = 0; j < dim; ++j) os << ",var_" << j;
  os << "\n";
  for (const auto& t : trace) {
    os << t.generation << "," << format_double(t.best) << ","
       << format_double(t.mean);
    for (double v : t.variances) os << "," << format_double(v);
    os << "\n";
  }
}

namespace {

ExperimentSpec base_spec(BenchFunction fn, Interval box, Algorithm algo,
                         MarginKind margins) {
  ExperimentSpec s;
  s.function = fn;
  s.dimension = 10;
  s.box = box;
  s.eda.algorithm = algo;
  s.eda.margins = margins;
  return s;
}

ExperimentSpec vine_spec(BenchFunction fn, Algorithm algo,
                         TruncationRule trunc,
                         std::vector<CopulaFamily> families = {}) {
  ExperimentSpec s = base_spec(fn, symmetric_box(fn), algo, MarginKind::Normal);
  s.eda.vine.truncation = trunc;
  s.eda.vine.structure = StructureMode::Greedy;
  s.eda.vine.families = std::move(families);
  return s;
}

}  // namespace

std::vector<ExperimentSpec> table_preset(int table) {
  std::vector<ExperimentSpec> rows;
  switch (table) {
    case 1:
    case 2:
    case 3:
    case 4: {
      const BenchFunction fn =
          table == 1   ? BenchFunction::Sphere
          : table == 2 ? BenchFunction::Griewank
          : table == 3 ? BenchFunction::Ackley
                       : BenchFunction::SummationCancellation;
      for (Interval box : {symmetric_box(fn), asymmetric_box(fn)})
        for (auto [algo, margins] :
             {std::pair{Algorithm::Umda, MarginKind::Normal},
              std::pair{Algorithm::Umda, MarginKind::Kernel},
              std::pair{Algorithm::Gceda, MarginKind::Normal},
              std::pair{Algorithm::Gceda, MarginKind::Kernel}})
          rows.push_back(base_spec(fn, box, algo, margins));
      return rows;
    }
    case 5:
    case 6:
    case 7:
    case 8: {
      const BenchFunction fn =
          table == 5   ? BenchFunction::Sphere
          : table == 6 ? BenchFunction::Griewank
          : table == 7 ? BenchFunction::Ackley
                       : BenchFunction::SummationCancellation;
      for (Algorithm algo : {Algorithm::Cveda, Algorithm::Dveda}) {
        rows.push_back(vine_spec(fn, algo, TruncationRule{}));
        if (table == 8)  // pair-copula catalog restricted to the normal family
          rows.push_back(vine_spec(fn, algo, TruncationRule{},
                                   {CopulaFamily::Normal}));
      }
      return rows;
    }
    case 9:
    case 10: {
      const BenchFunction fn = table == 9
                                   ? BenchFunction::Sphere
                                   : BenchFunction::SummationCancellation;
      for (Algorithm algo : {Algorithm::Cveda, Algorithm::Dveda})
        for (TruncationRule trunc :
             {TruncationRule{TruncationMode::Fixed, 3},
              TruncationRule{TruncationMode::Fixed, 6},
              TruncationRule{TruncationMode::Aic, -1},
              TruncationRule{TruncationMode::Bic, -1}})
          rows.push_back(vine_spec(fn, algo, trunc));
      return rows;
    }
    default:
      throw std::invalid_argument("table presets cover tables 1 through 10");
  }
}

}  // namespace vineda

#include <CLI11.hpp>

namespace vineda {

namespace {

bool parse_box(const std::string& text, Interval& out) {
  const std::size_t pos = text.find(':', 1);  // lo may start with '-'
  if (pos == std::string::npos || pos + 1 >= text.size()) return false;
  char* end = nullptr;
  out.lo = std::strtod(text.c_str(), &end);
  if (end != text.c_str() + pos) return false;
  out.hi = std::strtod(text.c_str() + pos + 1, &end);
  if (end != text.c_str() + text.size()) return false;
  return out.lo < out.hi;
}

int fail_config(const std::string& message) {
  std::cerr << "error: " << message << "\n";
  return 2;
}

}  // namespace

int cli_main(std::vector<std::string> args) {
  CLI::App app{"Copula- and vine-based EDA benchmark harness"};
  std::string function_s = "sphere", algo_s = "umda", margins_s = "normal";
  std::string box_s, trunc_s = "full", structure_s = "greedy", families_s;
  std::string trace_path, out_path;
  int dim = 10, runs = 10, table = 0;
  std::uint64_t seed = 1;

  app.add_option("--function", function_s, "sphere|griewank|ackley|sumcan");
  app.add_option("--dim", dim, "problem dimension");
  app.add_option("--algo", algo_s, "umda|gceda|cveda|dveda");
  app.add_option("--margins", margins_s, "normal|kernel");
  app.add_option("--box", box_s, "initialization interval LO:HI");
  app.add_option("--truncation", trunc_s, "trees to keep: a number, aic, or bic");
  app.add_option("--structure", structure_s, "greedy|random");
  app.add_option("--families", families_s,
                 "comma-separated pair-copula families (default: all)");
  app.add_option("--runs", runs, "runs per probe and per report");
  app.add_option("--seed", seed, "experiment seed");
  app.add_option("--trace", trace_path, "per-generation trace CSV path");
  app.add_option("--table", table, "run a published table's rows (1-10)");
  app.add_option("--out", out_path, "result CSV path (default: stdout)");

  std::reverse(args.begin(), args.end());
  try {
    app.parse(args);
  } catch (const CLI::CallForHelp&) {
    std::cout << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    return fail_config(e.what());
  }

  if (dim < 1) return fail_config("--dim must be positive");
  if (runs < 1) return fail_config("--runs must be positive");

  std::vector<ExperimentSpec> specs;
  if (table != 0) {
    try {
      specs = table_preset(table);
    } catch (const std::invalid_argument& e) {
      return fail_config(e.what());
    }
  } else {
    ExperimentSpec spec;
    const auto fn = parse_function(function_s);
    if (!fn) return fail_config("unknown function '" + function_s + "'");
    spec.function = *fn;
    spec.dimension = dim;
    spec.box = symmetric_box(*fn);
    if (!box_s.empty() && !parse_box(box_s, spec.box))
      return fail_config("--box must look like LO:HI with LO < HI");

    if (algo_s == "umda")
      spec.eda.algorithm = Algorithm::Umda;
    else if (algo_s == "gceda")
      spec.eda.algorithm = Algorithm::Gceda;
    else if (algo_s == "cveda")
      spec.eda.algorithm = Algorithm::Cveda;
    else if (algo_s == "dveda")
      spec.eda.algorithm = Algorithm::Dveda;
    else
      return fail_config("unknown algorithm '" + algo_s + "'");

    if (margins_s == "normal")
      spec.eda.margins = MarginKind::Normal;
    else if (margins_s == "kernel")
      spec.eda.margins = MarginKind::Kernel;
    else
      return fail_config("unknown margins '" + margins_s + "'");

    if (trunc_s == "aic")
      spec.eda.vine.truncation = {TruncationMode::Aic, -1};
    else if (trunc_s == "bic")
      spec.eda.vine.truncation = {TruncationMode::Bic, -1};
    else if (trunc_s == "full")
      spec.eda.vine.truncation = {TruncationMode::Fixed, -1};
    else {
      char* end = nullptr;
      const long level = std::strtol(trunc_s.c_str(), &end, 10);
      if (end != trunc_s.c_str() + trunc_s.size())
        return fail_config("--truncation takes a number, aic, or bic");
      if (level < 1 || level > dim - 1)
        return fail_config("--truncation level must be in [1, dim-1]");
      spec.eda.vine.truncation = {TruncationMode::Fixed, int(level)};
    }

    if (structure_s == "greedy")
      spec.eda.vine.structure = StructureMode::Greedy;
    else if (structure_s == "random")
      spec.eda.vine.structure = StructureMode::Random;
    else
      return fail_config("unknown structure '" + structure_s + "'");

    if (!families_s.empty()) {
      for (const std::string& token : split(families_s, ',')) {
        bool known = false;
        for (CopulaFamily f :
             {CopulaFamily::Product, CopulaFamily::Normal,
              CopulaFamily::StudentT, CopulaFamily::Clayton,
              CopulaFamily::ClaytonRotated, CopulaFamily::Gumbel,
              CopulaFamily::GumbelRotated})
          if (token == family_name(f)) {
            spec.eda.vine.families.push_back(f);
            known = true;
            break;
          }
        if (!known) return fail_config("unknown family '" + token + "'");
      }
    }
    specs.push_back(std::move(spec));
  }

  if (!trace_path.empty()) specs.front().trace_first_run = true;

  std::vector<ExperimentResult> results;
  for (const auto& spec : specs)
    results.push_back(run_experiment(spec, runs, seed));

  if (!trace_path.empty()) {
    std::ofstream tf(trace_path);
    if (!tf) return fail_config("cannot open trace file '" + trace_path + "'");
    write_trace_csv(tf, results.front().trace);
  }

  if (out_path.empty()) {
    write_csv(std::cout, results);
  } else {
    std::ofstream of(out_path);
    if (!of) return fail_config("cannot open output file '" + out_path + "'");
    write_csv(of, results);
  }
  return 0;
}

}  // namespace vineda
