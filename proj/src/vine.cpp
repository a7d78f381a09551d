#include "vineda/vine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "vineda/numerics.hpp"
#include "vineda/rng.hpp"

namespace vineda {

namespace {

// Conditional arguments are clamped before every h/h_inv/log-pdf call:
// kernel-margin cdfs and long h chains can saturate in the tails.
constexpr double kArgLo = 1e-12;
constexpr double kArgHi = 1.0 - 1e-12;

double clamp_arg(double x) { return std::clamp(x, kArgLo, kArgHi); }

constexpr CopulaFamily kAllFamilies[] = {
    CopulaFamily::Normal,        CopulaFamily::StudentT,
    CopulaFamily::Clayton,       CopulaFamily::ClaytonRotated,
    CopulaFamily::Gumbel,        CopulaFamily::GumbelRotated,
};

std::vector<std::vector<double>> extract_columns(
    std::span<const std::vector<double>> rows) {
  const std::size_t dim = rows.empty() ? 0 : rows.front().size();
  std::vector<std::vector<double>> cols(dim, std::vector<double>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != dim)
      throw std::invalid_argument("ragged sample rows");
    for (std::size_t j = 0; j < dim; ++j) cols[j][i] = rows[i][j];
  }
  return cols;
}

// rank/(N+1) per column, ties broken by input position.
std::vector<double> rank_column(std::span<const double> xs) {
  std::vector<std::size_t> idx(xs.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(),
                   [&xs](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });
  std::vector<double> u(xs.size());
  for (std::size_t r = 0; r < idx.size(); ++r)
    u[idx[r]] = double(r + 1) / double(xs.size() + 1);
  return u;
}

// Flat symmetric |tau| matrix over the given columns.
std::vector<double> tau_weights(const std::vector<std::vector<double>>& cols) {
  const int n = int(cols.size());
  std::vector<double> w(std::size_t(n) * n, 0.0);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      const double t = std::fabs(kendall_tau(cols[i], cols[j]));
      w[std::size_t(i) * n + j] = w[std::size_t(j) * n + i] = t;
    }
  return w;
}

double tree_log_lik(const BivCopula& c, std::span<const double> us,
                    std::span<const double> vs) {
  if (c.family == CopulaFamily::Product) return 0.0;
  double acc = 0.0;
  for (std::size_t i = 0; i < us.size(); ++i)
    acc += copula_log_pdf(c, clamp_arg(us[i]), clamp_arg(vs[i]));
  return acc;
}

int copula_params(const BivCopula& c) { return parameter_count(c.family); }

struct EdgeFit {
  BivCopula copula;
  double log_lik = 0.0;
};

EdgeFit fit_edge(std::span<const double> us, std::span<const double> vs,
                 std::span<const CopulaFamily> families, std::uint64_t seed,
                 double independence_level) {
  PseudoSample s;
  s.u.assign(us.begin(), us.end());
  s.v.assign(vs.begin(), vs.end());
  EdgeFit e;
  e.copula = select_copula(s, families, seed, independence_level);
  e.log_lik = tree_log_lik(e.copula, us, vs);
  return e;
}

}  // namespace

int max_strength_root(std::span<const double> weights, int n) {
  int best = 0;
  double best_sum = -1.0;
  for (int i = 0; i < n; ++i) {
    double s = 0.0;
    for (int j = 0; j < n; ++j)
      if (j != i) s += weights[std::size_t(i) * n + j];
    if (s > best_sum) {
      best_sum = s;
      best = i;
    }
  }
  return best;
}

std::vector<int> dvine_path_order(std::span<const double> weights, int n) {
  if (n == 1) return {0};
  if (n == 2) return {0, 1};
  // Max-weight Hamiltonian path as a traveling-salesman tour on negated
  // weights with a zero-weight dummy node; cheapest insertion, then the
  // tour is cut at the dummy. Node n is the dummy.
  const auto w = [&](int a, int b) {
    return a == n || b == n ? 0.0 : weights[std::size_t(a) * n + b];
  };
  int ha = 0, hb = 1;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (w(i, j) > w(ha, hb)) {
        ha = i;
        hb = j;
      }
  std::vector<int> tour = {ha, hb};
  std::vector<int> rest;
  for (int i = 0; i <= n; ++i)
    if (i != ha && i != hb) rest.push_back(i);
  while (!rest.empty()) {
    std::size_t pick = 0;
    int at = 0;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t r = 0; r < rest.size(); ++r)
      for (std::size_t p = 0; p < tour.size(); ++p) {
        const int a = tour[p];
        const int b = tour[(p + 1) % tour.size()];
        const double cost = w(a, b) - w(a, rest[r]) - w(rest[r], b);
        if (cost < best) {
          best = cost;
          pick = r;
          at = int(p);
        }
      }
    tour.insert(tour.begin() + at + 1, rest[pick]);
    rest.erase(rest.begin() + pick);
  }
  const auto dummy = std::find(tour.begin(), tour.end(), n);
  std::vector<int> path(dummy + 1, tour.end());
  path.insert(path.end(), tour.begin(), dummy);
  return path;
}

VineStructure select_structure(VineKind kind,
                               std::span<const std::vector<double>> rows,
                               StructureMode mode, std::uint64_t seed) {
  if (rows.size() < 3)
    throw std::invalid_argument("need at least 3 rows to select a structure");
  const int n = int(rows.front().size());
  VineStructure st;
  st.kind = kind;
  if (mode == StructureMode::Random) {
    st.order.resize(n);
    std::iota(st.order.begin(), st.order.end(), 0);
    Rng rng(seed);
    rng.shuffle(st.order);
    return st;
  }
  const auto w = tau_weights(extract_columns(rows));
  if (kind == VineKind::DVine) {
    st.order = dvine_path_order(w, n);
    return st;
  }
  // C-vine: repeated strongest-sum choice over the remaining variables.
  std::vector<int> alive(n);
  std::iota(alive.begin(), alive.end(), 0);
  while (!alive.empty()) {
    std::size_t best = 0;
    double best_sum = -1.0;
    for (std::size_t a = 0; a < alive.size(); ++a) {
      double s = 0.0;
      for (int other : alive)
        if (other != alive[a]) s += w[std::size_t(alive[a]) * n + other];
      if (s > best_sum) {
        best_sum = s;
        best = a;
      }
    }
    st.order.push_back(alive[best]);
    alive.erase(alive.begin() + best);
  }
  return st;
}

namespace {

struct TreeBudget {
  // Sequential Aic/Bic rule: a freshly fitted tree is kept only while the
  // cumulative criterion keeps dropping; Fixed simply stops after `limit`.
  TruncationMode mode;
  int limit;       // trees allowed (Fixed), else n-1
  double penalty;  // per-parameter criterion cost
  // Tree 1 is always kept: the sequential comparison starts at tree 2.
  double best = std::numeric_limits<double>::infinity();
  double lik = 0.0;
  int params = 0;

  bool accept(double tree_lik, int tree_params) {
    const double lik2 = lik + tree_lik;
    const int par2 = params + tree_params;
    const double crit = -2.0 * lik2 + penalty * par2;
    if (mode != TruncationMode::Fixed && crit >= best) return false;
    best = crit;
    lik = lik2;
    params = par2;
    return true;
  }
};

TreeBudget make_budget(const TruncationRule& rule, int n, std::size_t rows) {
  TreeBudget b{rule.mode, n - 1, 2.0};
  if (rule.mode == TruncationMode::Fixed && rule.level != -1) {
    if (rule.level < 1)
      throw std::invalid_argument("fixed truncation level must be >= 1");
    b.limit = std::min(rule.level, n - 1);
  }
  if (rule.mode == TruncationMode::Bic) b.penalty = std::log(double(rows));
  return b;
}

}  // namespace

VineModel fit_vine(std::span<const std::vector<double>> rows, VineKind kind,
                   const VineFitConfig& cfg) {
  if (rows.size() < 10)
    throw std::invalid_argument("need at least 10 rows to fit a vine");
  const int n = int(rows.front().size());
  const std::span<const CopulaFamily> families =
      cfg.families.empty() ? std::span<const CopulaFamily>(kAllFamilies)
                           : std::span<const CopulaFamily>(cfg.families);

  VineModel m;
  m.structure.kind = kind;
  const auto cols = extract_columns(rows);
  for (const auto& col : cols)
    m.margins.push_back(fit_margin(cfg.margins, col));
  std::vector<std::vector<double>> pseudo(cols.size());
  for (std::size_t j = 0; j < cols.size(); ++j) pseudo[j] = rank_column(cols[j]);

  if (n == 1) {
    m.structure.order = {0};
    m.truncation_level = 0;
    return m;
  }

  m.pair_copulas.assign(n - 1, {});
  for (int t = 0; t < n - 1; ++t)
    m.pair_copulas[t].assign(n - 1 - t, BivCopula{});
  TreeBudget budget = make_budget(cfg.truncation, n, rows.size());
  m.truncation_level = 0;

  std::vector<int> random_order;
  if (cfg.structure == StructureMode::Random) {
    random_order.resize(n);
    std::iota(random_order.begin(), random_order.end(), 0);
    Rng rng(mix_seed(cfg.seed, 0x5eed));
    rng.shuffle(random_order);
  }

  if (kind == VineKind::CVine) {
    // Observations keyed by variable id; the root chosen at each level is
    // appended to the final order and conditioned out of the rest.
    std::vector<std::vector<double>> obs = pseudo;
    std::vector<int> alive(n);
    std::iota(alive.begin(), alive.end(), 0);
    // per level: fitted copula for each non-root variable id
    std::vector<std::vector<std::pair<int, BivCopula>>> levels;
    for (int t = 0; t + 1 < n; ++t) {
      int root;
      if (cfg.structure == StructureMode::Random) {
        root = random_order[t];
      } else {
        std::vector<std::vector<double>> live_cols;
        for (int v : alive) live_cols.push_back(obs[v]);
        root = alive[std::size_t(
            max_strength_root(tau_weights(live_cols), int(alive.size())))];
      }
      m.structure.order.push_back(root);
      alive.erase(std::find(alive.begin(), alive.end(), root));

      std::vector<std::pair<int, BivCopula>> level;
      double tree_lik = 0.0;
      int tree_params = 0;
      const bool within_limit = t < budget.limit;
      if (within_limit) {
        for (int v : alive) {
          const auto e = fit_edge(obs[v], obs[root], families,
                                  mix_seed(cfg.seed, t, v),
                                  cfg.independence_level);
          level.push_back({v, e.copula});
          tree_lik += e.log_lik;
          tree_params += copula_params(e.copula);
        }
      }
      if (within_limit && budget.accept(tree_lik, tree_params)) {
        m.truncation_level = t + 1;
        for (const auto& [v, c] : level)
          for (std::size_t i = 0; i < obs[v].size(); ++i)
            obs[v][i] =
                h_func(c, clamp_arg(obs[v][i]), clamp_arg(obs[root][i]));
      } else {
        level.clear();
        for (int v : alive) level.push_back({v, BivCopula{}});
        budget.limit = 0;  // everything deeper stays Product
      }
      levels.push_back(std::move(level));
    }
    m.structure.order.push_back(alive.front());
    for (int t = 0; t + 1 < n; ++t)
      for (int i = t + 1; i < n; ++i) {
        const int v = m.structure.order[i];
        const auto& level = levels[t];
        const auto it =
            std::find_if(level.begin(), level.end(),
                         [v](const auto& p) { return p.first == v; });
        m.pair_copulas[t][i - t - 1] = it->second;
      }
    return m;
  }

  // D-vine: the tree-1 path fixes every deeper tree. A[i] carries
  // F(p_i | block right of it), B[i] carries F(p_{i+t+1} | block left),
  // which are exactly the two arguments of edge i in the next tree.
  if (cfg.structure == StructureMode::Random) {
    m.structure.order = random_order;
  } else {
    m.structure.order = dvine_path_order(tau_weights(pseudo), n);
  }
  const auto& ord = m.structure.order;
  std::vector<std::vector<double>> a(n - 1), b(n - 1);
  for (int i = 0; i + 1 < n; ++i) {
    a[i] = pseudo[ord[i]];
    b[i] = pseudo[ord[i + 1]];
  }
  for (int t = 0; t + 1 < n; ++t) {
    const int edges = n - 1 - t;
    double tree_lik = 0.0;
    int tree_params = 0;
    std::vector<BivCopula> level(edges);
    if (t < budget.limit) {
      for (int i = 0; i < edges; ++i) {
        const auto e = fit_edge(a[i], b[i], families, mix_seed(cfg.seed, t, i),
                                cfg.independence_level);
        level[i] = e.copula;
        tree_lik += e.log_lik;
        tree_params += copula_params(e.copula);
      }
    }
    if (t < budget.limit && budget.accept(tree_lik, tree_params)) {
      m.truncation_level = t + 1;
    } else {
      std::fill(level.begin(), level.end(), BivCopula{});
      budget.limit = 0;
    }
    m.pair_copulas[t] = level;
    if (t + 2 < n) {
      std::vector<std::vector<double>> a2(edges - 1), b2(edges - 1);
      for (int i = 0; i + 1 < edges; ++i) {
        a2[i].resize(rows.size());
        b2[i].resize(rows.size());
        for (std::size_t r = 0; r < rows.size(); ++r) {
          a2[i][r] = h_func(level[i], clamp_arg(a[i][r]), clamp_arg(b[i][r]));
          b2[i][r] =
              h2_func(level[i + 1], clamp_arg(b[i + 1][r]), clamp_arg(a[i + 1][r]));
        }
      }
      a = std::move(a2);
      b = std::move(b2);
    }
  }
  return m;
}

namespace {

// Shared cascade: walks the conditional-argument recursion, reporting every
// (tree, edge, u-arg, v-arg) visit. Works one observation at a time.
template <class Visit>
void walk_cvine(const VineModel& m, std::span<double> cur, Visit&& visit) {
  const int n = int(cur.size());
  for (int t = 0; t + 1 < n; ++t)
    for (int i = t + 1; i < n; ++i) {
      const BivCopula& c = m.pair_copulas[t][i - t - 1];
      const double u = clamp_arg(cur[i]);
      const double v = clamp_arg(cur[t]);
      visit(t, c, u, v);
      cur[i] = h_func(c, u, v);
    }
}

template <class Visit>
void walk_dvine(const VineModel& m, std::span<double> vals, Visit&& visit) {
  const int n = int(vals.size());
  std::vector<double> a(vals.begin(), vals.end() - 1);
  std::vector<double> b(vals.begin() + 1, vals.end());
  for (int t = 0; t + 1 < n; ++t) {
    const int edges = n - 1 - t;
    for (int i = 0; i < edges; ++i)
      visit(t, m.pair_copulas[t][i], clamp_arg(a[i]), clamp_arg(b[i]));
    if (t + 2 == n) break;
    std::vector<double> a2(edges - 1), b2(edges - 1);
    for (int i = 0; i + 1 < edges; ++i) {
      const BivCopula& left = m.pair_copulas[t][i];
      const BivCopula& right = m.pair_copulas[t][i + 1];
      a2[i] = h_func(left, clamp_arg(a[i]), clamp_arg(b[i]));
      b2[i] = h2_func(right, clamp_arg(b[i + 1]), clamp_arg(a[i + 1]));
    }
    a = std::move(a2);
    b = std::move(b2);
  }
}

}  // namespace

double vine_log_density(const VineModel& m, std::span<const double> x) {
  const int n = int(m.margins.size());
  if (int(x.size()) != n) throw std::invalid_argument("dimension mismatch");
  double acc = 0.0;
  std::vector<double> u(n);
  for (int k = 0; k < n; ++k) {
    acc += log_pdf(m.margins[m.structure.order[k]], x[m.structure.order[k]]);
    u[k] = clamp_arg(cdf(m.margins[m.structure.order[k]], x[m.structure.order[k]]));
  }
  const auto visit = [&acc](int, const BivCopula& c, double uu, double vv) {
    if (c.family != CopulaFamily::Product) acc += copula_log_pdf(c, uu, vv);
  };
  if (n > 1) {
    if (m.structure.kind == VineKind::CVine)
      walk_cvine(m, u, visit);
    else
      walk_dvine(m, u, visit);
  }
  if (!std::isfinite(acc))
    throw std::domain_error("log-density is not finite at this point");
  return acc;
}

double vine_information_criterion(const VineModel& m,
                                  std::span<const std::vector<double>> rows,
                                  TruncationMode mode, int up_to_tree) {
  const int n = int(m.margins.size());
  if (up_to_tree < 1 || up_to_tree > n - 1)
    throw std::invalid_argument("tree index out of range");
  if (mode == TruncationMode::Fixed)
    throw std::invalid_argument("criterion mode must be Aic or Bic");
  const auto cols = extract_columns(rows);
  std::vector<std::vector<double>> pseudo(cols.size());
  for (std::size_t j = 0; j < cols.size(); ++j) pseudo[j] = rank_column(cols[j]);

  double lik = 0.0;
  const auto visit = [&](int t, const BivCopula& c, double uu, double vv) {
    if (t < up_to_tree && c.family != CopulaFamily::Product)
      lik += copula_log_pdf(c, uu, vv);
  };
  std::vector<double> vals(n);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (int k = 0; k < n; ++k) vals[k] = pseudo[m.structure.order[k]][r];
    if (m.structure.kind == VineKind::CVine)
      walk_cvine(m, vals, visit);
    else
      walk_dvine(m, vals, visit);
  }
  int params = 0;
  for (int t = 0; t < up_to_tree; ++t)
    for (const auto& c : m.pair_copulas[t]) params += parameter_count(c.family);
  const double pen =
      mode == TruncationMode::Aic ? 2.0 : std::log(double(rows.size()));
  return -2.0 * lik + pen * params;
}

std::vector<std::vector<double>> vine_sample(const VineModel& m, int count,
                                             std::uint64_t seed) {
  if (count < 1) throw std::invalid_argument("count must be positive");
  const int n = int(m.margins.size());
  Rng rng(seed);
  std::vector<std::vector<double>> u(count, std::vector<double>(n));
  std::vector<double> w(n), out(n);

  // C-vine: vv[i][k] = F(ordered var i | ordered vars 0..k-1).
  std::vector<std::vector<double>> vv(n);
  for (int i = 0; i < n; ++i) vv[i].resize(i + 1);
  // D-vine: a[k] = F(ordered var k | vars k+1..i-1), bc[k] = chain values
  // F(var i | vars k+1..i-1) produced while inverting.
  std::vector<double> a(n), bc(n);

  for (auto& row : u) {
    for (int k = 0; k < n; ++k) w[k] = clamp_arg(rng.uniform());
    if (n == 1) {
      row[m.structure.order[0]] = w[0];
      continue;
    }
    if (m.structure.kind == VineKind::CVine) {
      out[0] = vv[0][0] = w[0];
      for (int i = 1; i < n; ++i) {
        double t = w[i];
        for (int k = i - 1; k >= 0; --k)
          t = h_inv(m.pair_copulas[k][i - k - 1], clamp_arg(t),
                    clamp_arg(vv[k][k]));
        out[i] = vv[i][0] = t;
        if (i + 1 < n)
          for (int k = 0; k < i; ++k)
            vv[i][k + 1] = h_func(m.pair_copulas[k][i - k - 1],
                                  clamp_arg(vv[i][k]), clamp_arg(vv[k][k]));
      }
    } else {
      out[0] = a[0] = w[0];
      for (int i = 1; i < n; ++i) {
        double t = w[i];
        for (int k = 0; k < i; ++k) {
          t = h2_inv(m.pair_copulas[i - k - 1][k], clamp_arg(t),
                     clamp_arg(a[k]));
          bc[k] = t;
        }
        out[i] = t;
        for (int k = 0; k < i; ++k)
          a[k] = h_func(m.pair_copulas[i - k - 1][k], clamp_arg(a[k]),
                        clamp_arg(bc[k]));
        a[i] = out[i];
      }
    }
    for (int k = 0; k < n; ++k) row[m.structure.order[k]] = out[k];
  }
  return quantile_rows(m.margins, std::move(u));
}

}  // namespace vineda
