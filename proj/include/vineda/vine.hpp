#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "vineda/bicop.hpp"
#include "vineda/margins.hpp"

namespace vineda {

enum class VineKind { CVine, DVine };
enum class StructureMode { Greedy, Random };
enum class TruncationMode { Fixed, Aic, Bic };

struct TruncationRule {
  TruncationMode mode = TruncationMode::Fixed;
  int level = -1;  // Fixed only: trees to keep; -1 keeps all n-1
};

// order is a permutation of 0..n-1. For a C-vine, order[t] is the root of
// tree t+1; for a D-vine, order is the tree-1 path.
struct VineStructure {
  VineKind kind = VineKind::CVine;
  std::vector<int> order;
};

struct VineFitConfig {
  MarginKind margins = MarginKind::Kernel;
  TruncationRule truncation;
  StructureMode structure = StructureMode::Greedy;
  std::vector<CopulaFamily> families;  // empty = all non-product families
  double independence_level = 0.1;
  std::uint64_t seed = 0;  // drives Random structure and the edge tests
};

// pair_copulas[t][i] is the copula of tree t+1 joining the ordered
// variables (C-vine: order[t] with order[t+1+i]; D-vine: order[i] with
// order[i+t+1]), conditioned on the variables between them in the order.
// Its first argument belongs to the later variable (C-vine) or the left
// path member (D-vine); fitting, density, and sampling all rely on that
// orientation. Trees past truncation_level hold only Product copulas.
struct VineModel {
  VineStructure structure;
  std::vector<std::vector<BivCopula>> pair_copulas;
  int truncation_level = 0;
  std::vector<Margin> margins;
};

// Structure-selection primitives on a flat n-by-n symmetric weight matrix
// (|tau| weights, zero diagonal); exposed for testing.
int max_strength_root(std::span<const double> weights, int n);
std::vector<int> dvine_path_order(std::span<const double> weights, int n);

// Greedy: C-vine roots by descending weight-sum strength; D-vine path by
// cheapest insertion on the max-weight tour (dummy-node cut). Random: a
// seeded uniform permutation.
VineStructure select_structure(VineKind kind,
                               std::span<const std::vector<double>> rows,
                               StructureMode mode, std::uint64_t seed);

// Fits margins, maps data to rank pseudo-observations, then selects and
// fits one pair copula per edge, tree by tree, transforming observations
// through the conditional h-functions. Greedy C-vines re-select the root at
// every level from the transformed observations. Aic/Bic keep adding trees
// only while the criterion improves; remaining trees are filled with
// Product copulas.
VineModel fit_vine(std::span<const std::vector<double>> rows, VineKind kind,
                   const VineFitConfig& cfg);

double vine_log_density(const VineModel& m, std::span<const double> x);

// Inverse-conditional cascade in copula space, then margin quantiles.
// Deterministic per seed.
std::vector<std::vector<double>> vine_sample(const VineModel& m, int count,
                                             std::uint64_t seed);

// -2 * pair-copula log-likelihood over trees 1..up_to_tree plus the
// parameter penalty (Aic: 2k, Bic: k ln N). Margins are excluded: they are
// constant across truncation levels.
double vine_information_criterion(const VineModel& m,
                                  std::span<const std::vector<double>> rows,
                                  TruncationMode mode, int up_to_tree);

}  // namespace vineda
