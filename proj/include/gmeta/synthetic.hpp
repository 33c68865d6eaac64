#pragma once

// Cycle and Barabasi-Albert structural-role benchmarks.

#include <array>
#include <string>
#include <vector>

#include "gmeta/graph.hpp"
#include "gmeta/random.hpp"

namespace gmeta {

enum class ShapeKind { House = 0, Star = 1, Diamond = 2, Fan = 3 };
inline constexpr std::size_t kShapeKinds = 4;
const char* shape_name(ShapeKind k);

struct ShapeTemplate {
  std::size_t size = 0;
  std::vector<Edge> edges;
  NodeId attach = 0;              // node bridged to the base graph (cycle only)
  std::vector<int> role;          // per template node, 0-based within the kind
  std::vector<std::string> role_names;
};
const ShapeTemplate& shape_template(ShapeKind k);

struct SyntheticSpec {
  std::size_t base_size = 0;
  std::array<std::size_t, kShapeKinds> shape_counts{};  // indexed by ShapeKind
  std::size_t noise_edges = 0;
  std::uint64_t seed = 0;
};

struct ShapePlacement {
  ShapeKind kind;
  std::vector<NodeId> nodes;  // template node i -> graph node
  NodeId anchor = 0;          // base node the shape hangs off (cycle) or nodes[0] (BA)
};

struct SyntheticGraph {
  Graph graph;  // labeled, no features
  std::vector<ShapePlacement> placements;
  SyntheticSpec spec;
};

/// Number of structural-role labels used by the cycle benchmark.
inline constexpr std::size_t kCycleLabels = 17;
/// Label id -> human-readable role name.
std::vector<std::string> cycle_role_names();

SyntheticGraph gen_cycle_dataset(const SyntheticSpec& spec);

inline constexpr std::size_t kBaAttach = 3;
inline constexpr std::size_t kBaLabels = 10;

/// BA graph with planted shapes, labeled by spectral clustering of graphlet
/// vectors into `clusters` groups.
SyntheticGraph gen_ba_dataset(const SyntheticSpec& spec, std::size_t clusters = kBaLabels);
/// Unlabeled BA + shapes, for callers that cluster several graphs jointly.
SyntheticGraph gen_ba_structure(const SyntheticSpec& spec);
/// Label several graphs with one clustering so label ids agree across graphs.
void label_by_graphlets(std::vector<SyntheticGraph>& graphs, std::size_t clusters,
                        std::uint64_t seed);

/// BA edge count before planting: C(m+1, 2) + (n - m - 1) * m.
std::size_t ba_edge_count(std::size_t n, std::size_t m);

/// Orbit counts of u over connected graphlets with 2-4 nodes (15 orbits):
///  0 edge | 1 path3 end, 2 path3 middle | 3 triangle |
///  4 path4 end, 5 path4 inner | 6 claw leaf, 7 claw center | 8 4-cycle |
///  9 paw pendant, 10 paw triangle deg-2, 11 paw hub |
///  12 diamond deg-2, 13 diamond deg-3 | 14 K4.
inline constexpr std::size_t kOrbits = 15;
std::array<double, kOrbits> graphlet_vector(const Graph& g, NodeId u);
/// Orbit index of node `pos` in a connected graphlet given as a 2..4 node
/// adjacency (bitmask per node).
int classify_orbit(std::size_t size, const std::array<unsigned, 4>& adj, std::size_t pos);

/// Spectral clustering: Gaussian kernel (bandwidth = median pairwise
/// distance), symmetric normalized Laplacian, k smallest eigenvectors,
/// row-normalized, then seeded k-means++. Equal rows always share a label;
/// labels are numbered in order of first appearance.
std::vector<LabelId> spectral_cluster(const Tensor& vectors, std::size_t k, Rng& rng);

/// Dataset presets.
SyntheticSpec cycle_single_spec(std::uint64_t seed);       // 500 base, 100 per kind, 1000 noise
std::vector<SyntheticSpec> cycle_multi_specs(std::size_t graphs, std::uint64_t seed);
SyntheticSpec ba_single_spec(std::uint64_t seed);          // 200 base, 1-15 per kind, no noise
std::vector<SyntheticSpec> ba_multi_specs(std::size_t graphs, std::uint64_t seed);

/// JSON metadata: seeds, shape placements and the label -> role map.
std::string synthetic_metadata_json(const std::vector<SyntheticGraph>& graphs,
                                    const std::string& family);

}  // namespace gmeta
