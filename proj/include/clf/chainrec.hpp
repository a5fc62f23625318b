#pragma once

#include <iosfwd>
#include <optional>
#include <vector>

#include "clf/flow.hpp"
#include "clf/geometry.hpp"
#include "clf/system.hpp"

namespace clf {

// uniform cell partition of a box; cells tile the box exactly (the requested
// resolution h is rounded to an integer cell count per axis)
struct CellGrid {
  Box domain;
  double h = 0.0;              // requested resolution
  std::vector<int> ncells;     // per-axis counts
  std::vector<double> step;    // realized per-axis widths

  static CellGrid make(const Box& domain, double h);

  int dim() const { return int(ncells.size()); }
  long total() const;
  double max_step() const;
  std::vector<int> coords(long flat) const;  // lexicographic index -> coords
  long flat(const std::vector<int>& c) const;
  Box cell_box(long flat) const;
  Vec cell_center(long flat) const;
  std::optional<long> locate(const Vec& p) const;
};

// cell transition graph for flight time T with eps-inflated images
struct TransitionGraph {
  double T = 0.0, eps = 0.0;
  long ncells = 0;
  std::vector<std::vector<long>> succ;  // sorted, unique
  std::vector<char> exits;              // cell has an edge to the exterior
};

TransitionGraph build_transition_graph(const VectorField& X, const CellGrid& grid,
                                       double T, double eps, int samples_per_cell,
                                       const FlowMapConfig& cfg, int threads = 1);

// recurrent cell = cell on a directed cycle (SCC of size > 1 or a self-loop);
// components are those SCCs, ordered by smallest member cell
struct RecurrentSet {
  std::vector<long> cells;                    // sorted
  std::vector<std::vector<long>> components;  // disjoint, each sorted

  bool empty() const { return cells.empty(); }
};

RecurrentSet recurrent_cells(const TransitionGraph& graph);

// Euclidean distance from p to the union of recurrent cells; +inf when empty
double dist_to_recurrent(const CellGrid& grid, const RecurrentSet& rec, const Vec& p);

// p within `cells` cell-widths (Chebyshev) of some recurrent cell
bool in_inflated_recurrent(const CellGrid& grid, const RecurrentSet& rec,
                           const Vec& p, double cells);

// diameter of the union of recurrent cells (hull diagonal); 0 when empty
double recurrent_diameter(const CellGrid& grid, const RecurrentSet& rec);

// one line per recurrent cell: "i j x_lo y_lo x_hi y_hi component_id"
void export_cells(std::ostream& os, const CellGrid& grid, const RecurrentSet& rec);

}  // namespace clf
