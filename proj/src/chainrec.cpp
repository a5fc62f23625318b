#include "clf/chainrec.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>
#include <thread>

namespace clf {

CellGrid CellGrid::make(const Box& domain, double h) {
  if (h <= 0.0) throw std::runtime_error("cell resolution must be positive");
  CellGrid g;
  g.domain = domain;
  g.h = h;
  const int n = int(domain.lo.size());
  g.ncells.resize(n);
  g.step.resize(n);
  for (int i = 0; i < n; ++i) {
    const double span = domain.hi[i] - domain.lo[i];
    g.ncells[i] = std::max(1, int(std::lround(span / h)));
    g.step[i] = span / g.ncells[i];
  }
  return g;
}

long CellGrid::total() const {
  long t = 1;
  for (int c : ncells) t *= c;
  return t;
}

double CellGrid::max_step() const {
  double m = 0.0;
  for (double s : step) m = std::max(m, s);
  return m;
}

std::vector<int> CellGrid::coords(long flat) const {
  std::vector<int> c(ncells.size());
  for (int i = dim() - 1; i >= 0; --i) {
    c[i] = int(flat % ncells[i]);
    flat /= ncells[i];
  }
  return c;
}

long CellGrid::flat(const std::vector<int>& c) const {
  long f = 0;
  for (int i = 0; i < dim(); ++i) f = f * ncells[i] + c[i];
  return f;
}

Box CellGrid::cell_box(long flat) const {
  const std::vector<int> c = coords(flat);
  Box b;
  b.lo.resize(dim());
  b.hi.resize(dim());
  for (int i = 0; i < dim(); ++i) {
    b.lo[i] = domain.lo[i] + c[i] * step[i];
    b.hi[i] = domain.lo[i] + (c[i] + 1) * step[i];
  }
  return b;
}

Vec CellGrid::cell_center(long flat) const {
  const Box b = cell_box(flat);
  return 0.5 * (b.lo + b.hi);
}

std::optional<long> CellGrid::locate(const Vec& p) const {
  std::vector<int> c(ncells.size());
  for (int i = 0; i < dim(); ++i) {
    if (p[i] < domain.lo[i] || p[i] > domain.hi[i]) return std::nullopt;
    int ci = int(std::floor((p[i] - domain.lo[i]) / step[i]));
    c[i] = std::clamp(ci, 0, ncells[i] - 1);
  }
  return flat(c);
}

// ---------------------------------------------------------------------------

namespace {

// deterministic sample layout: center, then the 2^n corners, then (if the
// budget allows) edge midpoints of the first two axes
std::vector<Vec> cell_samples(const Box& b, int budget) {
  std::vector<Vec> out;
  const int n = int(b.lo.size());
  out.push_back(0.5 * (b.lo + b.hi));
  const int corners = 1 << n;
  for (int m = 0; m < corners && int(out.size()) < budget; ++m) {
    Vec p(n);
    for (int i = 0; i < n; ++i) p[i] = (m >> i) & 1 ? b.hi[i] : b.lo[i];
    out.push_back(p);
  }
  for (int axis = 0; axis < n && int(out.size()) < budget; ++axis) {
    for (double side : {0.0, 1.0}) {
      if (int(out.size()) >= budget) break;
      Vec p = 0.5 * (b.lo + b.hi);
      p[axis] = side == 0.0 ? b.lo[axis] : b.hi[axis];
      out.push_back(p);
    }
  }
  return out;
}

// all cells whose box intersects the closed eps-ball about y
void ball_cells(const CellGrid& grid, const Vec& y, double eps, std::vector<long>& out) {
  const int n = grid.dim();
  std::vector<int> lo(n), hi(n);
  for (int i = 0; i < n; ++i) {
    lo[i] = std::clamp(int(std::floor((y[i] - eps - grid.domain.lo[i]) / grid.step[i])),
                       0, grid.ncells[i] - 1);
    hi[i] = std::clamp(int(std::floor((y[i] + eps - grid.domain.lo[i]) / grid.step[i])),
                       0, grid.ncells[i] - 1);
  }
  std::vector<int> c = lo;
  for (;;) {
    const long f = grid.flat(c);
    if (grid.cell_box(f).dist_outside(y) <= eps) out.push_back(f);
    int axis = n - 1;
    while (axis >= 0) {
      if (++c[axis] <= hi[axis]) break;
      c[axis] = lo[axis];
      --axis;
    }
    if (axis < 0) break;
  }
}

}  // namespace

TransitionGraph build_transition_graph(const VectorField& X, const CellGrid& grid,
                                       double T, double eps, int samples_per_cell,
                                       const FlowMapConfig& cfg, int threads) {
  if (T <= 0.0 || eps <= 0.0)
    throw std::runtime_error("transition graph needs T > 0 and eps > 0");
  TransitionGraph g;
  g.T = T;
  g.eps = eps;
  g.ncells = grid.total();
  g.succ.assign(std::size_t(g.ncells), {});
  g.exits.assign(std::size_t(g.ncells), 0);

  auto process = [&](long c0, long c1) {
    std::vector<long> hits;
    for (long c = c0; c < c1; ++c) {
      hits.clear();
      bool exit_seen = false;
      for (const Vec& s : cell_samples(grid.cell_box(c), samples_per_cell)) {
        Vec y;
        try {
          y = flow_map(X, s, T, cfg);
        } catch (const FlowDomainExit&) {
          exit_seen = true;
          continue;
        }
        const std::size_t before = hits.size();
        ball_cells(grid, y, eps, hits);
        if (hits.size() == before) exit_seen = true;  // ball misses the grid
        // the ball may also stick out of the grid even when it hits cells
        for (int i = 0; i < grid.dim(); ++i)
          if (y[i] - eps < grid.domain.lo[i] || y[i] + eps > grid.domain.hi[i])
            exit_seen = true;
      }
      std::sort(hits.begin(), hits.end());
      hits.erase(std::unique(hits.begin(), hits.end()), hits.end());
      g.succ[std::size_t(c)] = hits;
      g.exits[std::size_t(c)] = exit_seen ? 1 : 0;
    }
  };

  threads = std::max(1, threads);
  if (threads == 1) {
    process(0, g.ncells);
  } else {
    std::vector<std::thread> pool;
    const long chunk = (g.ncells + threads - 1) / threads;
    for (int t = 0; t < threads; ++t) {
      const long c0 = t * chunk, c1 = std::min<long>(g.ncells, c0 + chunk);
      if (c0 < c1) pool.emplace_back(process, c0, c1);
    }
    for (auto& th : pool) th.join();
  }
  return g;
}

// ---------------------------------------------------------------------------

namespace {

// iterative Tarjan strongly-connected components
std::vector<std::vector<long>> tarjan_scc(const std::vector<std::vector<long>>& succ) {
  const long n = long(succ.size());
  std::vector<long> index(std::size_t(n), -1), low(std::size_t(n), 0);
  std::vector<char> onstack(std::size_t(n), 0);
  std::vector<long> stack;
  std::vector<std::vector<long>> sccs;
  long counter = 0;

  struct Frame {
    long v;
    std::size_t child;
  };
  std::vector<Frame> call;

  for (long root = 0; root < n; ++root) {
    if (index[std::size_t(root)] != -1) continue;
    call.push_back({root, 0});
    index[std::size_t(root)] = low[std::size_t(root)] = counter++;
    stack.push_back(root);
    onstack[std::size_t(root)] = 1;
    while (!call.empty()) {
      Frame& fr = call.back();
      const auto& kids = succ[std::size_t(fr.v)];
      if (fr.child < kids.size()) {
        const long w = kids[fr.child++];
        if (index[std::size_t(w)] == -1) {
          index[std::size_t(w)] = low[std::size_t(w)] = counter++;
          stack.push_back(w);
          onstack[std::size_t(w)] = 1;
          call.push_back({w, 0});
        } else if (onstack[std::size_t(w)]) {
          low[std::size_t(fr.v)] = std::min(low[std::size_t(fr.v)], index[std::size_t(w)]);
        }
      } else {
        const long v = fr.v;
        call.pop_back();
        if (!call.empty())
          low[std::size_t(call.back().v)] =
              std::min(low[std::size_t(call.back().v)], low[std::size_t(v)]);
        if (low[std::size_t(v)] == index[std::size_t(v)]) {
          std::vector<long> comp;
          for (;;) {
            const long w = stack.back();
            stack.pop_back();
            onstack[std::size_t(w)] = 0;
            comp.push_back(w);
            if (w == v) break;
          }
          sccs.push_back(std::move(comp));
        }
      }
    }
  }
  return sccs;
}

}  // namespace

RecurrentSet recurrent_cells(const TransitionGraph& graph) {
  RecurrentSet rec;
  for (auto& scc : tarjan_scc(graph.succ)) {
    bool cyclic = scc.size() > 1;
    if (!cyclic) {
      const long v = scc[0];
      const auto& s = graph.succ[std::size_t(v)];
      cyclic = std::binary_search(s.begin(), s.end(), v);
    }
    if (!cyclic) continue;
    std::sort(scc.begin(), scc.end());
    rec.components.push_back(std::move(scc));
  }
  std::sort(rec.components.begin(), rec.components.end(),
            [](const auto& a, const auto& b) { return a.front() < b.front(); });
  for (const auto& comp : rec.components)
    rec.cells.insert(rec.cells.end(), comp.begin(), comp.end());
  std::sort(rec.cells.begin(), rec.cells.end());
  return rec;
}

double dist_to_recurrent(const CellGrid& grid, const RecurrentSet& rec, const Vec& p) {
  if (rec.empty()) return kInf;
  double best = kInf;
  for (long c : rec.cells) best = std::min(best, grid.cell_box(c).dist_outside(p));
  return best;
}

bool in_inflated_recurrent(const CellGrid& grid, const RecurrentSet& rec,
                           const Vec& p, double cells) {
  if (rec.empty()) return false;
  const double pad = cells * grid.max_step();
  for (long c : rec.cells) {
    const Box b = grid.cell_box(c);
    double cheb = 0.0;
    for (int i = 0; i < grid.dim(); ++i)
      cheb = std::max({cheb, b.lo[i] - p[i], p[i] - b.hi[i]});
    if (cheb <= pad) return true;
  }
  return false;
}

double recurrent_diameter(const CellGrid& grid, const RecurrentSet& rec) {
  if (rec.empty()) return 0.0;
  BoxAccum hull;
  for (long c : rec.cells) {
    const Box b = grid.cell_box(c);
    hull.add(b.lo);
    hull.add(b.hi);
  }
  return hull.box().diameter();
}

void export_cells(std::ostream& os, const CellGrid& grid, const RecurrentSet& rec) {
  if (grid.dim() != 2)
    throw std::runtime_error("cell export is defined for planar grids");
  for (std::size_t k = 0; k < rec.components.size(); ++k) {
    for (long c : rec.components[k]) {
      const auto ij = grid.coords(c);
      const Box b = grid.cell_box(c);
      os << ij[0] << ' ' << ij[1] << ' ' << format_g17(b.lo[0]) << ' '
         << format_g17(b.lo[1]) << ' ' << format_g17(b.hi[0]) << ' '
         << format_g17(b.hi[1]) << ' ' << k << '\n';
    }
  }
}

}  // namespace clf
