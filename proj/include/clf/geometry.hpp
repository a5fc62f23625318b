#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace clf {

using Vec = Eigen::VectorXd;

inline Vec vec2(double x, double y) {
  Vec v(2);
  v << x, y;
  return v;
}

inline Vec vec3(double x, double y, double z) {
  Vec v(3);
  v << x, y, z;
  return v;
}

// 90-degree rotation in the plane, used for tangents of level curves.
inline Vec perp2(const Vec& g) {
  Vec t(2);
  t << -g[1], g[0];
  return t;
}

constexpr double kInf = std::numeric_limits<double>::infinity();

// ---------------------------------------------------------------------------
// axis-aligned box

struct Box {
  Vec lo, hi;

  Box() = default;
  Box(Vec lo_, Vec hi_) : lo(std::move(lo_)), hi(std::move(hi_)) {
    if (lo.size() != hi.size()) throw std::invalid_argument("Box: dim mismatch");
    for (int i = 0; i < lo.size(); ++i)
      if (!(lo[i] < hi[i])) throw std::invalid_argument("Box: lo must be < hi");
  }
  static Box square(double lo, double hi, int n = 2) {
    return Box(Vec::Constant(n, lo), Vec::Constant(n, hi));
  }

  int dim() const { return static_cast<int>(lo.size()); }

  bool contains(const Vec& p, double pad = 0.0) const {
    for (int i = 0; i < lo.size(); ++i)
      if (p[i] < lo[i] - pad || p[i] > hi[i] + pad) return false;
    return true;
  }

  // distance from p to the box (0 inside)
  double dist_outside(const Vec& p) const {
    double d2 = 0.0;
    for (int i = 0; i < lo.size(); ++i) {
      double d = std::max({lo[i] - p[i], p[i] - hi[i], 0.0});
      d2 += d * d;
    }
    return std::sqrt(d2);
  }

  Vec clamp(const Vec& p) const {
    Vec q = p;
    for (int i = 0; i < lo.size(); ++i) q[i] = std::min(std::max(q[i], lo[i]), hi[i]);
    return q;
  }

  Vec center() const { return 0.5 * (lo + hi); }
  Vec widths() const { return hi - lo; }
  double diameter() const { return (hi - lo).norm(); }
  Box inflated(double pad) const {
    return Box(lo.array() - pad, hi.array() + pad);
  }
};

// grow a box to include a point (used when accumulating hulls of samples)
struct BoxAccum {
  Vec lo, hi;
  bool empty = true;
  void add(const Vec& p) {
    if (empty) {
      lo = p;
      hi = p;
      empty = false;
    } else {
      lo = lo.cwiseMin(p);
      hi = hi.cwiseMax(p);
    }
  }
  Box box(double pad = 0.0) const {
    if (empty) throw std::runtime_error("BoxAccum: no points");
    return Box(lo.array() - pad, hi.array() + pad);
  }
};

// ---------------------------------------------------------------------------
// deterministic low-discrepancy sampling (Halton, seed acts as an offset)

double radical_inverse(int base, std::uint64_t i);

struct Halton {
  int dim;
  std::uint64_t index;

  explicit Halton(int n, unsigned seed = 0)
      : dim(n), index(1 + static_cast<std::uint64_t>(seed) * 7919u) {}

  Vec next();                 // point in the unit cube
  Vec next_in(const Box& b);  // point in b
};

// ---------------------------------------------------------------------------
// compact target regions (the set K and friends)

struct Region {
  enum class Kind { Empty, Rect, Annulus, Points };

  Kind kind = Kind::Empty;
  Box rect;                 // Kind::Rect
  Vec center;               // Kind::Annulus
  double r0 = 0, r1 = 0;    // Kind::Annulus (inner/outer radius)
  std::vector<Vec> points;  // Kind::Points

  static Region empty() { return {}; }
  static Region make_rect(const Box& b);
  static Region make_annulus(Vec c, double r0, double r1);
  static Region make_points(std::vector<Vec> pts);

  bool is_empty() const { return kind == Kind::Empty; }
  int dim() const;

  // distance to the region (0 on it)
  double dist(const Vec& p) const;
  bool contains(const Vec& p, double pad = 0.0) const { return !is_empty() && dist(p) <= pad; }

  Box bounding_box(double pad = 0.0) const;

  // deterministic sample sets on the region
  std::vector<Vec> sample_grid(int per_axis) const;
  std::vector<Vec> sample_halton(int count, unsigned seed) const;
};

// ---------------------------------------------------------------------------
// misc numeric helpers

// Brent root finder on [a,b]; f(a), f(b) must have opposite signs.
double brent(const std::function<double(double)>& f, double a, double b,
             double xtol = 1e-12, int max_iter = 128);

std::string format_g17(double v);  // shortest round-trip decimal, deterministic

}  // namespace clf
