#include "clf/geometry.hpp"

#include <algorithm>
#include <cstdio>

namespace clf {

double radical_inverse(int base, std::uint64_t i) {
  double inv = 1.0 / base, f = inv, r = 0.0;
  while (i > 0) {
    r += f * static_cast<double>(i % base);
    i /= base;
    f *= inv;
  }
  return r;
}

static const int kHaltonBases[6] = {2, 3, 5, 7, 11, 13};

Vec Halton::next() {
  if (dim > 6) throw std::invalid_argument("Halton: dim > 6");
  Vec p(dim);
  for (int d = 0; d < dim; ++d) p[d] = radical_inverse(kHaltonBases[d], index);
  ++index;
  return p;
}

Vec Halton::next_in(const Box& b) {
  Vec u = next();
  return b.lo.array() + u.array() * (b.hi - b.lo).array();
}

// ---------------------------------------------------------------------------

Region Region::make_rect(const Box& b) {
  Region r;
  r.kind = Kind::Rect;
  r.rect = b;
  return r;
}

Region Region::make_annulus(Vec c, double r0, double r1) {
  if (!(0.0 <= r0 && r0 < r1)) throw std::invalid_argument("annulus: need 0 <= r0 < r1");
  Region r;
  r.kind = Kind::Annulus;
  r.center = std::move(c);
  r.r0 = r0;
  r.r1 = r1;
  return r;
}

Region Region::make_points(std::vector<Vec> pts) {
  if (pts.empty()) return {};
  Region r;
  r.kind = Kind::Points;
  r.points = std::move(pts);
  return r;
}

int Region::dim() const {
  switch (kind) {
    case Kind::Rect: return rect.dim();
    case Kind::Annulus: return static_cast<int>(center.size());
    case Kind::Points: return static_cast<int>(points.front().size());
    default: return 0;
  }
}

double Region::dist(const Vec& p) const {
  switch (kind) {
    case Kind::Rect:
      return rect.dist_outside(p);
    case Kind::Annulus: {
      double r = (p - center).norm();
      return std::max({r0 - r, r - r1, 0.0});
    }
    case Kind::Points: {
      double best = kInf;
      for (const auto& q : points) best = std::min(best, (p - q).norm());
      return best;
    }
    default:
      return kInf;
  }
}

Box Region::bounding_box(double pad) const {
  switch (kind) {
    case Kind::Rect:
      return rect.inflated(pad);
    case Kind::Annulus:
      return Box(center.array() - (r1 + pad), center.array() + (r1 + pad));
    case Kind::Points: {
      BoxAccum acc;
      for (const auto& q : points) acc.add(q);
      // degenerate hulls (single point) still need positive extent
      double eps = 1e-12;
      return acc.box(pad + eps);
    }
    default:
      throw std::runtime_error("bounding_box of empty region");
  }
}

std::vector<Vec> Region::sample_grid(int per_axis) const {
  std::vector<Vec> out;
  if (is_empty()) return out;
  if (kind == Kind::Points) return points;
  Box bb = bounding_box();
  int n = bb.dim();
  if (n != 2) throw std::runtime_error("sample_grid: only n=2 regions");
  for (int j = 0; j < per_axis; ++j) {
    for (int i = 0; i < per_axis; ++i) {
      Vec p(2);
      p[0] = bb.lo[0] + (i + 0.5) * (bb.hi[0] - bb.lo[0]) / per_axis;
      p[1] = bb.lo[1] + (j + 0.5) * (bb.hi[1] - bb.lo[1]) / per_axis;
      if (contains(p, 1e-12)) out.push_back(p);
    }
  }
  // boundary of an annulus matters for coverage; add rings explicitly
  if (kind == Kind::Annulus) {
    int m = 4 * per_axis;
    for (double rr : {r0, 0.5 * (r0 + r1), r1}) {
      for (int i = 0; i < m; ++i) {
        double th = 2.0 * M_PI * i / m;
        Vec p = center;
        p[0] += rr * std::cos(th);
        p[1] += rr * std::sin(th);
        out.push_back(p);
      }
    }
  }
  if (kind == Kind::Rect) {
    // include the corners/edges so greedy covers reach the boundary
    int m = per_axis;
    for (int i = 0; i <= m; ++i) {
      double fx = static_cast<double>(i) / m;
      for (double fy : {0.0, 1.0}) {
        out.push_back(vec2(bb.lo[0] + fx * (bb.hi[0] - bb.lo[0]),
                           bb.lo[1] + fy * (bb.hi[1] - bb.lo[1])));
        out.push_back(vec2(bb.lo[0] + fy * (bb.hi[0] - bb.lo[0]),
                           bb.lo[1] + fx * (bb.hi[1] - bb.lo[1])));
      }
    }
  }
  return out;
}

std::vector<Vec> Region::sample_halton(int count, unsigned seed) const {
  std::vector<Vec> out;
  if (is_empty() || count <= 0) return out;
  if (kind == Kind::Points) {
    for (int i = 0; i < count; ++i) out.push_back(points[i % points.size()]);
    return out;
  }
  Box bb = bounding_box();
  Halton h(bb.dim(), seed);
  long guard = 0;
  while (static_cast<int>(out.size()) < count) {
    Vec p = h.next_in(bb);
    if (contains(p, 0.0)) out.push_back(p);
    if (++guard > 1000L * count + 100000L)
      throw std::runtime_error("sample_halton: rejection stalled (region too thin?)");
  }
  return out;
}

// ---------------------------------------------------------------------------

double brent(const std::function<double(double)>& f, double a, double b,
             double xtol, int max_iter) {
  double fa = f(a), fb = f(b);
  if (fa == 0.0) return a;
  if (fb == 0.0) return b;
  if (fa * fb > 0.0) throw std::runtime_error("brent: root not bracketed");
  double c = a, fc = fa, d = b - a, e = d;
  for (int it = 0; it < max_iter; ++it) {
    if (std::abs(fc) < std::abs(fb)) {
      a = b; b = c; c = a;
      fa = fb; fb = fc; fc = fa;
    }
    double tol = 2.0 * std::numeric_limits<double>::epsilon() * std::abs(b) + 0.5 * xtol;
    double m = 0.5 * (c - b);
    if (std::abs(m) <= tol || fb == 0.0) return b;
    if (std::abs(e) < tol || std::abs(fa) <= std::abs(fb)) {
      d = m; e = m;  // bisection
    } else {
      double s = fb / fa, p, q;
      if (a == c) {  // secant
        p = 2.0 * m * s;
        q = 1.0 - s;
      } else {  // inverse quadratic
        double qq = fa / fc, r = fb / fc;
        p = s * (2.0 * m * qq * (qq - r) - (b - a) * (r - 1.0));
        q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
      }
      if (p > 0.0) q = -q; else p = -p;
      if (2.0 * p < std::min(3.0 * m * q - std::abs(tol * q), std::abs(e * q))) {
        e = d; d = p / q;
      } else {
        d = m; e = m;
      }
    }
    a = b; fa = fb;
    b += (std::abs(d) > tol) ? d : (m > 0 ? tol : -tol);
    fb = f(b);
    if ((fb > 0) == (fc > 0)) { c = a; fc = fa; d = b - a; e = d; }
  }
  return b;
}

std::string format_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace clf
