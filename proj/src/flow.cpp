#include "clf/flow.hpp"

#include <algorithm>
#include <cmath>

namespace clf {

Vec FlowStep::hermite(double t) const {
  double h = t1 - t0;
  double s = (t - t0) / h;
  double s2 = s * s, s3 = s2 * s;
  double h00 = 2 * s3 - 3 * s2 + 1;
  double h10 = s3 - 2 * s2 + s;
  double h01 = -2 * s3 + 3 * s2;
  double h11 = s3 - s2;
  return h00 * y0 + (h10 * h) * f0 + h01 * y1 + (h11 * h) * f1;
}

// Dormand-Prince 5(4) tableau
namespace {
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                 a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                 a64 = 49.0 / 176, a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                 b5 = -2187.0 / 6784, b6 = 11.0 / 84;
// embedded 4th order
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                 e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;
}  // namespace

namespace {

// one DP45 stage evaluation shared by both steppers; fills y1 (5th order),
// k7 (FSAL derivative at y1) and the embedded error estimate
struct Dp45Work {
  Vec k2, k3, k4, k5, k6, k7, y1, err;
  template <class Rhs>
  void step(const Rhs& rhs, const Vec& y, const Vec& f, double h) {
    k2 = rhs(y + h * (a21 * f));
    k3 = rhs(y + h * (a31 * f + a32 * k2));
    k4 = rhs(y + h * (a41 * f + a42 * k2 + a43 * k3));
    k5 = rhs(y + h * (a51 * f + a52 * k2 + a53 * k3 + a54 * k4));
    k6 = rhs(y + h * (a61 * f + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
    y1 = y + h * (b1 * f + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
    k7 = rhs(y1);  // FSAL
    err = h * (e1 * f + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
  }
};

// package an accepted step and raise FlowDomainExit if it left the box
FlowStep pack_step(const VectorField& X, const FlowMapConfig& cfg, double dir,
                   double s, double h, const Vec& y, const Vec& f, const Vec& y1,
                   const Vec& k7) {
  FlowStep st;
  st.t0 = dir * s;
  st.t1 = dir * (s + h);
  st.y0 = y;
  st.y1 = y1;
  st.f0 = dir * f;
  st.f1 = dir * k7;
  if (!X.domain.contains(y1, cfg.domain_pad)) {
    // bisect the exit point on the Hermite interpolant
    double a = st.t0, b = st.t1;
    for (int i = 0; i < 80 && std::abs(b - a) > 1e-13 * (1 + std::abs(b)); ++i) {
      double m = 0.5 * (a + b);
      if (X.domain.contains(st.hermite(m), cfg.domain_pad)) a = m; else b = m;
    }
    throw FlowDomainExit(b, st.hermite(b));
  }
  return st;
}

}  // namespace

void flow_steps(const VectorField& X, const Vec& p, double t,
                const FlowMapConfig& cfg,
                const std::function<bool(const FlowStep&)>& on_step) {
  if (t == 0.0) return;
  const double dir = t > 0 ? 1.0 : -1.0;
  const double t_end = t;
  auto rhs = [&](const Vec& y) { return dir > 0 ? X.eval(y) : Vec(-X.eval(y)); };
  // integrate in the positive variable s = dir * time
  const double s_end = std::abs(t_end);

  Vec y = p;
  Vec f = rhs(y);
  double s = 0.0;

  // initial step from the local scale
  double h = cfg.max_step;
  {
    double ynorm = std::max(y.norm(), 1.0);
    double fnorm = f.norm();
    if (fnorm > 1e-12) h = std::min(h, 0.01 * ynorm / fnorm);
    h = std::min(h, s_end);
  }

  Dp45Work w;
  for (long it = 0; it < cfg.max_steps; ++it) {
    if (s >= s_end) return;
    h = std::min(h, s_end - s);

    w.step(rhs, y, f, h);

    double norm2 = 0.0;
    for (int i = 0; i < y.size(); ++i) {
      double sc =
          cfg.abs_tol + cfg.rel_tol * std::max(std::abs(y[i]), std::abs(w.y1[i]));
      double q = w.err[i] / sc;
      norm2 += q * q;
    }
    double errn = std::sqrt(norm2 / y.size());

    if (errn <= 1.0) {
      const FlowStep st = pack_step(X, cfg, dir, s, h, y, f, w.y1, w.k7);
      s += h;
      y.swap(w.y1);
      f.swap(w.k7);
      if (!on_step(st)) return;

      double fac = errn > 1e-30 ? 0.9 * std::pow(errn, -0.2) : 5.0;
      h = std::min(h * std::clamp(fac, 0.2, 5.0), cfg.max_step);
    } else {
      double fac = 0.9 * std::pow(errn, -0.2);
      h *= std::clamp(fac, 0.1, 0.9);
      if (h < 1e-14) throw std::runtime_error("flow_steps: step size underflow");
    }
  }
  throw std::runtime_error("flow_steps: max step count exceeded");
}

void flow_steps_fixed(const VectorField& X, const Vec& p, double t, double h,
                      const FlowMapConfig& cfg,
                      const std::function<bool(const FlowStep&)>& on_step) {
  if (t == 0.0) return;
  if (!(h > 0.0)) throw std::invalid_argument("flow_steps_fixed: h must be positive");
  const double dir = t > 0 ? 1.0 : -1.0;
  auto rhs = [&](const Vec& y) { return dir > 0 ? X.eval(y) : Vec(-X.eval(y)); };
  const double s_end = std::abs(t);
  // uniform partition; a count-based grid keeps endpoints exact
  const long n = std::max<long>(1, long(std::ceil(s_end / h - 1e-12)));
  if (n > cfg.max_steps)
    throw std::runtime_error("flow_steps_fixed: step budget exceeded");

  Vec y = p;
  Vec f = rhs(y);
  Dp45Work w;
  for (long i = 0; i < n; ++i) {
    const double s0 = s_end * double(i) / double(n);
    const double s1 = (i + 1 == n) ? s_end : s_end * double(i + 1) / double(n);
    w.step(rhs, y, f, s1 - s0);
    const FlowStep st = pack_step(X, cfg, dir, s0, s1 - s0, y, f, w.y1, w.k7);
    y.swap(w.y1);
    f.swap(w.k7);
    if (!on_step(st)) return;
  }
}

Vec flow_map(const VectorField& X, const Vec& p, double t, const FlowMapConfig& cfg) {
  if (t == 0.0) return p;
  Vec out = p;
  flow_steps(X, p, t, cfg, [&](const FlowStep& st) {
    out = st.y1;
    return true;
  });
  return out;
}

Vec FlowPath::at(double t) const {
  if (t == 0.0 || steps.empty()) return start;
  const double dir = t_end >= 0.0 ? 1.0 : -1.0;
  const double u = t * dir;  // distance along the traversal
  if (u < -1e-9 || u > std::abs(t_end) + 1e-9)
    throw std::runtime_error("FlowPath: time outside the cached range");
  if (u <= 0.0) return start;
  std::size_t lo = 0, hi = steps.size() - 1;
  while (lo < hi) {  // first step whose upper end reaches u
    std::size_t mid = (lo + hi) / 2;
    if (steps[mid].t1 * dir < u) lo = mid + 1; else hi = mid;
  }
  const FlowStep& st = steps[lo];
  const double tc = std::clamp(t * dir, st.t0 * dir, st.t1 * dir) * dir;
  return st.hermite(tc);
}

FlowPath flow_path(const VectorField& X, const Vec& p, double t,
                   const FlowMapConfig& cfg, bool truncate_on_exit) {
  FlowPath path;
  path.start = p;
  path.t_end = t;
  try {
    flow_steps(X, p, t, cfg, [&](const FlowStep& st) {
      path.steps.push_back(st);
      return true;
    });
  } catch (const FlowDomainExit&) {
    if (!truncate_on_exit) throw;
    path.t_end = path.steps.empty() ? 0.0 : path.steps.back().t1;
  }
  return path;
}

FlowPath flow_path_fixed(const VectorField& X, const Vec& p, double t, double h,
                         const FlowMapConfig& cfg, bool truncate_on_exit) {
  FlowPath path;
  path.start = p;
  path.t_end = t;
  try {
    flow_steps_fixed(X, p, t, h, cfg, [&](const FlowStep& st) {
      path.steps.push_back(st);
      return true;
    });
  } catch (const FlowDomainExit&) {
    if (!truncate_on_exit) throw;
    path.t_end = path.steps.empty() ? 0.0 : path.steps.back().t1;
  }
  return path;
}

Vec flow_map_fixed(const VectorField& X, const Vec& p, double t, double h,
                   const FlowMapConfig& cfg) {
  if (t == 0.0) return p;
  Vec out = p;
  flow_steps_fixed(X, p, t, h, cfg, [&](const FlowStep& st) {
    out = st.y1;
    return true;
  });
  return out;
}

Vec dp45_span(const std::function<Vec(const Vec&)>& rhs, Vec y, double span,
              long n) {
  if (span == 0.0 || n <= 0) return y;
  Dp45Work w;
  Vec f = rhs(y);
  for (long i = 0; i < n; ++i) {
    const double u0 = span * double(i) / double(n);
    const double u1 = (i + 1 == n) ? span : span * double(i + 1) / double(n);
    w.step(rhs, y, f, u1 - u0);
    y.swap(w.y1);
    f.swap(w.k7);
  }
  return y;
}

}  // namespace clf
