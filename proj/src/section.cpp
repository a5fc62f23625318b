#include "clf/section.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "clf/flow.hpp"

namespace clf {

void Polyline::build_cum() {
  cum.assign(pts.size(), 0.0);
  for (std::size_t i = 1; i < pts.size(); ++i)
    cum[i] = cum[i - 1] + (pts[i] - pts[i - 1]).norm();
}

double Polyline::wrap(double s) const {
  const double L = length();
  if (L <= 0.0) return 0.0;
  double w = s - L * std::floor(s / L);
  if (w < 0.0) w += L;       // guard FP edge at exact multiples
  if (w >= L) w -= L;
  return w;
}

Vec Polyline::point_at(double s) const {
  if (pts.empty()) throw std::runtime_error("point_at on empty polyline");
  if (pts.size() == 1) return pts[0];
  double t = closed ? wrap(s) : std::clamp(s, 0.0, length());
  auto it = std::upper_bound(cum.begin(), cum.end(), t);
  std::size_t i = (it == cum.begin()) ? 1 : std::size_t(it - cum.begin());
  if (i >= pts.size()) i = pts.size() - 1;
  const double seg = cum[i] - cum[i - 1];
  const double a = seg > 0.0 ? (t - cum[i - 1]) / seg : 0.0;
  return pts[i - 1] + a * (pts[i] - pts[i - 1]);
}

Polyline::Proj Polyline::project(const Vec& p) const {
  Proj best;
  for (std::size_t i = 1; i < pts.size(); ++i) {
    const Vec d = pts[i] - pts[i - 1];
    const double L2 = d.squaredNorm();
    double a = L2 > 0.0 ? (p - pts[i - 1]).dot(d) / L2 : 0.0;
    a = std::clamp(a, 0.0, 1.0);
    const Vec q = pts[i - 1] + a * d;
    const double dist = (p - q).norm();
    if (dist < best.dist) {
      best.dist = dist;
      best.s = cum[i - 1] + a * std::sqrt(L2);
    }
  }
  return best;
}

// ---------------------------------------------------------------------------

namespace {

Vec grad_of(const LyapunovEvaluator& tau, const Vec& p) {
  if (tau.has_gradient()) return tau.gradient(p);
  const double h = 1e-6;
  Vec g(p.size());
  Vec q = p;
  for (int i = 0; i < p.size(); ++i) {
    q[i] = p[i] + h;
    const double fp = tau.value(q);
    q[i] = p[i] - h;
    const double fm = tau.value(q);
    q[i] = p[i];
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

}  // namespace

bool snap_to_level(const LyapunovEvaluator& tau, double level, Vec& p,
                   int max_iter, double tol) {
  for (int it = 0; it < max_iter; ++it) {
    const double err = tau.value(p) - level;
    if (std::abs(err) <= tol) return true;
    const Vec g = grad_of(tau, p);
    const double g2 = g.squaredNorm();
    if (g2 < 1e-20) return false;
    p -= (err / g2) * g;
  }
  return std::abs(tau.value(p) - level) <= 1e3 * tol;
}

namespace {

struct Walker {
  const LyapunovEvaluator& tau;
  double level;
  const TraceOptions& opt;

  // unit tangent at p, oriented to continue `prev` (or arbitrary when prev=0)
  bool tangent(const Vec& p, const Vec& prev, Vec& out) const {
    const Vec g = grad_of(tau, p);
    if (g.norm() < opt.grad_min) return false;
    Vec t = perp2(g);
    t.normalize();
    if (prev.size() == 2 && t.dot(prev) < 0.0) t = -t;
    out = t;
    return true;
  }

  // one adaptive predictor-corrector step; returns the stop reason or nullopt
  std::optional<TraceStop> step(Vec& p, Vec& tan, double& h) const {
    for (;;) {
      Vec cand = p + h * tan;
      if (!snap_to_level(tau, level, cand) || (cand - p).norm() > 3.0 * h) {
        if (h <= opt.min_step) return TraceStop::Gradient;
        h = std::max(opt.min_step, 0.5 * h);
        continue;
      }
      Vec tan1;
      if (!tangent(cand, tan, tan1)) return TraceStop::Gradient;
      const double chord = (cand - p).norm();
      const double dtheta = std::acos(std::clamp(tan.dot(tan1), -1.0, 1.0));
      const double sagitta = chord * dtheta / 8.0;
      if (sagitta > opt.chord_tol && h > opt.min_step) {
        h = std::max(opt.min_step, 0.5 * h);
        continue;
      }
      if (!opt.domain.contains(cand, -opt.domain_margin)) return TraceStop::Domain;
      if (opt.keep_out_dist && opt.keep_out_dist(cand) < opt.keep_out_margin)
        return TraceStop::KeepOut;
      p = cand;
      tan = tan1;
      if (sagitta < 0.25 * opt.chord_tol) h = std::min(opt.max_step, 1.4 * h);
      return std::nullopt;
    }
  }
};

}  // namespace

TraceResult trace_level_curve(const LyapunovEvaluator& tau, double level,
                              const Vec& seed, const TraceOptions& opt) {
  if (seed.size() != 2)
    throw std::runtime_error("level-curve tracing requires a planar system");
  Vec p0 = seed;
  if (!snap_to_level(tau, level, p0))
    throw std::runtime_error("trace seed does not reach the level set");

  Walker w{tau, level, opt};
  Vec tan0;
  if (!w.tangent(p0, Vec(), tan0))
    throw std::runtime_error("degenerate gradient at trace seed");

  TraceResult res;
  auto run_dir = [&](const Vec& dir0, std::vector<Vec>& out, bool detect_close) {
    Vec p = p0, tan = dir0;
    double h = opt.max_step, arc = 0.0;
    const double close_arm = 10.0 * opt.max_step;
    while (arc < opt.max_extent) {
      Vec prev = p;
      auto stop = w.step(p, tan, h);
      if (stop) return *stop;
      arc += (p - prev).norm();
      if (detect_close && arc > close_arm && (p - p0).norm() < 1.5 * h) {
        out.push_back(p0);  // wrap exactly onto the start
        return TraceStop::Closed;
      }
      out.push_back(p);
    }
    return TraceStop::Extent;
  };

  std::vector<Vec> plus, minus;
  res.stop_plus = run_dir(tan0, plus, true);
  if (res.stop_plus == TraceStop::Closed) {
    res.line.pts.push_back(p0);
    for (auto& q : plus) res.line.pts.push_back(q);
    res.line.closed = true;
    res.seed_param = 0.0;
  } else {
    res.stop_minus = run_dir(-tan0, minus, false);
    res.line.pts.reserve(minus.size() + 1 + plus.size());
    for (auto it = minus.rbegin(); it != minus.rend(); ++it)
      res.line.pts.push_back(*it);
    res.line.pts.push_back(p0);
    for (auto& q : plus) res.line.pts.push_back(q);
  }
  res.line.build_cum();
  if (!res.line.closed) res.seed_param = res.line.cum[minus.size()];
  return res;
}

// ---------------------------------------------------------------------------

SectionComponent section_from_level(const LyapunovEvaluator& tau, const VectorField& X,
                                    double level, const Vec& seed,
                                    const SectionFromLevelOptions& opt) {
  Vec q = seed;
  const double v0 = tau.value(q);
  if (std::abs(v0 - level) > 1e-12) {
    // slide along the flow until the level is crossed; the base function is
    // strictly decreasing along orbits away from the recurrent set
    const double dir = (v0 > level) ? 1.0 : -1.0;
    bool found = false;
    try {
      flow_steps(X, seed, dir * opt.seed_search_span, opt.flow,
                 [&](const FlowStep& st) {
                   const double a = tau.value(st.y0) - level;
                   const double b = tau.value(st.y1) - level;
                   if (a * b <= 0.0) {
                     const double tc = brent(
                         [&](double t) { return tau.value(st.hermite(t)) - level; },
                         st.t0, st.t1);
                     q = st.hermite(tc);
                     found = true;
                     return false;
                   }
                   return true;
                 });
    } catch (const FlowDomainExit&) {
      // fall through to the error below
    }
    if (!found)
      throw std::runtime_error("flow from seed never reaches the requested level");
  }
  if (!snap_to_level(tau, level, q))
    throw std::runtime_error("cannot refine seed onto the level set");

  TraceResult tr = trace_level_curve(tau, level, q, opt.trace);
  SectionComponent comp;
  comp.line = std::move(tr.line);
  if (comp.line.closed) {
    comp.v_lo = 0.0;
    comp.v_hi = comp.line.length();
  } else {
    const double L = comp.line.length();
    comp.v_lo = std::max(0.0, tr.seed_param - opt.extent);
    comp.v_hi = std::min(L, tr.seed_param + opt.extent);
    const bool short_side = (tr.seed_param - comp.v_lo < opt.extent - 1e-9) ||
                            (comp.v_hi - tr.seed_param < opt.extent - 1e-9);
    if (short_side && !opt.best_effort)
      throw std::runtime_error("section trace stopped before the requested extent");
  }
  return comp;
}

}  // namespace clf
