#include "clf/flowbox.hpp"

#include <cmath>
#include <stdexcept>

namespace clf {

namespace {

bool window_contains(const Polyline& line, double q, double lo, double hi, double pad) {
  if (line.closed) {
    const double L = line.length();
    if (hi - lo >= L - 1e-12) return true;  // window spans the whole loop
    const double w = line.wrap(q - lo);
    return w <= (hi - lo) + pad || w >= L - pad;
  }
  return q >= lo - pad && q <= hi + pad;
}

}  // namespace

bool BoxComponent::in_outer(double q, double pad) const {
  return window_contains(sec.line, q, sec.v_lo, sec.v_hi, pad);
}

bool BoxComponent::in_inner(double q, double pad) const {
  return window_contains(sec.line, q, v_in_lo, v_in_hi, pad);
}

FlowBox build_flow_box(std::vector<BoxComponent> comps, double level_r, int k_index,
                       const VectorField& X, const LyapunovEvaluator& base,
                       const FlowBoxBuildOptions& opt) {
  FlowBox box;
  box.level_r = level_r;
  box.k_index = k_index;
  box.half_width = double(k_index) + 2.0;
  box.comps = std::move(comps);

  BoxAccum hull;
  double lev_lo = kInf, lev_hi = -kInf;
  for (const auto& bc : box.comps) {
    const double lo = bc.sec.v_lo, hi = bc.sec.v_hi;
    for (int i = 0; i <= opt.sample_params; ++i) {
      const double q = lo + (hi - lo) * double(i) / double(opt.sample_params);
      Vec z = bc.sec.line.point_at(q);
      snap_to_level(base, level_r, z);
      // walk the fiber once in each direction, recording hull and level range
      for (double dir : {1.0, -1.0}) {
        const double t_max = (dir > 0.0) ? box.t_used_hi() : box.t_back;
        const FlowPath path = flow_path(X, z, dir * t_max, opt.flow, true);
        const double reach = std::abs(path.t_end);
        for (double t = 0.0; t <= reach + 1e-12; t += opt.time_step) {
          const Vec p = path.at(std::min(t, reach) * dir);
          hull.add(p);
          const double w = base.value(p);
          lev_lo = std::min(lev_lo, w);
          lev_hi = std::max(lev_hi, w);
        }
      }
    }
  }
  if (hull.empty) throw std::runtime_error("flow box has no sampled chart image");
  box.aabb = hull.box().inflated(opt.aabb_pad);
  box.lev_min = lev_lo - opt.level_pad;
  box.lev_max = lev_hi + opt.level_pad;
  return box;
}

Vec box_chart(const FlowBox& box, const LyapunovEvaluator& base, const VectorField& X,
              double t, int comp, double q, const FlowMapConfig& cfg) {
  const BoxComponent& bc = box.comps.at(std::size_t(comp));
  Vec z = bc.sec.line.point_at(q);
  if (!snap_to_level(base, box.level_r, z))
    throw std::runtime_error("chart point does not reach the section level");
  if (t == 0.0) return z;
  return flow_map(X, z, t, cfg);
}

std::optional<ChartCoord> box_chart_inverse(const FlowBox& box,
                                            const LyapunovEvaluator& base,
                                            const VectorField& X, const Vec& p,
                                            const ChartInverseOptions& opt) {
  if (box.comps.empty()) return std::nullopt;
  if (!box.aabb.contains(p)) return std::nullopt;
  const double v0 = base.value(p);
  if (v0 < box.lev_min || v0 > box.lev_max) return std::nullopt;

  // March to the level set base = level_r in the level itself: with
  // y = (x, s), dy/dv = (X, 1)/(grad base . X) lands on the level after the
  // whole span (no crossing detection), valid while v is strictly monotone
  // along the orbit.
  Vec z = p;
  double s_hit = 0.0;
  const double span = box.level_r - v0;
  if (std::abs(span) > opt.level_tol) {
    const int d = int(p.size());
    const bool have_grad = base.has_gradient();
    auto grad_at = [&](const Vec& x) -> Vec {
      if (have_grad) return base.gradient(x);
      Vec g(d);
      Vec e = x;
      const double h = 1e-6;
      for (int i = 0; i < d; ++i) {
        e[i] = x[i] + h;
        const double vp = base.value(e);
        e[i] = x[i] - h;
        g[i] = (vp - base.value(e)) / (2.0 * h);
        e[i] = x[i];
      }
      return g;
    };
    auto rhs = [&](const Vec& y) -> Vec {
      const Vec x = y.head(d);
      if (!X.domain.contains(x, opt.flow.domain_pad))
        throw FlowDomainExit(y[d], x);
      const Vec f = X.eval(x);
      const double decay = grad_at(x).dot(f);
      if (std::abs(decay) < opt.min_decay) throw FlowDomainExit(y[d], x);
      Vec dy(d + 1);
      dy.head(d) = f / decay;
      dy[d] = 1.0 / decay;
      return dy;
    };
    Vec y(d + 1);
    y.head(d) = p;
    y[d] = 0.0;
    const long n = std::max<long>(8, long(std::ceil(std::abs(span) / opt.level_h)));
    try {
      y = dp45_span(rhs, std::move(y), span, n);
    } catch (const FlowDomainExit&) {
      return std::nullopt;  // not monotone in v, or left the domain
    }
    z = y.head(d);
    s_hit = y[d];
  }
  snap_to_level(base, box.level_r, z);

  ChartCoord best;
  best.proj_dist = kInf;
  for (int ci = 0; ci < int(box.comps.size()); ++ci) {
    const auto& bc = box.comps[std::size_t(ci)];
    Polyline::Proj pr = bc.sec.line.project(z);
    if (pr.dist < best.proj_dist && bc.in_outer(pr.s, 1e-12)) {
      best.proj_dist = pr.dist;
      best.comp = ci;
      best.q = pr.s;
    }
  }
  if (best.proj_dist > opt.proj_tol) return std::nullopt;
  best.t = -s_hit;  // p = Phi_t(z) with z on the section
  if (std::abs(best.t) > box.half_width + opt.time_pad) return std::nullopt;
  return best;
}

double level_time(const std::function<double(double)>& tau_fiber, double c,
                  double u_lo, double u_hi, double utol) {
  const double a = tau_fiber(u_lo) - c;
  const double b = tau_fiber(u_hi) - c;
  if (a == 0.0) return u_lo;
  if (b == 0.0) return u_hi;
  if (a < 0.0 || b > 0.0)
    throw std::runtime_error("level_time: target level not bracketed by the window");
  return brent([&](double u) { return tau_fiber(u) - c; }, u_lo, u_hi, utol);
}

}  // namespace clf
