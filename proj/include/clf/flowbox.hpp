#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "clf/flow.hpp"
#include "clf/geometry.hpp"
#include "clf/section.hpp"

namespace clf {

// one connected section piece of a flow box: the traced polyline sits on
// {base = level_r}; sec.v_lo/v_hi is the outer parameter window (the carrier
// of the partition of unity), [v_in_lo, v_in_hi] the strictly smaller inner
// window that later boxes must respect
struct BoxComponent {
  SectionComponent sec;
  double v_in_lo = 0.0, v_in_hi = 0.0;

  bool in_outer(double q, double pad = 0.0) const;
  bool in_inner(double q, double pad = 0.0) const;
};

struct ChartCoord {
  double t = 0.0;
  int comp = 0;
  double q = 0.0;      // arc-length parameter on the component polyline
  double proj_dist = 0.0;
};

// tubular chart neighborhood (t, q) -> Phi_t(section(q)) around a section of
// a level set; valid for |t| <= half_width, used on [-(k+1), k+1]
struct FlowBox {
  double level_r = 0.0;   // base-function value on the section
  double s_level = 0.0;   // scaled level (bookkeeping; = C * level_r)
  int k_index = 1;
  double half_width = 3.0;
  // the blends are identity behind t = -7/4, so the tube only extends a
  // fixed short stretch backward while the forward reach grows with k
  double t_back = 2.0;
  std::vector<BoxComponent> comps;
  Box aabb;                         // hull of the used chart image, padded
  double lev_min = -kInf, lev_max = kInf;  // base range over the chart

  double t_used_lo() const { return -t_back; }
  double t_used_hi() const { return double(k_index + 1); }
};

struct FlowBoxBuildOptions {
  int sample_params = 48;
  double time_step = 0.25;
  double aabb_pad = 0.2;
  double level_pad = 1e-6;  // absolute slack on the level range precheck
  FlowMapConfig flow;
};

// assemble chart metadata (AABB, level range) by sampling the chart image
FlowBox build_flow_box(std::vector<BoxComponent> comps, double level_r, int k_index,
                       const VectorField& X, const LyapunovEvaluator& base,
                       const FlowBoxBuildOptions& opt);

Vec box_chart(const FlowBox& box, const LyapunovEvaluator& base, const VectorField& X,
              double t, int comp, double q, const FlowMapConfig& cfg);

struct ChartInverseOptions {
  double proj_tol = 1e-3;    // max distance from the section polyline
  double time_pad = 0.25;    // bracket slack beyond the used time range
  double level_tol = 1e-12;  // treat base(p) this close to level_r as on it
  // The march to the section runs in the base level v, d(x,s)/dv =
  // (X, 1)/(grad v . X), over a fixed schedule of ceil(|span|/level_h) steps:
  // it lands on the level exactly, and both the schedule and the arrival
  // state vary smoothly with p (adaptive time stepping does not, and a fixed
  // time step cannot afford the resolution the speed blend needs).
  double level_h = 0.005;
  double min_decay = 1e-4;   // |grad v . X| floor; below it the orbit is not
                             // monotone in v and the point is not chartable
  FlowMapConfig flow;
};

// invert the chart: find (t, comp, q) with Phi_t(section(q)) = p, or nullopt
// when p lies outside the chart image ("not in box" is a regular outcome)
std::optional<ChartCoord> box_chart_inverse(const FlowBox& box,
                                            const LyapunovEvaluator& base,
                                            const VectorField& X, const Vec& p,
                                            const ChartInverseOptions& opt);

// unique u in [u_lo, u_hi] with tau_fiber(u) = c for a strictly decreasing
// fiber function; bracket check + Brent, |u - u*| <= utol
double level_time(const std::function<double(double)>& tau_fiber, double c,
                  double u_lo, double u_hi, double utol = 1e-9);

}  // namespace clf
