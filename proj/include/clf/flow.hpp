#pragma once

#include <functional>
#include <stdexcept>
#include <vector>

#include "clf/geometry.hpp"
#include "clf/system.hpp"

namespace clf {

struct FlowMapConfig {
  double abs_tol = 1e-10;
  double rel_tol = 1e-10;
  double max_step = 0.25;
  long max_steps = 2000000;
  double domain_pad = 1e-9;  // slack before a state counts as outside
};

// thrown when a trajectory leaves the working box before the requested time
struct FlowDomainExit : std::runtime_error {
  double exit_time;
  Vec state;
  FlowDomainExit(double t, Vec s)
      : std::runtime_error("trajectory left the domain at t = " + format_g17(t)),
        exit_time(t),
        state(std::move(s)) {}
};

// one accepted integrator step, with endpoint derivatives for Hermite
// interpolation between outputs
struct FlowStep {
  double t0 = 0, t1 = 0;
  Vec y0, y1, f0, f1;

  Vec hermite(double t) const;  // cubic interpolant, t in [t0, t1]
};

// integrate from p over signed time t (adaptive Dormand-Prince 5(4));
// on_step is called after every accepted step and may return false to stop
// early at that step boundary.
void flow_steps(const VectorField& X, const Vec& p, double t,
                const FlowMapConfig& cfg,
                const std::function<bool(const FlowStep&)>& on_step);

// time-t flow map; throws FlowDomainExit if the orbit leaves X.domain
Vec flow_map(const VectorField& X, const Vec& p, double t,
             const FlowMapConfig& cfg = {});

// dense trajectory cache: one integration, then interpolated states anywhere
// between time 0 and t_end (used for repeated evaluations along one fiber)
struct FlowPath {
  Vec start;
  double t_end = 0.0;           // signed
  std::vector<FlowStep> steps;  // traversal order (|t| increasing)

  Vec at(double t) const;  // t between 0 and t_end, small overshoot tolerated
};

// truncate_on_exit: clip the path at the domain boundary instead of throwing
FlowPath flow_path(const VectorField& X, const Vec& p, double t,
                   const FlowMapConfig& cfg = {}, bool truncate_on_exit = false);

// Fixed-schedule variants: uniform nominal step h (the last step is clipped),
// no error control. The adaptive controller's accept/reject sequence can flip
// on ulp-level changes of the start point, which makes the integration error
// a rough function of p; a fixed schedule keeps it smooth, which matters for
// anything probed by finite differences afterwards.
void flow_steps_fixed(const VectorField& X, const Vec& p, double t, double h,
                      const FlowMapConfig& cfg,
                      const std::function<bool(const FlowStep&)>& on_step);

FlowPath flow_path_fixed(const VectorField& X, const Vec& p, double t, double h,
                         const FlowMapConfig& cfg = {},
                         bool truncate_on_exit = false);

// time-t flow map over ceil(|t|/h) uniform steps of the same RK scheme
Vec flow_map_fixed(const VectorField& X, const Vec& p, double t, double h,
                   const FlowMapConfig& cfg = {});

// n uniform steps of the same RK scheme for an arbitrary autonomous system
// y' = rhs(y) over the signed span; guards live in rhs (throw to abort)
Vec dp45_span(const std::function<Vec(const Vec&)>& rhs, Vec y, double span,
              long n);

}  // namespace clf
