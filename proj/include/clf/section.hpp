#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "clf/baselyap.hpp"
#include "clf/geometry.hpp"

namespace clf {

// arc-length parameterised polyline; closed polylines wrap (last point ==
// first point, parameter modulo length)
struct Polyline {
  std::vector<Vec> pts;
  std::vector<double> cum;  // cumulative chord length, cum[0] = 0
  bool closed = false;

  void build_cum();
  double length() const { return cum.empty() ? 0.0 : cum.back(); }
  double wrap(double s) const;   // fold a circular parameter into [0, L)
  Vec point_at(double s) const;  // linear interpolation

  struct Proj {
    double s = 0.0;
    double dist = kInf;
  };
  Proj project(const Vec& p) const;
};

// one connected piece of a transversal section, with the inner parameter
// window [v_lo, v_hi] that the flow-box cover actually uses
struct SectionComponent {
  Polyline line;
  double v_lo = 0.0, v_hi = 0.0;
  bool full_loop() const { return line.closed; }
};

struct Section {
  double level_r = 0.0;  // value of the base function on the section
  std::vector<SectionComponent> comps;
};

// ---------------------------------------------------------------------------
// level-curve tracing

struct TraceOptions {
  double chord_tol = 1e-6;   // max sagitta between polyline and curve
  double max_step = 0.02;
  double min_step = 1e-7;
  double max_extent = 50.0;  // arc length per direction
  double grad_min = 1e-8;    // stop when the gradient degenerates
  Box domain;                // stop before leaving
  double domain_margin = 1e-3;
  // optional keep-out (distance to the recurrent cells); the trace stops when
  // it would get closer than keep_out_margin
  std::function<double(const Vec&)> keep_out_dist;
  double keep_out_margin = 0.0;
};

enum class TraceStop { Extent, Closed, Domain, KeepOut, Gradient };

struct TraceResult {
  Polyline line;
  TraceStop stop_plus = TraceStop::Extent;
  TraceStop stop_minus = TraceStop::Extent;
  double seed_param = 0.0;  // arc-length position of the seed on the polyline
};

// Newton-correct p onto {tau = level} along grad(tau); false when it diverges
bool snap_to_level(const LyapunovEvaluator& tau, double level, Vec& p,
                   int max_iter = 12, double tol = 1e-12);

// trace the connected level component of {tau = level} through seed (which
// must already lie on the level set); n = 2 only
TraceResult trace_level_curve(const LyapunovEvaluator& tau, double level,
                              const Vec& seed, const TraceOptions& opt);

// spec-facing wrapper: correct the seed onto the level set by sliding along
// the flow of X, then trace.  Throws when the level cannot be reached or the
// trace cannot span [extent each side] without hitting a stop condition,
// unless best_effort is set.
struct SectionFromLevelOptions {
  TraceOptions trace;
  double extent = 2.0;        // requested arc length on each side of the seed
  bool best_effort = false;   // accept shorter sections (cover building)
  FlowMapConfig flow;
  double seed_search_span = 20.0;  // how far along the flow to look for the level
};

SectionComponent section_from_level(const LyapunovEvaluator& tau, const VectorField& X,
                                    double level, const Vec& seed,
                                    const SectionFromLevelOptions& opt);

}  // namespace clf
