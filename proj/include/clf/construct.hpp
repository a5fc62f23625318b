#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "clf/baselyap.hpp"
#include "clf/chainrec.hpp"
#include "clf/flowbox.hpp"
#include "clf/section.hpp"
#include "clf/smoothstep.hpp"
#include "clf/system.hpp"

namespace clf {

// ---------------------------------------------------------------------------
// the four blend steps in box coordinates (t along the flow, q frozen).
// Everything here is a pure formula on one fiber; the stack evaluator below
// feeds it real data, the unit tests feed it synthetic fibers.

namespace steps {

struct VD {
  double v = 0.0;  // value
  double d = 0.0;  // d/dt along the fiber
};

// description of one fiber of the incoming function together with the blend
// data of the current box at the frozen parameter q
struct FiberSpec {
  std::function<VD(double)> tau;  // incoming function along the fiber
  double tau_m1 = 0.0;            // its value at t = -1
  SmoothStep mu_minus{-1.5, -1.25};
  double nu1 = 0.0;               // cutoff weight at q
  std::vector<double> lambda;     // partition weights at q (sum 1 when nu1 > 0)
  std::vector<double> phi;        // level times, one per cover entry
  std::vector<double> c;          // level values, one per cover entry
  SmoothStep mu_plus{0.5, 0.75};
  double nu2 = 1.0;               // lateral cutoff weight at q
};

// step 1: ramp onto the straight line tau(-1,q) - (t + 3/2) across
// [-3/2, -5/4]; slope exactly -1 for t >= -5/4
VD tau1(const FiberSpec& f, double t);

// one step-2 summand: follow tau until the level c is crossed at phi, then
// descend with unit speed
VD sigma(const FiberSpec& f, double t, double phi, double c);

// steps 1+2: blend the sigma average over tau1 with weight nu1
VD tau2(const FiberSpec& f, double t);

// steps 1-3: hand back to tau across [k+1-2eps, k+1-eps]
VD tau3(const FiberSpec& f, double t);

// steps 1-4: lateral blend with weight nu2(q); the full in-box formula
VD tau4(const FiberSpec& f, double t);

}  // namespace steps

// ---------------------------------------------------------------------------
// assembled per-box data

struct CoverEntry {
  int comp = 0;
  double q_center = 0.0;
  double rho = 0.0;        // weight plateau half-width; support half-width 2*rho
  double t_witness = 0.0;  // in [-7/4, -5/4]
  double c_level = 0.0;    // incoming-function value at the witness point
};

struct BoxModification {
  FlowBox box;
  SmoothStep mu_minus{-1.5, -1.25};
  std::vector<CoverEntry> cover;
  std::vector<CutoffProfile> nu1;  // per component, on arc-length parameter
  double eps = 0.25;               // in (0, 1/2)
  SmoothStep mu_plus{0.5, 0.75};   // (k+1-2eps, k+1-eps)
  std::vector<CutoffProfile> nu2;  // per component

  // weight of cover entry j at parameter q (unnormalized plateau bump)
  double lambda_weight(int j, double q) const;
};

// ---------------------------------------------------------------------------
// recursive evaluator of the modification stack.
//
// Stage 0 is C * base; stage k applies box k's four blend steps on top of
// stage k-1.  Values and derivatives are taken w.r.t. the chart field (the
// field the boxes were built for), so the prescribed zone has derivative
// exactly -1.  Evaluation is single-threaded (it memoizes per-fiber flows).

class StackEvaluator : public LyapunovEvaluator {
 public:
  StackEvaluator(std::shared_ptr<const LyapunovEvaluator> base, double scale,
                 VectorField chart_field, std::vector<BoxModification> mods,
                 FlowMapConfig flow = {});

  double value(const Vec& p) const override { return eval(p).v; }
  double orbital_derivative(const Vec& p) const override { return eval(p).d; }
  std::string provenance() const override { return "modified-stack"; }

  steps::VD eval(const Vec& p) const { return eval_stage(stages(), p); }
  steps::VD eval_stage(int k, const Vec& p) const;

  int stages() const { return int(mods_.size()); }
  const BoxModification& mod(int k) const { return mods_.at(std::size_t(k) - 1); }
  const std::vector<BoxModification>& mods() const { return mods_; }
  const LyapunovEvaluator& base() const { return *base_; }
  std::shared_ptr<const LyapunovEvaluator> base_ptr() const { return base_; }
  double scale() const { return scale_; }
  const VectorField& chart_field() const { return field_; }
  const FlowMapConfig& flow_config() const { return flow_; }

  // where the chart of box k places (t, q), and the step values there
  struct StepTrace {
    steps::VD tau;  // incoming stage k-1 at the point
    double tau_m1 = 0.0;
    steps::VD t1, t2, t3, t4;
    double nu1 = 0.0, nu2 = 0.0;
    std::vector<double> phi;  // per cover entry of this component (NaN unused)
  };
  StepTrace trace_in_box(int k, double t, int comp, double q) const;
  Vec chart_point(int k, double t, int comp, double q) const;

  // is p inside the (slightly padded) closed inner box of some stage < k
  bool in_accumulated_inner(int k, const Vec& p, double pad_t = 0.0,
                            double pad_q = 0.0) const;

  void clear_memo() const { fibers_.clear(); }

 private:
  struct FiberData {
    Vec z;          // section point of the fiber
    FlowPath back;  // trajectory over [t_fiber_lo, 0]
    std::optional<double> tau_m1;
    std::map<int, double> phi;  // per cover-entry index
  };
  FiberData& fiber(int k, int comp, double q) const;
  steps::VD run_steps(int k, const ChartCoord& cc, const steps::VD& tau,
                      StepTrace* trace) const;

  std::shared_ptr<const LyapunovEvaluator> base_;
  double scale_ = 1.0;
  VectorField field_;
  std::vector<BoxModification> mods_;
  FlowMapConfig flow_;
  ChartInverseOptions inv_;
  mutable std::map<std::tuple<int, int, std::uint64_t>,
                   std::unique_ptr<FiberData>> fibers_;
};

// ---------------------------------------------------------------------------
// pipeline assembly

struct ConstructOptions {
  FlowMapConfig flow;

  // cover building
  int cover_grid = 21;          // per-axis K sample grid
  int cover_extra = 256;        // additional low-discrepancy K samples
  double cover_time = 0.9;      // |t| budget when assigning points to a box
  double seed_sink = 0.45;      // flow each level seed forward this long so
                                // the tube's backward reach stays interior
  int max_levels = 8;
  int max_comps_per_level = 8;
  double v_pad = 0.15;          // inner-window margin beyond covered samples
  double w_margin = 0.3;        // outer window beyond the inner window
  double trace_spare = 0.25;    // traced line beyond the outer window

  // section tracing
  double trace_chord_tol = 1e-6;
  double trace_max_step = 0.02;
  double domain_margin = 1e-3;
  double keep_out_cells = 2.0;  // section distance from recurrent cells

  // scale constant
  int scale_t_samples = 48;     // per tube fiber
  int scale_q_samples = 48;     // per component
  double scale_margin = 1.1;    // C = margin * (N+3) / m
  double tube_keep_out_cells = 1.0;

  // per-box assembly
  int e1_t_samples = 9;
  int e1_q_samples = 65;
  double e1_margin = 1e-6;          // slack on the -(k+3) bound
  double coincide_tol = 1e-9;       // incoming stack equals scaled base on E1 tube
  int mask_q_samples = 129;         // M_s detection per component
  int mask_t_samples = 9;           // over [-7/4, -5/4]
  double mask_pad_t = 0.1, mask_pad_q = 0.1;
  double cover_rho = 0.3;           // initial partition plateau half-width
  int shrink_rounds = 7;
  int shrink_q_samples = 17;        // per cover entry support
  double od_tol = 1e-6;             // |slope + 1| tolerance near level times
  double slope_probe = 0.08;        // half-width of the probe around phi
  double bracket_margin_frac = 0.02;
  double eps_gap = 1e-3;            // required sampled margin tau2 - tau
  int eps_t_samples = 7, eps_q_samples = 33;
  double nu2_over = 0.1, nu2_ramp = 0.12;
  double nu1_ramp_scale = 1.0;      // ramp = scale * mask sample spacing

  unsigned seed = 0;
};

struct ConstructionError : std::runtime_error {
  std::string stage;
  ConstructionError(std::string st, const std::string& what)
      : std::runtime_error(st + ": " + what), stage(std::move(st)) {}
};

// admission + reduction inputs
struct ConstructInputs {
  VectorField X;   // the field as given
  ScalarField g;   // prescribed negative target on K
  Region K;
  std::shared_ptr<const LyapunovEvaluator> base;  // tau' for X (unscaled)

  // chain-recurrence context (optional; empty set = no keep-out)
  CellGrid grid;
  RecurrentSet rec;
  bool have_rec = false;
};

struct PrescribedResult {
  std::shared_ptr<StackEvaluator> stack;  // value(_) is the final function
  VectorField X_raw;                      // original field
  VectorField X_hat;                      // f X
  VectorField X_g;                        // chart field -X_hat/ghat
  std::function<double(const Vec&)> f;
  std::function<double(const Vec&)> ghat;
  std::shared_ptr<const LyapunovEvaluator> base;
  double C = 1.0;
  int N = 0;
  double uk_margin = 0.0;   // extension-neighbourhood width used by the reduction
  double collar = 0.0;      // blend-band width used by the reduction
  unsigned reduce_seed = 0;
  std::vector<std::string> log;

  // orbital derivative w.r.t. the original field
  double od_original(const Vec& p) const;
};

// cover choice: descending levels whose inner boxes swallow K
struct CoverPlan {
  std::vector<FlowBox> boxes;  // levels strictly decreasing
};

CoverPlan choose_cover(const VectorField& field, const LyapunovEvaluator& base,
                       const Region& K, const CellGrid& grid, const RecurrentSet& rec,
                       bool have_rec, const ConstructOptions& opt,
                       std::vector<std::string>* log);

// smallest admissible scale: C with C * od(base) < -(N+3) on all tubes
double scale_constant(const VectorField& field, const LyapunovEvaluator& base,
                      const std::vector<FlowBox>& boxes, const ConstructOptions& opt,
                      std::vector<std::string>* log);

// assemble the modification data of one box on top of the existing stack
BoxModification modify_box(const std::shared_ptr<const LyapunovEvaluator>& base,
                           double C, const VectorField& field,
                           const std::vector<BoxModification>& prev, FlowBox box,
                           const ConstructOptions& opt, std::vector<std::string>* log);

PrescribedResult construct_prescribed(const ConstructInputs& in,
                                      const ConstructOptions& opt = {});

}  // namespace clf
