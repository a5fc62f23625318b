#include "clf/construct.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <limits>
#include <utility>

namespace clf {

namespace {

constexpr double kFiberLo = -1.75;  // backward reach of one fiber cache
// fiber paths use a fixed schedule: values read off them must vary smoothly
// with the fiber parameter, and adaptive partitions do not
constexpr double kFiberStep = -kFiberLo / 256.0;

std::string num(double v) {
  char b[40];
  std::snprintf(b, sizeof b, "%.6g", v);
  return b;
}

void log_line(std::vector<std::string>* log, std::string s) {
  if (log) log->push_back(std::move(s));
}

std::uint64_t dbits(double x) {
  static_assert(sizeof(double) == sizeof(std::uint64_t));
  std::uint64_t b;
  std::memcpy(&b, &x, sizeof b);
  return b;
}

// parameter grid over the outer window of a component (inclusive ends)
double wparam(const BoxComponent& bc, int i, int n) {
  return bc.sec.v_lo + (bc.sec.v_hi - bc.sec.v_lo) * double(i) / double(n);
}

steps::VD sigma_impl(const steps::VD& tau, double t, double phi, double c) {
  if (t <= phi) return tau;
  return {c - t + phi, -1.0};
}

struct StepsOut {
  steps::VD t1, t2, t3, t4;
};

// all four blend steps from one evaluation of the incoming function; the
// weights depend on q only, so d/dt passes through every convex combination
StepsOut run_formulas(const steps::FiberSpec& f, double t, const steps::VD& tau) {
  StepsOut o;
  {
    const double mu = f.mu_minus(t), dmu = f.mu_minus.deriv(t);
    const double lv = f.tau_m1 - (t + 1.5);
    o.t1.v = (1.0 - mu) * tau.v + mu * lv;
    o.t1.d = (1.0 - mu) * tau.d - mu + dmu * (lv - tau.v);
  }
  o.t2 = o.t1;
  if (f.nu1 > 0.0 && !f.lambda.empty()) {
    steps::VD sig{0.0, 0.0};
    double wsum = 0.0;
    for (std::size_t j = 0; j < f.lambda.size(); ++j) {
      const double w = f.lambda[j];
      if (w <= 0.0) continue;
      const steps::VD sj = sigma_impl(tau, t, f.phi[j], f.c[j]);
      sig.v += w * sj.v;
      sig.d += w * sj.d;
      wsum += w;
    }
    if (wsum > 0.0) {
      sig.v /= wsum;
      sig.d /= wsum;
      o.t2.v = f.nu1 * sig.v + (1.0 - f.nu1) * o.t1.v;
      o.t2.d = f.nu1 * sig.d + (1.0 - f.nu1) * o.t1.d;
    }
  }
  {
    const double mu = f.mu_plus(t), dmu = f.mu_plus.deriv(t);
    o.t3.v = (1.0 - mu) * o.t2.v + mu * tau.v;
    o.t3.d = (1.0 - mu) * o.t2.d + mu * tau.d + dmu * (tau.v - o.t2.v);
  }
  o.t4.v = f.nu2 * o.t3.v + (1.0 - f.nu2) * tau.v;
  o.t4.d = f.nu2 * o.t3.d + (1.0 - f.nu2) * tau.d;
  return o;
}

}  // namespace

namespace steps {

VD tau1(const FiberSpec& f, double t) { return run_formulas(f, t, f.tau(t)).t1; }

VD sigma(const FiberSpec& f, double t, double phi, double c) {
  return sigma_impl(f.tau(t), t, phi, c);
}

VD tau2(const FiberSpec& f, double t) { return run_formulas(f, t, f.tau(t)).t2; }

VD tau3(const FiberSpec& f, double t) { return run_formulas(f, t, f.tau(t)).t3; }

VD tau4(const FiberSpec& f, double t) { return run_formulas(f, t, f.tau(t)).t4; }

}  // namespace steps

double BoxModification::lambda_weight(int j, double q) const {
  const CoverEntry& e = cover.at(std::size_t(j));
  const Polyline& line = box.comps.at(std::size_t(e.comp)).sec.line;
  double off = q - e.q_center;
  if (line.closed) {
    const double L = line.length();
    off -= L * std::round(off / L);
  }
  return plateau_bump(off / (2.0 * e.rho));
}

// ---------------------------------------------------------------------------
// StackEvaluator

StackEvaluator::StackEvaluator(std::shared_ptr<const LyapunovEvaluator> base,
                               double scale, VectorField chart_field,
                               std::vector<BoxModification> mods, FlowMapConfig flow)
    : base_(std::move(base)),
      scale_(scale),
      field_(std::move(chart_field)),
      mods_(std::move(mods)),
      flow_(flow) {
  if (!base_) throw std::invalid_argument("stack evaluator needs a base function");
  inv_.flow = flow_;
}

steps::VD StackEvaluator::eval_stage(int k, const Vec& p) const {
  if (k <= 0) {
    steps::VD out;
    out.v = scale_ * base_->value(p);
    if (base_->has_gradient())
      out.d = scale_ * base_->gradient(p).dot(field_.eval(p));
    else
      out.d = scale_ * clf::orbital_derivative(*base_, field_, p, 1e-4, flow_);
    return out;
  }
  const BoxModification& bm = mods_.at(std::size_t(k) - 1);
  const auto cc = box_chart_inverse(bm.box, *base_, field_, p, inv_);
  if (!cc) return eval_stage(k - 1, p);
  // the formula degenerates to the identity beyond the tube ends (t <= -7/4
  // backward, t >= k+1-eps forward), so cutting at the used range is exact
  if (cc->t <= bm.box.t_used_lo() || cc->t >= bm.box.t_used_hi())
    return eval_stage(k - 1, p);
  if (bm.nu2.at(std::size_t(cc->comp)).value(cc->q) == 0.0)
    return eval_stage(k - 1, p);
  const steps::VD tau = eval_stage(k - 1, p);
  return run_steps(k, *cc, tau, nullptr);
}

StackEvaluator::FiberData& StackEvaluator::fiber(int k, int comp, double q) const {
  const auto key = std::make_tuple(k, comp, dbits(q));
  auto it = fibers_.find(key);
  if (it != fibers_.end()) return *it->second;
  const BoxModification& bm = mods_.at(std::size_t(k) - 1);
  auto fd = std::make_unique<FiberData>();
  fd->z = bm.box.comps.at(std::size_t(comp)).sec.line.point_at(q);
  if (!snap_to_level(*base_, bm.box.level_r, fd->z))
    throw std::runtime_error("stack fiber failed to reach the section level");
  fd->back = flow_path_fixed(field_, fd->z, kFiberLo, kFiberStep, flow_);
  FiberData& ref = *fd;
  fibers_.emplace(key, std::move(fd));
  return ref;
}

steps::VD StackEvaluator::run_steps(int k, const ChartCoord& cc, const steps::VD& tau,
                                    StepTrace* trace) const {
  const BoxModification& bm = mods_.at(std::size_t(k) - 1);
  FiberData& fd = fiber(k, cc.comp, cc.q);
  if (!fd.tau_m1) fd.tau_m1 = eval_stage(k - 1, fd.back.at(-1.0)).v;

  steps::FiberSpec fs;
  fs.tau_m1 = *fd.tau_m1;
  fs.mu_minus = bm.mu_minus;
  fs.mu_plus = bm.mu_plus;
  fs.nu1 = bm.nu1.at(std::size_t(cc.comp)).value(cc.q);
  fs.nu2 = bm.nu2.at(std::size_t(cc.comp)).value(cc.q);
  if (trace)
    trace->phi.assign(bm.cover.size(), std::numeric_limits<double>::quiet_NaN());
  if (fs.nu1 > 0.0 && !bm.cover.empty()) {
    fs.lambda.assign(bm.cover.size(), 0.0);
    fs.phi.assign(bm.cover.size(), 0.0);
    fs.c.assign(bm.cover.size(), 0.0);
    double wsum = 0.0;
    for (std::size_t j = 0; j < bm.cover.size(); ++j) {
      if (bm.cover[j].comp != cc.comp) continue;
      const double w = bm.lambda_weight(int(j), cc.q);
      if (w <= 0.0) continue;
      auto pit = fd.phi.find(int(j));
      if (pit == fd.phi.end()) {
        const double ph = level_time(
            [&](double u) { return eval_stage(k - 1, fd.back.at(u)).v; },
            bm.cover[j].c_level, kFiberLo, -1.0);
        pit = fd.phi.emplace(int(j), ph).first;
      }
      fs.lambda[j] = w;
      fs.phi[j] = pit->second;
      fs.c[j] = bm.cover[j].c_level;
      wsum += w;
      if (trace) trace->phi[j] = pit->second;
    }
    // a hairline landing outside every partition plateau support
    if (wsum <= 0.0) fs.nu1 = 0.0;
  }
  const StepsOut o = run_formulas(fs, cc.t, tau);
  if (trace) {
    trace->tau = tau;
    trace->tau_m1 = fs.tau_m1;
    trace->t1 = o.t1;
    trace->t2 = o.t2;
    trace->t3 = o.t3;
    trace->t4 = o.t4;
    trace->nu1 = fs.nu1;
    trace->nu2 = fs.nu2;
  }
  return o.t4;
}

StackEvaluator::StepTrace StackEvaluator::trace_in_box(int k, double t, int comp,
                                                       double q) const {
  StepTrace tr;
  const Vec p = chart_point(k, t, comp, q);
  const steps::VD tau = eval_stage(k - 1, p);
  ChartCoord cc;
  cc.t = t;
  cc.comp = comp;
  cc.q = q;
  cc.proj_dist = 0.0;
  run_steps(k, cc, tau, &tr);
  return tr;
}

Vec StackEvaluator::chart_point(int k, double t, int comp, double q) const {
  const BoxModification& bm = mods_.at(std::size_t(k) - 1);
  return box_chart(bm.box, *base_, field_, t, comp, q, flow_);
}

bool StackEvaluator::in_accumulated_inner(int k, const Vec& p, double pad_t,
                                          double pad_q) const {
  for (int i = 1; i < k && i <= stages(); ++i) {
    const BoxModification& bm = mods_.at(std::size_t(i) - 1);
    const auto cc = box_chart_inverse(bm.box, *base_, field_, p, inv_);
    if (!cc) continue;
    if (std::abs(cc->t) > 1.0 + pad_t) continue;
    if (bm.box.comps.at(std::size_t(cc->comp)).in_inner(cc->q, pad_q)) return true;
  }
  return false;
}

// ---------------------------------------------------------------------------
// cover choice

namespace {

struct RawComp {
  SectionComponent sec;
  std::vector<double> qs;        // parameters of the samples assigned here
  std::vector<std::size_t> ids;  // indices into the K sample list
};

struct RawLevel {
  double r = 0.0;
  std::vector<BoxComponent> comps;
  std::size_t retained = 0;
};

}  // namespace

CoverPlan choose_cover(const VectorField& field, const LyapunovEvaluator& base,
                       const Region& K, const CellGrid& grid, const RecurrentSet& rec,
                       bool have_rec, const ConstructOptions& opt,
                       std::vector<std::string>* log) {
  CoverPlan plan;
  if (K.is_empty()) return plan;

  std::vector<Vec> pts = K.sample_grid(opt.cover_grid);
  {
    auto extra = K.sample_halton(opt.cover_extra, opt.seed);
    pts.insert(pts.end(), extra.begin(), extra.end());
  }
  if (pts.empty()) return plan;
  std::vector<char> covered(pts.size(), 0);

  const bool keep_out = have_rec && !rec.empty();
  const double keep_margin = keep_out ? opt.keep_out_cells * grid.max_step() : 0.0;

  auto next_seed = [&]() -> int {
    int best = -1;
    double bv = -kInf;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (covered[i]) continue;
      const double v = base.value(pts[i]);
      if (v > bv) {
        bv = v;
        best = int(i);
      }
    }
    return best;
  };

  std::vector<RawLevel> out_levels;
  while (true) {
    const int idx = next_seed();
    if (idx < 0) break;
    Vec seed = pts[std::size_t(idx)];
    double r = base.value(seed);
    // seat the section a little below the highest uncovered sample, so the
    // backward stretch of the tube starts deeper inside the domain
    if (opt.seed_sink > 0.0) {
      try {
        const Vec sunk = flow_map(field, seed, opt.seed_sink, opt.flow);
        const double rs = base.value(sunk);
        if (rs < r) {
          seed = sunk;
          r = rs;
        }
      } catch (const FlowDomainExit&) {
        // keep the original seed; progress is still guaranteed
      }
    }
    if (!out_levels.empty() && r > out_levels.back().r - 1e-6)
      throw ConstructionError(
          "cover", "points left uncoverable at level " + num(r) +
                       " (lateral window was clipped by the domain or keep-out)");
    if (int(out_levels.size()) >= opt.max_levels)
      throw ConstructionError("cover", "level budget exhausted before covering the target set");

    std::vector<RawComp> comps;
    while (true) {
      SectionFromLevelOptions so;
      so.trace.chord_tol = opt.trace_chord_tol;
      so.trace.max_step = opt.trace_max_step;
      so.trace.max_extent = 200.0;
      so.trace.domain = field.domain;
      so.trace.domain_margin = opt.domain_margin;
      if (keep_out) {
        so.trace.keep_out_dist = [&grid, &rec](const Vec& x) {
          return dist_to_recurrent(grid, rec, x);
        };
        so.trace.keep_out_margin = keep_margin;
      }
      so.extent = 1e3;  // keep the whole traced line; windows are cut later
      so.best_effort = true;
      so.flow = opt.flow;
      RawComp rc;
      try {
        rc.sec = section_from_level(base, field, r, seed, so);
      } catch (const std::exception& e) {
        throw ConstructionError("cover", e.what());
      }
      // overlapping traces of one connected curve would alias the chart
      for (const RawComp& prev : comps) {
        double dmin = kInf;
        const int probes = 32;
        for (int i = 0; i <= probes; ++i) {
          const double q = rc.sec.line.length() * double(i) / double(probes);
          dmin = std::min(dmin, prev.sec.line.project(rc.sec.line.point_at(q)).dist);
        }
        if (dmin < opt.trace_max_step)
          throw ConstructionError("cover",
                                  "same-level section traces overlap at level " + num(r));
      }
      comps.push_back(std::move(rc));

      // assign uncovered samples: slide along the flow to the level, then
      // project onto one of the traced lines
      for (std::size_t i = 0; i < pts.size(); ++i) {
        if (covered[i]) continue;
        const Vec& s = pts[i];
        const double v0 = base.value(s);
        Vec z = s;
        bool found = false;
        if (std::abs(v0 - r) <= 1e-12) {
          found = true;
        } else {
          const double dir = (v0 > r) ? 1.0 : -1.0;
          try {
            flow_steps(field, s, dir * opt.cover_time, opt.flow,
                       [&](const FlowStep& st) {
                         const double a = base.value(st.y0) - r;
                         const double b = base.value(st.y1) - r;
                         if (a * b <= 0.0) {
                           const double u = brent(
                               [&](double uu) {
                                 return base.value(st.hermite(uu)) - r;
                               },
                               st.t0, st.t1);
                           z = st.hermite(u);
                           found = true;
                           return false;
                         }
                         return true;
                       });
          } catch (const FlowDomainExit&) {
            continue;
          }
        }
        if (!found) continue;
        int best = -1;
        double bq = 0.0, bd = kInf;
        for (std::size_t c = 0; c < comps.size(); ++c) {
          const auto pr = comps[c].sec.line.project(z);
          if (pr.dist < bd) {
            bd = pr.dist;
            best = int(c);
            bq = pr.s;
          }
        }
        if (best < 0 || bd > 1e-3) continue;
        comps[std::size_t(best)].qs.push_back(bq);
        comps[std::size_t(best)].ids.push_back(i);
        covered[i] = 1;
      }

      const int nxt = next_seed();
      if (nxt < 0) break;
      if (base.value(pts[std::size_t(nxt)]) < r - 1e-6) break;
      if (int(comps.size()) >= opt.max_comps_per_level)
        throw ConstructionError("cover", "component budget exhausted at level " + num(r));
      seed = pts[std::size_t(nxt)];
    }

    // cut the lateral windows; release samples that fall outside them
    RawLevel lev;
    lev.r = r;
    for (RawComp& rc : comps) {
      if (rc.qs.empty()) continue;
      BoxComponent bc;
      bc.sec = std::move(rc.sec);
      const double L = bc.sec.line.length();
      if (bc.sec.line.closed) {
        bc.sec.v_lo = 0.0;
        bc.sec.v_hi = L;
        bc.v_in_lo = 0.0;
        bc.v_in_hi = L;
        lev.retained += rc.qs.size();
      } else {
        const auto [qmin_it, qmax_it] = std::minmax_element(rc.qs.begin(), rc.qs.end());
        double vlo = *qmin_it - opt.v_pad, vhi = *qmax_it + opt.v_pad;
        double wlo = vlo - opt.w_margin, whi = vhi + opt.w_margin;
        wlo = std::max(wlo, opt.trace_spare);
        whi = std::min(whi, L - opt.trace_spare);
        vlo = std::max(vlo, wlo + 0.25 * opt.w_margin);
        vhi = std::min(vhi, whi - 0.25 * opt.w_margin);
        if (!(vlo < vhi)) {
          for (std::size_t id : rc.ids) covered[id] = 0;
          continue;
        }
        for (std::size_t j = 0; j < rc.qs.size(); ++j) {
          if (rc.qs[j] < vlo || rc.qs[j] > vhi)
            covered[rc.ids[j]] = 0;
          else
            ++lev.retained;
        }
        bc.sec.v_lo = wlo;
        bc.sec.v_hi = whi;
        bc.v_in_lo = vlo;
        bc.v_in_hi = vhi;
      }
      lev.comps.push_back(std::move(bc));
    }
    if (lev.comps.empty() || lev.retained == 0)
      throw ConstructionError("cover", "no progress covering the target set at level " + num(r));
    log_line(log, "cover: level " + num(r) + " with " +
                      std::to_string(lev.comps.size()) + " component(s), " +
                      std::to_string(lev.retained) + " samples");
    out_levels.push_back(std::move(lev));
  }

  for (std::size_t i = 0; i < out_levels.size(); ++i) {
    FlowBoxBuildOptions fo;
    fo.flow = opt.flow;
    plan.boxes.push_back(build_flow_box(std::move(out_levels[i].comps),
                                        out_levels[i].r, int(i) + 1, field, base, fo));
  }
  for (std::size_t i = 1; i < plan.boxes.size(); ++i)
    if (!(plan.boxes[i].level_r < plan.boxes[i - 1].level_r - 1e-9))
      throw ConstructionError("cover", "levels are not strictly decreasing");
  return plan;
}

// ---------------------------------------------------------------------------
// scale constant

double scale_constant(const VectorField& field, const LyapunovEvaluator& base,
                      const std::vector<FlowBox>& boxes, const ConstructOptions& opt,
                      std::vector<std::string>* log) {
  if (boxes.empty()) return 1.0;
  double m = kInf;
  for (const FlowBox& box : boxes) {
    for (const BoxComponent& bc : box.comps) {
      for (int iq = 0; iq <= opt.scale_q_samples; ++iq) {
        Vec z = bc.sec.line.point_at(wparam(bc, iq, opt.scale_q_samples));
        if (!snap_to_level(base, box.level_r, z))
          throw ConstructionError("scale", "tube fiber failed to reach the section level");
        for (double dir : {1.0, -1.0}) {
          const double t_max = (dir > 0.0) ? box.t_used_hi() : box.t_back;
          FlowPath path;
          try {
            path = flow_path(field, z, dir * t_max, opt.flow);
          } catch (const FlowDomainExit&) {
            throw ConstructionError("scale", "a flow-box tube leaves the domain");
          }
          for (int it = 0; it <= opt.scale_t_samples; ++it) {
            const Vec p = path.at(dir * t_max * double(it) / double(opt.scale_t_samples));
            const double od = base.has_gradient()
                                  ? base.gradient(p).dot(field.eval(p))
                                  : orbital_derivative(base, field, p, 1e-4, opt.flow);
            if (od >= -1e-12)
              throw ConstructionError("scale", "base function is not decreasing on a tube");
            m = std::min(m, -od);
          }
        }
      }
    }
  }
  const double N = double(boxes.size());
  const double C = opt.scale_margin * (N + 3.0) / m;
  log_line(log, "scale: min tube decrease " + num(m) + ", N = " +
                    std::to_string(boxes.size()) + ", C = " + num(C));
  log_line(log, std::string("scaled decrease check: C*m = ") + num(C * m) +
                    (C * m > N + 3.0 ? " > " : " <= ") + num(N + 3.0) + " = N+3" +
                    (C * m > N + 3.0 ? " (ok)" : " (violated)"));
  return C;
}

// ---------------------------------------------------------------------------
// per-box assembly

BoxModification modify_box(const std::shared_ptr<const LyapunovEvaluator>& base,
                           double C, const VectorField& field,
                           const std::vector<BoxModification>& prev, FlowBox box,
                           const ConstructOptions& opt, std::vector<std::string>* log) {
  const int k = box.k_index;
  const double t_hi = double(k) + 1.0;
  BoxModification bm;
  bm.box = std::move(box);
  bm.mu_minus = SmoothStep(-1.5, -1.25);

  StackEvaluator incoming(base, C, field, prev, opt.flow);
  const std::size_t ncomp = bm.box.comps.size();
  bm.nu1.assign(ncomp, CutoffProfile{});
  bm.nu2.assign(ncomp, CutoffProfile{});

  // outgoing tube [k, k+1] x closure(W): the incoming function must drop
  // faster than -(k+3) there and must still be the plain scaled base
  // (earlier boxes must not reach this far down)
  {
    double worst_od = -kInf, worst_co = 0.0;
    for (std::size_t ci = 0; ci < ncomp; ++ci) {
      const BoxComponent& bc = bm.box.comps[ci];
      for (int iq = 0; iq <= opt.e1_q_samples; ++iq) {
        Vec z = bc.sec.line.point_at(wparam(bc, iq, opt.e1_q_samples));
        if (!snap_to_level(*base, bm.box.level_r, z))
          throw ConstructionError("E1", "fiber failed to reach the section level");
        FlowPath path;
        try {
          path = flow_path(field, z, t_hi, opt.flow);
        } catch (const FlowDomainExit&) {
          throw ConstructionError("E1", "outgoing tube leaves the domain");
        }
        for (int it = 0; it <= opt.e1_t_samples; ++it) {
          const double t = double(k) + double(it) / double(opt.e1_t_samples);
          const Vec p = path.at(t);
          const steps::VD s = incoming.eval(p);
          worst_od = std::max(worst_od, s.d);
          if (s.d >= -(double(k) + 3.0) + opt.e1_margin)
            throw ConstructionError("E1", "decrease bound fails on the outgoing tube (k = " +
                                              std::to_string(k) + ", od = " + num(s.d) + ")");
          if (!prev.empty()) {
            const double co = std::abs(s.v - C * base->value(p));
            worst_co = std::max(worst_co, co);
            if (co > opt.coincide_tol)
              throw ConstructionError(
                  "disjointness", "an earlier modification reaches the outgoing tube of box " +
                                      std::to_string(k));
          }
        }
      }
    }
    log_line(log, "box " + std::to_string(k) + ": outgoing decrease <= " + num(worst_od) +
                      " (bound " + num(-(double(k) + 3.0)) + "), coincidence " + num(worst_co));
  }

  // where earlier covered tubes cross this box's fibers in the detection
  // window [-7/4, -5/4]: force nu1 = 1 there and lay out the level cover
  if (!prev.empty()) {
    for (std::size_t ci = 0; ci < ncomp; ++ci) {
      const BoxComponent& bc = bm.box.comps[ci];
      const Polyline& line = bc.sec.line;
      const bool loop = bc.sec.full_loop();
      const double L = line.length();
      const double wlo = bc.sec.v_lo, whi = bc.sec.v_hi;
      const int nq = std::max(4, opt.mask_q_samples);
      const std::size_t un = std::size_t(nq);
      const double dq = (whi - wlo) / double(loop ? nq : nq - 1);

      std::vector<double> qs(un);
      std::vector<FlowPath> paths(un);
      std::vector<char> hit(un, 0);
      std::vector<double> hit_mid(un, 0.0);
      for (int i = 0; i < nq; ++i) {
        qs[std::size_t(i)] = wlo + dq * double(i);
        Vec z = line.point_at(qs[std::size_t(i)]);
        if (!snap_to_level(*base, bm.box.level_r, z))
          throw ConstructionError("mask", "fiber failed to reach the section level");
        try {
          paths[std::size_t(i)] = flow_path(field, z, kFiberLo, opt.flow);
        } catch (const FlowDomainExit&) {
          throw ConstructionError("mask", "backward fiber leaves the domain");
        }
        double first = 0.0, last = 0.0;
        bool any = false;
        for (int jt = 0; jt < opt.mask_t_samples; ++jt) {
          const double t =
              -1.75 + 0.5 * double(jt) / double(std::max(1, opt.mask_t_samples - 1));
          const Vec p = paths[std::size_t(i)].at(t);
          if (incoming.in_accumulated_inner(incoming.stages() + 1, p, opt.mask_pad_t,
                                            opt.mask_pad_q)) {
            if (!any) first = t;
            last = t;
            any = true;
          }
        }
        hit[std::size_t(i)] = any ? 1 : 0;
        hit_mid[std::size_t(i)] = 0.5 * (first + last);
      }

      const bool all_hit =
          std::all_of(hit.begin(), hit.end(), [](char h) { return h != 0; });
      const bool none_hit =
          std::none_of(hit.begin(), hit.end(), [](char h) { return h != 0; });
      if (none_hit) continue;

      auto nearest_hit = [&](double c) {
        int best = -1;
        double bd = kInf;
        for (int i = 0; i < nq; ++i) {
          if (!hit[std::size_t(i)]) continue;
          double d = std::abs(qs[std::size_t(i)] - c);
          if (loop) {
            d = std::fmod(d, L);
            d = std::min(d, L - d);
          }
          if (d < bd) {
            bd = d;
            best = i;
          }
        }
        return best;
      };

      // validate one candidate partition member against every fiber in its
      // support: the witness level must stay bracketed inside [-7/4, -1] and
      // the incoming slope must be -1 around the crossing
      auto entry_ok = [&](const CoverEntry& e) {
        const int ns = std::max(3, opt.shrink_q_samples);
        for (int is = 0; is < ns; ++is) {
          double qq = e.q_center + 2.0 * e.rho * (2.0 * double(is) / double(ns - 1) - 1.0);
          if (!loop) qq = std::clamp(qq, wlo, whi);
          Vec z = line.point_at(qq);
          if (!snap_to_level(*base, bm.box.level_r, z)) return false;
          FlowPath bp;
          try {
            bp = flow_path(field, z, kFiberLo, opt.flow);
          } catch (const FlowDomainExit&) {
            return false;
          }
          auto F = [&](double u) { return incoming.value(bp.at(u)); };
          const double f_lo = F(-1.0), f_hi = F(kFiberLo);
          const double delta = opt.bracket_margin_frac * (f_hi - f_lo);
          if (!(f_hi > f_lo)) return false;
          if (e.c_level < f_lo + delta || e.c_level > f_hi - delta) return false;
          double ph;
          try {
            ph = level_time(F, e.c_level, kFiberLo, -1.0);
          } catch (const std::exception&) {
            return false;
          }
          for (double off : {-opt.slope_probe, -0.5 * opt.slope_probe, 0.0,
                             0.5 * opt.slope_probe, opt.slope_probe}) {
            const double u = std::clamp(ph + off, kFiberLo, 0.0);
            const double od = incoming.eval(bp.at(u)).d;
            if (std::abs(od + 1.0) > opt.od_tol) return false;
          }
        }
        return true;
      };

      auto add_cover_span = [&](double lo, double hi, bool ring) {
        double rho = opt.cover_rho;
        if (ring) rho = std::min(rho, L / 6.0);
        for (int round = 0;; ++round) {
          std::vector<double> centers;
          if (ring) {
            const int cnt = std::max(3, int(std::ceil(L / rho)));
            for (int i = 0; i < cnt; ++i) centers.push_back(L * double(i) / double(cnt));
          } else if (hi - lo <= 0.0) {
            centers.push_back(0.5 * (lo + hi));
          } else {
            const int cnt = std::max(2, int(std::ceil((hi - lo) / rho)) + 1);
            for (int i = 0; i < cnt; ++i)
              centers.push_back(lo + (hi - lo) * double(i) / double(cnt - 1));
          }
          std::vector<CoverEntry> batch;
          bool ok = true;
          for (double c : centers) {
            const int wi = nearest_hit(c);
            if (wi < 0) {
              ok = false;
              break;
            }
            CoverEntry e;
            e.comp = int(ci);
            e.q_center = c;
            e.rho = rho;
            e.t_witness = hit_mid[std::size_t(wi)];
            e.c_level = incoming.value(paths[std::size_t(wi)].at(e.t_witness));
            if (!entry_ok(e)) {
              ok = false;
              break;
            }
            batch.push_back(e);
          }
          if (ok) {
            bm.cover.insert(bm.cover.end(), batch.begin(), batch.end());
            log_line(log, "box " + std::to_string(k) + ": " +
                              std::to_string(batch.size()) + " cover entries on component " +
                              std::to_string(ci) + ", radius " + num(rho));
            return;
          }
          rho *= 0.5;
          if (round >= opt.shrink_rounds)
            throw ConstructionError("cover-shrink",
                                    "no admissible partition radius on box " +
                                        std::to_string(k));
        }
      };

      if (loop && all_hit) {
        bm.nu1[ci] = CutoffProfile::one();
        add_cover_span(0.0, L, true);
        continue;
      }

      // maximal runs of consecutive hit samples (with wrap on loops)
      struct Run {
        int a = 0, b = 0;  // inclusive sample index range (b may wrap below a)
      };
      std::vector<Run> runs;
      {
        int i = 0;
        while (i < nq) {
          if (!hit[std::size_t(i)]) {
            ++i;
            continue;
          }
          int j = i;
          while (j + 1 < nq && hit[std::size_t(j + 1)]) ++j;
          runs.push_back({i, j});
          i = j + 1;
        }
        if (loop && runs.size() >= 2 && runs.front().a == 0 && runs.back().b == nq - 1) {
          runs.front().a = runs.back().a - nq;  // negative index = wrapped copy
          runs.pop_back();
        }
      }

      CutoffProfile prof;
      prof.circular = loop;
      prof.period = L;
      for (const Run& run : runs) {
        const double qa = wlo + dq * double(run.a);  // may be negative on loops
        const double qb = wlo + dq * double(run.b);
        const double margin = 2.0 * dq;
        prof.windows.push_back(
            {qa - margin, qb + margin, opt.nu1_ramp_scale * margin});
        double lo = qa - 2.0 * margin, hi = qb + 2.0 * margin;
        if (!loop) {
          lo = std::max(lo, wlo);
          hi = std::min(hi, whi);
        }
        add_cover_span(lo, hi, false);
      }
      bm.nu1[ci] = std::move(prof);
    }
  }

  // handover width: tau2 must stay above tau on [k+1-2eps, k+1] x closure(W)
  {
    double eps = 0.49;
    bool ok = false;
    while (eps > 1e-3) {
      bm.eps = eps;
      bm.mu_plus = SmoothStep(t_hi - 2.0 * eps, t_hi - eps);
      std::vector<CutoffProfile> saved = bm.nu2;
      for (auto& c : bm.nu2) c = CutoffProfile::one();
      std::vector<BoxModification> trial = prev;
      trial.push_back(bm);
      StackEvaluator probe(base, C, field, std::move(trial), opt.flow);
      const int ks = probe.stages();
      double gap = kInf;
      for (std::size_t ci = 0; ci < ncomp && gap > opt.eps_gap; ++ci) {
        const BoxComponent& bc = bm.box.comps[ci];
        for (int iq = 0; iq < opt.eps_q_samples && gap > opt.eps_gap; ++iq) {
          const double q = wparam(bc, iq, std::max(1, opt.eps_q_samples - 1));
          for (int it = 0; it < opt.eps_t_samples; ++it) {
            const double t =
                t_hi - 2.0 * eps * (1.0 - double(it) / double(std::max(1, opt.eps_t_samples - 1)));
            const auto tr = probe.trace_in_box(ks, t, int(ci), q);
            gap = std::min(gap, tr.t2.v - tr.tau.v);
            if (gap <= opt.eps_gap) break;
          }
        }
      }
      bm.nu2 = saved;
      if (gap > opt.eps_gap) {
        ok = true;
        log_line(log, "box " + std::to_string(k) + ": handover eps = " + num(eps) +
                          ", margin " + num(gap));
        break;
      }
      eps *= 0.5;
    }
    if (!ok)
      throw ConstructionError("eps", "no admissible handover width on box " +
                                         std::to_string(k));
  }

  // lateral cutoff: 1 beyond the inner window, supported inside the outer one
  for (std::size_t ci = 0; ci < ncomp; ++ci) {
    const BoxComponent& bc = bm.box.comps[ci];
    if (bc.sec.full_loop()) {
      bm.nu2[ci] = CutoffProfile::one();
      continue;
    }
    double over = opt.nu2_over, ramp = opt.nu2_ramp;
    const double room =
        std::min(bc.v_in_lo - bc.sec.v_lo, bc.sec.v_hi - bc.v_in_hi);
    if (over + ramp > 0.9 * room) {
      const double sfac = 0.9 * room / (over + ramp);
      over *= sfac;
      ramp *= sfac;
    }
    if (!(ramp > 0.0))
      throw ConstructionError("nu2", "no room for the lateral cutoff on box " +
                                         std::to_string(k));
    CutoffProfile prof;
    prof.windows.push_back({bc.v_in_lo - over, bc.v_in_hi + over, ramp});
    bm.nu2[ci] = std::move(prof);
  }

  // audit: the assembled box must give unit decrease on its inner tube
  {
    std::vector<BoxModification> trial = prev;
    trial.push_back(bm);
    StackEvaluator full(base, C, field, std::move(trial), opt.flow);
    const int ks = full.stages();
    double worst = 0.0;
    for (std::size_t ci = 0; ci < ncomp; ++ci) {
      const BoxComponent& bc = bm.box.comps[ci];
      for (int iq = 0; iq <= 16; ++iq) {
        const double q =
            bc.v_in_lo + (bc.v_in_hi - bc.v_in_lo) * double(iq) / 16.0;
        for (int it = 0; it <= 8; ++it) {
          const double t = -1.0 + 2.0 * double(it) / 8.0;
          const Vec p = full.chart_point(ks, t, int(ci), q);
          worst = std::max(worst, std::abs(full.orbital_derivative(p) + 1.0));
        }
      }
    }
    if (worst > 1e-9)
      throw ConstructionError("prescription", "unit decrease fails on the inner tube of box " +
                                                  std::to_string(k) + " (dev " + num(worst) + ")");
    log_line(log, "box " + std::to_string(k) + ": inner tube |od + 1| <= " + num(worst));
  }
  return bm;
}

// ---------------------------------------------------------------------------
// full pipeline

double PrescribedResult::od_original(const Vec& p) const {
  if (!stack) throw std::runtime_error("no constructed function");
  return stack->orbital_derivative(p) * (-ghat(p)) / f(p);
}

PrescribedResult construct_prescribed(const ConstructInputs& in,
                                      const ConstructOptions& opt) {
  PrescribedResult out;
  if (!in.base) throw ConstructionError("admission", "no base Lyapunov function supplied");
  if (in.X.n != 2)
    throw ConstructionError("admission", "construction currently supports planar systems only");
  if (!in.g.eval) throw ConstructionError("admission", "no prescribed target supplied");
  out.X_raw = in.X;
  out.base = in.base;

  std::vector<Vec> ks;
  if (!in.K.is_empty()) {
    ks = in.K.sample_grid(opt.cover_grid);
    auto extra = in.K.sample_halton(opt.cover_extra, opt.seed + 1);
    ks.insert(ks.end(), extra.begin(), extra.end());
  }
  for (const Vec& p : ks) {
    if (in.X.eval(p).norm() < 1e-10)
      throw ConstructionError("admission", "equilibrium inside the target set");
    if (in.g(p) >= 0.0)
      throw ConstructionError("admission", "target derivative is not negative on the target set");
    if (in.have_rec && !in.rec.empty() &&
        dist_to_recurrent(in.grid, in.rec, p) < opt.keep_out_cells * in.grid.max_step())
      throw ConstructionError("admission",
                              "target set too close to the approximated recurrent cells");
  }

  // make the flow complete, then fold the target into the chart field
  RescaledField rf = rescale_complete(in.X);
  out.X_hat = rf.field;
  out.f = rf.f;
  ScalarField fg;
  {
    auto fac = rf.f;
    auto g = in.g.eval;
    fg.eval = [fac, g](const Vec& p) { return fac(p) * g(p); };
  }
  ReduceOptions ro;
  ro.seed = opt.seed;
  UnitReduction ur;
  try {
    ur = reduce_to_unit(rf.field, fg, in.K, ro);
  } catch (const std::exception& e) {
    throw ConstructionError("admission", e.what());
  }
  out.X_g = ur.field;
  out.ghat = ur.ghat;
  out.uk_margin = ur.uk_margin;
  out.collar = ur.collar;
  out.reduce_seed = ro.seed;
  log_line(&out.log, "reduction: margin " + num(ur.uk_margin) + ", collar " + num(ur.collar));

  for (const Vec& p : ks) {
    const double od = in.base->has_gradient()
                          ? in.base->gradient(p).dot(out.X_g.eval(p))
                          : orbital_derivative(*in.base, out.X_g, p, 1e-4, opt.flow);
    if (od >= -1e-10)
      throw ConstructionError("admission", "base function does not decrease on the target set");
  }

  if (in.K.is_empty()) {
    out.C = 1.0;
    out.N = 0;
    out.stack = std::make_shared<StackEvaluator>(in.base, 1.0, out.X_g,
                                                 std::vector<BoxModification>{}, opt.flow);
    log_line(&out.log, "empty target set: the function is the base itself");
    return out;
  }

  CoverPlan plan = choose_cover(out.X_g, *in.base, in.K, in.grid, in.rec, in.have_rec,
                                opt, &out.log);
  if (plan.boxes.empty())
    throw ConstructionError("cover", "no flow boxes produced for a nonempty target set");
  out.N = int(plan.boxes.size());
  out.C = scale_constant(out.X_g, *in.base, plan.boxes, opt, &out.log);

  if (in.have_rec && !in.rec.empty()) {
    const double need = opt.tube_keep_out_cells * in.grid.max_step();
    for (const FlowBox& box : plan.boxes) {
      for (const BoxComponent& bc : box.comps) {
        for (int iq = 0; iq <= 16; ++iq) {
          Vec z = bc.sec.line.point_at(wparam(bc, iq, 16));
          snap_to_level(*in.base, box.level_r, z);
          for (double dir : {1.0, -1.0}) {
            const double t_max = (dir > 0.0) ? box.t_used_hi() : box.t_back;
            const FlowPath path = flow_path(out.X_g, z, dir * t_max, opt.flow, true);
            for (int it = 0; it <= 16; ++it) {
              const Vec p = path.at(path.t_end * double(it) / 16.0);
              if (dist_to_recurrent(in.grid, in.rec, p) < need)
                throw ConstructionError("admission",
                                        "a flow-box tube touches the recurrent cells");
            }
          }
        }
      }
    }
  }

  std::vector<BoxModification> mods;
  for (FlowBox& box : plan.boxes) {
    box.s_level = out.C * box.level_r;
    mods.push_back(modify_box(in.base, out.C, out.X_g, mods, std::move(box), opt,
                              &out.log));
  }
  out.stack = std::make_shared<StackEvaluator>(in.base, out.C, out.X_g, std::move(mods),
                                               opt.flow);

  double worst = 0.0;
  for (const Vec& p : ks)
    worst = std::max(worst, std::abs(out.stack->orbital_derivative(p) + 1.0));
  log_line(&out.log, "audit: max |od + 1| = " + num(worst) + " over " +
                         std::to_string(ks.size()) + " target samples");
  if (worst > 1e-6)
    throw ConstructionError("prescription", "unit decrease fails on the target set");
  return out;
}

}  // namespace clf
