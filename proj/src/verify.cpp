#include "clf/verify.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <iomanip>
#include <limits>
#include <optional>
#include <sstream>

#include "clf/flowbox.hpp"

namespace clf {

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

// worst-so-far tracker that treats NaN as an immediate failure
struct Worst {
  double v = -std::numeric_limits<double>::infinity();
  int n = 0;
  void add(double x) {
    ++n;
    if (std::isnan(x))
      v = std::numeric_limits<double>::infinity();
    else
      v = std::max(v, x);
  }
  double value() const { return n == 0 ? kNan : v; }
};

CheckResult make_check(std::string name, const Worst& w, double tol,
                       std::string note = std::string()) {
  CheckResult c;
  c.name = std::move(name);
  c.samples = w.n;
  c.worst = w.value();
  c.tol = tol;
  c.pass = w.n > 0 && c.worst <= tol;  // NaN fails the comparison
  c.note = std::move(note);
  return c;
}

CheckResult vacuous(std::string name, double tol, std::string note) {
  CheckResult c;
  c.name = std::move(name);
  c.samples = 0;
  c.worst = 0.0;
  c.tol = tol;
  c.pass = true;
  c.note = std::move(note);
  return c;
}

std::string fmt(double x) {
  std::ostringstream os;
  os << std::setprecision(17) << std::defaultfloat << x;
  return os.str();
}

// is p influenced by some flow-box modification (conservatively padded)
bool in_any_tube(const StackEvaluator& S, const Vec& p, const ChartInverseOptions& io,
                 double pad_t, double pad_q) {
  for (const BoxModification& m : S.mods()) {
    const auto cc = box_chart_inverse(m.box, S.base(), S.chart_field(), p, io);
    if (!cc) continue;
    if (cc->t < m.box.t_used_lo() - pad_t || cc->t > m.box.t_used_hi() + pad_t)
      continue;
    if (!m.box.comps[std::size_t(cc->comp)].in_outer(cc->q, pad_q)) continue;
    return true;
  }
  return false;
}

// short displacement along the raw flow; a count-based fixed schedule keeps
// the endpoint error smooth in p and far below the step tolerance for the
// sub-0.01 hops used by the difference quotients
Vec fd_hop(const VectorField& X, const Vec& p, double d, const FlowMapConfig& cfg) {
  const long n = std::max<long>(8, long(std::ceil(std::abs(d) / 0.002)));
  return flow_map_fixed(X, p, d, std::abs(d) / double(n), cfg);
}

// central difference quotient of the stack along the raw flow
double central_quotient(const LyapunovEvaluator& tau, const VectorField& X,
                        const Vec& p, double d, const FlowMapConfig& cfg) {
  const Vec fp = fd_hop(X, p, d, cfg);
  const Vec fm = fd_hop(X, p, -d, cfg);
  return (tau.value(fp) - tau.value(fm)) / (2.0 * d);
}

// second difference quotient (detects slope jumps: it blows up like 1/d)
double second_quotient(const LyapunovEvaluator& tau, const VectorField& X,
                       const Vec& p, double d, const FlowMapConfig& cfg) {
  const Vec fp = fd_hop(X, p, d, cfg);
  const Vec fm = fd_hop(X, p, -d, cfg);
  return (tau.value(fp) - 2.0 * tau.value(p) + tau.value(fm)) / (d * d);
}

// parameters inside the outer window, shrunk by `trim` on each side
double window_param(const BoxComponent& bc, double trim, int i, int n) {
  const double lo = bc.sec.v_lo + trim, hi = bc.sec.v_hi - trim;
  if (!(hi > lo)) return 0.5 * (bc.sec.v_lo + bc.sec.v_hi);
  return lo + (hi - lo) * double(i) / double(std::max(1, n - 1));
}

}  // namespace

double fd_orbital_derivative(const LyapunovEvaluator& tau, const VectorField& X,
                             const Vec& p, double delta, const FlowMapConfig& cfg) {
  const double d1 = central_quotient(tau, X, p, delta, cfg);
  const double d2 = central_quotient(tau, X, p, 0.5 * delta, cfg);
  return (4.0 * d2 - d1) / 3.0;
}

std::string VerificationReport::text() const {
  std::ostringstream os;
  os << "verification report (" << checks.size() << " checks)\n";
  if (!base_provenance.empty()) os << "base: " << base_provenance << "\n";
  for (const CheckResult& c : checks) {
    os << "  [" << (c.pass ? "PASS" : "FAIL") << "] " << c.name << "  worst "
       << fmt(c.worst) << "  tol " << fmt(c.tol) << "  (" << c.samples << " samples)";
    if (!c.note.empty()) os << "  -- " << c.note;
    os << "\n";
  }
  os << (pass ? "RESULT pass" : "RESULT fail") << "\n";
  return os.str();
}

std::string VerificationReport::machine() const {
  std::ostringstream os;
  for (const CheckResult& c : checks)
    os << c.name << " " << fmt(c.worst) << " " << fmt(c.tol) << " "
       << (c.pass ? "pass" : "fail") << "\n";
  return os.str();
}

VerificationReport verify_report(const VerifyInputs& in, const VerifyTolerances& tol,
                                 unsigned seed) {
  VerificationReport rep;
  if (in.result == nullptr || !in.result->stack || !in.result->base) {
    CheckResult c;
    c.name = "inputs";
    c.worst = 1.0;
    c.pass = false;
    c.note = "missing construction result";
    rep.checks.push_back(std::move(c));
    rep.pass = false;
    return rep;
  }

  const PrescribedResult& R = *in.result;
  const StackEvaluator& S = *R.stack;
  rep.base_provenance = R.base->provenance();
  const bool fitted_base = rep.base_provenance == "collocation";

  ChartInverseOptions io;
  io.flow = S.flow_config();
  const FlowMapConfig& fc = S.flow_config();

  // ambient sampling region: the cell-grid box, else a padded hull of K
  Region ambient;
  if (in.grid.dim() > 0)
    ambient = Region::make_rect(in.grid.domain);
  else if (!in.K.is_empty())
    ambient = Region::make_rect(in.K.bounding_box(1.0));

  // --- prescription on the target set -------------------------------------
  {
    const double ptol =
        fitted_base ? tol.prescription_colloc : tol.prescription;
    if (in.K.is_empty() || !in.g.eval) {
      rep.checks.push_back(
          vacuous("prescription_on_k", ptol, "empty target set"));
    } else {
      const std::vector<Vec> ks = in.K.sample_halton(tol.samples, seed + 1);
      double gmax = 0.0;
      for (const Vec& p : ks) gmax = std::max(gmax, std::abs(in.g.eval(p)));
      const double bound = fitted_base ? ptol : ptol * std::max(gmax, 1e-300);
      Worst w;
      int skipped = 0;
      for (const Vec& p : ks) {
        try {
          const double fd = fd_orbital_derivative(S, R.X_raw, p, tol.fd_delta, fc);
          w.add(std::abs(fd - in.g.eval(p)));
        } catch (const FlowDomainExit&) {
          ++skipped;
        }
      }
      std::string note = "max |g| = " + fmt(gmax);
      if (fitted_base) note += "; fitted base, absolute bound";
      if (skipped) note += "; " + std::to_string(skipped) + " samples left the domain";
      rep.checks.push_back(make_check("prescription_on_k", w, bound, note));
    }
  }

  // --- locality: untouched away from the tubes ----------------------------
  {
    if (ambient.is_empty()) {
      rep.checks.push_back(vacuous("locality_outside_tubes", tol.locality,
                                   "no ambient region supplied"));
    } else {
      Worst w;
      int kept = 0;
      const std::vector<Vec> ps = ambient.sample_halton(4 * tol.samples, seed + 2);
      for (const Vec& p : ps) {
        if (kept >= tol.samples) break;
        if (in_any_tube(S, p, io, 0.25, 0.25)) continue;
        ++kept;
        w.add(std::abs(S.value(p) - S.scale() * R.base->value(p)));
      }
      rep.checks.push_back(make_check("locality_outside_tubes", w, tol.locality,
                                      std::to_string(kept) + " points off the tubes"));
    }
  }

  // --- strict decrease away from the recurrent cells ----------------------
  {
    if (ambient.is_empty()) {
      rep.checks.push_back(vacuous("negativity_off_recurrent", -tol.negativity,
                                   "no ambient region supplied"));
    } else {
      Worst w;
      const std::vector<Vec> ps = ambient.sample_halton(4 * tol.samples, seed + 3);
      int kept = 0;
      for (const Vec& p : ps) {
        if (kept >= tol.samples) break;
        if (in.have_rec && in_inflated_recurrent(in.grid, in.rec, p, 2.0)) continue;
        Vec xp = R.X_raw.eval(p);
        if (xp.norm() < 1e-8) continue;  // rest point: derivative vanishes there
        ++kept;
        w.add(R.od_original(p));
      }
      std::string note = in.have_rec ? "recurrent cells inflated by 2"
                                     : "no recurrence data; rest points skipped";
      rep.checks.push_back(
          make_check("negativity_off_recurrent", w, -tol.negativity, note));
    }
  }

  // --- per-box formula checks via the step traces --------------------------
  const auto& mods = S.mods();
  Worst w_step1, w_slope, w_endpoint, w_ineq, w_margin, w_bnd;
  for (std::size_t bi = 0; bi < mods.size(); ++bi) {
    const int k = int(bi) + 1;
    const BoxModification& m = mods[bi];
    const double thi = m.box.t_used_hi();
    const double tlo = m.box.t_used_lo();
    // fibers near the lateral window ends can leave the domain early; those
    // samples are skipped rather than failed
    auto probe = [&](double t, int ci, double q) -> std::optional<StackEvaluator::StepTrace> {
      try {
        return S.trace_in_box(k, t, ci, q);
      } catch (const FlowDomainExit&) {
        return std::nullopt;
      }
    };
    for (std::size_t ci = 0; ci < m.box.comps.size(); ++ci) {
      const BoxComponent& bc = m.box.comps[ci];
      const double width = bc.sec.v_hi - bc.sec.v_lo;
      const int nq = 9;
      for (int iq = 0; iq < nq; ++iq) {
        const double q = window_param(bc, 0.05 * width, iq, nq);

        // identity before the backward ramp
        for (double t : {tlo, 0.5 * (tlo - 1.5), -1.5})
          if (const auto tr = probe(t, int(ci), q))
            w_step1.add(std::abs(tr->t1.v - tr->tau.v));

        // unit slope on the straightened span
        for (double t : {-1.25, -0.5, 0.0, 0.5 * thi - 0.5, thi - 1.0})
          if (const auto tr = probe(t, int(ci), q))
            w_slope.add(std::abs(tr->t1.d + 1.0));

        // forward endpoint of the straightened function, against the same
        // reference value the formula itself carries
        if (const auto tr = probe(thi, int(ci), q)) {
          const double tau_m1 = tr->tau_m1;
          w_endpoint.add(std::abs(tr->t1.v - (tau_m1 - thi - 1.5)));

          // the lowered value still dominates the handover bound
          w_ineq.add((tau_m1 - thi - 1.75) - tr->t2.v);

          // identity at the tube ends (the blends must have let go)
          w_bnd.add(std::abs(tr->t4.v - tr->tau.v));
          if (const auto trm = probe(tlo, int(ci), q))
            w_bnd.add(std::abs(trm->t4.v - trm->tau.v));
        }

        // the incoming function stays below the reverted one near the exit
        for (int it = 0; it <= 6; ++it) {
          const double t = thi - 2.0 * m.eps * (1.0 - double(it) / 6.0);
          if (const auto tr = probe(t, int(ci), q))
            w_margin.add(tr->tau.v - tr->t2.v);
        }
      }

      // lateral identity where the final cutoff has released
      if (ci < m.nu2.size() && !m.nu2[ci].all_one && !m.nu2[ci].windows.empty()) {
        const PlateauWindow& pw = m.nu2[ci].windows.front();
        for (double q : {0.5 * (bc.sec.v_lo + (pw.a - pw.ramp)),
                         0.5 * (bc.sec.v_hi + (pw.b + pw.ramp))}) {
          if (q <= bc.sec.v_lo || q >= bc.sec.v_hi) continue;
          for (double t : {-1.3, 0.0, thi - 0.5})
            if (const auto tr = probe(t, int(ci), q))
              w_bnd.add(std::abs(tr->t4.v - tr->tau.v));
        }
      }
    }
  }
  if (mods.empty()) {
    rep.checks.push_back(vacuous("step1_identity", tol.step_identity, "no boxes"));
    rep.checks.push_back(vacuous("step1_slope", tol.slope, "no boxes"));
    rep.checks.push_back(vacuous("step1_endpoint", tol.step_identity, "no boxes"));
    rep.checks.push_back(vacuous("lowering_inequality", tol.step_identity, "no boxes"));
    rep.checks.push_back(vacuous("handover_margin", -1e-9, "no boxes"));
    rep.checks.push_back(vacuous("boundary_coincidence", tol.step_identity, "no boxes"));
  } else {
    rep.checks.push_back(make_check("step1_identity", w_step1, tol.step_identity,
                                    "untouched before the backward ramp"));
    rep.checks.push_back(make_check("step1_slope", w_slope, tol.slope,
                                    "unit slope on the straightened span"));
    rep.checks.push_back(make_check("step1_endpoint", w_endpoint, tol.step_identity));
    rep.checks.push_back(make_check("lowering_inequality", w_ineq, tol.step_identity,
                                    "t2 at the exit vs the handover bound"));
    rep.checks.push_back(make_check("handover_margin", w_margin, -1e-9,
                                    "incoming minus reverted; negative is good"));
    rep.checks.push_back(
        make_check("boundary_coincidence", w_bnd, tol.step_identity));
  }

  // --- structural invariants of the stack ----------------------------------
  {
    Worst w;
    w.add(S.scale() > 0.0 ? -S.scale() : 1.0);
    w.add(R.N == int(mods.size()) ? -1.0 : 1.0);
    double prev_r = std::numeric_limits<double>::infinity();
    for (const BoxModification& m : mods) {
      const double thi = double(m.box.k_index) + 1.0;
      w.add(m.eps - 0.5);
      w.add(-m.eps);
      w.add(1.75 - m.box.t_back);  // tube must hold the whole backward ramp
      w.add(std::abs(m.mu_minus.lo + 1.5));
      w.add(std::abs(m.mu_minus.hi + 1.25));
      w.add(std::abs(m.mu_plus.lo - (thi - 2.0 * m.eps)));
      w.add(std::abs(m.mu_plus.hi - (thi - m.eps)));
      w.add(std::abs(m.box.s_level - S.scale() * m.box.level_r));
      w.add(m.box.level_r - prev_r);
      prev_r = m.box.level_r;
      w.add(m.box.comps.empty() ? 1.0 : -1.0);
      for (const BoxComponent& bc : m.box.comps) {
        w.add(bc.v_in_lo - bc.v_in_hi);
        w.add(bc.sec.v_lo - bc.v_in_lo);
        w.add(bc.v_in_hi - bc.sec.v_hi);
      }
    }
    rep.checks.push_back(make_check("stack_invariants", w, 1e-9,
                                    "windows, levels, ramp placement"));
  }

  // --- chart round trip -----------------------------------------------------
  {
    Worst w;
    int misses = 0;
    const int per = std::max(8, int(tol.samples / std::max<std::size_t>(
                                                      1, mods.size() * 2)));
    for (std::size_t bi = 0; bi < mods.size(); ++bi) {
      const int k = int(bi) + 1;
      const BoxModification& m = mods[bi];
      const double t_hi = m.box.t_used_hi() - 0.1;
      const double t_lo = m.box.t_used_lo() + 0.1;
      for (std::size_t ci = 0; ci < m.box.comps.size(); ++ci) {
        const BoxComponent& bc = m.box.comps[ci];
        const double width = bc.sec.v_hi - bc.sec.v_lo;
        for (int i = 0; i < per; ++i) {
          const double q = window_param(bc, 0.1 * width, i, per);
          const double t = t_lo + (t_hi - t_lo) * double((i * 7) % per) /
                                      double(std::max(1, per - 1));
          Vec p;
          try {
            p = S.chart_point(k, t, int(ci), q);
          } catch (const std::exception&) {
            ++misses;
            continue;
          }
          const auto cc = box_chart_inverse(m.box, S.base(), S.chart_field(), p, io);
          if (!cc) {
            w.add(1.0);
            continue;
          }
          try {
            const Vec p2 =
                box_chart(m.box, S.base(), S.chart_field(), cc->t, cc->comp, cc->q, fc);
            w.add((p2 - p).norm());
          } catch (const std::exception&) {
            w.add(1.0);
          }
        }
      }
    }
    if (w.n == 0)
      rep.checks.push_back(vacuous("chart_roundtrip", tol.roundtrip, "no boxes"));
    else
      rep.checks.push_back(make_check(
          "chart_roundtrip", w, tol.roundtrip,
          misses ? std::to_string(misses) + " chart points unreachable" : ""));
  }

  // --- flow group property --------------------------------------------------
  {
    if (ambient.is_empty()) {
      rep.checks.push_back(
          vacuous("flow_group", tol.roundtrip, "no ambient region supplied"));
    } else {
      Worst w;
      const std::vector<Vec> ps = ambient.sample_halton(64, seed + 4);
      int i = 0;
      for (const Vec& p : ps) {
        const double s = 0.05 + 0.015 * double(i % 5);
        const double t = 0.04 + 0.01 * double(i % 7);
        ++i;
        try {
          const Vec a = flow_map(R.X_raw, flow_map(R.X_raw, p, t, fc), s, fc);
          const Vec b = flow_map(R.X_raw, p, s + t, fc);
          w.add((a - b).norm());
        } catch (const FlowDomainExit&) {
        }
      }
      if (w.n == 0)
        rep.checks.push_back(
            vacuous("flow_group", tol.roundtrip, "all samples left the domain"));
      else
        rep.checks.push_back(make_check("flow_group", w, tol.roundtrip));
    }
  }

  // --- finite differences agree with the analytic derivative ----------------
  // On the target set the derivative is prescribed and the agreement must be
  // absolute.  Away from it the tube formulas carry slopes of order
  // C / |ghat-scaled speed|, so the honest bound there is relative.
  {
    Worst w;
    int skipped = 0;
    if (in.K.is_empty()) {
      rep.checks.push_back(
          vacuous("fd_agreement_k", tol.fd_agree, "empty target set"));
    } else {
      for (const Vec& p : in.K.sample_halton(tol.samples / 4, seed + 5)) {
        try {
          const double fd =
              fd_orbital_derivative(S, R.X_raw, p, tol.fd_agree_delta, fc);
          w.add(std::abs(fd - R.od_original(p)));
        } catch (const FlowDomainExit&) {
          ++skipped;
        }
      }
      if (w.n == 0)
        rep.checks.push_back(
            vacuous("fd_agreement_k", tol.fd_agree, "no usable samples"));
      else
        rep.checks.push_back(make_check(
            "fd_agreement_k", w, tol.fd_agree,
            skipped ? std::to_string(skipped) + " samples left the domain" : ""));
    }
  }
  {
    Worst w;
    std::vector<Vec> pts;
    for (std::size_t bi = 0; bi < mods.size(); ++bi) {
      const int k = int(bi) + 1;
      const BoxModification& m = mods[bi];
      for (std::size_t ci = 0; ci < m.box.comps.size(); ++ci) {
        const BoxComponent& bc = m.box.comps[ci];
        const double width = bc.sec.v_hi - bc.sec.v_lo;
        const double f_hi = m.box.t_used_hi() - 0.2;
        const double f_lo = m.box.t_used_lo() + 0.2;
        for (int i = 0; i < 40; ++i) {
          const double q = window_param(bc, 0.1 * width, i, 40);
          const double t = f_lo + (f_hi - f_lo) * double((i * 11) % 40) / 39.0;
          try {
            pts.push_back(S.chart_point(k, t, int(ci), q));
          } catch (const std::exception&) {
          }
        }
      }
    }
    if (!ambient.is_empty())
      for (const Vec& p : ambient.sample_halton(tol.samples / 4, seed + 6))
        pts.push_back(p);
    int skipped = 0;
    for (const Vec& p : pts) {
      try {
        const double fd =
            fd_orbital_derivative(S, R.X_raw, p, tol.fd_agree_delta, fc);
        const double od = R.od_original(p);
        w.add(std::abs(fd - od) / std::max(1.0, std::abs(od)));
      } catch (const FlowDomainExit&) {
        ++skipped;
      }
    }
    if (w.n == 0)
      rep.checks.push_back(
          vacuous("fd_agreement_tubes", tol.fd_agree_rel, "no usable samples"));
    else
      rep.checks.push_back(make_check(
          "fd_agreement_tubes", w, tol.fd_agree_rel,
          skipped ? std::to_string(skipped) + " samples left the domain" : ""));
  }

  // --- smoothness across every blend seam ------------------------------------
  {
    Worst w_order, w_grow;
    double min_order = std::numeric_limits<double>::infinity();
    for (std::size_t bi = 0; bi < mods.size(); ++bi) {
      const int k = int(bi) + 1;
      const BoxModification& m = mods[bi];
      const double thi = double(m.box.k_index) + 1.0;
      for (std::size_t ci = 0; ci < m.box.comps.size(); ++ci) {
        const BoxComponent& bc = m.box.comps[ci];
        const double width = bc.sec.v_hi - bc.sec.v_lo;

        std::vector<std::pair<double, double>> seams;  // (t, q)
        for (int iq = 0; iq < 5; ++iq) {
          const double q = window_param(bc, 0.1 * width, iq, 5);
          for (double t : {-1.5, -1.25, m.mu_plus.lo, m.mu_plus.hi,
                           m.box.t_used_lo() + 0.01, thi - 0.01})
            seams.emplace_back(t, q);
        }
        // lateral cutoff ramps, sampled at a few heights
        auto add_q_seams = [&](const std::vector<CutoffProfile>& profs) {
          if (ci >= profs.size() || profs[ci].all_one) return;
          for (const PlateauWindow& pw : profs[ci].windows)
            for (double q : {pw.a - 0.5 * pw.ramp, pw.a, pw.b, pw.b + 0.5 * pw.ramp})
              if (q > bc.sec.v_lo + 1e-6 && q < bc.sec.v_hi - 1e-6)
                for (double t : {-1.6, -1.0, 0.4 * thi}) seams.emplace_back(t, q);
        };
        add_q_seams(m.nu1);
        add_q_seams(m.nu2);

        for (const auto& [t, q] : seams) {
          Vec p;
          try {
            p = S.chart_point(k, t, int(ci), q);
          } catch (const std::exception&) {
            continue;
          }
          try {
            const double d = tol.seam_delta;
            const double d1 = central_quotient(S, R.X_raw, p, d, fc);
            const double d2 = central_quotient(S, R.X_raw, p, 2.0 * d, fc);
            const double d4 = central_quotient(S, R.X_raw, p, 4.0 * d, fc);
            const double num = std::abs(d4 - d2), den = std::abs(d2 - d1);
            // quotient differences below the rounding floor of tau/(2d) carry
            // no order information; such seams count as smooth
            const double floor_ = 1e3 * std::numeric_limits<double>::epsilon() *
                                  std::max(1.0, std::abs(S.value(p))) / d;
            if (den > floor_ && num > floor_) {
              const double order = std::log2(num / den);
              min_order = std::min(min_order, order);
              w_order.add(tol.smooth_order - order);
            } else {
              w_order.add(-10.0);  // differences at the noise floor: smooth
            }
            const double s1 = second_quotient(S, R.X_raw, p, d, fc);
            const double s2 = second_quotient(S, R.X_raw, p, 0.5 * d, fc);
            w_grow.add(std::abs(s2) - 1.5 * std::abs(s1));
          } catch (const FlowDomainExit&) {
          }
        }
      }
    }
    if (w_order.n == 0) {
      rep.checks.push_back(vacuous("seam_order", 0.0, "no boxes"));
      rep.checks.push_back(vacuous("seam_bounded", tol.seam_growth, "no boxes"));
    } else {
      rep.checks.push_back(make_check(
          "seam_order", w_order, 0.0,
          std::isfinite(min_order) ? "min difference-quotient order " + fmt(min_order)
                                   : "all quotients at the noise floor"));
      rep.checks.push_back(make_check("seam_bounded", w_grow, tol.seam_growth,
                                      "second differences must not blow up"));
    }
  }

  // --- bitwise repeatability -------------------------------------------------
  {
    std::vector<Vec> pts;
    if (!ambient.is_empty())
      pts = ambient.sample_halton(48, seed + 7);
    else if (!in.K.is_empty())
      pts = in.K.sample_halton(48, seed + 7);
    if (pts.empty()) {
      rep.checks.push_back(vacuous("determinism", 0.0, "no sample region"));
    } else {
      std::vector<double> first;
      first.reserve(pts.size());
      for (const Vec& p : pts) first.push_back(S.value(p));
      S.clear_memo();
      Worst w;
      for (std::size_t i = 0; i < pts.size(); ++i) {
        const double again = S.value(pts[i]);
        w.add(std::memcmp(&again, &first[i], sizeof(double)) == 0 ? -1.0 : 1.0);
      }
      rep.checks.push_back(
          make_check("determinism", w, 0.0, "bitwise re-evaluation after cache reset"));
    }
  }

  // --- residual bookkeeping for fitted bases ----------------------------------
  {
    if (!fitted_base) {
      rep.checks.push_back(vacuous("base_residual_margin", tol.prescription_colloc,
                                   "closed-form base"));
    } else if (in.K.is_empty() || !in.g.eval) {
      rep.checks.push_back(vacuous("base_residual_margin", tol.prescription_colloc,
                                   "empty target set"));
    } else {
      Worst w;
      for (const Vec& p : in.K.sample_halton(256, seed + 8))
        w.add(std::abs(R.od_original(p) - in.g.eval(p)));
      rep.checks.push_back(make_check(
          "base_residual_margin", w, tol.prescription_colloc,
          "derivative error induced by the fitted base"));
    }
  }

  rep.pass = true;
  for (const CheckResult& c : rep.checks) rep.pass = rep.pass && c.pass;
  return rep;
}

}  // namespace clf
