#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

namespace clf {

// e(t) = exp(-1/t) for t > 0, extended by 0; the standard C-infinity mollifier
// building block.  All cutoffs below are quotients/products of e and therefore
// smooth with all derivatives vanishing at the junction points.
inline double cinf_e(double t) { return t > 0.0 ? std::exp(-1.0 / t) : 0.0; }

inline double cinf_e_deriv(double t) {
  if (t <= 0.0) return 0.0;
  double inv = 1.0 / t;
  return std::exp(-inv) * inv * inv;
}

// Monotone C-infinity step: 0 for t <= lo, 1 for t >= hi, value 1/2 at the
// midpoint.  s(t) = e(u) / (e(u) + e(1-u)) with u = (t-lo)/(hi-lo).
struct SmoothStep {
  double lo = 0.0, hi = 1.0;

  SmoothStep() = default;
  SmoothStep(double l, double h) : lo(l), hi(h) {
    if (!(l < h)) throw std::invalid_argument("SmoothStep: need lo < hi");
  }

  double operator()(double t) const {
    double u = (t - lo) / (hi - lo);
    if (u <= 0.0) return 0.0;
    if (u >= 1.0) return 1.0;
    double a = cinf_e(u), b = cinf_e(1.0 - u);
    return a / (a + b);
  }

  double deriv(double t) const {
    double w = hi - lo;
    double u = (t - lo) / w;
    if (u <= 0.0 || u >= 1.0) return 0.0;
    double a = cinf_e(u), b = cinf_e(1.0 - u);
    double da = cinf_e_deriv(u), db = cinf_e_deriv(1.0 - u);
    double s = a + b;
    return (da * b + a * db) / (s * s) / w;
  }
};

// C-infinity bump in one variable: 1 on |u| <= 1/2, 0 on |u| >= 1.  The kink
// of |u| at 0 is harmless because the function is constant there.
inline double plateau_bump(double u) {
  static const SmoothStep s01(0.0, 1.0);
  return s01(2.0 * (1.0 - std::abs(u)));
}

// Smooth indicator of a union of parameter intervals: equal to 1 on each
// [a,b], 0 outside the ramp collars, via 1 - prod(1 - w_i).  Supports a
// circular parameter (arc length on a closed section) of the given period.
struct PlateauWindow {
  double a = 0.0, b = 0.0;  // plateau
  double ramp = 0.0;        // support is [a - ramp, b + ramp]
};

struct CutoffProfile {
  bool all_one = false;  // the degenerate "no lateral boundary" case
  bool circular = false;
  double period = 0.0;
  std::vector<PlateauWindow> windows;

  static CutoffProfile one() {
    CutoffProfile c;
    c.all_one = true;
    return c;
  }

  bool trivial_zero() const { return !all_one && windows.empty(); }

  double value(double q) const {
    if (all_one) return 1.0;
    if (windows.empty()) return 0.0;
    double prod = 1.0;
    for (const auto& w : windows) {
      double x = q;
      if (circular) {
        // shift q by whole periods to the copy nearest the window
        double mid = 0.5 * (w.a + w.b);
        x = q - period * std::round((q - mid) / period);
      }
      double v;
      if (x >= w.a && x <= w.b) {
        v = 1.0;
      } else if (x < w.a) {
        SmoothStep up(w.a - w.ramp, w.a);
        v = up(x);
      } else {
        SmoothStep down(w.b, w.b + w.ramp);
        v = 1.0 - down(x);
      }
      prod *= (1.0 - v);
    }
    return 1.0 - prod;
  }
};

}  // namespace clf
