#include "clf/system.hpp"

#include <cmath>

namespace clf {

ScalarField ScalarField::constant(double c, int) {
  ScalarField s;
  s.eval = [c](const Vec&) { return c; };
  s.gradient = [c](const Vec& p) { (void)c; return Vec(Vec::Zero(p.size())); };
  return s;
}

double poly_eval(const std::vector<PolyTerm>& terms, const Vec& p) {
  double acc = 0.0;
  for (const auto& t : terms) {
    double m = t.coeff;
    for (size_t i = 0; i < t.expo.size(); ++i)
      for (int e = 0; e < t.expo[i]; ++e) m *= p[static_cast<int>(i)];
    acc += m;
  }
  return acc;
}

Vec poly_grad(const std::vector<PolyTerm>& terms, const Vec& p) {
  Vec g = Vec::Zero(p.size());
  for (const auto& t : terms) {
    for (int d = 0; d < p.size(); ++d) {
      int ed = t.expo[d];
      if (ed == 0) continue;
      double m = t.coeff * ed;
      for (int i = 0; i < p.size(); ++i) {
        int e = t.expo[i] - (i == d ? 1 : 0);
        for (int k = 0; k < e; ++k) m *= p[i];
      }
      g[d] += m;
    }
  }
  return g;
}

ScalarField poly_scalar(std::vector<PolyTerm> terms) {
  auto t = std::make_shared<std::vector<PolyTerm>>(std::move(terms));
  ScalarField s;
  s.eval = [t](const Vec& p) { return poly_eval(*t, p); };
  s.gradient = [t](const Vec& p) { return poly_grad(*t, p); };
  return s;
}

VectorField poly_field(int n, const Box& domain,
                       std::vector<std::vector<PolyTerm>> comps) {
  if (static_cast<int>(comps.size()) != n)
    throw std::invalid_argument("poly_field: one term table per component");
  auto c = std::make_shared<std::vector<std::vector<PolyTerm>>>(std::move(comps));
  VectorField X;
  X.n = n;
  X.domain = domain;
  X.name = "poly";
  X.eval = [c, n](const Vec& p) {
    Vec v(n);
    for (int i = 0; i < n; ++i) v[i] = poly_eval((*c)[i], p);
    return v;
  };
  return X;
}

// ---------------------------------------------------------------------------

VectorField fixture_field(const std::string& name) {
  VectorField X;
  X.n = 2;
  X.name = name;
  if (name == "linear_sink") {
    X.domain = Box::square(-3.0, 3.0);
    X.eval = [](const Vec& p) { return Vec(-p); };
    X.closed_form_flow = [](double t, const Vec& p) { return Vec(std::exp(-t) * p); };
  } else if (name == "constant") {
    X.domain = Box::square(-6.0, 6.0);
    X.eval = [](const Vec& p) {
      Vec v = Vec::Zero(p.size());
      v[0] = 1.0;
      return v;
    };
    X.closed_form_flow = [](double t, const Vec& p) {
      Vec q = p;
      q[0] += t;
      return q;
    };
  } else if (name == "limit_cycle") {
    // rdot = r(1 - r^2), thetadot = 1; unit circle attracting, origin repelling
    X.domain = Box::square(-2.0, 2.0);
    X.eval = [](const Vec& p) {
      double r2 = p.squaredNorm();
      Vec v(2);
      v[0] = p[0] * (1.0 - r2) - p[1];
      v[1] = p[1] * (1.0 - r2) + p[0];
      return v;
    };
    X.closed_form_flow = [](double t, const Vec& p) {
      double r0 = p.norm();
      if (r0 == 0.0) return p;
      double den = 1.0 + r0 * r0 * (std::exp(2.0 * t) - 1.0);
      if (den <= 0.0) throw std::runtime_error("limit_cycle flow: finite-time blow-up");
      double r = r0 * std::exp(t) / std::sqrt(den);
      double th = std::atan2(p[1], p[0]) + t;
      return Vec(vec2(r * std::cos(th), r * std::sin(th)));
    };
  } else if (name == "chi_e1") {
    // X = (x^2 + y^2) e1: every orbit is horizontal, the origin is the only
    // chain-recurrent point
    X.domain = Box::square(-1.0, 1.0);
    X.eval = [](const Vec& p) {
      Vec v(2);
      v[0] = p.squaredNorm();
      v[1] = 0.0;
      return v;
    };
    X.closed_form_flow = [](double t, const Vec& p) {
      double x = p[0], y = p[1];
      double xt;
      if (y == 0.0) {
        double den = 1.0 - x * t;
        if (den <= 0.0 && x > 0.0)
          throw std::runtime_error("chi_e1 flow: finite-time blow-up");
        if (den == 0.0) throw std::runtime_error("chi_e1 flow: finite-time blow-up");
        xt = x / den;
      } else {
        double arg = y * t + std::atan(x / y);
        if (std::abs(arg) >= M_PI_2) throw std::runtime_error("chi_e1 flow: finite-time blow-up");
        xt = y * std::tan(arg);
      }
      return Vec(vec2(xt, y));
    };
  } else {
    throw std::invalid_argument("fixture_field: unknown name '" + name + "'");
  }
  return X;
}

// ---------------------------------------------------------------------------

RescaledField rescale_complete(const VectorField& X) {
  auto base = X.eval;
  auto f = [base](const Vec& p) { return 1.0 / (1.0 + base(p).norm()); };
  RescaledField out;
  out.f = f;
  out.field = X;
  out.field.name = X.name + "/rescaled";
  out.field.closed_form_flow = nullptr;  // reparametrised time, no closed form
  out.field.eval = [base, f](const Vec& p) { return Vec(f(p) * base(p)); };
  return out;
}

UnitReduction reduce_to_unit(const VectorField& X, const ScalarField& g,
                             const Region& K, const ReduceOptions& opt) {
  double uk = opt.uk_margin;
  if (uk <= 0.0) {
    if (K.is_empty()) {
      uk = 0.25 * X.domain.diameter();
    } else {
      // distance from K to the domain boundary, sampled over the K hull
      double d = kInf;
      Box bb = K.bounding_box();
      for (const Vec& c : {bb.lo, bb.hi, Vec(vec2(bb.lo[0], bb.hi[1])), Vec(vec2(bb.hi[0], bb.lo[1]))}) {
        for (int i = 0; i < X.domain.dim(); ++i) {
          d = std::min(d, c[i] - X.domain.lo[i]);
          d = std::min(d, X.domain.hi[i] - c[i]);
        }
      }
      if (d <= 0.0) throw std::runtime_error("reduce_to_unit: K touches the domain boundary");
      uk = 0.4 * d;
    }
  }
  double collar = opt.collar > 0.0 ? opt.collar : 0.1 * uk;

  // blend factor: 1 up to 0.4*uk away from K, 0 past 0.4*uk + collar
  double band_lo = 0.4 * uk;
  SmoothStep step(band_lo, band_lo + collar);
  auto geval = g.eval;
  Region Kc = K;
  std::function<double(const Vec&)> ghat;
  if (K.is_empty()) {
    ghat = [](const Vec&) { return -1.0; };
  } else {
    ghat = [geval, Kc, step](const Vec& p) {
      double beta = 1.0 - step(Kc.dist(p));
      if (beta <= 0.0) return -1.0;
      return beta * geval(p) + (1.0 - beta) * (-1.0);
    };
  }

  // reject non-negative targets anywhere on the blend neighborhood
  if (!K.is_empty()) {
    auto pts = K.sample_halton(opt.check_samples, opt.seed);
    Box bb = K.bounding_box(band_lo + collar);
    Halton h(X.n, opt.seed + 1);
    int outer = 0;
    while (outer < opt.check_samples) {
      Vec p = h.next_in(bb);
      if (K.dist(p) <= band_lo + collar) {
        pts.push_back(p);
        ++outer;
      }
    }
    for (const auto& p : pts)
      if (!(geval(p) < 0.0))
        throw std::runtime_error("reduce_to_unit: target g is not negative on U_K");
  }

  auto base = X.eval;
  UnitReduction out;
  out.ghat = ghat;
  out.uk_margin = uk;
  out.collar = collar;
  out.field = X;
  out.field.name = X.name + "/unit-target";
  out.field.closed_form_flow = nullptr;
  out.field.eval = [base, ghat](const Vec& p) { return Vec(base(p) / -ghat(p)); };
  return out;
}

}  // namespace clf
