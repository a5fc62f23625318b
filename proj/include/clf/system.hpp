#pragma once

#include <functional>
#include <memory>
#include <string>

#include "clf/geometry.hpp"
#include "clf/smoothstep.hpp"

namespace clf {

// ---------------------------------------------------------------------------
// dynamical system inputs

struct VectorField {
  int n = 2;
  Box domain;                              // working box U
  std::function<Vec(const Vec&)> eval;
  // exact flow map, when one is known (test oracle; never used by the pipeline)
  std::function<Vec(double, const Vec&)> closed_form_flow;
  std::string name = "field";

  Vec operator()(const Vec& p) const { return eval(p); }
  bool has_closed_form() const { return static_cast<bool>(closed_form_flow); }
};

struct ScalarField {
  std::function<double(const Vec&)> eval;
  std::function<Vec(const Vec&)> gradient;  // may be empty

  double operator()(const Vec& p) const { return eval(p); }
  bool has_gradient() const { return static_cast<bool>(gradient); }

  static ScalarField constant(double c, int n);
};

// polynomial in n variables given as a coefficient table
struct PolyTerm {
  double coeff = 0.0;
  std::vector<int> expo;  // one exponent per variable
};

double poly_eval(const std::vector<PolyTerm>& terms, const Vec& p);
Vec poly_grad(const std::vector<PolyTerm>& terms, const Vec& p);
ScalarField poly_scalar(std::vector<PolyTerm> terms);
VectorField poly_field(int n, const Box& domain,
                       std::vector<std::vector<PolyTerm>> comps);

// built-in test systems: linear_sink, constant, limit_cycle, chi_e1
VectorField fixture_field(const std::string& name);

// ---------------------------------------------------------------------------
// completeness rescaling:  X -> f X  with  f = 1/(1 + |X|), so |fX| < 1 and
// the flow cannot blow up in finite time.  Orbits and their orientation are
// unchanged, hence so is the chain-recurrent set.

struct RescaledField {
  VectorField field;                       // f X
  std::function<double(const Vec&)> f;     // the factor
};

RescaledField rescale_complete(const VectorField& X);

// ---------------------------------------------------------------------------
// reduction of a prescribed negative target to the unit target.
//
// g (negative on a neighborhood of K) is extended to ghat with ghat = g on K
// and ghat = -1 off an inflation of K, blended by the C-infinity step applied
// to dist(.,K).  The reduced field X_g = -X/ghat points along X, and a
// function with orbital derivative -1 for X_g has orbital derivative ghat for
// X.

struct UnitReduction {
  VectorField field;                       // X_g = -X / ghat
  std::function<double(const Vec&)> ghat;  // the blended extension
  double uk_margin = 0.0;                  // dist(K, boundary of U_K)
  double collar = 0.0;                     // width of the blend band
};

struct ReduceOptions {
  double uk_margin = 0.0;   // <=0: use 0.4 * dist(K, domain boundary)
  double collar = 0.0;      // <=0: use 10% of uk_margin
  int check_samples = 512;  // g < 0 validation on U_K
  unsigned seed = 0;
};

UnitReduction reduce_to_unit(const VectorField& X, const ScalarField& g,
                             const Region& K, const ReduceOptions& opt = {});

}  // namespace clf
