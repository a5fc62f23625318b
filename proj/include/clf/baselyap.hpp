#pragma once

#include <memory>
#include <string>
#include <vector>

#include "clf/flow.hpp"
#include "clf/geometry.hpp"
#include "clf/system.hpp"

namespace clf {

// A scalar function of phase together with the orbital derivative for the
// vector field it was built against.
class LyapunovEvaluator {
 public:
  virtual ~LyapunovEvaluator() = default;
  virtual double value(const Vec& p) const = 0;
  virtual double orbital_derivative(const Vec& p) const = 0;
  virtual bool has_gradient() const { return false; }
  virtual Vec gradient(const Vec& p) const;
  virtual std::string provenance() const = 0;
};

// closed-form value/gradient pair bound to a field
class AnalyticLyapunov : public LyapunovEvaluator {
 public:
  AnalyticLyapunov(ScalarField tau, VectorField X, std::string tag)
      : tau_(std::move(tau)), X_(std::move(X)), tag_(std::move(tag)) {
    if (!tau_.has_gradient())
      throw std::invalid_argument("AnalyticLyapunov: gradient required");
  }
  double value(const Vec& p) const override { return tau_.eval(p); }
  double orbital_derivative(const Vec& p) const override {
    return tau_.gradient(p).dot(X_.eval(p));
  }
  bool has_gradient() const override { return true; }
  Vec gradient(const Vec& p) const override { return tau_.gradient(p); }
  std::string provenance() const override { return tag_; }

 private:
  ScalarField tau_;
  VectorField X_;
  std::string tag_;
};

// analytic base function of a named fixture (value + gradient, unbound)
ScalarField fixture_base_scalar(const std::string& name);

struct FixtureBase {
  VectorField X;
  std::shared_ptr<LyapunovEvaluator> tau;
};
FixtureBase fixture_base(const std::string& name);

// orbital derivative of an arbitrary evaluator: analytic when a gradient is
// available, otherwise Richardson-extrapolated central differences along the
// flow with half-width delta
double orbital_derivative(const LyapunovEvaluator& tau, const VectorField& X,
                          const Vec& p, double delta = 1e-4,
                          const FlowMapConfig& cfg = {});

// ---------------------------------------------------------------------------
// meshfree solution of  grad(tau) . X = h  by symmetric (Hermite) collocation
// with compactly supported Wendland kernels.

struct WendlandKernel {
  enum Id { W31 = 31, W32 = 32 };  // C^2 / C^4 on R^2-R^3
  Id id = W32;
  double c = 1.0;  // inverse support radius: phi((c r))

  double eta1(double r) const;  // phi'(r)/r
  double eta2(double r) const;  // (phi''(r) r - phi'(r)) / r^3
  double support() const { return 1.0 / c; }
};

struct CollocationModel {
  WendlandKernel kernel;
  int n = 2;
  std::vector<Vec> nodes;
  std::vector<Vec> node_field;  // X at the nodes (the ansatz depends on it)
  Eigen::VectorXd coeff;
  double max_node_residual = 0.0;

  double value(const Vec& p) const;
  Vec grad(const Vec& p) const;
};

struct CollocationOptions {
  WendlandKernel kernel;
  int refine_iters = 2;        // rounds of iterative refinement on the solve
  double cond_limit = 1e14;    // reject worse-conditioned systems
  double residual_limit = 1e-6;
};

CollocationModel collocation_fit(const VectorField& X, const std::vector<Vec>& nodes,
                                 const ScalarField& h, const CollocationOptions& opt = {});

void save_collocation(const std::string& path, const CollocationModel& m);
CollocationModel load_collocation(const std::string& path, const VectorField& X);

// evaluator wrapper bound to the field the model was fitted against
class CollocationLyapunov : public LyapunovEvaluator {
 public:
  CollocationLyapunov(CollocationModel m, VectorField X)
      : model_(std::move(m)), X_(std::move(X)) {}
  double value(const Vec& p) const override { return model_.value(p); }
  double orbital_derivative(const Vec& p) const override {
    return model_.grad(p).dot(X_.eval(p));
  }
  bool has_gradient() const override { return true; }
  Vec gradient(const Vec& p) const override { return model_.grad(p); }
  std::string provenance() const override { return "collocation"; }
  const CollocationModel& model() const { return model_; }

 private:
  CollocationModel model_;
  VectorField X_;
};

}  // namespace clf
