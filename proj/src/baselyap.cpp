#include "clf/baselyap.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace clf {

Vec LyapunovEvaluator::gradient(const Vec&) const {
  throw std::runtime_error("LyapunovEvaluator: no gradient available");
}

ScalarField fixture_base_scalar(const std::string& name) {
  ScalarField s;
  if (name == "linear_sink") {
    // |x|^2 / 2; orbital derivative -|x|^2 for X = -x
    s.eval = [](const Vec& p) { return 0.5 * p.squaredNorm(); };
    s.gradient = [](const Vec& p) { return p; };
  } else if (name == "constant") {
    // -x1; orbital derivative -1 for X = e1
    s.eval = [](const Vec& p) { return -p[0]; };
    s.gradient = [](const Vec& p) {
      Vec g = Vec::Zero(p.size());
      g[0] = -1.0;
      return g;
    };
  } else if (name == "limit_cycle") {
    // (1 - r^2)^2, critical exactly on the origin and the unit circle
    s.eval = [](const Vec& p) {
      double w = 1.0 - p.squaredNorm();
      return w * w;
    };
    s.gradient = [](const Vec& p) {
      double w = 1.0 - p.squaredNorm();
      return Vec(-4.0 * w * p);
    };
  } else {
    throw std::invalid_argument("fixture_base: no analytic base for '" + name + "'");
  }
  return s;
}

FixtureBase fixture_base(const std::string& name) {
  FixtureBase fb;
  fb.X = fixture_field(name);
  fb.tau = std::make_shared<AnalyticLyapunov>(fixture_base_scalar(name), fb.X,
                                              "fixture:" + name);
  return fb;
}

double orbital_derivative(const LyapunovEvaluator& tau, const VectorField& X,
                          const Vec& p, double delta, const FlowMapConfig& cfg) {
  if (tau.has_gradient()) return tau.gradient(p).dot(X.eval(p));
  auto central = [&](double d) {
    double fp = tau.value(flow_map(X, p, d, cfg));
    double fm = tau.value(flow_map(X, p, -d, cfg));
    return (fp - fm) / (2.0 * d);
  };
  double d1 = central(delta), d2 = central(0.5 * delta);
  return (4.0 * d2 - d1) / 3.0;  // Richardson: O(delta^4)
}

// ---------------------------------------------------------------------------
// Wendland kernels.  phi_{3,1}(r) = (1-cr)^4_+ (4cr+1),
// phi_{3,2}(r) = (1-cr)^6_+ (35(cr)^2 + 18cr + 3).
// Only eta1 = phi'/r and eta2 = eta1'/r enter the collocation formulas.

double WendlandKernel::eta1(double r) const {
  double u = c * r;
  if (u >= 1.0) return 0.0;
  double w = 1.0 - u;
  if (id == W31) return -20.0 * c * c * w * w * w;
  double w5 = w * w * w * w * w;
  return -56.0 * c * c * (5.0 * u + 1.0) * w5;
}

double WendlandKernel::eta2(double r) const {
  double u = c * r;
  if (u >= 1.0) return 0.0;
  double w = 1.0 - u;
  if (id == W31) {
    // eta1' = 60 c^3 w^2, so eta2 = 60 c^3 w^2 / r (integrable singularity;
    // every use multiplies by factors vanishing like r^2)
    if (r < 1e-14) return 0.0;
    return 60.0 * c * c * c * w * w / r;
  }
  double w4 = w * w * w * w;
  return 1680.0 * std::pow(c, 4) * w4;
}

double CollocationModel::value(const Vec& p) const {
  // u(x) = sum_j beta_j eta1(|x - x_j|) <x_j - x, X(x_j)>
  double acc = 0.0;
  for (size_t j = 0; j < nodes.size(); ++j) {
    double r = (p - nodes[j]).norm();
    if (r >= kernel.support()) continue;
    acc += coeff[static_cast<int>(j)] * kernel.eta1(r) * (nodes[j] - p).dot(node_field[j]);
  }
  return acc;
}

Vec CollocationModel::grad(const Vec& p) const {
  Vec g = Vec::Zero(n);
  for (size_t j = 0; j < nodes.size(); ++j) {
    Vec d = p - nodes[j];
    double r = d.norm();
    if (r >= kernel.support()) continue;
    double b = coeff[static_cast<int>(j)];
    g += b * (kernel.eta2(r) * (nodes[j] - p).dot(node_field[j]) * d -
              kernel.eta1(r) * node_field[j]);
  }
  return g;
}

CollocationModel collocation_fit(const VectorField& X, const std::vector<Vec>& nodes,
                                 const ScalarField& h, const CollocationOptions& opt) {
  const int m = static_cast<int>(nodes.size());
  if (m == 0) throw std::invalid_argument("collocation_fit: empty node set");
  CollocationModel model;
  model.kernel = opt.kernel;
  model.n = X.n;
  model.nodes = nodes;
  model.node_field.reserve(nodes.size());
  for (const auto& x : nodes) {
    Vec v = X.eval(x);
    if (v.norm() < 1e-13)
      throw std::runtime_error("collocation_fit: node at an equilibrium");
    model.node_field.push_back(v);
  }

  // A_ij = L_x L_y psi(x_i, x_j)
  //       = -eta2(r) <x_i - x_j, X_i> <x_i - x_j, X_j> - eta1(r) <X_i, X_j>
  Eigen::MatrixXd A(m, m);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j <= i; ++j) {
      Vec d = nodes[i] - nodes[j];
      double r = d.norm();
      double a = 0.0;
      if (r < opt.kernel.support()) {
        a = -opt.kernel.eta2(r) * d.dot(model.node_field[i]) * d.dot(model.node_field[j]) -
            opt.kernel.eta1(r) * model.node_field[i].dot(model.node_field[j]);
      }
      A(i, j) = a;
      A(j, i) = a;
    }
  }
  Eigen::VectorXd rhs(m);
  for (int i = 0; i < m; ++i) rhs[i] = h.eval(nodes[i]);

  Eigen::PartialPivLU<Eigen::MatrixXd> lu(A);
  double rcond = lu.rcond();
  if (rcond > 0.0 && 1.0 / rcond > opt.cond_limit)
    throw std::runtime_error(
        "collocation_fit: system too ill-conditioned (thin the nodes or shrink the support)");

  Eigen::VectorXd beta = lu.solve(rhs);
  for (int it = 0; it < opt.refine_iters; ++it) {
    Eigen::VectorXd res = rhs - A * beta;
    beta += lu.solve(res);
  }
  model.coeff = beta;
  model.max_node_residual = (rhs - A * beta).cwiseAbs().maxCoeff();
  if (model.max_node_residual > opt.residual_limit)
    throw std::runtime_error("collocation_fit: node residual " +
                             format_g17(model.max_node_residual) +
                             " above limit (ill-conditioned node layout?)");
  return model;
}

void save_collocation(const std::string& path, const CollocationModel& m) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_collocation: cannot open " + path);
  out << "clf-collocation 1\n";
  out << "kernel " << static_cast<int>(m.kernel.id) << " " << format_g17(m.kernel.c) << "\n";
  out << "dim " << m.n << "\n";
  out << "nodes " << m.nodes.size() << "\n";
  for (size_t i = 0; i < m.nodes.size(); ++i) {
    for (int d = 0; d < m.n; ++d) out << format_g17(m.nodes[i][d]) << " ";
    out << format_g17(m.coeff[static_cast<int>(i)]) << "\n";
  }
}

CollocationModel load_collocation(const std::string& path, const VectorField& X) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_collocation: cannot open " + path);
  std::string magic;
  int version = 0;
  in >> magic >> version;
  if (magic != "clf-collocation" || version != 1)
    throw std::runtime_error("load_collocation: bad header in " + path);
  CollocationModel m;
  std::string key;
  int kid = 0;
  in >> key >> kid >> m.kernel.c;
  if (key != "kernel") throw std::runtime_error("load_collocation: expected kernel line");
  m.kernel.id = static_cast<WendlandKernel::Id>(kid);
  size_t count = 0;
  in >> key >> m.n;
  if (key != "dim") throw std::runtime_error("load_collocation: expected dim line");
  in >> key >> count;
  if (key != "nodes") throw std::runtime_error("load_collocation: expected nodes line");
  m.coeff.resize(static_cast<int>(count));
  for (size_t i = 0; i < count; ++i) {
    Vec x(m.n);
    for (int d = 0; d < m.n; ++d) in >> x[d];
    in >> m.coeff[static_cast<int>(i)];
    m.nodes.push_back(x);
    m.node_field.push_back(X.eval(x));
  }
  if (!in) throw std::runtime_error("load_collocation: truncated file " + path);
  return m;
}

}  // namespace clf
