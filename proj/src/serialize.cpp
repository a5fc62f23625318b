#include "clf/serialize.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace clf {

namespace {

void wd(std::ostream& os, double v) { os << ' ' << format_g17(v); }

void expect(std::istream& is, const std::string& want) {
  std::string k;
  is >> k;
  if (k != want)
    throw std::runtime_error("stack file: expected '" + want + "', got '" + k + "'");
}

void write_terms(std::ostream& os, const std::vector<PolyTerm>& terms) {
  for (const PolyTerm& t : terms) {
    os << "term " << format_g17(t.coeff);
    for (int e : t.expo) os << ' ' << e;
    os << "\n";
  }
}

std::vector<PolyTerm> read_terms(std::istream& is, int count, int n) {
  std::vector<PolyTerm> terms;
  terms.reserve(std::size_t(count));
  for (int i = 0; i < count; ++i) {
    expect(is, "term");
    PolyTerm t;
    is >> t.coeff;
    t.expo.resize(std::size_t(n));
    for (int d = 0; d < n; ++d) is >> t.expo[std::size_t(d)];
    terms.push_back(std::move(t));
  }
  return terms;
}

void write_profile(std::ostream& os, const CutoffProfile& pr) {
  os << "prof " << (pr.all_one ? 1 : 0) << ' ' << (pr.circular ? 1 : 0) << ' '
     << format_g17(pr.period) << ' ' << pr.windows.size() << "\n";
  for (const PlateauWindow& w : pr.windows) {
    os << "win";
    wd(os, w.a);
    wd(os, w.b);
    wd(os, w.ramp);
    os << "\n";
  }
}

CutoffProfile read_profile(std::istream& is) {
  expect(is, "prof");
  CutoffProfile pr;
  int one = 0, circ = 0;
  std::size_t nw = 0;
  is >> one >> circ >> pr.period >> nw;
  pr.all_one = one != 0;
  pr.circular = circ != 0;
  for (std::size_t i = 0; i < nw; ++i) {
    expect(is, "win");
    PlateauWindow w;
    is >> w.a >> w.b >> w.ramp;
    pr.windows.push_back(w);
  }
  return pr;
}

}  // namespace

void write_region(std::ostream& os, const Region& r) {
  switch (r.kind) {
    case Region::Kind::Empty:
      os << "region empty\n";
      return;
    case Region::Kind::Rect: {
      const int n = int(r.rect.lo.size());
      os << "region rect " << n;
      for (int i = 0; i < n; ++i) wd(os, r.rect.lo[i]);
      for (int i = 0; i < n; ++i) wd(os, r.rect.hi[i]);
      os << "\n";
      return;
    }
    case Region::Kind::Annulus: {
      const int n = int(r.center.size());
      os << "region annulus " << n;
      for (int i = 0; i < n; ++i) wd(os, r.center[i]);
      wd(os, r.r0);
      wd(os, r.r1);
      os << "\n";
      return;
    }
    case Region::Kind::Points: {
      const int n = r.points.empty() ? 0 : int(r.points.front().size());
      os << "region points " << n << ' ' << r.points.size() << "\n";
      for (const Vec& p : r.points) {
        os << "pt";
        for (int i = 0; i < n; ++i) wd(os, p[i]);
        os << "\n";
      }
      return;
    }
  }
  throw std::logic_error("write_region: unknown kind");
}

Region read_region(std::istream& is) {
  expect(is, "region");
  std::string kind;
  is >> kind;
  if (kind == "empty") return Region::empty();
  if (kind == "rect") {
    int n = 0;
    is >> n;
    Vec lo(n), hi(n);
    for (int i = 0; i < n; ++i) is >> lo[i];
    for (int i = 0; i < n; ++i) is >> hi[i];
    return Region::make_rect(Box(lo, hi));
  }
  if (kind == "annulus") {
    int n = 0;
    is >> n;
    Vec c(n);
    for (int i = 0; i < n; ++i) is >> c[i];
    double r0 = 0, r1 = 0;
    is >> r0 >> r1;
    return Region::make_annulus(c, r0, r1);
  }
  if (kind == "points") {
    int n = 0;
    std::size_t cnt = 0;
    is >> n >> cnt;
    std::vector<Vec> pts;
    pts.reserve(cnt);
    for (std::size_t i = 0; i < cnt; ++i) {
      expect(is, "pt");
      Vec p(n);
      for (int d = 0; d < n; ++d) is >> p[d];
      pts.push_back(std::move(p));
    }
    return Region::make_points(std::move(pts));
  }
  throw std::runtime_error("stack file: unknown region kind '" + kind + "'");
}

VectorField make_field(const FieldSpec& spec) {
  if (spec.kind == "fixture") return fixture_field(spec.name);
  if (spec.kind == "poly") return poly_field(spec.n, spec.domain, spec.comps);
  throw std::runtime_error("field spec: unknown kind '" + spec.kind + "'");
}

ScalarField make_target(const TargetSpec& spec, int n) {
  if (spec.kind == "constant") return ScalarField::constant(spec.value, n);
  if (spec.kind == "poly") return poly_scalar(spec.poly);
  throw std::runtime_error("target spec: unknown kind '" + spec.kind + "'");
}

StackFile pack_stack(const PrescribedResult& result, const FieldSpec& field,
                     const TargetSpec& target, const Region& K, const BaseSpec& base) {
  StackFile sf;
  sf.field = field;
  sf.target = target;
  sf.K = K;
  sf.base = base;
  sf.C = result.C;
  sf.N = result.N;
  sf.uk_margin = result.uk_margin;
  sf.collar = result.collar;
  sf.reduce_seed = result.reduce_seed;
  if (result.stack) sf.mods = result.stack->mods();
  return sf;
}

void save_stack(std::ostream& os, const StackFile& sf) {
  os << "clf-stack 1\n";

  if (sf.field.kind == "fixture") {
    os << "field fixture " << sf.field.name << "\n";
  } else if (sf.field.kind == "poly") {
    os << "field poly " << sf.field.n << "\n";
    os << "domain";
    for (int i = 0; i < sf.field.n; ++i) wd(os, sf.field.domain.lo[i]);
    for (int i = 0; i < sf.field.n; ++i) wd(os, sf.field.domain.hi[i]);
    os << "\n";
    for (std::size_t ci = 0; ci < sf.field.comps.size(); ++ci) {
      os << "fcomp " << ci << ' ' << sf.field.comps[ci].size() << "\n";
      write_terms(os, sf.field.comps[ci]);
    }
  } else {
    throw std::runtime_error("save_stack: unknown field kind '" + sf.field.kind + "'");
  }

  if (sf.target.kind == "constant") {
    os << "target constant " << format_g17(sf.target.value) << "\n";
  } else if (sf.target.kind == "poly") {
    os << "target poly " << sf.target.poly.size() << "\n";
    write_terms(os, sf.target.poly);
  } else {
    throw std::runtime_error("save_stack: unknown target kind '" + sf.target.kind + "'");
  }

  write_region(os, sf.K);

  if (sf.base.kind == "fixture") {
    os << "base fixture " << sf.base.name << "\n";
  } else if (sf.base.kind == "collocation") {
    const CollocationModel& m = sf.base.model;
    os << "base collocation " << int(m.kernel.id) << ' ' << format_g17(m.kernel.c)
       << ' ' << m.n << ' ' << m.nodes.size() << ' '
       << format_g17(m.max_node_residual) << "\n";
    for (std::size_t i = 0; i < m.nodes.size(); ++i) {
      os << "node";
      for (int d = 0; d < m.n; ++d) wd(os, m.nodes[i][d]);
      wd(os, m.coeff[int(i)]);
      os << "\n";
    }
  } else {
    throw std::runtime_error("save_stack: unknown base kind '" + sf.base.kind + "'");
  }

  os << "reduction " << format_g17(sf.uk_margin) << ' ' << format_g17(sf.collar)
     << ' ' << sf.reduce_seed << "\n";
  os << "scale " << format_g17(sf.C) << "\n";
  os << "boxes " << sf.mods.size() << "\n";

  for (const BoxModification& m : sf.mods) {
    const FlowBox& b = m.box;
    os << "box " << b.k_index;
    wd(os, b.level_r);
    wd(os, b.s_level);
    wd(os, b.half_width);
    wd(os, b.t_back);
    wd(os, b.lev_min);
    wd(os, b.lev_max);
    os << "\n";
    const int n = int(b.aabb.lo.size());
    os << "aabb " << n;
    for (int i = 0; i < n; ++i) wd(os, b.aabb.lo[i]);
    for (int i = 0; i < n; ++i) wd(os, b.aabb.hi[i]);
    os << "\n";
    os << "eps " << format_g17(m.eps) << "\n";
    os << "muminus";
    wd(os, m.mu_minus.lo);
    wd(os, m.mu_minus.hi);
    os << "\n";
    os << "muplus";
    wd(os, m.mu_plus.lo);
    wd(os, m.mu_plus.hi);
    os << "\n";

    os << "comps " << b.comps.size() << "\n";
    for (const BoxComponent& bc : b.comps) {
      os << "comp";
      wd(os, bc.sec.v_lo);
      wd(os, bc.sec.v_hi);
      wd(os, bc.v_in_lo);
      wd(os, bc.v_in_hi);
      os << ' ' << (bc.sec.line.closed ? 1 : 0) << ' ' << bc.sec.line.pts.size()
         << "\n";
      for (const Vec& p : bc.sec.line.pts) {
        os << "pt";
        for (int d = 0; d < p.size(); ++d) wd(os, p[d]);
        os << "\n";
      }
    }

    os << "nu1 " << m.nu1.size() << "\n";
    for (const CutoffProfile& pr : m.nu1) write_profile(os, pr);
    os << "nu2 " << m.nu2.size() << "\n";
    for (const CutoffProfile& pr : m.nu2) write_profile(os, pr);

    os << "cover " << m.cover.size() << "\n";
    for (const CoverEntry& e : m.cover) {
      os << "cov " << e.comp;
      wd(os, e.q_center);
      wd(os, e.rho);
      wd(os, e.t_witness);
      wd(os, e.c_level);
      os << "\n";
    }
  }
  os << "end\n";
}

void save_stack(const std::string& path, const StackFile& sf) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_stack: cannot open " + path);
  save_stack(out, sf);
  if (!out) throw std::runtime_error("save_stack: write failed on " + path);
}

StackFile load_stack(std::istream& is) {
  std::string magic;
  int ver = 0;
  is >> magic >> ver;
  if (magic != "clf-stack" || ver != 1)
    throw std::runtime_error("stack file: bad header");

  StackFile sf;
  expect(is, "field");
  is >> sf.field.kind;
  if (sf.field.kind == "fixture") {
    is >> sf.field.name;
  } else if (sf.field.kind == "poly") {
    is >> sf.field.n;
    expect(is, "domain");
    Vec lo(sf.field.n), hi(sf.field.n);
    for (int i = 0; i < sf.field.n; ++i) is >> lo[i];
    for (int i = 0; i < sf.field.n; ++i) is >> hi[i];
    sf.field.domain = Box(lo, hi);
    sf.field.comps.resize(std::size_t(sf.field.n));
    for (int ci = 0; ci < sf.field.n; ++ci) {
      expect(is, "fcomp");
      int idx = 0, nt = 0;
      is >> idx >> nt;
      sf.field.comps[std::size_t(ci)] = read_terms(is, nt, sf.field.n);
    }
  } else {
    throw std::runtime_error("stack file: unknown field kind '" + sf.field.kind + "'");
  }
  const int n = sf.field.kind == "fixture" ? 2 : sf.field.n;

  expect(is, "target");
  is >> sf.target.kind;
  if (sf.target.kind == "constant") {
    is >> sf.target.value;
  } else if (sf.target.kind == "poly") {
    int nt = 0;
    is >> nt;
    sf.target.poly = read_terms(is, nt, n);
  } else {
    throw std::runtime_error("stack file: unknown target kind '" + sf.target.kind + "'");
  }

  sf.K = read_region(is);

  expect(is, "base");
  is >> sf.base.kind;
  if (sf.base.kind == "fixture") {
    is >> sf.base.name;
  } else if (sf.base.kind == "collocation") {
    CollocationModel& m = sf.base.model;
    int kid = 0;
    std::size_t cnt = 0;
    is >> kid >> m.kernel.c >> m.n >> cnt >> m.max_node_residual;
    m.kernel.id = static_cast<WendlandKernel::Id>(kid);
    m.coeff.resize(int(cnt));
    for (std::size_t i = 0; i < cnt; ++i) {
      expect(is, "node");
      Vec x(m.n);
      for (int d = 0; d < m.n; ++d) is >> x[d];
      is >> m.coeff[int(i)];
      m.nodes.push_back(std::move(x));
    }
  } else {
    throw std::runtime_error("stack file: unknown base kind '" + sf.base.kind + "'");
  }

  expect(is, "reduction");
  is >> sf.uk_margin >> sf.collar >> sf.reduce_seed;
  expect(is, "scale");
  is >> sf.C;
  expect(is, "boxes");
  std::size_t nb = 0;
  is >> nb;
  sf.N = int(nb);

  for (std::size_t bi = 0; bi < nb; ++bi) {
    BoxModification m;
    expect(is, "box");
    is >> m.box.k_index >> m.box.level_r >> m.box.s_level >> m.box.half_width >>
        m.box.t_back >> m.box.lev_min >> m.box.lev_max;
    expect(is, "aabb");
    int an = 0;
    is >> an;
    Vec lo(an), hi(an);
    for (int i = 0; i < an; ++i) is >> lo[i];
    for (int i = 0; i < an; ++i) is >> hi[i];
    m.box.aabb = Box(lo, hi);
    expect(is, "eps");
    is >> m.eps;
    expect(is, "muminus");
    double a = 0, b = 0;
    is >> a >> b;
    m.mu_minus = SmoothStep(a, b);
    expect(is, "muplus");
    is >> a >> b;
    m.mu_plus = SmoothStep(a, b);

    expect(is, "comps");
    std::size_t nc = 0;
    is >> nc;
    for (std::size_t ci = 0; ci < nc; ++ci) {
      BoxComponent bc;
      expect(is, "comp");
      int closed = 0;
      std::size_t np = 0;
      is >> bc.sec.v_lo >> bc.sec.v_hi >> bc.v_in_lo >> bc.v_in_hi >> closed >> np;
      bc.sec.line.closed = closed != 0;
      for (std::size_t pi = 0; pi < np; ++pi) {
        expect(is, "pt");
        Vec p(an);
        for (int d = 0; d < an; ++d) is >> p[d];
        bc.sec.line.pts.push_back(std::move(p));
      }
      bc.sec.line.build_cum();
      m.box.comps.push_back(std::move(bc));
    }

    expect(is, "nu1");
    std::size_t n1 = 0;
    is >> n1;
    for (std::size_t i = 0; i < n1; ++i) m.nu1.push_back(read_profile(is));
    expect(is, "nu2");
    std::size_t n2 = 0;
    is >> n2;
    for (std::size_t i = 0; i < n2; ++i) m.nu2.push_back(read_profile(is));

    expect(is, "cover");
    std::size_t ncov = 0;
    is >> ncov;
    for (std::size_t i = 0; i < ncov; ++i) {
      expect(is, "cov");
      CoverEntry e;
      is >> e.comp >> e.q_center >> e.rho >> e.t_witness >> e.c_level;
      m.cover.push_back(e);
    }
    sf.mods.push_back(std::move(m));
  }
  expect(is, "end");
  if (!is) throw std::runtime_error("stack file: truncated");
  return sf;
}

StackFile load_stack(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_stack: cannot open " + path);
  return load_stack(in);
}

PrescribedResult rebuild_stack(const StackFile& sf, const FlowMapConfig& flow) {
  PrescribedResult out;
  out.X_raw = make_field(sf.field);
  const int n = out.X_raw.n;
  const ScalarField g = make_target(sf.target, n);

  RescaledField rf = rescale_complete(out.X_raw);
  out.X_hat = rf.field;
  out.f = rf.f;
  ScalarField fg;
  {
    auto fac = rf.f;
    auto ge = g.eval;
    fg.eval = [fac, ge](const Vec& p) { return fac(p) * ge(p); };
  }
  ReduceOptions ro;
  ro.uk_margin = sf.uk_margin;
  ro.collar = sf.collar;
  ro.seed = sf.reduce_seed;
  UnitReduction ur = reduce_to_unit(rf.field, fg, sf.K, ro);
  out.X_g = ur.field;
  out.ghat = ur.ghat;
  out.uk_margin = ur.uk_margin;
  out.collar = ur.collar;
  out.reduce_seed = sf.reduce_seed;

  std::shared_ptr<const LyapunovEvaluator> base;
  if (sf.base.kind == "fixture") {
    base = fixture_base(sf.base.name).tau;
  } else {
    CollocationModel m = sf.base.model;
    m.node_field.clear();
    for (const Vec& nd : m.nodes) m.node_field.push_back(out.X_raw.eval(nd));
    base = std::make_shared<CollocationLyapunov>(std::move(m), out.X_raw);
  }
  out.base = base;
  out.C = sf.C;
  out.N = sf.N;
  out.stack = std::make_shared<StackEvaluator>(base, sf.C, out.X_g, sf.mods, flow);
  out.log.push_back("rebuilt from stored stack");
  return out;
}

}  // namespace clf
