#include "clf/config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace clf {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

std::vector<double> parse_numbers(const std::string& text, const std::string& what) {
  std::vector<double> out;
  std::istringstream is(text);
  double v = 0;
  while (is >> v) out.push_back(v);
  std::string rest;
  is.clear();
  if (is >> rest) throw ConfigError(what + ": trailing junk '" + rest + "'");
  return out;
}

Box parse_box(const std::string& text, const std::string& what) {
  const std::vector<double> v = parse_numbers(text, what);
  if (v.empty() || v.size() % 2 != 0)
    throw ConfigError(what + ": need '<lo...> <hi...>' with an even number count");
  const int n = int(v.size() / 2);
  Vec lo(n), hi(n);
  for (int i = 0; i < n; ++i) {
    lo[i] = v[std::size_t(i)];
    hi[i] = v[std::size_t(i) + std::size_t(n)];
  }
  return Box(lo, hi);
}

// term table: "coeff e0 e1 [; coeff e0 e1]..."
std::vector<PolyTerm> parse_terms(const std::string& text, int n,
                                  const std::string& what) {
  std::vector<PolyTerm> terms;
  std::istringstream chunks(text);
  std::string chunk;
  while (std::getline(chunks, chunk, ';')) {
    chunk = trim(chunk);
    if (chunk.empty()) continue;
    std::istringstream is(chunk);
    PolyTerm t;
    if (!(is >> t.coeff)) throw ConfigError(what + ": bad coefficient in '" + chunk + "'");
    t.expo.resize(std::size_t(n));
    for (int d = 0; d < n; ++d)
      if (!(is >> t.expo[std::size_t(d)]))
        throw ConfigError(what + ": need " + std::to_string(n) + " exponents in '" +
                          chunk + "'");
    terms.push_back(std::move(t));
  }
  if (terms.empty()) throw ConfigError(what + ": empty term table");
  return terms;
}

}  // namespace

std::string RunConfig::get_string(const std::string& key,
                                  const std::string& fallback) const {
  const auto it = kv.find(key);
  return it == kv.end() ? fallback : it->second;
}

double RunConfig::get_double(const std::string& key, double fallback) const {
  const auto it = kv.find(key);
  if (it == kv.end()) return fallback;
  try {
    std::size_t pos = 0;
    const double v = std::stod(it->second, &pos);
    if (trim(it->second.substr(pos)).empty()) return v;
  } catch (const std::exception&) {
  }
  throw ConfigError("config key '" + key + "': not a number: '" + it->second + "'");
}

int RunConfig::get_int(const std::string& key, int fallback) const {
  const auto it = kv.find(key);
  if (it == kv.end()) return fallback;
  try {
    std::size_t pos = 0;
    const int v = std::stoi(it->second, &pos);
    if (trim(it->second.substr(pos)).empty()) return v;
  } catch (const std::exception&) {
  }
  throw ConfigError("config key '" + key + "': not an integer: '" + it->second + "'");
}

bool RunConfig::get_bool(const std::string& key, bool fallback) const {
  const auto it = kv.find(key);
  if (it == kv.end()) return fallback;
  const std::string& v = it->second;
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("config key '" + key + "': not a boolean: '" + v + "'");
}

void RunConfig::set(const std::string& key, std::string value) {
  kv[key] = trim(value);
}

void RunConfig::set_double(const std::string& key, double v) {
  kv[key] = format_g17(v);
}

void RunConfig::set_int(const std::string& key, int v) { kv[key] = std::to_string(v); }

RunConfig parse_config(std::istream& is) {
  RunConfig cfg;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto sp = line.find_first_of(" \t");
    if (sp == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) + ": key '" + line +
                        "' has no value");
    const std::string key = line.substr(0, sp);
    const std::string value = trim(line.substr(sp + 1));
    if (cfg.kv.count(key))
      throw ConfigError("config line " + std::to_string(lineno) + ": duplicate key '" +
                        key + "'");
    cfg.kv[key] = value;
  }
  return cfg;
}

RunConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  return parse_config(in);
}

std::string emit_config(const RunConfig& cfg) {
  std::ostringstream os;
  for (const auto& [k, v] : cfg.kv) os << k << ' ' << v << "\n";
  return os.str();
}

Box box_from(const RunConfig& cfg, const std::string& key, const Box& fallback) {
  if (!cfg.has(key)) return fallback;
  return parse_box(cfg.get_string(key), key);
}

FieldSpec field_spec_from(const RunConfig& cfg) {
  FieldSpec fs;
  fs.kind = cfg.get_string("system.kind", "fixture");
  if (fs.kind == "fixture") {
    fs.name = cfg.get_string("system.name");
    if (fs.name.empty()) throw ConfigError("system.name is required for a fixture field");
    return fs;
  }
  if (fs.kind != "poly")
    throw ConfigError("system.kind must be 'fixture' or 'poly', got '" + fs.kind + "'");
  fs.n = cfg.get_int("system.n", 2);
  if (fs.n < 1 || fs.n > 3) throw ConfigError("system.n must be 1, 2 or 3");
  if (!cfg.has("system.domain")) throw ConfigError("system.domain is required");
  fs.domain = parse_box(cfg.get_string("system.domain"), "system.domain");
  if (int(fs.domain.lo.size()) != fs.n)
    throw ConfigError("system.domain dimension does not match system.n");
  for (int ci = 0; ci < fs.n; ++ci) {
    const std::string key = "system.comp" + std::to_string(ci);
    if (!cfg.has(key)) throw ConfigError(key + " is required for a poly field");
    fs.comps.push_back(parse_terms(cfg.get_string(key), fs.n, key));
  }
  return fs;
}

TargetSpec target_spec_from(const RunConfig& cfg) {
  TargetSpec ts;
  ts.kind = cfg.get_string("target.kind", "constant");
  if (ts.kind == "constant") {
    ts.value = cfg.get_double("target.value", -1.0);
    return ts;
  }
  if (ts.kind != "poly")
    throw ConfigError("target.kind must be 'constant' or 'poly', got '" + ts.kind + "'");
  const int n = cfg.get_string("system.kind", "fixture") == "poly"
                    ? cfg.get_int("system.n", 2)
                    : 2;
  if (!cfg.has("target.poly")) throw ConfigError("target.poly is required");
  ts.poly = parse_terms(cfg.get_string("target.poly"), n, "target.poly");
  return ts;
}

Region region_from(const RunConfig& cfg, const std::string& prefix) {
  const std::string kind = cfg.get_string(prefix + ".kind", "empty");
  if (kind == "empty") return Region::empty();
  if (kind == "rect") {
    if (!cfg.has(prefix + ".rect")) throw ConfigError(prefix + ".rect is required");
    return Region::make_rect(parse_box(cfg.get_string(prefix + ".rect"), prefix + ".rect"));
  }
  if (kind == "annulus") {
    if (!cfg.has(prefix + ".center")) throw ConfigError(prefix + ".center is required");
    const std::vector<double> c =
        parse_numbers(cfg.get_string(prefix + ".center"), prefix + ".center");
    Vec center(int(c.size()));
    for (std::size_t i = 0; i < c.size(); ++i) center[int(i)] = c[i];
    const double r0 = cfg.get_double(prefix + ".r0", -1.0);
    const double r1 = cfg.get_double(prefix + ".r1", -1.0);
    if (!(0.0 <= r0 && r0 <= r1))
      throw ConfigError(prefix + ": need 0 <= r0 <= r1 for an annulus");
    return Region::make_annulus(center, r0, r1);
  }
  throw ConfigError(prefix + ".kind must be empty, rect or annulus, got '" + kind + "'");
}

BaseSpec base_spec_from(const RunConfig& cfg, const VectorField& X) {
  BaseSpec bs;
  bs.kind = cfg.get_string("base.kind", "fixture");
  if (bs.kind == "fixture") {
    bs.name = cfg.get_string("base.name");
    if (bs.name.empty()) throw ConfigError("base.name is required for a fixture base");
    return bs;
  }
  if (bs.kind != "collocation")
    throw ConfigError("base.kind must be 'fixture' or 'collocation', got '" + bs.kind +
                      "'");
  const std::string file = cfg.get_string("base.file");
  if (file.empty()) throw ConfigError("base.file is required for a collocation base");
  bs.model = load_collocation(file, X);
  return bs;
}

CellGrid grid_from(const RunConfig& cfg, const VectorField& X) {
  Box domain = X.domain;
  if (cfg.has("grid.domain")) domain = parse_box(cfg.get_string("grid.domain"), "grid.domain");
  const double h = cfg.get_double("grid.h", 0.05);
  if (!(h > 0.0)) throw ConfigError("grid.h must be positive");
  return CellGrid::make(domain, h);
}

FlowMapConfig flow_config_from(const RunConfig& cfg) {
  FlowMapConfig fc;
  fc.abs_tol = cfg.get_double("flow.abs_tol", fc.abs_tol);
  fc.rel_tol = cfg.get_double("flow.rel_tol", fc.rel_tol);
  fc.max_step = cfg.get_double("flow.max_step", fc.max_step);
  return fc;
}

ConstructOptions construct_options_from(const RunConfig& cfg) {
  ConstructOptions opt;
  opt.flow = flow_config_from(cfg);
  opt.cover_grid = cfg.get_int("construct.cover_grid", opt.cover_grid);
  opt.cover_extra = cfg.get_int("construct.cover_extra", opt.cover_extra);
  opt.max_levels = cfg.get_int("construct.max_levels", opt.max_levels);
  opt.v_pad = cfg.get_double("construct.v_pad", opt.v_pad);
  opt.w_margin = cfg.get_double("construct.w_margin", opt.w_margin);
  opt.trace_chord_tol = cfg.get_double("construct.trace_chord_tol", opt.trace_chord_tol);
  opt.trace_max_step = cfg.get_double("construct.trace_max_step", opt.trace_max_step);
  opt.keep_out_cells = cfg.get_double("construct.keep_out_cells", opt.keep_out_cells);
  opt.scale_margin = cfg.get_double("construct.scale_margin", opt.scale_margin);
  opt.cover_rho = cfg.get_double("construct.cover_rho", opt.cover_rho);
  opt.eps_gap = cfg.get_double("construct.eps_gap", opt.eps_gap);
  opt.seed = unsigned(cfg.get_int("seed", int(opt.seed)));
  return opt;
}

VerifyTolerances verify_tolerances_from(const RunConfig& cfg) {
  VerifyTolerances vt;
  vt.prescription = cfg.get_double("verify.prescription", vt.prescription);
  vt.prescription_colloc =
      cfg.get_double("verify.prescription_colloc", vt.prescription_colloc);
  vt.locality = cfg.get_double("verify.locality", vt.locality);
  vt.negativity = cfg.get_double("verify.negativity", vt.negativity);
  vt.fd_delta = cfg.get_double("verify.fd_delta", vt.fd_delta);
  vt.fd_agree_rel = cfg.get_double("verify.fd_agree_rel", vt.fd_agree_rel);
  vt.fd_agree_delta = cfg.get_double("verify.fd_agree_delta", vt.fd_agree_delta);
  vt.seam_delta = cfg.get_double("verify.seam_delta", vt.seam_delta);
  vt.samples = cfg.get_int("verify.samples", vt.samples);
  return vt;
}

}  // namespace clf
