// command-line driver: recurrent-cell search, construction, verification and
// grid export, wired together through a plain-text run description

#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "clf/config.hpp"

namespace fs = std::filesystem;
using namespace clf;

namespace {

struct Common {
  std::string config;
  std::string out = ".";
  long seed = -1;  // < 0: keep the config value
  int threads = 1;
};

void add_common(CLI::App* sc, Common& c) {
  sc->add_option("--config", c.config, "run description file")->required();
  sc->add_option("--out", c.out, "output directory (default: current)");
  sc->add_option("--seed", c.seed, "override the config seed");
  sc->add_option("--threads", c.threads, "worker threads for the cell graph")
      ->check(CLI::PositiveNumber);
}

std::ofstream open_out(const std::string& dir, const std::string& name) {
  fs::create_directories(dir);
  const std::string path = dir + "/" + name;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open output file " + path);
  return out;
}

RecurrentSet run_cells(const RunConfig& cfg, const VectorField& X, const CellGrid& grid,
                       int threads, TransitionGraph* graph_out = nullptr) {
  const double T = cfg.get_double("chainrec.T", 1.0);
  const double eps = cfg.get_double("chainrec.eps", 2.0 * grid.max_step());
  const int spc = cfg.get_int("chainrec.samples_per_cell", 5);
  TransitionGraph graph =
      build_transition_graph(X, grid, T, eps, spc, flow_config_from(cfg), threads);
  RecurrentSet rec = recurrent_cells(graph);
  if (graph_out) *graph_out = std::move(graph);
  return rec;
}

void write_grid(const std::string& dir, const PrescribedResult& res,
                const RunConfig& cfg) {
  if (res.X_raw.n != 2)
    throw ConfigError("grid export needs a planar system");
  const Box dom = box_from(cfg, "export.domain", res.X_raw.domain);
  const int nx = cfg.get_int("export.nx", 101);
  const int ny = cfg.get_int("export.ny", 101);
  if (nx < 2 || ny < 2) throw ConfigError("export.nx / export.ny must be at least 2");
  std::ofstream out = open_out(dir, "grid.txt");
  out << "x y tau taudot\n";
  for (int iy = 0; iy < ny; ++iy) {
    const double y = dom.lo[1] + (dom.hi[1] - dom.lo[1]) * double(iy) / double(ny - 1);
    for (int ix = 0; ix < nx; ++ix) {
      const double x =
          dom.lo[0] + (dom.hi[0] - dom.lo[0]) * double(ix) / double(nx - 1);
      const Vec p = vec2(x, y);
      out << format_g17(x) << ' ' << format_g17(y) << ' '
          << format_g17(res.stack->value(p)) << ' ' << format_g17(res.od_original(p))
          << "\n";
    }
  }
  if (!out) throw std::runtime_error("write failed on " + dir + "/grid.txt");
}

int run_chainrec(const RunConfig& cfg, const Common& c) {
  const VectorField X = make_field(field_spec_from(cfg));
  const CellGrid grid = grid_from(cfg, X);
  TransitionGraph graph;
  const RecurrentSet rec = run_cells(cfg, X, grid, c.threads, &graph);

  std::ofstream cells = open_out(c.out, "cells.txt");
  export_cells(cells, grid, rec);

  std::ostringstream log;
  log << "grid " << grid.ncells[0];
  for (int i = 1; i < grid.dim(); ++i) log << " x " << grid.ncells[i];
  log << " cells, h <= " << format_g17(grid.max_step()) << "\n";
  log << "flight time " << format_g17(graph.T) << ", inflation "
      << format_g17(graph.eps) << "\n";
  log << "recurrent cells " << rec.cells.size() << " in " << rec.components.size()
      << " component(s)\n";
  log << "recurrent diameter " << format_g17(recurrent_diameter(grid, rec)) << "\n";
  std::ofstream lf = open_out(c.out, "chainrec.log");
  lf << log.str();
  std::cout << log.str();
  return 0;
}

int run_construct(const RunConfig& cfg, const Common& c) {
  const FieldSpec fspec = field_spec_from(cfg);
  const TargetSpec tspec = target_spec_from(cfg);
  ConstructInputs in;
  in.X = make_field(fspec);
  in.g = make_target(tspec, in.X.n);
  in.K = region_from(cfg, "k");
  const BaseSpec bspec = base_spec_from(cfg, in.X);
  if (bspec.kind == "fixture")
    in.base = fixture_base(bspec.name).tau;
  else
    in.base = std::make_shared<CollocationLyapunov>(bspec.model, in.X);
  in.grid = grid_from(cfg, in.X);
  if (cfg.get_bool("chainrec.run", false)) {
    in.rec = run_cells(cfg, in.X, in.grid, c.threads);
    in.have_rec = true;
  }

  const ConstructOptions opt = construct_options_from(cfg);
  const PrescribedResult res = construct_prescribed(in, opt);

  fs::create_directories(c.out);
  save_stack(c.out + "/stack.txt", pack_stack(res, fspec, tspec, in.K, bspec));
  write_grid(c.out, res, cfg);

  std::ostringstream log;
  log << "boxes " << res.N << ", scale " << format_g17(res.C) << "\n";
  const auto& mods = res.stack->mods();
  for (std::size_t i = 0; i < mods.size(); ++i)
    log << "box " << i + 1 << ": level " << format_g17(mods[i].box.level_r)
        << ", eps " << format_g17(mods[i].eps) << "\n";
  for (const std::string& line : res.log) log << line << "\n";
  std::ofstream lf = open_out(c.out, "construct.log");
  lf << log.str();
  std::cout << log.str();
  return 0;
}

int run_verify(const RunConfig& cfg, const Common& c) {
  const std::string stack_path = cfg.get_string("io.stack", c.out + "/stack.txt");
  const StackFile sf = load_stack(stack_path);
  const PrescribedResult res = rebuild_stack(sf, flow_config_from(cfg));

  VerifyInputs vin;
  vin.result = &res;
  vin.K = sf.K;
  vin.g = make_target(sf.target, res.X_raw.n);
  vin.grid = grid_from(cfg, res.X_raw);
  if (cfg.get_bool("chainrec.run", false)) {
    vin.rec = run_cells(cfg, res.X_raw, vin.grid, c.threads);
    vin.have_rec = true;
  }

  const unsigned seed = unsigned(cfg.get_int("seed", 0));
  const VerificationReport rep = verify_report(vin, verify_tolerances_from(cfg), seed);

  std::ofstream rt = open_out(c.out, "report.txt");
  rt << rep.text();
  std::ofstream rm = open_out(c.out, "report_machine.txt");
  rm << rep.machine();
  std::cout << rep.text();
  return rep.pass ? 0 : 1;
}

int run_export_grid(const RunConfig& cfg, const Common& c) {
  const std::string stack_path = cfg.get_string("io.stack", c.out + "/stack.txt");
  const StackFile sf = load_stack(stack_path);
  const PrescribedResult res = rebuild_stack(sf, flow_config_from(cfg));
  write_grid(c.out, res, cfg);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"complete Lyapunov functions with a prescribed derivative"};
  app.require_subcommand(1);
  Common c;
  CLI::App* sc_chain = app.add_subcommand("chainrec", "locate recurrent cells");
  CLI::App* sc_con = app.add_subcommand("construct", "build the function stack");
  CLI::App* sc_ver = app.add_subcommand("verify", "check a stored construction");
  CLI::App* sc_exp = app.add_subcommand("export-grid", "sample a stored construction");
  for (CLI::App* sc : {sc_chain, sc_con, sc_ver, sc_exp}) add_common(sc, c);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    RunConfig cfg = parse_config_file(c.config);
    if (c.seed >= 0) cfg.set_int("seed", int(c.seed));
    if (sc_chain->parsed()) return run_chainrec(cfg, c);
    if (sc_con->parsed()) return run_construct(cfg, c);
    if (sc_ver->parsed()) return run_verify(cfg, c);
    return run_export_grid(cfg, c);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const ConstructionError& e) {
    std::cerr << "construction failed (" << e.stage << "): " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
