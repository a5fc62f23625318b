#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "clf/baselyap.hpp"
#include "clf/construct.hpp"

namespace clf {

// declarative description of a vector field, rich enough to rebuild it
struct FieldSpec {
  std::string kind = "fixture";  // fixture | poly
  std::string name;              // fixture name
  int n = 2;                     // poly: ambient dimension
  Box domain;                    // poly: working box
  std::vector<std::vector<PolyTerm>> comps;  // poly: one term list per axis
};
VectorField make_field(const FieldSpec& spec);

// prescribed derivative on the target set
struct TargetSpec {
  std::string kind = "constant";  // constant | poly
  double value = -1.0;
  std::vector<PolyTerm> poly;
};
ScalarField make_target(const TargetSpec& spec, int n);

// base function: a catalogued closed form or an embedded meshfree model
struct BaseSpec {
  std::string kind = "fixture";  // fixture | collocation
  std::string name;
  CollocationModel model;  // node_field is rebuilt from the field on load
};

// everything needed to reconstruct the final function without re-running
// the construction
struct StackFile {
  FieldSpec field;
  TargetSpec target;
  Region K;
  BaseSpec base;
  double C = 1.0;
  int N = 0;
  double uk_margin = 0.0;
  double collar = 0.0;
  unsigned reduce_seed = 0;
  std::vector<BoxModification> mods;
};

StackFile pack_stack(const PrescribedResult& result, const FieldSpec& field,
                     const TargetSpec& target, const Region& K, const BaseSpec& base);

void save_stack(std::ostream& os, const StackFile& sf);
void save_stack(const std::string& path, const StackFile& sf);
StackFile load_stack(std::istream& is);
StackFile load_stack(const std::string& path);

// reassemble a working evaluator (field, reduction, base, stack) from a file
PrescribedResult rebuild_stack(const StackFile& sf, const FlowMapConfig& flow = {});

// region <-> token helpers shared with the config layer
void write_region(std::ostream& os, const Region& r);
Region read_region(std::istream& is);

}  // namespace clf
