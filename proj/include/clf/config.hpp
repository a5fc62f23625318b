#pragma once

#include <iosfwd>
#include <map>
#include <string>

#include "clf/chainrec.hpp"
#include "clf/serialize.hpp"
#include "clf/verify.hpp"

namespace clf {

// thrown for malformed or incomplete run descriptions
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// flat "key value" run description with dotted section names; values keep
// their (trimmed) source text, so emit -> parse -> emit is the identity
struct RunConfig {
  std::map<std::string, std::string> kv;

  bool has(const std::string& key) const { return kv.count(key) != 0; }
  std::string get_string(const std::string& key, const std::string& fallback = "") const;
  double get_double(const std::string& key, double fallback) const;
  int get_int(const std::string& key, int fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;

  void set(const std::string& key, std::string value);
  void set_double(const std::string& key, double v);
  void set_int(const std::string& key, int v);

  bool operator==(const RunConfig& other) const { return kv == other.kv; }
};

RunConfig parse_config(std::istream& is);
RunConfig parse_config_file(const std::string& path);
std::string emit_config(const RunConfig& cfg);

// bridges from flat keys to the typed pipeline inputs
Box box_from(const RunConfig& cfg, const std::string& key, const Box& fallback);
FieldSpec field_spec_from(const RunConfig& cfg);
TargetSpec target_spec_from(const RunConfig& cfg);
Region region_from(const RunConfig& cfg, const std::string& prefix);
BaseSpec base_spec_from(const RunConfig& cfg, const VectorField& X);
CellGrid grid_from(const RunConfig& cfg, const VectorField& X);
FlowMapConfig flow_config_from(const RunConfig& cfg);
ConstructOptions construct_options_from(const RunConfig& cfg);
VerifyTolerances verify_tolerances_from(const RunConfig& cfg);

}  // namespace clf
