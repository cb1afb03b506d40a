#include "config.hpp"

#include <cmath>
#include <fstream>
#include <initializer_list>
#include <limits>

#include "table_io.hpp"

namespace nvsense::cli {
namespace {

using nlohmann::json;

std::string qualify(const std::string& scope, const std::string& key) {
  return scope.empty() ? key : scope + "." + key;
}

[[noreturn]] void fail(const std::string& field, const std::string& what) {
  throw ConfigError("config: " + field + ": " + what);
}

void check_keys(const json& obj, const std::string& scope,
                std::initializer_list<const char*> allowed) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool known = false;
    for (const char* name : allowed) {
      if (it.key() == name) {
        known = true;
        break;
      }
    }
    if (!known) {
      throw ConfigError("config: unknown key '" + qualify(scope, it.key()) + "'");
    }
  }
}

const json* get_section(const json& obj, const std::string& scope, const char* key) {
  if (!obj.contains(key)) return nullptr;
  const json& node = obj.at(key);
  if (!node.is_object()) fail(qualify(scope, key), "expected an object");
  return &node;
}

void get_number(const json& obj, const std::string& scope, const char* key, double& value) {
  if (!obj.contains(key)) return;
  const json& node = obj.at(key);
  if (!node.is_number()) fail(qualify(scope, key), "expected a number");
  value = node.get<double>();
}

void get_int(const json& obj, const std::string& scope, const char* key, int& value) {
  if (!obj.contains(key)) return;
  const json& node = obj.at(key);
  if (!node.is_number_integer()) fail(qualify(scope, key), "expected an integer");
  value = node.get<int>();
}

void get_seed(const json& obj, const std::string& scope, const char* key,
              std::uint64_t& value) {
  if (!obj.contains(key)) return;
  const json& node = obj.at(key);
  if (!node.is_number_integer() || node.get<double>() < 0) {
    fail(qualify(scope, key), "expected a non-negative integer");
  }
  value = node.get<std::uint64_t>();
}

void get_string(const json& obj, const std::string& scope, const char* key,
                std::string& value) {
  if (!obj.contains(key)) return;
  const json& node = obj.at(key);
  if (!node.is_string()) fail(qualify(scope, key), "expected a string");
  value = node.get<std::string>();
}

void get_number_list(const json& obj, const std::string& scope, const char* key,
                     std::vector<double>& value) {
  if (!obj.contains(key)) return;
  const json& node = obj.at(key);
  if (!node.is_array()) fail(qualify(scope, key), "expected an array of numbers");
  std::vector<double> parsed;
  for (const auto& item : node) {
    if (!item.is_number()) fail(qualify(scope, key), "expected an array of numbers");
    parsed.push_back(item.get<double>());
  }
  value = std::move(parsed);
}

Eigen::Vector3d parse_vec3(const json& node, const std::string& field) {
  if (!node.is_array() || node.size() != 3) fail(field, "expected an array of 3 numbers");
  Eigen::Vector3d v;
  for (int i = 0; i < 3; ++i) {
    if (!node[i].is_number()) fail(field, "expected an array of 3 numbers");
    v[i] = node[i].get<double>();
  }
  return v;
}

void parse_constants(const json& node, const std::string& scope, Constants& constants) {
  check_keys(node, scope, {"delta_ghz", "gyromagnetic_ghz_per_mt", "g_factor", "b_zfs_mt"});
  int exclusive = node.contains("gyromagnetic_ghz_per_mt") + node.contains("g_factor") +
                  node.contains("b_zfs_mt");
  if (exclusive > 1) {
    fail(scope, "give at most one of gyromagnetic_ghz_per_mt, g_factor, b_zfs_mt");
  }
  get_number(node, scope, "delta_ghz", constants.delta_ghz);
  if (node.contains("gyromagnetic_ghz_per_mt")) {
    get_number(node, scope, "gyromagnetic_ghz_per_mt", constants.gyromagnetic_ghz_per_mt);
  } else if (node.contains("g_factor")) {
    double g = 0.0;
    get_number(node, scope, "g_factor", g);
    constants = Constants::from_g_factor(constants.delta_ghz, g);
  } else if (node.contains("b_zfs_mt")) {
    double b = 0.0;
    get_number(node, scope, "b_zfs_mt", b);
    constants = Constants::from_b_zfs(constants.delta_ghz, b);
  }
  try {
    constants.validate();
  } catch (const std::exception& e) {
    fail(scope, e.what());
  }
}

void parse_orientation(const json& node, const std::string& scope,
                       CrystalOrientation& orientation) {
  check_keys(node, scope, {"matrix", "axis", "angle_rad", "align_axis_to"});
  const bool has_matrix = node.contains("matrix");
  const bool has_axis_angle = node.contains("axis") || node.contains("angle_rad");
  const bool has_align = node.contains("align_axis_to");
  if (has_matrix + has_axis_angle + has_align != 1) {
    fail(scope, "give exactly one of matrix, axis+angle_rad, align_axis_to");
  }
  if (has_matrix) {
    const json& m = node.at("matrix");
    if (!m.is_array() || m.size() != 3) {
      fail(qualify(scope, "matrix"), "expected 3 rows of 3 numbers");
    }
    for (int r = 0; r < 3; ++r) {
      orientation.rotation.row(r) = parse_vec3(m[r], qualify(scope, "matrix")).transpose();
    }
    try {
      orientation.validate(1e-6);
    } catch (const std::exception& e) {
      fail(qualify(scope, "matrix"), e.what());
    }
    return;
  }
  if (has_axis_angle) {
    if (!node.contains("axis") || !node.contains("angle_rad")) {
      fail(scope, "axis and angle_rad must be given together");
    }
    Eigen::Vector3d axis = parse_vec3(node.at("axis"), qualify(scope, "axis"));
    double angle = 0.0;
    get_number(node, scope, "angle_rad", angle);
    try {
      orientation = CrystalOrientation::from_axis_angle(axis, angle);
    } catch (const std::exception& e) {
      fail(scope, e.what());
    }
    return;
  }
  // Rotate the canonical (1,1,1) axis onto the requested lab direction; the
  // other three axes follow rigidly.
  const json& target = node.at("align_axis_to");
  if (!target.is_object()) fail(qualify(scope, "align_axis_to"), "expected an object");
  check_keys(target, qualify(scope, "align_axis_to"), {"phi_rad", "big_theta_rad"});
  SphericalDirection dir;
  get_number(target, qualify(scope, "align_axis_to"), "phi_rad", dir.phi_rad);
  get_number(target, qualify(scope, "align_axis_to"), "big_theta_rad", dir.big_theta_rad);
  const Eigen::Vector3d canonical = Eigen::Vector3d(1, 1, 1).normalized();
  orientation.rotation =
      Eigen::Quaterniond::FromTwoVectors(canonical, dir.unit()).toRotationMatrix();
}

void parse_sample(const json& node, const std::string& scope, VirtualSample& sample) {
  check_keys(node, scope, {"orientation", "strain_ghz", "line", "noise_sigma", "seed"});
  if (const json* orient = get_section(node, scope, "orientation")) {
    parse_orientation(*orient, qualify(scope, "orientation"), sample.orientation);
  }
  get_number(node, scope, "strain_ghz", sample.strain_ghz);
  if (const json* line = get_section(node, scope, "line")) {
    const std::string line_scope = qualify(scope, "line");
    check_keys(*line, line_scope, {"width_ghz", "contrast", "baseline"});
    get_number(*line, line_scope, "width_ghz", sample.line.width_ghz);
    get_number(*line, line_scope, "contrast", sample.line.base_contrast);
    get_number(*line, line_scope, "baseline", sample.line.baseline);
  }
  get_number(node, scope, "noise_sigma", sample.noise_sigma);
  get_seed(node, scope, "seed", sample.seed);
}

json matrix_json(const Eigen::Matrix3d& m) {
  json rows = json::array();
  for (int r = 0; r < 3; ++r) {
    rows.push_back(json::array({m(r, 0), m(r, 1), m(r, 2)}));
  }
  return rows;
}

json optional_number(double value) {
  if (std::isnan(value)) return nullptr;
  return value;
}

}  // namespace

void apply_config_json(RunConfig& config, const json& doc) {
  if (!doc.is_object()) throw ConfigError("config: top level must be an object");
  check_keys(doc, "",
             {"constants", "sample", "region", "sweep", "locate", "refine", "sensitivity",
              "synth", "fit", "output", "threads"});

  if (const json* node = get_section(doc, "", "constants")) {
    parse_constants(*node, "constants", config.sample.constants);
  }
  if (const json* node = get_section(doc, "", "sample")) {
    parse_sample(*node, "sample", config.sample);
  }
  if (const json* node = get_section(doc, "", "region")) {
    check_keys(*node, "region", {"max_xy_mt", "max_z_mt"});
    get_number(*node, "region", "max_xy_mt", config.sample.region.max_xy_mt);
    get_number(*node, "region", "max_z_mt", config.sample.region.max_z_mt);
  }
  if (const json* node = get_section(doc, "", "sweep")) {
    check_keys(*node, "sweep", {"b_mt", "n_phi", "n_theta", "k_max"});
    get_number(*node, "sweep", "b_mt", config.sweep.b_mt);
    get_int(*node, "sweep", "n_phi", config.sweep.n_phi);
    get_int(*node, "sweep", "n_theta", config.sweep.n_theta);
    get_int(*node, "sweep", "k_max", config.sweep.k_max);
  }
  if (const json* node = get_section(doc, "", "locate")) {
    check_keys(*node, "locate",
               {"min_shift_fraction", "min_depth_fraction", "suppression_radius_rad",
                "band_fraction"});
    get_number(*node, "locate", "min_shift_fraction", config.locate.min_shift_fraction);
    get_number(*node, "locate", "min_depth_fraction", config.locate.min_depth_fraction);
    get_number(*node, "locate", "suppression_radius_rad",
               config.locate.suppression_radius_rad);
    get_number(*node, "locate", "band_fraction", config.locate.band_fraction);
  }
  if (const json* node = get_section(doc, "", "refine")) {
    check_keys(*node, "refine",
               {"schedule_mt", "grid_n", "shrink", "min_window_rad", "spread_band_ghz"});
    get_number_list(*node, "refine", "schedule_mt", config.schedule_mt);
    get_int(*node, "refine", "grid_n", config.refine.grid_n);
    get_number(*node, "refine", "shrink", config.refine.window_shrink);
    get_number(*node, "refine", "min_window_rad", config.refine.min_window_rad);
    get_number(*node, "refine", "spread_band_ghz", config.refine.spread_band_ghz);
  }
  if (const json* node = get_section(doc, "", "sensitivity")) {
    check_keys(*node, "sensitivity",
               {"fields_mt", "span_fraction", "max_span_rad", "n_theta", "spacing_ghz",
                "axis_phi_rad", "axis_big_theta_rad"});
    get_number_list(*node, "sensitivity", "fields_mt", config.sensitivity_fields_mt);
    get_number(*node, "sensitivity", "span_fraction", config.sensitivity.span_fraction);
    get_number(*node, "sensitivity", "max_span_rad", config.sensitivity.max_span_rad);
    get_int(*node, "sensitivity", "n_theta", config.sensitivity.n_theta);
    get_number(*node, "sensitivity", "spacing_ghz", config.sensitivity.spacing_ghz);
    get_number(*node, "sensitivity", "axis_phi_rad", config.axis_phi_rad);
    get_number(*node, "sensitivity", "axis_big_theta_rad", config.axis_big_theta_rad);
  }
  if (const json* node = get_section(doc, "", "synth")) {
    check_keys(*node, "synth", {"f_start_ghz", "f_stop_ghz", "n_points", "spacing_ghz"});
    get_number(*node, "synth", "f_start_ghz", config.synth.f_start_ghz);
    get_number(*node, "synth", "f_stop_ghz", config.synth.f_stop_ghz);
    get_int(*node, "synth", "n_points", config.synth.n_points);
    get_number(*node, "synth", "spacing_ghz", config.synth.spacing_ghz);
  }
  if (const json* node = get_section(doc, "", "fit")) {
    check_keys(*node, "fit", {"min_prominence"});
    get_number(*node, "fit", "min_prominence", config.min_prominence);
  }
  if (const json* node = get_section(doc, "", "output")) {
    check_keys(*node, "output", {"dir", "format"});
    get_string(*node, "output", "dir", config.out_dir);
    get_string(*node, "output", "format", config.format);
  }
  get_int(doc, "", "threads", config.threads);
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("config: cannot open '" + path + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config: '" + path + "': " + e.what());
  }
  RunConfig config;
  apply_config_json(config, doc);
  return config;
}

json effective_config(const RunConfig& config) {
  const VirtualSample& s = config.sample;
  json doc;
  doc["constants"] = {{"delta_ghz", s.constants.delta_ghz},
                      {"gyromagnetic_ghz_per_mt", s.constants.gyromagnetic_ghz_per_mt}};
  doc["sample"] = {{"orientation", {{"matrix", matrix_json(s.orientation.rotation)}}},
                   {"strain_ghz", s.strain_ghz},
                   {"line",
                    {{"width_ghz", s.line.width_ghz},
                     {"contrast", s.line.base_contrast},
                     {"baseline", s.line.baseline}}},
                   {"noise_sigma", s.noise_sigma},
                   {"seed", s.seed}};
  doc["region"] = {{"max_xy_mt", s.region.max_xy_mt}, {"max_z_mt", s.region.max_z_mt}};
  doc["sweep"] = {{"b_mt", config.sweep.b_mt},
                  {"n_phi", config.sweep.n_phi},
                  {"n_theta", config.sweep.n_theta},
                  {"k_max", config.sweep.k_max}};
  doc["locate"] = {{"min_shift_fraction", config.locate.min_shift_fraction},
                   {"min_depth_fraction", config.locate.min_depth_fraction},
                   {"suppression_radius_rad", config.locate.suppression_radius_rad},
                   {"band_fraction", config.locate.band_fraction}};
  doc["refine"] = {{"schedule_mt", config.schedule_mt},
                   {"grid_n", config.refine.grid_n},
                   {"shrink", config.refine.window_shrink},
                   {"min_window_rad", config.refine.min_window_rad},
                   {"spread_band_ghz", config.refine.spread_band_ghz}};
  doc["sensitivity"] = {{"fields_mt", config.sensitivity_fields_mt},
                        {"span_fraction", config.sensitivity.span_fraction},
                        {"max_span_rad", config.sensitivity.max_span_rad},
                        {"n_theta", config.sensitivity.n_theta},
                        {"spacing_ghz", config.sensitivity.spacing_ghz},
                        {"axis_phi_rad", optional_number(config.axis_phi_rad)},
                        {"axis_big_theta_rad", optional_number(config.axis_big_theta_rad)}};
  doc["synth"] = {{"f_start_ghz", optional_number(config.synth.f_start_ghz)},
                  {"f_stop_ghz", optional_number(config.synth.f_stop_ghz)},
                  {"n_points", config.synth.n_points},
                  {"spacing_ghz", config.synth.spacing_ghz}};
  doc["fit"] = {{"min_prominence", config.min_prominence}};
  doc["output"] = {{"dir", config.out_dir}, {"format", config.format}};
  doc["threads"] = config.threads;
  return doc;
}

// Output location, format, and thread count do not influence any data byte,
// so they stay out of the hash: runs that differ only in plumbing share it.
std::string config_hash(const RunConfig& config) {
  json doc = effective_config(config);
  doc.erase("output");
  doc.erase("threads");
  return hash_hex(fnv1a64(doc.dump()));
}

void validate(const RunConfig& config) {
  const auto positive = [](double v, const char* field) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      fail(field, "expected a positive finite number");
    }
  };
  try {
    config.sample.constants.validate();
    config.sample.orientation.validate(1e-6);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  if (config.sample.strain_ghz < 0.0 || !std::isfinite(config.sample.strain_ghz)) {
    fail("sample.strain_ghz", "expected a non-negative finite number");
  }
  positive(config.sample.line.width_ghz, "sample.line.width_ghz");
  positive(config.sample.line.base_contrast, "sample.line.contrast");
  positive(config.sample.line.baseline, "sample.line.baseline");
  if (config.sample.noise_sigma < 0.0 || !std::isfinite(config.sample.noise_sigma)) {
    fail("sample.noise_sigma", "expected a non-negative finite number");
  }
  positive(config.sample.region.max_xy_mt, "region.max_xy_mt");
  positive(config.sample.region.max_z_mt, "region.max_z_mt");
  positive(config.sweep.b_mt, "sweep.b_mt");
  if (config.sweep.n_phi < 2 || config.sweep.n_theta < 2) {
    fail("sweep", "grid needs at least 2 points per dimension");
  }
  if (config.sweep.k_max < 1) fail("sweep.k_max", "expected at least 1");
  if (config.refine.grid_n < 3) fail("refine.grid_n", "expected at least 3");
  positive(config.refine.window_shrink, "refine.shrink");
  positive(config.sensitivity.span_fraction, "sensitivity.span_fraction");
  positive(config.sensitivity.max_span_rad, "sensitivity.max_span_rad");
  if (config.sensitivity.n_theta < 5) fail("sensitivity.n_theta", "expected at least 5");
  positive(config.sensitivity.spacing_ghz, "sensitivity.spacing_ghz");
  positive(config.synth.spacing_ghz, "synth.spacing_ghz");
  if (config.min_prominence <= 0.0 || config.min_prominence >= 1.0) {
    fail("fit.min_prominence", "expected a value in (0, 1)");
  }
  if (config.format != "tsv" && config.format != "records") {
    fail("output.format", "expected 'tsv' or 'records'");
  }
  if (config.threads < 1) fail("threads", "expected at least 1");
  if (std::isnan(config.axis_phi_rad) != std::isnan(config.axis_big_theta_rad)) {
    fail("sensitivity", "axis_phi_rad and axis_big_theta_rad must be given together");
  }
}

}  // namespace nvsense::cli
