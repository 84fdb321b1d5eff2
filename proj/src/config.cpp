#include "bitesim/config.hpp"

#include <fstream>
#include <functional>
#include <istream>
#include <ostream>
#include <sstream>
#include <vector>

namespace bitesim {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

// Splits on commas and/or whitespace.
std::vector<std::string> tokens(const std::string& value) {
  std::string spaced = value;
  for (char& c : spaced) {
    if (c == ',') c = ' ';
  }
  std::istringstream ss(spaced);
  std::vector<std::string> out;
  for (std::string t; ss >> t;) out.push_back(t);
  return out;
}

double to_double(const std::string& s) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw ConfigError("expected a number, got '" + s + "'");
  }
  if (used != s.size()) throw ConfigError("expected a number, got '" + s + "'");
  return v;
}

int to_int(const std::string& s) {
  std::size_t used = 0;
  int v = 0;
  try {
    v = std::stoi(s, &used);
  } catch (const std::exception&) {
    throw ConfigError("expected an integer, got '" + s + "'");
  }
  if (used != s.size()) throw ConfigError("expected an integer, got '" + s + "'");
  return v;
}

Vec3 to_vec3(const std::string& s) {
  const auto t = tokens(s);
  if (t.size() != 3) throw ConfigError("expected three numbers, got '" + s + "'");
  return {to_double(t[0]), to_double(t[1]), to_double(t[2])};
}

bool to_bool(const std::string& s) {
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  throw ConfigError("expected a boolean, got '" + s + "'");
}

std::string vec3_text(const Vec3& v) { return fmt9(v.x()) + ", " + fmt9(v.y()) + ", " + fmt9(v.z()); }

struct Field {
  std::string section;
  std::string key;
  std::function<void(SceneConfig&, const std::string&)> set;
  std::function<std::optional<std::string>(const SceneConfig&)> get;
};

template <typename Member>
Field number(std::string section, std::string key, Member member) {
  return {std::move(section), std::move(key),
          [member](SceneConfig& c, const std::string& v) { member(c) = to_double(v); },
          [member](const SceneConfig& c) { return std::optional<std::string>(fmt9(member(const_cast<SceneConfig&>(c)))); }};
}

template <typename Member>
Field integer(std::string section, std::string key, Member member) {
  return {std::move(section), std::move(key),
          [member](SceneConfig& c, const std::string& v) { member(c) = to_int(v); },
          [member](const SceneConfig& c) {
            return std::optional<std::string>(std::to_string(member(const_cast<SceneConfig&>(c))));
          }};
}

template <typename Member>
Field vector3(std::string section, std::string key, Member member) {
  return {std::move(section), std::move(key),
          [member](SceneConfig& c, const std::string& v) { member(c) = to_vec3(v); },
          [member](const SceneConfig& c) { return std::optional<std::string>(vec3_text(member(const_cast<SceneConfig&>(c)))); }};
}

template <typename Member>
Field text(std::string section, std::string key, Member member) {
  return {std::move(section), std::move(key), [member](SceneConfig& c, const std::string& v) { member(c) = v; },
          [member](const SceneConfig& c) { return std::optional<std::string>(member(const_cast<SceneConfig&>(c))); }};
}

template <typename Member>
Field mouth_axis(std::string key, Member member) {
  return {"head", std::move(key),
          [member](SceneConfig& c, const std::string& v) {
            if (!c.head.mouth) c.head.mouth = MouthAnnotation{};
            member(*c.head.mouth) = to_vec3(v);
          },
          [member](const SceneConfig& c) -> std::optional<std::string> {
            if (!c.head.mouth) return std::nullopt;
            MouthAnnotation m = *c.head.mouth;
            return vec3_text(member(m));
          }};
}

const std::vector<Field>& fields() {
  static const std::vector<Field> all = [] {
    std::vector<Field> f;
    f.push_back(text("head", "mesh", [](SceneConfig& c) -> std::string& { return c.head.mesh_path; }));
    f.push_back(number("head", "total_mass", [](SceneConfig& c) -> double& { return c.head.total_mass; }));
    f.push_back({"head", "gravity", [](SceneConfig& c, const std::string& v) { c.head.gravity = to_bool(v); },
                 [](const SceneConfig& c) { return std::optional<std::string>(c.head.gravity ? "true" : "false"); }});
    f.push_back(vector3("head", "gravity_vector", [](SceneConfig& c) -> Vec3& { return c.head.gravity_vector; }));
    f.push_back(vector3("head", "center", [](SceneConfig& c) -> Vec3& { return c.head.proxy.center; }));
    f.push_back(vector3("head", "semi_axes", [](SceneConfig& c) -> Vec3& { return c.head.proxy.semi_axes; }));
    f.push_back({"head", "resolution",
                 [](SceneConfig& c, const std::string& v) {
                   const auto t = tokens(v);
                   if (t.size() != 3) throw ConfigError("expected three integers, got '" + v + "'");
                   c.head.proxy.lattice_resolution = {to_int(t[0]), to_int(t[1]), to_int(t[2])};
                 },
                 [](const SceneConfig& c) {
                   const auto& r = c.head.proxy.lattice_resolution;
                   return std::optional<std::string>(std::to_string(r[0]) + ", " + std::to_string(r[1]) + ", " +
                                                     std::to_string(r[2]));
                 }});
    f.push_back(vector3("head", "mouth_center", [](SceneConfig& c) -> Vec3& { return c.head.proxy.mouth_slit.center; }));
    f.push_back(number("head", "mouth_half_width", [](SceneConfig& c) -> double& { return c.head.proxy.mouth_slit.half_width; }));
    f.push_back(number("head", "mouth_half_height", [](SceneConfig& c) -> double& { return c.head.proxy.mouth_slit.half_height; }));
    f.push_back(number("head", "mouth_depth", [](SceneConfig& c) -> double& { return c.head.proxy.mouth_slit.depth; }));
    f.push_back(mouth_axis("mouth_origin", [](MouthAnnotation& m) -> Vec3& { return m.origin; }));
    f.push_back(mouth_axis("mouth_normal", [](MouthAnnotation& m) -> Vec3& { return m.normal; }));
    f.push_back(mouth_axis("mouth_up", [](MouthAnnotation& m) -> Vec3& { return m.up; }));

    f.push_back(number("material", "young_modulus", [](SceneConfig& c) -> double& { return c.material.young_modulus; }));
    f.push_back(number("material", "poisson_ratio", [](SceneConfig& c) -> double& { return c.material.poisson_ratio; }));
    f.push_back(number("material", "rayleigh_mass_damping", [](SceneConfig& c) -> double& { return c.material.rayleigh_mass_damping; }));
    f.push_back(number("material", "rayleigh_stiffness_damping",
                       [](SceneConfig& c) -> double& { return c.material.rayleigh_stiffness_damping; }));

    f.push_back(text("skull", "upper_mesh", [](SceneConfig& c) -> std::string& { return c.skull.upper_mesh_path; }));
    f.push_back(text("skull", "mandible_mesh", [](SceneConfig& c) -> std::string& { return c.skull.mandible_mesh_path; }));
    f.push_back(vector3("skull", "upper_center", [](SceneConfig& c) -> Vec3& { return c.skull.upper_center; }));
    f.push_back(vector3("skull", "upper_semi_axes", [](SceneConfig& c) -> Vec3& { return c.skull.upper_semi_axes; }));
    f.push_back(integer("skull", "shell_rings", [](SceneConfig& c) -> int& { return c.skull.shell_rings; }));
    f.push_back(integer("skull", "shell_segments", [](SceneConfig& c) -> int& { return c.skull.shell_segments; }));
    f.push_back(vector3("skull", "mandible_center", [](SceneConfig& c) -> Vec3& { return c.skull.mandible_center; }));
    f.push_back(vector3("skull", "mandible_half_extents", [](SceneConfig& c) -> Vec3& { return c.skull.mandible_half_extents; }));
    f.push_back(number("skull", "sample_spacing", [](SceneConfig& c) -> double& { return c.skull.sample_spacing; }));

    f.push_back(vector3("jaw", "pivot", [](SceneConfig& c) -> Vec3& { return c.jaw.pivot; }));
    f.push_back(vector3("jaw", "hinge_axis", [](SceneConfig& c) -> Vec3& { return c.jaw.hinge_axis; }));
    f.push_back(number("jaw", "max_open", [](SceneConfig& c) -> double& { return c.jaw.max_open; }));
    f.push_back(number("jaw", "stiffness", [](SceneConfig& c) -> double& { return c.jaw.stiffness; }));
    f.push_back(number("jaw", "damping", [](SceneConfig& c) -> double& { return c.jaw.damping; }));
    f.push_back(number("jaw", "max_torque", [](SceneConfig& c) -> double& { return c.jaw.max_torque; }));
    f.push_back(number("jaw", "inertia", [](SceneConfig& c) -> double& { return c.jaw.inertia; }));

    f.push_back(number("tendon", "stiffness", [](SceneConfig& c) -> double& { return c.tendon.stiffness; }));
    f.push_back(number("tendon", "damping", [](SceneConfig& c) -> double& { return c.tendon.damping; }));
    f.push_back(number("tendon", "slack_fraction", [](SceneConfig& c) -> double& { return c.tendon.slack_fraction; }));

    f.push_back(number("spoon", "bowl_length", [](SceneConfig& c) -> double& { return c.spoon.bowl_length; }));
    f.push_back(number("spoon", "bowl_radius", [](SceneConfig& c) -> double& { return c.spoon.bowl_radius; }));
    f.push_back(number("spoon", "handle_length", [](SceneConfig& c) -> double& { return c.spoon.handle_length; }));
    f.push_back(number("spoon", "handle_radius", [](SceneConfig& c) -> double& { return c.spoon.handle_radius; }));
    f.push_back(number("spoon", "contact_stiffness", [](SceneConfig& c) -> double& { return c.contact.stiffness; }));
    f.push_back(number("spoon", "contact_damping", [](SceneConfig& c) -> double& { return c.contact.damping; }));
    f.push_back(number("spoon", "tangential_viscosity", [](SceneConfig& c) -> double& { return c.contact.tangential_viscosity; }));

    f.push_back(number("solver", "dt", [](SceneConfig& c) -> double& { return c.dt; }));
    f.push_back(number("solver", "tolerance", [](SceneConfig& c) -> double& { return c.solver.tolerance; }));
    f.push_back(integer("solver", "max_iterations", [](SceneConfig& c) -> int& { return c.solver.max_iterations; }));

    f.push_back(number("trajectory", "entry_angle_deg", [](SceneConfig& c) -> double& { return c.trajectory.entry_angle_deg; }));
    f.push_back(number("trajectory", "insertion_depth_m", [](SceneConfig& c) -> double& { return c.trajectory.insertion_depth_m; }));
    f.push_back(number("trajectory", "exit_angle_deg", [](SceneConfig& c) -> double& { return c.trajectory.exit_angle_deg; }));
    f.push_back(number("trajectory", "exit_depth_m", [](SceneConfig& c) -> double& { return c.trajectory.exit_depth_m; }));
    f.push_back(number("trajectory", "approach_distance_m", [](SceneConfig& c) -> double& { return c.trajectory.approach_distance_m; }));
    f.push_back(number("trajectory", "entry_speed", [](SceneConfig& c) -> double& { return c.trajectory.entry_speed; }));
    f.push_back(number("trajectory", "exit_speed", [](SceneConfig& c) -> double& { return c.trajectory.exit_speed; }));
    f.push_back(number("trajectory", "rotation_speed", [](SceneConfig& c) -> double& { return c.trajectory.rotation_speed; }));
    f.push_back(number("trajectory", "jaw_close_duration", [](SceneConfig& c) -> double& { return c.trajectory.jaw_close_duration; }));
    f.push_back(number("trajectory", "hold_duration", [](SceneConfig& c) -> double& { return c.trajectory.hold_duration; }));
    f.push_back(number("trajectory", "approach_hold", [](SceneConfig& c) -> double& { return c.trajectory.approach_hold; }));
    f.push_back(vector3("trajectory", "spoon_offset", [](SceneConfig& c) -> Vec3& { return c.spoon_offset; }));
    return f;
  }();
  return all;
}

}  // namespace

void SceneConfig::validate() const {
  if (!(dt > 0.0)) throw ConfigError("solver.dt must be positive");
  if (!(head.total_mass > 0.0)) throw ConfigError("head.total_mass must be positive");
  if (!(skull.sample_spacing > 0.0)) throw ConfigError("skull.sample_spacing must be positive");
  if (!(solver.tolerance > 0.0) || solver.max_iterations < 1) throw ConfigError("invalid solver settings");
  if (!head.mesh_path.empty() && !head.mouth) {
    throw ConfigError("head.mesh requires mouth_origin, mouth_normal and mouth_up");
  }
  try {
    material.validate();
    jaw.validate();
    spoon.validate();
    contact.validate();
  } catch (const ValidationError& e) {
    throw ConfigError(e.what());
  }
}

SceneConfig parse_scene_config(std::istream& in) {
  SceneConfig config;
  std::string section;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::string where = "config line " + std::to_string(line_no) + ": ";
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(where + "malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      bool known = false;
      for (const Field& f : fields()) known = known || f.section == section;
      if (!known) throw ConfigError(where + "unknown section [" + section + "]");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + "expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const Field* field = nullptr;
    for (const Field& f : fields()) {
      if (f.section == section && f.key == key) field = &f;
    }
    if (!field) throw ConfigError(where + "unknown key '" + key + "' in section [" + section + "]");
    try {
      field->set(config, value);
    } catch (const ConfigError& e) {
      throw ConfigError(where + e.what());
    }
  }
  config.validate();
  return config;
}

SceneConfig load_scene_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  return parse_scene_config(in);
}

void write_scene_config(std::ostream& out, const SceneConfig& config) {
  std::string section;
  for (const Field& f : fields()) {
    const auto value = f.get(config);
    if (!value) continue;
    if (f.section != section) {
      if (!section.empty()) out << '\n';
      section = f.section;
      out << '[' << section << "]\n";
    }
    out << f.key << " = " << *value << '\n';
  }
}

}  // namespace bitesim
