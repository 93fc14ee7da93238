#include "core/scenario.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace rhombot {

using nlohmann::json;

namespace {

constexpr const char* kScenarioFormat = "rhombot-scenario";
constexpr const char* kScriptFormat = "rhombot-script";

std::string child_path(const std::string& parent, const std::string& key) { return parent + "/" + key; }
std::string child_path(const std::string& parent, std::size_t index) { return parent + "/" + std::to_string(index); }

[[noreturn]] void schema_error(const std::string& path, const std::string& what) {
  throw Error(ErrorCode::Parse, (path.empty() ? std::string("/") : path) + ": " + what);
}

json parse_json(const std::string& text) {
  try {
    return json::parse(text, nullptr, true, true);
  } catch (const json::parse_error& e) {
    // nlohmann reports "parse error at line L, column C: ..."
    std::string msg = e.what();
    const auto pos = msg.find("parse error");
    throw Error(ErrorCode::Parse, pos == std::string::npos ? msg : msg.substr(pos));
  }
}

// Checked field access over a JSON object; unknown keys are reported by check_keys.
class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) schema_error(path_, "expected an object");
  }

  void check_keys(std::initializer_list<const char*> allowed) const {
    for (const auto& [key, value] : j_.items()) {
      bool known = false;
      for (const char* a : allowed) known = known || key == a;
      if (!known) schema_error(child_path(path_, key), "unknown field");
    }
  }

  bool has(const char* key) const { return j_.contains(key); }
  const json& raw(const char* key) const {
    if (!j_.contains(key)) schema_error(child_path(path_, key), "missing required field");
    return j_.at(key);
  }
  std::string path(const char* key) const { return child_path(path_, key); }

  double number(const char* key) const {
    const json& v = raw(key);
    if (!v.is_number()) schema_error(path(key), "expected a number");
    return v.get<double>();
  }
  double number(const char* key, double fallback) const { return has(key) ? number(key) : fallback; }

  int integer(const char* key) const {
    const json& v = raw(key);
    if (!v.is_number_integer()) schema_error(path(key), "expected an integer");
    return v.get<int>();
  }
  int integer(const char* key, int fallback) const { return has(key) ? integer(key) : fallback; }

  bool boolean(const char* key, bool fallback) const {
    if (!has(key)) return fallback;
    const json& v = raw(key);
    if (!v.is_boolean()) schema_error(path(key), "expected true or false");
    return v.get<bool>();
  }

  std::string string(const char* key, const std::string& fallback) const {
    if (!has(key)) return fallback;
    const json& v = raw(key);
    if (!v.is_string()) schema_error(path(key), "expected a string");
    return v.get<std::string>();
  }

  const json& array(const char* key) const {
    const json& v = raw(key);
    if (!v.is_array()) schema_error(path(key), "expected an array");
    return v;
  }

 private:
  const json& j_;
  std::string path_;
};

void check_header(const Reader& r, const char* format) {
  if (r.string("format", "") != format) schema_error(r.path("format"), std::string("expected \"") + format + "\"");
  const int version = r.integer("version");
  if (version != kScenarioVersion) {
    schema_error(r.path("version"), "unsupported version " + std::to_string(version));
  }
}

Connection read_connection(const json& j, const std::string& path) {
  Reader r(j, path);
  r.check_keys({"a", "port_a", "b", "port_b"});
  return {r.integer("a"), r.integer("port_a"), r.integer("b"), r.integer("port_b"), ConnectionKind::Loop};
}

json write_connection(const Connection& c) {
  return json{{"a", c.module_a}, {"port_a", c.port_a}, {"b", c.module_b}, {"port_b", c.port_b}};
}

std::vector<MorphTarget> read_targets(const json& arr, const std::string& path) {
  std::vector<MorphTarget> out;
  for (std::size_t i = 0; i < arr.size(); ++i) {
    Reader r(arr[i], child_path(path, i));
    r.check_keys({"module", "theta_deg", "order"});
    out.push_back({r.integer("module"), deg2rad(r.number("theta_deg")), r.integer("order", static_cast<int>(i))});
  }
  return out;
}

json write_targets(const std::vector<MorphTarget>& targets) {
  json arr = json::array();
  for (const MorphTarget& t : targets) {
    arr.push_back({{"module", t.module}, {"theta_deg", rad2deg(t.theta)}, {"order", t.order}});
  }
  return arr;
}

MorphPivotOp read_op(const json& j, const std::string& path) {
  Reader o(j, path);
  o.check_keys({"connect", "disconnect", "pre_morph", "align", "align_equal", "post_morph", "morph_rate"});
  MorphPivotOp op;
  op.new_con = read_connection(o.raw("connect"), o.path("connect"));
  op.new_discon = read_connection(o.raw("disconnect"), o.path("disconnect"));
  if (o.has("pre_morph")) op.pre_morph = read_targets(o.array("pre_morph"), o.path("pre_morph"));
  if (o.has("post_morph")) op.post_morph = read_targets(o.array("post_morph"), o.path("post_morph"));
  if (o.has("align")) {
    const json& arr = o.array("align");
    for (std::size_t k = 0; k < arr.size(); ++k) {
      if (!arr[k].is_number_integer()) schema_error(child_path(o.path("align"), k), "expected a module id");
      op.align.push_back(arr[k].get<int>());
    }
  }
  op.align_equal = o.boolean("align_equal", false);
  if (!op.align.empty() && !op.pre_morph.empty()) schema_error(path, "pre_morph and align are mutually exclusive");
  if (o.has("morph_rate")) {
    op.morph_rate = o.number("morph_rate");
    if (!(*op.morph_rate > 0)) schema_error(o.path("morph_rate"), "must be positive");
  }
  return op;
}

json write_op(const MorphPivotOp& op) {
  json o;
  o["connect"] = write_connection(op.new_con);
  o["disconnect"] = write_connection(op.new_discon);
  if (!op.pre_morph.empty()) o["pre_morph"] = write_targets(op.pre_morph);
  if (!op.align.empty()) {
    o["align"] = op.align;
    o["align_equal"] = op.align_equal;
  }
  if (!op.post_morph.empty()) o["post_morph"] = write_targets(op.post_morph);
  if (op.morph_rate) o["morph_rate"] = *op.morph_rate;
  return o;
}

std::string mname(ModuleId id) { return "M" + std::to_string(id); }

}  // namespace

ModuleParams ScenarioModule::params() const {
  return {a, deg2rad(theta_min_deg), deg2rad(theta_max_deg)};
}

ScenarioDoc parse_scenario(const std::string& text) {
  const json j = parse_json(text);
  Reader r(j, "");
  r.check_keys({"format", "version", "name", "root", "base", "defaults", "modules", "connections"});
  check_header(r, kScenarioFormat);

  ScenarioDoc doc;
  doc.name = r.string("name", "");
  doc.root = r.integer("root");
  if (r.has("base")) {
    Reader b(r.raw("base"), r.path("base"));
    b.check_keys({"x", "y", "yaw_deg"});
    doc.base = {b.number("x", 0.0), b.number("y", 0.0), b.number("yaw_deg", 0.0)};
  }
  if (r.has("defaults")) {
    Reader d(r.raw("defaults"), r.path("defaults"));
    d.check_keys({"pos_tol", "ang_tol_deg", "morph_rate", "dt", "clearance", "sequential"});
    const ScenarioDefaults def;
    doc.defaults = {d.number("pos_tol", def.pos_tol),     d.number("ang_tol_deg", def.ang_tol_deg),
                    d.number("morph_rate", def.morph_rate), d.number("dt", def.dt),
                    d.number("clearance", def.clearance),   d.boolean("sequential", def.sequential)};
  }
  const json& mods = r.array("modules");
  for (std::size_t i = 0; i < mods.size(); ++i) {
    Reader m(mods[i], child_path(r.path("modules"), i));
    m.check_keys({"id", "theta_deg", "a", "theta_min_deg", "theta_max_deg"});
    const ScenarioModule def;
    doc.modules.push_back({m.integer("id"), m.number("theta_deg", def.theta_deg), m.number("a", def.a),
                           m.number("theta_min_deg", def.theta_min_deg), m.number("theta_max_deg", def.theta_max_deg)});
  }
  if (r.has("connections")) {
    const json& cons = r.array("connections");
    for (std::size_t i = 0; i < cons.size(); ++i) {
      Reader c(cons[i], child_path(r.path("connections"), i));
      c.check_keys({"a", "port_a", "b", "port_b", "tree"});
      doc.connections.push_back(
          {c.integer("a"), c.integer("port_a"), c.integer("b"), c.integer("port_b"), c.boolean("tree", false)});
    }
  }
  return doc;
}

std::string serialize_scenario(const ScenarioDoc& doc) {
  json j;
  j["format"] = kScenarioFormat;
  j["version"] = doc.version;
  if (!doc.name.empty()) j["name"] = doc.name;
  j["root"] = doc.root;
  j["base"] = {{"x", doc.base.x}, {"y", doc.base.y}, {"yaw_deg", doc.base.yaw_deg}};
  const ScenarioDefaults& d = doc.defaults;
  j["defaults"] = {{"pos_tol", d.pos_tol},     {"ang_tol_deg", d.ang_tol_deg}, {"morph_rate", d.morph_rate},
                   {"dt", d.dt},               {"clearance", d.clearance},     {"sequential", d.sequential}};
  json mods = json::array();
  for (const ScenarioModule& m : doc.modules) {
    mods.push_back({{"id", m.id},
                    {"theta_deg", m.theta_deg},
                    {"a", m.a},
                    {"theta_min_deg", m.theta_min_deg},
                    {"theta_max_deg", m.theta_max_deg}});
  }
  j["modules"] = mods;
  json cons = json::array();
  for (const ScenarioConnection& c : doc.connections) {
    json e{{"a", c.a}, {"port_a", c.port_a}, {"b", c.b}, {"port_b", c.port_b}};
    if (c.tree) e["tree"] = true;
    cons.push_back(e);
  }
  j["connections"] = cons;
  return j.dump(2) + "\n";
}

std::vector<Diagnostic> validate_scenario(const ScenarioDoc& doc) {
  std::vector<Diagnostic> out;
  std::set<ModuleId> ids;
  for (std::size_t i = 0; i < doc.modules.size(); ++i) {
    const ScenarioModule& m = doc.modules[i];
    const std::string path = "/modules/" + std::to_string(i);
    if (!ids.insert(m.id).second) out.push_back({path + "/id", "duplicate module id " + mname(m.id)});
    try {
      m.params().validate();
    } catch (const Error& e) {
      out.push_back({path, mname(m.id) + ": " + e.what()});
      continue;
    }
    if (m.theta_deg < m.theta_min_deg || m.theta_deg > m.theta_max_deg) {
      std::ostringstream os;
      os << mname(m.id) << ": folding angle " << m.theta_deg << " deg outside limits [" << m.theta_min_deg << ", "
         << m.theta_max_deg << "]";
      out.push_back({path + "/theta_deg", os.str()});
    }
  }
  if (doc.modules.empty()) out.push_back({"/modules", "scenario has no modules"});
  if (!ids.contains(doc.root)) out.push_back({"/root", "root " + mname(doc.root) + " is not a defined module"});

  std::set<std::pair<ModuleId, int>> used;
  for (std::size_t i = 0; i < doc.connections.size(); ++i) {
    const ScenarioConnection& c = doc.connections[i];
    const std::string path = "/connections/" + std::to_string(i);
    for (auto [m, key] : {std::pair{c.a, "/a"}, std::pair{c.b, "/b"}}) {
      if (!ids.contains(m)) out.push_back({path + key, "dangling reference to undefined module " + mname(m)});
    }
    for (auto [p, key] : {std::pair{c.port_a, "/port_a"}, std::pair{c.port_b, "/port_b"}}) {
      if (p < 0 || p > 3) out.push_back({path + key, "port " + std::to_string(p) + " outside 0..3"});
    }
    if (c.a == c.b) out.push_back({path, "connection joins " + mname(c.a) + " to itself"});
    for (auto [m, p] : {std::pair{c.a, c.port_a}, std::pair{c.b, c.port_b}}) {
      if (!used.insert({m, p}).second) {
        out.push_back({path, "duplicate edge use: " + mname(m) + " port " + std::to_string(p)});
      }
    }
  }
  const ScenarioDefaults& d = doc.defaults;
  if (!(d.pos_tol > 0)) out.push_back({"/defaults/pos_tol", "must be positive"});
  if (!(d.ang_tol_deg > 0)) out.push_back({"/defaults/ang_tol_deg", "must be positive"});
  if (!(d.morph_rate > 0)) out.push_back({"/defaults/morph_rate", "must be positive"});
  if (!(d.dt > 0)) out.push_back({"/defaults/dt", "must be positive"});
  if (!(d.clearance >= 0)) out.push_back({"/defaults/clearance", "must not be negative"});
  if (!out.empty()) return out;

  try {
    const KTree tree = build_tree(doc);
    for (const std::string& p : check_invariants(tree)) out.push_back({"", p});
  } catch (const Error& e) {
    out.push_back({"/connections", e.what()});
  }
  return out;
}

KTree build_tree(const ScenarioDoc& doc) {
  std::vector<ModuleState> mods;
  for (const ScenarioModule& m : doc.modules) {
    mods.push_back(ModuleState::from_theta(m.id, deg2rad(m.theta_deg), 0, m.params()));
  }
  std::vector<Connection> cons;
  bool declared = false;
  for (const ScenarioConnection& c : doc.connections) {
    cons.push_back({c.a, c.port_a, c.b, c.port_b, c.tree ? ConnectionKind::Tree : ConnectionKind::Loop});
    declared = declared || c.tree;
  }
  const EngineOptions o = engine_options(doc);
  return initialize_ktree(mods, cons, doc.root, Pose2(deg2rad(doc.base.yaw_deg), doc.base.x, doc.base.y), o.tol,
                          declared ? TreeMode::Declared : TreeMode::Bfs);
}

EngineOptions engine_options(const ScenarioDoc& doc) { return engine_options(doc.defaults); }

EngineOptions engine_options(const ScenarioDefaults& d) {
  EngineOptions o;
  o.tol.position = d.pos_tol;
  o.tol.angle = deg2rad(d.ang_tol_deg);
  o.morph_rate = d.morph_rate;
  o.dt = d.dt;
  o.clearance = d.clearance;
  o.sequential = d.sequential;
  return o;
}

ScenarioDoc scenario_from_tree(const KTree& tree, const ScenarioDefaults& defaults, const std::string& name) {
  ScenarioDoc doc;
  doc.name = name;
  doc.root = tree.root;
  doc.base = {tree.base.x, tree.base.y, rad2deg(tree.base.yaw)};
  doc.defaults = defaults;
  for (const auto& [id, s] : tree.modules) {
    doc.modules.push_back(
        {id, rad2deg(s.theta()), s.params.a, rad2deg(s.params.theta_min), rad2deg(s.params.theta_max)});
  }
  for (const Connection& c : tree.connections()) {
    doc.connections.push_back({c.module_a, c.port_a, c.module_b, c.port_b, c.kind == ConnectionKind::Tree});
  }
  return doc;
}

ScriptDoc parse_script(const std::string& text) {
  const json j = parse_json(text);
  Reader r(j, "");
  r.check_keys({"format", "version", "name", "ops"});
  check_header(r, kScriptFormat);
  ScriptDoc doc;
  doc.name = r.string("name", "");
  const json& ops = r.array("ops");
  for (std::size_t i = 0; i < ops.size(); ++i) doc.ops.push_back(read_op(ops[i], child_path(r.path("ops"), i)));
  return doc;
}

std::string serialize_script(const ScriptDoc& doc) {
  json ops = json::array();
  for (const MorphPivotOp& op : doc.ops) ops.push_back(write_op(op));
  json j{{"format", kScriptFormat}, {"version", doc.version}};
  if (!doc.name.empty()) j["name"] = doc.name;
  j["ops"] = ops;
  return j.dump(2) + "\n";
}

MorphPivotOp parse_op(const std::string& text) { return read_op(parse_json(text), ""); }

std::string serialize_op(const MorphPivotOp& op) { return write_op(op).dump(); }

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot read " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path);
  out << text;
  if (!out) throw Error(ErrorCode::Io, "write failed for " + path);
}

}  // namespace rhombot
