#include "core/session.hpp"

#include "core/trajectory.hpp"
#include "json.hpp"

namespace rhombot {

using nlohmann::json;

namespace {

class RequestError : public Error {
 public:
  RequestError(ErrorCode code, const std::string& what, json details = json::object())
      : Error(code, what), details_(std::move(details)) {}
  const json& details() const { return details_; }

 private:
  json details_;
};

json connection_json(const Connection& c) {
  return {{"a", c.module_a},
          {"port_a", c.port_a},
          {"b", c.module_b},
          {"port_b", c.port_b},
          {"kind", c.kind == ConnectionKind::Tree ? "tree" : "loop"}};
}

json module_json(const ModuleSnapshot& m) {
  json poly = json::array();
  const ConvexPoly p = snapshot_footprint(m);
  for (const Vec2& v : p.vertices()) poly.push_back({v.x, v.y});
  return {{"id", m.id},         {"x", m.pose.x},           {"y", m.pose.y},
          {"yaw", m.pose.yaw},  {"sigma", m.sigma},        {"theta", m.theta()},
          {"offset", m.label_offset}, {"a", m.a},          {"polygon", poly}};
}

json state_json(const KTree& tree, std::uint64_t version) {
  json j;
  j["version"] = version;
  j["root"] = tree.root;
  j["base"] = {{"x", tree.base.x}, {"y", tree.base.y}, {"yaw", tree.base.yaw}};
  j["pending"] = tree.pending();
  j["orphans"] = tree.orphans;
  json mods = json::array();
  if (!tree.pending()) {
    const SimFrame f = snapshot(tree, world_poses(tree), 0.0, FrameEvent::Morph);
    for (const ModuleSnapshot& m : f.modules) {
      json e = module_json(m);
      auto it = tree.parent.find(m.id);
      if (it != tree.parent.end()) {
        e["parent"] = it->second.parent;
        e["parent_port"] = it->second.parent_port;
      } else {
        e["parent"] = nullptr;
      }
      const ModuleParams& p = tree.modules.at(m.id).params;
      e["theta_min"] = p.theta_min;
      e["theta_max"] = p.theta_max;
      mods.push_back(std::move(e));
    }
  }
  j["modules"] = mods;
  json cons = json::array();
  for (const Connection& c : tree.connections()) cons.push_back(connection_json(c));
  j["connections"] = cons;
  return j;
}

json report_json(const DockingReport& r) {
  return {{"position_offset", r.position_offset}, {"angular_offset", r.angular_offset}, {"pass", r.pass}};
}

// Structured details for the engine's typed failures.
json error_details(const Error& e) {
  if (const auto* c = dynamic_cast<const CollisionError*>(&e)) {
    return {{"time", c->time()}, {"first", c->first()}, {"second", c->second()}};
  }
  if (const auto* i = dynamic_cast<const InfeasibleError*>(&e)) return {{"residual", i->residual()}};
  if (const auto* m = dynamic_cast<const MisalignmentError*>(&e)) {
    return {{"position_offset", m->offsets().position}, {"angular_offset", m->offsets().angle}};
  }
  if (const auto* r = dynamic_cast<const RequestError*>(&e)) return r->details();
  return json::object();
}

const json& field(const json& payload, const char* key) {
  if (!payload.is_object() || !payload.contains(key)) {
    throw RequestError(ErrorCode::Usage, std::string("payload field '") + key + "' is required");
  }
  return payload.at(key);
}

void check_version(const json& payload, std::uint64_t current) {
  if (!payload.is_object() || !payload.contains("version")) return;
  const json& v = payload.at("version");
  if (!v.is_number_unsigned() && !v.is_number_integer()) throw RequestError(ErrorCode::Usage, "version must be an integer");
  if (v.get<std::uint64_t>() != current) {
    throw RequestError(ErrorCode::Conflict,
                       "stale state version " + std::to_string(v.get<std::uint64_t>()) + ", current is " +
                           std::to_string(current),
                       {{"version", current}});
  }
}

}  // namespace

const KTree& Session::tree() const {
  if (!tree_) throw Error(ErrorCode::Usage, "no scenario loaded");
  return *tree_;
}

std::string Session::state_text() const { return state_json(tree(), version_).dump(); }

void Session::install(KTree next) {
  history_.push_back(std::move(*tree_));
  if (history_.size() > kUndoDepth) history_.pop_front();
  tree_ = std::move(next);
  ++version_;
  proposals_.clear();
}

std::string frame_message(const SimFrame& frame) {
  json mods = json::array();
  for (const ModuleSnapshot& m : frame.modules) mods.push_back(module_json(m));
  json cons = json::array();
  for (const Connection& c : frame.connections) cons.push_back(connection_json(c));
  const json j{{"v", kProtocolVersion}, {"kind", "frame"},      {"time", frame.time},
               {"root", frame.root},    {"modules", mods},      {"connections", cons},
               {"events", json::array({frame_event_name(frame.event)})}};
  return j.dump();
}

SessionReply Session::handle(const std::string& message) {
  log_.push_back(message);
  SessionReply reply;
  json id = nullptr;
  std::string kind;
  try {
    json msg;
    try {
      msg = json::parse(message);
    } catch (const json::parse_error& e) {
      throw RequestError(ErrorCode::Parse, e.what());
    }
    if (!msg.is_object()) throw RequestError(ErrorCode::Parse, "message must be an object");
    if (msg.contains("id")) id = msg.at("id");
    if (!msg.contains("v") || msg.at("v") != kProtocolVersion) {
      throw RequestError(ErrorCode::Usage, "unsupported protocol version", {{"supported", kProtocolVersion}});
    }
    if (!msg.contains("kind") || !msg.at("kind").is_string()) throw RequestError(ErrorCode::Usage, "missing kind");
    kind = msg.at("kind").get<std::string>();
    const json payload = msg.value("payload", json::object());

    if (kind != "load" && kind != "subscribe_frames" && !tree_) {
      throw RequestError(ErrorCode::Usage, "'" + kind + "' before load");
    }

    json out = json::object();
    std::vector<SimFrame> frames;
    if (kind == "load") {
      const json& text = field(payload, "scenario");
      if (!text.is_string()) throw RequestError(ErrorCode::Usage, "scenario must be the document text");
      const ScenarioDoc doc = parse_scenario(text.get<std::string>());
      KTree tree = build_tree(doc);
      defaults_ = doc.defaults;
      tree_ = std::move(tree);
      history_.clear();
      proposals_.clear();
      ++version_;
      out = {{"version", version_}, {"modules", tree_->modules.size()}, {"name", doc.name}};
    } else if (kind == "get_state") {
      out = state_json(*tree_, version_);
    } else if (kind == "propose") {
      check_version(payload, version_);
      const MorphPivotOp op = parse_op(field(payload, "op").dump());
      MorphPivotResult result = morphpivot(*tree_, op, engine_options(defaults_));
      out["version"] = version_;
      out["report"] = report_json(result.report);
      out["docked"] = result.docked;
      out["frames"] = result.frames.size();
      out["preview"] = state_json(result.tree, version_ + 1);
      if (result.docked) {
        const std::string op_id = "op-" + std::to_string(next_op_++);
        out["op_id"] = op_id;
        proposals_[op_id] = {version_, std::move(result)};
      } else {
        out["op_id"] = nullptr;
      }
    } else if (kind == "commit") {
      const json& op_id = field(payload, "op_id");
      auto it = op_id.is_string() ? proposals_.find(op_id.get<std::string>()) : proposals_.end();
      if (it == proposals_.end()) {
        throw RequestError(ErrorCode::Conflict, "no pending proposal " + op_id.dump(), {{"version", version_}});
      }
      if (it->second.version != version_) {
        throw RequestError(ErrorCode::Conflict, "proposal was made against an older state", {{"version", version_}});
      }
      MorphPivotResult result = std::move(it->second.result);
      frames = std::move(result.frames);
      install(std::move(result.tree));
      out = {{"version", version_}, {"frames", frames.size()}, {"report", report_json(result.report)}};
    } else if (kind == "set_theta") {
      check_version(payload, version_);
      const json& module = field(payload, "module");
      const json& theta = field(payload, "theta_deg");
      if (!module.is_number_integer() || !theta.is_number()) {
        throw RequestError(ErrorCode::Usage, "set_theta needs an integer module and a numeric theta_deg");
      }
      const ModuleId m = module.get<int>();
      tree_->module(m);
      const EngineOptions options = engine_options(defaults_);
      MorphResult result = execute_morph(*tree_, {{m, deg2rad(theta.get<double>()), 0}}, options.morph_rate, options);
      frames = std::move(result.frames);
      install(std::move(result.tree));
      out = {{"version", version_}, {"frames", frames.size()}};
    } else if (kind == "undo") {
      if (history_.empty()) throw RequestError(ErrorCode::Conflict, "nothing to undo", {{"version", version_}});
      tree_ = std::move(history_.back());
      history_.pop_back();
      ++version_;
      proposals_.clear();
      out = {{"version", version_}};
    } else if (kind == "subscribe_frames") {
      subscribed_ = payload.value("enable", true);
      out = {{"subscribed", subscribed_}};
    } else {
      throw RequestError(ErrorCode::Usage, "unknown message kind '" + kind + "'");
    }

    reply.response = json{{"v", kProtocolVersion}, {"id", id}, {"kind", kind}, {"ok", true}, {"payload", out}}.dump();
    if (subscribed_) {
      for (const SimFrame& f : frames) reply.frames.push_back(frame_message(f));
    }
  } catch (const Error& e) {
    const json err{{"code", static_cast<int>(e.code())},
                   {"name", error_code_name(e.code())},
                   {"message", e.what()},
                   {"details", error_details(e)}};
    reply.response = json{{"v", kProtocolVersion}, {"id", id}, {"kind", kind}, {"ok", false}, {"error", err}}.dump();
  } catch (const std::exception& e) {
    const json err{{"code", static_cast<int>(ErrorCode::Internal)},
                   {"name", error_code_name(ErrorCode::Internal)},
                   {"message", e.what()},
                   {"details", json::object()}};
    reply.response = json{{"v", kProtocolVersion}, {"id", id}, {"kind", kind}, {"ok", false}, {"error", err}}.dump();
  }
  return reply;
}

Session Session::replay(const std::vector<std::string>& log) {
  Session s;
  for (const std::string& m : log) s.handle(m);
  return s;
}

}  // namespace rhombot
