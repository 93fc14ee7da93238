#include "rhombot/rhombot.h"

#include <cstdlib>
#include <cstring>
#include <memory>
#include <string>

#include "core/actuation.hpp"
#include "core/evaluation.hpp"
#include "core/scenario.hpp"
#include "core/server.hpp"
#include "core/session.hpp"
#include "core/trajectory.hpp"
#include "json.hpp"

using namespace rhombot;

struct rb_scenario {
  ScenarioDoc doc;
};

struct rb_script {
  ScriptDoc doc;
};

struct rb_sim {
  ScenarioDefaults defaults;
  std::string name;
  ScriptResult result;
};

struct rb_stroke {
  StrokeModel model;
};

struct rb_session {
  Session session;
};

struct rb_server {
  std::unique_ptr<Server> server;
};

namespace {

thread_local std::string g_last_error;

rb_status fail(ErrorCode code, const std::string& message) {
  g_last_error = message;
  return static_cast<rb_status>(code);
}

// Runs f, mapping exceptions to status codes and the thread-local message.
template <typename F>
rb_status guarded(F&& f) {
  try {
    f();
    g_last_error.clear();
    return RB_OK;
  } catch (const Error& e) {
    return fail(e.code(), e.what());
  } catch (const std::bad_alloc&) {
    return fail(ErrorCode::Internal, "out of memory");
  } catch (const std::exception& e) {
    return fail(ErrorCode::Internal, e.what());
  }
}

template <typename T>
void require(const T* p, const char* what) {
  if (p == nullptr) throw Error(ErrorCode::Usage, std::string(what) + " must not be NULL");
}

char* dup(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

Connection to_connection(const rb_connection* c) {
  require(c, "connection");
  return {c->a, c->port_a, c->b, c->port_b, ConnectionKind::Loop};
}

ActuationParams to_params(const rb_actuation_params* p) {
  require(p, "params");
  ActuationParams out;
  out.servo_torque = p->servo_torque;
  out.output_teeth = p->output_teeth;
  out.input_teeth = p->input_teeth;
  out.winch_radius = p->winch_radius;
  out.holding_force = p->holding_force;
  out.magnet_position = p->magnet_position;
  out.friction_torque = p->friction_torque;
  out.encoder_resolution = p->encoder_resolution;
  out.hysteresis_counts = p->hysteresis_counts;
  out.validate();
  return out;
}

// Scenario tree with its tree connections rebuilt for loop queries.
KTree tree_of(const rb_scenario* s) {
  require(s, "scenario");
  return build_tree(s->doc);
}

}  // namespace

extern "C" {

const char* rb_version(void) { return "1.0.0"; }

const char* rb_status_name(rb_status status) {
  if (status == RB_OK) return "ok";
  if (status < RB_ERR_USAGE || status > RB_ERR_INTERNAL) return "unknown";
  return error_code_name(static_cast<ErrorCode>(status));
}

const char* rb_last_error(void) { return g_last_error.c_str(); }

void rb_string_free(char* s) { std::free(s); }

rb_status rb_scenario_parse(const char* text, rb_scenario** out) {
  return guarded([&] {
    require(text, "text");
    require(out, "out");
    *out = new rb_scenario{parse_scenario(text)};
  });
}

rb_status rb_scenario_load(const char* path, rb_scenario** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    const std::string text = read_text_file(path);
    try {
      *out = new rb_scenario{parse_scenario(text)};
    } catch (const Error& e) {
      throw Error(e.code(), std::string(path) + ": " + e.what());
    }
  });
}

void rb_scenario_free(rb_scenario* s) { delete s; }

rb_status rb_scenario_serialize(const rb_scenario* s, char** out_text) {
  return guarded([&] {
    require(s, "scenario");
    require(out_text, "out_text");
    *out_text = dup(serialize_scenario(s->doc));
  });
}

rb_status rb_scenario_save(const rb_scenario* s, const char* path) {
  return guarded([&] {
    require(s, "scenario");
    require(path, "path");
    write_text_file(path, serialize_scenario(s->doc));
  });
}

rb_status rb_scenario_set_default(rb_scenario* s, const char* key, double value) {
  return guarded([&] {
    require(s, "scenario");
    require(key, "key");
    ScenarioDefaults& d = s->doc.defaults;
    const std::string k = key;
    if (k == "pos_tol") {
      d.pos_tol = value;
    } else if (k == "ang_tol_deg") {
      d.ang_tol_deg = value;
    } else if (k == "morph_rate") {
      d.morph_rate = value;
    } else if (k == "dt") {
      d.dt = value;
    } else if (k == "clearance") {
      d.clearance = value;
    } else if (k == "sequential") {
      d.sequential = value != 0.0;
    } else {
      throw Error(ErrorCode::Usage, "unknown engine default '" + k + "'");
    }
  });
}

size_t rb_scenario_module_count(const rb_scenario* s) { return s ? s->doc.modules.size() : 0; }

rb_status rb_scenario_validate(const rb_scenario* s, char** out_diagnostics, size_t* count) {
  return guarded([&] {
    require(s, "scenario");
    require(count, "count");
    const auto diags = validate_scenario(s->doc);
    std::string text;
    for (const Diagnostic& d : diags) text += (d.path.empty() ? std::string("/") : d.path) + ": " + d.message + "\n";
    *count = diags.size();
    if (out_diagnostics) *out_diagnostics = dup(text);
  });
}

rb_status rb_scenario_render_svg(const rb_scenario* s, char** out_svg) {
  return guarded([&] {
    require(out_svg, "out_svg");
    const KTree tree = tree_of(s);
    const std::vector<SimFrame> frames{snapshot(tree, world_poses(tree), 0.0, FrameEvent::Morph)};
    *out_svg = dup(render_svg(frames.front(), frames_view(frames)));
  });
}

rb_status rb_fk(const rb_scenario* s, const int* edges, size_t n, double out_pose[3]) {
  return guarded([&] {
    require(s, "scenario");
    require(out_pose, "out_pose");
    if (n > 0) require(edges, "edges");
    if (n > s->doc.modules.size()) {
      throw Error(ErrorCode::Usage, "sequence has " + std::to_string(n) + " interfaces but the scenario has " +
                                        std::to_string(s->doc.modules.size()) + " modules");
    }
    std::vector<ChainLink> chain;
    for (size_t i = 0; i < n; ++i) {
      const ScenarioModule& m = s->doc.modules[i];
      chain.push_back({ModuleState::from_theta(m.id, deg2rad(m.theta_deg), 0, m.params()), EdgeIndex(edges[i])});
    }
    const Pose2 p = forward_kinematics(chain);
    out_pose[0] = p.yaw;
    out_pose[1] = p.x;
    out_pose[2] = p.y;
  });
}

rb_status rb_loop_residual(const rb_scenario* s, const rb_connection* con, double out_residual[3]) {
  return guarded([&] {
    require(out_residual, "out_residual");
    const KTree tree = tree_of(s);
    const Pose2 r = loop_residual(alignment_loop(tree, to_connection(con)), tree.modules);
    out_residual[0] = r.yaw;
    out_residual[1] = r.x;
    out_residual[2] = r.y;
  });
}

rb_status rb_plan_alignment(const rb_scenario* s, const rb_connection* con, const int* morphing, size_t n,
                            int equal_angles, double* out_theta) {
  return guarded([&] {
    require(morphing, "morphing");
    require(out_theta, "out_theta");
    const KTree tree = tree_of(s);
    const std::vector<ModuleId> ids(morphing, morphing + n);
    const auto targets = plan_alignment(tree, to_connection(con), ids, equal_angles != 0);
    for (size_t i = 0; i < n; ++i) {
      out_theta[i] = tree.module(ids[i]).theta();
      for (const MorphTarget& t : targets) {
        if (t.module == ids[i]) out_theta[i] = t.theta;
      }
    }
  });
}

rb_status rb_script_parse(const char* text, rb_script** out) {
  return guarded([&] {
    require(text, "text");
    require(out, "out");
    *out = new rb_script{parse_script(text)};
  });
}

rb_status rb_script_load(const char* path, rb_script** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    const std::string text = read_text_file(path);
    try {
      *out = new rb_script{parse_script(text)};
    } catch (const Error& e) {
      throw Error(e.code(), std::string(path) + ": " + e.what());
    }
  });
}

void rb_script_free(rb_script* s) { delete s; }

size_t rb_script_size(const rb_script* s) { return s ? s->doc.ops.size() : 0; }

rb_status rb_simulate(const rb_scenario* s, const rb_script* script, rb_sim** out) {
  return guarded([&] {
    require(script, "script");
    require(out, "out");
    const KTree tree = tree_of(s);
    auto sim = std::make_unique<rb_sim>();
    sim->defaults = s->doc.defaults;
    sim->name = s->doc.name;
    sim->result = run_script(tree, script->doc.ops, engine_options(s->doc));
    *out = sim.release();
  });
}

void rb_sim_free(rb_sim* sim) { delete sim; }

size_t rb_sim_frame_count(const rb_sim* sim) { return sim ? sim->result.frames.size() : 0; }

size_t rb_sim_completed(const rb_sim* sim) { return sim ? sim->result.completed : 0; }

int rb_sim_failure(const rb_sim* sim, size_t* op_index, rb_status* code, const char** message) {
  if (sim == nullptr || !sim->result.failure) return 0;
  const ScriptFailure& f = *sim->result.failure;
  if (op_index) *op_index = f.index;
  if (code) *code = static_cast<rb_status>(f.code);
  if (message) *message = f.message.c_str();
  return 1;
}

rb_status rb_sim_report(const rb_sim* sim, size_t op_index, double* position_offset, double* angular_offset,
                        int* pass) {
  return guarded([&] {
    require(sim, "sim");
    if (op_index >= sim->result.reports.size()) {
      throw Error(ErrorCode::Usage, "no docking report for op " + std::to_string(op_index));
    }
    const DockingReport& r = sim->result.reports[op_index];
    if (position_offset) *position_offset = r.position_offset;
    if (angular_offset) *angular_offset = r.angular_offset;
    if (pass) *pass = r.pass ? 1 : 0;
  });
}

rb_status rb_sim_trajectory(const rb_sim* sim, char** out_jsonl) {
  return guarded([&] {
    require(sim, "sim");
    require(out_jsonl, "out_jsonl");
    *out_jsonl = dup(export_trajectory(sim->result.frames));
  });
}

rb_status rb_sim_final_scenario(const rb_sim* sim, char** out_text) {
  return guarded([&] {
    require(sim, "sim");
    require(out_text, "out_text");
    *out_text = dup(serialize_scenario(scenario_from_tree(sim->result.tree, sim->defaults, sim->name)));
  });
}

rb_status rb_sim_export_svgs(const rb_sim* sim, const char* dir, size_t* count) {
  return guarded([&] {
    require(sim, "sim");
    require(dir, "dir");
    const auto names = export_svgs(sim->result.frames, dir);
    if (count) *count = names.size();
  });
}

rb_status rb_render_trajectory(const char* trajectory_jsonl, const char* dir, size_t* count) {
  return guarded([&] {
    require(trajectory_jsonl, "trajectory");
    require(dir, "dir");
    const auto frames = parse_trajectory(trajectory_jsonl);
    if (frames.empty()) throw Error(ErrorCode::Validation, "trajectory has no frames");
    const auto names = export_svgs(frames, dir);
    if (count) *count = names.size();
  });
}

rb_status rb_evaluate_rmse(const rb_scenario* s, int end_module, const char* csv, double* rmse_x, double* rmse_y) {
  return guarded([&] {
    require(csv, "csv");
    require(rmse_x, "rmse_x");
    require(rmse_y, "rmse_y");
    const ChainModel model(tree_of(s), end_module);
    const RmseResult r = evaluate_rmse(parse_measurements(csv), model);
    *rmse_x = r.x;
    *rmse_y = r.y;
  });
}

void rb_actuation_defaults(rb_actuation_params* out) {
  if (out == nullptr) return;
  const ActuationParams p;
  out->servo_torque = p.servo_torque;
  out->output_teeth = p.output_teeth;
  out->input_teeth = p.input_teeth;
  out->winch_radius = p.winch_radius;
  out->holding_force = p.holding_force;
  out->magnet_position = p.magnet_position;
  out->friction_torque = p.friction_torque;
  out->encoder_resolution = p.encoder_resolution;
  out->hysteresis_counts = p.hysteresis_counts;
}

rb_status rb_torque(const rb_actuation_params* p, double a, double theta, double* actuation, double* resisting,
                    int* single_sided) {
  return guarded([&] {
    const ActuationParams params = to_params(p);
    if (!(theta > 0.0 && theta < kPi)) throw Error(ErrorCode::Usage, "folding angle must lie in (0, 180) deg");
    if (actuation) *actuation = actuation_torque(params, a, theta);
    if (resisting) *resisting = resisting_torque(params, a);
    if (single_sided) *single_sided = can_disconnect_single_sided(params, a, theta) ? 1 : 0;
  });
}

rb_status rb_disconnect_threshold(const rb_actuation_params* p, double a, double* theta, int* found) {
  return guarded([&] {
    require(theta, "theta");
    require(found, "found");
    const auto t = disconnect_threshold(to_params(p), a);
    *found = t ? 1 : 0;
    *theta = t.value_or(0.0);
  });
}

rb_status rb_stroke_new(const rb_actuation_params* p, double a, rb_stroke** out) {
  return guarded([&] {
    require(out, "out");
    *out = new rb_stroke{StrokeModel(to_params(p), a)};
  });
}

void rb_stroke_free(rb_stroke* s) { delete s; }

rb_status rb_stroke_step(rb_stroke* s, double from_theta, double to_theta, int direction, double* counts) {
  return guarded([&] {
    require(s, "stroke");
    require(counts, "counts");
    if (direction != 1 && direction != -1) throw Error(ErrorCode::Usage, "direction must be +1 or -1");
    *counts = s->model.servo_stroke(from_theta, to_theta,
                                    direction > 0 ? StrokeDirection::Forward : StrokeDirection::Reverse);
  });
}

double rb_counts_to_degrees(double counts, double resolution) { return counts_to_degrees(counts, resolution); }

rb_status rb_session_new(rb_session** out) {
  return guarded([&] {
    require(out, "out");
    *out = new rb_session{};
  });
}

void rb_session_free(rb_session* s) { delete s; }

rb_status rb_session_handle(rb_session* s, const char* message, char** out_response, char** out_frames) {
  return guarded([&] {
    require(s, "session");
    require(message, "message");
    require(out_response, "out_response");
    const SessionReply reply = s->session.handle(message);
    std::string frames;
    for (const std::string& f : reply.frames) frames += f + "\n";
    *out_response = dup(reply.response);
    if (out_frames) *out_frames = dup(frames);
  });
}

rb_status rb_session_state(const rb_session* s, char** out_state) {
  return guarded([&] {
    require(s, "session");
    require(out_state, "out_state");
    *out_state = dup(s->session.state_text());
  });
}

rb_status rb_session_log(const rb_session* s, char** out_log) {
  return guarded([&] {
    require(s, "session");
    require(out_log, "out_log");
    *out_log = dup(nlohmann::json(s->session.log()).dump());
  });
}

rb_status rb_session_replay(const char* log, rb_session** out) {
  return guarded([&] {
    require(log, "log");
    require(out, "out");
    std::vector<std::string> messages;
    try {
      messages = nlohmann::json::parse(log).get<std::vector<std::string>>();
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::Parse, std::string("session log: ") + e.what());
    }
    *out = new rb_session{Session::replay(messages)};
  });
}

rb_status rb_server_start(const char* host, int port, int http_port, const char* static_dir, rb_server** out) {
  return guarded([&] {
    require(out, "out");
    ServerOptions o;
    if (host) o.host = host;
    o.port = port;
    o.http_port = http_port;
    if (static_dir) o.static_dir = static_dir;
    auto server = std::make_unique<Server>(o);
    server->start();
    *out = new rb_server{std::move(server)};
  });
}

int rb_server_port(const rb_server* s) { return s ? s->server->port() : -1; }

int rb_server_http_port(const rb_server* s) { return s ? s->server->http_port() : -1; }

void rb_server_wait(rb_server* s) {
  if (s) s->server->wait();
}

void rb_server_stop(rb_server* s) {
  if (s) s->server->stop();
}

void rb_server_free(rb_server* s) { delete s; }

}  // extern "C"
