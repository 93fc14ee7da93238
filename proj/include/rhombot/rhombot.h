#ifndef RHOMBOT_RHOMBOT_H
#define RHOMBOT_RHOMBOT_H

/*
 * C interface to the rhombot simulator.
 *
 * Every fallible call returns rb_status. On failure the thread-local message
 * from rb_last_error() describes the problem. Strings returned through char**
 * out-parameters are owned by the caller and released with rb_string_free.
 * Angles are radians unless a name says otherwise; lengths are meters.
 */

#include <stddef.h>

#if defined(_WIN32)
#define RB_API __declspec(dllexport)
#else
#define RB_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum rb_status {
  RB_OK = 0,
  RB_ERR_USAGE = 1,
  RB_ERR_PARSE = 2,
  RB_ERR_VALIDATION = 3,
  RB_ERR_GEOMETRY = 4,
  RB_ERR_INFEASIBLE = 5,
  RB_ERR_COLLISION = 6,
  RB_ERR_CONNECTIVITY = 7,
  RB_ERR_OCCUPIED = 8,
  RB_ERR_MISALIGNED = 9,
  RB_ERR_PENDING = 10,
  RB_ERR_CONFLICT = 11,
  RB_ERR_IO = 12,
  RB_ERR_INTERNAL = 13
} rb_status;

typedef struct rb_scenario rb_scenario;
typedef struct rb_script rb_script;
typedef struct rb_sim rb_sim;
typedef struct rb_stroke rb_stroke;
typedef struct rb_session rb_session;
typedef struct rb_server rb_server;

typedef struct rb_connection {
  int a;
  int port_a;
  int b;
  int port_b;
} rb_connection;

RB_API const char* rb_version(void);
RB_API const char* rb_status_name(rb_status status);
/* Message of the last failed call on this thread, "" if none. */
RB_API const char* rb_last_error(void);
RB_API void rb_string_free(char* s);

/* ---- scenarios ---- */

RB_API rb_status rb_scenario_parse(const char* text, rb_scenario** out);
RB_API rb_status rb_scenario_load(const char* path, rb_scenario** out);
RB_API void rb_scenario_free(rb_scenario* s);
RB_API rb_status rb_scenario_serialize(const rb_scenario* s, char** out_text);
RB_API rb_status rb_scenario_save(const rb_scenario* s, const char* path);
/* Overrides one engine default: pos_tol, ang_tol_deg, morph_rate, dt, clearance, sequential. */
RB_API rb_status rb_scenario_set_default(rb_scenario* s, const char* key, double value);
RB_API size_t rb_scenario_module_count(const rb_scenario* s);
/* Diagnostics, one "path: message" per line; *count is 0 for a valid scenario. */
RB_API rb_status rb_scenario_validate(const rb_scenario* s, char** out_diagnostics, size_t* count);
/* SVG of the initial configuration. */
RB_API rb_status rb_scenario_render_svg(const rb_scenario* s, char** out_svg);

/* ---- kinematics ---- */

/* Composes the interface transforms edges[i] of the i-th module in document
 * order (as written, E0 carried by port 0). out_pose = {yaw, x, y}. */
RB_API rb_status rb_fk(const rb_scenario* s, const int* edges, size_t n, double out_pose[3]);
/* Loop residual {yaw, x, y} that closing con would have right now. */
RB_API rb_status rb_loop_residual(const rb_scenario* s, const rb_connection* con, double out_residual[3]);
/* Folding angles for `morphing` that close con; out_theta has n entries. */
RB_API rb_status rb_plan_alignment(const rb_scenario* s, const rb_connection* con, const int* morphing, size_t n,
                                   int equal_angles, double* out_theta);

/* ---- simulation ---- */

RB_API rb_status rb_script_parse(const char* text, rb_script** out);
RB_API rb_status rb_script_load(const char* path, rb_script** out);
RB_API void rb_script_free(rb_script* s);
RB_API size_t rb_script_size(const rb_script* s);

/* Runs the script. Returns RB_OK whenever the script ran, even partially;
 * query rb_sim_failure for the outcome. */
RB_API rb_status rb_simulate(const rb_scenario* s, const rb_script* script, rb_sim** out);
RB_API void rb_sim_free(rb_sim* sim);
RB_API size_t rb_sim_frame_count(const rb_sim* sim);
RB_API size_t rb_sim_completed(const rb_sim* sim);
/* 1 and the failing op when the script stopped early, 0 otherwise. *message
 * stays valid until rb_sim_free. */
RB_API int rb_sim_failure(const rb_sim* sim, size_t* op_index, rb_status* code, const char** message);
RB_API rb_status rb_sim_report(const rb_sim* sim, size_t op_index, double* position_offset, double* angular_offset,
                               int* pass);
RB_API rb_status rb_sim_trajectory(const rb_sim* sim, char** out_jsonl);
RB_API rb_status rb_sim_final_scenario(const rb_sim* sim, char** out_text);
RB_API rb_status rb_sim_export_svgs(const rb_sim* sim, const char* dir, size_t* count);

/* Renders every frame of a trajectory (JSON lines) into dir/frame_NNNN.svg. */
RB_API rb_status rb_render_trajectory(const char* trajectory_jsonl, const char* dir, size_t* count);

/* ---- evaluation ---- */

/* RMSE between measured end points (CSV text) and the chain from the root to end_module. */
RB_API rb_status rb_evaluate_rmse(const rb_scenario* s, int end_module, const char* csv, double* rmse_x,
                                  double* rmse_y);

/* ---- actuation ---- */

typedef struct rb_actuation_params {
  double servo_torque;      /* N m */
  int output_teeth;         /* Z1 */
  int input_teeth;          /* Z2 */
  double winch_radius;      /* m */
  double holding_force;     /* N */
  double magnet_position;   /* m */
  double friction_torque;   /* N m */
  double encoder_resolution;
  double hysteresis_counts;
} rb_actuation_params;

RB_API void rb_actuation_defaults(rb_actuation_params* out);
RB_API rb_status rb_torque(const rb_actuation_params* p, double a, double theta, double* actuation,
                           double* resisting, int* single_sided);
/* *found is 0 when no angle in (0, pi) permits single-sided disconnection. */
RB_API rb_status rb_disconnect_threshold(const rb_actuation_params* p, double a, double* theta, int* found);

RB_API rb_status rb_stroke_new(const rb_actuation_params* p, double a, rb_stroke** out);
RB_API void rb_stroke_free(rb_stroke* s);
/* direction: +1 forward (theta increasing), -1 reverse. */
RB_API rb_status rb_stroke_step(rb_stroke* s, double from_theta, double to_theta, int direction, double* counts);
RB_API double rb_counts_to_degrees(double counts, double resolution);

/* ---- sessions ---- */

RB_API rb_status rb_session_new(rb_session** out);
RB_API void rb_session_free(rb_session* s);
/* One protocol message in, one response out; frames (JSON lines, may be
 * empty) when the session is subscribed. out_frames may be NULL. */
RB_API rb_status rb_session_handle(rb_session* s, const char* message, char** out_response, char** out_frames);
RB_API rb_status rb_session_state(const rb_session* s, char** out_state);
/* Message log as a JSON array of strings. */
RB_API rb_status rb_session_log(const rb_session* s, char** out_log);
RB_API rb_status rb_session_replay(const char* log, rb_session** out);

/* ---- server ---- */

/* port 0 picks a free port; http_port -1 disables static serving. */
RB_API rb_status rb_server_start(const char* host, int port, int http_port, const char* static_dir,
                                 rb_server** out);
RB_API int rb_server_port(const rb_server* s);
RB_API int rb_server_http_port(const rb_server* s);
/* Blocks until rb_server_stop is called from another thread. */
RB_API void rb_server_wait(rb_server* s);
RB_API void rb_server_stop(rb_server* s);
RB_API void rb_server_free(rb_server* s);

#ifdef __cplusplus
}
#endif

#endif /* RHOMBOT_RHOMBOT_H */
