// rhombot command-line front end. Talks to the simulator only through the C API.

#include <atomic>
#include <cmath>
#include <chrono>
#include <csignal>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "rhombot/rhombot.h"

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitValidation = 2;
constexpr int kExitPartial = 3;
constexpr int kExitInternal = 4;

constexpr double kPi = 3.14159265358979323846;

int verbosity = 0;

struct Failure {
  int exit_code;
  std::string message;
};

int exit_code_for(rb_status s) {
  switch (s) {
    case RB_OK:
      return kExitOk;
    case RB_ERR_USAGE:
      return kExitUsage;
    case RB_ERR_INTERNAL:
      return kExitInternal;
    default:
      return kExitValidation;
  }
}

void check(rb_status s) {
  if (s != RB_OK) throw Failure{exit_code_for(s), std::string(rb_status_name(s)) + ": " + rb_last_error()};
}

template <typename T, void (*Free)(T*)>
struct Handle {
  T* p = nullptr;
  ~Handle() { Free(p); }
};

using Scenario = Handle<rb_scenario, rb_scenario_free>;
using Script = Handle<rb_script, rb_script_free>;
using Sim = Handle<rb_sim, rb_sim_free>;

struct OwnedString {
  char* p = nullptr;
  ~OwnedString() { rb_string_free(p); }
  std::string str() const { return p ? p : ""; }
};

void log(const std::string& msg) {
  if (verbosity > 0) std::cerr << msg << "\n";
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Failure{kExitValidation, "cannot read " + path};
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw Failure{kExitValidation, "cannot write " + path.string()};
}

fs::path output_dir(const std::string& flag) {
  fs::path dir = flag;
  if (dir.empty()) {
    const char* env = std::getenv("RHOMBOT_OUT_DIR");
    dir = env && *env ? env : ".";
  }
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Failure{kExitValidation, "cannot create " + dir.string() + ": " + ec.message()};
  return dir;
}

// Engine overrides shared by the subcommands that run the engine.
struct Overrides {
  std::optional<double> pos_tol, ang_tol_deg, morph_rate, dt, clearance;
  bool simultaneous = false;
  bool sequential = false;

  void add(CLI::App* cmd) {
    cmd->add_option("--pos-tol", pos_tol, "docking position tolerance [m]")->check(CLI::PositiveNumber);
    cmd->add_option("--ang-tol-deg", ang_tol_deg, "docking angle tolerance [deg]")->check(CLI::PositiveNumber);
    cmd->add_option("--morph-rate", morph_rate, "folding rate [rad/s]")->check(CLI::PositiveNumber);
    cmd->add_option("--dt", dt, "frame interval [s]")->check(CLI::PositiveNumber);
    cmd->add_option("--clearance", clearance, "collision clearance [m]")->check(CLI::NonNegativeNumber);
    auto* sim = cmd->add_flag("--simultaneous", simultaneous, "morph every module at once");
    auto* seq = cmd->add_flag("--sequential", sequential, "morph in order groups");
    sim->excludes(seq);
  }

  void apply(rb_scenario* s) const {
    if (pos_tol) check(rb_scenario_set_default(s, "pos_tol", *pos_tol));
    if (ang_tol_deg) check(rb_scenario_set_default(s, "ang_tol_deg", *ang_tol_deg));
    if (morph_rate) check(rb_scenario_set_default(s, "morph_rate", *morph_rate));
    if (dt) check(rb_scenario_set_default(s, "dt", *dt));
    if (clearance) check(rb_scenario_set_default(s, "clearance", *clearance));
    if (simultaneous) check(rb_scenario_set_default(s, "sequential", 0));
    if (sequential) check(rb_scenario_set_default(s, "sequential", 1));
  }
};

rb_connection parse_connection(const std::string& text) {
  rb_connection c{};
  char tail = 0;
  if (std::sscanf(text.c_str(), "%d:%d:%d:%d%c", &c.a, &c.port_a, &c.b, &c.port_b, &tail) != 4) {
    throw Failure{kExitUsage, "connection '" + text + "' must be module:port:module:port"};
  }
  return c;
}

int parse_edge(const std::string& token) {
  std::string t = token;
  if (!t.empty() && (t[0] == 'E' || t[0] == 'e')) t = t.substr(1);
  if (t.size() != 1 || t[0] < '0' || t[0] > '9') throw Failure{kExitUsage, "bad interface index '" + token + "'"};
  const int k = t[0] - '0';
  if (k > 3) throw Failure{kExitUsage, "interface index " + token + " outside E0..E3"};
  return k;
}

std::string fixed(double v, int digits = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  std::string s = buf;
  if (s.find_first_not_of("-0.") == std::string::npos && s[0] == '-') s.erase(0, 1);
  return s;
}

int cmd_validate(const std::string& path) {
  Scenario s;
  check(rb_scenario_load(path.c_str(), &s.p));
  OwnedString diags;
  size_t count = 0;
  check(rb_scenario_validate(s.p, &diags.p, &count));
  if (count > 0) {
    std::cerr << diags.str();
    std::cerr << path << ": " << count << " problem(s)\n";
    return kExitValidation;
  }
  std::cout << path << ": ok, " << rb_scenario_module_count(s.p) << " modules\n";
  return kExitOk;
}

int cmd_simulate(const std::string& scenario, const std::string& script, const std::string& out_flag, bool svg,
                 const Overrides& ov) {
  Scenario s;
  check(rb_scenario_load(scenario.c_str(), &s.p));
  ov.apply(s.p);
  Script sc;
  check(rb_script_load(script.c_str(), &sc.p));
  const fs::path dir = output_dir(out_flag);
  Sim sim;
  const auto t0 = std::chrono::steady_clock::now();
  check(rb_simulate(s.p, sc.p, &sim.p));
  log("simulated " + std::to_string(rb_sim_completed(sim.p)) + "/" + std::to_string(rb_script_size(sc.p)) +
      " ops, " + std::to_string(rb_sim_frame_count(sim.p)) + " frames in " +
      std::to_string(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()) + " s");

  OwnedString traj, final_doc;
  check(rb_sim_trajectory(sim.p, &traj.p));
  write_file(dir / "trajectory.jsonl", traj.str());
  check(rb_sim_final_scenario(sim.p, &final_doc.p));
  write_file(dir / "final.json", final_doc.str());
  size_t svgs = 0;
  if (svg) {
    const fs::path frames = dir / "frames";
    fs::create_directories(frames);
    check(rb_sim_export_svgs(sim.p, frames.string().c_str(), &svgs));
  }
  for (size_t i = 0; i < rb_sim_completed(sim.p); ++i) {
    double pos = 0, ang = 0;
    int pass = 0;
    check(rb_sim_report(sim.p, i, &pos, &ang, &pass));
    std::cout << "op " << i << ": docking " << fixed(pos * 1e3, 4) << " mm " << fixed(ang * 180 / kPi, 4)
              << " deg " << (pass ? "pass" : "fail") << "\n";
  }
  std::cout << rb_sim_frame_count(sim.p) << " frames, " << svgs << " svg, output in " << dir.string() << "\n";

  size_t index = 0;
  rb_status code = RB_OK;
  const char* message = nullptr;
  if (rb_sim_failure(sim.p, &index, &code, &message)) {
    std::cerr << "op " << index << " failed (" << rb_status_name(code) << "): " << message << "\n";
    return kExitPartial;
  }
  return kExitOk;
}

int cmd_fk(const std::string& scenario, const std::vector<std::string>& tokens) {
  std::vector<int> edges;
  for (const std::string& tok : tokens) {
    std::stringstream ss(tok);
    std::string part;
    while (std::getline(ss, part, ',')) {
      if (!part.empty()) edges.push_back(parse_edge(part));
    }
  }
  Scenario s;
  check(rb_scenario_load(scenario.c_str(), &s.p));
  double pose[3];
  check(rb_fk(s.p, edges.data(), edges.size(), pose));
  std::cout << fixed(pose[0] * 180.0 / kPi) << " " << fixed(pose[1]) << " " << fixed(pose[2]) << "\n";
  return kExitOk;
}

int cmd_loop_solve(const std::string& scenario, const std::string& con_text, const std::vector<int>& morph,
                   bool equal) {
  Scenario s;
  check(rb_scenario_load(scenario.c_str(), &s.p));
  const rb_connection con = parse_connection(con_text);
  double r[3];
  check(rb_loop_residual(s.p, &con, r));
  std::cout << "residual before: " << fixed(r[0] * 180.0 / kPi) << " deg " << fixed(std::hypot(r[1], r[2]) * 1e3)
            << " mm\n";
  std::vector<double> theta(morph.size());
  check(rb_plan_alignment(s.p, &con, morph.data(), morph.size(), equal ? 1 : 0, theta.data()));
  for (size_t i = 0; i < morph.size(); ++i) {
    std::cout << "M" << morph[i] << " " << fixed(theta[i] * 180.0 / kPi) << "\n";
  }
  return kExitOk;
}

int cmd_torque(const std::vector<double>& thetas_deg, double a, double b, double holding, double servo_kgcm) {
  rb_actuation_params p;
  rb_actuation_defaults(&p);
  if (b > 0) p.magnet_position = b;
  if (holding > 0) p.holding_force = holding;
  if (servo_kgcm > 0) p.servo_torque = servo_kgcm * 0.0980665;
  std::printf("%10s %10s %10s %9s\n", "theta_deg", "M_d_Nm", "M_f_Nm", "feasible");
  for (double t : thetas_deg) {
    double md = 0, mf = 0;
    int ok = 0;
    check(rb_torque(&p, a, t * kPi / 180.0, &md, &mf, &ok));
    std::printf("%10.3f %10.4f %10.4f %9s\n", t, md, mf, ok ? "yes" : "no");
  }
  double th = 0;
  int found = 0;
  check(rb_disconnect_threshold(&p, a, &th, &found));
  if (found) {
    std::printf("threshold %.4f deg\n", th * 180.0 / kPi);
  } else {
    std::printf("threshold none\n");
  }
  return kExitOk;
}

int cmd_render(const std::string& input, const std::string& out_flag) {
  const fs::path dir = output_dir(out_flag);
  if (fs::path(input).extension() == ".jsonl") {
    const std::string text = read_file(input);
    size_t count = 0;
    check(rb_render_trajectory(text.c_str(), dir.string().c_str(), &count));
    std::cout << count << " svg written to " << dir.string() << "\n";
    return kExitOk;
  }
  Scenario s;
  check(rb_scenario_load(input.c_str(), &s.p));
  OwnedString svg;
  check(rb_scenario_render_svg(s.p, &svg.p));
  const fs::path out = dir / (fs::path(input).stem().string() + ".svg");
  write_file(out, svg.str());
  std::cout << out.string() << "\n";
  return kExitOk;
}

int cmd_evaluate(const std::string& scenario, const std::string& csv_path, int end) {
  Scenario s;
  check(rb_scenario_load(scenario.c_str(), &s.p));
  const std::string csv = read_file(csv_path);
  double rx = 0, ry = 0;
  check(rb_evaluate_rmse(s.p, end, csv.c_str(), &rx, &ry));
  std::cout << "rmse_x_mm " << fixed(rx * 1e3, 4) << "\nrmse_y_mm " << fixed(ry * 1e3, 4) << "\n";
  return kExitOk;
}

std::atomic<bool> g_stop{false};

extern "C" void on_signal(int) { g_stop = true; }

int cmd_serve(std::string listen, int http_port, const std::string& ui_dir) {
  if (listen.empty()) {
    const char* env = std::getenv("RHOMBOT_LISTEN");
    listen = env && *env ? env : "127.0.0.1:7878";
  }
  const auto colon = listen.rfind(':');
  const std::string host = colon == std::string::npos ? "127.0.0.1" : listen.substr(0, colon);
  int port = 0;
  try {
    port = std::stoi(colon == std::string::npos ? listen : listen.substr(colon + 1));
  } catch (const std::exception&) {
    throw Failure{kExitUsage, "bad listen address '" + listen + "'"};
  }
  if (!ui_dir.empty() && !fs::is_directory(ui_dir)) throw Failure{kExitUsage, "no such directory: " + ui_dir};
  rb_server* server = nullptr;
  check(rb_server_start(host.c_str(), port, http_port, ui_dir.empty() ? nullptr : ui_dir.c_str(), &server));
  std::cout << "session protocol on " << host << ":" << rb_server_port(server);
  if (rb_server_http_port(server) >= 0) std::cout << ", assets on http://" << host << ":" << rb_server_http_port(server);
  std::cout << std::endl;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
  rb_server_stop(server);
  rb_server_free(server);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"rhombot: planar rhombic-module reconfiguration simulator"};
  app.require_subcommand(1);
  app.add_flag("-v,--verbose", verbosity, "more diagnostics on stderr");

  std::string scenario, script, out_dir, input, csv, con, listen, ui_dir;
  std::vector<std::string> edges;
  std::vector<int> morph;
  std::vector<double> thetas;
  bool no_svg = false;
  bool equal = false;
  int end = 0;
  int http_port = -1;
  double a = 0.14, b = 0, holding = 0, servo = 0;
  Overrides ov;

  auto* validate = app.add_subcommand("validate", "check a scenario");
  validate->add_option("scenario", scenario)->required();

  auto* simulate = app.add_subcommand("simulate", "run a script and write trajectory, SVGs and final scenario");
  simulate->add_option("scenario", scenario)->required();
  simulate->add_option("script", script)->required();
  simulate->add_option("-o,--out-dir", out_dir, "output directory (default $RHOMBOT_OUT_DIR or .)");
  simulate->add_flag("--no-svg", no_svg, "skip per-frame SVG export");
  ov.add(simulate);

  auto* fk = app.add_subcommand("fk", "end pose of an interface sequence (yaw deg, x m, y m)");
  fk->add_option("scenario", scenario)->required();
  fk->add_option("edges", edges, "interface per module, e.g. E2 E1 or 2,1");

  auto* loop = app.add_subcommand("loop-solve", "folding angles that close a connection");
  loop->add_option("scenario", scenario)->required();
  loop->add_option("--connect", con, "module:port:module:port")->required();
  loop->add_option("--morph", morph, "modules allowed to fold")->required()->delimiter(',');
  loop->add_flag("--equal", equal, "one shared angle for all folding modules");

  auto* torque = app.add_subcommand("torque", "actuation vs resisting torque per folding angle");
  torque->add_option("theta_deg", thetas, "folding angles [deg]");
  torque->add_option("--a", a, "half side length [m]")->check(CLI::PositiveNumber);
  torque->add_option("--magnet-position", b, "electromagnet offset b [m]")->check(CLI::PositiveNumber);
  torque->add_option("--holding-force", holding, "connector holding force [N]")->check(CLI::PositiveNumber);
  torque->add_option("--servo-kgcm", servo, "servo stall torque [kg cm]")->check(CLI::PositiveNumber);

  auto* render = app.add_subcommand("render", "SVG of a scenario or of every frame of a trajectory (.jsonl)");
  render->add_option("input", input)->required();
  render->add_option("-o,--out-dir", out_dir, "output directory (default $RHOMBOT_OUT_DIR or .)");

  auto* evaluate = app.add_subcommand("evaluate", "RMSE of measured end points against the chain model");
  evaluate->add_option("scenario", scenario)->required();
  evaluate->add_option("measurements", csv, "CSV: label,theta_0..,x_mm,y_mm")->required();
  evaluate->add_option("--end", end, "end module of the chain")->required();

  auto* serve = app.add_subcommand("serve", "host planning sessions");
  serve->add_option("--listen", listen, "host:port (default $RHOMBOT_LISTEN or 127.0.0.1:7878)");
  serve->add_option("--http-port", http_port, "port for static UI assets (-1 disables)");
  serve->add_option("--ui-dir", ui_dir, "directory of UI assets");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*validate) return cmd_validate(scenario);
    if (*simulate) return cmd_simulate(scenario, script, out_dir, !no_svg, ov);
    if (*fk) return cmd_fk(scenario, edges);
    if (*loop) return cmd_loop_solve(scenario, con, morph, equal);
    if (*torque) return cmd_torque(thetas, a, b, holding, servo);
    if (*render) return cmd_render(input, out_dir);
    if (*evaluate) return cmd_evaluate(scenario, csv, end);
    if (*serve) return cmd_serve(listen, http_port, ui_dir);
  } catch (const Failure& f) {
    std::cerr << "rhombot: " << f.message << "\n";
    return f.exit_code;
  } catch (const std::exception& e) {
    std::cerr << "rhombot: internal error: " << e.what() << "\n";
    return kExitInternal;
  }
  return kExitUsage;
}
