#include "core/trajectory.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <map>
#include <sstream>

#include "core/scenario.hpp"
#include "json.hpp"

namespace rhombot {

using nlohmann::json;

namespace {

json connection_json(const Connection& c) {
  return {{"a", c.module_a},
          {"port_a", c.port_a},
          {"b", c.module_b},
          {"port_b", c.port_b},
          {"kind", c.kind == ConnectionKind::Tree ? "tree" : "loop"}};
}

ModuleState snapshot_state(const ModuleSnapshot& m) {
  ModuleState s;
  s.id = m.id;
  s.sigma = m.sigma;
  s.label_offset = m.label_offset;
  s.params.a = m.a;
  return s;
}

// Fixed-point text so the output does not depend on stream state.
std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  std::string s = buf;
  if (s == "-0.000") s = "0.000";
  return s;
}

}  // namespace

std::string trajectory_line(const SimFrame& f) {
  json mods = json::array();
  for (const ModuleSnapshot& m : f.modules) {
    mods.push_back({{"id", m.id},
                    {"x", m.pose.x},
                    {"y", m.pose.y},
                    {"yaw", m.pose.yaw},
                    {"sigma", m.sigma},
                    {"theta", m.theta()},
                    {"offset", m.label_offset},
                    {"a", m.a}});
  }
  json cons = json::array();
  for (const Connection& c : f.connections) cons.push_back(connection_json(c));
  const json j{{"time", f.time}, {"root", f.root}, {"event", frame_event_name(f.event)}, {"modules", mods},
               {"connections", cons}};
  return j.dump();
}

std::string export_trajectory(const std::vector<SimFrame>& frames) {
  std::string out;
  for (const SimFrame& f : frames) out += trajectory_line(f) + "\n";
  return out;
}

std::vector<SimFrame> parse_trajectory(const std::string& text) {
  std::vector<SimFrame> frames;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      SimFrame f;
      f.time = j.at("time").get<double>();
      f.root = j.at("root").get<int>();
      f.event = frame_event_from_name(j.at("event").get<std::string>());
      for (const json& m : j.at("modules")) {
        f.modules.push_back({m.at("id").get<int>(),
                             Pose2(m.at("yaw").get<double>(), m.at("x").get<double>(), m.at("y").get<double>()),
                             m.at("sigma").get<double>(), m.at("offset").get<int>(), m.at("a").get<double>()});
      }
      for (const json& c : j.at("connections")) {
        const std::string kind = c.at("kind").get<std::string>();
        if (kind != "tree" && kind != "loop") throw Error(ErrorCode::Parse, "unknown connection kind " + kind);
        f.connections.push_back({c.at("a").get<int>(), c.at("port_a").get<int>(), c.at("b").get<int>(),
                                 c.at("port_b").get<int>(),
                                 kind == "tree" ? ConnectionKind::Tree : ConnectionKind::Loop});
      }
      frames.push_back(std::move(f));
    } catch (const json::exception& e) {
      throw Error(ErrorCode::Parse, "trajectory line " + std::to_string(lineno) + ": " + e.what());
    } catch (const Error& e) {
      throw Error(ErrorCode::Parse, "trajectory line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return frames;
}

ConvexPoly snapshot_footprint(const ModuleSnapshot& m) { return footprint(snapshot_state(m), m.pose); }

ViewBox frames_view(const std::vector<SimFrame>& frames, double margin) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  ViewBox v{inf, inf, -inf, -inf};
  for (const SimFrame& f : frames) {
    for (const ModuleSnapshot& m : f.modules) {
      const ConvexPoly poly = snapshot_footprint(m);
      for (const Vec2& p : poly.vertices()) {
        v.min_x = std::min(v.min_x, p.x);
        v.min_y = std::min(v.min_y, p.y);
        v.max_x = std::max(v.max_x, p.x);
        v.max_y = std::max(v.max_y, p.y);
      }
    }
  }
  if (v.min_x > v.max_x) return {-margin, -margin, margin, margin};
  return {v.min_x - margin, v.min_y - margin, v.max_x + margin, v.max_y + margin};
}

std::string render_svg(const SimFrame& frame, const ViewBox& view) {
  const double k = kSvgPixelsPerMeter;
  const double width = (view.max_x - view.min_x) * k;
  const double height = (view.max_y - view.min_y) * k;
  auto px = [&](Vec2 p) { return num((p.x - view.min_x) * k) + "," + num((view.max_y - p.y) * k); };
  auto attr_xy = [&](Vec2 p) {
    return "x=\"" + num((p.x - view.min_x) * k) + "\" y=\"" + num((view.max_y - p.y) * k) + "\"";
  };

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(width) << "\" height=\"" << num(height)
     << "\" viewBox=\"0 0 " << num(width) << " " << num(height) << "\">\n";
  os << "<title>t=" << num(frame.time) << " s " << frame_event_name(frame.event) << "</title>\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

  std::map<ModuleId, std::pair<ModuleState, Pose2>> placed;
  for (const ModuleSnapshot& m : frame.modules) {
    const ModuleState s = snapshot_state(m);
    placed.emplace(m.id, std::pair{s, m.pose});
    const ConvexPoly poly = footprint(s, m.pose);
    const auto& v = poly.vertices();
    os << "<g id=\"M" << m.id << "\">\n";
    os << "<polygon points=\"" << px(v[0]) << " " << px(v[1]) << " " << px(v[2]) << " " << px(v[3])
       << "\" fill=\"" << (m.id == frame.root ? "#f3d9a4" : "#d6e4f0") << "\" stroke=\"#333\" stroke-width=\"1.5\"/>\n";
    Vec2 center{0, 0};
    for (const Vec2& p : v) center = center + 0.25 * p;
    os << "<text " << attr_xy(center) << " font-size=\"14\" text-anchor=\"middle\">M" << m.id << "</text>\n";
    for (int e = 0; e < 4; ++e) {
      const Vec2 mid = 0.5 * (v[e] + v[(e + 1) % 4]);
      const Vec2 label = mid + 0.25 * (center - mid);
      os << "<text " << attr_xy(label) << " font-size=\"10\" text-anchor=\"middle\" fill=\"#555\">E" << e
         << "</text>\n";
    }
    if (m.id == frame.root) {
      const Vec2 base = 0.5 * (v[0] + v[1]);
      os << "<path d=\"M" << px(base) << " l-6,10 l12,0 z\" fill=\"#b03030\"/>\n";
    }
    os << "</g>\n";
  }
  for (const Connection& c : frame.connections) {
    auto it = placed.find(c.module_a);
    if (it == placed.end()) continue;
    const auto& [s, pose] = it->second;
    const ConvexPoly poly = footprint(s, pose);
    const auto v = poly.vertices();
    const int e = s.label_of_port(c.port_a).value();
    const Vec2 mid = 0.5 * (v[e] + v[(e + 1) % 4]);
    const char* fill = c.kind == ConnectionKind::Tree ? "#2a7a2a" : "#c07000";
    os << "<circle cx=\"" << num((mid.x - view.min_x) * k) << "\" cy=\"" << num((view.max_y - mid.y) * k)
       << "\" r=\"5\" fill=\"" << fill << "\"/>\n";
  }
  os << "</svg>\n";
  return os.str();
}

std::vector<std::string> export_svgs(const std::vector<SimFrame>& frames, const std::string& dir) {
  const ViewBox view = frames_view(frames);
  std::vector<std::string> names;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "frame_%04zu.svg", i);
    write_text_file((std::filesystem::path(dir) / name).string(), render_svg(frames[i], view));
    names.emplace_back(name);
  }
  return names;
}

}  // namespace rhombot
