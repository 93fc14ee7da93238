#include <filesystem>
#include <string>

#include "core/scenario.hpp"
#include "core/server.hpp"
#include "doctest.h"
#include "httplib.h"
#include "json.hpp"

using namespace rhombot;
using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string data(const std::string& rel) { return read_text_file(std::string(RHOMBOT_DATA_DIR) + "/" + rel); }

std::string msg(int id, const std::string& kind, json payload = json::object()) {
  return json{{"v", 1}, {"id", id}, {"kind", kind}, {"payload", payload}}.dump();
}

json triangle_op() { return json::parse(serialize_op(parse_script(data("scripts/triangle.json")).ops[0])); }

}  // namespace

TEST_CASE("message framing") {
  const std::string framed = encode_message("abc");
  REQUIRE(framed.size() == 7);
  CHECK(framed.substr(0, 4) == std::string("\0\0\0\3", 4));
  CHECK(framed.substr(4) == "abc");
  CHECK(parse_listen_address("0.0.0.0:9000") == std::pair<std::string, int>{"0.0.0.0", 9000});
  CHECK(parse_listen_address("7878") == std::pair<std::string, int>{"127.0.0.1", 7878});
  CHECK_THROWS_AS(parse_listen_address("host:port"), Error);
}

TEST_CASE("wire session load, propose, commit") {
  Server server({});
  server.start();
  REQUIRE(server.port() > 0);
  WireClient c("127.0.0.1", server.port());

  json r = json::parse(c.request(msg(1, "load", {{"scenario", data("scenarios/triangle.json")}})));
  REQUIRE(r.at("ok").get<bool>());
  CHECK(r.at("id") == 1);
  r = json::parse(c.request(msg(2, "subscribe_frames")));
  CHECK(r.at("ok").get<bool>());
  r = json::parse(c.request(msg(3, "propose", {{"op", triangle_op()}})));
  REQUIRE(r.at("payload").at("docked").get<bool>());

  std::vector<std::string> frames;
  json commit = json::parse(c.request(msg(4, "commit", {{"op_id", r.at("payload").at("op_id")}}), &frames));
  REQUIRE(commit.at("ok").get<bool>());
  CHECK(frames.size() == commit.at("payload").at("frames").get<std::size_t>());
  CHECK(json::parse(frames.back()).at("events").is_array());

  const json state = json::parse(c.request(msg(5, "get_state"))).at("payload");
  CHECK(state.at("version") == 2);
  server.stop();
}

TEST_CASE("two clients on one session conflict on stale commits") {
  Server server({});
  server.start();
  WireClient a("127.0.0.1", server.port());
  WireClient b("127.0.0.1", server.port());
  const std::string id = json::parse(a.request(msg(1, "attach"))).at("payload").at("session");
  json r = json::parse(b.request(msg(1, "attach", {{"session", id}})));
  REQUIRE(r.at("ok").get<bool>());

  a.request(msg(2, "load", {{"scenario", data("scenarios/triangle.json")}}));
  const json pa = json::parse(a.request(msg(3, "propose", {{"op", triangle_op()}})));
  const json pb = json::parse(b.request(msg(3, "propose", {{"op", triangle_op()}})));
  REQUIRE(pa.at("payload").at("docked").get<bool>());
  REQUIRE(pb.at("payload").at("docked").get<bool>());

  r = json::parse(a.request(msg(4, "commit", {{"op_id", pa.at("payload").at("op_id")}})));
  CHECK(r.at("ok").get<bool>());
  r = json::parse(b.request(msg(4, "commit", {{"op_id", pb.at("payload").at("op_id")}})));
  CHECK_FALSE(r.at("ok").get<bool>());
  CHECK(r.at("error").at("name") == "conflict");
  CHECK(r.at("error").at("details").at("version") == 2);

  r = json::parse(b.request(msg(5, "attach", {{"session", "s-999"}})));
  CHECK_FALSE(r.at("ok").get<bool>());
  server.stop();
}

TEST_CASE("static assets") {
  const fs::path dir = fs::temp_directory_path() / "rhombot_ui_test";
  fs::create_directories(dir);
  write_text_file((dir / "index.html").string(), "<html>planner</html>");
  ServerOptions o;
  o.http_port = 0;
  o.static_dir = dir.string();
  Server server(o);
  server.start();
  REQUIRE(server.http_port() > 0);
  httplib::Client http("127.0.0.1", server.http_port());
  auto res = http.Get("/index.html");
  REQUIRE(res);
  CHECK(res->status == 200);
  CHECK(res->body == "<html>planner</html>");
  res = http.Get("/api/info");
  REQUIRE(res);
  CHECK(json::parse(res->body).at("session_port") == server.port());
  res = http.Get("/missing.js");
  REQUIRE(res);
  CHECK(res->status == 404);
  server.stop();
  fs::remove_all(dir);
}
